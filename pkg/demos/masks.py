"""
Blur masks from proposals and labels
====================================

Proposals are drawn with softmax probabilities over their scores, then the
mask is inverted half of the time so that objects and backgrounds are both
seen blurred.
"""

from collections import Counter

import numpy as np

from blursynth.maskops import largest_object_mask, maybe_invert, proposal_distribution, sample_proposal_mask
from blursynth.toyscenes import proposals_from_labels, textured_scene

rng = np.random.default_rng(1)
_, labels = textured_scene(rng, (120, 160))
proposals = proposals_from_labels(labels, rng)

probs = proposal_distribution(proposals.scores)
for i, (s, p) in enumerate(zip(proposals.scores, probs)):
    print(f"proposal {i}: score {s:+.2f}  p={p:.3f}  area {proposals.proposals[i].mean():.2f}")

# Empirical frequencies track the softmax.
picks = Counter(sample_proposal_mask(proposals, rng, return_index=True)[1] for _ in range(5000))
print("drawn:", {i: round(picks[i] / 5000, 3) for i in sorted(picks)})

# Weak supervision instead uses the largest blob of the most frequent label.
obj = largest_object_mask(labels)
print(f"largest object covers {obj.mean():.1%} of the frame")

inverted = sum(maybe_invert(obj, 0.5, rng, return_flag=True)[1] for _ in range(5000))
print(f"inverted {inverted} of 5000 draws")
