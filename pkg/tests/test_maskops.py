from collections import deque

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blursynth.errors import ProposalLoadError
from blursynth.imagecore import save_mask
from blursynth.maskops import (
    ScoredProposalSet,
    connected_components,
    largest_object_mask,
    load_proposals,
    maybe_invert,
    proposal_distribution,
    sample_proposal_mask,
    save_proposals,
)

N_DRAWS = 10_000
FIVE_SIGMA = 5 * np.sqrt(N_DRAWS * 0.25)  # 250 for p = 0.5


def bfs_components(mask, connectivity):
    """Plain flood fill; returns a list of pixel sets."""
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or seen[i, j]:
                continue
            pixels, queue = set(), deque([(i, j)])
            seen[i, j] = True
            while queue:
                a, b = queue.popleft()
                pixels.add((a, b))
                for di, dj in steps:
                    na, nb = a + di, b + dj
                    if 0 <= na < h and 0 <= nb < w and mask[na, nb] and not seen[na, nb]:
                        seen[na, nb] = True
                        queue.append((na, nb))
            comps.append(pixels)
    return comps


def test_single_block():
    mask = np.zeros((5, 5), bool)
    mask[1:4, 1:4] = True
    comps = connected_components(mask)
    assert len(comps) == 1 and comps[0][1] == 9
    np.testing.assert_array_equal(comps[0][2], mask)


def test_empty_mask():
    assert connected_components(np.zeros((4, 4), bool)) == []


def test_diagonal_pixels():
    mask = np.array([[1, 0], [0, 1]], bool)
    assert len(connected_components(mask, 8)) == 1
    assert len(connected_components(mask, 4)) == 2


def test_tie_order_by_first_pixel():
    mask = np.zeros((4, 6), bool)
    mask[2, 0:2] = True  # later in row-major order
    mask[0, 3:5] = True
    comps = connected_components(mask)
    assert [c[1] for c in comps] == [2, 2]
    assert comps[0][2][0, 3] and comps[1][2][2, 0]


@settings(max_examples=60, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.sampled_from([4, 8]))
def test_components_match_bfs_and_partition(mask, connectivity):
    comps = connected_components(mask, connectivity)
    oracle = bfs_components(mask, connectivity)
    got = [set(zip(*np.nonzero(c[2]))) for c in comps]
    assert sorted(map(sorted, got)) == sorted(map(sorted, oracle))
    sizes = [c[1] for c in comps]
    assert sizes == sorted(sizes, reverse=True)
    assert all(c[1] == c[2].sum() for c in comps)
    union = np.zeros_like(mask)
    for c in comps:
        assert not (union & c[2]).any()
        union |= c[2]
    np.testing.assert_array_equal(union, mask)


def test_largest_object_single_label():
    labels = np.zeros((10, 10), int)
    labels[0:4, 0:10] = 2
    np.testing.assert_array_equal(largest_object_mask(labels), labels == 2)


def test_largest_object_empty_map():
    assert not largest_object_mask(np.zeros((6, 7), int)).any()


def test_largest_object_two_blob_label():
    # label 1: 60 + 40 px in two blobs (100 total); label 2: 80 px in one blob
    labels = np.zeros((20, 20), int)
    labels[0:6, 0:10] = 1    # 60
    labels[0:4, 12:20] = 1   # 32
    labels[4, 12:20] = 1     # +8 = 40
    labels[10:18, 0:10] = 2  # 80
    expected = np.zeros((20, 20), bool)
    expected[0:6, 0:10] = True
    # exhaustive count oracle
    counts = {v: int((labels == v).sum()) for v in (1, 2)}
    assert counts == {1: 100, 2: 80}
    blobs = bfs_components(labels == 1, 8)
    assert sorted(len(b) for b in blobs) == [40, 60]
    np.testing.assert_array_equal(largest_object_mask(labels), expected)


def test_softmax_closed_forms():
    np.testing.assert_allclose(proposal_distribution([0, 0]), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(proposal_distribution([np.log(2), 0]), [2 / 3, 1 / 3], atol=1e-15)
    with pytest.raises(ValueError):
        proposal_distribution([])


def test_softmax_against_mpmath():
    scores = [5, 1, 1]
    with mpmath.workdps(50):
        e = [mpmath.exp(mpmath.mpf(s)) for s in scores]
        oracle = [float(x / mpmath.fsum(e)) for x in e]
    np.testing.assert_allclose(proposal_distribution(scores), oracle, rtol=0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-100, 100))
def test_softmax_shift_invariant(scores, c):
    p = proposal_distribution(scores)
    assert abs(p.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(proposal_distribution(np.asarray(scores) + c), p, rtol=0, atol=1e-12)


def _proposals(scores, shape=(4, 4)):
    masks = []
    for i in range(len(scores)):
        m = np.zeros(shape, bool)
        m.flat[i] = True
        masks.append(m)
    return ScoredProposalSet(masks, scores)


def test_single_proposal_always_chosen(rng):
    ps = _proposals([3.0])
    for _ in range(20):
        np.testing.assert_array_equal(sample_proposal_mask(ps, rng), ps.proposals[0])


def test_equal_scores_binomial(rng):
    ps = _proposals([1.0, 1.0])
    first = sum(sample_proposal_mask(ps, rng, return_index=True)[1] == 0 for _ in range(N_DRAWS))
    assert abs(first - N_DRAWS / 2) <= FIVE_SIGMA


def test_skewed_scores_binomial(rng):
    ps = _proposals([np.log(3.0), 0.0])  # p = 0.75 / 0.25
    first = sum(sample_proposal_mask(ps, rng, return_index=True)[1] == 0 for _ in range(N_DRAWS))
    assert abs(first - 0.75 * N_DRAWS) <= 5 * np.sqrt(N_DRAWS * 0.75 * 0.25)


def test_sampling_is_deterministic_and_uses_one_draw():
    ps = _proposals([0.3, 1.2, -0.4])
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    picks_a = [sample_proposal_mask(ps, a, return_index=True)[1] for _ in range(50)]
    picks_b = [sample_proposal_mask(ps, b, return_index=True)[1] for _ in range(50)]
    assert picks_a == picks_b
    c, d = np.random.default_rng(9), np.random.default_rng(9)
    sample_proposal_mask(ps, c)
    d.random()
    assert c.random() == d.random()


def test_invert_extremes(rng):
    mask = rng.random((6, 6)) < 0.3
    np.testing.assert_array_equal(maybe_invert(mask, 0.0, rng), mask)
    np.testing.assert_array_equal(maybe_invert(mask, 1.0, rng), ~mask)
    np.testing.assert_array_equal(maybe_invert(maybe_invert(mask, 1.0, rng), 1.0, rng), mask)
    with pytest.raises(ValueError):
        maybe_invert(mask, 1.5, rng)


def test_invert_binomial(rng):
    mask = np.zeros((2, 2), bool)
    flips = sum(maybe_invert(mask, 0.5, rng, return_flag=True)[1] for _ in range(N_DRAWS))
    assert abs(flips - N_DRAWS / 2) <= FIVE_SIGMA


def test_invert_consumes_one_draw():
    a, b = np.random.default_rng(2), np.random.default_rng(2)
    maybe_invert(np.zeros((3, 3), bool), 0.5, a)
    b.random()
    assert a.random() == b.random()


def test_proposal_set_validation():
    with pytest.raises(ValueError):
        ScoredProposalSet([], [])
    with pytest.raises(ValueError):
        ScoredProposalSet([np.zeros((2, 2), bool)], [1.0, 2.0])
    with pytest.raises(ValueError):
        ScoredProposalSet([np.zeros((2, 2), bool), np.zeros((3, 2), bool)], [1.0, 2.0])
    with pytest.raises(ValueError):
        ScoredProposalSet([np.zeros((2, 2), bool)], [float("nan")])


def test_proposal_roundtrip(tmp_path, rng):
    ps = ScoredProposalSet([rng.random((5, 7)) < 0.5 for _ in range(3)], [0.25, -1.5, 3.0])
    save_proposals(ps, tmp_path / "p")
    back = load_proposals(tmp_path / "p")
    assert back.scores == ps.scores
    for a, b in zip(back.proposals, ps.proposals):
        np.testing.assert_array_equal(a, b)


def test_proposal_count_mismatch(tmp_path):
    d = tmp_path / "p"
    d.mkdir()
    save_mask(np.ones((3, 3), bool), d / "proposal_0000.png")
    (d / "scores.txt").write_text("1.0\n2.0\n")
    with pytest.raises(ProposalLoadError):
        load_proposals(d)
    with pytest.raises(ProposalLoadError):
        load_proposals(tmp_path / "nowhere")
