"""
Streaming samples
=================

Instead of writing a dataset, samples can be produced on the fly as
length-prefixed records, which a trainer reads back in index order.
"""

import io
import sys
from pathlib import Path

from blursynth.pipeline import GeneratorConfig, read_stream, stream_samples
from blursynth.toyscenes import write_corpus

root = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output/stream")
corpus = write_corpus(root / "corpus", 3, seed=9, shape=(96, 128))
cfg = GeneratorConfig(source=str(corpus / "images"), proposal_dir=str(corpus / "proposals"))

buf = io.BytesIO()
n = stream_samples(cfg, buf, count=6)
print(f"{n} records, {len(buf.getvalue())} bytes")

# Flat index n is image n % 3, sample n // 3: one pass over the sources per epoch.
for image, mask, record in read_stream(io.BytesIO(buf.getvalue())):
    print(record["id"], record["blur_kind"], image.shape, f"blurred {mask.mean():.0%}")
