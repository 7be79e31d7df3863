import dataclasses
import io
import json

import numpy as np
import pytest
from PIL import Image

from blursynth.augment import AugmentConfig
from blursynth.blurkernel import BlurSpec, realize_kernel
from blursynth.errors import ConfigError
from blursynth.imagecore import encode_image, encode_mask, load_image, load_label_map, load_mask
from blursynth.maskops import largest_object_mask
from blursynth.pipeline import (
    INCOMPLETE_MARKER,
    GeneratorConfig,
    generate_dataset,
    generate_sample,
    load_manifest,
    pack_record,
    read_stream,
    regenerate,
    sample_seed,
    stream_samples,
    tree_digest,
)
from blursynth.toyscenes import write_corpus

NO_AUGMENT = dict(max_rotation=0.0, max_translation=0.0, scale_range=(1.0, 1.0), flip_prob=0.0,
                  crop_fraction_range=(1.0, 1.0), brightness_range=(1.0, 1.0), contrast_range=(1.0, 1.0),
                  saturation_range=(1.0, 1.0), jpeg_prob=0.0)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    """Ten 64x80 scenes."""
    return write_corpus(tmp_path_factory.mktemp("small"), 10, seed=11, shape=(64, 80))


def cfg_for(root, **kw):
    base = dict(source=str(root / "images"), proposal_dir=str(root / "proposals"),
                label_dir=str(root / "labels"))
    base.update(kw)
    return GeneratorConfig(**base).validate()


def test_sample_deterministic(small_corpus):
    cfg = cfg_for(small_corpus, master_seed=5)
    a, b = generate_sample(cfg, 3, 2), generate_sample(cfg, 3, 2)
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(a.mask, b.mask)
    assert a.meta.record() == b.meta.record()
    assert a.image.shape == (224, 224, 3) and a.mask.shape == (224, 224) and a.mask.dtype == bool
    c = generate_sample(dataclasses.replace(cfg, master_seed=6), 3, 2)
    assert c.meta.sample_seed != a.meta.sample_seed


def test_seed_mix_is_index_sensitive():
    seeds = {sample_seed(0, i, s) for i in range(20) for s in range(20)}
    assert len(seeds) == 400
    assert sample_seed(1, 0, 0) != sample_seed(0, 0, 0)
    assert sample_seed(0, 0, 0, attempt=1) != sample_seed(0, 0, 0)


def test_labels_mode_uses_largest_object(small_corpus):
    shape = (64, 80)
    aug = dataclasses.replace(AugmentConfig(), output_size=shape, **NO_AUGMENT)
    cfg = cfg_for(small_corpus, mask_mode="labels", p_inv=0.0, augment=aug)
    for i in range(4):
        pair = generate_sample(cfg, i, 0)
        labels = load_label_map(small_corpus / "labels" / f"scene_{i:04d}.png")
        np.testing.assert_array_equal(pair.mask, largest_object_mask(labels))
        assert pair.meta.mask_source.startswith("label:") and not pair.meta.inverted


def test_halo_free_output_keeps_sharp_pixels(small_corpus):
    shape = (64, 80)
    aug = dataclasses.replace(AugmentConfig(), output_size=shape, **NO_AUGMENT)
    cfg = cfg_for(small_corpus, augment=aug)
    pair = generate_sample(cfg, 2, 1)
    src = load_image(small_corpus / "images" / "scene_0002.png")
    np.testing.assert_array_equal(pair.image[~pair.mask], src[~pair.mask])


def test_blur_kind_counts(small_corpus):
    cfg = cfg_for(small_corpus, motion_ratio=0.5, samples_per_image=10)
    kinds = [generate_sample(cfg, i, s).meta.blur.kind for i in range(10) for s in range(10)]
    assert abs(kinds.count("motion") - 50) <= 25


def test_mask_balance(small_corpus):
    cfg = cfg_for(small_corpus, p_inv=0.5)
    fractions = [generate_sample(cfg, i, s).mask.mean() for i in range(10) for s in range(50)]
    assert 0.2 <= np.mean(fractions) <= 0.8


def test_dataset_layout_and_determinism(small_corpus, tmp_path):
    cfg = cfg_for(small_corpus, samples_per_image=2, output=str(tmp_path / "a"))
    m = generate_dataset(cfg)
    out = tmp_path / "a"
    assert len(m.records) == 20 and not m.skipped
    assert not (out / INCOMPLETE_MARKER).exists()
    assert sorted(p.name for p in (out / "images").iterdir())[0] == "000000_0000.png"
    records = load_manifest(out / "manifest.jsonl")
    assert records == m.records
    for key in ("id", "image_path", "mask_path", "source_image", "blur_kind", "elastic_seed",
                "mask_source", "inverted", "sample_seed"):
        assert key in records[0]
    assert json.loads((out / "config.json").read_text())["schema_version"] == "1"
    m2 = generate_dataset(dataclasses.replace(cfg, output=str(tmp_path / "b")))
    assert m2.sha256 == m.sha256
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_workers_do_not_change_output(small_corpus, tmp_path):
    base = cfg_for(small_corpus, samples_per_image=2, master_seed=99)
    generate_dataset(dataclasses.replace(base, workers=1, output=str(tmp_path / "w1")))
    generate_dataset(dataclasses.replace(base, workers=3, output=str(tmp_path / "w3")))
    assert tree_digest(tmp_path / "w1") == tree_digest(tmp_path / "w3")


def test_manifest_rerealizes_images(small_corpus, tmp_path):
    cfg = cfg_for(small_corpus, output=str(tmp_path / "d"))
    m = generate_dataset(cfg)
    for rec in m.records:
        pair = regenerate(cfg, rec)
        stored = load_image(tmp_path / "d" / rec["image_path"])
        assert np.abs(pair.image - stored).max() <= 1 / 255
        np.testing.assert_array_equal(pair.mask, load_mask(tmp_path / "d" / rec["mask_path"]))
        K = realize_kernel(BlurSpec.from_record(rec))
        np.testing.assert_array_equal(K, realize_kernel(pair.meta.blur))


def test_stream_count_zero_and_first_record(small_corpus):
    cfg = cfg_for(small_corpus)
    sink = io.BytesIO()
    assert stream_samples(cfg, sink, 0) == 0 and sink.getvalue() == b""
    sink = io.BytesIO()
    assert stream_samples(cfg, sink, 12) == 12
    first = generate_sample(cfg, 0, 0)
    expected = pack_record(encode_image(first.image), encode_mask(first.mask), first.meta.record())
    assert sink.getvalue().startswith(expected)
    parsed = list(read_stream(io.BytesIO(sink.getvalue())))
    assert len(parsed) == 12
    assert [r["id"] for _, _, r in parsed][9:] == ["000009_0000", "000000_0001", "000001_0001"]
    np.testing.assert_array_equal(parsed[0][1], first.mask)


class ClosingSink(io.BytesIO):
    def __init__(self, limit):
        super().__init__()
        self.limit = limit
        self.writes = 0

    def write(self, data):
        if self.writes == self.limit:
            raise BrokenPipeError
        self.writes += 1
        return super().write(data)


def test_stream_stops_cleanly_on_closed_sink(small_corpus):
    assert stream_samples(cfg_for(small_corpus), ClosingSink(3)) == 3


def test_degenerate_source_is_skipped(tmp_path):
    root = write_corpus(tmp_path / "c", 2, seed=1, shape=(64, 64))
    Image.fromarray(np.zeros((64, 64), np.uint8), mode="L").save(root / "labels" / "scene_0001.png")
    cfg = cfg_for(root, mask_mode="labels", output=str(tmp_path / "out"))
    m = generate_dataset(cfg)
    assert [r["id"] for r in m.records] == ["000000_0000"]
    assert [(i, s) for i, s, _ in m.skipped] == [(1, 0)]


@pytest.mark.parametrize("bad", [
    dict(mask_mode="labels", label_dir=None),
    dict(mask_mode="boxes"),
    dict(p_inv=1.2),
    dict(samples_per_image=0),
    dict(workers=0),
    dict(master_seed=-1),
    dict(inpaint_radius=0.0),
    dict(sigma_min=6.0),
    dict(augment=dataclasses.replace(AugmentConfig(), jpeg_quality_range=(0, 50))),
    dict(augment=dataclasses.replace(AugmentConfig(), crop_fraction_range=(0.9, 0.5))),
])
def test_config_errors(small_corpus, bad):
    with pytest.raises(ConfigError):
        cfg_for(small_corpus, **bad)


def test_config_dict_roundtrip(small_corpus):
    cfg = cfg_for(small_corpus, master_seed=3, workers=4, output="/tmp/x")
    back = GeneratorConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert dataclasses.replace(cfg, workers=1, output=None).content_hash() == cfg.content_hash()
    with pytest.raises(ConfigError, match="bogus"):
        GeneratorConfig.from_dict(dict(cfg.to_dict(), bogus=1))
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"mask_mode": "labels"})


def test_missing_source_is_config_error(tmp_path):
    cfg = GeneratorConfig(source=str(tmp_path / "none"), proposal_dir=str(tmp_path), output=str(tmp_path / "o"))
    with pytest.raises(ConfigError):
        generate_dataset(cfg)
