"""End-to-end pipeline runs on synthetic inputs."""

import json
import os

import numpy as np
import pytest

from qrshuffle.config import PipelineConfig, parse_config
from qrshuffle.imageops import GridGeometry
from qrshuffle.pipeline import PipelineError, run_pipeline
from qrshuffle.qrspec import QrSpec
from qrshuffle.synth import (
    elliptical_module_mask,
    mask_image_from_modules,
    synthetic_portrait,
)

SPEC = QrSpec(version=5, ec_level="H")
SIDE = (SPEC.n + 2 * SPEC.quiet_zone) * 8


def fast_config(tmp_path, **loss_overrides) -> PipelineConfig:
    cfg = parse_config(
        "message = https://example.com/p/01\n"
        "loss.iterations = 80\n"
        + "".join(f"loss.{k} = {v}\n" for k, v in loss_overrides.items())
    )
    cfg.out_dir = str(tmp_path / "out")
    return cfg


def inputs(seed=0):
    portrait = synthetic_portrait(SIDE, seed)
    geom = GridGeometry(SPEC.quiet_zone * 8, SPEC.quiet_zone * 8, 8, SPEC.n)
    mask = mask_image_from_modules(elliptical_module_mask(SPEC.n), geom,
                                   portrait.shape)
    return portrait, mask


def test_run_pipeline_end_to_end(tmp_path):
    cfg = fast_config(tmp_path)
    portrait, mask = inputs()
    result = run_pipeline(cfg, source=portrait, face_mask=mask)
    assert result.decoded == cfg.message
    assert result.verify_report["decode_ok"]
    assert result.verify_report["e"] == 0
    for name in ("blueprint.png", "harmonized.png", "output.png",
                 "reshuffle_report.json", "trace.jsonl", "verify_report.json"):
        assert os.path.exists(os.path.join(cfg.out_dir, name)), name
    verify = json.load(open(os.path.join(cfg.out_dir, "verify_report.json")))
    assert verify == result.verify_report
    # trace is one JSON object per line
    with open(os.path.join(cfg.out_dir, "trace.jsonl")) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    assert lines and lines[-1]["e"] == 0


def test_run_pipeline_deterministic(tmp_path):
    portrait, mask = inputs(3)
    cfg_a = fast_config(tmp_path / "a")
    cfg_b = fast_config(tmp_path / "b")
    run_pipeline(cfg_a, source=portrait, face_mask=mask)
    run_pipeline(cfg_b, source=portrait, face_mask=mask)
    out_a = open(os.path.join(cfg_a.out_dir, "output.png"), "rb").read()
    out_b = open(os.path.join(cfg_b.out_dir, "output.png"), "rb").read()
    assert out_a == out_b


def test_run_pipeline_no_artifacts(tmp_path):
    cfg = fast_config(tmp_path)
    portrait, mask = inputs(1)
    result = run_pipeline(cfg, source=portrait, face_mask=mask,
                          write_artifacts=False)
    assert result.verify_report["decode_ok"]
    assert not os.path.exists(cfg.out_dir)


def test_run_pipeline_infeasible_face(tmp_path):
    # a face mask covering nearly the whole symbol exceeds RS capacity
    cfg = fast_config(tmp_path)
    portrait, _ = inputs(2)
    huge = np.full_like(portrait, 255.0)
    with pytest.raises(PipelineError) as exc_info:
        run_pipeline(cfg, source=portrait, face_mask=huge)
    err = exc_info.value
    assert err.stage == "reshuffle"
    assert err.reason == "infeasible"
    assert os.path.exists(os.path.join(cfg.out_dir, "reshuffle_report.json"))


def test_run_pipeline_external_stylized(tmp_path):
    cfg = fast_config(tmp_path)
    portrait, mask = inputs(4)
    stylized = np.clip(portrait * 0.9 + 10.0, 0, 255)
    result = run_pipeline(cfg, source=portrait, face_mask=mask,
                          stylized=stylized)
    assert result.verify_report["decode_ok"]
