"""End-to-end pipeline: extract -> reshuffle -> blueprint -> stylize ->
harmonize -> enhance -> verify, with all intermediate artifacts on disk."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .enhance import enforce_quiet_zone, enhance, harmonize_markers
from .imageops import GridGeometry, load_gray_png, resample_to_grid, save_gray_png
from .qrspec import QrSpec
from .reshuffle import (
    Blueprint,
    InfeasibleError,
    RegionSets,
    build_blueprint,
    face_mask_to_modules,
    reshuffle,
)
from .scanner import DecodeError, count_errors, decode_message, extract_modules
from .synth import blend_stand_in

VERIFY_SCHEMA_VERSION = 1


class PipelineError(Exception):
    """Stage failure with a machine-readable reason."""

    def __init__(self, stage: str, reason: str, detail: dict | None = None):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason
        self.detail = detail or {}

    def to_dict(self) -> dict:
        return {"stage": self.stage, "reason": self.reason, **self.detail}


@dataclass
class PipelineResult:
    out_dir: str
    verify_report: dict
    geometry: GridGeometry

    @property
    def decoded(self) -> bytes:
        return bytes.fromhex(self.verify_report["decoded_hex"])


def _verify(image: np.ndarray, blueprint: Blueprint, spec: QrSpec,
            message: bytes, tau: float) -> dict:
    observed = extract_modules(image, blueprint.geometry, spec, tau)
    errors = count_errors(observed, blueprint.target_matrix, spec,
                          blueprint.regions.face)
    try:
        decoded, corrected = decode_message(observed, spec)
        decode_ok = decoded == message
        failure = None if decode_ok else "decoded message differs"
    except DecodeError as exc:
        decoded, corrected = b"", -1
        decode_ok = False
        failure = str(exc)
    return {
        "schema_version": VERIFY_SCHEMA_VERSION,
        "decode_ok": decode_ok,
        "decoded_hex": decoded.hex(),
        "corrected_bytes": corrected,
        "e": errors.e,
        "e_f": errors.e_f,
        "per_block_errors": errors.per_block_errors,
        "failure": failure,
    }


def run_pipeline(config: PipelineConfig,
                 source: np.ndarray | None = None,
                 face_mask: np.ndarray | None = None,
                 stylized: np.ndarray | None = None,
                 write_artifacts: bool = True) -> PipelineResult:
    """Run all stages; arrays may be passed directly instead of paths.

    Artifacts written to `config.out_dir`: blueprint.png, harmonized.png,
    output.png, reshuffle_report.json, trace.jsonl, verify_report.json.
    Raises PipelineError on stage failure (infeasible reshuffle, verify
    failure) and OSError/ConfigError on I/O problems.
    """
    spec = QrSpec(version=config.qr_version, ec_level=config.qr_ec_level)
    if source is None:
        source = load_gray_png(config.source)
    if face_mask is None:
        face_mask = load_gray_png(config.face_mask)
    if stylized is None and config.stylized:
        stylized = load_gray_png(config.stylized)

    out_dir = config.out_dir
    if write_artifacts:
        os.makedirs(out_dir, exist_ok=True)

    def emit(name: str, data) -> None:
        if not write_artifacts:
            return
        path = os.path.join(out_dir, name)
        if isinstance(data, np.ndarray):
            save_gray_png(path, data)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(data)

    # stage 1: grid alignment, base matrix, reshuffle around the face
    source, geom = resample_to_grid(source, spec.n, spec.quiet_zone)
    face_px, _ = resample_to_grid(face_mask, spec.n, spec.quiet_zone,
                                  geom.module_px)
    face_modules = face_mask_to_modules(face_px, geom,
                                        config.face_mask_coverage)
    regions = RegionSets.from_spec(spec, face_modules)
    E = extract_modules(source, geom, spec, config.loss.tau)
    try:
        E_tilde, report = reshuffle(E, config.message, regions, spec,
                                    optimize_padding=config.optimize_padding)
    except InfeasibleError as exc:
        emit("reshuffle_report.json", exc.report.to_json())
        raise PipelineError("reshuffle", "infeasible",
                            exc.report.to_dict()) from exc
    emit("reshuffle_report.json", report.to_json())

    blueprint = build_blueprint(source, E_tilde, regions, geom,
                                config.blueprint_sub_square_ratio)
    emit("blueprint.png", blueprint.image)

    # stage 2: externally stylized image, or the hermetic blend stand-in
    if stylized is None:
        stylized = blend_stand_in(blueprint.image, source,
                                  config.stylize_blend_weight)
    else:
        stylized, _ = resample_to_grid(stylized, spec.n, spec.quiet_zone,
                                       geom.module_px)
    harmonized = harmonize_markers(stylized, E_tilde, regions.markers, geom,
                                   config.loss.tau, config.loss.marker_margin)
    harmonized = enforce_quiet_zone(harmonized, geom, config.loss.tau,
                                    config.loss.marker_margin)
    emit("harmonized.png", harmonized)

    # stage 3: scannability refinement
    result = enhance(harmonized, blueprint, harmonized, config.loss, spec)
    emit("output.png", result.image)
    emit("trace.jsonl",
         "\n".join(entry.to_json() for entry in result.trace) + "\n")

    verify = _verify(result.image, blueprint, spec, config.message,
                     config.loss.tau)
    emit("verify_report.json", json.dumps(verify, indent=2))
    if not verify["decode_ok"]:
        raise PipelineError("verify", "decode failed", verify)
    return PipelineResult(out_dir, verify, geom)
