"""Command-line surface: one subcommand per pipeline stage plus the
end-to-end `pipeline` runner and the robustness harness."""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from .config import ConfigError, PipelineConfig, apply_overrides, load_config, serialize_config
from .encode import CapacityError, build_matrix, render
from .enhance import harmonize_markers
from .harness import robustness_report
from .imageops import load_gray_png, resample_to_grid, save_gray_png
from .pipeline import PipelineError, _verify, run_pipeline
from .qrspec import QrSpec
from .reshuffle import (
    InfeasibleError,
    RegionSets,
    build_blueprint,
    face_mask_to_modules,
    reshuffle,
)
from .scanner import extract_modules
from .synth import (
    blend_stand_in,
    elliptical_module_mask,
    mask_image_from_modules,
    synthetic_portrait,
)

EXIT_STAGE_FAILURE = 1


def _spec(version: int, ec_level: str) -> QrSpec:
    try:
        return QrSpec(version=version, ec_level=ec_level)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(str(exc))


def _load_image(path: str) -> np.ndarray:
    try:
        return load_gray_png(path)
    except OSError as exc:
        raise click.UsageError(f"cannot read image {path!r}: {exc}")


def _resolve_config(config_path: str | None, overrides: dict[str, str]
                    ) -> PipelineConfig:
    try:
        cfg = load_config(config_path) if config_path else PipelineConfig()
        return apply_overrides(cfg, overrides)
    except (ConfigError, OSError) as exc:
        raise click.UsageError(str(exc))


@click.group()
def main():
    """Face-preserving QR toolchain: encode, reshuffle, blueprint, enhance."""


@main.command()
@click.option("--message", "-m", required=True, help="Payload (UTF-8 text).")
@click.option("--version", type=int, default=5, show_default=True)
@click.option("--ec-level", type=click.Choice(["L", "M", "Q", "H"]), default="H",
              show_default=True)
@click.option("--module-px", type=int, default=16, show_default=True)
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def encode(message, version, ec_level, module_px, out):
    """Render a standard QR code image."""
    spec = _spec(version, ec_level)
    try:
        matrix = build_matrix(message.encode("utf-8"), spec)
    except CapacityError as exc:
        raise click.UsageError(str(exc))
    save_gray_png(out, render(matrix, module_px, spec.quiet_zone))


@main.command()
@click.option("--image", "-i", required=True, type=click.Path(exists=True))
@click.option("--version", type=int, default=5, show_default=True)
@click.option("--ec-level", type=click.Choice(["L", "M", "Q", "H"]), default="H",
              show_default=True)
@click.option("--tau", type=float, default=128.0, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit the module grid as JSON.")
def extract(image, version, ec_level, tau, as_json):
    """Extract the module matrix from a grid-aligned image."""
    spec = _spec(version, ec_level)
    gray, geom = resample_to_grid(_load_image(image), spec.n, spec.quiet_zone)
    matrix = extract_modules(gray, geom, spec, tau)
    if as_json:
        click.echo(json.dumps({"n": spec.n, "modules": matrix.values.tolist()}))
    else:
        for row in matrix.values:
            click.echo("".join(" " if v else "#" for v in row))


def _stage_inputs(config):
    spec = QrSpec(version=config.qr_version, ec_level=config.qr_ec_level)
    source, geom = resample_to_grid(_load_image(config.source), spec.n,
                                    spec.quiet_zone)
    mask_px, _ = resample_to_grid(_load_image(config.face_mask), spec.n,
                                  spec.quiet_zone, geom.module_px)
    face = face_mask_to_modules(mask_px, geom, config.face_mask_coverage)
    regions = RegionSets.from_spec(spec, face)
    E = extract_modules(source, geom, spec, config.loss.tau)
    return spec, source, geom, regions, E


_CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 help="Flat dotted-key config file."),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                 help="Override a config key (repeatable; wins over the file)."),
    click.option("--out-dir", type=click.Path(file_okay=False), default=None),
]


def _with_config(fn):
    for opt in reversed(_CONFIG_OPTIONS):
        fn = opt(fn)
    return fn


def _parse_overrides(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config_from(config_path, overrides, out_dir, **extra) -> PipelineConfig:
    merged = dict(_parse_overrides(overrides))
    for key, value in extra.items():
        if value is not None:
            merged.setdefault(key, str(value))
    if out_dir is not None:
        merged["paths.out_dir"] = out_dir
    return _resolve_config(config_path, merged)


@main.command("reshuffle")
@_with_config
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
def cmd_reshuffle(config_path, overrides, out_dir, source, face_mask, message):
    """Reshuffle modules around the face region; write the report."""
    config = _config_from(config_path, overrides, out_dir,
                          **{"paths.source": source, "paths.face_mask": face_mask,
                             "message": message})
    spec, _, _, regions, E = _stage_inputs(config)
    os.makedirs(config.out_dir, exist_ok=True)
    report_path = os.path.join(config.out_dir, "reshuffle_report.json")
    try:
        _, report = reshuffle(E, config.message, regions, spec,
                              optimize_padding=config.optimize_padding)
    except InfeasibleError as exc:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(exc.report.to_json())
        click.echo(exc.report.to_json())
        sys.exit(EXIT_STAGE_FAILURE)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    click.echo(report.to_json())


@main.command("blueprint")
@_with_config
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
def cmd_blueprint(config_path, overrides, out_dir, source, face_mask, message):
    """Build the adaptive-halftone blueprint image."""
    config = _config_from(config_path, overrides, out_dir,
                          **{"paths.source": source, "paths.face_mask": face_mask,
                             "message": message})
    spec, src, geom, regions, E = _stage_inputs(config)
    try:
        E_tilde, _ = reshuffle(E, config.message, regions, spec,
                               optimize_padding=config.optimize_padding)
    except InfeasibleError as exc:
        click.echo(exc.report.to_json())
        sys.exit(EXIT_STAGE_FAILURE)
    bp = build_blueprint(src, E_tilde, regions, geom,
                         config.blueprint_sub_square_ratio)
    os.makedirs(config.out_dir, exist_ok=True)
    save_gray_png(os.path.join(config.out_dir, "blueprint.png"), bp.image)


@main.command("harmonize")
@_with_config
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--stylized", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
def cmd_harmonize(config_path, overrides, out_dir, source, face_mask, stylized,
                  message):
    """Clamp marker pixels of a stylized image past the decode margins."""
    config = _config_from(config_path, overrides, out_dir,
                          **{"paths.source": source, "paths.face_mask": face_mask,
                             "paths.stylized": stylized, "message": message})
    spec, src, geom, regions, E = _stage_inputs(config)
    try:
        E_tilde, _ = reshuffle(E, config.message, regions, spec,
                               optimize_padding=config.optimize_padding)
    except InfeasibleError as exc:
        click.echo(exc.report.to_json())
        sys.exit(EXIT_STAGE_FAILURE)
    if config.stylized:
        styl, _ = resample_to_grid(_load_image(config.stylized), spec.n,
                                   spec.quiet_zone, geom.module_px)
    else:
        bp = build_blueprint(src, E_tilde, regions, geom,
                             config.blueprint_sub_square_ratio)
        styl = blend_stand_in(bp.image, src, config.stylize_blend_weight)
    out = harmonize_markers(styl, E_tilde, regions.markers, geom,
                            config.loss.tau, config.loss.marker_margin)
    os.makedirs(config.out_dir, exist_ok=True)
    save_gray_png(os.path.join(config.out_dir, "harmonized.png"), out)


@main.command("enhance")
@_with_config
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--stylized", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
def cmd_enhance(config_path, overrides, out_dir, source, face_mask, stylized,
                message):
    """Run the full enhancement stage (equivalent to `pipeline`)."""
    _run_pipeline_cmd(config_path, overrides, out_dir, source, face_mask,
                      stylized, message, as_json=False)


@main.command("verify")
@_with_config
@click.option("--image", "-i", required=True, type=click.Path(exists=True))
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_verify(config_path, overrides, out_dir, image, source, face_mask,
               message, as_json):
    """Extract + decode an output image and compare against the message."""
    config = _config_from(config_path, overrides, out_dir,
                          **{"paths.source": source, "paths.face_mask": face_mask,
                             "message": message})
    spec, src, geom, regions, E = _stage_inputs(config)
    try:
        E_tilde, _ = reshuffle(E, config.message, regions, spec,
                               optimize_padding=config.optimize_padding)
    except InfeasibleError as exc:
        click.echo(exc.report.to_json())
        sys.exit(EXIT_STAGE_FAILURE)
    bp = build_blueprint(src, E_tilde, regions, geom,
                         config.blueprint_sub_square_ratio)
    out_img, _ = resample_to_grid(_load_image(image), spec.n, spec.quiet_zone,
                                  geom.module_px)
    report = _verify(out_img, bp, spec, config.message, config.loss.tau)
    click.echo(json.dumps(report, indent=None if as_json else 2))
    if not report["decode_ok"]:
        sys.exit(EXIT_STAGE_FAILURE)


@main.command("robustness")
@_with_config
@click.option("--image", "-i", required=True, type=click.Path(exists=True))
@click.option("--message", "-m", default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_robustness(config_path, overrides, out_dir, image, message, trials,
                   seed, as_json):
    """Run the perturbation grid against an output image."""
    config = _config_from(config_path, overrides, out_dir, message=message,
                          **{"harness.trials": trials, "harness.seed": seed})
    spec = _spec(config.qr_version, config.qr_ec_level)
    gray, _ = resample_to_grid(_load_image(image), spec.n, spec.quiet_zone)
    report = robustness_report(gray, spec, config.message,
                               trials_per_cell=config.harness_trials,
                               master_seed=config.harness_seed)
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "robustness_report.json"), "w",
              encoding="utf-8") as fh:
        fh.write(report.to_json())
    click.echo(report.to_json() if as_json else report.to_table())


def _run_pipeline_cmd(config_path, overrides, out_dir, source, face_mask,
                      stylized, message, as_json):
    config = _config_from(config_path, overrides, out_dir,
                          **{"paths.source": source, "paths.face_mask": face_mask,
                             "paths.stylized": stylized, "message": message})
    if not config.source or not os.path.exists(config.source):
        raise click.UsageError(f"source image not found: {config.source!r}")
    if not config.face_mask or not os.path.exists(config.face_mask):
        raise click.UsageError(f"face mask not found: {config.face_mask!r}")
    try:
        result = run_pipeline(config)
    except PipelineError as exc:
        click.echo(json.dumps(exc.to_dict(), indent=2), err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    payload = result.verify_report if as_json else (
        f"decoded OK, e={result.verify_report['e']}, "
        f"artifacts in {result.out_dir}"
    )
    click.echo(json.dumps(payload) if as_json else payload)


@main.command("pipeline")
@_with_config
@click.option("--source", type=click.Path(exists=True), default=None)
@click.option("--face-mask", type=click.Path(exists=True), default=None)
@click.option("--stylized", type=click.Path(exists=True), default=None)
@click.option("--message", "-m", default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_pipeline(config_path, overrides, out_dir, source, face_mask, stylized,
                 message, as_json):
    """Run extract -> reshuffle -> blueprint -> harmonize -> enhance -> verify."""
    _run_pipeline_cmd(config_path, overrides, out_dir, source, face_mask,
                      stylized, message, as_json)


@main.command("sample")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--side", type=int, default=540, show_default=True)
@click.option("--version", type=int, default=5, show_default=True)
def cmd_sample(out_dir, seed, side, version):
    """Write a bundled synthetic portrait + elliptical face mask."""
    spec = _spec(version, "H")
    portrait = synthetic_portrait(side, seed=seed)
    portrait, geom = resample_to_grid(portrait, spec.n, spec.quiet_zone)
    mask = mask_image_from_modules(elliptical_module_mask(spec.n), geom,
                                   portrait.shape)
    os.makedirs(out_dir, exist_ok=True)
    save_gray_png(os.path.join(out_dir, "portrait.png"), portrait)
    save_gray_png(os.path.join(out_dir, "face_mask.png"), mask)
    click.echo(f"wrote portrait.png and face_mask.png to {out_dir}")


@main.command("config")
@_with_config
def cmd_config(config_path, overrides, out_dir):
    """Print the effective configuration (defaults + file + overrides)."""
    config = _config_from(config_path, overrides, out_dir)
    click.echo(serialize_config(config), nl=False)


if __name__ == "__main__":
    main()
