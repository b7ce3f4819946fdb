"""Command line entry point: ``stratspine <command> ...``.

Exit codes: 0 success, 1 bad input, 2 an internal invariant failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .audiofeat import AudioParams, format_times_json, wav_to_cloud
from .covertree import SubdivisionPolicy, build_adaptive_cover_tree, check_cover_tree
from .geometry import InputError, format_cloud_csv, read_cloud_csv
from .io import atomic_write_text, export_dot, read_document, write_document
from .mlpca import RadiusSchedule, all_profiles, eigenmetric
from .pipeline import (PipelineConfig, StageError, documents, format_summary, format_sweep_csv,
                       run, sweep)
from .synth import SHAPES, SynthSpec, generate

log = logging.getLogger("stratspine")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


class InvariantError(RuntimeError):
    pass


# -- configuration ---------------------------------------------------------

_FLOAT_KEYS = {"tau", "h0_thresh", "higher_pers_thresh", "dim_rho_lo", "dim_rho_hi",
               "betti_cutoff"}
_INT_KEYS = {"dim_steps", "max_level", "max_passes", "seed"}
_BOOL_KEYS = {"betti", "auto_on_centers"}
_ALIASES = {"pers_thresh": "higher_pers_thresh", "h0": "h0_thresh"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InputError(f"not a boolean: {text!r}")


def _parse_delta(text):
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t == "auto":
        return "auto"
    try:
        return float(t)
    except ValueError:
        raise InputError(f"delta must be a number or 'auto', got {text!r}") from None


def _parse_radii(text) -> tuple:
    try:
        return tuple(float(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise InputError(f"radii must be a list of numbers, got {text!r}") from None


def coerce(key: str, value):
    """Convert a raw config value to the type of the matching config field."""
    key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
    names = {f.name for f in fields(PipelineConfig)}
    if key not in names:
        raise InputError(f"unknown config key {key!r}")
    try:
        if key == "delta":
            return key, _parse_delta(value)
        if key == "radii":
            return key, _parse_radii(value)
        if key in _FLOAT_KEYS:
            return key, float(value)
        if key in _INT_KEYS:
            return key, int(value)
        if key in _BOOL_KEYS:
            return key, value if isinstance(value, bool) else _parse_bool(str(value))
    except ValueError:
        raise InputError(f"bad value for {key}: {value!r}") from None
    return key, str(value).strip()


def read_config_file(path) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        key, val = coerce(k, v)
        out[key] = val
    return out


def build_config(args) -> PipelineConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("tau", "delta", "h0_thresh", "higher_pers_thresh", "radii", "dim_rho_lo",
                "dim_rho_hi", "dim_steps", "betti_cutoff", "edge_rule", "seed", "max_passes"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = coerce(key, v)[1]
    if getattr(args, "betti", False):
        values["betti"] = True
    return PipelineConfig(**values).validate()


# -- commands --------------------------------------------------------------


def _load_cloud(path):
    if path is None:
        raise InputError("--in is required")
    try:
        return read_cloud_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def cmd_synth(args) -> int:
    counts = tuple(int(c) for c in args.counts.split(",")) if args.counts else None
    cloud, labels = generate(SynthSpec(args.shape, counts, args.noise, args.seed))
    atomic_write_text(args.out, format_cloud_csv(cloud))
    if args.labels_out:
        atomic_write_text(args.labels_out, "".join(f"{int(x)}\n" for x in labels))
    print(f"wrote {cloud.n} points in R^{cloud.dim} to {args.out}")
    return EXIT_OK


def cmd_audio(args) -> int:
    params = AudioParams(args.window, args.block_len, args.block_hop)
    cloud, times = wav_to_cloud(args.input, params)
    atomic_write_text(args.out, format_cloud_csv(cloud))
    times_path = args.times_out or str(Path(args.out).with_suffix(".times.json"))
    atomic_write_text(times_path, format_times_json(times))
    print(f"wrote {cloud.n} blocks of {cloud.dim} features to {args.out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cloud = _load_cloud(args.input)
    config = build_config(args)
    result = run(cloud, config)
    scaff_doc, spine_doc = documents(result)
    out = Path(args.out_dir)
    write_document(scaff_doc, out, "scaffolding", args.format)
    write_document(spine_doc, out, "spine", args.format)
    summary = result.summary()
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    text = format_summary(summary)
    atomic_write_text(out / "summary.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def _number_list(text, parse=float) -> list:
    items = [t for t in str(text).replace(",", " ").split() if t]
    try:
        return [parse(t) for t in items]
    except ValueError:
        raise InputError(f"bad number list {text!r}") from None


def cmd_sweep(args) -> int:
    cloud = _load_cloud(args.input)
    config = build_config(args)
    taus = _number_list(args.taus)
    deltas = _number_list(args.deltas, _parse_delta)
    cells = sweep(cloud, config, taus, deltas)
    out = Path(args.out_dir)
    atomic_write_text(out / "sweep.csv", format_sweep_csv(cells))
    for k, cell in enumerate(cells):
        if cell.result is not None:
            scaff_doc, spine_doc = documents(cell.result)
            write_document(spine_doc, out, f"cell{k:03d}_spine", args.format)
            write_document(scaff_doc, out, f"cell{k:03d}_scaffolding", args.format)
    sys.stdout.write(format_sweep_csv(cells))
    return EXIT_OK


def cmd_export(args) -> int:
    doc = read_document(args.input)
    text = export_dot(doc)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args) -> int:
    """Cover-tree invariants and eigenmetric axioms on the given cloud."""
    cloud = _load_cloud(args.input)
    config = build_config(args)
    schedule = (RadiusSchedule(tuple(config.radii)) if config.radii
                else RadiusSchedule.default_for(cloud))
    prof = all_profiles(cloud, schedule, config.normalize)
    policy = SubdivisionPolicy(config.tau, config.h0_thresh, config.higher_pers_thresh,
                               schedule, config.max_level, config.child_profile)
    tree = build_adaptive_cover_tree(cloud, policy, prof)
    problems = check_cover_tree(tree, cloud)
    rng = np.random.default_rng(config.seed)
    for _ in range(min(200, cloud.n)):
        i, j, k = rng.integers(cloud.n, size=3)
        a, b, c = prof[i], prof[j], prof[k]
        if eigenmetric(a, a) != 0.0 or eigenmetric(a, b) != eigenmetric(b, a):
            problems.append(f"eigenmetric not symmetric or not zero on the diagonal at {i},{j}")
        if eigenmetric(a, c) > eigenmetric(a, b) + eigenmetric(b, c) + 1e-9:
            problems.append(f"eigenmetric triangle inequality fails at {i},{j},{k}")
    for p in problems:
        print(p)
    if problems:
        raise InvariantError(f"{len(problems)} invariant violation(s)")
    print(f"ok: {len(tree.leaves())} leaves, cover tree and eigenmetric invariants hold")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------


def _add_pipeline_flags(p):
    p.add_argument("--in", dest="input", help="point-cloud CSV")
    p.add_argument("--config", help="key = value configuration file; flags override it")
    p.add_argument("--tau", type=float)
    p.add_argument("--delta", help="number or 'auto'")
    p.add_argument("--h0-thresh", dest="h0_thresh", type=float)
    p.add_argument("--pers-thresh", dest="higher_pers_thresh", type=float)
    p.add_argument("--radii", help="comma-separated neighbourhood radii for the eigenprofiles")
    p.add_argument("--dim-rho-lo", dest="dim_rho_lo", type=float)
    p.add_argument("--dim-rho-hi", dest="dim_rho_hi", type=float)
    p.add_argument("--dim-steps", dest="dim_steps", type=int)
    p.add_argument("--betti", action="store_true", help="decorate spine vertices with Betti numbers")
    p.add_argument("--betti-cutoff", dest="betti_cutoff", type=float)
    p.add_argument("--edge-rule", dest="edge_rule", choices=("centers", "clusters"))
    p.add_argument("--max-passes", dest="max_passes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--format", choices=("json", "dot", "both"), default="json")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratspine",
                                     description="Stratified-space spines from point clouds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic stratified cloud")
    p.add_argument("--shape", choices=SHAPES, required=True)
    p.add_argument("--counts", help="comma-separated points per piece")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", dest="labels_out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("audio-features", help="WAV to a 59-dimensional block cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--times-out", dest="times_out")
    p.add_argument("--window", type=int, default=2048)
    p.add_argument("--block-len", dest="block_len", type=int, default=150)
    p.add_argument("--block-hop", dest="block_hop", type=int, default=1)
    p.set_defaults(func=cmd_audio)

    p = sub.add_parser("pipeline", help="run every stage and write graph documents")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep", help="run a grid of tau and delta values")
    _add_pipeline_flags(p)
    p.add_argument("--taus", required=True, help="comma-separated tau values")
    p.add_argument("--deltas", required=True, help="comma-separated delta values or 'auto'")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="render a graph document as DOT")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("check", help="run invariant checks on a cloud")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantError, StageError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
