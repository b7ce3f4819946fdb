"""End-to-end driver: profiles -> adaptive cover tree -> scaffolding ->
dimensions -> spine -> optional Betti decoration."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .covertree import DEFAULT_MAX_LEVEL, SubdivisionPolicy, build_adaptive_cover_tree
from .dimension import DimensionConfig, initial_dimensions, refine_dimensions
from .geometry import InputError, PointCloud
from .mlpca import RadiusSchedule, all_profiles
from .scaffolding import AUTO, build_scaffolding, leaves_to_nodes
from .spine import build_spine, decorate_betti

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    tau: float = 0.1
    delta: Union[float, str] = AUTO
    h0_thresh: Optional[float] = None
    higher_pers_thresh: Optional[float] = None
    radii: Optional[tuple] = None
    normalize: str = "trace"
    dim_rho_lo: Optional[float] = None
    dim_rho_hi: Optional[float] = None
    dim_steps: Optional[int] = None
    dim_centering: str = "max"
    betti: bool = False
    betti_cutoff: Optional[float] = None
    edge_rule: str = "clusters"
    child_profile: str = "center"
    spine_merge: str = "component"
    auto_on_centers: bool = False
    max_level: int = DEFAULT_MAX_LEVEL
    max_passes: int = 20
    refine_rule: str = "component"
    seed: int = 0

    def validate(self):
        if not self.tau > 0:
            raise InputError("tau must be positive")
        if isinstance(self.delta, str):
            if self.delta.lower() != AUTO:
                raise InputError(f"delta must be a positive number or {AUTO!r}")
        elif not self.delta > 0:
            raise InputError("delta must be positive")
        for name in ("h0_thresh", "higher_pers_thresh", "betti_cutoff"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InputError(f"{name} must be nonnegative")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["radii"] is not None:
            d["radii"] = list(d["radii"])
        return d


@dataclass
class PipelineResult:
    cloud: PointCloud
    config: PipelineConfig
    schedule: RadiusSchedule
    tree: object
    scaffolding: object
    initial: dict
    dims: dict
    nonmaximal: set
    converged: bool
    spine: object
    flagged: set = field(default_factory=set)

    def summary(self) -> dict:
        spine_dims = Counter(self.spine.graph.label.values())
        scaffold_dims = Counter(self.dims.values())
        return {
            "n_points": self.cloud.n,
            "n_leaves": len(self.scaffolding.nodes),
            "n_scaffold_edges": self.scaffolding.graph.n_edges(),
            "delta": self.scaffolding.delta,
            "scaffold_dims": {int(k): v for k, v in sorted(scaffold_dims.items())},
            "nonmaximal": sorted(int(v) for v in self.nonmaximal),
            "refinement_converged": self.converged,
            "n_spine_vertices": self.spine.graph.n_vertices(),
            "n_spine_edges": self.spine.graph.n_edges(),
            "spine_dims": {int(k): v for k, v in sorted(spine_dims.items())},
        }


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InputError:
        raise
    except Exception as exc:  # surface the failing stage
        raise StageError(name, exc) from exc


def compute_profiles(cloud: PointCloud, config: PipelineConfig):
    schedule = (RadiusSchedule(tuple(config.radii)) if config.radii
                else RadiusSchedule.default_for(cloud))
    return schedule, all_profiles(cloud, schedule, config.normalize)


def run(cloud: PointCloud, config: PipelineConfig, profiles=None) -> PipelineResult:
    """Run every stage on ``cloud``; ``profiles`` may be a cached
    ``(schedule, array)`` pair from :func:`compute_profiles`."""
    config.validate()
    if profiles is None:
        schedule, prof = _stage("profiles", compute_profiles, cloud, config)
    else:
        schedule, prof = profiles
    policy = SubdivisionPolicy(config.tau, config.h0_thresh, config.higher_pers_thresh,
                               schedule, config.max_level, config.child_profile)
    tree = _stage("covertree", build_adaptive_cover_tree, cloud, policy, prof)
    nodes = leaves_to_nodes(tree)
    scaff = _stage("scaffolding", build_scaffolding, nodes, cloud, config.delta,
                   config.edge_rule, config.auto_on_centers)
    dcfg = DimensionConfig.for_delta(scaff.delta, config.dim_rho_lo, config.dim_rho_hi,
                                     config.dim_steps, config.dim_centering)
    init = _stage("dimension", initial_dimensions, scaff, cloud, dcfg)
    ref = _stage("refinement", refine_dimensions, scaff, init.dims, config.max_passes,
                 config.refine_rule, cloud)
    if not ref.converged:
        log.warning("refinement stopped after %d passes without converging", ref.passes)
    for nd in scaff.nodes:
        nd.f = ref.dims[nd.id]
        nd.nonmaximal = nd.id in ref.nonmaximal
        scaff.graph.label[nd.id] = nd.f
    sp = _stage("spine", build_spine, scaff, ref.dims, ref.nonmaximal,
                config.spine_merge)
    if config.betti:
        sp = _stage("betti", decorate_betti, sp, scaff, cloud, config.betti_cutoff,
                    seed=config.seed)
    return PipelineResult(cloud, config, schedule, tree, scaff, init.dims, ref.dims,
                          ref.nonmaximal, ref.converged, sp, init.flagged)


def documents(result: PipelineResult) -> tuple:
    """``(scaffolding_doc, spine_doc)`` with the config and input digest as provenance."""
    from .io import cloud_digest, scaffolding_document, spine_document

    prov = {"config": result.config.to_dict(), "input_digest": cloud_digest(result.cloud),
            "delta_used": result.scaffolding.delta}
    scaff = scaffolding_document(result.scaffolding, result.cloud, result.dims,
                                 result.nonmaximal, prov)
    spine = spine_document(result.spine, result.scaffolding, result.cloud, prov)
    return scaff, spine


def format_summary(summary: dict) -> str:
    lines = [f"points: {summary['n_points']}",
             f"scaffold nodes: {summary['n_leaves']} ({summary['n_scaffold_edges']} edges)",
             f"delta used: {summary['delta']:.6g}",
             "scaffold dims: " + ", ".join(f"{k}:{v}" for k, v in summary["scaffold_dims"].items()),
             f"non-maximal nodes: {len(summary['nonmaximal'])}"
             + (f" {summary['nonmaximal']}" if len(summary["nonmaximal"]) <= 30 else ""),
             f"refinement converged: {summary['refinement_converged']}",
             f"spine: {summary['n_spine_vertices']} vertices, {summary['n_spine_edges']} edges",
             "spine dims: " + ", ".join(f"{k}:{v}" for k, v in summary["spine_dims"].items())]
    return "\n".join(lines) + "\n"


@dataclass
class SweepCell:
    tau: float
    delta: object
    result: Optional[PipelineResult] = None
    error: Optional[str] = None

    def row(self) -> dict:
        if self.result is None:
            return {"tau": self.tau, "delta": self.delta, "n_leaves": "", "n_spine_vertices": "",
                    "dims": "", "error": self.error}
        s = self.result.summary()
        dims = ";".join(f"{k}:{v}" for k, v in s["scaffold_dims"].items())
        return {"tau": self.tau, "delta": self.delta, "n_leaves": s["n_leaves"],
                "n_spine_vertices": s["n_spine_vertices"], "dims": dims, "error": ""}


def sweep(cloud: PointCloud, config: PipelineConfig, taus, deltas) -> list:
    """Run every (tau, delta) pair on shared eigenprofiles; a failing cell is
    recorded and the sweep moves on."""
    taus, deltas = list(taus), list(deltas)
    if not taus or not deltas:
        raise InputError("sweep needs at least one tau and one delta")
    config.validate()
    profiles = _stage("profiles", compute_profiles, cloud, config)
    cells = []
    for tau in taus:
        for delta in deltas:
            cfg = PipelineConfig(**{**config.to_dict(), "tau": tau, "delta": delta})
            if cfg.radii is not None:
                cfg.radii = tuple(cfg.radii)
            try:
                cells.append(SweepCell(tau, delta, run(cloud, cfg, profiles)))
            except (InputError, StageError) as exc:
                log.warning("sweep cell tau=%s delta=%s failed: %s", tau, delta, exc)
                cells.append(SweepCell(tau, delta, error=str(exc)))
    return cells


def format_sweep_csv(cells) -> str:
    buf = io.StringIO()
    cols = ["tau", "delta", "n_leaves", "n_spine_vertices", "dims", "error"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for c in cells:
        w.writerow(c.row())
    return buf.getvalue()
