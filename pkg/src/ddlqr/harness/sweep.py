"""Regularization-path sweeps and program-size scaling benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..datamodel import DataStats, Dataset, compute_stats
from ..effects import RegWeights
from ..errors import DdlqrError, DimensionMismatch, SynthesisInfeasible
from ..matlin import spectral_radius
from ..synthesis import (
    PlantModel,
    build_baseline_gram_problem,
    build_reduced_gram_problem,
    evaluate_on_truth,
    synth_baseline_covar,
    synth_baseline_gram,
    synth_reduced_covar,
    synth_reduced_gram,
)
from .experiments import ReferenceExperimentConfig, gen_reference_data

__all__ = [
    "BenchRow",
    "SweepCase",
    "SweepRow",
    "bench_scaling",
    "baseline_case",
    "deviation_grid",
    "gain_path_grid",
    "ls_gain_stabilizes",
    "reduced_case",
    "run_sweep",
    "zero_wall_times",
]

_BASELINE_KINDS = ("baseline-gram", "baseline-gram-proj", "baseline-covar")


@dataclass(frozen=True)
class SweepCase:
    """One curve of a sweep: a program plus the weights that track lambda.

    For reduced programs `active` marks which of the three effect weights
    follow the swept lambda; baselines take lambda directly.
    """

    label: str
    program: str
    active: tuple[bool, bool, bool] = (False, False, False)

    def weights_at(self, lam: float) -> RegWeights:
        if self.program not in ("reduced-gram", "reduced-covar"):
            raise DimensionMismatch(f"{self.program} does not take effect weights")
        l1, l2, l3 = (lam if on else 0.0 for on in self.active)
        param = "gram" if self.program == "reduced-gram" else "covariance"
        return RegWeights(lambda1=l1, lambda2=l2, lambda3=l3, parameterization=param)


def reduced_case(label: str, parameterization: str = "gram") -> SweepCase:
    """Parse a weight-set label like "{1,3}" into a sweep case."""
    inner = label.strip().lstrip("{").rstrip("}")
    picks = {tok.strip() for tok in inner.split(",") if tok.strip()}
    bad = picks - {"1", "2", "3"}
    if bad or not picks:
        raise DimensionMismatch(f"unrecognized case label {label!r}")
    active = tuple(str(i) in picks for i in (1, 2, 3))
    if parameterization == "covariance" and active[0]:
        raise DimensionMismatch("covariance cases cannot activate the first effect")
    program = "reduced-gram" if parameterization == "gram" else "reduced-covar"
    canonical = "{" + ",".join(s for s in ("1", "2", "3") if s in picks) + "}"
    return SweepCase(label=canonical, program=program, active=active)


def baseline_case(kind: str) -> SweepCase:
    if kind not in _BASELINE_KINDS:
        raise DimensionMismatch(f"unknown baseline kind {kind!r}")
    return SweepCase(label=kind, program=kind)


@dataclass(frozen=True)
class SweepRow:
    """One solved point of a sweep; non-Optimal rows carry only the status."""

    case_label: str
    lam: float
    status: str
    n: int
    m: int
    K: np.ndarray | None
    A_cl: np.ndarray | None
    deviation: float | None
    dist_to_kls: float | None
    h2_on_truth: float | None
    truth_stable: bool | None
    objective: float | None
    wall_time_s: float


def deviation_grid(points: int = 41) -> np.ndarray:
    """Log grid for the model-mismatch sweep."""
    return np.logspace(-4.0, 6.0, points)


def gain_path_grid(points: int = 41) -> np.ndarray:
    """Zero plus a log grid for the gain-shrinkage sweep."""
    return np.concatenate(([0.0], np.logspace(-4.0, 10.0, points)))


def ls_gain_stabilizes(stats: DataStats) -> bool:
    """Whether the LS gain stabilizes the LS estimates on this draw."""
    return spectral_radius(stats.a_ls + stats.b_ls @ stats.k_ls) < 1.0


def _solve_case(case: SweepCase, lam: float, d: Dataset, stats: DataStats, Q, R, settings):
    if case.program == "reduced-gram" or case.program == "reduced-covar":
        w = case.weights_at(lam)
        fn = synth_reduced_gram if case.program == "reduced-gram" else synth_reduced_covar
        return fn(stats, Q, R, w, settings=settings)
    if case.program == "baseline-covar":
        return synth_baseline_covar(stats, Q, R, lam, settings=settings)
    projected = case.program == "baseline-gram-proj"
    return synth_baseline_gram(d, stats, Q, R, lam, projected=projected, settings=settings)


def run_sweep(
    d: Dataset,
    cases: list[SweepCase],
    lambdas,
    Q=None,
    R=None,
    plant: PlantModel | None = None,
    settings=None,
) -> list[SweepRow]:
    """Solve every (case, lambda) point serially and return ordered rows.

    Rows are ordered by the given case order, then ascending lambda. Solver
    failures become status labels on their row instead of raising, so one
    bad point cannot take down a whole sweep.
    """
    stats = compute_stats(d)
    if Q is None:
        Q = np.eye(stats.n)
    if R is None:
        R = np.eye(stats.m)
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if lambdas.size == 0:
        raise DimensionMismatch("lambda grid is empty")
    rows: list[SweepRow] = []
    for case in cases:
        for lam in np.sort(lambdas):
            rows.append(_sweep_point(case, float(lam), d, stats, Q, R, plant, settings))
    return rows


def _sweep_point(case, lam, d, stats, Q, R, plant, settings) -> SweepRow:
    t0 = time.perf_counter()
    try:
        sol = _solve_case(case, lam, d, stats, Q, R, settings)
        status = sol.status
    except SynthesisInfeasible as exc:
        return _status_row(case, lam, stats, str(exc.status), time.perf_counter() - t0)
    except DdlqrError as exc:
        return _status_row(case, lam, stats, type(exc).__name__, time.perf_counter() - t0)
    wall = time.perf_counter() - t0
    deviation = float(np.linalg.norm(sol.A_cl - (stats.a_ls + stats.b_ls @ sol.K)))
    dist = float(np.linalg.norm(sol.K - stats.k_ls))
    h2 = None
    truth_stable = None
    if plant is not None:
        ev = evaluate_on_truth(sol, plant)
        truth_stable = ev.stable
        h2 = ev.h2_sq
    return SweepRow(
        case_label=case.label,
        lam=lam,
        status=status,
        n=stats.n,
        m=stats.m,
        K=sol.K,
        A_cl=sol.A_cl,
        deviation=deviation,
        dist_to_kls=dist,
        h2_on_truth=h2,
        truth_stable=truth_stable,
        objective=sol.objective,
        wall_time_s=wall,
    )


def _status_row(case, lam, stats, status, wall) -> SweepRow:
    return SweepRow(
        case_label=case.label,
        lam=lam,
        status=status,
        n=stats.n,
        m=stats.m,
        K=None,
        A_cl=None,
        deviation=None,
        dist_to_kls=None,
        h2_on_truth=None,
        truth_stable=None,
        objective=None,
        wall_time_s=wall,
    )


def zero_wall_times(rows: list[SweepRow]) -> list[SweepRow]:
    """Copy of the rows with timing blanked, for byte-stable artifacts."""
    return [replace(r, wall_time_s=0.0) for r in rows]


# -- scaling benchmark --------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    """Mean wall time of one program at one data length."""

    ell: int
    program_label: str
    repeats: int
    mean_s: float
    min_s: float
    max_s: float
    num_vars: int
    max_block_dim: int


_BENCH_PROGRAMS = (
    ("baseline-gram", "{1,2,3}"),
    ("baseline-gram-proj", "{1}"),
)


def bench_scaling(
    ell_list,
    repeats: int,
    cfg: ReferenceExperimentConfig | None = None,
    lam: float = 1.0,
    settings=None,
) -> list[BenchRow]:
    """Time each baseline against its equivalent reduced program.

    Every timed run starts from the raw dataset: statistics, problem
    construction, and the solve all count, so the reduced programs are
    charged for their covariance preprocessing. One untimed warmup per
    (ell, program) keeps allocator and cache effects out of the means.
    Runs are serial by construction.
    """
    if repeats < 1:
        raise DimensionMismatch("repeats must be at least 1")
    if cfg is None:
        cfg = ReferenceExperimentConfig()
    rows: list[BenchRow] = []
    for ell in ell_list:
        d = gen_reference_data(replace(cfg, ell=int(ell)))
        for baseline_kind, reduced_label in _BENCH_PROGRAMS:
            for label, runner in (
                (baseline_kind, _bench_baseline(d, cfg, lam, baseline_kind, settings)),
                (reduced_label, _bench_reduced(d, cfg, lam, reduced_label, settings)),
            ):
                times = []
                runner()
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    num_vars, max_dim = runner()
                    times.append(time.perf_counter() - t0)
                rows.append(
                    BenchRow(
                        ell=int(ell),
                        program_label=label,
                        repeats=repeats,
                        mean_s=float(np.mean(times)),
                        min_s=float(np.min(times)),
                        max_s=float(np.max(times)),
                        num_vars=num_vars,
                        max_block_dim=max_dim,
                    )
                )
    return rows


def _bench_baseline(d, cfg, lam, kind, settings):
    projected = kind == "baseline-gram-proj"

    def run():
        stats = compute_stats(d)
        p, _ = build_baseline_gram_problem(d, stats, cfg.q, cfg.r, lam, projected)
        synth_baseline_gram(d, stats, cfg.q, cfg.r, lam, projected=projected, settings=settings)
        return p.num_vars, max(p.block_dims())

    return run


def _bench_reduced(d, cfg, lam, label, settings):
    case = reduced_case(label, "gram")

    def run():
        stats = compute_stats(d)
        w = case.weights_at(lam)
        p, _ = build_reduced_gram_problem(stats, cfg.q, cfg.r, w)
        synth_reduced_gram(stats, cfg.q, cfg.r, w, settings=settings)
        return p.num_vars, max(p.block_dims())

    return run
