"""Experiment data containers and the statistics derived from them.

A Dataset holds one rollout of state/input/successor samples laid out
column-per-time-step. DataStats derives everything downstream consumers
need: least-squares fits, residuals, sample covariances, and the
projector onto the null space of the stacked state-input data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    ExcitationViolation,
    ParseError,
    StateRankViolation,
)
from .matlin import RANK_TOL, as_matrix, pinv

__all__ = [
    "DataStats",
    "Dataset",
    "RankReport",
    "check_excitation",
    "compute_stats",
    "load_dataset",
    "save_dataset",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """One experiment: x1[:, t] is the successor of (x0[:, t], u0[:, t])."""

    x0: np.ndarray
    u0: np.ndarray
    x1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x0", _frozen(as_matrix(self.x0, "x0")))
        object.__setattr__(self, "u0", _frozen(as_matrix(self.u0, "u0")))
        object.__setattr__(self, "x1", _frozen(as_matrix(self.x1, "x1")))
        n, ell = self.x0.shape
        if self.x1.shape != (n, ell):
            raise DimensionMismatch(
                f"x1 shape {self.x1.shape} does not match x0 shape {(n, ell)}"
            )
        if self.u0.shape[1] != ell:
            raise DimensionMismatch(
                f"u0 has {self.u0.shape[1]} columns, x0 has {ell}"
            )
        if ell < 1 or n < 1 or self.u0.shape[0] < 1:
            raise DimensionMismatch("dataset dimensions must be positive")

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def m(self) -> int:
        return self.u0.shape[0]

    @property
    def ell(self) -> int:
        return self.x0.shape[1]

    def data0(self) -> np.ndarray:
        """Stacked state-input samples, (n+m) x ell."""
        return np.vstack([self.x0, self.u0])

    def data_full(self) -> np.ndarray:
        """Stacked state-input-successor samples, (2n+m) x ell."""
        return np.vstack([self.x0, self.u0, self.x1])


@dataclass(frozen=True)
class RankReport:
    rank_data0: int
    rank_full: int
    pe_holds: bool
    full_rank_holds: bool
    singular_values: np.ndarray


def check_excitation(d: Dataset, rank_tol: float = RANK_TOL) -> RankReport:
    """Rank diagnostics for the stacked data matrices.

    pe_holds: the (n+m) x ell state-input stack has full row rank, the
    excitation condition every synthesis program requires.
    full_rank_holds: the (2n+m) x ell stack including successors also has
    full row rank, which noise generically produces and which makes the
    residual covariance positive definite.
    """
    sv0 = np.linalg.svd(d.data0(), compute_uv=False)
    sv = np.linalg.svd(d.data_full(), compute_uv=False)
    rank_data0 = int(np.sum(sv0 > rank_tol * sv0[0])) if sv0.size and sv0[0] > 0 else 0
    rank_full = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return RankReport(
        rank_data0=rank_data0,
        rank_full=rank_full,
        pe_holds=rank_data0 == d.n + d.m,
        full_rank_holds=rank_full == 2 * d.n + d.m,
        singular_values=_frozen(sv),
    )


@dataclass(frozen=True)
class DataStats:
    """Least-squares fits and sample statistics of one Dataset.

    Covariances use population normalization 1/ell throughout. Residual
    covariances are stored as computed, singular or not; consumers that
    need an inverse decide how to fail.
    """

    n: int
    m: int
    ell: int
    a_ls: np.ndarray
    b_ls: np.ndarray
    ab_ls: np.ndarray
    k_ls: np.ndarray
    cov_x0: np.ndarray
    cov_d0: np.ndarray
    resid_x: np.ndarray
    resid_u: np.ndarray
    cov_resid_x: np.ndarray
    cov_resid_u: np.ndarray
    proj_perp: np.ndarray
    rank_report: RankReport = field(repr=False)

    def __post_init__(self):
        for name in (
            "a_ls",
            "b_ls",
            "ab_ls",
            "k_ls",
            "cov_x0",
            "cov_d0",
            "resid_x",
            "resid_u",
            "cov_resid_x",
            "cov_resid_u",
            "proj_perp",
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def compute_stats(d: Dataset, rank_tol: float = RANK_TOL) -> DataStats:
    """Derive least-squares estimates, residuals, and covariances.

    Requires the stacked state-input data to have full row rank and the
    state block alone to have rank n (needed for the least-squares gain).
    """
    report = check_excitation(d, rank_tol)
    if not report.pe_holds:
        raise ExcitationViolation(
            f"state-input stack has rank {report.rank_data0}, need {d.n + d.m}"
        )
    sx = np.linalg.svd(d.x0, compute_uv=False)
    if int(np.sum(sx > rank_tol * sx[0])) < d.n:
        raise StateRankViolation(f"x0 has rank below {d.n}")

    d0 = d.data0()
    d0_pinv = pinv(d0, rank_tol=rank_tol)
    ab_ls = d.x1 @ d0_pinv
    k_ls = d.u0 @ pinv(d.x0, rank_tol=rank_tol)
    resid_x = d.x1 - ab_ls @ d0
    resid_u = d.u0 - k_ls @ d.x0
    ell = float(d.ell)
    return DataStats(
        n=d.n,
        m=d.m,
        ell=d.ell,
        a_ls=ab_ls[:, : d.n],
        b_ls=ab_ls[:, d.n :],
        ab_ls=ab_ls,
        k_ls=k_ls,
        cov_x0=d.x0 @ d.x0.T / ell,
        cov_d0=d0 @ d0.T / ell,
        resid_x=resid_x,
        resid_u=resid_u,
        cov_resid_x=resid_x @ resid_x.T / ell,
        cov_resid_u=resid_u @ resid_u.T / ell,
        proj_perp=np.eye(d.ell) - d0_pinv @ d0,
        rank_report=report,
    )


def save_dataset(d: Dataset, path) -> None:
    """Write the dataset as CSV: a dimension header, then one row per
    time step with x0, u0, x1 entries at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "ell", d.n, d.m, d.ell])
        for t in range(d.ell):
            row = [f"{v:.17g}" for v in d.x0[:, t]]
            row += [f"{v:.17g}" for v in d.u0[:, t]]
            row += [f"{v:.17g}" for v in d.x1[:, t]]
            writer.writerow(row)


def load_dataset(path) -> Dataset:
    """Read a dataset written by save_dataset. '#' lines are comments."""
    with open(path, newline="") as fh:
        rows = []
        for lineno, line in enumerate(fh, start=1):
            if line.lstrip().startswith("#") or not line.strip():
                continue
            rows.append((lineno, next(csv.reader([line]))))
    if not rows:
        raise ParseError(f"{path}: no header line")
    head_line, head = rows[0]
    if len(head) != 6 or head[:3] != ["n", "m", "ell"]:
        raise ParseError(f"{path}:{head_line}: malformed header {head[:3]}")
    try:
        n, m, ell = (int(v) for v in head[3:])
    except ValueError as exc:
        raise ParseError(f"{path}:{head_line}: non-integer dimensions") from exc
    if n < 1 or m < 1 or ell < 1:
        raise ParseError(f"{path}:{head_line}: dimensions must be positive")
    body = rows[1:]
    if not body:
        raise ParseError(f"{path}: header only, no data rows")
    if len(body) != ell:
        raise DimensionMismatch(
            f"{path}: header says ell={ell}, found {len(body)} data rows"
        )
    width = 2 * n + m
    x0 = np.empty((n, ell))
    u0 = np.empty((m, ell))
    x1 = np.empty((n, ell))
    for t, (lineno, row) in enumerate(body):
        if len(row) != width:
            raise DimensionMismatch(
                f"{path}:{lineno}: expected {width} fields, found {len(row)}"
            )
        for c, text in enumerate(row):
            try:
                v = float(text)
            except ValueError as exc:
                raise ParseError(
                    f"{path}:{lineno}: field {c + 1} is not a number: {text!r}"
                ) from exc
            if c < n:
                x0[c, t] = v
            elif c < n + m:
                u0[c - n, t] = v
            else:
                x1[c - n - m, t] = v
    return Dataset(x0=x0, u0=u0, x1=x1)
