"""Exceptional-point location, EP2 curve tracing and degeneracy classification.

The scan signal is the discriminant of the characteristic polynomial of
``H/g``. Simple zeros show up as sign changes and are bisected directly.
Even-order zeros (the EP4, and the P**2 = 4Q branch where two EP2 pairs
form at once) only touch zero; those are refined by bisecting the highest
subdiscriminant that changes sign across the bracket. Every candidate must
then show a collapsed eigenvalue gap before a record is emitted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import AXES, HamiltonianSpec, hamiltonian
from .numerics import (
    DEFAULT_CLUSTER_TOL,
    as_matrix,
    char_poly,
    discriminant,
    eigendecompose,
    subdiscriminants,
)

__all__ = [
    "EXCEPTIONAL",
    "DIABOLIC",
    "ReducedInvariants",
    "Degeneracy",
    "EPRecord",
    "EP2Curve",
    "DegenerateFamilyError",
    "reduced_invariants",
    "classify_degeneracy",
    "locate_ep_on_scan",
    "trace_ep2_curve",
    "analytic_q0_gammas",
]

EXCEPTIONAL, DIABOLIC = "exceptional", "diabolic"
BRANCHES = ("Q0", "P24Q")

# |D| below this (relative to scale**(n(n-1))) is indistinguishable from zero
_DISC_FLOOR = 1e-13


class DegenerateFamilyError(ValueError):
    """The discriminant vanishes on the whole scan interval."""


@dataclass(frozen=True)
class ReducedInvariants:
    """Coefficients of ``lambda**4 + P*lambda**2 + Q`` for the symmetric family."""

    P: float
    Q: float

    @property
    def branch_p24q(self) -> float:
        return self.P**2 - 4.0 * self.Q


@dataclass(frozen=True)
class Degeneracy:
    eigenvalue: complex
    algebraic_mult: int
    geometric_mult: int
    kind: str


@dataclass(frozen=True)
class EPRecord:
    params: dict
    eigenvalue: complex
    algebraic_mult: int
    geometric_mult: int
    kind: str
    discriminant: float
    min_gap: float
    gram_cond: float
    bracket_width: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eigenvalue"] = {"re": self.eigenvalue.real, "im": self.eigenvalue.imag}
        d["gram_cond"] = _finite_or_none(self.gram_cond)
        return d


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def reduced_invariants(gamma: float, J1: float, J2: float) -> ReducedInvariants:
    """P and Q of the pattern-gamma family with J = (J1, J2, J1), normalized to g."""
    g2, a2, b2 = gamma * gamma, J1 * J1, J2 * J2
    P = 10.0 * g2 / 9.0 - 2.0 * a2 / 3.0 - 4.0 * b2 / 9.0
    Q = a2 * a2 / 9.0 + (2.0 * a2 - 4.0 * b2) * g2 / 9.0 + g2 * g2 / 9.0
    return ReducedInvariants(P, Q)


def classify_degeneracy(M, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> list[Degeneracy]:
    """Degenerate eigenvalue clusters of ``M`` with their multiplicities.

    Algebraic multiplicity comes from root clustering; geometric
    multiplicity is the number of singular values of ``M - lambda*I`` at or
    below ``cluster_tol * ||M||``. Simple eigenvalues are not listed.
    """
    A = as_matrix(M)
    n = A.shape[0]
    es = eigendecompose(A, cluster_tol=cluster_tol)
    norm = float(np.linalg.norm(A, 2))
    thresh = cluster_tol * norm
    out = []
    for c in es.clusters:
        if c.multiplicity < 2:
            continue
        s = np.linalg.svd(A - c.center * np.eye(n), compute_uv=False)
        geo = int(np.sum(s <= thresh))
        geo = max(1, min(geo, c.multiplicity))
        kind = EXCEPTIONAL if geo < c.multiplicity else DIABOLIC
        out.append(Degeneracy(complex(c.center), c.multiplicity, geo, kind))
    return sorted(out, key=lambda d: (-d.eigenvalue.real, -d.eigenvalue.imag))


def _scan_point(template: HamiltonianSpec, axis: str, x: float):
    spec = template.with_axis(axis, x)
    M = hamiltonian(spec) / spec.g
    return spec, M


def _signals(template, axis, x):
    _, M = _scan_point(template, axis, x)
    p = char_poly(M)
    n = p.degree
    scale = float(np.linalg.norm(M, 2))
    if scale == 0.0:
        # the zero matrix: every eigenvalue coincides
        return 0j, p, 1.0
    return discriminant(p) / scale ** (n * (n - 1)), p, scale


def _bisect(f, a: float, b: float, fa: float, tol: float) -> tuple[float, float]:
    """Bisect a sign change of ``f`` on [a, b]; refine past ``tol`` to full precision."""
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= min(a, b) or m >= max(a, b):
            break
        fm = f(m)
        if fm == 0:
            return m, 0.0
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b), abs(b - a)


def _golden_min(f, a: float, b: float, tol: float) -> tuple[float, float]:
    r = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return 0.5 * (a + b), abs(b - a)


def _refine_touching(template, axis, a, b, tol):
    """Locate an even-order zero of the discriminant inside [a, b]."""

    def sub(x):
        _, M = _scan_point(template, axis, x)
        return subdiscriminants(char_poly(M)).real

    sa, sb = sub(a), sub(b)
    changing = [j for j in range(1, len(sa)) if sa[j] != 0 and sb[j] != 0 and (sa[j] > 0) != (sb[j] > 0)]
    if changing:
        j = max(changing)
        return _bisect(lambda x: sub(x)[j], a, b, sa[j], tol)
    return _golden_min(lambda x: abs(_signals(template, axis, x)[0]), a, b, tol)


def locate_ep_on_scan(
    template: HamiltonianSpec,
    axis: str,
    interval: tuple[float, float],
    tol: float = 1e-8,
    n_grid: int = 401,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
) -> list[EPRecord]:
    """Find eigenvalue degeneracies of ``H/g`` along ``axis`` within ``interval``.

    Returns one record per degenerate eigenvalue cluster, sorted by axis
    value; an empty list if none is found. Records are classified as
    exceptional or diabolic.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    lo, hi = map(float, interval)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"invalid interval {interval!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    xs = np.linspace(lo, hi, n_grid)
    D = np.array([_signals(template, axis, x)[0] for x in xs])
    real_family = np.all(np.abs(D.imag) <= 1e-9 * np.maximum(np.abs(D), _DISC_FLOOR))
    if np.all(np.abs(D) <= _DISC_FLOOR):
        raise DegenerateFamilyError(f"discriminant vanishes identically along {axis} on [{lo}, {hi}]")

    def disc(x):
        return _signals(template, axis, x)[0].real

    zero = np.abs(D) <= _DISC_FLOOR
    candidates: list[tuple[float, float]] = []
    if real_family:
        Dr = D.real
        k = 0
        while k < len(xs):
            if zero[k]:
                j = k
                while j + 1 < len(xs) and zero[j + 1]:
                    j += 1
                a, b = max(k - 1, 0), min(j + 1, len(xs) - 1)
                if zero[a] or zero[b] or a == b:
                    candidates.append((0.5 * (xs[a] + xs[b]), abs(xs[b] - xs[a])))
                elif (Dr[a] > 0) != (Dr[b] > 0):
                    candidates.append(_bisect(disc, xs[a], xs[b], Dr[a], tol))
                else:
                    candidates.append(_refine_touching(template, axis, xs[a], xs[b], tol))
                k = j + 1
                continue
            if k + 1 < len(xs) and not zero[k + 1] and (Dr[k] > 0) != (Dr[k + 1] > 0):
                candidates.append(_bisect(disc, xs[k], xs[k + 1], Dr[k], tol))
            k += 1
    absD = np.abs(D)
    for k in range(1, len(xs) - 1):
        if zero[k]:
            continue
        if absD[k] < absD[k - 1] and absD[k] <= absD[k + 1]:
            if real_family:
                if (D.real[k - 1] > 0) != (D.real[k + 1] > 0):
                    continue  # handled as a sign change
                candidates.append(_refine_touching(template, axis, xs[k - 1], xs[k + 1], tol))
            else:
                candidates.append(_golden_min(lambda x: abs(_signals(template, axis, x)[0]), xs[k - 1], xs[k + 1], tol))

    records: list[EPRecord] = []
    for x, width in candidates:
        for rec in _confirm(template, axis, x, width, cluster_tol):
            dup = any(
                abs(r.params[axis] - rec.params[axis]) <= max(10 * tol, 1e-12)
                and abs(r.eigenvalue - rec.eigenvalue) <= 10 * cluster_tol
                for r in records
            )
            if not dup:
                records.append(rec)
    return sorted(records, key=lambda r: (r.params[axis], -r.eigenvalue.real, -r.eigenvalue.imag))


def _confirm(template, axis, x, width, cluster_tol) -> list[EPRecord]:
    spec, M = _scan_point(template, axis, x)
    es = eigendecompose(M, cluster_tol=cluster_tol)
    gap = es.min_gap
    if not gap <= 10 * es.cluster_tol:
        return []
    D = _signals(template, axis, x)[0]
    params = {"g": spec.g, "J1": spec.J[0], "J2": spec.J[1], "J3": spec.J[2], "alpha": spec.alpha}
    if spec.is_pattern:
        params["gamma"] = spec.gamma_scale
    params[axis] = float(x)
    out = []
    for d in classify_degeneracy(M, cluster_tol=10 * cluster_tol):
        out.append(
            EPRecord(
                params=dict(params),
                eigenvalue=d.eigenvalue,
                algebraic_mult=d.algebraic_mult,
                geometric_mult=d.geometric_mult,
                kind=d.kind,
                discriminant=float(abs(D)),
                min_gap=float(gap),
                gram_cond=float(es.gram_cond),
                bracket_width=float(width),
            )
        )
    return out


def analytic_q0_gammas(J1: float, J2: float) -> list[float]:
    """Non-negative gamma with Q(gamma; J1, J2) = 0, solving the quadratic in gamma**2."""
    b = 2.0 * J1**2 - 4.0 * J2**2
    c = J1**4
    disc = b * b - 4.0 * c
    if disc < 0:
        return []
    r = math.sqrt(disc)
    us = sorted({(-b - r) / 2.0, (-b + r) / 2.0})
    return [math.sqrt(u) for u in us if u >= 0]


@dataclass
class EP2Curve:
    """Polyline of (J1, J2) points on one EP2 branch at fixed gamma."""

    branch: str
    gamma: float
    points: np.ndarray
    omitted: list = field(default_factory=list)
    terminal: EPRecord | None = None

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            for line in header_comment.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("branch", "gamma", "J1", "J2", "terminal"))
        for J1, J2 in self.points:
            w.writerow((self.branch, repr(float(self.gamma)), repr(float(J1)), repr(float(J2)), 0))
        if self.terminal is not None:
            t = self.terminal.params
            w.writerow((self.branch, repr(float(self.gamma)), repr(float(t["J1"])), repr(float(t["J2"])), 1))
        return buf.getvalue()


def _branch_fn(branch: str, gamma: float, J1: float):
    if branch == "Q0":
        return lambda J2: reduced_invariants(gamma, J1, J2).Q
    if branch == "P24Q":
        return lambda J2: reduced_invariants(gamma, J1, J2).branch_p24q
    raise ValueError(f"unknown branch {branch!r}; expected one of {BRANCHES}")


def _solve_branch(branch: str, gamma: float, J1: float, J2_max: float, n_scan: int = 400):
    f = _branch_fn(branch, gamma, J1)
    grid = np.linspace(0.0, J2_max, n_scan + 1)
    vals = np.array([f(x) for x in grid])
    if vals[0] == 0:
        return 0.0
    for k in range(n_scan):
        if vals[k + 1] == 0:
            return float(grid[k + 1])
        if (vals[k] > 0) != (vals[k + 1] > 0):
            return brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return None


def trace_ep2_curve(
    branch: str,
    gamma_fixed: float,
    J1_grid,
    tol: float = 1e-9,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
) -> EP2Curve:
    """Trace an EP2 line in the (J1, J2) plane at fixed gamma.

    ``Q0`` is the branch Q = 0 (a double root at lambda = 0); ``P24Q`` is
    P**2 = 4Q (two double roots). Both end at the EP4 (J1, J2) = (gamma, gamma);
    grid points past it are dropped and the EP4 is returned as ``terminal``.
    """
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}; expected one of {BRANCHES}")
    if not gamma_fixed > 0:
        raise ValueError("gamma_fixed must be positive")
    J1s = np.asarray(J1_grid, dtype=float)
    end = (gamma_fixed, gamma_fixed)
    J2_max = 4.0 * max(gamma_fixed, float(np.max(np.abs(J1s))) if len(J1s) else 1.0) ** 2 / gamma_fixed + 1.0
    pts, omitted = [], []
    reached = False
    for J1 in J1s:
        if J1 > gamma_fixed + 10 * tol:
            reached = True
            break
        if math.hypot(J1 - end[0], 0) < 10 * tol:
            reached = True
            break
        J2 = _solve_branch(branch, gamma_fixed, J1, J2_max)
        if J2 is None:
            omitted.append(float(J1))
            continue
        if math.hypot(J1 - end[0], J2 - end[1]) < 10 * tol:
            reached = True
            break
        pts.append((float(J1), float(J2)))
    terminal = None
    if reached:
        template = HamiltonianSpec(g=1.0, J=(end[0], end[1], end[0]), gamma_scale=gamma_fixed)
        M = hamiltonian(template)
        es = eigendecompose(M, cluster_tol=cluster_tol)
        degs = classify_degeneracy(M, cluster_tol=cluster_tol)
        if degs:
            d = max(degs, key=lambda d: d.algebraic_mult)
            terminal = EPRecord(
                params={"g": 1.0, "gamma": gamma_fixed, "J1": end[0], "J2": end[1], "J3": end[0], "alpha": 0.0},
                eigenvalue=d.eigenvalue,
                algebraic_mult=d.algebraic_mult,
                geometric_mult=d.geometric_mult,
                kind=d.kind,
                discriminant=float(abs(discriminant(char_poly(M)))),
                min_gap=float(es.min_gap),
                gram_cond=float(es.gram_cond),
                bracket_width=0.0,
            )
    return EP2Curve(branch, float(gamma_fixed), np.array(pts).reshape(-1, 2), omitted, terminal)
