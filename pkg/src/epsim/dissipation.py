"""Polarization-controlled pump rates out of the four D5/2 sublevels.

Relative pump rates come from squared Clebsch-Gordan coefficients of the
D5/2 -> P3/2 dipole transition, normalized so each sublevel's row sums to
one. Everything internal is exact (``fractions.Fraction``); floats appear
only at the API boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import nnls

__all__ = [
    "STATE_M",
    "POLARIZATION_LABELS",
    "CONSTRAINT",
    "Polarization",
    "CGTable",
    "RateVector",
    "PolarizationSolution",
    "cg_table",
    "pump_rates",
    "constraint_residual",
    "solve_polarization",
    "GammaEstimate",
    "gamma_from_rates",
]

STATE_M = (Fraction(5, 2), Fraction(3, 2), Fraction(1, 2), Fraction(-1, 2))
POLARIZATION_LABELS = ("sigma_plus", "sigma_minus", "pi")
_Q_OF = {"sigma_plus": 1, "sigma_minus": -1, "pi": 0}
# r1 - 3 r2 + 3 r3 - r4 vanishes for every polarization
CONSTRAINT = (1, -3, 3, -1)
FEASIBLE_TOL = 1e-10


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x))


@dataclass(frozen=True)
class Polarization:
    """Fractional intensities (sigma+, sigma-, pi), non-negative and summing to 1."""

    sigma_plus: Fraction
    sigma_minus: Fraction
    pi: Fraction

    def __post_init__(self):
        vals = [_to_fraction(getattr(self, k)) for k in POLARIZATION_LABELS]
        for k, v in zip(POLARIZATION_LABELS, vals):
            object.__setattr__(self, k, v)
        if any(v < 0 for v in vals):
            raise ValueError(f"polarization components must be non-negative, got {self.as_floats()}")
        if abs(float(sum(vals)) - 1.0) > 1e-12:
            raise ValueError(f"polarization components must sum to 1, got {float(sum(vals))!r}")

    @classmethod
    def from_sequence(cls, seq) -> "Polarization":
        if len(seq) != 3:
            raise ValueError(f"polarization needs 3 components, got {len(seq)}")
        return cls(*seq)

    def as_tuple(self) -> tuple:
        return (self.sigma_plus, self.sigma_minus, self.pi)

    def as_floats(self) -> tuple:
        return tuple(float(v) for v in self.as_tuple())


@dataclass(frozen=True)
class CGTable:
    """Squared CG weights; rows are states |1>..|4>, columns (sigma+, sigma-, pi)."""

    entries: tuple

    def row(self, i: int) -> tuple:
        return self.entries[i]

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries])


@dataclass(frozen=True)
class RateVector:
    rates: tuple

    def as_array(self) -> np.ndarray:
        return np.array([float(r) for r in self.rates])

    def ratio_string(self) -> str:
        """Smallest-integer ratio such as ``"0:1:2:3"`` (exact rates only)."""
        fr = [_to_fraction(r) for r in self.rates]
        if all(f == 0 for f in fr):
            return ":".join("0" for _ in fr)
        den = math.lcm(*(f.denominator for f in fr))
        ints = [int(f * den) for f in fr]
        g = math.gcd(*ints)
        return ":".join(str(i // g) for i in ints)


def _cg_squared(M: Fraction, q: int) -> Fraction:
    # J=5/2 -> J'=3/2, row-normalized closed form
    J = Fraction(5, 2)
    if q == 1:
        return (J - M) * (J - M - 1) / 20
    if q == 0:
        return (J - M) * (J + M) / 10
    return (J + M) * (J + M - 1) / 20


def cg_table() -> CGTable:
    rows = tuple(tuple(_cg_squared(M, _Q_OF[label]) for label in POLARIZATION_LABELS) for M in STATE_M)
    return CGTable(rows)


def pump_rates(eps: Polarization) -> RateVector:
    """Relative pump rates ``r_i = sum_q |C(m_i, q)|**2 * eps_q``."""
    if not isinstance(eps, Polarization):
        eps = Polarization.from_sequence(eps)
    table = cg_table()
    e = eps.as_tuple()
    return RateVector(tuple(sum((c * w for c, w in zip(row, e)), Fraction(0)) for row in table.entries))


def constraint_residual(rates) -> float | Fraction:
    r = rates.rates if isinstance(rates, RateVector) else rates
    if all(isinstance(x, (Fraction, int)) for x in r):
        return sum((c * Fraction(x) for c, x in zip(CONSTRAINT, r)), Fraction(0))
    return float(np.dot(CONSTRAINT, np.asarray(r, dtype=float)))


@dataclass(frozen=True)
class PolarizationSolution:
    polarization: Polarization | None
    scale: float
    feasible: bool
    residual: float
    constraint_residual: float
    message: str


def _exact_lstsq(R, t):
    """Normal-equation solve in rationals for a full-column-rank R."""
    RtR = [[sum(R[k][i] * R[k][j] for k in range(len(R))) for j in range(3)] for i in range(3)]
    Rtt = [sum(R[k][i] * t[k] for k in range(len(R))) for i in range(3)]
    A = [row[:] + [b] for row, b in zip(RtR, Rtt)]
    n = 3
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def solve_polarization(target) -> PolarizationSolution:
    """Find (polarization, scale) with ``scale * pump_rates(eps)`` closest to ``target``.

    Solves a non-negative least-squares problem over unnormalized weights
    ``w = scale * eps``. The CG matrix has full column rank, so the
    minimizer is unique. Rational targets are solved exactly.
    """
    t = list(target.rates if isinstance(target, RateVector) else target)
    if len(t) != 4:
        raise ValueError(f"target needs 4 rates, got {len(t)}")
    tf = np.asarray([float(x) for x in t])
    if not np.all(np.isfinite(tf)) or np.any(tf < 0):
        raise ValueError("target rates must be finite and non-negative")
    c_res = constraint_residual(t)
    R = cg_table().entries
    exact = all(isinstance(x, (Fraction, int, str)) for x in t)
    w = None
    if exact:
        tq = [_to_fraction(x) for x in t]
        sol = _exact_lstsq(R, tq)
        if all(x >= 0 for x in sol):
            w = sol
    if w is None:
        wf, _ = nnls(cg_table().as_array(), tf)
        w = [Fraction(float(x)) for x in wf]
    scale = sum(w, Fraction(0))
    fit = np.array([float(sum((R[i][j] * w[j] for j in range(3)), Fraction(0))) for i in range(4)])
    resid = float(np.linalg.norm(fit - tf))
    tnorm = max(float(np.linalg.norm(tf)), 1.0)
    if scale == 0:
        return PolarizationSolution(None, 0.0, False, resid, float(c_res),
                                    "target is not reachable with any non-negative polarization")
    eps = Polarization(*(x / scale for x in w))
    feasible = resid <= FEASIBLE_TOL * tnorm
    if feasible:
        msg = "exact solution"
    else:
        msg = (f"no polarization reproduces the target; least-squares residual {resid:.3g}, "
               f"constraint r1-3r2+3r3-r4 = {float(c_res):.6g} (must be 0)")
    return PolarizationSolution(eps, float(scale), feasible, resid, float(c_res), msg)


@dataclass(frozen=True)
class GammaEstimate:
    gamma: float
    residuals: np.ndarray
    model: np.ndarray


def gamma_from_rates(measured_khz, g: float, sigma_khz=None) -> GammaEstimate:
    """Least-squares gamma from measured rates given in units of 1e3 s^-1.

    Model: ``measured ~ (2*g*gamma/3) * (0, 1, 2, 3)``. With ``sigma_khz``
    each component is weighted by ``1/sigma**2``. Residuals are returned in
    the same units as ``measured_khz``.
    """
    m = np.asarray(measured_khz, dtype=float) * 1e3
    if m.shape != (4,):
        raise ValueError("need exactly 4 measured rates")
    if not g > 0:
        raise ValueError("g must be positive")
    if np.all(m == 0):
        raise ValueError("all measured rates are zero; gamma is undetermined")
    basis = (2.0 * g / 3.0) * np.arange(4.0)
    w = np.ones(4) if sigma_khz is None else 1.0 / (np.asarray(sigma_khz, dtype=float) * 1e3) ** 2
    gamma = float(np.sum(w * basis * m) / np.sum(w * basis * basis))
    model = gamma * basis
    return GammaEstimate(gamma, (m - model) / 1e3, model / 1e3)
