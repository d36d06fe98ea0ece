"""Hamiltonian families for the four-level programmable non-Hermitian system.

Basis index 0..3 corresponds to the D5/2 sublevels m = 5/2, 3/2, 1/2, -1/2
(states |1> .. |4>). All matrices are in angular-frequency units (rad/s)
unless divided by ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

__all__ = [
    "GAMMA_PATTERN",
    "SpinOperators",
    "HamiltonianSpec",
    "spin_operators",
    "build_general",
    "build_effective",
    "build_pt_epn",
    "hamiltonian",
    "global_shift",
    "g_from_khz",
    "AXES",
]

GAMMA_PATTERN = (1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0)
AXES = ("gamma", "J", "J1", "J2", "J3", "g")


def g_from_khz(g_khz: float, angular: bool = False) -> float:
    """Convert a strength quoted in kHz to rad/s.

    ``angular=False`` treats the number as a cyclic frequency (multiply by 2*pi).
    """
    return g_khz * 1e3 if angular else 2.0 * math.pi * g_khz * 1e3


@dataclass(frozen=True)
class SpinOperators:
    S: Fraction
    X: np.ndarray
    Z: np.ndarray

    @property
    def dim(self) -> int:
        return self.X.shape[0]


def _as_spin(S) -> Fraction:
    try:
        s = Fraction(S).limit_denominator(1000)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid spin quantum number {S!r}") from exc
    if s <= 0 or (2 * s).denominator != 1 or abs(float(s) - float(S)) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer, got {S!r}")
    return s


def spin_operators(S) -> SpinOperators:
    """Normalized spin operators X = S_x/S and Z = S_z/S in the |S, m> basis, m descending."""
    s = _as_spin(S)
    dim = int(2 * s + 1)
    m = [s - k for k in range(dim)]
    sf = float(s)
    X = np.zeros((dim, dim))
    for k in range(dim - 1):
        X[k, k + 1] = X[k + 1, k] = math.sqrt(float(s * (s + 1) - m[k] * m[k + 1])) / (2 * sf)
    Z = np.diag([float(mk / s) for mk in m])
    return SpinOperators(s, X, Z)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of the four-level Hamiltonian.

    Either give ``gamma`` as an explicit 4-vector, or give ``gamma_scale``
    (the scalar gamma) to use ``gamma_scale * (1, 1/3, -1/3, -1)``. Passing
    both is allowed only when ``gamma`` is the pattern itself.
    """

    g: float
    J: tuple = (1.0, 1.0, 1.0)
    gamma: tuple | None = None
    gamma_scale: float | None = None
    alpha: float = 0.0

    def __post_init__(self):
        J = tuple(float(x) for x in self.J)
        if len(J) != 3:
            raise ValueError(f"J must have 3 components, got {len(J)}")
        object.__setattr__(self, "J", J)
        if self.gamma is not None:
            gam = tuple(float(x) for x in self.gamma)
            if len(gam) != 4:
                raise ValueError(f"gamma must have 4 components, got {len(gam)}")
            object.__setattr__(self, "gamma", gam)
            if self.gamma_scale is not None and not np.allclose(gam, GAMMA_PATTERN, rtol=0, atol=1e-12):
                raise ValueError("gamma_scale given with a gamma vector that is not the pattern (1, 1/3, -1/3, -1)")
        elif self.gamma_scale is None:
            raise ValueError("one of gamma or gamma_scale is required")
        vals = [self.g, self.alpha, *J, *(self.gamma or ()), self.gamma_scale if self.gamma_scale is not None else 0.0]
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError("all Hamiltonian parameters must be finite")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    @property
    def is_pattern(self) -> bool:
        return self.gamma_scale is not None

    @property
    def gamma_vector(self) -> np.ndarray:
        if self.is_pattern:
            return self.gamma_scale * np.array(GAMMA_PATTERN)
        return np.array(self.gamma)

    def with_axis(self, axis: str, value: float) -> "HamiltonianSpec":
        """Copy with one sweep parameter set to ``value``."""
        value = float(value)
        if axis == "gamma":
            if not self.is_pattern:
                raise ValueError("the gamma axis requires a pattern-form spec")
            return replace(self, gamma_scale=value)
        if axis == "J":
            return replace(self, J=(value, value, value))
        if axis in ("J1", "J2", "J3"):
            J = list(self.J)
            J[int(axis[1]) - 1] = value
            return replace(self, J=tuple(J))
        if axis == "g":
            return replace(self, g=value)
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")

    def to_dict(self) -> dict:
        return {
            "g": self.g,
            "J": list(self.J),
            "gamma": None if self.gamma is None else list(self.gamma),
            "gamma_scale": self.gamma_scale,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        return cls(
            g=d["g"],
            J=tuple(d["J"]),
            gamma=None if d.get("gamma") is None else tuple(d["gamma"]),
            gamma_scale=d.get("gamma_scale"),
            alpha=d.get("alpha", 0.0),
        )


_X4 = spin_operators(Fraction(3, 2)).X


def build_general(spec: HamiltonianSpec) -> np.ndarray:
    """Tridiagonal 4x4 matrix with i*g*gamma_k on the diagonal."""
    # (1/sqrt(3), 2/3, 1/sqrt(3)) taken from X4 so both constructions agree bitwise
    off = spec.g * np.asarray(spec.J) * np.diag(_X4, 1)
    H = np.diag(1j * spec.g * spec.gamma_vector)
    H[np.arange(3), np.arange(1, 4)] = off
    H[np.arange(1, 4), np.arange(3)] = off
    return H


def build_effective(spec: HamiltonianSpec) -> np.ndarray:
    """General matrix plus the global loss term ``-i*alpha*g*gamma*I``."""
    if not spec.is_pattern:
        raise ValueError("build_effective needs a pattern-form spec with scalar gamma_scale")
    H = build_general(spec)
    return H - 1j * spec.alpha * spec.g * spec.gamma_scale * np.eye(4)


def hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """The matrix a spec describes: effective form for pattern specs, general otherwise."""
    if spec.is_pattern:
        return build_effective(spec)
    if spec.alpha != 0:
        raise ValueError("a nonzero alpha requires a pattern-form spec")
    return build_general(spec)


def global_shift(spec: HamiltonianSpec) -> complex:
    """The identity shift included by :func:`hamiltonian`, normalized to g."""
    if spec.is_pattern:
        return -1j * spec.alpha * spec.gamma_scale
    return 0j


def build_pt_epn(S, J: float, gamma: float, g: float) -> np.ndarray:
    """``g * (J*X + i*gamma*Z)`` in dimension 2S+1."""
    ops = spin_operators(S)
    if not g > 0:
        raise ValueError(f"g must be positive, got {g}")
    return g * (J * ops.X + 1j * gamma * ops.Z)
