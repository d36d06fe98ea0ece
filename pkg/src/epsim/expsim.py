"""Population dynamics under the effective Hamiltonian and synthetic shot data."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import HamiltonianSpec, hamiltonian
from .numerics import expm

__all__ = [
    "TimeSeriesDataset",
    "population_trace",
    "model_p2",
    "synthesize_dataset",
    "exact_dataset",
    "wilson_sigma",
    "default_times",
]

STATE_2 = 1


def default_times(t_stop_us: float = 600.0, n: int = 20) -> np.ndarray:
    """Uniform grid from 0 to ``t_stop_us`` microseconds, in seconds."""
    return np.linspace(0.0, t_stop_us, n) * 1e-6


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("times must be a 1-D array of finite non-negative seconds")
    return t


def population_trace(spec: HamiltonianSpec, initial: int, times) -> np.ndarray:
    """``P_i(t) = |<i| exp(-i H t) |initial>|**2``, shape ``(len(times), dim)``.

    Populations are not renormalized: probability pumped out of the
    four-level system is simply lost.
    """
    H = hamiltonian(spec)
    n = H.shape[0]
    if not (isinstance(initial, (int, np.integer)) and 0 <= initial < n):
        raise ValueError(f"initial must be a basis index in [0, {n}), got {initial!r}")
    t = _check_times(times)
    U = expm(-1j * t[:, None, None] * H[None])
    return np.abs(U[:, :, initial]) ** 2


def model_p2(template: HamiltonianSpec, gammas, times, initial: int = STATE_2) -> np.ndarray:
    """Population of |2> for many gamma values at once, shape ``(len(gammas), len(times))``."""
    gam = np.atleast_1d(np.asarray(gammas, dtype=float))
    t = _check_times(times)
    H = np.stack([hamiltonian(template.with_axis("gamma", x)) for x in gam])
    A = -1j * t[None, :, None, None] * H[:, None]
    U = expm(A)
    return np.abs(U[..., STATE_2, initial]) ** 2


def wilson_sigma(p_hat, shots) -> np.ndarray:
    """Standard error from the Agresti-Coull (Wilson-centred) estimate ``(k+2)/(n+4)``.

    Floored at ``1/(2*shots)`` so it is never zero.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    n = np.asarray(shots, dtype=float)
    p_adj = (p_hat * n + 2.0) / (n + 4.0)
    sig = np.sqrt(p_adj * (1.0 - p_adj) / n)
    return np.maximum(sig, 1.0 / (2.0 * n))


@dataclass(frozen=True)
class TimeSeriesDataset:
    times: np.ndarray
    p2: np.ndarray
    sigma: np.ndarray
    shots: np.ndarray
    seed: int | None
    spec: HamiltonianSpec | None

    def __post_init__(self):
        t = _check_times(self.times)
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("p2", "sigma")]
        shots = np.asarray(self.shots, dtype=int)
        if shots.ndim == 0:
            shots = np.full(len(t), int(shots))
        if not all(a.shape == t.shape for a in (*arrays, shots)):
            raise ValueError("times, p2, sigma and shots must have equal lengths")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(shots < 1):
            raise ValueError("shots must be >= 1")
        if np.any(arrays[1] < 0):
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "p2", arrays[0])
        object.__setattr__(self, "sigma", arrays[1])
        object.__setattr__(self, "shots", shots)

    def __len__(self):
        return len(self.times)

    def with_p2(self, p2) -> "TimeSeriesDataset":
        return TimeSeriesDataset(self.times, p2, self.sigma, self.shots, self.seed, self.spec)

    def to_csv(self) -> str:
        meta = {"seed": self.seed, "spec": None if self.spec is None else self.spec.to_dict()}
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t_us", "p2", "sigma", "shots"))
        for t, p, s, n in zip(self.times, self.p2, self.sigma, self.shots):
            w.writerow((repr(float(t * 1e6)), repr(float(p)), repr(float(s)), int(n)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeriesDataset":
        meta: dict = {}
        lines = []
        for line in text.splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("{") and not meta:
                    try:
                        meta = json.loads(body)
                    except json.JSONDecodeError:
                        pass
                continue
            if line.strip():
                lines.append(line)
        rows = list(csv.DictReader(lines))
        if not rows:
            raise ValueError("dataset has no rows")
        missing = {"t_us", "p2", "sigma", "shots"} - set(rows[0])
        if missing:
            raise ValueError(f"dataset is missing columns {sorted(missing)}")
        spec = meta.get("spec")
        return cls(
            times=np.array([float(r["t_us"]) for r in rows]) * 1e-6,
            p2=np.array([float(r["p2"]) for r in rows]),
            sigma=np.array([float(r["sigma"]) for r in rows]),
            shots=np.array([int(r["shots"]) for r in rows]),
            seed=meta.get("seed"),
            spec=None if spec is None else HamiltonianSpec.from_dict(spec),
        )


def synthesize_dataset(
    spec: HamiltonianSpec,
    times,
    shots: int,
    seed: int,
    detection_error: float = 0.0,
    initial: int = STATE_2,
) -> TimeSeriesDataset:
    """Binomial shot-noise measurement of P_|2>(t).

    Each time point draws from its own generator seeded by ``(seed, index)``,
    so results do not depend on evaluation order. ``detection_error`` flips
    each shot's outcome with that probability.
    """
    if int(shots) < 1:
        raise ValueError("shots must be >= 1")
    if not 0.0 <= detection_error <= 1.0:
        raise ValueError(f"detection_error must be in [0, 1], got {detection_error}")
    t = _check_times(times)
    p = np.clip(population_trace(spec, initial, t)[:, STATE_2], 0.0, 1.0)
    p_obs = p * (1.0 - detection_error) + (1.0 - p) * detection_error
    counts = np.array(
        [np.random.default_rng([int(seed), k]).binomial(int(shots), p_obs[k]) for k in range(len(t))]
    )
    p_hat = counts / shots
    return TimeSeriesDataset(t, p_hat, wilson_sigma(p_hat, shots), np.full(len(t), int(shots)), int(seed), spec)


def exact_dataset(spec: HamiltonianSpec, times, shots: int = 500, initial: int = STATE_2) -> TimeSeriesDataset:
    """Noise-free populations with the sigma a ``shots``-shot measurement would carry."""
    t = _check_times(times)
    p = population_trace(spec, initial, t)[:, STATE_2]
    return TimeSeriesDataset(t, p, wilson_sigma(p, shots), np.full(len(t), int(shots)), None, spec)
