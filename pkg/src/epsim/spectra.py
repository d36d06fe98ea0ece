"""Band-structure sweeps and PT-phase classification."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import AXES, HamiltonianSpec, global_shift, hamiltonian
from .numerics import DEFAULT_CLUSTER_TOL, eigendecompose

__all__ = ["BandSweep", "sweep_bands", "classify_pt_phase", "UNBROKEN", "BROKEN", "BOUNDARY"]

UNBROKEN, BROKEN, BOUNDARY = "unbroken", "broken", "boundary"

CSV_COLUMNS = ("axis_value", "band_index", "re", "im", "gap", "gram_cond", "flagged")


@dataclass(frozen=True)
class BandSweep:
    """Tracked eigenvalue bands of ``H/g`` along one parameter axis.

    ``bands[b, k]`` is band ``b`` at ``axis_values[k]``. Inside flagged
    (near-degenerate) points the band labels carry no meaning; only the
    multiset of values at each point does.
    """

    axis_name: str
    axis_values: np.ndarray
    bands: np.ndarray
    gaps: np.ndarray
    gram_conds: np.ndarray
    flagged: np.ndarray
    shifts: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.bands.shape[0]

    def unshifted(self) -> np.ndarray:
        """Bands with the global ``-i*alpha*gamma`` shift removed."""
        return self.bands - self.shifts[None, :]

    def rows(self):
        for k, x in enumerate(self.axis_values):
            for b in range(self.n_bands):
                z = self.bands[b, k]
                yield (float(x) + 0.0, b, float(z.real) + 0.0, float(z.imag) + 0.0, float(self.gaps[k]),
                       float(self.gram_conds[k]), bool(self.flagged[k]))

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            for line in header_comment.splitlines():
                buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x, b, re_, im_, gap, cond, flag in self.rows():
            w.writerow([repr(x), b, repr(re_), repr(im_), repr(gap), repr(cond), int(flag)])
        return buf.getvalue()


def _check_grid(grid) -> np.ndarray:
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("grid needs at least 2 points")
    d = np.diff(x)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("grid must be strictly monotone")
    return x


def sweep_bands(template: HamiltonianSpec, axis: str, grid, cluster_tol: float = DEFAULT_CLUSTER_TOL) -> BandSweep:
    """Eigenvalues of ``H/g`` along ``axis``, linked into continuous tracks.

    Consecutive points are matched by minimum total ``|d lambda|``
    (optimal assignment), not greedily.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    x = _check_grid(grid)
    specs = [template.with_axis(axis, v) for v in x]
    systems = [eigendecompose(hamiltonian(s) / s.g, cluster_tol=cluster_tol) for s in specs]
    n = len(systems[0].eigenvalues)
    bands = np.empty((n, len(x)), dtype=complex)
    bands[:, 0] = systems[0].eigenvalues
    for k in range(1, len(x)):
        prev, cur = bands[:, k - 1], systems[k].eigenvalues
        cost = np.abs(prev[:, None] - cur[None, :])
        rows, cols = linear_sum_assignment(cost)
        bands[rows, k] = cur[cols]
    gaps = np.array([s.min_gap for s in systems])
    flagged = np.array([s.min_gap < s.cluster_tol for s in systems])
    return BandSweep(
        axis_name=axis,
        axis_values=x,
        bands=bands,
        gaps=gaps,
        gram_conds=np.array([s.gram_cond for s in systems]),
        flagged=flagged,
        shifts=np.array([global_shift(s) for s in specs]),
    )


def classify_pt_phase(eigenvalues, shift: complex = 0j, tol: float | None = None) -> str:
    """Classify a spectrum as PT-unbroken, broken, or at the boundary (an EP).

    ``shift`` is subtracted first. The default tolerance is
    ``1e-6 * max|lambda|`` with an absolute floor of 1e-9.
    """
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    if lam.size == 0:
        raise ValueError("empty eigenvalue list")
    lam = lam - shift
    if tol is None:
        tol = max(1e-6 * float(np.max(np.abs(lam))), 1e-9)
    if np.all(np.abs(lam - lam.mean()) <= tol):
        return BOUNDARY
    if np.max(np.abs(lam.imag)) <= tol:
        return UNBROKEN
    return BROKEN
