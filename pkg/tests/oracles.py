"""Independent reference computations used only by the tests."""

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from sympy.physics.quantum.cg import CG


def ode_propagate(M, v, t, rtol=1e-12, atol=1e-13):
    """exp(-iMt) v by adaptive Runge-Kutta (DOP853) on d psi/dt = -i M psi."""
    M = np.asarray(M, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    sol = solve_ivp(lambda _, y: -1j * (M @ y), (0.0, t), v, method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


def closed_form_spectrum(S, J, gamma):
    """(m/S) * sqrt(J**2 - gamma**2) for m = S..-S, with +i*sqrt(gamma**2 - J**2) above the EP."""
    n = int(round(2 * S)) + 1
    m = S - np.arange(n)
    root = np.sqrt(complex(J * J - gamma * gamma))
    return m / S * root


def sympy_charpoly(M):
    """Monic coefficients of det(lambda I - M), descending, from exact rational entries."""
    lam = sp.symbols("lam")
    A = sp.Matrix(M)
    p = (lam * sp.eye(A.shape[0]) - A).det()
    return [sp.nsimplify(c) for c in sp.Poly(sp.expand(p), lam).all_coeffs()]


def sympy_discriminant(coeffs):
    lam = sp.symbols("lam")
    return sp.discriminant(sp.Poly(coeffs, lam))


def sylvester_det_resultant(f, g):
    """Res(f, g) as the determinant of the Sylvester matrix, in mpmath precision."""
    import mpmath

    f = list(f)
    g = list(g)
    m, n = len(f) - 1, len(g) - 1
    N = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + f + [0] * (N - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + g + [0] * (N - n - 1 - i))
    with mpmath.workdps(50):
        return complex(mpmath.det(mpmath.matrix([[mpmath.mpc(x) for x in r] for r in rows])))


def cg_squared_table():
    """Normalized |<5/2 M; 1 q|3/2 M+q>|^2 rows for M = 5/2..-1/2, columns (q=+1, q=-1, q=0).

    The raw coefficients of the 5/2 -> 3/2 coupling sum to (2*3/2+1)/(2*5/2+1) = 2/3 per row,
    so each row is scaled by 3/2.
    """
    out = []
    for M in [sp.Rational(5, 2), sp.Rational(3, 2), sp.Rational(1, 2), sp.Rational(-1, 2)]:
        row = []
        for q in (1, -1, 0):
            Mp = M + q
            if abs(Mp) > sp.Rational(3, 2):
                row.append(sp.Integer(0))
                continue
            c = CG(sp.Rational(5, 2), M, 1, q, sp.Rational(3, 2), Mp).doit()
            row.append(sp.nsimplify(c**2 * sp.Rational(3, 2)))
        out.append(row)
    return out
