"""Locating exceptional points and following EP2 lines to the EP4.

On the symmetric family J = (J1, J2, J1) the characteristic polynomial is
lambda**4 + P lambda**2 + Q. Its discriminant 16 Q (P**2 - 4Q)**2 vanishes on
two EP2 branches, Q = 0 and P**2 = 4Q, which meet at the EP4 J1 = J2 = gamma.
"""
import numpy as np

from epsim.eplocate import analytic_q0_gammas, classify_degeneracy, locate_ep_on_scan, trace_ep2_curve
from epsim.model import HamiltonianSpec, hamiltonian


def sym(J1, J2, gamma=0.0):
    return HamiltonianSpec(g=1.0, J=(J1, J2, J1), gamma_scale=gamma)


print("EP4 on the uniform chain:")
for r in locate_ep_on_scan(sym(1, 1), "gamma", (0.5, 1.5)):
    print(f"  gamma={r.params['gamma']:.9f} alg={r.algebraic_mult} geo={r.geometric_mult} {r.kind}")

print("\nEP2 lines at gamma = 1 (J1, J2):")
q0 = trace_ep2_curve("Q0", 1.0, np.arange(0, 11) / 10)
print("  Q0   ", " ".join(f"({a:.2f},{b:.3f})" for a, b in q0.points))
p24 = trace_ep2_curve("P24Q", 1.0, np.concatenate([[1 / np.sqrt(3)], np.arange(6, 11) / 10]))
print("  P24Q ", " ".join(f"({a:.3f},{b:.3f})" for a, b in p24.points))

print("\nTwo EP2s coalescing into the EP4 along J2 = (J1**2 + 1)/2:")
for J1 in (0.0, 0.59, 0.81, 0.95, 0.99):
    J2 = (J1**2 + 1) / 2
    lo = -0.3 if J1 < 0.9 else 0.8
    recs = [r for r in locate_ep_on_scan(sym(J1, J2), "gamma", (lo, 1.2)) if abs(r.eigenvalue) < 1e-6]
    found = ", ".join(f"{r.params['gamma']:.6f} ({r.kind})" for r in recs)
    ref = ", ".join(f"{x:.6f}" for x in analytic_q0_gammas(J1, J2))
    print(f"  J1={J1:4.2f}: located {found}; analytic {ref}")

print("\nSame zero-eigenvalue pair, different nature:")
for gam in (0.0, 1.0):
    d = [x for x in classify_degeneracy(hamiltonian(sym(0, 0.5, gam))) if abs(x.eigenvalue) < 1e-9][0]
    print(f"  (gamma, J1, J2) = ({gam}, 0, 0.5): {d.kind}, alg {d.algebraic_mult}, geo {d.geometric_mult}")
