"""Designing the state-dependent loss with the repump polarization.

Pump rates out of the four D5/2 sublevels follow from squared Clebsch-Gordan
weights. Every polarization satisfies r1 - 3 r2 + 3 r3 - r4 = 0, and the
linear loss ladder 0:1:2:3 needed for the gain/loss pattern is reached with
2/3 sigma+ and 1/3 pi.
"""
from fractions import Fraction as F

import numpy as np

from epsim import Polarization, cg_table, g_from_khz, gamma_from_rates, pump_rates, solve_polarization

print("squared CG weights (sigma+, sigma-, pi):")
for i, row in enumerate(cg_table().entries, start=1):
    print(f"  |{i}>", " ".join(f"{str(x):>5s}" for x in row))

rv = pump_rates(Polarization(F(2, 3), 0, F(1, 3)))
print("\nrates for (2/3, 0, 1/3):", [str(r) for r in rv.rates], "ratio", rv.ratio_string())

rng = np.random.default_rng(1)
res = [abs(np.dot((1, -3, 3, -1), pump_rates(Polarization(*map(float, w))).as_array()))
       for w in rng.dirichlet([1, 1, 1], 1000)]
print(f"max |r1 - 3r2 + 3r3 - r4| over 1000 random polarizations: {max(res):.1e}")

sol = solve_polarization([0, 1, 2, 3])
print("solve 0:1:2:3 ->", [str(x) for x in sol.polarization.as_tuple()], sol.message)
bad = solve_polarization([1, 0, 0, 0])
print("solve 1:0:0:0 ->", bad.message)

# gamma from measured rates (units of 1e3 s^-1), nominal g = 2*pi*2.3 kHz
est = gamma_from_rates([0.6, 10.0, 20.3, 29.9], g_from_khz(2.3))
print(f"\ngamma from rates: {est.gamma:.3f}; residuals {np.round(est.residuals, 3)}")
