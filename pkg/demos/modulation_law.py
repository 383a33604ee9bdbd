"""Reduced modulation law and the trapped-orbit shooting.

Integrates the reduced ODE for nu(tau), compares it with the closed form,
prints the physical blowup scale near T, then shoots for the trapped a0.
"""
import numpy as np

from ksring import modulation as MD

BETA = 0.5

exact, num = MD.integrate_reduced_law(100.0, BETA, 200.0)
print(f"reduced law: max |nu_num/nu_exact - 1| = {np.max(np.abs(num.nu / exact.nu - 1)):.3e}")
print(f"nu(200) = {num.nu[-1]:.6e}  (closed form {exact.nu[-1]:.6e})")

for M0 in (1.0, 100.0):
    r = [MD.blowup_exponent_ratio(g, 1.0, M0, BETA) for g in (1e-12, 1e-100, 1e-300)]
    print(f"M0={M0:5g}: log-log slope ratio at T-t = 1e-12, 1e-100, 1e-300 -> "
          + ", ".join(f"{x:.3f}" for x in r))

f = lambda s: 0.5 * np.exp(-2 * np.sqrt(BETA * s + 100.0)) / np.sqrt(BETA * s + 100.0)
rep = MD.shoot_trapped_a(f, BETA, M0=100.0)
print(f"shooting: a0 = {rep.a0:.6e} after {rep.iterations} bisections, exit signs {rep.exit_signs}")
