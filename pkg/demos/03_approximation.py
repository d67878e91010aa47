"""Terminal weight G_n* G_n with G_n = n (n - A)^{-1}, and how fast it recovers G = I.

The slowest component is the lowest cavity mode, so errors fall roughly like
omega_1^2 / n^2 with omega_1 = pi * sqrt(2).

Run: python3 demos/03_approximation.py
"""
import numpy as np

from mxlqr import LqProblem, Propagator, TimeGrid, assemble_system, gaussian_pulse
from mxlqr.approx import convergence_study
from mxlqr.space import norm_y

ops = assemble_system(8, 8)
prob = LqProblem(Propagator(ops, TimeGrid(1.0, 64)))
y0 = gaussian_pulse(ops.layout)

probe = y0 / norm_y(y0, ops.ip)
tab = convergence_study(prob, y0, [1, 2, 4, 8, 16, 32, 64, 128], probes=[probe], probe_steps=[0])
g_norm = tab.reference["g_norm"]
omega1 = np.pi * np.sqrt(2)
p_err = next(iter(tab.riccati_error.values()))
print("   n   |g_n - g|/|g|   |P_n(0)z - P(0)z|   w1^2/(n^2+w1^2)")
for n, e, p in zip(tab.n_list, tab.control_error, p_err):
    print(f"{n:4d}   {e / g_norm:.3e}       {p:.3e}           {omega1**2 / (n**2 + omega1**2):.3e}")
