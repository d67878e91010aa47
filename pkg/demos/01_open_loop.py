"""Open-loop optimal boundary control of a Gaussian pulse in a lossless cavity.

Run: python3 demos/01_open_loop.py
"""
import numpy as np

from mxlqr import LqProblem, Propagator, TimeGrid, assemble_system, gaussian_pulse, solve_open_loop
from mxlqr.lq import riccati_apply
from mxlqr.propagation import propagate
from mxlqr.space import inner_y, norm_y

ops = assemble_system(8, 8)
prob = LqProblem(Propagator(ops, TimeGrid(1.0, 64)), alpha=1.0)
y0 = gaussian_pulse(ops.layout)

# Without control the pulse keeps all its energy.
free = propagate(prob.prop, "forward", y0, 0, prob.nt, final_only=True)
print(f"uncontrolled |y(T)|      = {norm_y(free, ops.ip):.4f}")

sol = solve_open_loop(prob, y0)
print(f"controlled   |y(T)|      = {norm_y(sol.terminal, ops.ip):.4f}")
print(f"optimal cost J           = {sol.cost:.6f}")
print(f"CG iterations            = {sol.cg_report.iters}")

# The same number comes from the Riccati operator applied to y0.
form = inner_y(riccati_apply(prob, 0, y0), y0, ops.ip)
print(f"(P(0) y0, y0)            = {form:.6f}  (rel. gap {abs(form - sol.cost) / sol.cost:.1e})")

peak = np.argmax(np.abs(sol.g_hat.values).max(axis=1))
print(f"largest boundary control at t = {(peak + 0.5) * prob.prop.grid.dt:.3f}")
