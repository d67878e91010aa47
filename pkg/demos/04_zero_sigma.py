"""Lossless media: the dual operator Q(t) and its inverse relation to P(t).

Run: python3 demos/04_zero_sigma.py
"""
from mxlqr import (LqProblem, Propagator, TimeGrid, assemble_system, gaussian_pulse,
                   solve_open_loop)
from mxlqr.maxwell import random_state
from mxlqr.space import norm_u_traj
from mxlqr.zero_sigma import QHandle, dual_re_residual, openloop_via_q, pq_identity_check

ops = assemble_system(8, 8)
y0 = gaussian_pulse(ops.layout)
probes = [random_state(ops.layout, s) for s in range(3)]

print("  Nt   quadrature   |g_Q - g|/|g|   |P Q x - x|")
for nt in (32, 64, 128):
    prob = LqProblem(Propagator(ops, TimeGrid(1.0, nt)))
    ref = solve_open_loop(prob, y0).g_hat
    for quad in ("trapezoid", "midpoint"):
        q = QHandle(prob.prop, quadrature=quad)
        g = openloop_via_q(q, y0, node_stride=nt)["g_hat"]
        rel = norm_u_traj(g - ref, ops.ip, prob.prop.grid) / norm_u_traj(ref, ops.ip, prob.prop.grid)
        print(f"{nt:4d}   {quad:10s}   {rel:.2e}        {pq_identity_check(q, prob, 0, probes):.2e}")

x = gaussian_pulse(ops.layout)
y = gaussian_pulse(ops.layout, (0.4, 0.6), fields="ez hx hy")
res = [dual_re_residual(QHandle(Propagator(ops, TimeGrid(1.0, nt))), nt // 2, x, y)
       for nt in (32, 64, 128)]
print("dual Riccati residual at T/2:", ", ".join(f"{r:.2e}" for r in res))
