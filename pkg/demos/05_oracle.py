"""Dense cross-checks on a 6x6 grid: explicit Gram solve and a backward Riccati sweep.

Run: python3 demos/05_oracle.py
"""
from mxlqr import LqProblem, Propagator, TimeGrid, assemble_system, gaussian_pulse, solve_open_loop
from mxlqr.approx import dense_dre_oracle, dense_openloop_oracle
from mxlqr.space import norm_u_traj

ops = assemble_system(6, 6)
y0 = gaussian_pulse(ops.layout)

prob = LqProblem(Propagator(ops, TimeGrid(1.0, 16)))
g_dense, cost_dense, _ = dense_openloop_oracle(prob, y0)
sol = solve_open_loop(prob, y0)
grid = prob.prop.grid
print(f"matrix-free vs dense control: {norm_u_traj(sol.g_hat - g_dense, ops.ip, grid) / norm_u_traj(g_dense, ops.ip, grid):.1e}")

for nt in (32, 64, 128):
    prob = LqProblem(Propagator(ops, TimeGrid(1.0, nt)))
    cost = solve_open_loop(prob, y0).cost
    dre = dense_dre_oracle(prob, y0)["cost"]
    print(f"Nt={nt:4d}  J={cost:.6f}  (P_dre(0) y0, y0)={dre:.6f}  rel {abs(dre - cost) / cost:.1e}")
