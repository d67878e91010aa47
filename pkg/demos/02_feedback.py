"""Closed-loop check: the open-loop optimum is reproduced by -B* P(t) y(t) / alpha.

Run: python3 demos/02_feedback.py
"""
from mxlqr import LqProblem, Propagator, TimeGrid, assemble_system, gaussian_pulse
from mxlqr.lq import feedback_residual, transition_check

ops = assemble_system(8, 8)
prob = LqProblem(Propagator(ops, TimeGrid(1.0, 64)))
y0 = gaussian_pulse(ops.layout)

res = feedback_residual(prob, y0, [8, 24, 40, 56])
print("  k   cheap      independent")
for k in res["cheap"]:
    print(f"{k:3d}   {res['cheap'][k]:.2e}   {res['independent'][k]:.2e}")

# Restarting at an intermediate time from the optimal state changes nothing.
r = transition_check(prob, y0, 16, 48)
print(f"transition: state {r['state_error']:.1e}, control {r['control_error']:.1e}")
