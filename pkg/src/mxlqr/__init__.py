"""Optimal boundary control of the 2D transverse-magnetic Maxwell system.

Matrix-free open-loop synthesis, the Riccati operator and its feedback
identity, resolvent-smoothed terminal weights, and the explicit dual
Riccati operator for lossless media, all on a staggered finite-volume grid
with a Crank-Nicolson propagator.
"""
from .approx import (ConvergenceTable, convergence_study, dense_dre_oracle, dense_openloop_oracle,
                     gn_apply, solve_problem_n)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .lq import (LqProblem, OpenLoopSolution, TerminalWeight, coercivity_estimate,
                 evaluate_cost, feedback_residual, riccati_apply, solve_open_loop,
                 transition_check)
from .maxwell import (MaterialField, MaxwellOperators, apply_a, apply_b, apply_b_star,
                      assemble_system, boundary_silent, gaussian_pulse, random_state)
from .propagation import Propagator, admissibility_ratio, adjoint_input_map, propagate
from .space import (CGConvergenceError, ControlTrajectory, StateLayout, StateVector, TimeGrid,
                    cg_solve, inner_u, inner_u_traj, inner_y, norm_u_traj, norm_y)
from .zero_sigma import (QHandle, dual_re_residual, openloop_via_q, pq_identity_check, q_apply,
                         q_inverse_apply)

__version__ = "0.1.0"
