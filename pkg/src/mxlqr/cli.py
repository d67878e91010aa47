"""Command line runner: ``mxlqr <subcommand> --config <path> [--out <dir>] [--seed <u64>]``.

Each subcommand builds the instance described by the configuration, runs
one pipeline, and writes ``report.json`` plus CSV tables into the output
directory. Exit status: 0 all gated checks pass, 1 a check failed, 2 the
configuration is invalid, 3 a solver failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx, lq, zero_sigma
from .config import ConfigError, ExperimentConfig, load_config
from .maxwell import (MaterialField, assemble_system, boundary_silent, gaussian_pulse,
                      random_state)
from .propagation import Propagator, admissibility_ratio
from .space import (CGConvergenceError, ControlTrajectory, IndefiniteOperatorError, StateLayout,
                    TimeGrid, inner_u, norm_u_traj, norm_y)

__all__ = ["Check", "RunReport", "SUBCOMMANDS", "run", "main", "build_instance"]

SCHEMA_VERSION = "mxlqr.report/1"
SUBCOMMANDS = ("solve", "feedback", "transition", "approx", "zero-sigma", "admissibility",
               "oracle-compare")
EXIT_PASS, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("mxlqr")


@dataclass
class Check:
    """One named comparison ``value <= tolerance`` (or ``>=`` with ``lower=True``)."""

    name: str
    value: float
    tolerance: float
    lower: bool = False
    gated: bool = True

    @property
    def status(self) -> str:
        if not self.gated:
            return "report-only"
        if not math.isfinite(self.value):
            return "fail"
        ok = self.value >= self.tolerance if self.lower else self.value <= self.tolerance
        return "pass" if ok else "fail"

    def as_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "tolerance": float(self.tolerance),
                "comparison": ">=" if self.lower else "<=", "status": self.status}


@dataclass
class RunReport:
    subcommand: str
    config: dict
    seed: int
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    extra_json: dict = field(default_factory=dict)  # name -> serialized text
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.status != "fail" for c in self.checks)

    def as_dict(self, with_timings: bool = True) -> dict:
        out = {"schema": SCHEMA_VERSION, "subcommand": self.subcommand, "seed": self.seed,
               "config": self.config, "checks": [c.as_dict() for c in self.checks],
               "results": self.results, "status": self._status(),
               "artifacts": sorted([f"{k}.csv" for k in self.tables]
                                   + [f"{k}.json" for k in self.extra_json])}
        if self.error is not None:
            out["error"] = self.error
        if with_timings:
            out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out

    def _status(self) -> str:
        if self.error is not None:
            return "error"
        return "pass" if self.passed else "fail"

    def to_json(self, with_timings: bool = True) -> str:
        return json.dumps(self.as_dict(with_timings), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# instance construction


def _materials(cfg: ExperimentConfig, layout: StateLayout) -> MaterialField:
    m = cfg.section("materials")
    if m["eps_kind"] == "gaussian-bump":
        return MaterialField.gaussian_bump(layout, m["eps"], m["eps_bump_amplitude"],
                                           tuple(m["eps_bump_center"]), m["eps_bump_width"],
                                           mu=m["mu"], sigma=m["sigma"])
    return MaterialField.constant(layout, m["eps"], m["mu"], m["sigma"])


def _initial_state(cfg: ExperimentConfig, layout: StateLayout, seed: int) -> np.ndarray:
    s = cfg.section("initial_state")
    if s["preset"] == "gaussian":
        return gaussian_pulse(layout, tuple(s["center"]), s["width"], s["amplitude"])
    if s["preset"] == "boundary-silent":
        return boundary_silent(layout, s["amplitude"])
    if s["preset"] == "random":
        return s["amplitude"] * random_state(layout, seed)
    return layout.zeros()


def build_instance(cfg: ExperimentConfig, seed: int | None = None):
    """``(problem, y0)`` for a configuration; ``seed`` overrides ``initial_state.seed``."""
    seed = cfg["initial_state.seed"] if seed is None else seed
    layout = StateLayout(cfg["grid.nx"], cfg["grid.ny"])
    ops = assemble_system(layout.nx, layout.ny, _materials(cfg, layout), kappa=cfg["grid.kappa"])
    prop = Propagator(ops, TimeGrid(cfg["time.T"], cfg["time.nt"]))
    weight = (lq.TerminalWeight.resolvent_smoothed(cfg["problem.terminal_n"])
              if cfg["problem.terminal_weight"] == "resolvent" else lq.TerminalWeight())
    prob = lq.LqProblem(prop, alpha=cfg["problem.alpha"], k_s=cfg["problem.s_index"],
                        terminal_weight=weight, cg_tol=cfg["solver.cg_tol"],
                        cg_max_iter=cfg["solver.cg_max_iter"] or None)
    return prob, _initial_state(cfg, layout, seed)


def smooth_probes(layout: StateLayout, count: int, ip) -> list:
    """Unit-norm Gaussian probes cycling through centres and field blocks."""
    spots = [((0.5, 0.5), "ez"), ((0.35, 0.6), "ez hx hy"), ((0.6, 0.4), "hx"),
             ((0.4, 0.4), "hy"), ((0.65, 0.65), "ez hx")]
    out = []
    for i in range(count):
        c, f = spots[i % len(spots)]
        z = gaussian_pulse(layout, c, 0.2 + 0.05 * (i // len(spots)), fields=f)
        out.append(z / norm_y(z, ip))
    return out


def _sample_steps(cfg: ExperimentConfig, prob: lq.LqProblem) -> list:
    steps = cfg["study.sample_steps"]
    if steps:
        return [k for k in steps if k >= prob.k_s]
    span = prob.nt - prob.k_s
    return sorted({prob.k_s + int(span * f) for f in (0.125, 0.375, 0.625, 0.875)})


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _order(values, nts) -> float:
    """Least-squares slope of ``log values`` against ``log(1/nt)``."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(-np.log(np.asarray(nts, dtype=float)), np.log(v), 1)[0])


# ---------------------------------------------------------------------------
# pipelines


class _Ctx:
    def __init__(self, cfg: ExperimentConfig, seed: int, report: RunReport):
        self.cfg, self.seed, self.report = cfg, seed, report
        self.prob, self.y0 = build_instance(cfg, seed)
        self.ops = self.prob.ops
        self.ip = self.ops.ip
        self.rng = np.random.default_rng(seed)

    def check(self, name, value, default_tol, lower=False, gated=True):
        tol = self.cfg.checks.get(name, default_tol)
        self.report.checks.append(Check(name, float(value), float(tol), lower, gated))

    def table(self, name, header, rows):
        self.report.tables[name] = (list(header), [list(r) for r in rows])

    @contextmanager
    def timed(self, label):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.report.timings[label] = time.perf_counter() - t0


def _norm_series(ctx: _Ctx, sol: lq.OpenLoopSolution):
    grid, prob = ctx.prob.prop.grid, ctx.prob
    y_rows = [(k, repr(float(grid.nodes[k])), repr(norm_y(y, ctx.ip)))
              for k, y in zip(range(prob.k_s, prob.nt + 1), sol.y_hat)]
    g_rows = []
    for j, g in enumerate(sol.g_hat.values):
        k = prob.k_s + j
        g_rows.append((k, repr(float(grid.midpoints[k])), repr(math.sqrt(max(inner_u(g, g, ctx.ip), 0.0)))))
    ctx.table("state_norm", ("k", "t", "y_norm"), y_rows)
    ctx.table("control_norm", ("k", "t_mid", "g_norm"), g_rows)


def _run_solve(ctx: _Ctx):
    prob, y0 = ctx.prob, ctx.y0
    with ctx.timed("open_loop"):
        sol = lq.solve_open_loop(prob, y0)
    with ctx.timed("riccati"):
        p_form = float(np.dot(lq.riccati_apply(prob, prob.k_s, y0) * ctx.ip.y_weights, y0))
    ctx.report.results.update({"cost": sol.cost, "cg_iterations": sol.cg_report.iters,
                               "riccati_form": p_form})
    ctx.check("cost_identity", _rel(p_form, sol.cost), 1e-8)
    ctx.check("cg_relative_residual", sol.cg_report.final_relative_residual,
              10 * prob.cg_tol)
    gaps = []
    for _ in range(ctx.cfg["study.probes"]):
        d = ctx.rng.standard_normal(sol.g_hat.values.shape)
        g = ControlTrajectory(prob.k_s, sol.g_hat.values + d)
        gaps.append(lq.evaluate_cost(prob, g, y0) - sol.cost)
    ctx.check("optimality_gap", min(gaps), -1e-9, lower=True)
    _norm_series(ctx, sol)


def _run_feedback(ctx: _Ctx):
    steps = _sample_steps(ctx.cfg, ctx.prob)
    with ctx.timed("feedback"):
        res = lq.feedback_residual(ctx.prob, ctx.y0, steps)
    grid = ctx.prob.prop.grid
    ctx.table("feedback_residual", ("k", "t", "cheap", "independent"),
              [(k, repr(float(grid.nodes[k])), repr(res["cheap"][k]), repr(res["independent"][k]))
               for k in steps])
    ctx.report.results["sample_steps"] = steps
    ctx.check("feedback_cheap", max(res["cheap"].values()), 1e-8)
    ctx.check("feedback_independent", max(res["independent"].values()), 1e-6)


def _run_transition(ctx: _Ctx):
    prob = ctx.prob
    rows, s_err, c_err = [], [], []
    with ctx.timed("transition"):
        for _ in range(ctx.cfg["study.splits"]):
            k_tau, k_t = sorted(ctx.rng.integers(prob.k_s, prob.nt + 1, size=2).tolist())
            r = lq.transition_check(prob, ctx.y0, k_tau, k_t)
            rows.append((k_tau, k_t, repr(r["state_error"]), repr(r["control_error"])))
            s_err.append(r["state_error"])
            c_err.append(r["control_error"])
    ctx.table("transition", ("k_tau", "k_t", "state_error", "control_error"), rows)
    ctx.check("transition_state", max(s_err), 1e-7)
    ctx.check("transition_control", max(c_err), 1e-7)


def _run_approx(ctx: _Ctx):
    prob, cfg = ctx.prob, ctx.cfg
    probes = smooth_probes(ctx.ops.layout, cfg["study.probes"], ctx.ip)
    steps = sorted({prob.k_s + int(round(f * (prob.nt - prob.k_s))) for f in cfg["study.riccati_times"]})
    with ctx.timed("convergence_study"):
        tab = approx.convergence_study(prob, ctx.y0, cfg["study.n_list"], probes, steps,
                                       workers=_threads())
    ctx.table("convergence", ["n", *tab.columns],
              [[r["n"], *(repr(float(r[c])) for c in tab.columns)] for r in tab.rows()])
    ctx.report.extra_json["convergence"] = tab.to_json()
    ctx.report.results["reference"] = tab.reference
    bad = [name for name, col in tab.columns.items() if not approx.is_nonincreasing(col, start=1)]
    ctx.report.results["non_monotone_columns"] = bad
    ctx.check("approx_monotone_columns", len(bad), 0)
    g_norm = tab.reference["g_norm"]
    ctx.check("approx_control_final", tab.control_error[-1] / g_norm if g_norm else 0.0, 1e-3)
    first = f"P_err_k{steps[0]}_"
    ctx.check("approx_riccati_final",
              max(c[-1] for k, c in tab.riccati_error.items() if k.startswith(first)), 1e-3)
    later = [c[-1] for k, c in tab.riccati_error.items() if not k.startswith(first)]
    if later:
        ctx.check("approx_riccati_final_interior", max(later), 1e-3, gated=False)
    ctx.check("approx_state_final", tab.state_error[-1], 1e-3, gated=False)
    ctx.check("approx_cost_final", tab.cost_error[-1], 1e-3, gated=False)


def _q_route(ctx: _Ctx, prob: lq.LqProblem, quadrature: str, probes) -> dict:
    q = zero_sigma.QHandle(prob.prop, prob.alpha, quadrature)
    ref = lq.solve_open_loop(prob, ctx.y0)
    via = zero_sigma.openloop_via_q(q, ctx.y0, node_stride=prob.nt)
    grid = prob.prop.grid
    g_norm = norm_u_traj(ref.g_hat, ctx.ip, grid)
    t_norm = norm_y(ref.terminal, ctx.ip)
    return {
        "q": q,
        "control": norm_u_traj(via["g_hat"] - ref.g_hat, ctx.ip, grid) / g_norm if g_norm else 0.0,
        "terminal": norm_y(via["y_hat"][-1] - ref.terminal, ctx.ip) / t_norm if t_norm else 0.0,
        "pq": zero_sigma.pq_identity_check(q, prob, 0, probes),
    }


def _run_zero_sigma(ctx: _Ctx):
    cfg, base = ctx.cfg, ctx.prob
    quad = cfg["study.quadrature"]
    probes = [random_state(ctx.ops.layout, ctx.seed + i) for i in range(cfg["study.probes"])]
    smooth = smooth_probes(ctx.ops.layout, 3, ctx.ip)
    rows, ctrl, term, pq, dre = [], [], [], [], []
    with ctx.timed("refinement"):
        for nt in cfg["study.nt_list"]:
            prob = lq.LqProblem(Propagator(ctx.ops, TimeGrid(cfg["time.T"], nt)), alpha=base.alpha,
                                cg_tol=base.cg_tol)
            r = _q_route(ctx, prob, quad, probes)
            d = zero_sigma.dual_re_residual(r["q"], nt // 2, smooth[0], smooth[1])
            rows.append((nt, repr(r["control"]), repr(r["terminal"]), repr(r["pq"]), repr(d)))
            ctrl.append(r["control"]); term.append(r["terminal"]); pq.append(r["pq"]); dre.append(d)
    ctx.table("zero_sigma_refinement", ("nt", "control_diff", "terminal_diff", "pq_error",
                                        "dual_re_residual"), rows)
    with ctx.timed("reference"):
        r = _q_route(ctx, base, quad, probes)
        q = r["q"]
        pq_end = zero_sigma.pq_identity_check(q, base, base.nt, probes)
    ctx.check("q_vs_lq_control", r["control"], 5e-3)
    ctx.check("q_vs_lq_terminal", r["terminal"], 5e-3)
    ctx.check("pq_identity", r["pq"], 5e-3)
    ctx.check("pq_terminal", pq_end, 1e-14)
    if len(ctrl) > 1:
        ctx.check("q_vs_lq_order", _order(ctrl, cfg["study.nt_list"]), 1.8, lower=True, gated=quad == "trapezoid")
        ratios = [a / b for a, b in zip(dre, dre[1:])]
        ctx.report.results["dual_re_ratios"] = ratios
        ctx.check("dual_re_ratio_min", min(ratios), 3.0, lower=True)
        ctx.check("dual_re_ratio_max", max(ratios), 5.0)
    with ctx.timed("spectra"):
        lam_p = lq.coercivity_estimate(base, 0, seed=ctx.seed)["lambda_min"]
        lam_q = float(zero_sigma.q_spectrum(q, 0, seed=ctx.seed)[-1])
    ctx.report.results.update({"lambda_min_P": lam_p, "lambda_max_Q": lam_q})
    ctx.check("lambda_min_P", lam_p, 0.5, lower=True)
    ctx.check("coercivity_cross_check", lam_p - 1.0 / lam_q, -1e-3, lower=True)


def _run_admissibility(ctx: _Ctx):
    cfg = ctx.cfg
    grids = cfg["study.grids"] or [cfg["grid.nx"]]
    rows, maxima = [], []
    with ctx.timed("admissibility"):
        for n in grids:
            ops = assemble_system(n, n, _materials(cfg, StateLayout(n, n)), kappa=cfg["grid.kappa"])
            prop = Propagator(ops, TimeGrid(cfg["time.T"], cfg["time.nt"]))
            r = admissibility_ratio(prop, cfg["study.samples"], seed=ctx.seed,
                                    power_steps=cfg["study.power_steps"])
            rows.append((n, repr(r["max_ratio"])))
            maxima.append(r["max_ratio"])
    ctx.table("admissibility", ("n", "max_ratio"), rows)
    spread = max(maxima) / min(maxima)
    ctx.report.results["max_ratio"] = maxima
    ctx.check("admissibility_finite", float(all(map(math.isfinite, maxima))), 1.0, lower=True)
    ctx.check("admissibility_spread", spread, 10.0)
    ctx.check("admissibility_trend", spread, 4.0, gated=False)


def _run_oracle_compare(ctx: _Ctx):
    prob, y0, cfg = ctx.prob, ctx.y0, ctx.cfg
    with ctx.timed("matrix_free"):
        sol = lq.solve_open_loop(prob, y0)
    with ctx.timed("dense_open_loop"):
        g_dense, cost_dense, _ = approx.dense_openloop_oracle(prob, y0)
    grid = prob.prop.grid
    g_norm = norm_u_traj(g_dense, ctx.ip, grid)
    rel_g = norm_u_traj(sol.g_hat - g_dense, ctx.ip, grid) / g_norm if g_norm else 0.0
    ctx.report.results.update({"cost_matrix_free": sol.cost, "cost_dense": cost_dense})
    ctx.check("oracle_control", rel_g, 1e-7)
    ctx.check("oracle_cost_gap", cost_dense - sol.cost, 1e-10)
    _norm_series(ctx, sol)
    # the Riccati ODE route converges in dt, so compare on a refinement
    nts, gaps, rows = cfg["study.dre_nt_list"], [], []
    with ctx.timed("dense_dre"):
        for nt in nts:
            p = lq.LqProblem(Propagator(ctx.ops, TimeGrid(cfg["time.T"], nt)), alpha=prob.alpha,
                             terminal_weight=prob.terminal_weight, cg_tol=prob.cg_tol)
            j = lq.solve_open_loop(p, y0).cost
            j_dre = approx.dense_dre_oracle(p, y0)["cost"]
            gaps.append(_rel(j_dre, j))
            rows.append((nt, repr(j), repr(j_dre), repr(gaps[-1])))
    ctx.table("dre_refinement", ("nt", "cost_matrix_free", "cost_dre", "relative_gap"), rows)
    ctx.check("dre_cost", gaps[0], 3e-3)
    ctx.check("dre_cost_final", gaps[-1], 1e-3)
    ctx.check("dre_order", _order(gaps, nts) if len(gaps) > 1 else float("nan"), 1.8,
              lower=True, gated=len(gaps) > 1)


_PIPELINES = {"solve": _run_solve, "feedback": _run_feedback, "transition": _run_transition,
              "approx": _run_approx, "zero-sigma": _run_zero_sigma,
              "admissibility": _run_admissibility, "oracle-compare": _run_oracle_compare}

CHECK_NAMES = {
    "solve": {"cost_identity", "cg_relative_residual", "optimality_gap"},
    "feedback": {"feedback_cheap", "feedback_independent"},
    "transition": {"transition_state", "transition_control"},
    "approx": {"approx_monotone_columns", "approx_control_final", "approx_riccati_final",
               "approx_riccati_final_interior", "approx_state_final", "approx_cost_final"},
    "zero-sigma": {"q_vs_lq_control", "q_vs_lq_terminal", "pq_identity", "pq_terminal",
                   "q_vs_lq_order", "dual_re_ratio_min", "dual_re_ratio_max", "lambda_min_P",
                   "coercivity_cross_check"},
    "admissibility": {"admissibility_finite", "admissibility_spread", "admissibility_trend"},
    "oracle-compare": {"oracle_control", "oracle_cost_gap", "dre_cost", "dre_cost_final",
                       "dre_order"},
}


def validate_for(cfg: ExperimentConfig, subcommand: str):
    """Subcommand-specific requirements, raised as :class:`ConfigError`."""
    if subcommand not in _PIPELINES:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    unknown = sorted(set(cfg.checks) - CHECK_NAMES[subcommand])
    if unknown:
        raise ConfigError(f"not a check of '{subcommand}'", f"checks.{unknown[0]}")
    if subcommand == "zero-sigma":
        if cfg["materials.sigma"] != 0:
            raise ConfigError("zero-sigma needs a lossless medium (sigma = 0)", "materials.sigma")
        if cfg["problem.terminal_weight"] != "identity":
            raise ConfigError("zero-sigma uses the identity terminal weight",
                              "problem.terminal_weight")
        if cfg["problem.s_index"] != 0:
            raise ConfigError("zero-sigma starts at t = 0", "problem.s_index")
    if subcommand == "oracle-compare":
        layout = StateLayout(cfg["grid.nx"], cfg["grid.ny"])
        n_gamma = 2 * (layout.nx + layout.ny)
        if layout.size > 2000:
            raise ConfigError(f"dense oracles need at most 2000 states, got {layout.size}", "grid.nx")
        if (cfg["time.nt"] - cfg["problem.s_index"]) * n_gamma > 5000:
            raise ConfigError("dense oracles need at most 5000 control unknowns", "time.nt")


def _threads() -> int:
    raw = os.environ.get("MXLQR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MXLQR_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"MXLQR_THREADS must be a positive integer, got {raw!r}")
    return n


def run(cfg: ExperimentConfig, subcommand: str, seed: int | None = None) -> RunReport:
    """Run one pipeline. Solver failures are recorded in ``report.error``."""
    validate_for(cfg, subcommand)
    seed = cfg["initial_state.seed"] if seed is None else int(seed)
    report = RunReport(subcommand, cfg.to_dict(), seed)
    t0 = time.perf_counter()
    try:
        _PIPELINES[subcommand](_Ctx(cfg, seed, report))
    except (CGConvergenceError, IndefiniteOperatorError, np.linalg.LinAlgError,
            ArithmeticError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    report.timings["total"] = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_outputs(report: RunReport, out_dir, formats=("json", "csv")) -> list:
    out_dir = Path(out_dir)
    written = []
    if "csv" in formats:
        for name, (header, rows) in sorted(report.tables.items()):
            _atomic_write(out_dir / f"{name}.csv", table_csv(header, rows))
            written.append(out_dir / f"{name}.csv")
    if "json" in formats:
        for name, text in sorted(report.extra_json.items()):
            _atomic_write(out_dir / f"{name}.json", text)
            written.append(out_dir / f"{name}.json")
    # the report itself is always written
    _atomic_write(out_dir / "report.json", report.to_json())
    written.append(out_dir / "report.json")
    return written


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mxlqr", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="dotted key = value file or JSON")
    parser.add_argument("--out", help="output directory (default: output.dir)")
    parser.add_argument("--seed", type=_u64, help="overrides initial_state.seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        validate_for(cfg, args.subcommand)
        _threads()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run(cfg, args.subcommand, args.seed)
    out = Path(args.out or cfg["output.dir"])
    write_outputs(report, out, cfg["output.formats"])
    for c in report.checks:
        log.info("%s %s = %.3e (tol %.1e)", c.status, c.name, c.value, c.tolerance)
    print(f"{args.subcommand}: {report._status()} ({out / 'report.json'})")
    if report.error is not None:
        print(report.error, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_PASS if report.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
