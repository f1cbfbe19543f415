"""Batch front end: ``dualvar run|verify|sweep <config>``.

Exit codes: 0 on success (convergence, all checks passing), 2 when the
iteration budget runs out or the line search stalls before the gradient
tolerance, 1 on any error.

Randomness comes from ``numpy.random.SeedSequence(seed, spawn_key=(k,))``
with ``seed`` from ``[optimizer]`` (default 42) and a fixed stream key
``k`` per purpose (see ``STREAMS``), so reruns are bit-identical.
"""

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import INITIAL_DERIVATIVES, ConfigError, load_config
from .errors import AscentAborted, DualvarError, SingularL
from .grid import Field, apply_diff, fd_gradient_check, write_field_csv
from .legendre import check_legendre_identities, quadratic_potential
from .optimizer import solve
from .problems import (ConservationLawProblem, HeatProblem, HJProblem, NSDualProblem,
                       NSMixedProblem)
from .verify import (burgers_characteristics_oracle, classical_fd_oracle, compare_fields,
                     heat_exact_oracle)

logger = logging.getLogger("dualvar")

STREAMS = {"init": 0, "legendre": 1, "states": 2, "probes": 3}
TRACE_HEADER = ["iter", "objective", "grad_norm", "primal_residual"]
VERIFY_HEADER = ["check_name", "value", "threshold", "pass"]
SUMMARY_HEADER = ["param", "converged", "final_objective", "final_residual", "error_vs_oracle"]


def rng_for(cfg, stream):
    seq = np.random.SeedSequence(cfg.optimizer["seed"], spawn_key=(STREAMS[stream],))
    return np.random.default_rng(seq)


def _fmt(v):
    return format(float(v), ".17g")


# -- problem wiring ----------------------------------------------------------------

def build_problem(cfg):
    """Problem instance for the configured family."""
    grid = cfg.make_grid()
    pr = cfg.problem
    _, u0 = cfg.initial()
    margin = pr["margin"]
    fam = cfg.family
    if fam == "heat":
        return HeatProblem(grid, pr["k"], u0, H=cfg.potential_spec(),
                           margin=margin or 0.0)
    if fam == "burgers":
        kw = {} if margin is None else {"margin": margin}
        return ConservationLawProblem.burgers(grid, u0, c=pr["c"], **kw)
    scale = cfg.potential["scale"]
    if fam == "hj":
        return HJProblem.viscous(grid, pr["nu_hat"], u0, H=quadratic_potential(3, scale),
                                 margin=margin or 0.0)
    if fam == "ns-dual":
        return NSDualProblem(grid, pr["nu_hat"], pr["rho0"], pr["c"],
                             G=quadratic_potential(1, scale, name="G"), v0=u0,
                             margin=margin or 0.0)
    return NSMixedProblem(grid, pr["nu_hat"], pr["rho0"], pr["c"],
                          R=quadratic_potential(3, scale, name="R"), sign=pr["sign"],
                          v0=u0, margin=margin or 0.0)


def primal_fields(problem, x):
    """Recovered physical fields, keyed by snapshot name."""
    f = problem.unpack(x)
    if isinstance(problem, HeatProblem):
        return {"theta": problem.recover_primal(f["lam"])}
    if isinstance(problem, ConservationLawProblem):
        return {"u": problem.recover_primal(f["lam"])}
    if isinstance(problem, HJProblem):
        u, B, C = problem.recover_primal(f["lam"], f["gamma"], f["rho"])
        return {"u": u, "B": B, "C": C}
    v, P = problem.recover_velocity_pressure(*(f[n] for n in problem.names))
    return {"v": v, "pressure": P}


def oracle_error(cfg, problem, fields):
    """Relative l2 error of the recovered field against the family's oracle, or nan."""
    grid = problem.grid
    name, u0 = cfg.initial()
    try:
        if cfg.family == "heat":
            if name == "sin_pi" and not grid.periodic and (grid.x_min, grid.x_max) == (0, 1):
                ref = heat_exact_oracle(cfg.problem["k"], 1, grid)
            else:
                ref = classical_fd_oracle("heat", grid, u0, k=cfg.problem["k"])
            return compare_fields(fields["theta"], ref).l2_rel
        if cfg.family == "burgers":
            ref = burgers_characteristics_oracle(u0, grid, u0_prime=INITIAL_DERIVATIVES.get(name))
            return compare_fields(fields["u"], ref).l2_rel
        if cfg.family == "hj":
            ref = classical_fd_oracle("viscous-hj", grid, u0, nu_hat=cfg.problem["nu_hat"])
            return compare_fields(fields["u"], ref).l2_rel
    except DualvarError as exc:
        logger.warning("no oracle comparison: %s", exc)
    return float("nan")


# -- run ---------------------------------------------------------------------------

@dataclass
class RunResult:
    exit_code: int
    converged: bool = False
    final_objective: float = float("nan")
    final_residual: float = float("nan")
    error_vs_oracle: float = float("nan")
    message: str = ""


def write_trace(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for i, (S, g, r) in enumerate(zip(report.objective_trace, report.grad_norm_trace,
                                          report.residual_trace)):
            w.writerow([i, _fmt(S), _fmt(g), _fmt(r)])


def _write_snapshots(out, fields, suffix):
    for name, fld in fields.items():
        write_field_csv(out / f"{name}_{suffix}.csv", fld)


def execute_run(cfg, out):
    """Ascend the configured problem and write outputs into ``out``."""
    out = Path(out)
    if cfg.family == "ns-mixed":
        return RunResult(1, message="ns-mixed is a saddle-point functional; "
                                    "only `dualvar verify` is supported for it")
    try:
        problem = build_problem(cfg)
        acfg = cfg.ascent_config()
    except DualvarError as exc:
        return RunResult(1, message=str(exc))
    out.mkdir(parents=True, exist_ok=True)
    if cfg.optimizer["init"] == "random":
        x0 = problem.random_state(rng_for(cfg, "init"), cfg.optimizer["init_scale"])
    else:
        x0 = problem.zero_state()
    every = cfg.output["snapshot_every"]
    snap = out / "snapshots"
    if every > 0:
        snap.mkdir(exist_ok=True)

    def snapshot(it, x):
        if it % every == 0:
            _write_snapshots(snap, primal_fields(problem, x), f"{it:06d}")

    try:
        report = solve(problem, acfg, init=x0, callback=snapshot if every > 0 else None)
    except AscentAborted as exc:
        if exc.report is not None and exc.report.objective_trace:
            write_trace(out / "trace.csv", exc.report)
        return RunResult(1, message=str(exc))
    except DualvarError as exc:
        return RunResult(1, message=str(exc))
    write_trace(out / "trace.csv", report)
    fields = primal_fields(problem, report.x)
    _write_snapshots(out, fields, "final")
    for name, fld in report.final_fields.items():
        write_field_csv(out / f"{'lambda' if name == 'lam' else name}_final.csv", fld)
    err = oracle_error(cfg, problem, fields)
    code = 0 if report.converged else 2
    return RunResult(code, report.converged, report.objective_trace[-1],
                     report.residual_trace[-1], err,
                     f"{report.message} after {report.iterations} iterations")


# -- verify --------------------------------------------------------------------------

def _legendre_probes(cfg, problem, n, rng):
    fam = cfg.family
    spec = problem.spec
    P = rng.uniform(-1.0, 1.0, (n, spec.dim_U))
    if fam == "heat":
        P *= 2.0
    if spec.dim_L == 0:
        return spec, P, np.zeros((n, 0))
    if fam == "burgers":
        half = min(1.0, 0.5 * problem.c)
        L = rng.uniform(-half, half, (n, 1))
    else:
        L = rng.uniform(-0.5, 0.5, (n, spec.dim_L))
    return spec, P, L


def _default_state_scale(cfg):
    # small states keep the roundoff of single-node probes (~eps |S| / h) well
    # below the threshold; heat rows are amplified by 1/dt + k/dx^2
    return {"heat": 0.01, "burgers": 0.01, "hj": 0.05}.get(cfg.family, 0.02)


def _default_h(cfg):
    # quartic heat is truncation-limited at 1e-5; the mixed functional has
    # gradient entries ~1e-5 of its sup norm that are roundoff-limited there
    if cfg.family == "heat" and cfg.potential["kind"] == "quartic":
        return 1e-6
    return 1e-4 if cfg.family == "ns-mixed" else 1e-5


def dispersion_error(problem, a_max=4, b_max=2, margin=4):
    """Largest interior mismatch between the discrete E-L operator and
    ``(lam_tt - k^2 lam_xxxx) / s`` on monomials ``x^a t^b``.

    Requires ``H = s theta^2 / 2``. Errors are relative to the largest
    reference value over all monomials.
    """
    g, k = problem.grid, problem.k
    s = float(problem.H.hessian(np.zeros((1, 1)))[0, 0, 0])
    T, X = g.mesh()
    mask = g.interior_mask(margin)
    worst, scale = 0.0, 0.0
    for a in range(a_max + 1):
        for b in range(b_max + 1):
            lam = X**a * T**b
            tt = b * (b - 1) * X**a * T ** max(b - 2, 0) if b >= 2 else 0 * X
            xxxx = (a * (a - 1) * (a - 2) * (a - 3) * X ** max(a - 4, 0) * T**b
                    if a >= 4 else 0 * X)
            ref = (tt - k**2 * xxxx) / s
            got = problem.el_operator(lam)[0]
            worst = max(worst, float(np.max(np.abs(got - ref)[mask])))
            scale = max(scale, float(np.max(np.abs(ref)[mask])))
    return worst / max(scale, 1e-300)


def structural_checks(problem, state):
    """Nodewise identities of the Navier-Stokes functionals at ``state``.

    Returns ``[(name, value, threshold), ...]``; values are maxima over
    interior nodes relative to the scale of the compared quantities.
    """
    g = problem.grid
    f = problem.unpack(state)
    arrs = problem._arrays([f[n] for n in problem.names])
    lam = arrs["lam"]
    Lf, Kf, _ = problem.assemble_LK(lam)
    Lm = Lf.values.reshape(g.shape + (2, 2))
    Km = Kf.values.reshape(g.shape + (2, 2))
    rows = [("LK_identity", float(np.max(np.abs(Lm @ Km - np.eye(2)))), 1e-12)]
    if isinstance(problem, NSDualProblem):
        p, _ = problem.p_field(lam, arrs["gamma"][..., 0])
    else:
        p = problem.p_field(arrs["A"], arrs["gamma"][..., 0], lam)
    v, _ = problem.recover_velocity_pressure(*(f[n] for n in problem.names))
    Lv = np.einsum("...ij,...j->...i", Lm, v.values)
    rows.append(("vp_identity", float(np.max(np.abs(Lv - p)) / max(np.max(np.abs(p)), 1e-300)),
                 1e-12))
    _, grads = problem.evaluate(*(f[n] for n in problem.names))
    gmap = dict(zip(problem.names, grads))
    w = g.weights
    mask = g.interior_mask(2)
    div_v = apply_diff(v, "div", closure="sbp")[0]
    gg = gmap["gamma"][0] / w
    rows.append(("gamma_gradient_divergence",
                 float(np.max(np.abs(gg - div_v)[mask]) / max(np.max(np.abs(div_v)[mask]), 1e-300)),
                 1e-12))
    if "omega" in gmap:
        div_l = apply_diff(Field(g, lam), "div", closure="sbp")[0]
        go = gmap["omega"][0] / w
        rows.append(("omega_gradient_divergence",
                     float(np.max(np.abs(go - div_l)[mask]) / max(np.max(np.abs(div_l)[mask]), 1e-300)),
                     1e-12))
    return rows


def constructed_singular(problem):
    """True if ``lam = (-c x / 2, 0)``, which makes ``L_11 = 0``, raises SingularL."""
    T, X, Y = problem.grid.mesh()
    lam = np.stack([-0.5 * problem.c * X, 0 * Y], axis=-1)
    try:
        problem.assemble_LK(lam)
    except SingularL:
        return True
    return False


def verify_rows(cfg):
    """Run the family's property suite; returns ``[(name, value, threshold, passed)]``."""
    vc = cfg.verify
    problem = build_problem(cfg)
    rows = []

    # Legendre identities at random (P, L)
    spec, P, L = _legendre_probes(cfg, problem, vc["legendre_probes"], rng_for(cfg, "legendre"))
    reps = [check_legendre_identities(spec, P[i], L[i], h=vc["legendre_h"],
                                      threshold=vc["legendre_threshold"])
            for i in range(len(P))]
    if reps:
        dP = max(r.dP_rel_error for r in reps)
        dL = max(r.dL_rel_error for r in reps)
        gap = max(r.fenchel_gap for r in reps)
        eig = min(r.eigmin for r in reps)
        thr = vc["legendre_threshold"]
        rows += [("legendre_dP", dP, thr, dP <= thr), ("legendre_dL", dL, thr, dL <= thr),
                 ("fenchel_gap", gap, 1e-10, gap <= 1e-10),
                 ("legendre_monotone", eig, 0.0, eig > 0)]

    # first-variation checks at random states
    scale = vc["state_scale"] if vc["state_scale"] is not None else _default_state_scale(cfg)
    h = _default_h(cfg) if vc["h"] is None else vc["h"]
    states_rng = rng_for(cfg, "states")
    probes_rng = rng_for(cfg, "probes")
    states = [problem.random_state(states_rng, scale) for _ in range(vc["n_states"])]
    factor = 1.01 if vc["corrupt_gradient"] else 1.0
    is_ns = isinstance(problem, (NSDualProblem, NSMixedProblem))

    def objective(x):
        return problem.flat_objective(x)[0]

    def gradient(x):
        return factor * problem.flat_objective(x)[1]

    if is_ns:
        # L must stay on the positive-definite branch of c I, where the
        # kinetic term is concave; report the smallest det L / c^2 (signed)
        c2 = problem.c ** 2
        det_min = np.inf
        for x in states:
            lam = problem.unpack(x)["lam"].values
            try:
                det_min = min(det_min, float(np.min(problem.assemble_LK(lam)[2][0])) / c2)
            except SingularL:
                det_min = min(det_min, 0.0)
        thr = problem.det_tol / c2
        rows.append(("singular_L_constructed", float(constructed_singular(problem)), 1.0,
                     constructed_singular(problem)))
        if vc["expect_singular"]:
            rows.append(("singular_L_expected", det_min, thr, det_min <= thr))
            return rows
        rows.append(("L_positive_definite", det_min, thr, det_min > thr))
        if det_min <= thr:
            return rows
    elif vc["expect_singular"]:
        rows.append(("singular_L_expected", float("nan"), float("nan"), False))

    worst = 0.0
    try:
        for x in states:
            worst = max(worst, fd_gradient_check(objective, gradient, x, n_probe=vc["n_probe"],
                                                 h=h, rng=probes_rng,
                                                 candidates=problem.free_indices()))
    except DualvarError as exc:
        logger.error("gradient check aborted: %s", exc)
        worst = float("nan")
    thr = vc["gradient_threshold"]
    rows.append(("gradient_check", worst, thr, bool(worst <= thr)))

    if isinstance(problem, HeatProblem) and cfg.potential["kind"] == "quadratic":
        d = dispersion_error(problem)
        rows.append(("dispersion", d, 1e-10, d <= 1e-10))
    if is_ns:
        for name, value, t in structural_checks(problem, states[0]):
            rows.append((name, value, t, value <= t))
    return rows


def execute_verify(cfg, out):
    out = Path(out)
    try:
        rows = verify_rows(cfg)
    except DualvarError as exc:
        return RunResult(1, message=str(exc))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VERIFY_HEADER)
        for name, value, thr, ok in rows:
            w.writerow([name, _fmt(value), _fmt(thr), "true" if ok else "false"])
    failed = [r[0] for r in rows if not r[3]]
    msg = "all checks pass" if not failed else f"failed: {', '.join(failed)}"
    return RunResult(0 if not failed else 1, not failed, message=msg)


# -- sweep ---------------------------------------------------------------------------

def thread_cap(n):
    env = os.environ.get("DUALVAR_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            logger.warning("ignoring DUALVAR_THREADS=%r", env)
    return max(1, min(cap, n))


def execute_sweep(cfg, out, param, values):
    out = Path(out)
    if not values:
        return RunResult(1, message="sweep needs at least one value")
    try:
        cfgs = [cfg.with_value(param, v) for v in values]
    except ConfigError as exc:
        return RunResult(1, message=str(exc))
    out.mkdir(parents=True, exist_ok=True)
    dirs = [out / f"{param}={v}" for v in values]
    with ThreadPoolExecutor(thread_cap(len(values))) as pool:
        results = list(pool.map(execute_run, cfgs, dirs))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for v, r in zip(values, results):
            w.writerow([f"{param}={v}", "true" if r.converged else "false",
                        _fmt(r.final_objective), _fmt(r.final_residual),
                        _fmt(r.error_vs_oracle)])
    for v, r in zip(values, results):
        logger.info("%s=%s: %s", param, v, r.message)
    codes = {r.exit_code for r in results}
    code = 1 if 1 in codes else (2 if 2 in codes else 0)
    return RunResult(code, all(r.converged for r in results),
                     message=f"{len(values)} runs, exit codes {[r.exit_code for r in results]}")


# -- entry point -----------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="dualvar", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", help="output directory (overrides [output] directory)")
        if name == "sweep":
            p.add_argument("--param", required=True, help="key or section.key")
            p.add_argument("--values", required=True, help="comma-separated values")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out or cfg.output["directory"]
    if args.command == "run":
        res = execute_run(cfg, out)
    elif args.command == "verify":
        res = execute_verify(cfg, out)
    else:
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        res = execute_sweep(cfg, out, args.param, values)
    stream = sys.stderr if res.exit_code == 1 else sys.stdout
    print(("error: " if res.exit_code == 1 else "") + res.message, file=stream)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
