"""``refit`` command line: experiment scenarios, penalty landscapes, self-checks.

Exit codes: 0 success, 1 numerical failure (divergence, CG breakdown, failed
check), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imageio
from .linops import ConvergenceError, PeriodicConvolution
from .penalties import KINDS, landscape_rows, parse_kind
from .problems import (
    add_gaussian_noise,
    build_scene,
    deblur_lambda,
    make_problem,
    motion_blur_kernel,
    psnr,
)
from .solvers import (
    DivergenceError,
    DRParams,
    PDParams,
    Trace,
    dr_joint_solve,
    dr_solve,
    pd_joint_solve,
    pd_solve,
    posterior_refit,
)
from .verify import SUITES, run_suite

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "refit_out"
METRIC_COLUMNS = (
    "scenario",
    "penalty",
    "psnr_noisy",
    "psnr_biased",
    "psnr_refit",
    "fidelity_biased",
    "fidelity_refit",
    "support_size",
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    scene: str
    family: str
    sigma: float
    lam: float
    iters: int
    zeta: float = 0.0
    blur: bool = False


SCENARIOS = {
    "shapes128": Scenario("shapes128", "tv_gray", 50.0, 750.0, 4000),
    "cameraman": Scenario("cameraman_like", "tv_gray", 20.0, 36.0, 4000),
    "color_denoise": Scenario("color256", "tv_color", 20.0, deblur_lambda(20.0), 1000),
    "color_deblur": Scenario("color256", "tv_color", 2.0, deblur_lambda(2.0), 1000, blur=True),
    "elevation": Scenario("elevation", "tgv", 2.0, 15.0, 4000, zeta=0.45),
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _penalty_arg(value):
    if value.lower() == "all":
        return "all"
    try:
        return parse_kind(value).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    return _build_parsers()[0]


def _build_parsers():
    parser = argparse.ArgumentParser(
        prog="refit",
        description="l12 sparse-analysis regularization with support-preserving refitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment scenario")
    run.add_argument("--config", help="key=value file pre-loading any flag below (flags win)")
    run.add_argument("--scenario", choices=sorted(SCENARIOS), default="shapes128")
    run.add_argument("--penalty", type=_penalty_arg, default="SD",
                     help="HO, HD, QO, QD, SO, SD or 'all'")
    run.add_argument("--solver", choices=("pd", "dr"), default="pd")
    run.add_argument("--mode", choices=("joint", "posterior"), default="joint")
    run.add_argument("--lambda", dest="lam", type=float, help="regularization weight")
    run.add_argument("--sigma", type=float, help="noise standard deviation")
    run.add_argument("--zeta", type=float, help="TGV coupling (elevation scenario)")
    run.add_argument("--beta", type=float, help="support margin (default 1e-8 * lambda)")
    run.add_argument("--iters", type=int, help="iteration budget")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--tau", type=float, help="primal step (pd) or DR step")
    run.add_argument("--kappa", type=float, help="dual step (pd)")
    run.add_argument("--theta", type=float, default=1.0, help="over-relaxation (pd)")
    run.add_argument("--alpha", type=float, default=0.5, help="DR relaxation in (0, 2)")
    run.add_argument("--trace-every", type=int, default=1)
    run.add_argument("--out", help=f"output directory (default $REFIT_OUT or ./{DEFAULT_OUT})")

    land = sub.add_parser("landscape", help="sample a penalty on a polar grid around (1, 0)")
    land.add_argument("--penalty", type=_penalty_arg, default="SD")
    land.add_argument("--lambda", dest="lam", type=float, default=1.0)
    land.add_argument("--out", default="-", help="CSV path, '-' for stdout")

    ver = sub.add_parser("verify", help="run a self-check suite")
    ver.add_argument("suite", choices=sorted(SUITES) + ["all"])
    return parser, run


def read_config(path):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser, run_parser, argv):
    """Re-parse ``argv`` with defaults taken from the ``--config`` file."""
    first = parser.parse_args(argv)
    if first.command != "run" or not first.config:
        return first
    actions = {a.dest: a for a in run_parser._actions}
    aliases = {"lambda": "lam"}
    defaults = {}
    for key, raw in read_config(first.config).items():
        dest = aliases.get(key, key)
        action = actions.get(dest)
        if action is None or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        try:
            value = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[dest] = value
    run_parser.set_defaults(**defaults)
    return parser.parse_args(argv)


def resolve_run(args, env=None):
    """Fill scenario defaults and validate; raises :class:`UsageError`."""
    env = os.environ if env is None else env
    sc = SCENARIOS[args.scenario]
    cfg = argparse.Namespace(**vars(args))
    cfg.sigma = sc.sigma if args.sigma is None else args.sigma
    if args.lam is None:
        cfg.lam = deblur_lambda(cfg.sigma) if sc.family == "tv_color" else sc.lam
    cfg.zeta = sc.zeta if args.zeta is None else args.zeta
    cfg.iters = sc.iters if args.iters is None else args.iters
    cfg.out = args.out or env.get("REFIT_OUT") or DEFAULT_OUT
    checks = [
        (cfg.lam > 0, "--lambda must be positive"),
        (cfg.sigma >= 0, "--sigma must be non-negative"),
        (cfg.zeta >= 0, "--zeta must be non-negative"),
        (cfg.iters >= 1, "--iters must be >= 1"),
        (args.beta is None or args.beta > 0, "--beta must be positive"),
        (args.tau is None or args.tau > 0, "--tau must be positive"),
        (args.kappa is None or args.kappa > 0, "--kappa must be positive"),
        (0 <= args.theta <= 1, "--theta must lie in [0, 1]"),
        (0 < args.alpha < 2, "--alpha must lie in (0, 2)"),
        (args.trace_every >= 0, "--trace-every must be >= 0"),
        (all(map(math.isfinite, (cfg.lam, cfg.sigma, cfg.zeta))), "parameters must be finite"),
    ]
    for ok, message in checks:
        if not ok:
            raise UsageError(message)
    if args.solver == "pd":
        try:
            cfg.params = PDParams(tau=args.tau, kappa=args.kappa, theta=args.theta,
                                  beta=args.beta, iters=cfg.iters)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        cfg.params = DRParams(alpha=args.alpha, tau=args.tau if args.tau is not None else 0.01,
                              beta=args.beta, iters=cfg.iters)
    cfg.kinds = [k.value for k in KINDS] if args.penalty == "all" else [args.penalty]
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


def _save_image(out, stem, x):
    ext = ".ppm" if x.ndim == 3 else ".pgm"
    imageio.write_pnm(out / f"{stem}{ext}", x)
    imageio.write_raw(out / f"{stem}.raw", x)


def build_run_problem(cfg):
    sc = SCENARIOS[cfg.scenario]
    x_true = build_scene(sc.scene)
    forward = None
    clean = x_true
    if sc.blur:
        forward = PeriodicConvolution(motion_blur_kernel(10, 45.0), x_true.shape[:2])
        clean = forward.apply(x_true)
    y = add_gaussian_noise(clean, cfg.sigma, cfg.seed)
    problem = make_problem(sc.family, y, cfg.lam, forward=forward, zeta=cfg.zeta, x_true=x_true)
    return problem, x_true


def _solve_one(cfg, problem, kind):
    """Return ``(x_hat, x_tilde, support_size, trace)`` for one penalty."""
    every = cfg.trace_every
    if cfg.mode == "joint":
        solve = pd_joint_solve if cfg.solver == "pd" else dr_joint_solve
        res = solve(problem, kind, cfg.params, trace_every=every)
        return res.x_hat, res.x_tilde, int(res.support.sum()), res.trace
    trace = Trace()

    def record(k, x):
        if every and (k % every == 0 or k == cfg.params.iters - 1):
            trace.record(problem, k, x_biased=x)

    if cfg.solver == "pd":
        x_hat, _ = pd_solve(problem, cfg.params, callback=record)
        beta = cfg.params.resolve(problem.analysis.op_norm, problem.lam)[2]
    else:
        x_hat, _ = dr_solve(problem, cfg.params, callback=record)
        beta = cfg.params.resolve_beta(problem.lam)
    ref = posterior_refit(problem, kind, x_hat, beta, solver=cfg.solver, params=cfg.params,
                          trace_every=every)
    offset = cfg.params.iters
    trace.rows.extend((row[0] + offset,) + row[1:] for row in ref.trace.rows)
    return x_hat, ref.x, int(ref.support.sum()), trace


def cmd_run(cfg, stdout):
    problem, x_true = build_run_problem(cfg)
    if cfg.solver == "pd":
        try:
            cfg.params.resolve(problem.analysis.op_norm, problem.lam)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    noisy = problem.y
    _save_image(out, "y", noisy)
    psnr_noisy = psnr(x_true, noisy)
    rows = []
    for kind in cfg.kinds:
        x_hat, x_tilde, size, trace = _solve_one(cfg, problem, kind)
        img_hat, img_tilde = problem.extract(x_hat), problem.extract(x_tilde)
        if kind == cfg.kinds[0]:
            _save_image(out, "x_hat", img_hat)
        _save_image(out, f"x_tilde_{kind}", img_tilde)
        trace.write_csv(out / f"trace_{kind}.csv")
        row = (cfg.scenario, kind, psnr_noisy, psnr(x_true, img_hat), psnr(x_true, img_tilde),
               problem.fidelity(x_hat), problem.fidelity(x_tilde), size)
        rows.append(row)
        print(f"{kind}: psnr noisy {row[2]:.2f} biased {row[3]:.2f} refit {row[4]:.2f} "
              f"support {size}", file=stdout)
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow(row[:2] + tuple(_fmt(v) for v in row[2:]))
    return EXIT_OK


def cmd_landscape(args, stdout):
    kinds = [k.value for k in KINDS] if args.penalty == "all" else [args.penalty]
    if not args.lam > 0:
        raise UsageError("--lambda must be positive")
    fh = stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.writer(fh)
        writer.writerow(("penalty", "theta", "amplitude", "value"))
        for kind in kinds:
            for theta, amp, value in landscape_rows(kind, args.lam):
                writer.writerow((kind, _fmt(theta), _fmt(amp), _fmt(value)))
    finally:
        if fh is not stdout:
            fh.close()
    return EXIT_OK


def cmd_verify(args, stdout):
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = total = 0
    for name in names:
        for check in run_suite(name):
            total += 1
            failed += not check.passed
            print(check.line(), file=stdout)
    print(f"{total - failed} passed, {failed} failed", file=stdout)
    return EXIT_NUMERIC if failed else EXIT_OK


def main(argv=None, stdout=None, env=None):
    stdout = stdout or sys.stdout
    parser, run_parser = _build_parsers()
    try:
        args = _apply_config(parser, run_parser, argv)
        if args.command == "run":
            return cmd_run(resolve_run(args, env), stdout)
        if args.command == "landscape":
            return cmd_landscape(args, stdout)
        return cmd_verify(args, stdout)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"refit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, ConvergenceError) as exc:
        print(f"refit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:  # argparse: --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
