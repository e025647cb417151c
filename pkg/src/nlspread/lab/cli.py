"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 inapplicable experiment.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

from ..eigen import EigenProblem, principal_eigenvalue
from ..errors import ConfigError, ConvergenceError, PreconditionError
from ..fbsolver import classify_outcome, simulate
from ..kernel import Kernel, kernel_from_config
from ..reaction import Reaction
from ..semiwave import DriftMode, SemiWaveProblem, select_speed_detailed, speed_triple
from . import experiments as ex
from .config import LabConfig, c_tilde_json, parse_config
from .io import OutputError, jsonable, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 2, 3, 4

log = logging.getLogger("nlspread")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_kernel(text: str) -> Kernel:
    """Kernel from ``name:key=value,...`` (e.g. ``gaussian:sigma=1``, ``power2``) or JSON.

    Nested kernels such as ``cutoff`` need the JSON form
    ``{"type": "cutoff", "params": {"base": {...}, "radius": 5}}``.
    """
    text = text.strip()
    try:
        if text.startswith("{"):
            return kernel_from_config(json.loads(text))
        name, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"bad kernel parameter {item!r}")
            params[key.strip()] = float(val)
        return kernel_from_config({"type": name.strip(), "params": params})
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--kernel: {exc}") from None


def _reaction_from_eps(eps: float) -> Reaction:
    # positive eps raises the carrying capacity, negative lowers it
    if eps == 0:
        return Reaction.logistic()
    return Reaction.upper(eps) if eps > 0 else Reaction.lower(-eps)


def build_parser() -> argparse.ArgumentParser:
    def globals_(default):
        # subcommands repeat the global flags; SUPPRESS keeps them from resetting values given earlier
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", type=Path, default=default, help="JSON configuration file")
        g.add_argument("--out", type=Path, default=default, help="output directory (overrides the config)")
        g.add_argument("--quiet", action="store_true", default=default if default is argparse.SUPPRESS else False,
                       help="suppress stdout and logging")
        return g

    common = globals_(argparse.SUPPRESS)
    p = _Parser(prog="nlspread", description="Nonlocal free-boundary spreading laboratory", parents=[globals_(None)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="run one simulation")

    e = sub.add_parser("eigen", parents=[common], help="principal eigenvalue on [-h, h]")
    e.add_argument("--d", type=float)
    e.add_argument("--a0", type=float)
    e.add_argument("--nu", type=float)
    e.add_argument("--h", type=float)
    e.add_argument("--kernel", type=str)
    e.add_argument("--nodes", type=int)

    c = sub.add_parser("critical-length", parents=[common], help="critical half-length h*")
    c.add_argument("--d", type=float)
    c.add_argument("--f0", type=float)
    c.add_argument("--nu", type=float)
    c.add_argument("--kernel", type=str)
    c.add_argument("--tol", type=float)

    s = sub.add_parser("semiwave", parents=[common], help="select one semi-wave speed")
    s.add_argument("--mode", choices=["right", "neutral", "left"])
    s.add_argument("--d", type=float)
    s.add_argument("--nu", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--kernel", type=str)
    s.add_argument("--eps-reaction", type=float, default=None, dest="eps_reaction")
    s.add_argument("--L", type=float, dest="L")
    s.add_argument("--nodes", type=int)

    sp = sub.add_parser("speeds", parents=[common], help="speed triple c_l*, c*, c_r*")
    sp.add_argument("--d", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--mu", type=float)
    sp.add_argument("--kernel", type=str)

    ds = sub.add_parser("dichotomy-scan", parents=[common], help="bracket mu* by bisection")
    ds.add_argument("--mu-lo", type=float, dest="mu_lo")
    ds.add_argument("--mu-hi", type=float, dest="mu_hi")
    ds.add_argument("--tol-rel", type=float, dest="tol_rel")

    ac = sub.add_parser("accel-check", parents=[common], help="accelerated spreading check")
    ac.add_argument("--checkpoints", type=float, nargs="+")
    ac.add_argument("--radii", type=float, nargs="+")

    vb = sub.add_parser("vanishing-bound", parents=[common], help="explicit vanishing level mu~*")
    vb.add_argument("--h-tilde", type=float, dest="h_tilde")
    return p


def _need(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag}: required (pass it or give --config)")
    return value


def _pick(args, name: str, lab: LabConfig | None, default=None, source=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    if lab is not None:
        if source is not None:
            return source(lab)
        if hasattr(lab.solver, name):
            return getattr(lab.solver, name)
    return default


_KIND = {
    "simulate": "simulate",
    "eigen": "eigen",
    "critical-length": "critical_length",
    "semiwave": "semiwave",
    "speeds": "speeds",
    "dichotomy-scan": "dichotomy_scan",
    "accel-check": "acceleration_check",
    "vanishing-bound": "vanishing_bound",
}


def _params(lab: LabConfig | None, command: str) -> dict:
    if lab is None:
        return {}
    kind = _KIND[command]
    if lab.experiment.type == kind:
        return dict(lab.experiment.params)
    if lab.experiment.type != "simulate":
        raise ConfigError(f"experiment.type: config describes {lab.experiment.type!r}, not {kind!r}")
    return {}


def run(args) -> tuple[dict, ex.RunSummary, object, bool]:
    lab = parse_config(args.config) if args.config else None
    if lab:
        for msg in lab.warnings:
            log.warning(msg)
    params = _params(lab, args.command)
    summary = ex.RunSummary()
    traj = None
    cmd = args.command
    kernel = parse_kernel(args.kernel) if getattr(args, "kernel", None) else (lab.solver.kernel if lab else None)

    if cmd in ("simulate", "dichotomy-scan", "accel-check", "vanishing-bound"):
        if lab is None:
            raise ConfigError("--config: required for this command")
        cfg, profile = lab.solver, lab.profile

    if cmd == "simulate":
        traj = simulate(cfg, profile)
        out = classify_outcome(traj, cfg)
        summary.outcome = out.value
        try:
            summary.h_slope, summary.g_slope = ex.measure_speeds(traj, params.get("window_fraction", 0.5))
        except PreconditionError:
            pass
        result = {
            "outcome": out.value,
            "t_end": float(traj.t[-1]),
            "g": float(traj.g[-1]),
            "h": float(traj.h[-1]),
            "h_slope": summary.h_slope,
            "g_slope": summary.g_slope,
            "steps": traj.diagnostics.steps,
            "clamps": traj.diagnostics.clamps,
        }
    elif cmd == "eigen":
        d = _need(_pick(args, "d", lab), "--d")
        nu = _need(_pick(args, "nu", lab), "--nu")
        a0 = _pick(args, "a0", None, default=params.get("a0"))
        if a0 is None:
            a0 = lab.solver.reaction.f_prime_zero if lab else None
        h = _need(_pick(args, "h", None, default=params.get("h")), "--h")
        m = _pick(args, "nodes", None, default=params.get("nodes"))
        res = principal_eigenvalue(EigenProblem(d, _need(a0, "--a0"), nu, h, _need(kernel, "--kernel"), m))
        summary.lambda_p = res.lambda_p
        result = {"lambda_p": res.lambda_p, "residual": res.residual, "iterations": res.iterations}
    elif cmd == "critical-length":
        from ..eigen import critical_length

        d = _need(_pick(args, "d", lab), "--d")
        nu = _need(_pick(args, "nu", lab), "--nu")
        f0 = args.f0 if args.f0 is not None else (lab.solver.reaction.f_prime_zero if lab else None)
        tol = args.tol if args.tol is not None else params.get("tol", 1e-6)
        k = _need(kernel, "--kernel")
        hs = critical_length(d, _need(f0, "--f0"), nu, k, tol)
        lam = principal_eigenvalue(EigenProblem(d, f0, nu, hs, k, max(512, EigenProblem(d, f0, nu, hs, k).m))).lambda_p
        summary.h_star = hs
        result = {"h_star": hs, "lambda_at_h_star": lam}
    elif cmd == "semiwave":
        d = _need(_pick(args, "d", lab), "--d")
        nu = _need(_pick(args, "nu", lab), "--nu")
        mu = _need(_pick(args, "mu", lab), "--mu")
        mode = args.mode or params.get("mode", "right")
        if args.eps_reaction is not None:
            reaction = _reaction_from_eps(args.eps_reaction)
        else:
            reaction = lab.solver.reaction if lab else Reaction.logistic()
        L = args.L if args.L is not None else params.get("L")
        m = args.nodes if args.nodes is not None else params.get("nodes")
        prob = SemiWaveProblem(d, nu, mu, _need(kernel, "--kernel"), reaction, DriftMode(mode), L, m)
        sel = select_speed_detailed(prob)
        result = {"c": sel.c, "residual": sel.theta, "M_of_c": sel.profile.flux, "L": prob.L, "nodes": prob.m}
        key = {"right": "c_r", "neutral": "c_star", "left": "c_l"}[mode]
        setattr(summary, key, sel.c)
    elif cmd == "speeds":
        d = _need(_pick(args, "d", lab), "--d")
        nu = _need(_pick(args, "nu", lab), "--nu")
        mu = _need(_pick(args, "mu", lab), "--mu")
        reaction = lab.solver.reaction if lab else Reaction.logistic()
        tr = speed_triple(d, nu, mu, _need(kernel, "--kernel"), reaction, params.get("L"), params.get("nodes"))
        summary.c_l, summary.c_star, summary.c_r = tr.c_l_star, tr.c_star, tr.c_r_star
        summary.c_tilde = c_tilde_json(tr.c_tilde)
        result = {
            "c_l_star": tr.c_l_star,
            "c_star": tr.c_star,
            "c_r_star": tr.c_r_star,
            "c_tilde": c_tilde_json(tr.c_tilde),
            "c_tilde_method": tr.c_tilde_method,
            "diagnostics": tr.diagnostics,
        }
    elif cmd == "dichotomy-scan":
        mu_lo = _need(args.mu_lo if args.mu_lo is not None else params.get("mu_lo"), "--mu-lo")
        mu_hi = _need(args.mu_hi if args.mu_hi is not None else params.get("mu_hi"), "--mu-hi")
        tol_rel = args.tol_rel if args.tol_rel is not None else params.get("tol_rel", 0.05)
        if not mu_lo < mu_hi:
            raise ConfigError("--mu-lo: must be < --mu-hi")
        res = ex.dichotomy_scan(cfg, mu_lo, mu_hi, tol_rel, profile)
        summary.mu_star_bracket = list(res.bracket)
        summary.h_star = res.h_star
        result = {
            "bracket": list(res.bracket),
            "relative_width": res.relative_width,
            "h_star": res.h_star,
            "history": [{"mu": r.mu, "outcome": r.outcome.value, "t_end": r.t_end} for r in res.history],
        }
    elif cmd == "accel-check":
        cps = args.checkpoints or params.get("checkpoints", [20.0, 40.0])
        radii = args.radii or params.get("radii", [5.0, 10.0, 20.0])
        rep = ex.acceleration_check(cfg, cps, radii, profile=profile)
        summary.outcome = rep.outcome
        result = asdict(rep)
    else:  # vanishing-bound
        h_tilde = args.h_tilde if args.h_tilde is not None else params.get("h_tilde")
        vb = ex.vanishing_mu_bound(cfg, h_tilde, profile)
        summary.outcome = vb.confirmation.value if vb.confirmation else None
        summary.lambda_p = vb.lambda_p
        result = {
            "mu_tilde_star": vb.mu_tilde,
            "h_tilde": vb.h_tilde,
            "lambda_p": vb.lambda_p,
            "gamma": vb.gamma,
            "confirmation": vb.confirmation.value if vb.confirmation else None,
        }
    if lab is not None and not args.out:
        args.out = lab.output_dir
    return result, summary, traj, (lab.record_timing if lab else True)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore" if args.quiet else "default")
            result, summary, traj, timing = run(args)
        summary.wall_time = time.perf_counter() - t0 if timing else None
        if args.out:
            write_outputs(summary, traj, args.out)
        if not args.quiet:
            print(json.dumps(jsonable(result), indent=2))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PreconditionError as exc:
        print(f"inapplicable: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
