"""Command-line entry point.

Subcommands: ``run``, ``sweep``, ``race``, ``bound``, ``check``, ``opt-mu``,
``opt-k``, ``mu-vs-p``, ``plot``.  Every subcommand accepts ``--config FILE``
holding ``key = value`` lines (keys are the flag names without dashes);
explicit flags override file values, and unknown keys in a config file are
hard errors.  Commands that write files echo the fully resolved configuration
into the output directory as ``config.txt``.

Exit codes: 0 success, 1 argument error, 2 infeasibility, 3 divergence.
Traces written from the CLI zero the wallclock column so repeated invocations
produce identical files.  ``MAVG_OUT_DIR`` supplies a default ``--out``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import core, harness, svgplot, theory
from .errors import DivergenceError, InfeasibilityError
from .objectives import get_objective

ENV_OUT_DIR = "MAVG_OUT_DIR"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); the contract wants 1
        raise _UsageError(message)


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _csv_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _csv_strs(text: str) -> list[str]:
    return [tok for tok in text.split(",")]


# flag name -> (converter from config text, help)
_HYPER_FLAGS = {
    "objective": (str, "objective name from the registry"),
    "p": (int, "number of learners P"),
    "b": (int, "minibatch size B"),
    "k": (int, "local steps per meta iteration K"),
    "eta": (float, "step size"),
    "mu": (float, "block momentum in [0,1)"),
    "n": (int, "meta iterations N"),
    "seed": (int, "master seed"),
}
_BOUND_FLAGS = {
    "L": (float, "gradient Lipschitz constant"),
    "M": (float, "bound on the squared gradient norm"),
    "sigma2": (float, "per-sample gradient variance bound"),
    "deltaf": (float, "F at the start point minus the lower bound"),
    "delta": (float, "slack constant in (0,1); default: largest admissible"),
}

_SUBCOMMAND_FLAGS: dict[str, dict] = {
    "run": {**_HYPER_FLAGS, "workers": (int, ""), "out": (str, ""), "vectors": (bool, "")},
    "sweep": {
        **_HYPER_FLAGS, "workers": (int, ""), "out": (str, ""),
        "seeds": (_csv_ints, "comma-separated master seeds"),
        "threshold": (float, "loss threshold for hitting times"),
        "axis_p": (_csv_ints, ""), "axis_b": (_csv_ints, ""), "axis_k": (_csv_ints, ""),
        "axis_eta": (_csv_floats, ""), "axis_mu": (_csv_floats, ""),
    },
    "race": {
        **_HYPER_FLAGS, "workers": (int, ""), "out": (str, ""),
        "seeds": (_csv_ints, ""), "threshold": (float, ""),
        "mu_list": (_csv_floats, "momentum values to race; must include 0"),
    },
    "bound": {k: v for k, v in {**_HYPER_FLAGS, **_BOUND_FLAGS}.items()
              if k not in ("objective", "seed")},
    "check": {"eta": (float, ""), "mu": (float, ""), "k": (int, ""),
              "L": (float, ""), "delta": (float, "")},
    "opt-mu": {k: v for k, v in {**_HYPER_FLAGS, **_BOUND_FLAGS}.items()
               if k not in ("objective", "seed", "mu", "delta")},
    "opt-k": {**{k: v for k, v in {**_HYPER_FLAGS, **_BOUND_FLAGS}.items()
                 if k not in ("objective", "seed", "n", "k", "delta")},
              "s": (int, "fixed budget S = N*K")},
    "mu-vs-p": {**{k: v for k, v in {**_HYPER_FLAGS, **_BOUND_FLAGS}.items()
                   if k not in ("objective", "seed", "n", "p", "mu", "delta")},
                "s_total": (int, "fixed budget S = N*P*B*K"),
                "p0": (int, "base learner count"),
                "lambdas": (_csv_ints, "scale factors, e.g. 1,2,4")},
    "plot": {"out": (str, ""), "x": (str, ""), "y": (str, ""),
             "labels": (_csv_strs, ""), "title": (str, "")},
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="mavg", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, flags in _SUBCOMMAND_FLAGS.items():
        sub = subs.add_parser(name, add_help=True)
        sub.add_argument("--config", type=str, default=None,
                         help="key = value file; flags override")
        if name == "plot":
            sub.add_argument("inputs", nargs="+", help="CSV files to plot")
        for flag, (conv, help_text) in flags.items():
            arg = "--" + flag.replace("_", "-")
            if conv is bool:
                sub.add_argument(arg, dest=flag, action="store_true", default=None,
                                 help=help_text or None)
            else:
                sub.add_argument(arg, dest=flag, type=str, default=None,
                                 help=help_text or None)
    return parser


def _parse_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _resolve(args, command: str) -> dict:
    """Merge config-file values under explicit flags; convert everything."""
    flags = _SUBCOMMAND_FLAGS[command]
    resolved: dict = {}
    file_values = _parse_config_file(args.config) if args.config else {}
    unknown = set(file_values) - set(flags)
    if unknown:
        raise _UsageError(
            f"unknown config keys for {command!r}: {sorted(unknown)}; "
            f"valid keys: {sorted(flags)}"
        )
    for flag, (conv, _) in flags.items():
        raw = getattr(args, flag, None)
        if raw is None and flag in file_values:
            raw = file_values[flag]
        if raw is None:
            resolved[flag] = None
        elif conv is bool:
            resolved[flag] = raw if isinstance(raw, bool) else raw.lower() in ("1", "true", "yes")
        else:
            try:
                resolved[flag] = conv(raw) if isinstance(raw, str) else raw
            except ValueError:
                raise _UsageError(f"bad value for --{flag}: {raw!r}") from None
    return resolved


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise _UsageError("missing required options: " + ", ".join("--" + m for m in missing))


def _default_out(cfg: dict) -> Path | None:
    if cfg.get("out"):
        return Path(cfg["out"])
    env = os.environ.get(ENV_OUT_DIR)
    return Path(env) if env else None


def _echo_config(out_dir: Path, command: str, cfg: dict) -> None:
    lines = [f"command = {command}"]
    for key in sorted(cfg):
        val = cfg[key]
        if val is None:
            continue
        if isinstance(val, list):
            val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    (out_dir / "config.txt").write_text("\n".join(lines) + "\n")


def _hyper_from(cfg: dict) -> core.HyperParams:
    _require(cfg, "p", "b", "k", "eta", "mu", "n")
    return core.HyperParams(
        num_learners=cfg["p"], batch_size=cfg["b"], local_steps=cfg["k"],
        step_size=cfg["eta"], momentum=cfg["mu"], meta_iters=cfg["n"],
        master_seed=cfg.get("seed") or 0,
    )


def _bound_inputs_from(cfg: dict) -> theory.BoundInputs:
    _require(cfg, "L", "M", "sigma2", "deltaf")
    return theory.BoundInputs(
        lipschitz_L=cfg["L"], grad_bound_M=cfg["M"], sigma2=cfg["sigma2"],
        delta_f=cfg["deltaf"], delta=cfg.get("delta"),
    )


def _cmd_run(cfg: dict) -> int:
    _require(cfg, "objective")
    spec = get_objective(cfg["objective"])
    hyper = _hyper_from(cfg)
    trace = core.run(spec, hyper, workers=cfg.get("workers") or 1,
                     record_wallclock=False)
    out = _default_out(cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        vectors = out / "vectors.txt" if cfg.get("vectors") else None
        core.write_trace(trace, out / "trace.csv", vectors)
        _echo_config(out, "run", cfg)
    print(f"final_f={trace.final_f!r} avg_grad_sq={trace.avg_grad_sq!r} "
          f"assumption_violated={int(trace.assumption_violated)}")
    return 0


def _cmd_sweep(cfg: dict) -> int:
    _require(cfg, "objective")
    axes = {}
    for axis, name in (("axis_p", "num_learners"), ("axis_b", "batch_size"),
                       ("axis_k", "local_steps"), ("axis_eta", "step_size"),
                       ("axis_mu", "momentum")):
        if cfg.get(axis):
            axes[name] = cfg[axis]
    out = _default_out(cfg)
    sweep = harness.SweepSpec(
        objective=cfg["objective"], base=_hyper_from(cfg), axes=axes,
        seeds=cfg.get("seeds") or [cfg.get("seed") or 0],
        loss_threshold=cfg.get("threshold"), output_dir=out,
    )
    results = harness.run_sweep(sweep, workers=cfg.get("workers") or 1)
    if out is not None:
        _echo_config(out, "sweep", cfg)
    print("\n".join(harness.aggregate_csv_lines(results)))
    return 0


def _cmd_race(cfg: dict) -> int:
    _require(cfg, "objective", "mu_list")
    spec = get_objective(cfg["objective"])
    threshold = cfg.get("threshold")
    if threshold is None:
        threshold = spec.race_threshold
    if threshold is None:
        raise _UsageError(f"objective {spec.name!r} has no documented race "
                          "threshold; pass --threshold")
    out = _default_out(cfg)
    sweep = harness.SweepSpec(
        objective=cfg["objective"], base=_hyper_from(cfg),
        seeds=cfg.get("seeds") or harness.DEFAULT_RACE_SEEDS,
        loss_threshold=threshold, output_dir=out,
    )
    result = harness.race(sweep, cfg["mu_list"], workers=cfg.get("workers") or 1)
    if out is not None:
        _echo_config(out, "race", cfg)
    print("mu,median_iters,speedup_vs_zero")
    for e in result.entries:
        print(f"{e.momentum!r},{e.median_iters!r},{e.speedup_vs_zero!r}")
    return 0


def _cmd_bound(cfg: dict) -> int:
    _require(cfg, "mu", "n", "eta", "p", "b", "k")
    bb = theory.convergence_bound(
        cfg["mu"], cfg["n"], cfg["eta"], cfg["p"], cfg["b"], cfg["k"],
        _bound_inputs_from(cfg),
    )
    print("term1,term2,term3,term4,total,feasible,delta_used")
    print(f"{bb.term1!r},{bb.term2!r},{bb.term3!r},{bb.term4!r},"
          f"{bb.total!r},{int(bb.feasible)},{bb.delta_used!r}")
    return 0


def _cmd_check(cfg: dict) -> int:
    _require(cfg, "eta", "mu", "k", "L")
    delta = cfg.get("delta")
    if delta is None:
        delta = theory.delta_max(cfg["eta"], cfg["mu"], cfg["L"])
    report = theory.stepsize_feasible(cfg["eta"], cfg["mu"], cfg["k"], cfg["L"], delta)
    print("feasible,margin_step,margin_delta,delta_used")
    print(f"{int(report.feasible)},{report.margin_step!r},"
          f"{report.margin_delta!r},{delta!r}")
    if not report.feasible:
        raise InfeasibilityError("step-size conditions do not hold")
    return 0


def _cmd_opt_mu(cfg: dict) -> int:
    _require(cfg, "n", "eta", "p", "b", "k")
    inputs = _bound_inputs_from(cfg)
    mu_star, bound = theory.optimal_mu(
        cfg["n"], cfg["eta"], cfg["p"], cfg["b"], cfg["k"], inputs
    )
    cond = theory.positive_momentum_condition(
        cfg["n"], cfg["eta"], cfg["p"], cfg["b"], cfg["k"], inputs
    )
    print("mu_star,bound")
    print(f"{mu_star!r},{bound!r}")
    print("holds,margin,branch")
    print(f"{int(cond.holds)},{cond.margin!r},{cond.branch}")
    return 0


def _cmd_opt_k(cfg: dict) -> int:
    _require(cfg, "s", "mu", "eta", "p", "b")
    inputs = _bound_inputs_from(cfg)
    k_opt, profile = theory.optimal_k(
        cfg["s"], cfg["mu"], cfg["eta"], cfg["p"], cfg["b"], inputs
    )
    cond = theory.k_opt_condition(cfg["s"], cfg["eta"], cfg["mu"], cfg["p"],
                                  cfg["b"], inputs)
    print("K,bound,feasible,is_opt")
    for k, g, feas in profile:
        print(f"{k},{g!r},{int(feas)},{int(k == k_opt)}")
    print("holds,margin,branch")
    print(f"{int(cond.holds)},{cond.margin!r},{cond.branch}")
    return 0


def _cmd_mu_vs_p(cfg: dict) -> int:
    _require(cfg, "s_total", "eta", "b", "k", "p0", "lambdas")
    report = theory.mu_star_vs_p(
        cfg["s_total"], cfg["eta"], cfg["b"], cfg["k"], cfg["p0"],
        cfg["lambdas"], _bound_inputs_from(cfg),
    )
    print("lambda,P,N,mu_star,bound")
    for e in report.entries:
        print(f"{e.lam},{e.num_learners},{e.meta_iters},{e.mu_star!r},{e.bound!r}")
    print(f"nondecreasing,{int(report.nondecreasing)}")
    return 0


def _cmd_plot(cfg: dict, inputs: list[str]) -> int:
    out = cfg.get("out")
    if out is None:
        env = os.environ.get(ENV_OUT_DIR)
        if env is None:
            raise _UsageError("plot needs --out (or MAVG_OUT_DIR)")
        out = str(Path(env) / "plot.svg")
    svgplot.plot_files(inputs, out, x=cfg.get("x"), y=cfg.get("y"),
                       labels=cfg.get("labels"), title=cfg.get("title") or "")
    print(f"wrote {out}")
    return 0


_DISPATCH = {
    "run": _cmd_run, "sweep": _cmd_sweep, "race": _cmd_race, "bound": _cmd_bound,
    "check": _cmd_check, "opt-mu": _cmd_opt_mu, "opt-k": _cmd_opt_k,
    "mu-vs-p": _cmd_mu_vs_p,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _resolve(args, args.command)
        if args.command == "plot":
            return _cmd_plot(cfg, args.inputs)
        return _DISPATCH[args.command](cfg)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
