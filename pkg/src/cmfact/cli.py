"""Command-line interface: ``cmfact <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (JSON object whose keys are the
long option names with ``-`` replaced by ``_``); explicit flags win over the
file. Exit codes: 0 success, 2 configuration error, 3 numeric failure
(ill-conditioned analog precoder or line-search stall), 4 I/O error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, io
from .baselines import gaussian_mi_precoder, waterfilling
from .channel import sample_channel
from .exceptions import IllConditionedAnalogError
from .factorization import FactorizationProblem
from .mi_finite import make_constellation, mi_finite_alphabet
from .realizability import assess
from .solver import B0_EXACT, B0_IDENTITY, STOP_STALL, SolverConfig, solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class NumericFailure(RuntimeError):
    pass


_SOLVER_FLAGS = {
    "epsilon": "epsilon", "max_iter": "max_iter", "b0_mode": "b0_mode",
    "eta_bfgs": "eta_bfgs", "delta_bfgs": "delta_bfgs", "beta_bfgs": "beta_bfgs",
    "delta_min": "delta_min", "rho0": "rho0",
}

_DEFAULTS = {
    "solve": dict(N_t=16, N_s=2, N_rf=4, seed=0, normalize=False),
    "wf": dict(N_r=4, N_t=72, L=8, N_s=4, seed=0, power=1.0, snr_db=-5.0),
    "mi": dict(snr_db=0.0, power=1.0, constellation="PSK", M=4, n_noise=200, seed=0),
    "realizability": dict(N_r=4, N_t=64, L=8, N_rf=4, seed=0),
    "check-grad": dict(N_t=8, N_rf=4, N_s=2, n_instances=20, seed=0, hessian=True),
    "bench": dict(),
}


def _common(p):
    p.add_argument("--config", type=Path, help="JSON file with option values")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output file or stem")
    p.add_argument("--threads", type=int, help="worker processes (bench only)")
    p.add_argument("-v", "--verbose", action="store_true")


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--b0-mode", choices=[B0_EXACT, B0_IDENTITY])
    g.add_argument("--eta-bfgs", type=float)
    g.add_argument("--delta-bfgs", type=float)
    g.add_argument("--beta-bfgs", type=float)
    g.add_argument("--delta-min", type=float)
    g.add_argument("--rho0", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="cmfact",
                                     description="Constant-modulus hybrid precoder factorization")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="factorize a target precoder")
    _common(p)
    p.add_argument("--F-opt", dest="F_opt", type=Path, help="target matrix file")
    p.add_argument("--N-t", dest="N_t", type=int, help="rows of a random target")
    p.add_argument("--N-s", dest="N_s", type=int, help="columns of a random target")
    p.add_argument("--N-rf", dest="N_rf", type=int)
    p.add_argument("--U-F", dest="U_F", type=Path, help="matrix whose phases seed F_RF")
    p.add_argument("--normalize", action="store_true", default=None)
    _solver_flags(p)

    p = sub.add_parser("wf", help="waterfilling precoder of a channel")
    _common(p)
    p.add_argument("--channel", type=Path, help="channel file (otherwise sampled)")
    p.add_argument("--save-channel", type=Path)
    p.add_argument("--N-r", dest="N_r", type=int)
    p.add_argument("--N-t", dest="N_t", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--N-s", dest="N_s", type=int)
    p.add_argument("--power", type=float)
    p.add_argument("--snr-db", dest="snr_db", type=float)

    p = sub.add_parser("mi", help="finite-alphabet and Gaussian MI of a precoded channel")
    _common(p)
    p.add_argument("--channel", type=Path, required=False)
    p.add_argument("--F", dest="F", type=Path, help="precoder matrix file")
    p.add_argument("--F-rf", dest="F_rf", type=Path)
    p.add_argument("--F-bb", dest="F_bb", type=Path)
    p.add_argument("--power", type=float, help="P used to derive sigma2 from --snr-db")
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--constellation", choices=["PSK", "QAM", "psk", "qam"])
    p.add_argument("--M", type=int)
    p.add_argument("--n-noise", dest="n_noise", type=int)

    p = sub.add_parser("realizability", help="exact-realizability verdict for a sampled channel")
    _common(p)
    p.add_argument("--channel", type=Path)
    p.add_argument("--N-r", dest="N_r", type=int)
    p.add_argument("--N-t", dest="N_t", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--N-rf", dest="N_rf", type=int)

    p = sub.add_parser("bench", help="run a seeded experiment and write CSV")
    _common(p)
    p.add_argument("experiment", choices=bench.EXPERIMENTS)
    p.add_argument("--report", type=Path, help="JSON report path")
    for name in ("N_r", "N_t", "N_rf", "N_s", "L", "n_channels", "n_targets",
                 "n_instances", "n_noise", "M"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int)
    for name in ("N_t_grid", "L_grid", "N_rf_grid"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int, nargs="+")
    p.add_argument("--snr-db", dest="snr_db", type=float, nargs="+")
    p.add_argument("--constellation", choices=["PSK", "QAM"])
    p.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--timing", action="store_true", default=None)
    p.add_argument("--no-hessian", dest="hessian", action="store_false", default=None)
    _solver_flags(p)

    p = sub.add_parser("check-grad", help="finite-difference check of gradient and Hessian")
    _common(p)
    p.add_argument("--N-t", dest="N_t", type=int)
    p.add_argument("--N-rf", dest="N_rf", type=int)
    p.add_argument("--N-s", dest="N_s", type=int)
    p.add_argument("--n-instances", dest="n_instances", type=int)
    p.add_argument("--no-hessian", dest="hessian", action="store_false", default=None)
    return parser


def _merge(args):
    """Fill options left unset on the command line from ``--config`` then defaults."""
    opts = {k: v for k, v in vars(args).items() if k != "config"}
    file_opts = {}
    if args.config is not None:
        try:
            file_opts = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise bench.ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(file_opts, dict):
            raise bench.ConfigError(f"{args.config}: expected a JSON object")
        unknown = set(file_opts) - set(opts) - {"solver"}
        if unknown:
            raise bench.ConfigError(f"{args.config}: unknown keys {sorted(unknown)}")
    for k, v in file_opts.items():
        if k == "solver":
            for sk, sv in v.items():
                if opts.get(sk) is None:
                    opts[sk] = sv
        elif opts.get(k) is None:
            opts[k] = Path(v) if k in _PATH_KEYS and v is not None else v
    for k, v in _DEFAULTS[args.command].items():
        if opts.get(k) is None:
            opts[k] = v
    return opts


_PATH_KEYS = {"out", "F_opt", "U_F", "channel", "save_channel", "F", "F_rf", "F_bb", "report"}


def _solver_config(opts):
    kw = {v: opts[k] for k, v in _SOLVER_FLAGS.items() if opts.get(k) is not None}
    try:
        return SolverConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise bench.ConfigError(str(exc)) from exc


def _sigma2(opts):
    return opts["power"] / 10 ** (opts["snr_db"] / 10)


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _get_channel(opts):
    if opts.get("channel") is not None:
        return io.load_channel(opts["channel"])
    return sample_channel(opts["N_r"], opts["N_t"], opts["L"], opts["seed"])


def cmd_solve(opts):
    if opts.get("F_opt") is not None:
        F_opt = io.load_matrix(opts["F_opt"])
    else:
        rng = np.random.default_rng(opts["seed"])
        F_opt = bench.random_target(rng, opts["N_t"], opts["N_s"])
    U_F = io.load_matrix(opts["U_F"]) if opts.get("U_F") is not None else None
    problem = FactorizationProblem(F_opt, opts["N_rf"])
    precoder, report = solve(problem, _solver_config(opts), U_F=U_F)
    if opts["normalize"]:
        precoder = precoder.normalized(problem.P)
    result = report.to_dict()
    result.update(residual=precoder.residual(F_opt), power=precoder.power, P=problem.P,
                  N_t=problem.N_t, N_s=problem.N_s, N_rf=problem.N_rf)
    if opts.get("out") is not None:
        stem = Path(opts["out"])
        io.save_matrix(f"{stem}_F_RF", precoder.F_RF, role="F_RF")
        io.save_matrix(f"{stem}_F_BB", precoder.F_BB, role="F_BB")
        Path(f"{stem}_report.json").write_text(
            json.dumps(result, indent=2, sort_keys=True, default=_json_default) + "\n")
    _emit(result)
    if report.ill_conditioned:
        raise NumericFailure("final analog precoder is ill-conditioned")
    if report.stop_reason == STOP_STALL:
        raise NumericFailure("line search stalled")


def cmd_wf(opts):
    ch = _get_channel(opts)
    if opts.get("save_channel") is not None:
        io.save_channel(opts["save_channel"], ch)
    sigma2 = _sigma2(opts)
    sol = waterfilling(ch.H, opts["power"], sigma2, opts["N_s"])
    result = {"powers": sol.powers.tolist(), "mu": sol.mu, "sigma2": sigma2,
              "gaussian_mi": gaussian_mi_precoder(ch.H, sol.F_opt, sigma2),
              "singular_values": sol.singular_values.tolist()}
    if opts.get("out") is not None:
        io.save_matrix(opts["out"], sol.F_opt, role="F_opt", sigma2=sigma2,
                       power=opts["power"], channel_seed=ch.seed)
    _emit(result)


def cmd_mi(opts):
    if opts.get("channel") is None:
        raise bench.ConfigError("mi needs --channel")
    ch = io.load_channel(opts["channel"])
    if opts.get("F") is not None:
        F = io.load_matrix(opts["F"])
    elif opts.get("F_rf") is not None and opts.get("F_bb") is not None:
        F = io.load_matrix(opts["F_rf"]) @ io.load_matrix(opts["F_bb"])
    else:
        raise bench.ConfigError("mi needs --F or both --F-rf and --F-bb")
    if F.shape[0] != ch.N_t:
        raise bench.ConfigError(f"precoder has {F.shape[0]} rows, channel N_t={ch.N_t}")
    sigma2 = _sigma2(opts)
    const = make_constellation(opts["constellation"], opts["M"])
    est = mi_finite_alphabet(ch.H @ F, sigma2, const, opts["n_noise"], opts["seed"])
    result = {**est.to_dict(), "sigma2": sigma2,
              "gaussian_mi": gaussian_mi_precoder(ch.H, F, sigma2),
              "constellation": const.label, "M": const.M}
    _emit(result, opts.get("out"))


def cmd_realizability(opts):
    ch = _get_channel(opts)
    verdict = assess(ch, opts["N_rf"])
    _emit({**verdict.to_dict(), "N_r": ch.N_r, "N_t": ch.N_t, "L": ch.L,
           "N_rf": opts["N_rf"], "seed": ch.seed}, opts.get("out"))


def _write_csv(result, out):
    text = result.to_csv()
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_bench(opts):
    fields = {f for f in bench.ExperimentConfig.__dataclass_fields__}
    d = {k: v for k, v in opts.items() if k in fields and v is not None}
    d["experiment"] = opts["experiment"]
    solver = {v: opts[k] for k, v in _SOLVER_FLAGS.items() if opts.get(k) is not None}
    if solver:
        d["solver"] = solver
    cfg = bench.ExperimentConfig.from_dict(d)
    result = bench.run_experiment(cfg)
    _write_csv(result, opts.get("out"))
    if opts.get("report") is not None:
        Path(opts["report"]).write_text(
            json.dumps(result.to_json(), indent=2, sort_keys=True, default=_json_default) + "\n")
    stops = result.summary.get("solves", {}).get("stop_reasons", {})
    if stops.get(STOP_STALL):
        raise NumericFailure(f"{stops[STOP_STALL]} solver runs stalled")


def cmd_check_grad(opts):
    cfg = bench.ExperimentConfig.from_dict(
        {"experiment": "grad-check", **{k: opts[k] for k in
                                        ("N_t", "N_rf", "N_s", "n_instances", "seed", "hessian")}})
    result = bench.run_grad_check(cfg)
    _write_csv(result, opts.get("out"))
    if not all(r[6] for r in result.rows):
        raise NumericFailure("gradient check exceeded tolerance")


COMMANDS = {"solve": cmd_solve, "wf": cmd_wf, "mi": cmd_mi, "realizability": cmd_realizability,
            "bench": cmd_bench, "check-grad": cmd_check_grad}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = _merge(args)
        if opts.get("threads") is not None and opts["threads"] < 1:
            raise bench.ConfigError("--threads must be >= 1")
        COMMANDS[args.command](opts)
    except (IllConditionedAnalogError, NumericFailure) as exc:
        print(f"cmfact: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"cmfact: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"cmfact: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
