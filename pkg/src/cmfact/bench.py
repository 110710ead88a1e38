"""Seeded experiment harness producing CSV tables.

Every experiment takes an :class:`ExperimentConfig` and returns a
:class:`BenchResult` (header, rows, summary). Randomness is drawn from
per-item substreams ``SeedSequence([seed, tag, index])`` so results do not
depend on ``threads`` or evaluation order. CSV files start with a ``#``
provenance line, then a header row; floats are written with 10 significant
digits. Wall-clock columns appear only when ``timing`` is enabled, which
keeps default reruns byte-identical.
"""

import csv
import dataclasses
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .baselines import gaussian_mi_precoder, right_singular_basis, waterfilling
from .calculus import fd_gradient, fd_jacobian_vec, grad_phi, hess_phi, hess_psi
from .channel import sample_channel
from .exceptions import IllConditionedAnalogError
from .factorization import (FactorizationProblem, digital_from_analog, objective_qr,
                            pad_phases, phases_to_analog)
from .mi_finite import make_constellation, mi_finite_alphabet
from .realizability import assess, sufficient_condition
from .solver import SolverConfig, default_init_basis, init_phase, solve

EXPERIMENTS = ("random-factorization", "gaussian-mi", "finite-mi",
               "realizability-scan", "grad-check")
FORMAT_VERSION = "1"

_TAGS = {name: i for i, name in enumerate(EXPERIMENTS)}

_DEFAULTS = {
    "random-factorization": dict(N_t_grid=[32, 48, 64, 80, 96], N_rf=4, N_s=4, n_targets=100),
    "gaussian-mi": dict(N_r=4, N_t=72, N_rf=4, N_s=4, L=8,
                        snr_db=[-35, -30, -25, -20, -15, -10, -5], n_channels=1000,
                        normalize=True),
    "finite-mi": dict(N_r=16, N_t=16, N_rf=2, N_s=2, L=2, snr_db=[-10, -5, 0, 5, 10],
                      n_channels=10, constellation="PSK", M=4, n_noise=200, normalize=True),
    "realizability-scan": dict(N_r=8, N_t=64, L_grid=[1, 2, 4, 8], N_rf_grid=[1, 2, 4, 8],
                               n_channels=100),
    "grad-check": dict(N_t=8, N_rf=4, N_s=2, n_instances=20, hessian=True),
}


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    N_r: int = None
    N_t: int = None
    N_rf: int = None
    N_s: int = None
    L: int = None
    N_t_grid: list = None
    L_grid: list = None
    N_rf_grid: list = None
    snr_db: list = None
    n_channels: int = None
    n_targets: int = None
    n_instances: int = None
    hessian: bool = True
    normalize: bool = True
    constellation: str = "PSK"
    M: int = 4
    n_noise: int = 200
    timing: bool = False
    threads: int = 1
    solver: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        exp = d.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**_DEFAULTS[exp], **{k: v for k, v in d.items() if v is not None}}
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        def pos(name, minimum=1):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < minimum):
                raise ConfigError(f"{name} must be an integer >= {minimum}, got {v!r}")
        for name in ("N_r", "N_t", "N_rf", "N_s", "L", "n_channels", "n_targets",
                     "n_instances", "n_noise", "M", "threads"):
            pos(name)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.N_s is not None and self.N_rf is not None and self.N_s > self.N_rf:
            raise ConfigError(f"need N_s <= N_rf, got N_s={self.N_s}, N_rf={self.N_rf}")
        if self.N_rf is not None and self.N_t is not None and self.N_rf > self.N_t:
            raise ConfigError(f"need N_rf <= N_t, got N_rf={self.N_rf}, N_t={self.N_t}")
        for name in ("N_t_grid", "L_grid", "N_rf_grid"):
            grid = getattr(self, name)
            if grid is not None and (not grid or any(
                    isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in grid)):
                raise ConfigError(f"{name} must be a non-empty list of positive integers")
        if self.N_t_grid is not None and self.N_rf is not None and min(self.N_t_grid) < self.N_rf:
            raise ConfigError("every N_t in N_t_grid must be >= N_rf")
        if self.snr_db is not None:
            if not self.snr_db or not all(np.isfinite(float(v)) for v in self.snr_db):
                raise ConfigError("snr_db must be a non-empty list of finite numbers")
        try:
            self.solver_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver overrides: {exc}") from exc

    def solver_config(self):
        return SolverConfig(**self.solver)

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        d = self.to_dict()
        d.pop("threads")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class BenchResult:
    experiment: str
    header: list
    rows: list
    summary: dict
    config: ExperimentConfig

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# cmfact {_version()} format={FORMAT_VERSION} experiment={self.experiment} "
                  f"seed={self.config.seed} config_sha256={self.config.digest()}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self):
        return {"experiment": self.experiment, "config": self.config.to_dict(),
                "summary": self.summary, "header": self.header,
                "rows": [[_jsonable(v) for v in r] for r in self.rows]}


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def _rng(seed, experiment, *idx):
    return np.random.default_rng(np.random.SeedSequence([seed, _TAGS[experiment], *idx]))


def _pmap(fn, items, threads):
    """Ordered map; with ``threads > 1`` items are spread over worker processes."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


class _SolveLog:
    """Post-conditions checked on every solver run."""

    def __init__(self):
        self.n_solves = 0
        self.power_violations = 0
        self.monotone_violations = 0
        self.max_power_excess = -np.inf
        self.stop_reasons = {}

    def add(self, precoder, report, F_opt):
        P = float(np.vdot(F_opt, F_opt).real)
        excess = precoder.power - P
        self.n_solves += 1
        self.max_power_excess = max(self.max_power_excess, excess)
        self.power_violations += int(excess > 1e-8)
        self.monotone_violations += int(np.any(np.diff(report.objective_trace) > 0))
        self.stop_reasons[report.stop_reason] = self.stop_reasons.get(report.stop_reason, 0) + 1

    def merge(self, other):
        self.n_solves += other["n_solves"]
        self.power_violations += other["power_violations"]
        self.monotone_violations += other["monotone_violations"]
        self.max_power_excess = max(self.max_power_excess, other["max_power_excess"])
        for k, v in other["stop_reasons"].items():
            self.stop_reasons[k] = self.stop_reasons.get(k, 0) + v

    def as_dict(self):
        return {"n_solves": self.n_solves, "power_violations": self.power_violations,
                "monotone_violations": self.monotone_violations,
                "max_power_excess": float(self.max_power_excess),
                "stop_reasons": dict(sorted(self.stop_reasons.items()))}


def random_target(rng, N_t, N_s):
    """I.i.d. CN(0, 1) entries scaled to ``||F||_F^2 == N_s``."""
    F = (rng.standard_normal((N_t, N_s)) + 1j * rng.standard_normal((N_t, N_s))) / np.sqrt(2)
    return F * np.sqrt(N_s) / np.linalg.norm(F)


def one_shot_error(F_opt, N_rf):
    """Error of the initial analog phases with the least-squares digital precoder."""
    F_RF = phases_to_analog(init_phase(default_init_basis(F_opt, N_rf)))
    try:
        F_BB = digital_from_analog(F_RF, F_opt)
    except IllConditionedAnalogError:
        F_BB = np.linalg.lstsq(F_RF, F_opt, rcond=1e-12)[0]
    E = F_opt - F_RF @ F_BB
    return float(np.vdot(E, E).real)


# -- random-factorization -------------------------------------------------------


def _random_factorization_item(args):
    cfg, N_t, i = args
    F_opt = random_target(_rng(cfg.seed, cfg.experiment, N_t, i), N_t, cfg.N_s)
    t0 = time.perf_counter()
    precoder, report = solve(FactorizationProblem(F_opt, cfg.N_rf), cfg.solver_config())
    dt = time.perf_counter() - t0
    log = _SolveLog()
    log.add(precoder, report, F_opt)
    return precoder.residual(F_opt), one_shot_error(F_opt, cfg.N_rf), dt, log.as_dict()


def run_random_factorization(config):
    """Average squared Euclidean error of the solver over random normalized targets."""
    cfg = config
    header = ["N_t", "avg_error", "avg_baseline_error", "win_fraction", "n"]
    if cfg.timing:
        header.append("avg_runtime_s")
    rows, log = [], _SolveLog()
    per_nt = {}
    for N_t in cfg.N_t_grid:
        out = _pmap(_random_factorization_item,
                    [(cfg, N_t, i) for i in range(cfg.n_targets)], cfg.threads)
        err = np.array([o[0] for o in out])
        base = np.array([o[1] for o in out])
        for o in out:
            log.merge(o[3])
        row = [N_t, err.mean(), base.mean(), float(np.mean(err < base)), cfg.n_targets]
        if cfg.timing:
            row.append(float(np.mean([o[2] for o in out])))
        rows.append(row)
        per_nt[N_t] = {"errors": err.tolist(), "baseline_errors": base.tolist()}
    return BenchResult(cfg.experiment, header, rows,
                       {"solves": log.as_dict(), "per_N_t": per_nt}, cfg)


# -- gaussian-mi ------------------------------------------------------------------


def _gaussian_mi_item(args):
    cfg, i = args
    ch = sample_channel(cfg.N_r, cfg.N_t, cfg.L, _rng(cfg.seed, cfg.experiment, i))
    U_F = right_singular_basis(ch.H, cfg.N_rf)
    P = 1.0
    log = _SolveLog()
    out = []
    for snr in cfg.snr_db:
        sigma2 = P / 10 ** (float(snr) / 10)
        sol = waterfilling(ch.H, P, sigma2, cfg.N_s)
        t0 = time.perf_counter()
        precoder, report = solve(FactorizationProblem(sol.F_opt, cfg.N_rf),
                                 cfg.solver_config(), U_F=U_F)
        dt = time.perf_counter() - t0
        log.add(precoder, report, sol.F_opt)
        hyb = precoder.normalized(P) if cfg.normalize else precoder
        out.append((gaussian_mi_precoder(ch.H, sol.F_opt, sigma2),
                    gaussian_mi_precoder(ch.H, hyb.F, sigma2), report.iterations, dt))
    return out, log.as_dict()


def run_gaussian_mi(config):
    """Average Gaussian-input MI of the waterfilling precoder and of its hybrid factorization.

    ``P = 1`` and ``sigma2 = P / 10**(snr_db/10)``. With ``normalize`` the
    hybrid precoder is rescaled to ``||F_RF F_BB||_F^2 = P`` before evaluation.
    """
    cfg = config
    results = _pmap(_gaussian_mi_item, [(cfg, i) for i in range(cfg.n_channels)], cfg.threads)
    log = _SolveLog()
    for _, lg in results:
        log.merge(lg)
    header = ["snr_dB", "wf_mi", "hybrid_mi", "ratio", "avg_iterations", "n_channels"]
    if cfg.timing:
        header.append("avg_runtime_s")
    rows = []
    for j, snr in enumerate(cfg.snr_db):
        vals = np.array([r[0][j] for r in results])
        wf, hy = vals[:, 0].mean(), vals[:, 1].mean()
        row = [float(snr), wf, hy, hy / wf if wf > 0 else float("nan"),
               vals[:, 2].mean(), cfg.n_channels]
        if cfg.timing:
            row.append(vals[:, 3].mean())
        rows.append(row)
    return BenchResult(cfg.experiment, header, rows, {"solves": log.as_dict()}, cfg)


# -- finite-mi --------------------------------------------------------------------


def finite_mi_pair(H, F_opt, precoder, sigma2, constellation, n_noise, seed):
    """MI of ``H F_opt`` and of ``H F_RF F_BB`` with shared noise draws."""
    a = mi_finite_alphabet(H @ F_opt, sigma2, constellation, n_noise, seed)
    b = mi_finite_alphabet(H @ precoder.F, sigma2, constellation, n_noise, seed)
    return a, b


def _finite_mi_item(args):
    cfg, i = args
    ch = sample_channel(cfg.N_r, cfg.N_t, cfg.L, _rng(cfg.seed, cfg.experiment, i))
    const = make_constellation(cfg.constellation, cfg.M)
    U_F = right_singular_basis(ch.H, cfg.N_rf)
    P = 1.0
    log = _SolveLog()
    out = []
    for j, snr in enumerate(cfg.snr_db):
        sigma2 = P / 10 ** (float(snr) / 10)
        F_opt = waterfilling(ch.H, P, sigma2, cfg.N_s).F_opt
        precoder, report = solve(FactorizationProblem(F_opt, cfg.N_rf),
                                 cfg.solver_config(), U_F=U_F)
        log.add(precoder, report, F_opt)
        if cfg.normalize:
            precoder = precoder.normalized(P)
        noise_seed = int(np.random.SeedSequence([cfg.seed, _TAGS[cfg.experiment], i, j])
                         .generate_state(1)[0])
        a, b = finite_mi_pair(ch.H, F_opt, precoder, sigma2, const, cfg.n_noise, noise_seed)
        out.append((a.bits, a.std_error, b.bits, b.std_error, precoder.residual(F_opt)))
    return out, log.as_dict()


def run_finite_mi(config):
    """Finite-alphabet MI of the waterfilling precoder and of its hybrid factorization.

    Standard errors of the channel averages combine the per-channel errors in
    quadrature. The waterfilling precoder stands in for a finite-alphabet
    optimal precoder, which this package does not compute.
    """
    cfg = config
    results = _pmap(_finite_mi_item, [(cfg, i) for i in range(cfg.n_channels)], cfg.threads)
    log = _SolveLog()
    for _, lg in results:
        log.merge(lg)
    header = ["snr_dB", "mi_of_Fopt_input", "se_Fopt", "mi_of_hybrid", "se_hybrid",
              "max_residual", "n_channels"]
    rows = []
    n = cfg.n_channels
    for j, snr in enumerate(cfg.snr_db):
        v = np.array([r[0][j] for r in results])
        rows.append([float(snr), v[:, 0].mean(), np.sqrt(np.sum(v[:, 1] ** 2)) / n,
                     v[:, 2].mean(), np.sqrt(np.sum(v[:, 3] ** 2)) / n, v[:, 4].max(), n])
    return BenchResult(cfg.experiment, header, rows, {"solves": log.as_dict()}, cfg)


# -- realizability-scan -----------------------------------------------------------


def _realizability_item(args):
    cfg, L, i = args
    ch = sample_channel(cfg.N_r, cfg.N_t, L, _rng(cfg.seed, cfg.experiment, L, i))
    verdicts = [assess(ch, n_rf) for n_rf in cfg.N_rf_grid if n_rf <= cfg.N_t]
    return [(v.necessary_holds, v.rank_KF) for v in verdicts]


def run_realizability_scan(config):
    cfg = config
    header = ["L", "N_rf", "fraction_sufficient", "fraction_necessary", "avg_rank_KF"]
    rows = []
    n_rfs = [n for n in cfg.N_rf_grid if n <= cfg.N_t]
    for L in cfg.L_grid:
        out = _pmap(_realizability_item, [(cfg, L, i) for i in range(cfg.n_channels)],
                    cfg.threads)
        for k, n_rf in enumerate(n_rfs):
            nec = np.array([o[k][0] for o in out], dtype=float)
            rank = np.array([o[k][1] for o in out], dtype=float)
            suff = float(sufficient_condition(L, cfg.N_r, cfg.N_t, n_rf))
            rows.append([L, n_rf, suff, nec.mean(), rank.mean()])
    return BenchResult(cfg.experiment, header, rows, {}, cfg)


# -- grad-check -------------------------------------------------------------------


def grad_check_instance(rng, N_t, N_rf, N_s, hessian=True):
    """FD errors of ``grad_phi`` / ``hess_phi`` at a random point.

    Returns a dict with ``grad_err``, ``grad_tol`` (``1e-6 (1 + ||grad||)``),
    and, if ``hessian``, ``hess_err`` and ``null_err`` (largest
    ``|hess_psi @ vec(1 r^T)|`` over a basis of shift directions).
    """
    F_opt = (rng.standard_normal((N_t, N_s)) + 1j * rng.standard_normal((N_t, N_s))) / np.sqrt(2)
    Phi = rng.uniform(-np.pi, np.pi, (N_t - 1, N_rf))
    fun = lambda P: objective_qr(P, F_opt)  # noqa: E731
    g = grad_phi(Phi, F_opt)
    out = {"N_t": N_t, "N_rf": N_rf, "N_s": N_s,
           "grad_err": float(np.max(np.abs(g - fd_gradient(fun, Phi)))),
           "grad_tol": 1e-6 * (1 + float(np.linalg.norm(g)))}
    if hessian:
        H = hess_phi(Phi, F_opt)
        H_fd = fd_jacobian_vec(lambda P: grad_phi(P, F_opt), Phi)
        Hpsi = hess_psi(pad_phases(Phi), F_opt)
        shifts = np.kron(np.eye(N_rf), np.ones((N_t, 1)))
        out["hess_err"] = float(np.max(np.abs(H - H_fd)))
        out["null_err"] = float(np.max(np.abs(Hpsi @ shifts)))
    return out


def run_grad_check(config):
    cfg = config
    rows = []
    for i in range(cfg.n_instances):
        rng = _rng(cfg.seed, cfg.experiment, i)
        N_t = int(rng.integers(max(cfg.N_rf, 2), cfg.N_t + 1))
        N_rf = int(rng.integers(cfg.N_s, min(cfg.N_rf, N_t) + 1))
        r = grad_check_instance(rng, N_t, N_rf, cfg.N_s, cfg.hessian)
        rows.append([i, r["N_t"], r["N_rf"], r["N_s"], r["grad_err"], r["grad_tol"],
                     r["grad_err"] <= r["grad_tol"],
                     r.get("hess_err", float("nan")), r.get("null_err", float("nan"))])
    header = ["instance", "N_t", "N_rf", "N_s", "grad_err", "grad_tol", "grad_ok",
              "hess_err", "null_err"]
    return BenchResult(cfg.experiment, header, rows, {}, cfg)


RUNNERS = {
    "random-factorization": run_random_factorization,
    "gaussian-mi": run_gaussian_mi,
    "finite-mi": run_finite_mi,
    "realizability-scan": run_realizability_scan,
    "grad-check": run_grad_check,
}


def run_experiment(config):
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    return RUNNERS[config.experiment](config)
