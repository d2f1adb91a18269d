"""Experiment configuration, seeded execution and CSV output.

A run is fully described by an :class:`ExperimentConfig`, read from a JSON
object.  Keys (all optional, defaults shown)::

    n            20        number of agents (>= 3)
    p            41        feature dimension
    d            20        extra directed links per graph
    seed         0         master seed for compression / activation draws
    problem_seed null      seed for graphs and data (null: same as seed)
    algo         "cpp"     "pushpull" | "cpp" | "bcpp"
    compressor   "identity"  "identity" | "quantize:b=<b>" | "randk:k=<k>"
    objective    "logistic"  "logistic" | "quadratic"
    data_path    null      semicolon-separated dataset; null: synthetic data
    normalize    true      standardise features read from data_path
    per_agent    1         synthetic samples per agent
    mu           0.001     l2 weight of the logistic objective
    quad_mu      1.0       eigenvalue range of synthetic quadratics
    quad_L       10.0
    gamma        1.0       push-side averaging weight
    beta_prime   1.0       beta = beta_prime * gamma**2
    alpha_prime  null      alpha = alpha_prime * gamma**3; null: 1/L
    eta          null      momentum weight; null: min(1/(2 C2), 1)
    iters        1000
    stop_at      null      end the run once loss_gap <= stop_at
    out          null      CSV path
"""

import csv
import dataclasses
import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .algorithms import ALGORITHMS, AlgoParams, init_state, run
from .compression import CompressorSpec, c2_of
from .errors import ConfigError, ParameterError
from .ingestion import load_qsar_csv, normalize_features, partition_to_agents, synth_logistic
from .metrics import IterationRecord
from .objectives import LogisticModel, random_quadratic, solve_centralized
from .topology import build_mixing_matrices, build_ring_plus_random, check_assumption2, assumption2_violations

CSV_HEADER = ("iter", "loss_gap", "consensus_err", "tracking_residual", "bits")


def stream(seed, label):
    """Generator for the named random stream of a master seed."""
    tag = zlib.crc32(label.encode())
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag,)))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 20
    p: int = 41
    d: int = 20
    seed: int = 0
    problem_seed: int = None
    algo: str = "cpp"
    compressor: str = "identity"
    objective: str = "logistic"
    data_path: str = None
    normalize: bool = True
    per_agent: int = 1
    mu: float = 0.001
    quad_mu: float = 1.0
    quad_L: float = 10.0
    gamma: float = 1.0
    beta_prime: float = 1.0
    alpha_prime: float = None
    eta: float = None
    iters: int = 1000
    stop_at: float = None
    out: str = None

    def __post_init__(self):
        _validate(self)

    @property
    def beta(self):
        return self.beta_prime * self.gamma**2

    @property
    def spec(self):
        return CompressorSpec.parse(self.compressor)

    @property
    def data_seed(self):
        return self.seed if self.problem_seed is None else self.problem_seed

    def resolved_eta(self):
        if self.eta is not None:
            return self.eta
        c2 = c2_of(self.spec, self.p)
        return 1.0 if c2 == 0 else min(1.0 / (2.0 * c2), 1.0)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_KEYS = {"n", "p", "d", "seed", "problem_seed", "per_agent", "iters"}
_FLOAT_KEYS = {"mu", "quad_mu", "quad_L", "gamma", "beta_prime", "alpha_prime", "eta", "stop_at"}
_STR_KEYS = {"algo", "compressor", "objective", "data_path", "out"}
_NULLABLE = {"problem_seed", "data_path", "alpha_prime", "eta", "stop_at", "out"}


def _check_types(raw):
    for key, val in raw.items():
        if key not in _FIELDS:
            raise ConfigError("unknown key", key=key)
        if val is None:
            if key not in _NULLABLE:
                raise ConfigError("may not be null", key=key)
            continue
        if key in _INT_KEYS:
            ok = isinstance(val, int) and not isinstance(val, bool)
        elif key in _FLOAT_KEYS:
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        elif key in _STR_KEYS:
            ok = isinstance(val, str)
        else:
            ok = isinstance(val, bool)
        if not ok:
            raise ConfigError(f"wrong type {type(val).__name__}", key=key)


def _validate(cfg):
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(msg, key=key)

    need(cfg.n >= 3, "n", "need at least 3 agents")
    need(cfg.p >= 1, "p", "must be positive")
    need(0 <= cfg.d <= cfg.n * (cfg.n - 1) - 2 * cfg.n, "d", f"out of range for n={cfg.n}")
    need(cfg.seed >= 0, "seed", "must be non-negative")
    need(cfg.problem_seed is None or cfg.problem_seed >= 0, "problem_seed", "must be non-negative")
    need(cfg.algo in ALGORITHMS, "algo", f"expected one of {ALGORITHMS}")
    need(cfg.objective in ("logistic", "quadratic"), "objective", "expected 'logistic' or 'quadratic'")
    try:
        CompressorSpec.parse(cfg.compressor).check_dim(cfg.p)
    except ParameterError as exc:
        raise ConfigError(str(exc), key="compressor") from None
    need(cfg.per_agent >= 1, "per_agent", "must be positive")
    need(cfg.mu > 0, "mu", "must be positive")
    need(0 < cfg.quad_mu <= cfg.quad_L, "quad_mu", "need 0 < quad_mu <= quad_L")
    need(0 < cfg.gamma <= 1, "gamma", "must lie in (0, 1]")
    need(cfg.beta_prime > 0, "beta_prime", "must be positive")
    need(cfg.beta_prime * cfg.gamma**2 <= 1, "beta_prime", "beta_prime * gamma**2 exceeds 1")
    need(cfg.alpha_prime is None or cfg.alpha_prime > 0, "alpha_prime", "must be positive")
    need(cfg.eta is None or 0 < cfg.eta <= 1, "eta", "must lie in (0, 1]")
    need(cfg.iters >= 0, "iters", "must be non-negative")
    need(cfg.stop_at is None or cfg.stop_at > 0, "stop_at", "must be positive")


def parse_config(text):
    """Parse and validate a JSON configuration document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    return config_from_dict(raw)


def config_from_dict(raw):
    _check_types(raw)
    return ExperimentConfig(**raw)


@dataclass
class Problem:
    """Everything a run needs apart from the algorithm choice."""

    mixing: object
    objective: object
    reference: object


def build_problem(cfg):
    gR = build_ring_plus_random(cfg.n, cfg.d, cfg.data_seed)
    gC = build_ring_plus_random(cfg.n, cfg.d, cfg.data_seed + 1)
    mix = build_mixing_matrices(gR, gC)
    if not check_assumption2(mix):
        raise ParameterError("; ".join(assumption2_violations(mix)))

    if cfg.objective == "quadratic":
        obj = random_quadratic(cfg.n, cfg.p, cfg.data_seed, cfg.quad_mu, cfg.quad_L)
    else:
        if cfg.data_path is not None:
            data = load_qsar_csv(cfg.data_path, n_features=cfg.p)
            if cfg.normalize:
                data = normalize_features(data)
        else:
            data = synth_logistic(cfg.n, cfg.p, cfg.per_agent, cfg.data_seed)
        obj = LogisticModel.from_shards(partition_to_agents(data, cfg.n, cfg.data_seed), cfg.mu)
    return Problem(mix, obj, solve_centralized(obj))


def resolve_params(cfg, obj):
    _, L = obj.constants()
    return AlgoParams.defaults(
        cfg.n,
        L,
        c2_of(cfg.spec, cfg.p),
        gamma=cfg.gamma,
        alpha_prime=cfg.alpha_prime,
        beta_prime=cfg.beta_prime,
        eta=cfg.resolved_eta(),
    )


@dataclass
class RunOutput:
    records: list
    config: dict
    wall_time: float
    params: dict = None


def run_experiment(cfg, problem=None):
    """Build the problem (unless given), run ``cfg.algo`` from ``X0 = 0`` and collect records."""
    t0 = time.perf_counter()
    if problem is None:
        problem = build_problem(cfg)
    obj = problem.objective
    params = resolve_params(cfg, obj)
    activation = stream(cfg.seed, "activation") if cfg.algo == "bcpp" else None
    state = init_state(obj, np.zeros((cfg.n, obj.p)), activation_rng=activation)
    records = run(
        cfg.algo,
        cfg.iters,
        state,
        problem.mixing,
        obj,
        params,
        problem.reference,
        spec=cfg.spec,
        rng=stream(cfg.seed, "compression"),
        stop_at=cfg.stop_at,
    )
    info = {
        "alpha": float(params.alpha[0]),
        "beta": params.beta,
        "gamma": params.gamma,
        "eta": params.eta,
        "backend": kernels.BACKEND,
    }
    return RunOutput(records, cfg.to_dict(), time.perf_counter() - t0, info)


def write_csv(out, path):
    """Write one row per record; a ``.json`` sidecar carries the config echo."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in out.records:
            w.writerow([r.iter, repr(r.loss_gap), repr(r.consensus_err), repr(r.tracking_residual), r.bits])
    meta = {"config": out.config, "params": out.params, "wall_time": out.wall_time}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    return [
        IterationRecord(int(a), float(b), float(c), float(d), int(e))
        for a, b, c, d, e in rows[1:]
    ]


def _sweep_one(args):
    cfg, gamma = args
    try:
        return gamma, run_experiment(cfg.replace(gamma=gamma)), None
    except Exception as exc:  # a diverging gamma is a sweep result, not a failure
        return gamma, None, exc


def sweep_gamma(cfg, gammas, jobs=1):
    """Run ``cfg`` once per gamma; returns ``[(gamma, RunOutput | None, error | None)]``."""
    for g in gammas:
        if not 0 < g <= 1:
            raise ConfigError(f"gamma {g} outside (0, 1]", key="gamma")
        cfg.replace(gamma=g)  # validates beta_prime * gamma**2 <= 1
    tasks = [(cfg, g) for g in gammas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]


def best_of_sweep(results, target=None):
    """Pick the best run: first to reach ``target`` if any do, else lowest final loss."""
    ok = [(g, out) for g, out, err in results if out is not None]
    if not ok:
        return None

    def key(item):
        recs = item[1].records
        if target is not None:
            hit = next((r.iter for r in recs if r.loss_gap <= target), None)
            if hit is not None:
                return (0, hit)
        return (1, recs[-1].loss_gap)

    return min(ok, key=key)
