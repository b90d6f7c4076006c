"""Experiment runner: seeded repetitions, regret traces, summaries with 95% intervals.

Config (JSON)::

    {
      "setting": "stochastic",                  # or "adversarial"
      "structure": {"kind": "bipartite-matchings", "m": 5},
      "policies": ["ESCB1", "ESCB2", "EpochESCB", "CUCB", "LLR"],
      "horizon": 10000,
      "repetitions": 20,
      "seed": 0,
      "theta": {"a": 0.7, "b": 0.5},             # or an explicit vector
      "rate": "practical",
      "checkpoints": 50,                         # or an explicit list of rounds
      "output": {"dir": "out"}
    }

Adversarial runs take ``"adversary"`` (``constant``/``table``/``bernoulli``)
and run the ``CombEXP`` policy.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import actions
from .actions import ActionSet
from .combexp import CombEXP
from .environments import AdversarialEnv, StochasticEnv, split_streams
from .lower_bounds import Instance, matching_closed_form, maximal_pset, simplified_bound
from .policies import STOCHASTIC_POLICIES, EpochESCB, ExplorationRate, make_policy

log = logging.getLogger(__name__)

TRACE_HEADER = ("policy", "rep", "seed", "round", "cum_regret")
EPOCH_HEADER = ("policy", "rep", "seed", "round", "epochs")
Z95 = 1.96


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass
class PolicySpec:
    name: str
    options: Dict[str, Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.options.get("label", self.name)


@dataclass
class ExperimentConfig:
    structure: Dict[str, Any]
    policies: List[PolicySpec]
    horizon: int
    repetitions: int = 1
    seed: int = 0
    setting: str = "stochastic"
    theta: Any = None
    rate: str = "practical"
    checkpoints: Any = 50
    adversary: Optional[Dict[str, Any]] = None
    combexp: Dict[str, Any] = field(default_factory=dict)
    tolerance: float = 1e-9
    output: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config", "must be a JSON object")
        for key in ("structure", "policies", "horizon"):
            if key not in raw:
                raise ConfigError(key, "is required")
        policies = []
        for k, p in enumerate(raw["policies"]):
            if isinstance(p, str):
                policies.append(PolicySpec(p))
            elif isinstance(p, dict) and "name" in p:
                policies.append(PolicySpec(p["name"], {k2: v for k2, v in p.items() if k2 != "name"}))
            else:
                raise ConfigError(f"policies[{k}]", "must be a name or an object with 'name'")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown config field")
        cfg = cls(**{**raw, "policies": policies})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError("horizon", "must be an integer >= 1")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError("repetitions", "must be an integer >= 1")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        if self.setting not in ("stochastic", "adversarial"):
            raise ConfigError("setting", "must be 'stochastic' or 'adversarial'")
        if self.rate not in ("practical", "theoretical"):
            raise ConfigError("rate", "must be 'practical' or 'theoretical'")
        if not self.policies:
            raise ConfigError("policies", "must not be empty")
        try:
            aset = self.action_set()
            aset.enumerate()
        except ValueError as exc:
            raise ConfigError("structure", str(exc)) from None
        allowed = STOCHASTIC_POLICIES if self.setting == "stochastic" else ("CombEXP",)
        for k, p in enumerate(self.policies):
            if p.name not in allowed:
                raise ConfigError(f"policies[{k}]", f"{p.name!r} is not one of {allowed}")
        if self.setting == "stochastic":
            self.theta_vector(aset)
        else:
            if not isinstance(self.adversary, dict) or "kind" not in self.adversary:
                raise ConfigError("adversary", "adversarial runs need an adversary with a 'kind'")
            self.adversary_env(aset)
        self.checkpoint_rounds()

    def action_set(self) -> ActionSet:
        if not isinstance(self.structure, dict):
            raise ConfigError("structure", "must be an object with 'kind'")
        return actions.from_config(self.structure)

    def theta_vector(self, aset: ActionSet) -> np.ndarray:
        spec = self.theta
        if spec is None:
            raise ConfigError("theta", "stochastic runs need theta")
        if isinstance(spec, dict):
            try:
                a, b = float(spec["a"]), float(spec["b"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError("theta", "pattern needs numeric 'a' and 'b'") from None
            if not (0 < b < a < 1):
                raise ConfigError("theta", "pattern needs 0 < b < a < 1")
            arms = aset.enumerate()
            which = spec.get("optimal_arm", "last")
            pos = {"first": 0, "last": len(arms) - 1}.get(which, which)
            if not isinstance(pos, int) or not 0 <= pos < len(arms):
                raise ConfigError("theta.optimal_arm", "must be 'first', 'last' or an arm position")
            return np.where(arms[pos] > 0, a, b)
        theta = np.asarray(spec, dtype=float)
        if theta.shape != (aset.d,):
            raise ConfigError("theta", f"must have length {aset.d}")
        if ((theta < 0) | (theta > 1)).any():
            raise ConfigError("theta", "entries must lie in [0, 1]")
        return theta

    def adversary_env(self, aset: ActionSet) -> AdversarialEnv:
        spec = self.adversary
        kind = spec.get("kind")
        try:
            if kind == "constant":
                env = AdversarialEnv.constant(spec["x"], self.horizon)
            elif kind == "table":
                env = AdversarialEnv(spec["rows"])
            elif kind == "bernoulli":
                rng = np.random.default_rng(int(spec.get("seed", self.seed)))
                env = AdversarialEnv.bernoulli(spec["theta"], self.horizon, rng)
            else:
                raise ConfigError("adversary.kind", "must be 'constant', 'table' or 'bernoulli'")
        except KeyError as exc:
            raise ConfigError(f"adversary.{exc.args[0]}", "is required") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("adversary", str(exc)) from None
        if env.table.shape[1] != aset.d or env.horizon < self.horizon:
            raise ConfigError("adversary", f"table must be at least {self.horizon} x {aset.d}")
        return env

    def checkpoint_rounds(self) -> np.ndarray:
        T = self.horizon
        spec = self.checkpoints
        if isinstance(spec, int) and not isinstance(spec, bool):
            if spec < 1:
                raise ConfigError("checkpoints", "must be >= 1")
            pts = _geometric_rounds(T, spec)
        elif isinstance(spec, list) and spec:
            pts = np.unique(np.asarray(spec, dtype=np.int64))
            if pts[0] < 1 or pts[-1] > T:
                raise ConfigError("checkpoints", f"rounds must lie in [1, {T}]")
        else:
            raise ConfigError("checkpoints", "must be a count or a nonempty list of rounds")
        if pts[-1] != T:
            pts = np.append(pts, T)
        return pts

    def output_paths(self) -> Dict[str, Path]:
        out = dict(self.output or {})
        base = Path(out.get("dir", "."))
        return {
            "traces": base / out.get("traces", "traces.csv"),
            "summary": base / out.get("summary", "summary.json"),
            "epochs": base / out.get("epochs", "epochs.csv"),
        }


def _geometric_rounds(T: int, count: int) -> np.ndarray:
    """``min(count, T)`` distinct rounds in ``[1, T]``, geometrically spaced, ending at ``T``."""
    if count >= T:
        return np.arange(1, T + 1, dtype=np.int64)
    pts = np.round(np.geomspace(1, T, count)).astype(np.int64)
    # rounding collides near 1; push duplicates right, then keep room below T
    for k in range(1, count):
        pts[k] = max(pts[k], pts[k - 1] + 1)
    for k in range(count - 2, -1, -1):
        pts[k] = min(pts[k], pts[k + 1] - 1)
    return pts


@dataclass
class RunResult:
    policy: str
    rep: int
    seed: int
    rounds: np.ndarray
    cum_regret: np.ndarray
    epochs: Optional[np.ndarray] = None
    error: Optional[str] = None


@dataclass
class SummaryRow:
    policy: str
    round: int
    mean: float
    half_width: float
    repetitions: int


def run_repetition(cfg: ExperimentConfig, spec: PolicySpec, rep: int) -> RunResult:
    """One full-horizon run with seed ``cfg.seed + rep``."""
    seed = cfg.seed + rep
    aset = cfg.action_set()
    checkpoints = cfg.checkpoint_rounds()
    env_rng, pol_rng = split_streams(seed)
    try:
        if cfg.setting == "stochastic":
            regret, epochs = _run_stochastic(cfg, spec, aset, env_rng, checkpoints)
        else:
            regret, epochs = _run_adversarial(cfg, aset, pol_rng, checkpoints), None
    except Exception as exc:  # recorded per repetition; other runs continue
        log.exception("run %s rep %d failed", spec.label, rep)
        return RunResult(spec.label, rep, seed, checkpoints, np.full(len(checkpoints), np.nan),
                         error=f"{type(exc).__name__}: {exc}")
    return RunResult(spec.label, rep, seed, checkpoints, regret, epochs)


def _run_stochastic(cfg, spec, aset, env_rng, checkpoints):
    theta = cfg.theta_vector(aset)
    env = StochasticEnv(aset, theta, env_rng)
    rate = ExplorationRate(cfg.rate, aset.m)
    options = {k: v for k, v in spec.options.items() if k != "label"}
    if spec.name in ("ESCB1", "ESCB2", "EpochESCB"):
        options.setdefault("tol", cfg.tolerance)
    policy = make_policy(spec.name, aset, rate, **options)
    arms = aset.enumerate()
    gaps = env.best_value - env.values
    out = np.empty(len(checkpoints))
    cum = 0.0
    k = 0
    for n in range(1, cfg.horizon + 1):
        pos = policy.select()
        rewards, _ = env.step(arms[pos])
        policy.update(pos, rewards)
        cum += gaps[pos]
        if n == checkpoints[k]:
            out[k] = cum
            k += 1
    epochs = None
    if isinstance(policy, EpochESCB):
        epochs = epoch_count_report(policy.boundaries, checkpoints)
    return out, epochs


def _run_adversarial(cfg, aset, pol_rng, checkpoints):
    env = cfg.adversary_env(aset)
    policy = CombEXP(aset, cfg.horizon, pol_rng, **cfg.combexp)
    rewards = np.empty(cfg.horizon)
    for n in range(1, cfg.horizon + 1):
        arm = policy.select()
        y = env.step(arm, n)
        policy.update(y)
        rewards[n - 1] = y
    cum = env.realized_regret(aset, rewards, cfg.horizon)
    return cum[checkpoints - 1]


def epoch_count_report(boundaries: Sequence[int], checkpoints) -> np.ndarray:
    """Number of epoch starts at or before each checkpoint round."""
    return np.searchsorted(np.asarray(boundaries, dtype=np.int64),
                           np.asarray(checkpoints), side="right").astype(np.int64)


def summarize(results: Sequence[RunResult], policy_order: Sequence[str]) -> List[SummaryRow]:
    """Mean and 95% half-width ``1.96 * sd / sqrt(R)`` per policy and checkpoint."""
    rows = []
    for label in policy_order:
        runs = sorted((r for r in results if r.policy == label and r.error is None),
                      key=lambda r: r.rep)
        if not runs:
            continue
        for k, rnd in enumerate(runs[0].rounds):
            xs = [float(r.cum_regret[k]) for r in runs]
            mean, hw = mean_half_width(xs)
            rows.append(SummaryRow(label, int(rnd), mean, hw, len(xs)))
    return rows


def mean_half_width(xs: Sequence[float]):
    n = len(xs)
    mean = math.fsum(xs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, Z95 * math.sqrt(var) / math.sqrt(n)


def _workers(n_jobs: int) -> int:
    env = os.environ.get("COMBANDIT_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _job(args):
    cfg_dict, spec, rep = args
    return run_repetition(ExperimentConfig.from_dict(cfg_dict), spec, rep)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: List[RunResult]
    summary: List[SummaryRow]
    paths: Dict[str, Path]

    @property
    def failures(self) -> List[RunResult]:
        return [r for r in self.runs if r.error is not None]


def run_experiment(cfg: ExperimentConfig | Dict[str, Any], raw: Optional[Dict[str, Any]] = None,
                   write: bool = True) -> ExperimentResult:
    """Run every (policy, repetition) pair, then write traces and the summary."""
    if isinstance(cfg, dict):
        raw, cfg = cfg, ExperimentConfig.from_dict(cfg)
    jobs = [(spec, rep) for spec in cfg.policies for rep in range(cfg.repetitions)]
    n_workers = _workers(len(jobs))
    if n_workers == 1 or raw is None:
        runs = [run_repetition(cfg, spec, rep) for spec, rep in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            # map preserves submission order, so aggregation is order-independent
            runs = list(pool.map(_job, [(raw, spec, rep) for spec, rep in jobs]))
    labels = list(dict.fromkeys(spec.label for spec in cfg.policies))
    summary = summarize(runs, labels)
    paths = cfg.output_paths()
    if write:
        write_outputs(runs, summary, paths)
    return ExperimentResult(cfg, runs, summary, paths)


def traces_csv(runs: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in runs:
        for rnd, val in zip(r.rounds, r.cum_regret):
            w.writerow((r.policy, r.rep, r.seed, int(rnd), repr(float(val))))
    return buf.getvalue()


def epochs_csv(runs: Sequence[RunResult]) -> Optional[str]:
    with_epochs = [r for r in runs if r.epochs is not None]
    if not with_epochs:
        return None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPOCH_HEADER)
    for r in with_epochs:
        for rnd, val in zip(r.rounds, r.epochs):
            w.writerow((r.policy, r.rep, r.seed, int(rnd), int(val)))
    return buf.getvalue()


def write_outputs(runs, summary, paths) -> None:
    for p in paths.values():
        p.parent.mkdir(parents=True, exist_ok=True)
    paths["traces"].write_text(traces_csv(runs))
    paths["summary"].write_text(json.dumps([asdict(r) for r in summary], indent=1) + "\n")
    ep = epochs_csv(runs)
    if ep is not None:
        paths["epochs"].write_text(ep)
    failures = [{"policy": r.policy, "rep": r.rep, "seed": r.seed, "error": r.error}
                for r in runs if r.error is not None]
    if failures:
        (paths["summary"].parent / "failures.json").write_text(json.dumps(failures, indent=1) + "\n")


def read_traces(path) -> Dict[str, Dict[int, List[tuple]]]:
    """``{policy: {rep: [(round, cum_regret), ...]}}`` from a traces CSV."""
    out: Dict[str, Dict[int, List[tuple]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["policy"], {}).setdefault(int(row["rep"]), []).append(
                (int(row["round"]), float(row["cum_regret"])))
    return out


def emit_lower_bound_reference(cfg: ExperimentConfig) -> Dict[str, Any]:
    """``c(theta)`` and the ``c(theta) log t`` curve at the checkpoints."""
    if cfg.setting != "stochastic":
        raise ConfigError("setting", "lower bounds apply to stochastic runs")
    aset = cfg.action_set()
    theta = cfg.theta_vector(aset)
    inst = Instance(aset, theta)
    members = maximal_pset(inst)
    pattern = isinstance(cfg.theta, dict)
    if pattern and aset.kind == "bipartite-matchings":
        c = matching_closed_form(aset.m, float(cfg.theta["a"]), float(cfg.theta["b"]))
        method = "matching-closed-form"
    else:
        c = simplified_bound(inst, members)
        method = "simplified-bound"
    rounds = cfg.checkpoint_rounds()
    return {
        "c_theta": c,
        "H_size": len(members),
        "method": method,
        "reference": [{"round": int(t), "value": c * math.log(t)} for t in rounds],
    }
