"""REINFORCE with a greedy rollout baseline."""
from __future__ import annotations

import copy
import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np
import torch
from scipy import stats

from .core import MissionTimes, mission_times
from .generate import GeneratorConfig, PaddedScenario, generate_batch, pad
from .nn.decode import Batch, make_batch, rollout_batch
from .nn.model import AttentionModel, FeatureNorm, ModelConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 5000
    learning_rate: float = 1e-4
    max_epochs: int = 50
    train_samples: int = 1_000_000
    val_samples: int = 100_000
    baseline_alpha: float = 0.05
    early_stop_patience: int = 5
    seed: int = 0
    mixed_size: bool = False
    optimizer: str = "adam"
    grad_clip: float = 1.0
    generator: GeneratorConfig = GeneratorConfig()
    model: ModelConfig = ModelConfig()

    def __post_init__(self):
        for name in ("batch_size", "max_epochs", "train_samples", "val_samples", "early_stop_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.baseline_alpha < 1:
            raise ValueError("baseline_alpha must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "generator" in d:
            g = dict(d["generator"])
            for k in ("n_tasks", "n_agents", "delta", "time_cost_range"):
                if isinstance(g.get(k), list):
                    g[k] = tuple(g[k])
            d["generator"] = GeneratorConfig(**g)
        if "model" in d:
            d["model"] = ModelConfig(**d["model"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields {sorted(unknown)}")
        return cls(**d)


FULL_SCALE = TrainConfig()
DESK_SCALE = TrainConfig(batch_size=512, train_samples=100_000, max_epochs=20, val_samples=2_000)


def feature_norm(gen: GeneratorConfig) -> FeatureNorm:
    return FeatureNorm(domain_size=gen.domain_size, time_cost_max=gen.time_cost_range[1], m_max=gen.m_max)


def reward(mt: MissionTimes) -> float:
    return -mt.max_time


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class BatchStats:
    cost: float  # mean max mission time of the sampled plans
    baseline_cost: float
    loss: float
    grad_norm: float = float("nan")


def reinforce_loss(
    model: AttentionModel,
    baseline: AttentionModel,
    batch: Batch,
    generator: torch.Generator | None = None,
    actions: torch.Tensor | None = None,
    baseline_cost: torch.Tensor | None = None,
):
    """Surrogate loss mean((b - R) * sum log p); its gradient is the REINFORCE estimate.

    ``actions`` replays a fixed action stream (used for finite-difference checks).
    Returns (loss, sampled RolloutResult, baseline cost per instance).
    """
    res = rollout_batch(model, batch, "sample", generator, actions=actions)
    if baseline_cost is None:
        with torch.no_grad():
            baseline_cost = rollout_batch(baseline, batch, "greedy").max_time
    R = -res.max_time
    b = -baseline_cost
    advantage = (b - R).to(res.log_prob.dtype).detach()
    loss = (advantage * res.log_prob).mean()
    return loss, res, baseline_cost


def reinforce_batch(model, baseline, items: Sequence, generator=None, dtype=None):
    """Gradient of the REINFORCE loss w.r.t. every model parameter, plus batch stats."""
    if not items:
        raise ValueError("empty batch")
    dtype = dtype or next(model.parameters()).dtype
    batch = make_batch(items, model.norm, dtype=dtype)
    model.zero_grad(set_to_none=True)
    loss, res, bcost = reinforce_loss(model, baseline, batch, generator)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not bool(torch.isfinite(g).all()):
            raise FloatingPointError(
                f"non-finite gradient in {name}; loss={float(loss.detach())}, mean cost={float(res.max_time.mean())}"
            )
        grads[name] = g.detach().clone()
    st = BatchStats(float(res.max_time.mean()), float(bcost.mean()), float(loss.detach()))
    return grads, st


@dataclass
class GradCheck:
    max_rel_error: float
    worst: str  # "param[index]" of the worst coordinate
    coordinates: int
    analytic: np.ndarray
    numeric: np.ndarray


def finite_difference_check(
    model: AttentionModel,
    baseline: AttentionModel,
    items: Sequence,
    generator: torch.Generator | None = None,
    h: float = 1e-5,
    floor: float = 1e-5,
) -> GradCheck:
    """Compare the autograd REINFORCE gradient with central differences, coordinate by coordinate.

    One sampled action stream and the baseline costs are frozen first, which makes
    the surrogate loss a smooth function of the parameters. Relative error uses
    max(|a|, |n|, floor) as denominator: central differences in float64 carry
    roughly 1e-10 of roundoff, so coordinates whose true gradient is zero (biases
    cancelled by the per-instance normalization) are judged against ``floor``.
    """
    dtype = next(model.parameters()).dtype
    batch = make_batch(items, model.norm, dtype=dtype)
    with torch.no_grad():
        sampled = rollout_batch(model, batch, "sample", generator)
        bcost = rollout_batch(baseline, batch, "greedy").max_time
    acts = sampled.actions

    def loss_value() -> float:
        with torch.no_grad():
            return float(reinforce_loss(model, baseline, batch, actions=acts, baseline_cost=bcost)[0])

    model.zero_grad(set_to_none=True)
    loss, res, _ = reinforce_loss(model, baseline, batch, actions=acts, baseline_cost=bcost)
    if not torch.equal(res.actions, acts):
        raise AssertionError("replayed action stream diverged")
    loss.backward()
    analytic, numeric, names = [], [], []
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        flat = p.data.view(-1)
        for j in range(flat.numel()):
            orig = float(flat[j])
            flat[j] = orig + h
            up = loss_value()
            flat[j] = orig - h
            down = loss_value()
            flat[j] = orig
            numeric.append((up - down) / (2 * h))
            analytic.append(float(g.view(-1)[j]))
            names.append(f"{name}[{j}]")
    a, n = np.array(analytic), np.array(numeric)
    rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    worst = int(np.argmax(rel))
    return GradCheck(float(rel[worst]), names[worst], len(a), a, n)


def greedy_costs(model: AttentionModel, items: Sequence, batch_size: int = 1024, v_max: int | None = None) -> np.ndarray:
    dtype = next(model.parameters()).dtype
    out = []
    with torch.no_grad():
        for i in range(0, len(items), batch_size):
            batch = make_batch(items[i : i + batch_size], model.norm, v_max=v_max, dtype=dtype)
            out.append(rollout_batch(model, batch, "greedy").max_time.numpy())
    return np.concatenate(out)


@dataclass
class BaselineDecision:
    swapped: bool
    t_stat: float
    p_value: float
    mean_current: float
    mean_baseline: float


def baseline_update(
    model: AttentionModel,
    baseline: AttentionModel,
    val_items: Sequence,
    alpha: float = 0.05,
    current_costs: np.ndarray | None = None,
    baseline_costs: np.ndarray | None = None,
) -> BaselineDecision:
    """Copy ``model`` into ``baseline`` if its greedy costs are significantly lower (paired one-sided t-test)."""
    if not len(val_items):
        raise ValueError("empty validation set")
    cur = greedy_costs(model, val_items) if current_costs is None else current_costs
    base = greedy_costs(baseline, val_items) if baseline_costs is None else baseline_costs
    diff = base - cur
    if np.all(diff == diff[0]) or len(diff) < 2:
        t, p = float("nan"), 1.0  # zero variance: no evidence either way
    else:
        res = stats.ttest_rel(base, cur, alternative="greater")
        t, p = float(res.statistic), float(res.pvalue)
    swap = bool(cur.mean() < base.mean() and p < alpha)
    if swap:
        baseline.load_state_dict(model.state_dict())
    return BaselineDecision(swap, t, p, float(cur.mean()), float(base.mean()))


@dataclass
class EpochRow:
    epoch: int
    train_cost: float
    val_cost: float
    baseline_val_cost: float
    swapped: bool
    t_stat: float
    p_value: float
    wall_time: float


@dataclass
class TrainReport:
    rows: list[EpochRow] = field(default_factory=list)
    best_val_cost: float = math.inf
    best_epoch: int = -1
    optimizer: str = "adam"
    reduction: str = "ordered"
    stopped_early: bool = False
    diverged: bool = False

    TIMING = ("wall_time",)

    def to_csv(self, path, include_timing: bool = True) -> None:
        cols = [f.name for f in fields(EpochRow) if include_timing or f.name not in self.TIMING]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(cols)
            for r in self.rows:
                d = asdict(r)
                w.writerow([_fmt(d[c]) for c in cols])

    def comparable(self) -> dict:
        """Everything except wall-clock timings."""
        d = asdict(self)
        for r in d["rows"]:
            for c in self.TIMING:
                r.pop(c)
        return d


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _make_items(cfg: TrainConfig, count: int, seed: int) -> list:
    scen = generate_batch(cfg.generator, count, seed)
    if cfg.mixed_size:
        v_max = cfg.generator.v_max
        return [pad(s, v_max) for s in scen]
    return scen


def _check_rewards(res, items) -> None:
    for mt_batch, item, plan in zip(res.mission_times(), items, res.plans()):
        s = item.scenario if isinstance(item, PaddedScenario) else item
        ref = mission_times(s, plan)  # raises on an infeasible plan
        if abs(ref.max_time - mt_batch.max_time) > 1e-6:
            raise AssertionError(f"reward mismatch {ref.max_time} vs {mt_batch.max_time}")


def train(config: TrainConfig, progress: bool = False) -> tuple[AttentionModel, TrainReport]:
    torch.manual_seed(config.seed)
    gen_torch = torch.Generator().manual_seed(config.seed)
    model = AttentionModel(config.model, feature_norm(config.generator))
    baseline = copy.deepcopy(model)
    if config.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=config.learning_rate)
    v_max = config.generator.v_max if config.mixed_size else None
    val = _make_items(config, config.val_samples, derived_seed(config.seed, 0xA11DA7E))
    base_costs = greedy_costs(baseline, val, v_max=v_max)
    report = TrainReport(optimizer=config.optimizer)
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        items = _make_items(config, config.train_samples, derived_seed(config.seed, epoch))
        costs = []
        for i in range(0, len(items), config.batch_size):
            chunk = items[i : i + config.batch_size]
            batch = make_batch(chunk, model.norm, v_max=v_max)
            loss, res, bcost = reinforce_loss(model, baseline, batch, gen_torch)
            if not math.isfinite(float(loss.detach())):
                report.diverged = True
                log.error("non-finite loss at epoch %d batch %d", epoch, i // config.batch_size)
                model.load_state_dict(best_state)
                return model, report
            if i == 0:
                _check_rewards(res, chunk)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            if config.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            opt.step()
            costs.append(float(res.max_time.mean()))
        cur_costs = greedy_costs(model, val, v_max=v_max)
        decision = baseline_update(model, baseline, val, config.baseline_alpha, cur_costs, base_costs)
        if decision.swapped:
            base_costs = cur_costs
        row = EpochRow(
            epoch,
            float(np.mean(costs)),
            float(cur_costs.mean()),
            float(base_costs.mean()),
            decision.swapped,
            decision.t_stat,
            decision.p_value,
            time.perf_counter() - t0,
        )
        report.rows.append(row)
        if progress:
            log.info("epoch %d train %.4f val %.4f baseline %.4f swap=%s (%.0fs)", epoch, row.train_cost,
                     row.val_cost, row.baseline_val_cost, row.swapped, row.wall_time)
        if row.val_cost < report.best_val_cost:
            report.best_val_cost, report.best_epoch = row.val_cost, epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                report.stopped_early = True
                break
    model.load_state_dict(best_state)
    return model, report


def load_config(path) -> TrainConfig:
    with open(path) as f:
        return TrainConfig.from_dict(json.load(f))
