"""Batched autoregressive decoding of plans with the attention model.

Agents are decoded in index order. Selecting the depot closes the current
agent's route; the next agent is then moved to its own start vertex without
consulting the policy (probability 1). Instances of different sizes share one
batch through padding; finished instances keep stepping on a dummy depot-only
mask whose log-probability contribution is zeroed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..core import MissionTimes, Plan, Scenario
from ..generate import PaddedScenario
from .model import AttentionModel, DecoderCache, FeatureNorm

DEPOT, START, SUBTASK, PAD = 0, 1, 2, 3


@dataclass
class Batch:
    features: torch.Tensor  # (B, V, 6) network inputs
    node_mask: torch.Tensor  # (B, V) True for real vertices
    role: torch.Tensor  # (B, V)
    xy: torch.Tensor  # (B, V, 2) raw coordinates, float64
    time_cost: torch.Tensor  # (B, V) raw sub-task times, float64
    n_agents: torch.Tensor  # (B,)
    n_subtasks: torch.Tensor  # (B,)
    speed: torch.Tensor  # (B,)
    time_scale: torch.Tensor  # (B,) normalizer for the time state features

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def v_max(self) -> int:
        return self.features.shape[1]


def node_features(scenario: Scenario, norm: FeatureNorm, v_max: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex [x, y, t, is_depot, is_start, is_subtask] and the real-vertex mask; padded rows are zero."""
    v = scenario.n_vertices
    v_max = v if v_max is None else v_max
    if v > v_max:
        raise ValueError(f"scenario has {v} vertices, more than v_max={v_max}")
    feats = np.zeros((v_max, 6))
    pts = scenario.vertex_points()
    feats[:v, 0] = [p.x / norm.domain_size for p in pts]
    feats[:v, 1] = [p.y / norm.domain_size for p in pts]
    feats[:v, 2] = np.asarray(scenario.vertex_time_costs()) / norm.time_cost_max
    m = scenario.n_agents
    feats[0, 3] = 1.0
    feats[1 : m + 1, 4] = 1.0
    feats[m + 1 : v, 5] = 1.0
    mask = np.zeros(v_max, dtype=bool)
    mask[:v] = True
    return feats, mask


def make_batch(
    items: Sequence[Scenario | PaddedScenario],
    norm: FeatureNorm,
    v_max: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> Batch:
    scenarios = [it.scenario if isinstance(it, PaddedScenario) else it for it in items]
    if v_max is None:
        v_max = max(
            it.v_max if isinstance(it, PaddedScenario) else it.n_vertices for it in items
        )
    B = len(scenarios)
    feats = np.zeros((B, v_max, 6))
    mask = np.zeros((B, v_max), dtype=bool)
    role = np.full((B, v_max), PAD, dtype=np.int64)
    xy = np.zeros((B, v_max, 2))
    tc = np.zeros((B, v_max))
    n_agents = np.zeros(B, dtype=np.int64)
    n_sub = np.zeros(B, dtype=np.int64)
    speed = np.ones(B)
    scale = np.ones(B)
    for b, s in enumerate(scenarios):
        feats[b], mask[b] = node_features(s, norm, v_max)
        v, m = s.n_vertices, s.n_agents
        role[b, 0] = DEPOT
        role[b, 1 : m + 1] = START
        role[b, m + 1 : v] = SUBTASK
        xy[b, :v] = [(p.x, p.y) for p in s.vertex_points()]
        tc[b, :v] = s.vertex_time_costs()
        n_agents[b] = m
        n_sub[b] = s.n_subtasks
        speed[b] = s.speed
        scale[b] = norm.diagonal / s.speed + sum(t.time_cost for t in s.tasks)
    return Batch(
        features=torch.from_numpy(feats).to(dtype),
        node_mask=torch.from_numpy(mask),
        role=torch.from_numpy(role),
        xy=torch.from_numpy(xy),
        time_cost=torch.from_numpy(tc),
        n_agents=torch.from_numpy(n_agents),
        n_subtasks=torch.from_numpy(n_sub),
        speed=torch.from_numpy(speed),
        time_scale=torch.from_numpy(scale),
    )


@dataclass
class DecodeState:
    current: torch.Tensor  # (B,) vertex index
    agent: torch.Tensor  # (B,) how many agents have been dispatched before the current one
    agent_id: torch.Tensor  # (B,) index of the agent currently flying
    t_cur: torch.Tensor  # (B,) float64 seconds
    t_max: torch.Tensor  # (B,) float64 seconds
    agent_times: torch.Tensor  # (B, m_max) float64
    visited: torch.Tensor  # (B, V)
    used_start: torch.Tensor  # (B, V)
    at_depot: torch.Tensor  # (B,) waiting for a start choice (choose_start mode only)
    done: torch.Tensor  # (B,)
    step: int = 0

    def m_remaining(self, batch: Batch) -> torch.Tensor:
        return batch.n_agents - self.agent


def initial_state(batch: Batch, choose_start: bool = False) -> DecodeState:
    B, V = batch.size, batch.v_max
    m_max = int(batch.n_agents.max())
    zeros = torch.zeros(B, dtype=torch.float64)
    used = torch.zeros(B, V, dtype=torch.bool)
    if choose_start:
        current = torch.zeros(B, dtype=torch.long)
        at_depot = torch.ones(B, dtype=torch.bool)
    else:
        current = torch.ones(B, dtype=torch.long)
        used[:, 1] = True
        at_depot = torch.zeros(B, dtype=torch.bool)
    return DecodeState(
        current=current,
        agent=torch.zeros(B, dtype=torch.long),
        agent_id=torch.zeros(B, dtype=torch.long),
        t_cur=zeros,
        t_max=zeros.clone(),
        agent_times=torch.zeros(B, m_max, dtype=torch.float64),
        visited=torch.zeros(B, V, dtype=torch.bool),
        used_start=used,
        at_depot=at_depot,
        done=torch.zeros(B, dtype=torch.bool),
    )


def state_features(batch: Batch, state: DecodeState, norm: FeatureNorm, dtype=torch.float32) -> torch.Tensor:
    idx = torch.arange(batch.size)
    dist = torch.linalg.vector_norm(batch.xy[idx, state.current] - batch.xy[:, 0], dim=-1)
    feats = torch.stack(
        [
            state.m_remaining(batch).to(torch.float64) / norm.m_max,
            state.t_cur / batch.time_scale,
            state.t_max / batch.time_scale,
            dist / norm.diagonal,
        ],
        dim=-1,
    )
    return feats.to(dtype)


def action_mask(batch: Batch, state: DecodeState, choose_start: bool = False) -> torch.Tensor:
    """True where the vertex may be selected next."""
    unvisited = (batch.role == SUBTASK) & ~state.visited
    remaining = unvisited.any(1)
    last_agent = state.agent == batch.n_agents - 1
    mask = unvisited.clone()
    mask[:, 0] = ~(last_agent & remaining)
    if choose_start:
        starts = (batch.role == START) & ~state.used_start
        mask = torch.where(state.at_depot[:, None], starts, mask)
    only_depot = torch.zeros_like(mask)
    only_depot[:, 0] = True
    return torch.where(state.done[:, None], only_depot, mask)


def advance(batch: Batch, state: DecodeState, action: torch.Tensor, choose_start: bool = False) -> DecodeState:
    """Apply one selected vertex per instance (no-op for finished instances)."""
    idx = torch.arange(batch.size)
    live = ~state.done
    role = batch.role[idx, action]
    leg = torch.linalg.vector_norm(batch.xy[idx, action] - batch.xy[idx, state.current], dim=-1) / batch.speed
    is_sub = live & (role == SUBTASK)
    is_depot = live & (action == 0)
    is_start = live & (role == START)

    t_cur = torch.where(is_sub, state.t_cur + leg + batch.time_cost[idx, action], state.t_cur)
    finished_time = state.t_cur + leg
    t_cur = torch.where(is_depot, finished_time, t_cur)
    agent_times = state.agent_times.clone()
    rows = is_depot.nonzero().flatten()
    agent_times[rows, state.agent_id[rows]] = finished_time[rows]
    t_max = torch.maximum(state.t_max, torch.where(is_sub | is_depot, t_cur, state.t_max))

    visited = state.visited.clone()
    visited[idx[is_sub], action[is_sub]] = True
    agent = state.agent + is_depot.long()
    done = state.done | (is_depot & (agent >= batch.n_agents))
    next_agent = is_depot & ~done
    current = torch.where(is_sub, action, state.current)
    agent_id = state.agent_id
    used_start = state.used_start.clone()
    at_depot = state.at_depot
    if choose_start:
        current = torch.where(next_agent | done, torch.zeros_like(current), current)
        at_depot = (at_depot & ~is_start) | next_agent
        current = torch.where(is_start, action, current)
        agent_id = torch.where(is_start, action - 1, agent_id)
        used_start[idx[is_start], action[is_start]] = True
    else:
        # forced move of the next agent to its own start
        current = torch.where(next_agent, agent + 1, current)
        current = torch.where(done, torch.zeros_like(current), current)
        agent_id = torch.where(next_agent, agent, agent_id)
        used_start[idx[next_agent], (agent + 1)[next_agent]] = True
    t_cur = torch.where(next_agent | is_start, torch.zeros_like(t_cur), t_cur)
    return DecodeState(
        current=current,
        agent=agent,
        agent_id=agent_id,
        t_cur=t_cur,
        t_max=t_max,
        agent_times=agent_times,
        visited=visited,
        used_start=used_start,
        at_depot=at_depot,
        done=done,
        step=state.step + 1,
    )


def decode_step(
    model: AttentionModel,
    cache: DecoderCache,
    batch: Batch,
    state: DecodeState,
    mask: torch.Tensor,
    mode: str = "greedy",
    generator: torch.Generator | None = None,
    forced: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Select one vertex per instance; returns (action, log-probability of it).

    ``forced`` replays a given action stream instead of choosing.
    """
    dtype = cache.emb.nodes.dtype
    ctx = model.context(cache.emb, state_features(batch, state, model.norm, dtype), state.current)
    logp = torch.log_softmax(model.logits(cache, ctx, mask), dim=-1)
    if forced is not None:
        action = forced
    elif mode == "greedy":
        action = logp.argmax(-1)  # first maximal index on ties
    elif mode == "sample":
        action = torch.multinomial(logp.exp(), 1, generator=generator).squeeze(1)
    else:
        raise ValueError(f"unknown decode mode {mode!r}")
    if not bool(mask.gather(1, action[:, None]).all()):
        raise RuntimeError("selected a masked vertex")
    chosen = logp.gather(1, action[:, None]).squeeze(1)
    return action, torch.where(state.done, torch.zeros_like(chosen), chosen)


@dataclass
class RolloutResult:
    actions: torch.Tensor  # (B, T); -1 once an instance has finished
    log_prob: torch.Tensor  # (B,) summed over steps
    agent_times: torch.Tensor  # (B, m_max) float64
    max_time: torch.Tensor  # (B,) float64
    n_agents: torch.Tensor
    choose_start: bool = False

    def plans(self) -> list[Plan]:
        return [
            actions_to_plan(self.actions[b].tolist(), int(self.n_agents[b]), self.choose_start)
            for b in range(self.actions.shape[0])
        ]

    def mission_times(self) -> list[MissionTimes]:
        return [
            MissionTimes(tuple(float(x) for x in self.agent_times[b, : int(self.n_agents[b])]))
            for b in range(self.agent_times.shape[0])
        ]


def actions_to_plan(actions: Sequence[int], n_agents: int, choose_start: bool = False) -> Plan:
    """Convert a decoded vertex sequence (-1 = finished) into per-agent routes."""
    routes: list[list[int]] = [[] for _ in range(n_agents)]
    agent = 0
    for a in actions:
        if a < 0:
            break
        if a == 0:
            if not choose_start:
                agent += 1
        elif a <= n_agents:
            agent = a - 1
        else:
            routes[agent].append(a - n_agents - 1)
    return Plan(tuple(tuple(r) for r in routes))


def rollout_batch(
    model: AttentionModel,
    batch: Batch,
    mode: str = "greedy",
    generator: torch.Generator | None = None,
    actions: torch.Tensor | None = None,
) -> RolloutResult:
    choose = model.config.choose_start
    emb = model.encode(batch.features, batch.node_mask)
    cache = model.precompute(emb)
    state = initial_state(batch, choose)
    steps, logps = [], []
    while not bool(state.done.all()):
        mask = action_mask(batch, state, choose)
        forced = None
        if actions is not None:
            forced = actions[:, state.step].clamp(min=0)
            forced = torch.where(state.done, torch.zeros_like(forced), forced)
        action, lp = decode_step(model, cache, batch, state, mask, mode, generator, forced)
        steps.append(torch.where(state.done, torch.full_like(action, -1), action))
        logps.append(lp)
        state = advance(batch, state, action, choose)
    acts = torch.stack(steps, 1) if steps else torch.zeros(batch.size, 0, dtype=torch.long)
    logp = torch.stack(logps, 1).sum(1) if logps else torch.zeros(batch.size, dtype=emb.nodes.dtype)
    return RolloutResult(acts, logp, state.agent_times, state.t_max, batch.n_agents, choose)


def rollout(
    item: Scenario | PaddedScenario,
    model: AttentionModel,
    mode: str = "greedy",
    generator: torch.Generator | None = None,
) -> tuple[Plan, float, MissionTimes]:
    """Decode a single instance; returns (plan, total log-probability, mission times)."""
    dtype = next(model.parameters()).dtype
    batch = make_batch([item], model.norm, dtype=dtype)
    with torch.no_grad():
        res = rollout_batch(model, batch, mode, generator)
    return res.plans()[0], float(res.log_prob[0]), res.mission_times()[0]


def solve_batch(
    model: AttentionModel, items: Sequence[Scenario | PaddedScenario], batch_size: int = 1024
) -> tuple[list[Plan], np.ndarray]:
    """Greedy plans and max mission times for many instances."""
    dtype = next(model.parameters()).dtype
    plans, times = [], []
    with torch.no_grad():
        for i in range(0, len(items), batch_size):
            batch = make_batch(items[i : i + batch_size], model.norm, dtype=dtype)
            res = rollout_batch(model, batch, "greedy")
            plans.extend(res.plans())
            times.append(res.max_time.numpy())
    return plans, np.concatenate(times) if times else np.zeros(0)
