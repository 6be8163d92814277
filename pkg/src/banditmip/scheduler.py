"""Online heuristic scheduling: bandit selection, rewards, skips and warmstart.

One scheduler invocation runs at most one portfolio heuristic.  The first
pass executes every heuristic once in the default priority order (warmstart);
afterwards a modified epsilon-greedy bandit takes over: with probability
``1 - eps_t`` it exploits the arm with the best average reward, otherwise it
samples an arm proportionally to the weights.  Failed calls grow a skip
counter that suppresses whole invocations, so an unproductive portfolio is
consulted less and less often.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .heuristics import (
    DEFAULT_ORDER,
    DivingLimits,
    HeurEnv,
    HeurOutcome,
    LnsLimits,
    NotApplicable,
    PORTFOLIO,
    SPEC_BY_ID,
    execute,
    update_fixing_rate,
    update_lp_resolve_threshold,
)
from .simplex import LpResult


class NoApplicableHeuristic(Exception):
    """No candidate heuristic can run in the current solver state."""


def epsilon_t(epsilon: float, n_arms: int, t: int) -> float:
    """Exploration probability at iteration t: epsilon * sqrt(|H| / t)."""
    return epsilon * math.sqrt(n_arms / t)


def compute_skip_count(n_fail: int, beta: float = 0.1) -> int:
    """Number of future invocations to skip after n_fail consecutive failures."""
    return int(math.floor(math.exp(beta * n_fail))) - 1


@dataclass
class RewardBreakdown:
    r_sol: float
    r_gap: float
    r_eff: float
    r_conf: float
    r_total: float


@dataclass
class RewardConfig:
    lam_sol: float = 0.3
    lam_gap: float = 0.3
    lam_eff: float = 0.2
    lam_conf: float = 0.2
    beta: float = 0.1
    n_max: dict = field(default_factory=lambda: {"lns": 500, "diving": 100})
    v_max: int = 0  # running max of conflicts found by any call so far


@dataclass
class RewardContext:
    """Incumbent objectives around one heuristic call (minimize form)."""

    is_first_incumbent: bool
    obj_old: Optional[float]
    obj_new: Optional[float]
    obj_lp: float


def compute_reward(outcome: HeurOutcome, ctx: RewardContext,
                   cfg: RewardConfig) -> RewardBreakdown:
    """Four-component reward in [0, 1]; updates cfg.v_max as a side effect."""
    r_sol = 1.0 if outcome.found_incumbent else 0.0
    if not outcome.found_incumbent:
        r_gap = 0.0
    elif ctx.is_first_incumbent:
        r_gap = 1.0
    else:
        improvement = ctx.obj_old - ctx.obj_new
        denom = ctx.obj_old - ctx.obj_lp
        if denom <= 1e-9:
            r_gap = 1.0 if improvement > 0 else 0.0
        else:
            r_gap = min(max(improvement / denom, 0.0), 1.0)
    n_max = cfg.n_max[SPEC_BY_ID[outcome.heuristic].klass]
    r_eff = min(max(1.0 - outcome.nodes_used / n_max, 0.0), 1.0)
    v = outcome.conflicts_found
    r_conf = 0.0 if cfg.v_max == 0 else min(v / cfg.v_max, 1.0)
    cfg.v_max = max(cfg.v_max, v)
    r_total = (cfg.lam_sol * r_sol + cfg.lam_gap * r_gap
               + cfg.lam_eff * r_eff + cfg.lam_conf * r_conf)
    return RewardBreakdown(r_sol, r_gap, r_eff, r_conf, r_total)


@dataclass
class BanditState:
    """Weights and pull counts of the modified epsilon-greedy bandit."""

    arms: tuple
    rank: dict
    epsilon: float = 0.7
    mode: str = "average"  # or "recency"
    alpha: float = 0.05
    prior: float = 0.0
    weights: dict = field(default_factory=dict)
    sums: dict = field(default_factory=dict)
    pull_counts: dict = field(default_factory=dict)
    seen: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def create(cls, arms, epsilon: float = 0.7, mode: str = "average",
               alpha: float = 0.05) -> "BanditState":
        arms = tuple(arms)
        prior = 1.0 / len(arms)
        return cls(
            arms=arms,
            rank={h: i for i, h in enumerate(arms)},
            epsilon=epsilon,
            mode=mode,
            alpha=alpha,
            prior=prior,
            weights={h: prior for h in arms},
            sums={h: 0.0 for h in arms},
            pull_counts={h: 0 for h in arms},
            seen={h: False for h in arms},
        )


def bandit_select(bandit: BanditState, candidates, rng) -> str:
    """One epsilon-greedy draw over the candidate arms; does not advance t."""
    cands = [h for h in bandit.arms if h in candidates]
    if not cands:
        raise NoApplicableHeuristic("no candidate arm")
    eps = epsilon_t(bandit.epsilon, len(bandit.arms), bandit.t + 1)
    rho = float(rng.random())
    if rho > eps:
        return max(cands, key=lambda h: (bandit.weights[h], -bandit.rank[h]))
    wsum = sum(bandit.weights[h] for h in cands)
    if wsum <= 1e-12:
        return cands[int(rng.integers(len(cands)))]
    r = float(rng.random()) * wsum
    acc = 0.0
    for h in cands:
        acc += bandit.weights[h]
        if r <= acc:
            return h
    return cands[-1]


def bandit_update(bandit: BanditState, h: str, reward: float) -> None:
    """Charge one pull of arm h and fold the reward into its weight.

    In average mode the initial 1/|H| weight stays in the running average as
    one pseudo-observation.  A plain replace-on-first-pull would pin an arm
    whose first reward is 0 at weight 0, and the weight-proportional
    exploration could then never select it again; the prior keeps every arm
    reachable while washing out as real observations accumulate.
    """
    bandit.t += 1
    bandit.pull_counts[h] += 1
    bandit.sums[h] += reward
    if bandit.mode == "average":
        bandit.weights[h] = ((bandit.prior + bandit.sums[h])
                             / (1 + bandit.pull_counts[h]))
    else:
        bandit.weights[h] = ((1.0 - bandit.alpha) * bandit.weights[h]
                             + bandit.alpha * reward)
    bandit.seen[h] = True


class Scheduler:
    """Mutable scheduler state owned by a single solve."""

    def __init__(self, *, epsilon: float = 0.7, mode: str = "average",
                 alpha: float = 0.05, beta: float = 0.1,
                 cfg: Optional[RewardConfig] = None,
                 lns_limits: Optional[LnsLimits] = None,
                 dive_limits: Optional[DivingLimits] = None,
                 rng: Optional[np.random.Generator] = None):
        self.bandit = BanditState.create(DEFAULT_ORDER, epsilon, mode, alpha)
        self.cfg = cfg if cfg is not None else RewardConfig(beta=beta)
        self.beta = beta
        lns_limits = lns_limits if lns_limits is not None else LnsLimits()
        dive_limits = dive_limits if dive_limits is not None else DivingLimits()
        self.limits = {
            s.id: (lns_limits if s.klass == "lns" else dive_limits)
            for s in PORTFOLIO
        }
        self.n_fail = 0
        self.skip_remaining = 0
        self.warmstart_queue = deque(DEFAULT_ORDER)
        self.reward_log = []
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._warm_call = False

    @property
    def in_warmstart(self) -> bool:
        return bool(self.warmstart_queue)

    def should_run(self) -> bool:
        """Skip-window gate; skips are disabled while warmstart is pending."""
        if self.warmstart_queue:
            return True
        if self.skip_remaining > 0:
            self.skip_remaining -= 1
            return False
        return True

    def select(self, applicable) -> str:
        """Next heuristic: warmstart queue first, then the bandit."""
        self._warm_call = False
        queue = self.warmstart_queue
        if queue:
            for _ in range(len(queue)):
                h = queue[0]
                if h in applicable:
                    queue.popleft()
                    self._warm_call = True
                    return h
                queue.rotate(-1)  # defer inapplicable entries to the end
            cands = {h for h in applicable if self.bandit.seen[h]}
        else:
            cands = set(applicable)
        if not cands:
            raise NoApplicableHeuristic("no applicable heuristic")
        return bandit_select(self.bandit, cands, self.rng)

    def record(self, h: str, outcome: HeurOutcome,
               ctx: RewardContext) -> RewardBreakdown:
        """Observe the outcome: reward, weights, working limits, fail streak."""
        spec = SPEC_BY_ID[h]
        limits_before = self.limits[h]
        v_max_before = self.cfg.v_max
        breakdown = compute_reward(outcome, ctx, self.cfg)
        bandit_update(self.bandit, h, breakdown.r_total)
        if spec.klass == "lns":
            self.limits[h] = update_fixing_rate(limits_before, outcome)
        else:
            self.limits[h] = update_lp_resolve_threshold(limits_before, outcome)
        if not self._warm_call:  # frozen during warmstart
            if outcome.found_incumbent:
                self.n_fail = 0
            else:
                self.n_fail += 1
                self.skip_remaining = compute_skip_count(self.n_fail, self.beta)
        limit_after = self.limits[h]
        self.reward_log.append({
            "t": self.bandit.t,
            "h": h,
            "klass": spec.klass,
            "warmstart": self._warm_call,
            "r_sol": breakdown.r_sol,
            "r_gap": breakdown.r_gap,
            "r_eff": breakdown.r_eff,
            "r_conf": breakdown.r_conf,
            "r_total": breakdown.r_total,
            "found_incumbent": outcome.found_incumbent,
            "sub_mip_infeasible": outcome.sub_mip_infeasible,
            "nodes_used": outcome.nodes_used,
            "conflicts_found": outcome.conflicts_found,
            "fixed_count": outcome.fixed_count,
            "is_first_incumbent": ctx.is_first_incumbent,
            "obj_old": ctx.obj_old,
            "obj_new": ctx.obj_new,
            "obj_lp": ctx.obj_lp,
            "v_max_before": v_max_before,
            "n_max": self.cfg.n_max[spec.klass],
            "limit_before": (limits_before.f if spec.klass == "lns"
                             else limits_before.q),
            "limit_after": (limit_after.f if spec.klass == "lns"
                            else limit_after.q),
            "n_fail": self.n_fail,
            "skip_remaining": self.skip_remaining,
        })
        return breakdown


def run_scheduled_heuristics(sched: Scheduler, lp: LpResult, env: HeurEnv,
                             exec_rngs: dict) -> Optional[HeurOutcome]:
    """One scheduler invocation at a node: gate, select, execute, reward, update.

    Returns the executed heuristic's outcome, or None when the invocation was
    skipped or nothing was applicable.  Inapplicable selections are redrawn
    without charging a bandit iteration.
    """
    if not sched.should_run():
        return None
    removed = set()
    while True:
        applicable = {
            s.id for s in PORTFOLIO
            if s.id not in removed
            and (not s.requires_incumbent or env.incumbent() is not None)
        }
        try:
            h = sched.select(applicable)
        except NoApplicableHeuristic:
            return None
        was_warm = sched._warm_call
        inc_before = env.incumbent()
        obj_before = inc_before.objective if inc_before is not None else None
        try:
            outcome = execute(h, lp, env, sched.limits[h], exec_rngs[h])
        except NotApplicable:
            removed.add(h)
            if was_warm:
                sched.warmstart_queue.append(h)
            continue
        break
    inc_after = env.incumbent()
    ctx = RewardContext(
        is_first_incumbent=outcome.found_incumbent and obj_before is None,
        obj_old=obj_before,
        obj_new=(inc_after.objective
                 if outcome.found_incumbent and inc_after is not None else None),
        obj_lp=lp.objective,
    )
    sched.record(h, outcome, ctx)
    return outcome
