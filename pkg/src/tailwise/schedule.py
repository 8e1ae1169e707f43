"""Per-step, per-layer learning-rate trajectories.

A base schedule (cosine-with-warmup or warmup-stable-decay) is evaluated
at each layer's plan peak. Plans are recomputed on a fixed cadence during
the initial active phase; each recompute opens a soft-switch window that
linearly blends a layer's LR from its value at the recompute step to the
new plan's scheduled value at the window end, avoiding LR spikes. After
the active phase the last plan's ratios are frozen for the rest of
training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

from .allocate import LRPlan, PlanConfig, build_plan
from .errors import InvalidConfig, NonMonotonicStep, StepOutOfRange, UnknownLayer
from .spectral import LayerRole

# Slack for the active-phase boundary test t <= active_fraction * t_max,
# which is exact in real arithmetic but not in floats.
_ACTIVE_EDGE_TOL = 1e-9

AlphaProvider = Callable[[int], Sequence[tuple[str, float]]]


class BaseSchedule(Enum):
    COSINE_WARMUP = "cosine"
    WSD = "wsd"


class SwitchMode(Enum):
    SOFT = "soft"
    HARD = "hard"


@dataclass(frozen=True)
class ScheduleConfig:
    t_max: int
    base: BaseSchedule = BaseSchedule.COSINE_WARMUP
    warmup_steps: int = 0
    min_lr_fraction: float = 0.0  # end-of-decay floor as a fraction of peak
    recompute_interval: int = 100
    t_switch: int = 50
    active_fraction: float = 0.2
    switch_mode: SwitchMode = SwitchMode.SOFT
    wsd_stable_fraction: float = 0.8

    def __post_init__(self):
        if self.t_max < 1:
            raise InvalidConfig("t_max must be positive")
        if not 0 <= self.warmup_steps < self.t_max:
            raise InvalidConfig("warmup_steps must lie in [0, t_max)")
        if not 0.0 <= self.min_lr_fraction <= 1.0:
            raise InvalidConfig("min_lr_fraction must lie in [0, 1]")
        if not 1 <= self.t_switch <= self.recompute_interval <= self.t_max:
            raise InvalidConfig("need 1 <= t_switch <= recompute_interval <= t_max")
        if not 0.0 < self.active_fraction <= 1.0:
            raise InvalidConfig("active_fraction must lie in (0, 1]")
        if not 0.0 < self.wsd_stable_fraction < 1.0:
            raise InvalidConfig("wsd_stable_fraction must lie in (0, 1)")

    @property
    def active_limit(self) -> float:
        return self.active_fraction * self.t_max + _ACTIVE_EDGE_TOL


@dataclass(frozen=True)
class ScheduleState:
    """Trajectory state owned by a single training loop."""

    t: int
    current_plan: LRPlan | None
    previous_plan: LRPlan | None
    last_recompute_step: int
    in_switch_until: int
    frozen: bool

    @staticmethod
    def initial() -> "ScheduleState":
        return ScheduleState(
            t=-1,
            current_plan=None,
            previous_plan=None,
            last_recompute_step=-1,
            in_switch_until=0,
            frozen=False,
        )


def base_lr_at(cfg: ScheduleConfig, peak: float, t: int) -> float:
    """Base schedule value at step t for a given peak LR."""
    if not 0 <= t <= cfg.t_max:
        raise StepOutOfRange(f"t={t} outside [0, {cfg.t_max}]")
    w = cfg.warmup_steps
    if t < w:
        return peak * t / w
    floor = cfg.min_lr_fraction
    span = cfg.t_max - w
    if cfg.base is BaseSchedule.COSINE_WARMUP:
        if span == 0:
            return peak
        cos_part = 0.5 * (1.0 + math.cos(math.pi * (t - w) / span))
        return peak * (floor + (1.0 - floor) * cos_part)
    stable = math.floor(cfg.wsd_stable_fraction * span)
    if t < w + stable:
        return peak
    decay_span = span - stable
    if decay_span == 0:
        return peak
    frac = (t - w - stable) / decay_span
    return peak * (1.0 + frac * (floor - 1.0))


def recompute_due(cfg: ScheduleConfig, t: int) -> bool:
    """True when step t is a plan-recompute boundary inside the active phase."""
    return t % cfg.recompute_interval == 0 and t <= cfg.active_limit


def layer_lr_at(state: ScheduleState, cfg: ScheduleConfig, layer: str, t: int) -> float:
    """LR applied to ``layer`` at step t.

    Inside a soft-switch window the value blends linearly between the
    layer's LR at the recompute step (old plan's schedule) and the new
    plan's scheduled value at the window end; when old and new peaks are
    identical the blend is skipped so an unchanged plan follows the base
    schedule bit-exactly.
    """
    if state.current_plan is None:
        raise UnknownLayer(f"{layer}: no plan has been computed yet")
    peak = state.current_plan.base_lr(layer)
    start_step = state.last_recompute_step
    in_window = (
        cfg.switch_mode is SwitchMode.SOFT
        and state.previous_plan is not None
        and start_step <= t < state.in_switch_until
        and layer in state.previous_plan
    )
    if in_window:
        old_peak = state.previous_plan.base_lr(layer)
        if old_peak != peak:
            start = base_lr_at(cfg, old_peak, start_step)
            target = base_lr_at(cfg, peak, start_step + cfg.t_switch)
            frac = (t - start_step) / cfg.t_switch
            return start + frac * (target - start)
    return base_lr_at(cfg, peak, t)


def on_step(
    state: ScheduleState,
    cfg: ScheduleConfig,
    alpha_provider: AlphaProvider,
    plan_cfg: PlanConfig,
    roles: Mapping[str, LayerRole],
    t: int,
) -> ScheduleState:
    """Advance the schedule by one optimizer step.

    On recompute boundaries inside the active phase this calls the alpha
    provider, builds a fresh plan, and opens a switch window. The first
    step past the active phase freezes the current plan's ratios for the
    remainder of training.
    """
    if t != state.t + 1:
        raise NonMonotonicStep(f"expected t={state.t + 1}, got {t}")
    frozen = state.frozen or t > cfg.active_limit
    if not frozen and recompute_due(cfg, t):
        plan = build_plan(alpha_provider(t), roles, plan_cfg, step=t)
        first = state.current_plan is None
        return ScheduleState(
            t=t,
            current_plan=plan,
            previous_plan=plan if first else state.current_plan,
            last_recompute_step=t,
            in_switch_until=t if first or cfg.switch_mode is SwitchMode.HARD else t + cfg.t_switch,
            frozen=False,
        )
    return replace(state, t=t, frozen=frozen)


def export_timeline(
    states: Sequence[ScheduleState], cfg: ScheduleConfig
) -> list[tuple[int, str, float]]:
    """Dense (step, layer, lr) rows: step-major, layers in plan order."""
    rows: list[tuple[int, str, float]] = []
    for state in states:
        if state.current_plan is None:
            continue
        for layer, _ in state.current_plan.per_layer:
            rows.append((state.t, layer, layer_lr_at(state, cfg, layer, state.t)))
    return rows
