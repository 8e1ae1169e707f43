"""End-to-end training loop: spectra -> plan -> schedule -> AdamW.

Each step samples a batch, advances the schedule (recomputing the
per-layer plan from fresh spectra on cadence boundaries during the active
phase), then applies AdamW with per-group learning rates. In uniform mode
every group follows the global schedule but the spectral telemetry is
still recorded on the same cadence so runs can be compared.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .allocate import PlanConfig
from .data import DataConfig, batch_sampler, gen_corpus
from .errors import DivergedLoss, InvalidConfig, TooFewEigenvalues, UnknownLayer
from .model import Model, ModelConfig, build_model, loss_and_grads
from .optim import OptimizerKind, adamw_step, init_moments
from .schedule import (
    ScheduleConfig,
    ScheduleState,
    base_lr_at,
    layer_lr_at,
    on_step,
    recompute_due,
)
from .tailfit import FitConfig, SpectralSummary, summarize

log = logging.getLogger(__name__)

# Trailing window averaged into final_loss; smooths single-step noise so
# seed-paired comparisons are stable.
FINAL_LOSS_WINDOW = 100


class TrainMode(Enum):
    UNIFORM = "uniform"
    LLR = "llr"


@dataclass
class OptimConfig:
    optimizer: OptimizerKind = OptimizerKind.ADAMW
    eta: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.1
    grad_clip: float = 1.0
    mode: TrainMode = TrainMode.UNIFORM
    plan_cfg: PlanConfig | None = None
    schedule_cfg: ScheduleConfig | None = None
    fit_cfg: FitConfig = field(default_factory=FitConfig)
    lamb_max_ratio: float | None = 10.0

    def __post_init__(self):
        if not (0.0 < self.betas[0] < 1.0 and 0.0 < self.betas[1] < 1.0):
            raise InvalidConfig("betas must lie in (0, 1)")
        if self.grad_clip <= 0.0:
            raise InvalidConfig("grad_clip must be positive")
        if self.eta <= 0.0:
            raise InvalidConfig("eta must be positive")
        if self.plan_cfg is None:
            self.plan_cfg = PlanConfig(eta=self.eta)


@dataclass
class TrainRun:
    """Step-by-step telemetry of one training run."""

    losses: np.ndarray
    lr_timeline: list[tuple[int, str, float]]
    alpha_history: list[list[SpectralSummary]]
    alpha_std_history: list[float]
    recompute_steps: list[int]
    final_loss: float
    mode: TrainMode
    diverged: bool = False
    schedule_states: list[ScheduleState] = field(default_factory=list)


def sweep_summaries(model: Model, fit_cfg: FitConfig) -> list[SpectralSummary]:
    """Spectral summary for every analyzable matrix, in model order.

    Layers whose spectra cannot be fitted are logged and skipped; they then
    fall back to the global LR schedule.
    """
    out = []
    for w in model.weight_matrices():
        try:
            out.append(summarize(w, fit_cfg))
        except TooFewEigenvalues as exc:
            log.warning("excluding %s from allocation: %s", w.name, exc)
    return out


def alpha_std(summaries: list[SpectralSummary]) -> float:
    finite = [s.alpha for s in summaries if math.isfinite(s.alpha)]
    return float(np.std(finite)) if finite else math.nan


def _finalize(losses, timeline, history, stds, boundaries, mode, states, diverged):
    arr = np.asarray(losses)
    if diverged or arr.size == 0:
        final = math.inf
    else:
        final = float(arr[-min(FINAL_LOSS_WINDOW, arr.size):].mean())
    return TrainRun(arr, timeline, history, stds, boundaries, final, mode, diverged, states)


def run_training(
    model_cfg: ModelConfig,
    opt_cfg: OptimConfig,
    data_cfg: DataConfig,
    steps: int,
) -> TrainRun:
    """Train for ``steps`` optimizer steps and return the telemetry.

    Raises DivergedLoss (with the partial TrainRun attached) if the loss
    becomes non-finite.
    """
    if steps < 1:
        raise InvalidConfig("steps must be positive")
    if data_cfg.vocab != model_cfg.vocab:
        raise InvalidConfig("data vocab must match model vocab")
    sched_cfg = opt_cfg.schedule_cfg
    if sched_cfg is None:
        sched_cfg = ScheduleConfig(t_max=steps, warmup_steps=steps // 10)
    elif sched_cfg.t_max != steps:
        raise InvalidConfig(f"schedule t_max {sched_cfg.t_max} != steps {steps}")
    plan_cfg = opt_cfg.plan_cfg

    model = build_model(model_cfg)
    stream = gen_corpus(data_cfg)
    batches = batch_sampler(data_cfg, stream, model_cfg.context + 1)
    moments = init_moments(model.params)
    matrix_order = model.matrix_names()
    matrix_names = set(matrix_order)

    losses: list[float] = []
    timeline: list[tuple[int, str, float]] = []
    history: list[list[SpectralSummary]] = []
    stds: list[float] = []
    boundaries: list[int] = []
    states: list[ScheduleState] = []
    state = ScheduleState.initial()

    def record_sweep(t: int) -> list[SpectralSummary]:
        summaries = sweep_summaries(model, opt_cfg.fit_cfg)
        history.append(summaries)
        stds.append(alpha_std(summaries))
        boundaries.append(t)
        return summaries

    def provider(t: int):
        return [(s.layer_name, s.alpha) for s in record_sweep(t)]

    for t in range(steps):
        batch = next(batches)

        if opt_cfg.mode is TrainMode.LLR:
            state = on_step(state, sched_cfg, provider, plan_cfg, model.roles, t)
            states.append(state)
            global_lr = base_lr_at(sched_cfg, opt_cfg.eta, t)
            lrs = {}
            for name in model.params:
                if name in matrix_names:
                    try:
                        lrs[name] = layer_lr_at(state, sched_cfg, name, t)
                        continue
                    except UnknownLayer:
                        pass  # excluded from allocation: global schedule
                lrs[name] = global_lr
        else:
            if recompute_due(sched_cfg, t):
                record_sweep(t)
            global_lr = base_lr_at(sched_cfg, opt_cfg.eta, t)
            lrs = {name: global_lr for name in model.params}

        for name in matrix_order:
            timeline.append((t, name, lrs[name]))

        loss, grads = loss_and_grads(model, batch)
        if not math.isfinite(loss):
            partial = _finalize(losses, timeline, history, stds, boundaries,
                                opt_cfg.mode, states, diverged=True)
            raise DivergedLoss(t, partial)
        losses.append(loss)

        adamw_step(
            model.params,
            grads,
            moments,
            t + 1,
            lrs,
            betas=opt_cfg.betas,
            eps=opt_cfg.eps,
            weight_decay=opt_cfg.weight_decay,
            grad_clip=opt_cfg.grad_clip,
            optimizer=opt_cfg.optimizer,
            lamb_max_ratio=opt_cfg.lamb_max_ratio,
        )

    return _finalize(losses, timeline, history, stds, boundaries,
                     opt_cfg.mode, states, diverged=False)
