"""Two-phase adversarial optimization of the enhancement and decomposition
objectives: the discriminators update first on detached fakes, then the
generator set updates through the supervised, reconstruction, adversarial and
code-distribution terms. All networks train synchronously under one Adam
configuration.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import torch

from colorcode import losses
from colorcode.core import TrainConfig
from colorcode.losses import LossError, LossReport
from colorcode.networks import NetworkBundle


class TrainStepError(RuntimeError):
    """A loss term went non-finite; the step was aborted."""


def sample_prior(n: int, code_length: int, mean: float, std: float,
                 generator: torch.Generator) -> torch.Tensor:
    """n i.i.d. draws from the per-dimension Gaussian prior."""
    if n < 1:
        raise ValueError("need at least one sample")
    if std <= 0:
        raise ValueError("prior std must be positive")
    return torch.randn(n, code_length, generator=generator) * std + mean


@dataclass
class TrainState:
    bundle: NetworkBundle
    gen_opt: torch.optim.Adam
    dis_opt: torch.optim.Adam
    iteration: int
    rng: torch.Generator

    @property
    def config(self) -> TrainConfig:
        return self.bundle.config


def init_train_state(cfg: TrainConfig, base_channels: int = 64) -> TrainState:
    bundle = NetworkBundle(cfg, base_channels=base_channels)
    gen_opt = torch.optim.Adam(bundle.generator_parameters(), lr=cfg.learning_rate,
                               betas=(cfg.adam_beta1, cfg.adam_beta2))
    dis_opt = torch.optim.Adam(bundle.discriminator_parameters(), lr=cfg.learning_rate,
                               betas=(cfg.adam_beta1, cfg.adam_beta2))
    rng = torch.Generator().manual_seed(cfg.seed)
    return TrainState(bundle, gen_opt, dis_opt, iteration=0, rng=rng)


def _finite_or_raise(value: torch.Tensor, term: str) -> None:
    if not torch.isfinite(value).all():
        raise TrainStepError(f"non-finite loss term {term}; step aborted")


def discriminator_phase(state: TrainState, x: torch.Tensor, y: torch.Tensor,
                        apply_update: bool = True,
                        cfg: Optional[TrainConfig] = None):
    """Update the discriminators against detached cross-domain fakes."""
    bundle, cfg = state.bundle, cfg or state.config
    n = x.shape[0]
    with torch.no_grad():
        c_x = bundle.encode_content(x, "x")
        c_y = bundle.encode_content(y, "y")
        s_dot_x = sample_prior(n, cfg.code_length, 0.0, 1.0, state.rng)
        s_dot_y = sample_prior(n, cfg.code_length, 0.0, 1.0, state.rng)
        fake_x = bundle.decode_reconstruct(c_y, s_dot_x, "x")
        fake_y = bundle.decode_reconstruct(c_x, s_dot_y, "y")
    loss_d_x = losses.adversarial_loss_discriminator(
        bundle.discriminate(x, "x"), bundle.discriminate(fake_x, "x"))
    loss_d_y = losses.adversarial_loss_discriminator(
        bundle.discriminate(y, "y"), bundle.discriminate(fake_y, "y"))
    _finite_or_raise(loss_d_x, "L_D_x")
    _finite_or_raise(loss_d_y, "L_D_y")
    if apply_update:
        state.dis_opt.zero_grad(set_to_none=True)
        (loss_d_x + loss_d_y).backward()
        state.dis_opt.step()
    return loss_d_x.detach(), loss_d_y.detach()


def generator_phase(state: TrainState, x: torch.Tensor, y: torch.Tensor,
                    loss_d_x: torch.Tensor, loss_d_y: torch.Tensor,
                    apply_update: bool = True,
                    cfg: Optional[TrainConfig] = None) -> LossReport:
    """Forward all supervised and decomposition paths and update the
    generator set."""
    bundle, cfg = state.bundle, cfg or state.config
    n = x.shape[0]

    c_x = bundle.encode_content(x, "x")
    m_x = bundle.encode_color(x)
    y_hat = bundle.decode_enhance(c_x, m_x)
    loss_m = losses.enhancement_loss(y_hat, y)

    s_x = bundle.encode_style(x, "x")
    c_y = bundle.encode_content(y, "y")
    s_y = bundle.encode_style(y, "y")
    x_rec = bundle.decode_reconstruct(c_x, s_x, "x")
    y_rec = bundle.decode_reconstruct(c_y, s_y, "y")
    loss_r_xy = losses.self_reconstruction_loss(x, y, x_rec, y_rec)

    s_dot_x = sample_prior(n, cfg.code_length, 0.0, 1.0, state.rng)
    s_dot_y = sample_prior(n, cfg.code_length, 0.0, 1.0, state.rng)
    fake_x = bundle.decode_reconstruct(c_y, s_dot_x, "x")
    fake_y = bundle.decode_reconstruct(c_x, s_dot_y, "y")
    loss_r_cc = losses.content_code_reconstruction_loss(
        c_x, c_y, bundle.encode_content(fake_y, "y"), bundle.encode_content(fake_x, "x"))
    loss_r_ss = losses.style_code_reconstruction_loss(
        s_dot_x, s_dot_y, bundle.encode_style(fake_x, "x"), bundle.encode_style(fake_y, "y"))

    loss_g_x = losses.adversarial_loss_generator(bundle.discriminate(fake_x, "x"))
    loss_g_y = losses.adversarial_loss_generator(bundle.discriminate(fake_y, "y"))

    loss_cc = None
    if cfg.mmd_enabled:
        z = sample_prior(n, cfg.code_length, cfg.prior_mean, cfg.prior_std, state.rng)
        loss_cc = losses.mmd_loss(m_x, z, kernel=cfg.kernel, prior_std=cfg.prior_std)

    try:
        total_gen, _, report = losses.total_losses(
            L_m=loss_m, L_r_xy=loss_r_xy, L_r_cc=loss_r_cc, L_r_ss=loss_r_ss,
            L_G_x=loss_g_x, L_G_y=loss_g_y, L_D_x=loss_d_x, L_D_y=loss_d_y,
            L_cc=loss_cc, cfg=cfg)
    except LossError as err:
        raise TrainStepError(f"{err}; step aborted (discriminator update already applied)")
    if apply_update:
        state.gen_opt.zero_grad(set_to_none=True)
        total_gen.backward()
        state.gen_opt.step()
    return report


def train_step(state: TrainState, batch: Tuple[torch.Tensor, torch.Tensor],
               cfg: Optional[TrainConfig] = None) -> Tuple[TrainState, LossReport]:
    """One synchronous optimization step over a paired batch.

    Aborts without applying the pending update if any loss term is
    non-finite; the batch must hold >= 2 pairs when the code-distribution
    constraint is enabled.
    """
    cfg = cfg or state.config
    x, y = batch
    if x.shape != y.shape:
        raise ValueError("paired batch shapes differ")
    if cfg.mmd_enabled and x.shape[0] < 2:
        raise ValueError("code-distribution estimator needs batch size >= 2")
    state.bundle.train()
    loss_d_x, loss_d_y = discriminator_phase(state, x, y, cfg=cfg)
    report = generator_phase(state, x, y, loss_d_x, loss_d_y, cfg=cfg)
    state.iteration += 1
    return state, report


def train_loop(state: TrainState, schedule, cfg: TrainConfig,
               checkpoint_sink: Optional[Callable[[TrainState], None]] = None,
               checkpoint_interval: int = 1000,
               log_path: Optional[Path] = None,
               step_callback: Optional[Callable[[int, LossReport], None]] = None) -> TrainState:
    """Run train_step until cfg.total_iterations, logging one JSON line per
    step and checkpointing at the configured interval (plus once at entry,
    so a zero-iteration run still leaves a checkpoint behind)."""
    log_file = open(log_path, "a") if log_path else None
    last_saved = None

    def save():
        nonlocal last_saved
        if checkpoint_sink and state.iteration != last_saved:
            checkpoint_sink(state)
            last_saved = state.iteration

    save()
    try:
        while state.iteration < cfg.total_iterations:
            t0 = time.monotonic()
            batch = schedule.batch(state.iteration)
            state, report = train_step(state, batch, cfg)
            if log_file:
                line = json.loads(report.to_json())
                line["iteration"] = state.iteration
                line["wall_ms"] = round((time.monotonic() - t0) * 1000.0, 3)
                log_file.write(json.dumps(line, sort_keys=True) + "\n")
                log_file.flush()
            if step_callback:
                step_callback(state.iteration, report)
            if state.iteration % checkpoint_interval == 0:
                save()
        save()
    finally:
        if log_file:
            log_file.close()
    return state
