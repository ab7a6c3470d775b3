//! AdamW with decoupled weight decay, and the warm-up + polynomial
//! learning-rate schedule.

use super::config::TrainConfig;
use crate::error::Result;
use crate::net::ParamSet;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamWState {
    m: ParamSet,
    v: ParamSet,
    step: u64,
}

impl AdamWState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW update in place: Adam moments with bias correction, then
/// decoupled weight decay `theta -= lr * wd * theta`.
pub fn optimizer_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut AdamWState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    params.check_congruent(grads, "optimizer_step")?;
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(state.m.tensors.iter_mut().zip(&mut state.v.tensors))
    {
        for i in 0..p.tensor.data.len() {
            let grad = g.tensor.data[i];
            let m_i = &mut m.tensor.data[i];
            let v_i = &mut v.tensor.data[i];
            *m_i = ADAM_BETA1 * *m_i + (1.0 - ADAM_BETA1) * grad;
            *v_i = ADAM_BETA2 * *v_i + (1.0 - ADAM_BETA2) * grad * grad;
            let m_hat = *m_i / bias1;
            let v_hat = *v_i / bias2;
            let theta = &mut p.tensor.data[i];
            *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            *theta -= lr * weight_decay * *theta;
        }
    }
    Ok(())
}

/// Learning rate at `iter`: linear warm-up to `base_lr`, then polynomial
/// decay to zero at `total_iters`.
pub fn lr_at(iter: u64, cfg: &TrainConfig) -> f64 {
    if iter < cfg.warmup_iters {
        return cfg.base_lr * (iter + 1) as f64 / cfg.warmup_iters as f64;
    }
    let span = cfg.total_iters.saturating_sub(cfg.warmup_iters);
    if span == 0 || iter >= cfg.total_iters {
        return 0.0;
    }
    let progress = (iter - cfg.warmup_iters) as f64 / span as f64;
    cfg.base_lr * (1.0 - progress).powf(cfg.poly_power)
}
