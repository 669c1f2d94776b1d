use std::f64::consts::PI;

use super::TrainConfig;

/// Number of warmup steps: `round(warmup_fraction * total_steps)`.
pub fn warmup_steps(total_steps: u64, warmup_fraction: f64) -> u64 {
    (warmup_fraction * total_steps as f64).round() as u64
}

/// Linear warmup branch, `peak * t / w`.
pub fn warmup_lr(t: f64, warmup: u64, peak: f64) -> f64 {
    if warmup == 0 {
        return peak;
    }
    peak * t / warmup as f64
}

/// Half-cosine decay branch from `peak` at `t = w` to 0 at `t = total`.
pub fn decay_lr(t: f64, total_steps: u64, warmup: u64, peak: f64) -> f64 {
    let span = total_steps.saturating_sub(warmup).max(1) as f64;
    let progress = ((t - warmup as f64) / span).clamp(0.0, 1.0);
    peak * 0.5 * (1.0 + (PI * progress).cos())
}

/// Cosine schedule with linear warmup.
///
/// Rises linearly from 0 to `peak` over the first `w` steps, then follows a
/// half cosine from `peak` down to 0 at `total_steps`.
pub fn cosine_with_warmup(step: u64, total_steps: u64, warmup_fraction: f64, peak: f64) -> f64 {
    let total = total_steps.max(1);
    let step = step.min(total);
    let w = warmup_steps(total, warmup_fraction);
    if step < w {
        warmup_lr(step as f64, w, peak)
    } else {
        decay_lr(step as f64, total, w, peak)
    }
}

pub fn lr_at(step: u64, total_steps: u64, cfg: &TrainConfig) -> f64 {
    cosine_with_warmup(step, total_steps, cfg.warmup_fraction, cfg.peak_lr)
}
