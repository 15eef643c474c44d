use serde::{Deserialize, Serialize};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Binary cross-entropy of a probability against a boolean target,
/// in the usual minimized (negated log-likelihood) form.
pub fn bce_loss(s: f64, target: bool) -> f64 {
    let s = s.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if target {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// d(bce)/ds. Zero where the clamp is active.
pub fn bce_grad(s: f64, target: bool) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&s) {
        return 0.0;
    }
    if target {
        -1.0 / s
    } else {
        1.0 / (1.0 - s)
    }
}

/// Squared error against 1 (target) or 0.
pub fn mse_loss(s: f64, target: bool) -> f64 {
    let t = if target { 1.0 } else { 0.0 };
    (s - t) * (s - t)
}

pub fn mse_grad(s: f64, target: bool) -> f64 {
    let t = if target { 1.0 } else { 0.0 };
    2.0 * (s - t)
}

/// Mean squared error over a batch of `(score, target)` pairs.
pub fn mean_mse(batch: &[(f64, bool)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(|&(s, t)| mse_loss(s, t)).sum::<f64>() / batch.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Bce,
    Mse,
}

impl Loss {
    pub fn value(self, s: f64, target: bool) -> f64 {
        match self {
            Loss::Bce => bce_loss(s, target),
            Loss::Mse => mse_loss(s, target),
        }
    }

    pub fn grad(self, s: f64, target: bool) -> f64 {
        match self {
            Loss::Bce => bce_grad(s, target),
            Loss::Mse => mse_grad(s, target),
        }
    }
}
