use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-4;
pub const DEFAULT_CLIP: f64 = 0.4;

/// SGD hyper-parameters that stay fixed over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Gradient elements are clipped to `±clip / lr`.
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_momentum() -> f64 {
    DEFAULT_MOMENTUM
}
fn default_weight_decay() -> f64 {
    DEFAULT_WEIGHT_DECAY
}
fn default_clip() -> f64 {
    DEFAULT_CLIP
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            momentum: DEFAULT_MOMENTUM,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            clip: DEFAULT_CLIP,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum {} not in [0, 1)",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay {} < 0",
                self.weight_decay
            )));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip {} must be positive",
                self.clip
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<Vec<f64>>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub clip: f64,
    pub lr: f64,
}

impl OptimizerState {
    /// Zero velocity buffers, one per parameter array length in `lens`.
    pub fn new(lens: impl IntoIterator<Item = usize>, cfg: SgdConfig, lr: f64) -> Result<Self> {
        cfg.validate()?;
        if !(lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {lr} must be positive"
            )));
        }
        Ok(OptimizerState {
            velocity: lens.into_iter().map(|n| vec![0.0; n]).collect(),
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            clip: cfg.clip,
            lr,
        })
    }
}

/// One momentum-SGD update with adaptive element clipping:
///
/// ```text
/// g' = clamp(g, -clip/lr, clip/lr)
/// v  = momentum * v + g' + weight_decay * p
/// p  = p - lr * v
/// ```
///
/// Gradients are validated before anything is written, so a non-finite
/// gradient leaves both parameters and velocity untouched.
pub fn sgd_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::shape(
            "sgd_step",
            params.len(),
            (grads.len(), state.velocity.len()),
        ));
    }
    for (index, ((p, g), v)) in params.iter().zip(grads).zip(&state.velocity).enumerate() {
        if p.len() != g.len() || p.len() != v.len() {
            return Err(Error::shape("sgd_step", p.len(), (g.len(), v.len())));
        }
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
    }

    let bound = state.clip / state.lr;
    let (momentum, wd, lr) = (state.momentum, state.weight_decay, state.lr);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        for ((pi, &gi), vi) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            let clipped = gi.clamp(-bound, bound);
            *vi = momentum * *vi + clipped + wd * *pi;
            *pi -= lr * *vi;
        }
    }
    Ok(())
}
