//! Pixel importance maps and their update rules.
//!
//! Every training pixel carries a weight `w ∈ [0, 1]`. Between training
//! rounds the weight of a pixel with reconstruction loss `d` is raised by
//! solving
//!
//! ```text
//! min_w  d·w + h(w, w′)      subject to  w′ ≤ w ≤ 1
//! h(w, w′) = (w − w′)·(ln((w − w′)/λ) − 1)
//! ```
//!
//! `f(w) = d·w + h(w, w′)` has second derivative `1/(w − w′) > 0`, so it is
//! convex on the feasible interval and its stationary point
//! `w′ + λ·e^(−d)` is the unconstrained minimizer. Clamping that point to 1
//! gives the constrained minimizer used by [`importance_update`]. Easy pixels
//! (small `d`) gain weight fastest, so training drifts from easy to hard
//! content as the rounds proceed.
//!
//! The very first map comes from a teacher network's per-pixel error `x`
//! through the decreasing sigmoid
//! `g(x) = z / (1 + e^((x − μ₀)·α₀))`, with `z = 1 + e^(−μ₀·α₀)` chosen so
//! that `g(0) = 1`.

mod store;

pub use store::{ImportanceStore, RoundIndex, StoreEntry, STORE_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance below which `w` and `w′` are treated as equal in [`penalty_h`].
pub const PENALTY_EQ_EPS: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceMap {
    pub sample_id: String,
    pub height: usize,
    pub width: usize,
    pub weights: Vec<f64>,
    /// AIL round that produced the map (0 for initial maps).
    pub iteration: u32,
}

impl ImportanceMap {
    pub fn filled(sample_id: impl Into<String>, height: usize, width: usize, value: f64) -> Self {
        ImportanceMap {
            sample_id: sample_id.into(),
            height,
            width,
            weights: vec![value; height * width],
            iteration: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.height * self.width {
            return Err(Error::shape(
                "ImportanceMap",
                (self.height, self.width),
                self.weights.len(),
            ));
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::Domain(format!(
                "importance {w} outside [0, 1] in {}",
                self.sample_id
            )));
        }
        Ok(())
    }
}

/// How a residual `r = ŷ − y` becomes a per-pixel loss value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelError {
    /// `r²`, the quantity the MSE objective sums.
    Squared,
    /// `|r|`.
    Absolute,
}

impl PixelError {
    fn squared() -> Self {
        PixelError::Squared
    }

    fn absolute() -> Self {
        PixelError::Absolute
    }

    pub fn apply(self, residual: f64) -> f64 {
        match self {
            PixelError::Squared => residual * residual,
            PixelError::Absolute => residual.abs(),
        }
    }
}

/// Per-pixel reconstruction loss of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelLossMap {
    pub sample_id: String,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AilConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    /// Per-pixel loss `d` fed to the round update.
    #[serde(default = "PixelError::squared")]
    pub loss: PixelError,
}

fn default_lambda() -> f64 {
    0.15
}
fn default_iterations() -> u32 {
    10
}

impl Default for AilConfig {
    fn default() -> Self {
        AilConfig {
            lambda: default_lambda(),
            iterations: default_iterations(),
            loss: PixelError::Squared,
        }
    }
}

impl AilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda {} must be positive",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Parameters of the teacher importance sigmoid.
///
/// The normalizer `z` is always recomputed from `mu0` and `alpha0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherInitConfig {
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    /// How the teacher's residual is turned into the error `x`.
    #[serde(default = "PixelError::absolute")]
    pub error: PixelError,
}

fn default_mu0() -> f64 {
    0.01
}
fn default_alpha0() -> f64 {
    100.0
}

impl Default for TeacherInitConfig {
    fn default() -> Self {
        TeacherInitConfig {
            mu0: default_mu0(),
            alpha0: default_alpha0(),
            error: PixelError::Absolute,
        }
    }
}

impl TeacherInitConfig {
    pub fn z(&self) -> f64 {
        1.0 + (-self.mu0 * self.alpha0).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) || !self.mu0.is_finite() || !self.alpha0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "teacher init needs finite mu0 and alpha0 > 0 (got {}, {})",
                self.mu0, self.alpha0
            )));
        }
        Ok(())
    }

    /// `g(x)`; equals 1 at `x = 0` and decays towards 0 as `x` grows.
    pub fn importance(&self, x: f64) -> f64 {
        self.z() / (1.0 + ((x - self.mu0) * self.alpha0).exp())
    }
}

/// `(w − w′)·(ln((w − w′)/λ) − 1)`, with the limit value 0 at `w = w′`.
pub fn penalty_h(w: f64, w_prev: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda {lambda} must be positive")));
    }
    let delta = w - w_prev;
    if delta.abs() <= PENALTY_EQ_EPS {
        return Ok(0.0);
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "w = {w} is below the previous importance {w_prev}"
        )));
    }
    Ok(delta * ((delta / lambda).ln() - 1.0))
}

/// Minimizer of `d·w + penalty_h(w, w′, λ)` over `[w′, 1]`:
/// `min(1, w′ + λ·e^(−d))`.
pub fn importance_update(w_prev: f64, d: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w_prev) {
        return Err(Error::Domain(format!(
            "previous importance {w_prev} outside [0, 1]"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("loss {d} must be non-negative")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda {lambda} must be positive")));
    }
    Ok((w_prev + lambda * (-d).exp()).min(1.0))
}

/// Applies [`importance_update`] to every pixel and bumps the iteration.
pub fn update_map(
    map: &ImportanceMap,
    losses: &PixelLossMap,
    cfg: &AilConfig,
) -> Result<ImportanceMap> {
    if map.sample_id != losses.sample_id {
        return Err(Error::Data(format!(
            "importance map {} paired with losses for {}",
            map.sample_id, losses.sample_id
        )));
    }
    if (map.height, map.width) != (losses.height, losses.width)
        || map.weights.len() != losses.values.len()
    {
        return Err(Error::shape(
            "update_map",
            (map.height, map.width),
            (losses.height, losses.width),
        ));
    }
    let weights = map
        .weights
        .iter()
        .zip(&losses.values)
        .map(|(&w, &d)| importance_update(w, d, cfg.lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceMap {
        sample_id: map.sample_id.clone(),
        height: map.height,
        width: map.width,
        weights,
        iteration: map.iteration + 1,
    })
}

pub fn importance_init_from_teacher(
    errors: &PixelLossMap,
    cfg: &TeacherInitConfig,
) -> ImportanceMap {
    ImportanceMap {
        sample_id: errors.sample_id.clone(),
        height: errors.height,
        width: errors.width,
        weights: errors.values.iter().map(|&x| cfg.importance(x)).collect(),
        iteration: 0,
    }
}

/// All-ones map: with it the weighted objective is the plain objective.
pub fn indicator_init(sample_id: impl Into<String>, height: usize, width: usize) -> ImportanceMap {
    ImportanceMap::filled(sample_id, height, width, 1.0)
}

pub fn zero_init(sample_id: impl Into<String>, height: usize, width: usize) -> ImportanceMap {
    ImportanceMap::filled(sample_id, height, width, 0.0)
}

/// I.i.d. uniform `[0, 1]` weights.
pub fn random_init(
    sample_id: impl Into<String>,
    height: usize,
    width: usize,
    seed: u64,
) -> ImportanceMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImportanceMap {
        sample_id: sample_id.into(),
        height,
        width,
        weights: (0..height * width)
            .map(|_| rng.random_range(0.0..=1.0))
            .collect(),
        iteration: 0,
    }
}
