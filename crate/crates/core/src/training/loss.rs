use crate::error::{Error, Result};
use crate::importance::ImportanceMap;
use crate::numcore::Tensor;

/// What a single sample contributes to the objective, pixel by pixel.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PixelTerm<'a> {
    Plain,
    /// Importance weights; they enter the loss squared.
    Weighted(&'a [f64]),
    /// Frozen teacher output and its weight β.
    Distill {
        teacher: &'a [f64],
        beta: f64,
    },
}

/// Sum of per-pixel losses and the gradient of `sum / norm` with respect to
/// `y_hat`. Batches share one `norm` (their total pixel count) so the batch
/// objective is a mean over every pixel in the batch.
///
/// The arithmetic is arranged so that unit weights and `β = 0` reproduce the
/// plain squared error bit for bit.
pub(crate) fn pixel_loss(
    term: PixelTerm<'_>,
    y: &[f64],
    y_hat: &[f64],
    norm: f64,
) -> (f64, Vec<f64>) {
    let mut sum = 0.0;
    let grad = match term {
        PixelTerm::Plain => y
            .iter()
            .zip(y_hat)
            .map(|(&t, &p)| {
                let r = p - t;
                sum += r * r;
                2.0 * r / norm
            })
            .collect(),
        PixelTerm::Weighted(w) => y
            .iter()
            .zip(y_hat)
            .zip(w)
            .map(|((&t, &p), &wi)| {
                let r = p - t;
                let ww = wi * wi;
                sum += ww * (r * r);
                ww * (2.0 * r / norm)
            })
            .collect(),
        PixelTerm::Distill { teacher, beta } => y
            .iter()
            .zip(y_hat)
            .zip(teacher)
            .map(|((&t, &p), &s)| {
                let r = p - t;
                let q = p - s;
                sum += r * r + beta * (q * q);
                2.0 * r / norm + beta * (2.0 * q / norm)
            })
            .collect(),
    };
    (sum, grad)
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn finish(shape: [usize; 4], (sum, grad): (f64, Vec<f64>), n: f64) -> (f64, Tensor) {
    (
        sum / n,
        Tensor::from_vec(shape, grad).expect("gradient has the input's length"),
    )
}

/// Mean squared error and its gradient `2(ŷ − y)/N`.
pub fn mse(y: &Tensor, y_hat: &Tensor) -> Result<(f64, Tensor)> {
    check_same("mse", y, y_hat)?;
    let n = y.len() as f64;
    Ok(finish(
        y.shape(),
        pixel_loss(PixelTerm::Plain, y.data(), y_hat.data(), n),
        n,
    ))
}

/// `mean(w² (y − ŷ)²)`, i.e. the squared error of `w ⊙ y` against `w ⊙ ŷ`.
/// The gradient is `2 w² (ŷ − y) / N`.
///
/// A zero weight removes the pixel from the objective entirely.
pub fn weighted_mse(y: &Tensor, y_hat: &Tensor, w: &ImportanceMap) -> Result<(f64, Tensor)> {
    check_same("weighted_mse", y, y_hat)?;
    if y.n() * y.c() != 1 || (y.h(), y.w()) != (w.height, w.width) || w.weights.len() != y.len() {
        return Err(Error::shape("weighted_mse", y.shape(), (w.height, w.width)));
    }
    let n = y.len() as f64;
    Ok(finish(
        y.shape(),
        pixel_loss(PixelTerm::Weighted(&w.weights), y.data(), y_hat.data(), n),
        n,
    ))
}

/// `mse(y, ŷ) + β · mse(t, ŷ)` where `t` is the teacher's output.
pub fn distill_loss(
    y: &Tensor,
    teacher: &Tensor,
    y_hat: &Tensor,
    beta: f64,
) -> Result<(f64, Tensor)> {
    check_same("distill_loss", y, y_hat)?;
    check_same("distill_loss", teacher, y_hat)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "beta {beta} must be non-negative"
        )));
    }
    let n = y.len() as f64;
    let term = PixelTerm::Distill {
        teacher: teacher.data(),
        beta,
    };
    Ok(finish(
        y.shape(),
        pixel_loss(term, y.data(), y_hat.data(), n),
        n,
    ))
}
