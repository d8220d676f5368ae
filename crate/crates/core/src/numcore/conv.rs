//! 2-D convolution with zero padding, lowered to matrix products.
//!
//! Each sample is unrolled into a column matrix (`im2col`) and multiplied by
//! the flattened kernel with a blocked GEMM. The GEMM's summation order
//! depends only on the matrix sizes and the CPU features detected at run
//! time, so results are bitwise reproducible on a given machine.

use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Weights shaped `(out_ch, in_ch, k, k)` and one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub biases: Vec<f64>,
}

impl ConvParams {
    pub fn new(weights: Tensor, biases: Vec<f64>) -> Result<Self> {
        let [out_ch, _, kh, kw] = weights.shape();
        if kh != kw {
            return Err(Error::shape(
                "ConvParams::new",
                "square kernel",
                weights.shape(),
            ));
        }
        if biases.len() != out_ch {
            return Err(Error::shape(
                "ConvParams::new",
                weights.shape(),
                biases.len(),
            ));
        }
        Ok(ConvParams { weights, biases })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kernel: usize) -> Self {
        ConvParams {
            weights: Tensor::zeros([out_ch, in_ch, kernel, kernel]),
            biases: vec![0.0; out_ch],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Gradients produced by [`conv2d_backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub biases: Vec<f64>,
}

fn output_dims(input: &Tensor, params: &ConvParams, pad: usize) -> Result<(usize, usize)> {
    let k = params.kernel();
    if input.c() != params.in_channels() {
        return Err(Error::shape(
            "conv2d",
            input.shape(),
            params.weights.shape(),
        ));
    }
    let ho = (input.h() + 2 * pad).checked_sub(k - 1);
    let wo = (input.w() + 2 * pad).checked_sub(k - 1);
    match (ho, wo) {
        (Some(ho), Some(wo)) if ho > 0 && wo > 0 => Ok((ho, wo)),
        _ => Err(Error::shape(
            "conv2d",
            input.shape(),
            params.weights.shape(),
        )),
    }
}

/// Unrolls one sample into a `(in_ch·k·k) × (ho·wo)` column matrix: row
/// `(i, ky, kx)` holds the input pixel each output position sees through
/// that tap, or 0 where the tap falls into the padding.
fn im2col(
    src: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    cols: &mut [f64],
) {
    let p = ho * wo;
    for i in 0..in_ch {
        let plane = &src[i * h * w..(i + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((i * k + ky) * k + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = oy as isize + ky as isize - pad as isize;
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let line = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            line[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im(
    cols: &[f64],
    in_ch: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    dst: &mut [f64],
) {
    let p = ho * wo;
    for i in 0..in_ch {
        let plane = &mut dst[i * h * w..(i + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((i * k + ky) * k + kx) * p..][..p];
                for oy in 0..ho {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let line = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, g) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                        let ix = ox as isize + kx as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            line[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
}

/// `c = alpha·a·b + beta·c` for row-major `c` (`m × n`); `a` and `b` are
/// described by explicit row/column strides so transposes cost nothing.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert_eq!(c.len(), m * n);
    // SAFETY: the strides address elements inside `a`, `b` and `c`, whose
    // lengths were checked above, and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn conv2d_forward(input: &Tensor, params: &ConvParams, pad: usize) -> Result<Tensor> {
    let (ho, wo) = output_dims(input, params, pad)?;
    let (n, in_ch, h, w) = (input.n(), input.c(), input.h(), input.w());
    let out_ch = params.out_channels();
    let k = params.kernel();
    let (kk, p) = (in_ch * k * k, ho * wo);
    let mut out = Tensor::zeros([n, out_ch, ho, wo]);
    let mut cols = vec![0.0; kk * p];

    for ni in 0..n {
        im2col(
            &input.data()[ni * in_ch * h * w..(ni + 1) * in_ch * h * w],
            in_ch,
            h,
            w,
            k,
            pad,
            ho,
            wo,
            &mut cols,
        );
        let dst = &mut out.data_mut()[ni * out_ch * p..(ni + 1) * out_ch * p];
        for (o, plane) in dst.chunks_exact_mut(p).enumerate() {
            plane.fill(params.biases[o]);
        }
        gemm(
            out_ch,
            kk,
            p,
            params.weights.data(),
            (kk, 1),
            &cols,
            (p, 1),
            1.0,
            dst,
        );
    }
    Ok(out)
}

/// Exact gradients of `Σ grad_out ⊙ conv2d_forward(input, params, pad)`.
pub fn conv2d_backward(
    input: &Tensor,
    params: &ConvParams,
    grad_out: &Tensor,
    pad: usize,
) -> Result<ConvGrads> {
    let (ho, wo) = output_dims(input, params, pad)?;
    let (n, in_ch, h, w) = (input.n(), input.c(), input.h(), input.w());
    let out_ch = params.out_channels();
    if grad_out.shape() != [n, out_ch, ho, wo] {
        return Err(Error::shape(
            "conv2d_backward",
            [n, out_ch, ho, wo],
            grad_out.shape(),
        ));
    }
    let k = params.kernel();
    let (kk, p) = (in_ch * k * k, ho * wo);
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weights = Tensor::zeros(params.weights.shape());
    let mut grad_biases = vec![0.0; out_ch];
    let mut cols = vec![0.0; kk * p];
    let mut grad_cols = vec![0.0; kk * p];

    for ni in 0..n {
        let g = &grad_out.data()[ni * out_ch * p..(ni + 1) * out_ch * p];
        for (o, plane) in g.chunks_exact(p).enumerate() {
            grad_biases[o] += plane.iter().sum::<f64>();
        }
        im2col(
            &input.data()[ni * in_ch * h * w..(ni + 1) * in_ch * h * w],
            in_ch,
            h,
            w,
            k,
            pad,
            ho,
            wo,
            &mut cols,
        );
        // dW += g · colsᵀ
        gemm(
            out_ch,
            p,
            kk,
            g,
            (p, 1),
            &cols,
            (1, p),
            1.0,
            grad_weights.data_mut(),
        );
        // dcols = Wᵀ · g
        gemm(
            kk,
            out_ch,
            p,
            params.weights.data(),
            (1, kk),
            g,
            (p, 1),
            0.0,
            &mut grad_cols,
        );
        col2im(
            &grad_cols,
            in_ch,
            h,
            w,
            k,
            pad,
            ho,
            wo,
            &mut grad_input.data_mut()[ni * in_ch * h * w..(ni + 1) * in_ch * h * w],
        );
    }

    Ok(ConvGrads {
        input: grad_input,
        weights: grad_weights,
        biases: grad_biases,
    })
}
