//! Dense kernels on row-major slices, each with its backward pass.
//!
//! Backward functions accumulate into gradient buffers (`+=`); callers zero
//! them once per example.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Element type of parameters and activations: `f32` for training,
/// `f64` for gradient checks.
pub trait Scalar:
    Float + FromPrimitive + Sum + AddAssign + SubAssign + MulAssign + DivAssign + Default + Debug + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `y[n, dout] = x[n, din] · w[din, dout] + b[dout]`.
pub fn linear<F: Scalar>(x: &[F], w: &[F], b: &[F], n: usize, din: usize, dout: usize) -> Vec<F> {
    debug_assert_eq!(x.len(), n * din);
    debug_assert_eq!(w.len(), din * dout);
    let mut y = vec![F::zero(); n * dout];
    for i in 0..n {
        let yr = &mut y[i * dout..(i + 1) * dout];
        yr.copy_from_slice(b);
        let xr = &x[i * din..(i + 1) * din];
        for (k, &xk) in xr.iter().enumerate() {
            if xk == F::zero() {
                continue;
            }
            let wr = &w[k * dout..(k + 1) * dout];
            for (yj, &wj) in yr.iter_mut().zip(wr) {
                *yj += xk * wj;
            }
        }
    }
    y
}

/// Backward of [`linear`]. Returns `dx`; accumulates `dw` and `db`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<F: Scalar>(
    x: &[F],
    dy: &[F],
    w: &[F],
    n: usize,
    din: usize,
    dout: usize,
    dw: &mut [F],
    db: &mut [F],
) -> Vec<F> {
    let mut dx = vec![F::zero(); n * din];
    for i in 0..n {
        let dyr = &dy[i * dout..(i + 1) * dout];
        for (dbj, &g) in db.iter_mut().zip(dyr) {
            *dbj += g;
        }
        let xr = &x[i * din..(i + 1) * din];
        let dxr = &mut dx[i * din..(i + 1) * din];
        for k in 0..din {
            let wr = &w[k * dout..(k + 1) * dout];
            dxr[k] = dot(dyr, wr);
            let xk = xr[k];
            if xk == F::zero() {
                continue;
            }
            let dwr = &mut dw[k * dout..(k + 1) * dout];
            for (dwj, &g) in dwr.iter_mut().zip(dyr) {
                *dwj += xk * g;
            }
        }
    }
    dx
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [F::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[c * 4 + l] * b[c * 4 + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub const LN_EPS: f64 = 1e-5;

/// Per-row layer normalization. Returns `(y, xhat, rstd)`.
pub fn layer_norm<F: Scalar>(x: &[F], g: &[F], b: &[F], n: usize, d: usize) -> (Vec<F>, Vec<F>, Vec<F>) {
    let mut y = vec![F::zero(); n * d];
    let mut xhat = vec![F::zero(); n * d];
    let mut rstd = vec![F::zero(); n];
    let df = F::of(d as f64);
    let eps = F::of(LN_EPS);
    for i in 0..n {
        let xr = &x[i * d..(i + 1) * d];
        let mean = xr.iter().copied().sum::<F>() / df;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / df;
        let r = F::one() / (var + eps).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (xr[j] - mean) * r;
            xhat[i * d + j] = h;
            y[i * d + j] = h * g[j] + b[j];
        }
    }
    (y, xhat, rstd)
}

#[allow(clippy::too_many_arguments)]
pub fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    xhat: &[F],
    rstd: &[F],
    g: &[F],
    n: usize,
    d: usize,
    dg: &mut [F],
    db: &mut [F],
) -> Vec<F> {
    let mut dx = vec![F::zero(); n * d];
    let df = F::of(d as f64);
    let mut dxhat = vec![F::zero(); d];
    for i in 0..n {
        let dyr = &dy[i * d..(i + 1) * d];
        let xr = &xhat[i * d..(i + 1) * d];
        for j in 0..d {
            dg[j] += dyr[j] * xr[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
        }
        let mean_dxhat = dxhat.iter().copied().sum::<F>() / df;
        let mean_dxhat_xhat = dxhat.iter().zip(xr).map(|(&a, &b)| a * b).sum::<F>() / df;
        for j in 0..d {
            dx[i * d + j] = rstd[i] * (dxhat[j] - mean_dxhat - xr[j] * mean_dxhat_xhat);
        }
    }
    dx
}

fn gelu_parts<F: Scalar>(x: F) -> (F, F) {
    // tanh approximation; smooth everywhere, which keeps finite differences honest.
    let c = F::of((2.0 / std::f64::consts::PI).sqrt());
    let a = F::of(0.044715);
    let half = F::of(0.5);
    let inner = c * (x + a * x * x * x);
    let t = inner.tanh();
    let y = half * x * (F::one() + t);
    let dinner = c * (F::one() + F::of(3.0) * a * x * x);
    let dy = half * (F::one() + t) + half * x * (F::one() - t * t) * dinner;
    (y, dy)
}

pub fn gelu<F: Scalar>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| gelu_parts(v).0).collect()
}

pub fn gelu_backward<F: Scalar>(x: &[F], dy: &[F]) -> Vec<F> {
    x.iter().zip(dy).map(|(&v, &g)| g * gelu_parts(v).1).collect()
}

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place<F: Scalar>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `log(sum(exp(row)))`.
pub fn log_sum_exp<F: Scalar>(row: &[F]) -> F {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln()
}

/// Fixed sinusoidal position encoding for position `pos`, added to `out`.
pub fn add_position<F: Scalar>(out: &mut [F], pos: usize) {
    let d = out.len();
    for i in 0..d / 2 {
        let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
        let angle = pos as f64 * freq;
        out[2 * i] += F::of(angle.sin());
        out[2 * i + 1] += F::of(angle.cos());
    }
}
