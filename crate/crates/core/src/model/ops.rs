//! Row-major dense primitives with hand-written backward passes.
//!
//! Matrices are flat slices with `rows × cols` layout. Weights of a linear map
//! are stored `in × out` so the forward pass is a sequence of contiguous axpys.

use alloc::vec;
use alloc::vec::Vec;

use super::Scalar;

pub const LN_EPS: f64 = 1e-5;

/// `y = x w + b` for `n` rows.
pub fn linear<F: Scalar>(x: &[F], n: usize, din: usize, w: &[F], b: Option<&[F]>, dout: usize) -> Vec<F> {
    debug_assert_eq!(x.len(), n * din);
    debug_assert_eq!(w.len(), din * dout);
    let mut y = vec![F::zero(); n * dout];
    for r in 0..n {
        let yr = &mut y[r * dout..(r + 1) * dout];
        if let Some(b) = b {
            yr.copy_from_slice(b);
        }
        for (k, &xk) in x[r * din..(r + 1) * din].iter().enumerate() {
            if xk == F::zero() {
                continue;
            }
            let wk = &w[k * dout..(k + 1) * dout];
            for (yo, &wo) in yr.iter_mut().zip(wk) {
                *yo = *yo + xk * wo;
            }
        }
    }
    y
}

/// Accumulates `dw += xᵀ dy`, `db += Σ dy` and returns `dx = dy wᵀ` when asked.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<F: Scalar>(
    x: &[F],
    n: usize,
    din: usize,
    w: &[F],
    dout: usize,
    dy: &[F],
    dw: &mut [F],
    db: Option<&mut [F]>,
    want_dx: bool,
) -> Option<Vec<F>> {
    for r in 0..n {
        let dyr = &dy[r * dout..(r + 1) * dout];
        for (k, &xk) in x[r * din..(r + 1) * din].iter().enumerate() {
            if xk == F::zero() {
                continue;
            }
            let dwk = &mut dw[k * dout..(k + 1) * dout];
            for (g, &d) in dwk.iter_mut().zip(dyr) {
                *g = *g + xk * d;
            }
        }
    }
    if let Some(db) = db {
        for r in 0..n {
            for (g, &d) in db.iter_mut().zip(&dy[r * dout..(r + 1) * dout]) {
                *g = *g + d;
            }
        }
    }
    want_dx.then(|| {
        let mut dx = vec![F::zero(); n * din];
        for r in 0..n {
            let dyr = &dy[r * dout..(r + 1) * dout];
            for k in 0..din {
                dx[r * din + k] = dot(dyr, &w[k * dout..(k + 1) * dout]);
            }
        }
        dx
    })
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + x * y)
}

/// Normalized rows and reciprocal standard deviations, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LnCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

pub fn layer_norm<F: Scalar>(x: &[F], n: usize, d: usize, g: &[F], b: &[F]) -> (Vec<F>, LnCache<F>) {
    let eps = F::from(LN_EPS).unwrap();
    let inv_d = F::one() / F::from(d).unwrap();
    let mut y = vec![F::zero(); n * d];
    let mut xhat = vec![F::zero(); n * d];
    let mut rstd = vec![F::zero(); n];
    for r in 0..n {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().fold(F::zero(), |s, &v| s + v) * inv_d;
        let var = xr.iter().fold(F::zero(), |s, &v| s + (v - mean) * (v - mean)) * inv_d;
        let rs = F::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let h = (xr[c] - mean) * rs;
            xhat[r * d + c] = h;
            y[r * d + c] = g[c] * h + b[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

pub fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    n: usize,
    d: usize,
    g: &[F],
    cache: &LnCache<F>,
    dg: &mut [F],
    db: &mut [F],
) -> Vec<F> {
    let inv_d = F::one() / F::from(d).unwrap();
    let mut dx = vec![F::zero(); n * d];
    let mut dxhat = vec![F::zero(); d];
    for r in 0..n {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for c in 0..d {
            dg[c] = dg[c] + dyr[c] * xh[c];
            db[c] = db[c] + dyr[c];
            dxhat[c] = dyr[c] * g[c];
        }
        let m1 = dxhat.iter().fold(F::zero(), |s, &v| s + v) * inv_d;
        let m2 = dot(&dxhat, xh) * inv_d;
        for c in 0..d {
            dx[r * d + c] = cache.rstd[r] * (dxhat[c] - m1 - xh[c] * m2);
        }
    }
    dx
}

fn gelu_consts<F: Scalar>() -> (F, F) {
    (F::from(0.797_884_560_802_865_4).unwrap(), F::from(0.044_715).unwrap())
}

/// Tanh approximation of GELU.
pub fn gelu<F: Scalar>(x: &[F]) -> Vec<F> {
    let (c, a) = gelu_consts::<F>();
    let half = F::from(0.5).unwrap();
    x.iter().map(|&v| half * v * (F::one() + (c * (v + a * v * v * v)).tanh())).collect()
}

pub fn gelu_backward<F: Scalar>(x: &[F], dy: &[F]) -> Vec<F> {
    let (c, a) = gelu_consts::<F>();
    let half = F::from(0.5).unwrap();
    let three = F::from(3.0).unwrap();
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let t = (c * (v + a * v * v * v)).tanh();
            let dt = (F::one() - t * t) * c * (F::one() + three * a * v * v);
            d * (half * (F::one() + t) + half * v * dt)
        })
        .collect()
}

/// Softmax attention for all heads given projected `q` (`nq × d`), `k`, `v`
/// (`nk × d`). Returns the concatenated head outputs and the probabilities
/// (`heads × nq × nk`).
pub fn attention<F: Scalar>(q: &[F], k: &[F], v: &[F], nq: usize, nk: usize, d: usize, heads: usize) -> (Vec<F>, Vec<F>) {
    let dh = d / heads;
    let scale = F::one() / F::from(dh).unwrap().sqrt();
    let mut out = vec![F::zero(); nq * d];
    let mut probs = vec![F::zero(); heads * nq * nk];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..nq {
            let qi = &q[i * d + off..i * d + off + dh];
            let p = &mut probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            let mut mx = F::neg_infinity();
            for j in 0..nk {
                let s = dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
                p[j] = s;
                mx = mx.max(s);
            }
            let mut sum = F::zero();
            for pj in p.iter_mut() {
                *pj = (*pj - mx).exp();
                sum = sum + *pj;
            }
            let inv = F::one() / sum;
            let oi = &mut out[i * d + off..i * d + off + dh];
            for j in 0..nk {
                p[j] = p[j] * inv;
                let vj = &v[j * d + off..j * d + off + dh];
                for (o, &x) in oi.iter_mut().zip(vj) {
                    *o = *o + p[j] * x;
                }
            }
        }
    }
    (out, probs)
}

/// Gradients of [`attention`] with respect to `q`, `k` and `v`.
#[allow(clippy::too_many_arguments)]
pub fn attention_backward<F: Scalar>(
    dout: &[F],
    q: &[F],
    k: &[F],
    v: &[F],
    probs: &[F],
    nq: usize,
    nk: usize,
    d: usize,
    heads: usize,
) -> (Vec<F>, Vec<F>, Vec<F>) {
    let dh = d / heads;
    let scale = F::one() / F::from(dh).unwrap().sqrt();
    let mut dq = vec![F::zero(); nq * d];
    let mut dk = vec![F::zero(); nk * d];
    let mut dv = vec![F::zero(); nk * d];
    let mut ds = vec![F::zero(); nk];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..nq {
            let doi = &dout[i * d + off..i * d + off + dh];
            let p = &probs[(h * nq + i) * nk..(h * nq + i + 1) * nk];
            let mut inner = F::zero();
            for j in 0..nk {
                let dp = dot(doi, &v[j * d + off..j * d + off + dh]);
                ds[j] = dp;
                inner = inner + dp * p[j];
                let dvj = &mut dv[j * d + off..j * d + off + dh];
                for (g, &x) in dvj.iter_mut().zip(doi) {
                    *g = *g + p[j] * x;
                }
            }
            let qi = &q[i * d + off..i * d + off + dh];
            for j in 0..nk {
                let s = p[j] * (ds[j] - inner) * scale;
                if s == F::zero() {
                    continue;
                }
                let kj = &k[j * d + off..j * d + off + dh];
                let dqi = &mut dq[i * d + off..i * d + off + dh];
                for (g, &x) in dqi.iter_mut().zip(kj) {
                    *g = *g + s * x;
                }
                let dkj = &mut dk[j * d + off..j * d + off + dh];
                for (g, &x) in dkj.iter_mut().zip(qi) {
                    *g = *g + s * x;
                }
            }
        }
    }
    (dq, dk, dv)
}

pub fn add_assign<F: Scalar>(a: &mut [F], b: &[F]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = *x + y;
    }
}
