//! Eigenvalues of the dense first-order operator with per-eigenvalue
//! residual verification.
//!
//! Pipeline: diagonal balancing, Householder reduction to Hessenberg form,
//! Francis double-shift QR for the eigenvalues, then a few steps of inverse
//! iteration on the Hessenberg matrix to recover an eigenvector for each
//! eigenvalue so that `‖A x − λ x‖` can be measured on the original matrix.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Hessenberg};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::{dense_operator, SecondOrderSystem};
use crate::model::Gains;
use crate::{output, Error, Result};

/// Largest accepted `‖A x − λ x‖ / (‖A‖·‖x‖)`.
pub const RESIDUAL_BOUND: f64 = 1e-8;

const MAX_QR_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Relative residual of each eigenvalue, same order as `eigenvalues`.
    pub residuals: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub gains: Gains,
    /// Frobenius norm of the operator.
    pub norm: f64,
    /// Trace of the operator.
    pub trace: f64,
}

/// Spectrum of `dense_operator(sys)`. The seed drives the inverse-iteration
/// start vectors.
pub fn eigenvalues(sys: &SecondOrderSystem, seed: u64) -> Result<Spectrum> {
    let a = dense_operator(sys);
    let (eigenvalues, residuals) = eigen_verified(&a, seed)?;
    Ok(Spectrum {
        eigenvalues,
        residuals,
        n1: sys.grid.n1,
        n2: sys.grid.n2,
        gains: sys.gains,
        norm: a.norm(),
        trace: a.trace(),
    })
}

/// Eigenvalues of a real square matrix, sorted by imaginary then real part,
/// each with its verified relative residual.
pub fn eigen_verified(a: &DMatrix<f64>, seed: u64) -> Result<(Vec<Complex64>, Vec<f64>)> {
    assert!(a.is_square(), "eigenvalues need a square matrix");
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let norm = a.norm();
    let (b, scale) = balance(a);
    let (q, h) = Hessenberg::new(b).unpack();
    let mut lambdas = hqr(h.clone())?;
    lambdas.sort_by(|x, y| x.im.total_cmp(&y.im).then(x.re.total_cmp(&y.re)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = Vec::with_capacity(n);
    for (index, &lambda) in lambdas.iter().enumerate() {
        let residual = if norm == 0.0 {
            0.0
        } else {
            let y = inverse_iteration(&h, lambda, &mut rng);
            let x = map_back(&q, &scale, &y);
            relative_residual(a, norm, lambda, &x)
        };
        if !(residual <= RESIDUAL_BOUND) {
            return Err(Error::Residual {
                index,
                residual,
                bound: RESIDUAL_BOUND,
            });
        }
        residuals.push(residual);
    }
    Ok((lambdas, residuals))
}

/// Diagonal similarity `B = D⁻¹ A D` with powers of two that equalizes row and
/// column norms. Returns `B` and the diagonal of `D`.
pub fn balance(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut b = a.clone();
    let mut scale = vec![1.0; n];
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                scale[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, scale)
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration with exceptional shifts.
fn hqr(mut h: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let nn = h.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); nn];
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    if norm == 0.0 {
        return Ok(out);
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            out[nu] = Complex64::new(h[(nu, nu)] + exshift, 0.0);
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let first = x + z;
                let second = if z != 0.0 { x - w / z } else { first };
                out[nu - 1] = Complex64::new(first, 0.0);
                out[nu] = Complex64::new(second, 0.0);
            } else {
                out[nu - 1] = Complex64::new(x + p, z);
                out[nu] = Complex64::new(x + p, -z);
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];

            if iter == 10 || iter == 50 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 || iter == 70 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > MAX_QR_SWEEPS {
                return Err(Error::NoConvergence { index: nu });
            }

            // Two consecutive small subdiagonal entries.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[(m, m - 1)].abs() * (q.abs() + r.abs());
                let rhs = eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[(k, k - 1)] = -s * x;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    p = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        p += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= p * z;
                    }
                    h[(k, j)] -= p * x;
                    h[(k + 1, j)] -= p * y;
                }
                for i in 0..=nu.min(k + 3) {
                    p = x * h[(i, k)] + y * h[(i, k + 1)];
                    if notlast {
                        p += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= p * r;
                    }
                    h[(i, k)] -= p;
                    h[(i, k + 1)] -= p * q;
                }
            }
        }
    }
    Ok(out)
}

/// Approximate null vector of `H − λI` for upper Hessenberg `H`, by three
/// steps of inverse iteration with an `O(n²)` adjacent-row pivoted LU.
fn inverse_iteration(h: &DMatrix<f64>, lambda: Complex64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let n = h.nrows();
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; n * n];
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            a[i * n + j] = Complex64::new(h[(i, j)], 0.0);
        }
        a[i * n + i] -= lambda;
    }
    let tiny = f64::EPSILON * h.norm().max(f64::MIN_POSITIVE);

    let mut swapped = vec![false; n];
    let mut mult = vec![zero; n];
    for k in 0..n.saturating_sub(1) {
        if a[(k + 1) * n + k].norm() > a[k * n + k].norm() {
            for j in k..n {
                a.swap(k * n + j, (k + 1) * n + j);
            }
            swapped[k] = true;
        }
        if a[k * n + k].norm() < tiny {
            a[k * n + k] = Complex64::new(tiny, 0.0);
        }
        let l = a[(k + 1) * n + k] / a[k * n + k];
        mult[k] = l;
        a[(k + 1) * n + k] = zero;
        if l != zero {
            for j in k + 1..n {
                let t = a[k * n + j];
                a[(k + 1) * n + j] -= l * t;
            }
        }
    }
    if a[(n - 1) * n + n - 1].norm() < tiny {
        a[(n - 1) * n + n - 1] = Complex64::new(tiny, 0.0);
    }

    let mut y: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    for _ in 0..3 {
        for k in 0..n.saturating_sub(1) {
            if swapped[k] {
                y.swap(k, k + 1);
            }
            let t = y[k];
            y[k + 1] -= mult[k] * t;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= a[i * n + j] * y[j];
            }
            y[i] = acc / a[i * n + i];
        }
        let nrm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 && nrm.is_finite() {
            for c in y.iter_mut() {
                *c /= nrm;
            }
        }
    }
    y
}

/// `x = D·Q·y`.
fn map_back(q: &DMatrix<f64>, scale: &[f64], y: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(y.len(), y.iter().map(|c| c.re));
    let im = DVector::from_iterator(y.len(), y.iter().map(|c| c.im));
    let xr = q * re;
    let xi = q * im;
    (0..y.len())
        .map(|i| Complex64::new(xr[i], xi[i]) * scale[i])
        .collect()
}

fn relative_residual(a: &DMatrix<f64>, norm: f64, lambda: Complex64, x: &[Complex64]) -> f64 {
    let n = x.len();
    let re = DVector::from_iterator(n, x.iter().map(|c| c.re));
    let im = DVector::from_iterator(n, x.iter().map(|c| c.im));
    let ar = a * re;
    let ai = a * im;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let d = Complex64::new(ar[i], ai[i]) - lambda * x[i];
        num += d.norm_sqr();
        den += x[i].norm_sqr();
    }
    if den == 0.0 {
        return f64::INFINITY;
    }
    num.sqrt() / (norm * den.sqrt())
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `|Σλ − tr A| / max(|tr A|, 1)`.
    pub fn trace_defect(&self) -> f64 {
        let sum: Complex64 = self.eigenvalues.iter().sum();
        (sum - Complex64::new(self.trace, 0.0)).norm() / self.trace.abs().max(1.0)
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of
    /// another (or the same, if real) eigenvalue.
    pub fn conjugate_defect(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| {
                self.eigenvalues
                    .iter()
                    .map(|m| (m.conj() - l).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_abs_re(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        output::write_csv(
            path,
            &["re", "im", "residual"],
            self.eigenvalues
                .iter()
                .zip(&self.residuals)
                .map(|(l, r)| [l.re, l.im, *r]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMetrics {
    pub abscissa: f64,
    pub min_gap: f64,
    /// `(|Im λ|, |Re λ|)` sorted by `|Im λ|`.
    pub gap_profile: Vec<(f64, f64)>,
}

/// Abscissa `max Re λ`, and `min |Re λ|` over the eigenvalues that are not
/// zero to working precision.
pub fn spectral_metrics(spec: &Spectrum) -> SpectralMetrics {
    let zero_tol = 1e-12 * spec.norm.max(1.0);
    let abscissa = spec
        .eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_gap = spec
        .eigenvalues
        .iter()
        .filter(|l| l.norm() > zero_tol)
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    let mut gap_profile: Vec<(f64, f64)> = spec
        .eigenvalues
        .iter()
        .map(|l| (l.im.abs(), l.re.abs()))
        .collect();
    gap_profile.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    SpectralMetrics {
        abscissa,
        min_gap,
        gap_profile,
    }
}
