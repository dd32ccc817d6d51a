//! Sums of Gaussian bumps fitted to empirical densities of truncated real parts.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::numerics::EmpiricalPdf;
use crate::{Error, Result};

/// One bump `a·exp(-(x-b)²/c²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussTerm {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.b) / self.c;
        self.a * libm::exp(-u * u)
    }

    /// Integral over the real line, `a·|c|·√π`.
    pub fn mass(&self) -> f64 {
        self.a * self.c.abs() * libm::sqrt(PI)
    }
}

/// Weighted sum of Gaussian bumps. Amplitudes may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    terms: Vec<GaussTerm>,
}

impl GaussianMixture {
    pub fn new(terms: Vec<GaussTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Domain { op: "GaussianMixture::new", reason: "need at least one term" });
        }
        if terms.iter().any(|t| !(t.a.is_finite() && t.b.is_finite() && t.c.is_finite()) || t.c == 0.0) {
            return Err(Error::Domain { op: "GaussianMixture::new", reason: "coefficients must be finite with c ≠ 0" });
        }
        Ok(Self { terms })
    }

    /// Single bump from `(a, b, c)`.
    pub fn single(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(vec![GaussTerm { a, b, c }])
    }

    /// Zero-mean normal density with the given variance as a one-term mixture.
    pub fn normal(variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Domain { op: "GaussianMixture::normal", reason: "variance must be positive" });
        }
        let c = libm::sqrt(2.0 * variance);
        Self::single(1.0 / (c * libm::sqrt(PI)), 0.0, c)
    }

    pub fn terms(&self) -> &[GaussTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Integral over the real line.
    pub fn mass(&self) -> f64 {
        self.terms.iter().map(GaussTerm::mass).sum()
    }

    /// Plain-text form: an `ng` line, then one `a b c` line per term.
    pub fn to_text(&self) -> String {
        let mut s = format!("ng {}\n", self.terms.len());
        for t in &self.terms {
            s.push_str(&format!("{:e} {:e} {:e}\n", t.a, t.b, t.c));
        }
        s
    }

    /// Parses the form written by [`GaussianMixture::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason| Error::Domain { op: "GaussianMixture::from_text", reason };
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or(bad("missing ng line"))?;
        let mut it = header.split_whitespace();
        if it.next() != Some("ng") {
            return Err(bad("first line must be `ng <count>`"));
        }
        let count: usize = it.next().and_then(|v| v.parse().ok()).ok_or(bad("bad term count"))?;
        let mut terms = Vec::with_capacity(count);
        for line in lines.by_ref().take(count) {
            let vals: Vec<f64> = line.split_whitespace().map(str::parse).collect::<core::result::Result<_, _>>().map_err(|_| bad("bad coefficient"))?;
            if vals.len() != 3 {
                return Err(bad("each term needs three coefficients"));
            }
            terms.push(GaussTerm { a: vals[0], b: vals[1], c: vals[2] });
        }
        if terms.len() != count || lines.next().is_some() {
            return Err(bad("term count does not match ng"));
        }
        Self::new(terms)
    }
}

/// Evaluates `Σ a_i·exp(-(x-b_i)²/c_i²)`.
pub fn eval_mixture(mix: &GaussianMixture, x: f64) -> f64 {
    mix.eval(x)
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    pub mixture: GaussianMixture,
    /// Root-mean-square residual over bin centres.
    pub rms: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;

fn residuals(params: &[f64], xs: &[f64], ys: &[f64], out: &mut [f64]) -> f64 {
    let mut cost = 0.0;
    for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let model: f64 = params.chunks_exact(3).map(|p| GaussTerm { a: p[0], b: p[1], c: p[2] }.eval(x)).sum();
        out[k] = model - y;
        cost += out[k] * out[k];
    }
    0.5 * cost
}

fn jacobian(params: &[f64], xs: &[f64], jac: &mut [f64]) {
    let np = params.len();
    for (k, &x) in xs.iter().enumerate() {
        for (i, p) in params.chunks_exact(3).enumerate() {
            let (a, b, c) = (p[0], p[1], p[2]);
            let u = (x - b) / c;
            let e = libm::exp(-u * u);
            jac[k * np + 3 * i] = e;
            jac[k * np + 3 * i + 1] = a * e * 2.0 * u / c;
            jac[k * np + 3 * i + 2] = a * e * 2.0 * u * u / c;
        }
    }
}

// Gaussian elimination with partial pivoting on a small dense system.
fn solve(mut m: Vec<f64>, mut rhs: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
            }
            rhs.swap(piv, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for j in col..n {
                m[row * n + j] -= f * m[col * n + j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|j| m[row * n + j] * x[j]).sum();
        x[row] = (rhs[row] - s) / m[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn initial_guess(pdf: &EmpiricalPdf, components: usize) -> Vec<f64> {
    let centers = pdf.centers();
    let widths: Vec<f64> = pdf.edges().windows(2).map(|w| w[1] - w[0]).collect();
    let dens = pdf.densities();
    let mass: f64 = dens.iter().zip(&widths).map(|(d, w)| d * w).sum();
    let mean: f64 = centers.iter().zip(dens).zip(&widths).map(|((x, d), w)| x * d * w).sum::<f64>() / mass;
    let var: f64 =
        centers.iter().zip(dens).zip(&widths).map(|((x, d), w)| (x - mean) * (x - mean) * d * w).sum::<f64>() / mass;
    let std = libm::sqrt(var);
    let peak = dens.iter().copied().fold(0.0, f64::max);
    let c = libm::sqrt(2.0) * std;
    let mut p = vec![peak, mean, c];
    if components == 3 {
        p.extend_from_slice(&[peak / 4.0, mean - std, c, peak / 4.0, mean + std, c]);
    }
    p
}

/// Fits `components ∈ {1, 3}` Gaussian bumps to the bin-centre densities by
/// damped Gauss–Newton (Levenberg–Marquardt).
///
/// The moment-based start is deterministic, so refitting the same histogram
/// reproduces the coefficients bit for bit.
pub fn fit_mixture(pdf: &EmpiricalPdf, components: usize) -> Result<MixtureFit> {
    if components != 1 && components != 3 {
        return Err(Error::Domain { op: "fit_mixture", reason: "component count must be 1 or 3" });
    }
    if pdf.bins() < 30 {
        return Err(Error::Domain { op: "fit_mixture", reason: "need at least 30 bins" });
    }
    let dens = pdf.densities();
    let peak = dens.iter().copied().fold(0.0, f64::max);
    if dens[0] >= 1e-4 * peak || dens[dens.len() - 1] >= 1e-4 * peak {
        return Err(Error::Domain { op: "fit_mixture", reason: "histogram does not cover the tails" });
    }
    let xs = pdf.centers();
    let ys = dens.to_vec();
    let k = xs.len();
    let mut params = initial_guess(pdf, components);
    let np = params.len();

    let mut r = vec![0.0; k];
    let mut cost = residuals(&params, &xs, &ys, &mut r);
    let mut jac = vec![0.0; k * np];
    let mut trial_r = vec![0.0; k];
    let mut lambda = 1e-3;
    let finish = |params: &[f64], cost: f64, iterations: usize| -> Result<MixtureFit> {
        let terms = params.chunks_exact(3).map(|p| GaussTerm { a: p[0], b: p[1], c: p[2].abs() }).collect();
        Ok(MixtureFit { mixture: GaussianMixture::new(terms)?, rms: libm::sqrt(2.0 * cost / k as f64), iterations })
    };

    for iter in 0..MAX_ITERATIONS {
        jacobian(&params, &xs, &mut jac);
        let mut grad = vec![0.0; np];
        let mut normal = vec![0.0; np * np];
        for row in 0..k {
            let jr = &jac[row * np..(row + 1) * np];
            for i in 0..np {
                grad[i] += jr[i] * r[row];
                for j in 0..np {
                    normal[i * np + j] += jr[i] * jr[j];
                }
            }
        }
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) <= GRADIENT_TOL {
            return finish(&params, cost, iter);
        }
        loop {
            let mut damped = normal.clone();
            for i in 0..np {
                damped[i * np + i] += lambda * normal[i * np + i].max(1e-12);
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = solve(damped, rhs, np);
            if let Some(step) = step {
                let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
                let valid = trial.chunks_exact(3).all(|p| p[2].abs() > 1e-12);
                let trial_cost = if valid { residuals(&trial, &xs, &ys, &mut trial_r) } else { f64::INFINITY };
                if trial_cost < cost {
                    let step_norm = libm::sqrt(step.iter().map(|s| s * s).sum::<f64>());
                    let par_norm = libm::sqrt(trial.iter().map(|s| s * s).sum::<f64>());
                    params = trial;
                    core::mem::swap(&mut r, &mut trial_r);
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    if step_norm <= STEP_TOL * (par_norm + STEP_TOL) {
                        return finish(&params, cost, iter + 1);
                    }
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent direction left at working precision: a stationary point.
                return finish(&params, cost, iter + 1);
            }
        }
    }
    let best = params.chunks_exact(3).map(|p| (p[0], p[1], p[2].abs())).collect();
    Err(Error::Fit { iterations: MAX_ITERATIONS, rms: libm::sqrt(2.0 * cost / k as f64), best })
}
