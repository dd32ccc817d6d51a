//! Special functions, semi-infinite quadrature and empirical densities.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

/// Weights and exponents of the two-exponential tail approximation
/// `Q(x) ≈ Σ w·exp(-λ·x²)`.
pub const CHIANI_TERMS: [(f64, f64); 2] = [(1.0 / 12.0, 0.5), (0.25, 2.0 / 3.0)];

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `P(Z > x)`, unchecked.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Gaussian tail probability `P(Z > x)` for a standard normal `Z`.
pub fn q_exact(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain { op: "q_exact", reason: "argument must be finite" });
    }
    Ok(normal_sf(x))
}

/// The two-exponential approximation of the Gaussian tail, valid for `x ≥ 0`.
pub fn q_chiani(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain { op: "q_chiani", reason: "argument must be nonnegative" });
    }
    Ok(chiani_tail(x))
}

/// Evaluates the two-exponential sum without the sign check.
pub(crate) fn chiani_tail(x: f64) -> f64 {
    CHIANI_TERMS.iter().map(|&(w, l)| w * libm::exp(-l * x * x)).sum()
}

/// Settings for adaptive Gauss–Kronrod integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_panels: 2000 }
    }
}

impl Quadrature {
    pub fn new(rel_tol: f64, abs_tol: f64, max_panels: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::Domain { op: "Quadrature::new", reason: "relative tolerance must lie in (0, 1)" });
        }
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(Error::Domain { op: "Quadrature::new", reason: "absolute tolerance must be positive" });
        }
        if max_panels == 0 {
            return Err(Error::Domain { op: "Quadrature::new", reason: "need at least one panel" });
        }
        Ok(Self { rel_tol, abs_tol, max_panels })
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn max_panels(&self) -> usize {
        self.max_panels
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15 tables).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * libm::pow(200.0 * error / res_asc, 1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { lo, hi, value, error }
}

fn adaptive<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, quad: &Quadrature) -> Result<f64> {
    let mut panels: Vec<Panel> = vec![kronrod15(&mut f, lo, hi)];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !total.is_finite() {
            return Err(Error::Convergence { estimate: total, error, panels: panels.len() });
        }
        if error <= quad.abs_tol.max(quad.rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= quad.max_panels {
            return Err(Error::Convergence { estimate: total, error, panels: panels.len() });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // The panel cannot be split further in floating point.
            return Err(Error::Convergence { estimate: total, error, panels: panels.len() + 1 });
        }
        panels.push(kronrod15(&mut f, p.lo, mid));
        panels.push(kronrod15(&mut f, mid, p.hi));
    }
}

/// Integrates `f` over `[0, ∞)` after mapping `x = t/(1-t)` onto `(0, 1)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, quad: &Quadrature) -> Result<f64> {
    adaptive(
        |t| {
            let s = 1.0 - t;
            let x = t / s;
            let v = f(x);
            if v == 0.0 { 0.0 } else { v / (s * s) }
        },
        0.0,
        1.0,
        quad,
    )
}

/// Integrates `f` over the whole real line as two mapped half-lines.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, quad: &Quadrature) -> Result<f64> {
    let right = integrate_semi_infinite(&f, quad)?;
    let left = integrate_semi_infinite(|x| f(-x), quad)?;
    Ok(right + left)
}

/// Integrates `f` over the finite interval `[lo, hi]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, quad: &Quadrature) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain { op: "integrate_interval", reason: "bounds must be finite" });
    }
    if lo == hi {
        return Ok(0.0);
    }
    adaptive(f, lo, hi, quad)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Bivariate normal upper orthant `P(X > h, Y > k)` with correlation `rho`.
///
/// Genz's double-precision algorithm (Drezner–Wesolowsky with Gauss–Legendre
/// panels and an asymptotic expansion for |rho| ≥ 0.925).
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { normal_sf(k) };
    }
    if k == f64::NEG_INFINITY {
        return normal_sf(h);
    }
    let order = if rho.abs() < 0.3 {
        6
    } else if rho.abs() < 0.75 {
        12
    } else {
        20
    };
    let (gx, gw) = gauss_legendre(order);
    // Negative half of the symmetric rule.
    let half: Vec<(f64, f64)> = gx.iter().zip(gw.iter()).take(order / 2).map(|(&x, &w)| (x, w)).collect();

    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if rho.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = libm::asin(rho);
        for &(x, w) in &half {
            for sgn in [-1.0, 1.0] {
                let sn = libm::sin(asr * (1.0 + sgn * x) / 2.0);
                bvn += w * libm::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / (4.0 * PI) + normal_sf(h) * normal_sf(k);
    } else {
        if rho < 0.0 {
            k = -k;
            hk = -hk;
        }
        if rho.abs() < 1.0 {
            let as_ = (1.0 - rho) * (1.0 + rho);
            let mut a = libm::sqrt(as_);
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * libm::exp(asr)
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            }
            if hk > -100.0 {
                let b = libm::sqrt(bs);
                let sp = libm::sqrt(2.0 * PI) * normal_cdf(-b / a);
                bvn -= libm::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(x, w) in &half {
                for sgn in [-1.0, 1.0] {
                    let xs = (a + a * sgn * x) * (a + a * sgn * x);
                    let rs = libm::sqrt(1.0 - xs);
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = libm::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
                        bvn += a * w * libm::exp(asr) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if rho > 0.0 {
            bvn += normal_sf(h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 { normal_cdf(k) - normal_cdf(h) } else { normal_sf(h) - normal_sf(k) };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Histogram density estimate on ascending bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPdf {
    edges: Vec<f64>,
    densities: Vec<f64>,
    samples: usize,
}

impl EmpiricalPdf {
    pub fn new(edges: Vec<f64>, densities: Vec<f64>, samples: usize) -> Result<Self> {
        if edges.len() < 2 || densities.len() + 1 != edges.len() {
            return Err(Error::Domain { op: "EmpiricalPdf::new", reason: "need one density per bin" });
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain { op: "EmpiricalPdf::new", reason: "edges must be strictly increasing" });
        }
        if densities.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::Domain { op: "EmpiricalPdf::new", reason: "densities must be finite and nonnegative" });
        }
        let pdf = Self { edges, densities, samples };
        if (pdf.total_mass() - 1.0).abs() > 1e-6 {
            return Err(Error::Domain { op: "EmpiricalPdf::new", reason: "densities must integrate to one" });
        }
        Ok(pdf)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.edges.windows(2).zip(&self.densities).map(|(w, d)| (w[1] - w[0]) * d).sum()
    }

    /// Density of the bin containing `x`, zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.densities.len();
        if x < self.edges[0] || x > self.edges[n] {
            return 0.0;
        }
        let idx = self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1);
        self.densities[idx]
    }
}

/// Rice-rule bin count `⌈2·N^{1/3}⌉`.
pub fn rice_bins(samples: usize) -> usize {
    (libm::ceil(2.0 * libm::cbrt(samples as f64)) as usize).max(1)
}

/// Builds a normalized histogram with `bins` equal-width bins over the sample range.
pub fn histogram_pdf(samples: &[f64], bins: usize) -> Result<EmpiricalPdf> {
    histogram_pdf_padded(samples, bins, 0)
}

/// Like [`histogram_pdf`] with `pad` extra empty bins of the same width on each
/// side, so the end bins sit in the tails rather than on the extreme samples.
pub fn histogram_pdf_padded(samples: &[f64], bins: usize, pad: usize) -> Result<EmpiricalPdf> {
    if samples.is_empty() {
        return Err(Error::Domain { op: "histogram_pdf", reason: "empty sample set" });
    }
    if bins == 0 || samples.len() < 10 * bins {
        return Err(Error::Domain { op: "histogram_pdf", reason: "need at least ten samples per bin" });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain { op: "histogram_pdf", reason: "samples must be finite" });
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let (lo, hi, bins) = (lo - width * pad as f64, hi + width * pad as f64, bins + 2 * pad);
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let n = samples.len() as f64;
    let densities = edges.windows(2).zip(&counts).map(|(w, &c)| c as f64 / (n * (w[1] - w[0]))).collect();
    EmpiricalPdf::new(edges, densities, samples.len())
}

/// Kolmogorov–Smirnov distance between samples and a reference CDF. Sorts `samples`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let c = cdf(x);
        acc.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs())
    })
}
