//! Closed-form integrals behind the z-statistic densities and error probabilities.
//!
//! The statistic is `S = k1·U + k2·R`, with `z = S/√(2N₀)`, where `U` is the
//! desired UE's gain (a [`RadialDensity`]) and `R` the other UE's real part
//! (a [`GaussianMixture`]). The first decoding stage integrates `U` over the
//! whole line using the odd continuation of its density. The second stage
//! keeps `U ≥ 0`. Every term reduces to Gaussian moments of `Φ(a + bT)`,
//! which are elementary on the whole line and need one bivariate normal
//! orthant otherwise.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::channel::RadialDensity;
use crate::gaussfit::GaussianMixture;
use crate::numerics::{bvn_upper, normal_cdf, normal_pdf, normal_sf, CHIANI_TERMS};
use crate::{Error, Result};

/// Integration range of the gain variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainSupport {
    /// Odd continuation of the density onto the real line.
    OddExtension,
    /// The physical half-line `U ≥ 0`.
    HalfLine,
}

/// `E[T^k Φ(a + bT) 1{T > c}]` for `k = 0..=3` and `T ~ N(0, s²)`.
/// `lower = None` drops the indicator.
pub(crate) fn phi_moments(a: f64, b: f64, s: f64, lower: Option<f64>) -> [f64; 4] {
    let s2 = s * s;
    let q2 = 1.0 + b * b * s2;
    let q = libm::sqrt(q2);
    let k0_full = normal_pdf(a / q) / q;
    match lower {
        None => {
            let m0 = normal_cdf(a / q);
            let k1 = -s2 * a * b * k0_full / q2;
            let m1 = s2 * b * k0_full;
            let m2 = s2 * (m0 + b * k1);
            let k2 = s2 * (k0_full - a * b * k1) / q2;
            let m3 = s2 * (2.0 * m1 + b * k2);
            [m0, m1, m2, m3]
        }
        Some(c) => {
            let pc = normal_pdf(c / s) / s;
            let big_phi_c = normal_cdf(a + b * c);
            let small_phi_c = normal_pdf(a + b * c);
            let h0 = normal_sf(c / s) - bvn_upper(c / s, a / q, -b * s / q);
            let t_mean = -a * b * s2 / q2;
            let k0 = k0_full * normal_cdf((t_mean - c) * q / s);
            let k1 = s2 * (-a * b * k0 + small_phi_c * pc) / q2;
            let k2 = s2 * (k0 - a * b * k1 + c * small_phi_c * pc) / q2;
            let h1 = s2 * (b * k0 + big_phi_c * pc);
            let h2 = s2 * (h0 + b * k1 + c * big_phi_c * pc);
            let h3 = s2 * (2.0 * h1 + b * k2 + c * c * big_phi_c * pc);
            [h0, h1, h2, h3]
        }
    }
}

/// `E[(u0 + T)^p ·]` expanded from the moments, `p ∈ {1, 3}`.
fn shifted(power: u32, u0: f64, m: &[f64; 4]) -> f64 {
    match power {
        1 => u0 * m[0] + m[1],
        _ => u0 * u0 * u0 * m[0] + 3.0 * u0 * u0 * m[1] + 3.0 * u0 * m[2] + m[3],
    }
}

/// One contribution to a closed-form error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    /// Index of the gain-density term.
    pub gain_term: usize,
    /// Index of the interference-mixture term, if any.
    pub mixture_term: Option<usize>,
    /// Index of the tail-approximation exponential.
    pub tail_term: usize,
    /// Noise-weighted exponent `μ = λ/(2N₀)`.
    pub tail_exponent: f64,
    /// Variance inflation `1 + 2μτ²` from averaging the interference.
    pub inflation: f64,
    /// Gaussian precision of the gain variable after completing the square.
    pub precision: f64,
    /// Centre of that Gaussian.
    pub center: f64,
    /// Log of the exponential prefactor left after completing the square.
    pub log_scale: f64,
    /// Interference-term mass `a·|c|·√π`.
    pub mass: f64,
    /// Moment combination `E[(u0+T)^p Φ(·)]` (or the plain Gaussian moment).
    pub moment: f64,
    /// Weighted contribution to the error probability.
    pub value: f64,
}

/// Named intermediates of one closed-form evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermLedger {
    pub entries: Vec<LedgerEntry>,
}

impl TermLedger {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.value).sum()
    }
}

fn finite(v: f64, term: &'static str) -> Result<f64> {
    if v.is_finite() { Ok(v) } else { Err(Error::Evaluation { term }) }
}

/// Closed form of `E[Q̂(z) 1{z ≥ 0}]` with `Q̂` the two-exponential tail.
pub(crate) fn pep_ledger(
    gain: &RadialDensity,
    k1: f64,
    interference: Option<(&GaussianMixture, f64)>,
    support: GainSupport,
    n0: f64,
) -> Result<TermLedger> {
    let mut entries = Vec::new();
    for (j, &(w, lambda)) in CHIANI_TERMS.iter().enumerate() {
        let mu = lambda / (2.0 * n0);
        for (t, term) in gain.terms().iter().enumerate() {
            let alpha = 1.0 / (term.scale * term.scale);
            match interference {
                None => {
                    if support == GainSupport::OddExtension {
                        return Err(Error::Configuration("the odd continuation needs an interference term"));
                    }
                    // ∫₀^∞ u e^{-Au²} = 1/(2A), ∫₀^∞ u³ e^{-Au²} = 1/(2A²).
                    let precision = finite(alpha + mu * k1 * k1, "precision")?;
                    let moment = if term.power == 1 { 0.5 / precision } else { 0.5 / (precision * precision) };
                    let value = finite(w * term.weight * moment, "contribution")?;
                    entries.push(LedgerEntry {
                        gain_term: t,
                        mixture_term: None,
                        tail_term: j,
                        tail_exponent: mu,
                        inflation: 1.0,
                        precision,
                        center: 0.0,
                        log_scale: 0.0,
                        mass: 1.0,
                        moment,
                        value,
                    });
                }
                Some((mix, k2)) => {
                    for (i, g) in mix.terms().iter().enumerate() {
                        let shift = k2 * g.b;
                        let tau2 = 0.5 * k2 * k2 * g.c * g.c;
                        let inflation = 1.0 + 2.0 * mu * tau2;
                        let kappa = mu / inflation;
                        let rho = 1.0 / libm::sqrt(inflation * tau2);
                        let precision = finite(alpha + kappa * k1 * k1, "precision")?;
                        let center = -kappa * k1 * shift / precision;
                        let log_scale = -kappa * shift * shift * alpha / precision;
                        let sd = libm::sqrt(0.5 / precision);
                        let a = rho * (k1 * center + shift);
                        let b = rho * k1;
                        let lower = match support {
                            GainSupport::OddExtension => None,
                            GainSupport::HalfLine => Some(-center),
                        };
                        let m = phi_moments(a, b, sd, lower);
                        let moment = finite(shifted(term.power, center, &m), "moment")?;
                        let mass = g.mass();
                        let value = w * term.weight * mass / libm::sqrt(inflation)
                            * libm::exp(log_scale)
                            * libm::sqrt(PI / precision)
                            * moment;
                        let value = finite(value, "contribution")?;
                        entries.push(LedgerEntry {
                            gain_term: t,
                            mixture_term: Some(i),
                            tail_term: j,
                            tail_exponent: mu,
                            inflation,
                            precision,
                            center,
                            log_scale,
                            mass,
                            moment,
                            value,
                        });
                    }
                }
            }
        }
    }
    Ok(TermLedger { entries })
}

/// Density of `S = k1·U + k2·R` at `s`, in closed form.
pub(crate) fn statistic_density(
    s: f64,
    gain: &RadialDensity,
    k1: f64,
    interference: Option<(&GaussianMixture, f64)>,
    support: GainSupport,
) -> f64 {
    match interference {
        None => {
            let u = s / k1;
            let v = match support {
                GainSupport::HalfLine if u < 0.0 => 0.0,
                GainSupport::HalfLine => gain.eval(u),
                GainSupport::OddExtension => gain.eval_odd(u),
            };
            v / k1
        }
        Some((mix, k2)) => {
            let mut total = 0.0;
            for term in gain.terms() {
                let alpha = 1.0 / (term.scale * term.scale);
                for g in mix.terms() {
                    let beta = 1.0 / (k2 * k2 * g.c * g.c);
                    let y = s - k2 * g.b;
                    let precision = alpha + beta * k1 * k1;
                    let center = beta * k1 * y / precision;
                    let log_scale = -alpha * beta * y * y / precision;
                    let root = libm::sqrt(PI / precision);
                    let integral = match support {
                        GainSupport::OddExtension => {
                            let e = libm::exp(log_scale) * root;
                            if term.power == 1 {
                                e * center
                            } else {
                                e * (center * center * center + 1.5 * center / precision)
                            }
                        }
                        GainSupport::HalfLine => {
                            // J_p = u0 J_{p-1} + (p-1)/(2A) J_{p-2}, boundary term only for p = 1.
                            let j0 = libm::exp(log_scale) * root * normal_cdf(center * libm::sqrt(2.0 * precision));
                            let j1 = center * j0 + libm::exp(-beta * y * y) / (2.0 * precision);
                            if term.power == 1 {
                                j1
                            } else {
                                let j2 = center * j1 + j0 / (2.0 * precision);
                                center * j2 + j1 / precision
                            }
                        }
                    };
                    total += term.weight * g.a / k2.abs() * integral;
                }
            }
            total
        }
    }
}

/// Chiani tail continued to negative arguments by `Q(-x) = 1 - Q(x)`.
fn reflected_inner(nu: f64, mix: &GaussianMixture, k2: f64, n0: f64) -> f64 {
    let mut total = 0.0;
    for g in mix.terms() {
        let shift = k2 * g.b;
        let tau2 = 0.5 * k2 * k2 * g.c * g.c;
        let x = nu + shift;
        let tau = libm::sqrt(tau2);
        let mut v = normal_cdf(-x / tau);
        for &(w, lambda) in &CHIANI_TERMS {
            let mu = lambda / (2.0 * n0);
            let inflation = 1.0 + 2.0 * mu * tau2;
            let e = w * libm::exp(-mu * x * x / inflation) / libm::sqrt(inflation);
            let spread = libm::sqrt(inflation * tau2);
            v += e * (normal_cdf(x / spread) - normal_cdf(-x / spread));
        }
        total += g.mass() * v;
    }
    total
}

/// `E[Q̃(z)]` over the half-line gain, with `Q̃` the reflected tail, so that
/// negative statistics count as errors with probability `1 - Q̂(|z|)`.
pub(crate) fn pep_reflected(
    gain: &RadialDensity,
    k1: f64,
    interference: Option<(&GaussianMixture, f64)>,
    n0: f64,
    quad: &crate::numerics::Quadrature,
) -> Result<f64> {
    match interference {
        None => Ok(pep_ledger(gain, k1, None, GainSupport::HalfLine, n0)?.total()),
        Some((mix, k2)) => {
            crate::numerics::integrate_semi_infinite(|u| gain.eval(u) * reflected_inner(k1 * u, mix, k2, n0), quad)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_real_line, Quadrature};

    fn oracle(a: f64, b: f64, s: f64, lower: Option<f64>, k: i32) -> f64 {
        let quad = Quadrature::new(1e-12, 1e-15, 4000).unwrap();
        let f = |t: f64| {
            let inside = lower.is_none_or(|c| t > c);
            if inside { t.powi(k) * normal_cdf(a + b * t) * normal_pdf(t / s) / s } else { 0.0 }
        };
        match lower {
            None => integrate_real_line(f, &quad).unwrap(),
            Some(c) => crate::numerics::integrate_semi_infinite(|x| f(c + x), &quad).unwrap(),
        }
    }

    #[test]
    fn moments_match_quadrature() {
        for &(a, b, s) in &[(0.0, 0.0, 1.0), (0.3, 1.7, 0.8), (-1.2, 0.4, 2.5), (2.0, -3.0, 0.3)] {
            for lower in [None, Some(-0.7), Some(0.0), Some(0.9)] {
                let m = phi_moments(a, b, s, lower);
                for k in 0..4 {
                    let o = oracle(a, b, s, lower, k as i32);
                    assert!((m[k] - o).abs() < 1e-10 * (1.0 + o.abs()), "a {a} b {b} s {s} {lower:?} k {k}: {} vs {o}", m[k]);
                }
            }
        }
    }
}
