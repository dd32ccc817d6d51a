//! Rayleigh channels, decoding order and ordered/truncated channel statistics.
//!
//! Scales follow `E|h|² = σ²`: the gain `|h|` has density `(2x/σ²)e^{-x²/σ²}`
//! and each real component is normal with variance `σ²/2`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::gaussfit::{GaussTerm, GaussianMixture};
use crate::{Error, Result};

/// Per-UE Rayleigh scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    scales: Vec<f64>,
}

impl ChannelParams {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Domain { op: "ChannelParams::new", reason: "scales must be positive and finite" });
        }
        Ok(Self { scales })
    }

    /// Two UEs from average powers `σ₁², σ₂²` in dB.
    pub fn two_ue_db(power1_db: f64, power2_db: f64) -> Result<Self> {
        Self::new(vec![libm::sqrt(crate::db_to_linear(power1_db)), libm::sqrt(crate::db_to_linear(power2_db))])
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn scale(&self, ue: usize) -> f64 {
        self.scales[ue]
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    fn require_two(&self, op: &'static str) -> Result<(f64, f64)> {
        if self.scales.len() != 2 {
            return Err(Error::Domain { op, reason: "two-UE parameters required" });
        }
        Ok((self.scales[0], self.scales[1]))
    }
}

/// Channel draw plus the decoding order (strongest first).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub order: Vec<usize>,
}

/// Draws `CN(0, σ²)` per UE and sorts by descending `|h|`, ties to the lower index.
pub fn sample_channels<R: RngCore + ?Sized>(params: &ChannelParams, rng: &mut R) -> ChannelRealization {
    let gains: Vec<Complex64> = params.scales.iter().map(|&s| complex_gaussian(s, rng)).collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&i, &j| gains[j].norm_sqr().total_cmp(&gains[i].norm_sqr()).then(i.cmp(&j)));
    ChannelRealization { gains, order }
}

/// One `CN(0, σ²)` draw.
pub(crate) fn complex_gaussian<R: RngCore + ?Sized>(scale: f64, rng: &mut R) -> Complex64 {
    let s = scale * core::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn check_x(x: f64, op: &'static str) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain { op, reason: "gain must be nonnegative" });
    }
    Ok(())
}

/// Rayleigh density `(2x/σ²)e^{-x²/σ²}`.
pub fn rayleigh_pdf(x: f64, scale: f64) -> f64 {
    let s2 = scale * scale;
    2.0 * x / s2 * libm::exp(-x * x / s2)
}

/// Rayleigh CDF `1 - e^{-x²/σ²}`.
pub fn rayleigh_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -libm::expm1(-x * x / (scale * scale))
}

/// Relative scale gap below which the strong-order density switches to its limit.
pub const EQUAL_SCALE_GAP: f64 = 1e-9;

/// Gain density of a UE decoded first, in its two-exponential form.
///
/// Symmetric in the two scales. Near equal scales the `x³` limit is used.
pub fn pdf_ordered_gain_strong(x: f64, own: f64, other: f64) -> Result<f64> {
    check_x(x, "pdf_ordered_gain_strong")?;
    Ok(RadialDensity::strong_two_exponential(own, other).eval(x))
}

/// Gain density of a UE decoded second: the plain Rayleigh form.
pub fn pdf_ordered_gain_weak(x: f64, own: f64) -> Result<f64> {
    check_x(x, "pdf_ordered_gain_weak")?;
    Ok(rayleigh_pdf(x, own))
}

/// `P(|h_n| ≥ |h_m|) = σ_n²/(σ_n² + σ_m²)`.
pub fn order_probability(own: f64, other: f64) -> f64 {
    let (a, b) = (own * own, other * other);
    a / (a + b)
}

/// Largest number of variables for the exact subset enumeration.
pub const MAX_ORDER_STAT_VARIABLES: usize = 12;

/// CDF of the `rank`-th smallest of independent variables with the given CDFs.
///
/// Rank 1 is the minimum, `1 - ∏(1-F_i)`, and rank `N` the maximum, `∏F_i`.
/// Other ranks sum `∏_{j∈S}F_j ∏_{j∉S}(1-F_j)` over all subsets with at least
/// `rank` members, which is the permanent expansion.
pub fn order_statistic_cdf(x: f64, rank: usize, cdfs: &[&dyn Fn(f64) -> f64]) -> Result<f64> {
    let n = cdfs.len();
    if n > MAX_ORDER_STAT_VARIABLES {
        return Err(Error::Size { size: n, max: MAX_ORDER_STAT_VARIABLES });
    }
    if rank == 0 || rank > n {
        return Err(Error::Domain { op: "order_statistic_cdf", reason: "rank out of range" });
    }
    let f: Vec<f64> = cdfs.iter().map(|c| c(x).clamp(0.0, 1.0)).collect();
    if rank == 1 {
        return Ok(1.0 - f.iter().map(|v| 1.0 - v).product::<f64>());
    }
    if rank == n {
        return Ok(f.iter().product());
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if (mask.count_ones() as usize) < rank {
            continue;
        }
        total += (0..n).map(|j| if mask & (1 << j) != 0 { f[j] } else { 1.0 - f[j] }).product::<f64>();
    }
    Ok(total.clamp(0.0, 1.0))
}

/// One term `weight·x^power·e^{-x²/scale²}` of a gain density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTerm {
    pub weight: f64,
    pub power: u32,
    pub scale: f64,
}

/// Gain density on `[0, ∞)` written as a sum of [`RadialTerm`]s, which is the
/// shape every ordered-gain density here takes. The closed-form error
/// probabilities integrate term by term.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    terms: Vec<RadialTerm>,
}

impl RadialDensity {
    pub fn new(terms: Vec<RadialTerm>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|t| !(t.scale > 0.0) || !t.weight.is_finite() || (t.power != 1 && t.power != 3)) {
            return Err(Error::Domain { op: "RadialDensity::new", reason: "terms need positive scale and odd power 1 or 3" });
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[RadialTerm] {
        &self.terms
    }

    pub fn rayleigh(scale: f64) -> Self {
        Self { terms: vec![RadialTerm { weight: 2.0 / (scale * scale), power: 1, scale }] }
    }

    /// `(2x/(σ_n²-σ_m²))[e^{-x²/σ_n²} - e^{-x²/σ_m²}]`, or `(2x³/σ_n⁴)e^{-x²/σ_n²}`
    /// when the scales are within [`EQUAL_SCALE_GAP`].
    pub fn strong_two_exponential(own: f64, other: f64) -> Self {
        let (a, b) = (own * own, other * other);
        if (a - b).abs() < EQUAL_SCALE_GAP * a {
            return Self { terms: vec![RadialTerm { weight: 2.0 / (a * a), power: 3, scale: own }] };
        }
        let w = 2.0 / (a - b);
        Self { terms: vec![RadialTerm { weight: w, power: 1, scale: own }, RadialTerm { weight: -w, power: 1, scale: other }] }
    }

    /// Exact density of `|h_n|` given `|h_n| ≥ |h_m|`: `f_n(x)F_m(x)/P`.
    pub fn strong_exact(own: f64, other: f64) -> Self {
        let p = order_probability(own, other);
        let w = 2.0 / (own * own * p);
        let joint = combined_scale(own, other);
        Self { terms: vec![RadialTerm { weight: w, power: 1, scale: own }, RadialTerm { weight: -w, power: 1, scale: joint }] }
    }

    /// Exact density of `|h_n|` given `|h_n| ≤ |h_m|`: Rayleigh with
    /// `1/σ² = 1/σ_n² + 1/σ_m²`.
    pub fn weak_exact(own: f64, other: f64) -> Self {
        Self::rayleigh(combined_scale(own, other))
    }

    /// Density at `x ≥ 0`.
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let u = x / t.scale;
                t.weight * libm::pow(x, t.power as f64) * libm::exp(-u * u)
            })
            .sum()
    }

    /// Odd continuation `f(-x) = -f(x)` of the same expression onto the real line.
    pub fn eval_odd(&self, x: f64) -> f64 {
        if x >= 0.0 { self.eval(x) } else { -self.eval(-x) }
    }

    /// Closed-form `∫₀^∞ f`.
    pub fn mass(&self) -> f64 {
        // ∫ x e^{-x²/s²} = s²/2, ∫ x³ e^{-x²/s²} = s⁴/2.
        self.terms.iter().map(|t| t.weight * libm::pow(t.scale, t.power as f64 + 1.0) / 2.0).sum()
    }
}

/// `σ` with `1/σ² = 1/σ_a² + 1/σ_b²`.
pub fn combined_scale(a: f64, b: f64) -> f64 {
    1.0 / libm::sqrt(1.0 / (a * a) + 1.0 / (b * b))
}

/// How the ordered-gain densities are approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainForm {
    /// Two-exponential strong-order form and Rayleigh weak-order form, with
    /// the scale adjustments below.
    Approximate,
    /// Exact conditional densities.
    Exact,
}

/// Scale offset used when the weaker-average UE is decoded first.
pub const SCALE_PERTURBATION: f64 = 1e-5;

/// Gain density of `ue` at decoding position `order ∈ {1, 2}`.
///
/// The approximate form follows the modelling choices of the closed-form
/// analysis. A weaker-average UE decoded first uses the two-exponential form
/// with the other scale replaced by its own plus `SCALE_PERTURBATION/2`,
/// which is the `x³` limit shape. A stronger-average UE decoded second is
/// modelled by the Rayleigh law of the other UE. Otherwise the printed
/// strong form and the own-scale Rayleigh law apply.
pub fn ordered_gain_density(ue: usize, order: usize, params: &ChannelParams, form: GainForm) -> Result<RadialDensity> {
    let (s1, s2) = params.require_two("ordered_gain_density")?;
    if ue > 1 || !(order == 1 || order == 2) {
        return Err(Error::Domain { op: "ordered_gain_density", reason: "ue must be 0 or 1 and order 1 or 2" });
    }
    let (own, other) = if ue == 0 { (s1, s2) } else { (s2, s1) };
    Ok(match (form, order) {
        (GainForm::Exact, 1) => RadialDensity::strong_exact(own, other),
        (GainForm::Exact, _) => RadialDensity::weak_exact(own, other),
        (GainForm::Approximate, 1) if own >= other => RadialDensity::strong_two_exponential(own, other),
        (GainForm::Approximate, 1) => RadialDensity::strong_two_exponential(own, own + 0.5 * SCALE_PERTURBATION),
        (GainForm::Approximate, _) if own > other => RadialDensity::rayleigh(other),
        (GainForm::Approximate, _) => RadialDensity::rayleigh(own),
    })
}

/// Exact density of `ℜ{h_m}` given the decoding position of UE `m`, as a
/// Gaussian sum.
///
/// Decoded second it is normal with variance `σ'²/2`, `1/σ'² = 1/σ_m² + 1/σ_n²`.
/// Decoded first it is `[φ_m(x) - (σ'/σ_m)·e^{-x²/σ'²}/(√π σ_m)]/P` with
/// `φ_m` the `N(0, σ_m²/2)` density and `P` the order probability.
pub fn real_part_mixture_exact(ue: usize, order: usize, params: &ChannelParams) -> Result<GaussianMixture> {
    let (s1, s2) = params.require_two("real_part_mixture_exact")?;
    if ue > 1 || !(order == 1 || order == 2) {
        return Err(Error::Domain { op: "real_part_mixture_exact", reason: "ue must be 0 or 1 and order 1 or 2" });
    }
    let (own, other) = if ue == 0 { (s1, s2) } else { (s2, s1) };
    let joint = combined_scale(own, other);
    let rp = libm::sqrt(PI);
    if order == 2 {
        return GaussianMixture::single(1.0 / (rp * joint), 0.0, joint);
    }
    let p = order_probability(own, other);
    GaussianMixture::new(vec![
        GaussTerm { a: 1.0 / (rp * own * p), b: 0.0, c: own },
        GaussTerm { a: -joint / (rp * own * own * p), b: 0.0, c: joint },
    ])
}

/// Real part of the unconditioned channel as a one-term mixture.
pub fn real_part_mixture_unconditioned(ue: usize, params: &ChannelParams) -> Result<GaussianMixture> {
    let s = params.scale(ue);
    GaussianMixture::normal(s * s / 2.0)
}

const PILOT_DRAWS: usize = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Rejection-samples `ℜ{h_ue}` given that `ue` sits at `order` (1 = decoded
/// first, i.e. `|h_ue| ≥ |h_other|`).
///
/// A pilot batch estimates the acceptance rate first and refuses events rarer
/// than `1e-4`.
pub fn sample_conditioned_real_part<R: RngCore + ?Sized>(
    ue: usize,
    order: usize,
    params: &ChannelParams,
    rng: &mut R,
    count: usize,
) -> Result<Vec<f64>> {
    sample_conditioned(ue, order, params, rng, count, |h| h.re)
}

/// Rejection-samples `|h_ue|` given its decoding position.
pub fn sample_conditioned_gain<R: RngCore + ?Sized>(
    ue: usize,
    order: usize,
    params: &ChannelParams,
    rng: &mut R,
    count: usize,
) -> Result<Vec<f64>> {
    sample_conditioned(ue, order, params, rng, count, |h| h.norm())
}

fn sample_conditioned<R: RngCore + ?Sized>(
    ue: usize,
    order: usize,
    params: &ChannelParams,
    rng: &mut R,
    count: usize,
    pick: impl Fn(Complex64) -> f64,
) -> Result<Vec<f64>> {
    let (s1, s2) = params.require_two("sample_conditioned")?;
    if ue > 1 || !(order == 1 || order == 2) || count == 0 {
        return Err(Error::Domain { op: "sample_conditioned", reason: "ue 0/1, order 1/2 and count ≥ 1 required" });
    }
    let (own, other) = if ue == 0 { (s1, s2) } else { (s2, s1) };
    // Ties go to UE 1, matching the decoding order.
    let holds = |h: Complex64, g: Complex64| {
        let (a, b) = (h.norm_sqr(), g.norm_sqr());
        let first = if ue == 0 { a >= b } else { a > b };
        (order == 1) == first
    };
    let mut out = Vec::with_capacity(count);
    let mut accepted = 0;
    for _ in 0..PILOT_DRAWS {
        let h = complex_gaussian(own, rng);
        let g = complex_gaussian(other, rng);
        if holds(h, g) {
            accepted += 1;
            if out.len() < count {
                out.push(pick(h));
            }
        }
    }
    let rate = accepted as f64 / PILOT_DRAWS as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Feasibility { acceptance: rate });
    }
    while out.len() < count {
        let h = complex_gaussian(own, rng);
        let g = complex_gaussian(other, rng);
        if holds(h, g) {
            out.push(pick(h));
        }
    }
    Ok(out)
}
