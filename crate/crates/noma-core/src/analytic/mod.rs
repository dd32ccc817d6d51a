//! Closed-form pairwise error probabilities and BER for two-UE uplink NOMA.
//!
//! Every error event is written through the decision statistic
//! `z = (k1·|h_n| + k2·ℜ{h_m}) / √(2N₀)`, where `k1 = √p·|Δ_n|` carries the
//! desired UE and `k2` the other UE's in-phase interference or residual.
//! The Chiani tail `Q̂` is then averaged against the density of `z`.

mod ber;
mod kernel;

pub use ber::{
    compose_ue_error, conditional_bit_error, enumerate_combinations, theory_ber, theory_ber_fixed, BranchErrors,
    InterferenceModel, SymbolCombination, TailFunction, TheoryConfig, TheoryPoint, UeBreakdown,
};
pub use kernel::{GainSupport, LedgerEntry, TermLedger};

use crate::channel::RadialDensity;
use crate::gaussfit::GaussianMixture;
use crate::numerics::{integrate_semi_infinite, q_chiani, Quadrature};
use crate::{db_to_linear, Error, Result};

/// Slack allowed on dB-quoted powers, which are rounded to two decimals.
pub const DB_SUM_SLACK: f64 = 0.01;

/// Power coefficients of the two decoding positions, `first > second > 0`,
/// summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    first: f64,
    second: f64,
}

impl PowerSplit {
    pub fn new(first: f64, second: f64) -> Result<Self> {
        if !(second > 0.0 && first > second) {
            return Err(Error::Domain { op: "PowerSplit::new", reason: "the first position needs strictly more power than the second" });
        }
        if (first + second - 1.0).abs() > 1e-12 {
            return Err(Error::Domain { op: "PowerSplit::new", reason: "power coefficients must sum to one" });
        }
        Ok(Self { first, second })
    }

    /// From dB values. The sum may be off by [`DB_SUM_SLACK`] and is
    /// renormalized, since quoted values like -2.22/-3.98 dB are rounded.
    pub fn from_db(first_db: f64, second_db: f64) -> Result<Self> {
        let (a, b) = (db_to_linear(first_db), db_to_linear(second_db));
        if !(a.is_finite() && b.is_finite()) || (a + b - 1.0).abs() > DB_SUM_SLACK {
            return Err(Error::Domain { op: "PowerSplit::from_db", reason: "powers must sum to one within 0.01" });
        }
        let s = a + b;
        Self::new(a / s, 1.0 - a / s)
    }

    /// From the ratio `first/second` in dB, which must be positive.
    pub fn from_ratio_db(ratio_db: f64) -> Result<Self> {
        let r = db_to_linear(ratio_db);
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::Domain { op: "PowerSplit::from_ratio_db", reason: "ratio must be a finite positive dB value" });
        }
        let first = r / (1.0 + r);
        Self::new(first, 1.0 - first)
    }

    pub fn first(&self) -> f64 {
        self.first
    }

    pub fn second(&self) -> f64 {
        self.second
    }

    /// Power at decoding position `order ∈ {1, 2}`.
    pub fn at(&self, order: usize) -> f64 {
        if order == 1 { self.first } else { self.second }
    }

    pub fn ratio_db(&self) -> f64 {
        crate::linear_to_db(self.first / self.second)
    }
}

/// What the other UE contributes to the decision statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OtherSignal {
    /// Undecoded in-phase interferer amplitude (desired UE decoded first).
    Interferer(f64),
    /// Residual `|Δ_m|` left by a wrong first decision (desired UE second).
    Residual(f64),
    /// Clean cancellation (desired UE second, first decision correct).
    Absent,
}

/// Everything one pairwise error probability depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct PepContext {
    pub power: PowerSplit,
    pub noise_density: f64,
    /// `|Δ_n|`, the desired UE's symbol distance.
    pub desired_distance: f64,
    pub other: OtherSignal,
    /// Density of the desired UE's ordered gain.
    pub gain: RadialDensity,
    /// Density of the other UE's real part, required unless `other` is absent.
    pub interference: Option<GaussianMixture>,
}

impl PepContext {
    fn validate(&self) -> Result<()> {
        if !(self.noise_density > 0.0 && self.noise_density.is_finite()) {
            return Err(Error::Domain { op: "PepContext", reason: "noise density must be positive" });
        }
        if !(self.desired_distance > 0.0 && self.desired_distance.is_finite()) {
            return Err(Error::Domain { op: "PepContext", reason: "desired distance must be positive" });
        }
        match self.other {
            OtherSignal::Absent => Ok(()),
            OtherSignal::Interferer(v) | OtherSignal::Residual(v) => {
                if !v.is_finite() || v == 0.0 {
                    return Err(Error::Domain { op: "PepContext", reason: "other-UE amplitude must be finite and non-zero" });
                }
                if self.interference.is_none() {
                    return Err(Error::Configuration("an interfering UE needs a real-part mixture"));
                }
                Ok(())
            }
        }
    }

    /// Desired-signal coefficient `k1 = √p·|Δ_n|` at the desired UE's position.
    pub fn desired_coefficient(&self) -> f64 {
        let p = match self.other {
            OtherSignal::Interferer(_) => self.power.first(),
            _ => self.power.second(),
        };
        libm::sqrt(p) * self.desired_distance
    }

    /// Other-UE coefficient `k2 = 2√p·amplitude` at the other UE's position.
    pub fn other_coefficient(&self) -> f64 {
        match self.other {
            OtherSignal::Interferer(a) => 2.0 * libm::sqrt(self.power.second()) * a,
            OtherSignal::Residual(r) => 2.0 * libm::sqrt(self.power.first()) * r,
            OtherSignal::Absent => 0.0,
        }
    }

    fn support(&self) -> GainSupport {
        match self.other {
            OtherSignal::Interferer(_) => GainSupport::OddExtension,
            _ => GainSupport::HalfLine,
        }
    }

    fn interference_pair(&self) -> Option<(&GaussianMixture, f64)> {
        match self.other {
            OtherSignal::Absent => None,
            _ => self.interference.as_ref().map(|m| (m, self.other_coefficient())),
        }
    }

    /// Density of `z` at any real `z`. First-order contexts use the odd
    /// continuation of the gain density, the others the half-line.
    pub fn statistic_density(&self, z: f64) -> Result<f64> {
        self.validate()?;
        let scale = libm::sqrt(2.0 * self.noise_density);
        let v = scale
            * kernel::statistic_density(scale * z, &self.gain, self.desired_coefficient(), self.interference_pair(), self.support());
        if v.is_finite() { Ok(v) } else { Err(Error::Numeric { op: "statistic_density", value: v }) }
    }

    /// Closed-form `E[Q̂(z)]` over `z ≥ 0`, with its intermediates.
    pub fn pep_ledger(&self) -> Result<TermLedger> {
        self.validate()?;
        kernel::pep_ledger(&self.gain, self.desired_coefficient(), self.interference_pair(), self.support(), self.noise_density)
    }

    /// The same expectation by adaptive quadrature of `q_chiani(z)·f(z)`.
    pub fn pep_by_quadrature(&self, quad: &Quadrature) -> Result<f64> {
        self.validate()?;
        let scale = libm::sqrt(2.0 * self.noise_density);
        let (k1, pair, support) = (self.desired_coefficient(), self.interference_pair(), self.support());
        integrate_semi_infinite(
            |z| {
                let tail = q_chiani(z).unwrap_or(0.0);
                if tail == 0.0 {
                    return 0.0;
                }
                tail * scale * kernel::statistic_density(scale * z, &self.gain, k1, pair, support)
            },
            quad,
        )
    }
}

fn require_mixture_terms(ctx: &PepContext, max: usize) -> Result<()> {
    match &ctx.interference {
        Some(m) if m.len() > max => Err(Error::Configuration(if max == 1 {
            "first-order closed form needs a single-term mixture"
        } else {
            "second-order closed form supports at most three mixture terms"
        })),
        _ => Ok(()),
    }
}

fn require_first(ctx: &PepContext) -> Result<()> {
    if !matches!(ctx.other, OtherSignal::Interferer(_)) {
        return Err(Error::Configuration("first-order evaluation needs an interferer"));
    }
    require_mixture_terms(ctx, 1)
}

fn require_second_incorrect(ctx: &PepContext) -> Result<()> {
    if !matches!(ctx.other, OtherSignal::Residual(_)) {
        return Err(Error::Configuration("incorrect-branch evaluation needs a residual"));
    }
    require_mixture_terms(ctx, 3)
}

fn probability(v: f64, op: &'static str) -> Result<f64> {
    if (0.0..=1.0).contains(&v) { Ok(v) } else { Err(Error::Numeric { op, value: v }) }
}

/// Density of `z` for the UE decoded first, at `z ≥ 0`.
pub fn pdf_z_first(z: f64, ctx: &PepContext) -> Result<f64> {
    require_first(ctx)?;
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain { op: "pdf_z_first", reason: "z must be finite and non-negative" });
    }
    ctx.statistic_density(z)
}

/// Density of `z` for the UE decoded second. With `previous_correct` the
/// interference is ignored, otherwise `ctx` must carry a residual. Negative
/// `z` is accepted because a residual can push the statistic below zero.
pub fn pdf_z_second(z: f64, ctx: &PepContext, previous_correct: bool) -> Result<f64> {
    if matches!(ctx.other, OtherSignal::Interferer(_)) {
        return Err(Error::Configuration("second-order evaluation cannot carry an interferer"));
    }
    if !z.is_finite() {
        return Err(Error::Domain { op: "pdf_z_second", reason: "z must be finite" });
    }
    if previous_correct {
        let clean = PepContext { other: OtherSignal::Absent, interference: None, ..ctx.clone() };
        return clean.statistic_density(z);
    }
    require_second_incorrect(ctx)?;
    ctx.statistic_density(z)
}

/// Closed-form error probability of the first-decoded UE.
pub fn pep_first(ctx: &PepContext) -> Result<f64> {
    require_first(ctx)?;
    probability(ctx.pep_ledger()?.total(), "pep_first")
}

/// Closed-form error probability of the second-decoded UE after a wrong
/// first decision.
pub fn pep_second_incorrect(ctx: &PepContext) -> Result<f64> {
    require_second_incorrect(ctx)?;
    probability(ctx.pep_ledger()?.total(), "pep_second_incorrect")
}

/// `1/(12+3γ) + 3/(12+4γ)` with `γ = p₂|Δ_n|²σ_n²/N₀`: the error probability
/// after clean cancellation with a Rayleigh(`sigma`) gain.
pub fn pep_second_correct(distance: f64, sigma: f64, power: f64, noise_density: f64) -> f64 {
    let g = power * distance * distance * sigma * sigma / noise_density;
    1.0 / (12.0 + 3.0 * g) + 3.0 / (12.0 + 4.0 * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ordered_gain_density, real_part_mixture_exact, ChannelParams, GainForm};

    fn fig3() -> (ChannelParams, PowerSplit) {
        (ChannelParams::two_ue_db(20.0, 7.96).unwrap(), PowerSplit::from_db(-2.22, -3.98).unwrap())
    }

    fn first_ctx(ue: usize, ebn0_db: f64) -> PepContext {
        let (ch, power) = fig3();
        PepContext {
            power,
            noise_density: 1.0 / db_to_linear(ebn0_db),
            desired_distance: 2.0,
            other: OtherSignal::Interferer(1.0),
            gain: ordered_gain_density(ue, 1, &ch, GainForm::Approximate).unwrap(),
            interference: Some(real_part_mixture_exact(1 - ue, 2, &ch).unwrap()),
        }
    }

    fn incorrect_ctx(ue: usize, ebn0_db: f64, residual: f64) -> PepContext {
        let (ch, power) = fig3();
        PepContext {
            power,
            noise_density: 1.0 / db_to_linear(ebn0_db),
            desired_distance: 2.0,
            other: OtherSignal::Residual(residual),
            gain: ordered_gain_density(ue, 2, &ch, GainForm::Approximate).unwrap(),
            interference: Some(real_part_mixture_exact(1 - ue, 1, &ch).unwrap()),
        }
    }

    fn tight() -> Quadrature {
        Quadrature::new(1e-11, 1e-16, 4000).unwrap()
    }

    #[test]
    fn power_split_conversions() {
        let p = PowerSplit::from_db(-2.22, -3.98).unwrap();
        assert!((p.first() + p.second() - 1.0).abs() < 1e-15);
        assert!((p.first() - 0.6).abs() < 1e-3);
        let r = PowerSplit::from_ratio_db(10.0).unwrap();
        assert!((r.first() - 10.0 / 11.0).abs() < 1e-15);
        assert!((r.ratio_db() - 10.0).abs() < 1e-12);
        assert!(PowerSplit::new(0.5, 0.5).is_err());
        assert!(PowerSplit::new(0.7, 0.2).is_err());
        assert!(PowerSplit::from_db(-1.0, -1.0).is_err());
        assert!(PowerSplit::from_ratio_db(0.0).is_err());
    }

    #[test]
    fn second_correct_examples() {
        // γ = 4 with p₂ = N₀.
        let v = pep_second_correct(2.0, 1.0, 0.5, 0.5);
        assert!((v - (1.0 / 24.0 + 3.0 / 28.0)).abs() < 1e-12);
        assert!((pep_second_correct(1e-9, 1.0, 0.3, 1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!(pep_second_correct(1.0, 1.0, 0.3, 1e-12) < 1e-10);
        // p₂/N₀ = 2 reproduces 1/(12+6Δ²σ²) + 3/(12+8Δ²σ²).
        let (d, s) = (0.7, 1.3);
        let printed = 1.0 / (12.0 + 6.0 * d * d * s * s) + 3.0 / (12.0 + 8.0 * d * d * s * s);
        assert!((pep_second_correct(d, s, 0.4, 0.2) - printed).abs() < 1e-14);
    }

    #[test]
    fn second_correct_matches_quadrature() {
        for g in [0.1, 1.0, 4.0, 10.0, 100.0] {
            let (ch, power) = fig3();
            let sigma = ch.scale(1);
            let distance = libm::sqrt(g / (power.second() * sigma * sigma));
            let ctx = PepContext {
                power,
                noise_density: 1.0,
                desired_distance: distance,
                other: OtherSignal::Absent,
                gain: RadialDensity::rayleigh(sigma),
                interference: None,
            };
            let q = ctx.pep_by_quadrature(&tight()).unwrap();
            let c = pep_second_correct(distance, sigma, power.second(), 1.0);
            assert!(((q - c) / c).abs() < 1e-9, "γ {g}: {q} vs {c}");
            assert!(((ctx.pep_ledger().unwrap().total() - c) / c).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_matches_quadrature() {
        for ue in 0..2 {
            let ctx = first_ctx(ue, 10.0);
            let c = pep_first(&ctx).unwrap();
            let q = ctx.pep_by_quadrature(&tight()).unwrap();
            assert!(((c - q) / q).abs() < 1e-6, "ue {ue}: {c} vs {q}");
            assert!(c > 0.0 && c <= 1.0 / 3.0);
        }
    }

    #[test]
    fn first_order_decreases_with_snr() {
        for ue in 0..2 {
            let mut last = f64::INFINITY;
            for e in (0..=30).step_by(5) {
                let v = pep_first(&first_ctx(ue, e as f64)).unwrap();
                assert!(v <= last, "ue {ue} at {e} dB");
                last = v;
            }
        }
    }

    #[test]
    fn incorrect_matches_quadrature() {
        for ue in 0..2 {
            let ctx = incorrect_ctx(ue, 10.0, 2.0);
            let c = pep_second_incorrect(&ctx).unwrap();
            let q = ctx.pep_by_quadrature(&tight()).unwrap();
            assert!(((c - q) / q).abs() < 1e-6, "ue {ue}: {c} vs {q}");
            assert!(c > 0.0 && c <= 1.0 / 3.0);
        }
    }

    #[test]
    fn incorrect_approaches_correct_for_tiny_residual() {
        let (ch, power) = fig3();
        for ue in 0..2 {
            let ctx = incorrect_ctx(ue, 10.0, 1e-6);
            let inc = pep_second_incorrect(&ctx).unwrap();
            let sigma = ctx.gain.terms()[0].scale;
            let cor = pep_second_correct(2.0, sigma, power.second(), ctx.noise_density);
            assert!(((inc - cor) / cor).abs() < 1e-3, "ue {ue}: {inc} vs {cor}");
            let _ = &ch;
        }
    }

    #[test]
    fn term_count_limits() {
        let mut ctx = first_ctx(0, 10.0);
        let (ch, _) = fig3();
        ctx.interference = Some(real_part_mixture_exact(1, 1, &ch).unwrap());
        assert!(matches!(pep_first(&ctx), Err(Error::Configuration(_))));
        assert!(matches!(pdf_z_first(0.5, &ctx), Err(Error::Configuration(_))));
        let inc = incorrect_ctx(0, 10.0, 2.0);
        assert!(pep_first(&inc).is_err());
        assert!(pep_second_incorrect(&first_ctx(0, 10.0)).is_err());
    }

    #[test]
    fn correct_density_mode_and_mass() {
        let (ch, power) = fig3();
        let sigma = ch.scale(1);
        let ctx = incorrect_ctx(1, 10.0, 2.0);
        let mass = integrate_semi_infinite(|z| pdf_z_second(z, &ctx, true).unwrap(), &tight()).unwrap();
        assert!((mass - 1.0).abs() < 1e-8);
        let mode = libm::sqrt(power.second() * 4.0 * sigma * sigma / (4.0 * ctx.noise_density));
        let f = |z: f64| pdf_z_second(z, &ctx, true).unwrap();
        assert!(f(mode) > f(mode * 0.99) && f(mode) > f(mode * 1.01));
    }

    #[test]
    fn densities_nonnegative() {
        let ctx = first_ctx(0, 10.0);
        let inc = incorrect_ctx(0, 10.0, 2.0);
        for i in 0..1000 {
            let z = i as f64 * 0.05;
            assert!(pdf_z_first(z, &ctx).unwrap() >= 0.0);
            assert!(pdf_z_second(z, &inc, false).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn ledger_entries_are_finite() {
        let l = incorrect_ctx(1, 20.0, 4.0).pep_ledger().unwrap();
        // Two mixture terms times two tail terms.
        assert_eq!(l.entries.len(), 4);
        for e in &l.entries {
            assert!(e.value.is_finite() && e.inflation >= 1.0 && e.precision > 0.0);
        }
    }
}
