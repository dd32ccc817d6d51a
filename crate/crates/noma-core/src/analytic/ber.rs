//! Symbol combinations, branch composition and per-UE bit error rates.

use alloc::vec::Vec;

use super::kernel::pep_reflected;
use super::{pep_first, pep_second_correct, pep_second_incorrect, OtherSignal, PepContext, PowerSplit};
use crate::channel::{
    order_probability, ordered_gain_density, real_part_mixture_exact, real_part_mixture_unconditioned, ChannelParams,
    GainForm, RadialDensity,
};
use crate::gaussfit::GaussianMixture;
use crate::modem::{error_distance_table, scaling_factor, ErrorDistanceTable, Modulation};
use crate::numerics::{chiani_tail, normal_sf, Quadrature};
use crate::{db_to_linear, Error, Result};

/// One pattern of other-UE contributions, in units of that UE's `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCombination {
    /// In-phase residuals `2d, 4d, …` left by wrongly decoded predecessors.
    pub residuals: Vec<f64>,
    /// In-phase amplitudes `d, 3d, …` of undecoded successors.
    pub interferers: Vec<f64>,
}

/// Combinations seen by the UE at decoding `position ∈ {1, 2}` when the two
/// positions carry constellations of the given orders.
///
/// A square `M`-QAM predecessor contributes `√M - 1` residual magnitudes and
/// a successor `√M/2` interferer amplitudes. BPSK contributes one of each.
pub fn enumerate_combinations(position: usize, orders_by_position: [u32; 2]) -> Result<Vec<SymbolCombination>> {
    if !(position == 1 || position == 2) {
        return Err(Error::Domain { op: "enumerate_combinations", reason: "two-UE positions are 1 and 2" });
    }
    let other = Modulation::from_order(orders_by_position[2 - position])?;
    let levels = other.levels_per_axis();
    Ok(if position == 1 {
        interferer_amplitudes(other, levels)
            .into_iter()
            .map(|a| SymbolCombination { residuals: Vec::new(), interferers: alloc::vec![a] })
            .collect()
    } else {
        residual_magnitudes(other, levels)
            .into_iter()
            .map(|r| SymbolCombination { residuals: alloc::vec![r], interferers: Vec::new() })
            .collect()
    })
}

fn interferer_amplitudes(m: Modulation, levels: u32) -> Vec<f64> {
    if m == Modulation::Bpsk {
        return alloc::vec![1.0];
    }
    (1..=levels / 2).map(|j| (2 * j - 1) as f64).collect()
}

fn residual_magnitudes(m: Modulation, levels: u32) -> Vec<f64> {
    if m == Modulation::Bpsk {
        return alloc::vec![2.0];
    }
    (1..levels).map(|j| (2 * j) as f64).collect()
}

/// Tail function used by [`conditional_bit_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailFunction {
    Exact,
    /// Two-exponential approximation, continued by `Q̂(-x) = 1 - Q̂(x)`.
    Chiani,
}

/// `Q((2Δ_b·ρ + I)/√(2N₀))` for a signed bit distance `Δ_b`, effective gain
/// `ρ` and aggregate in-phase interference `I`.
pub fn conditional_bit_error(distance: f64, rho: f64, interference: f64, noise_density: f64, tail: TailFunction) -> Result<f64> {
    if !(noise_density > 0.0) {
        return Err(Error::Domain { op: "conditional_bit_error", reason: "noise density must be positive" });
    }
    let x = (2.0 * distance * rho + interference) / libm::sqrt(2.0 * noise_density);
    if x.is_nan() {
        return Err(Error::Domain { op: "conditional_bit_error", reason: "argument is not a number" });
    }
    Ok(match tail {
        TailFunction::Exact => normal_sf(x),
        TailFunction::Chiani if x >= 0.0 => chiani_tail(x),
        TailFunction::Chiani => 1.0 - chiani_tail(-x),
    })
}

/// Conditional error probabilities of one UE by decoding branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchErrors {
    /// Decoded first.
    pub first: f64,
    /// Decoded second after a correct first decision.
    pub second_correct: f64,
    /// Decoded second after a wrong first decision.
    pub second_incorrect: f64,
}

/// Total error probability of a UE from its branch errors, the other UE's
/// first-position error `other_first` and the probability `first_probability`
/// that this UE is decoded first.
pub fn compose_ue_error(own: &BranchErrors, other_first: f64, first_probability: f64) -> Result<f64> {
    let inputs = [own.first, own.second_correct, own.second_incorrect, other_first, first_probability];
    if inputs.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain { op: "compose_ue_error", reason: "inputs must be probabilities" });
    }
    let second = own.second_correct * (1.0 - other_first) + own.second_incorrect * other_first;
    let v = own.first * first_probability + second * (1.0 - first_probability);
    if (0.0..=1.0).contains(&v) { Ok(v) } else { Err(Error::Numeric { op: "compose_ue_error", value: v }) }
}

/// Source of the real-part densities used as interference.
#[derive(Debug, Clone, PartialEq)]
pub enum InterferenceModel {
    /// Exact Gaussian-sum densities.
    Exact,
    /// Fitted mixtures indexed by UE: `second[ue]` for `ℜ{h_ue}` when that UE
    /// is decoded second, `first[ue]` when it is decoded first.
    Fitted { first: [GaussianMixture; 2], second: [GaussianMixture; 2] },
}

impl InterferenceModel {
    fn mixture(&self, ue: usize, order: usize, channel: &ChannelParams) -> Result<GaussianMixture> {
        match self {
            Self::Exact => real_part_mixture_exact(ue, order, channel),
            Self::Fitted { first, second } => Ok(if order == 1 { first[ue].clone() } else { second[ue].clone() }),
        }
    }
}

/// Scenario for the theoretical BER.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub channel: ChannelParams,
    pub power: PowerSplit,
    /// Modulation of UE 1 and UE 2.
    pub modulations: [Modulation; 2],
    pub gain_form: GainForm,
    pub interference: InterferenceModel,
}

impl TheoryConfig {
    /// Exact interference and the approximate gain densities.
    pub fn new(channel: ChannelParams, power: PowerSplit, modulations: [Modulation; 2]) -> Self {
        Self { channel, power, modulations, gain_form: GainForm::Approximate, interference: InterferenceModel::Exact }
    }
}

/// Theoretical error breakdown of one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeBreakdown {
    pub branches: BranchErrors,
    /// Probability of being decoded first.
    pub first_probability: f64,
    /// BER when decoded second, averaged over the other UE's outcome.
    pub second: f64,
    pub total: f64,
}

/// Theoretical BER of both UEs at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub ue: [UeBreakdown; 2],
}

/// `prefactor·Σ weight·pep(multiple·d)` over an error-distance table.
fn table_sum(table: &ErrorDistanceTable, d: f64, mut pep: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for t in &table.terms {
        total += t.weight as f64 * pep(t.multiple as f64 * d)?;
    }
    Ok(table.prefactor * total)
}

fn mean_over(values: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for &v in values {
        total += f(v)?;
    }
    Ok(total / values.len() as f64)
}

struct Scenario {
    tables: [ErrorDistanceTable; 2],
    spacing: [f64; 2],
    noise_density: f64,
}

impl Scenario {
    fn new(modulations: [Modulation; 2], ebn0_db: f64) -> Result<Self> {
        let noise_density = 1.0 / db_to_linear(ebn0_db);
        if !(noise_density > 0.0 && noise_density.is_finite()) {
            return Err(Error::Domain { op: "theory_ber", reason: "Eb/N0 must be finite" });
        }
        Ok(Self {
            tables: [error_distance_table(modulations[0].order())?, error_distance_table(modulations[1].order())?],
            spacing: [scaling_factor(modulations[0].order(), 1.0)?, scaling_factor(modulations[1].order(), 1.0)?],
            noise_density,
        })
    }
}

fn position_orders(modulations: [Modulation; 2], ue: usize, position: usize) -> [u32; 2] {
    let (own, other) = (modulations[ue].order(), modulations[1 - ue].order());
    if position == 1 { [own, other] } else { [other, own] }
}

fn breakdown(branches: [BranchErrors; 2], first_probability: [f64; 2]) -> Result<TheoryPoint> {
    let mut out = [UeBreakdown { branches: branches[0], first_probability: 0.0, second: 0.0, total: 0.0 }; 2];
    for ue in 0..2 {
        let b = branches[ue];
        let other_first = branches[1 - ue].first;
        let total = compose_ue_error(&b, other_first, first_probability[ue])?;
        out[ue] = UeBreakdown {
            branches: b,
            first_probability: first_probability[ue],
            second: b.second_correct * (1.0 - other_first) + b.second_incorrect * other_first,
            total,
        };
    }
    Ok(TheoryPoint { ue: out })
}

/// Theoretical BER of both UEs under dynamic SIC at `ebn0_db` (with `Eb = 1`).
///
/// Each Q-term of the Gray BER expansion is evaluated as a pairwise error
/// probability with the term's distance, averaged over the other UE's
/// interferer amplitudes (decoded first) or residuals (decoded second), and
/// mixed over the order probabilities.
pub fn theory_ber(cfg: &TheoryConfig, ebn0_db: f64) -> Result<TheoryPoint> {
    let sc = Scenario::new(cfg.modulations, ebn0_db)?;
    let ch = &cfg.channel;
    let mut branches = [BranchErrors { first: 0.0, second_correct: 0.0, second_incorrect: 0.0 }; 2];
    for ue in 0..2 {
        let other = 1 - ue;
        let (table, d, d_other) = (&sc.tables[ue], sc.spacing[ue], sc.spacing[other]);

        let gain_first = ordered_gain_density(ue, 1, ch, cfg.gain_form)?;
        let weak_mix = cfg.interference.mixture(other, 2, ch)?;
        let combos = enumerate_combinations(1, position_orders(cfg.modulations, ue, 1))?;
        let amps: Vec<f64> = combos.iter().flat_map(|c| c.interferers.iter().copied()).collect();
        let first = mean_over(&amps, |a| {
            table_sum(table, d, |dist| {
                pep_first(&PepContext {
                    power: cfg.power,
                    noise_density: sc.noise_density,
                    desired_distance: dist,
                    other: OtherSignal::Interferer(a * d_other),
                    gain: gain_first.clone(),
                    interference: Some(weak_mix.clone()),
                })
            })
        })?;

        let gain_second = ordered_gain_density(ue, 2, ch, cfg.gain_form)?;
        let second_correct = table_sum(table, d, |dist| {
            Ok(PepContext {
                power: cfg.power,
                noise_density: sc.noise_density,
                desired_distance: dist,
                other: OtherSignal::Absent,
                gain: gain_second.clone(),
                interference: None,
            }
            .pep_ledger()?
            .total())
        })?;

        let strong_mix = cfg.interference.mixture(other, 1, ch)?;
        let combos = enumerate_combinations(2, position_orders(cfg.modulations, ue, 2))?;
        let res: Vec<f64> = combos.iter().flat_map(|c| c.residuals.iter().copied()).collect();
        let second_incorrect = mean_over(&res, |r| {
            table_sum(table, d, |dist| {
                pep_second_incorrect(&PepContext {
                    power: cfg.power,
                    noise_density: sc.noise_density,
                    desired_distance: dist,
                    other: OtherSignal::Residual(r * d_other),
                    gain: gain_second.clone(),
                    interference: Some(strong_mix.clone()),
                })
            })
        })?;
        branches[ue] = BranchErrors { first, second_correct, second_incorrect };
    }
    let s = ch.scales();
    breakdown(branches, [order_probability(s[0], s[1]), order_probability(s[1], s[0])])
}

/// Theoretical BER under SIC frozen to the average-gain order (ties to
/// UE 1), without mixing over realized orders.
///
/// Gains and real parts are unconditioned. The first-decoded UE is
/// frequently the instantaneously weaker one, so its statistic can turn
/// negative. The tail is therefore continued as `1 - Q̂(-z)` and integrated
/// numerically, which produces the interference-limited floor.
pub fn theory_ber_fixed(cfg: &TheoryConfig, ebn0_db: f64, quad: &Quadrature) -> Result<TheoryPoint> {
    let sc = Scenario::new(cfg.modulations, ebn0_db)?;
    let ch = &cfg.channel;
    let s = ch.scales();
    if s.len() != 2 {
        return Err(Error::Configuration("fixed-order theory needs two UEs"));
    }
    let lead = if s[1] > s[0] { 1 } else { 0 };
    let follow = 1 - lead;
    let n0 = sc.noise_density;
    let (p1, p2) = (cfg.power.first(), cfg.power.second());

    let lead_gain = RadialDensity::rayleigh(s[lead]);
    let follow_re = real_part_mixture_unconditioned(follow, ch)?;
    let amps: Vec<f64> = enumerate_combinations(1, position_orders(cfg.modulations, lead, 1))?
        .iter()
        .flat_map(|c| c.interferers.clone())
        .collect();
    let lead_first = mean_over(&amps, |a| {
        table_sum(&sc.tables[lead], sc.spacing[lead], |dist| {
            let k2 = 2.0 * libm::sqrt(p2) * a * sc.spacing[follow];
            pep_reflected(&lead_gain, libm::sqrt(p1) * dist, Some((&follow_re, k2)), n0, quad)
        })
    })?;

    let follow_gain = RadialDensity::rayleigh(s[follow]);
    let lead_re = real_part_mixture_unconditioned(lead, ch)?;
    let correct = table_sum(&sc.tables[follow], sc.spacing[follow], |dist| Ok(pep_second_correct(dist, s[follow], p2, n0)))?;
    let res: Vec<f64> = enumerate_combinations(2, position_orders(cfg.modulations, follow, 2))?
        .iter()
        .flat_map(|c| c.residuals.clone())
        .collect();
    let incorrect = mean_over(&res, |r| {
        table_sum(&sc.tables[follow], sc.spacing[follow], |dist| {
            let k2 = 2.0 * libm::sqrt(p1) * r * sc.spacing[lead];
            pep_reflected(&follow_gain, libm::sqrt(p2) * dist, Some((&lead_re, k2)), n0, quad)
        })
    })?;

    let mut branches = [BranchErrors { first: 0.0, second_correct: 0.0, second_incorrect: 0.0 }; 2];
    branches[lead].first = lead_first;
    branches[follow] = BranchErrors { first: 0.0, second_correct: correct, second_incorrect: incorrect };
    let mut probs = [0.0; 2];
    probs[lead] = 1.0;
    breakdown(branches, probs)
}
