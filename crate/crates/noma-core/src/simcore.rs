//! Monte Carlo link simulator for two-UE uplink NOMA with SIC.
//!
//! One symbol per UE per trial. The receiver decodes the first position by
//! maximum-likelihood detection with the other UE as noise, subtracts the
//! decision and decodes the second position. A wrong first decision leaves
//! its residual in the second stage, so error propagation is physical.
//!
//! Trials are grouped in blocks of [`BLOCK_TRIALS`]. Block `b` of grid point
//! `i` draws from ChaCha8 stream `(i << 32) | b` of the master seed, so any
//! split of blocks across workers reproduces the sequential result.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::PowerSplit;
use crate::channel::{complex_gaussian, sample_channels, sample_conditioned_gain, sample_conditioned_real_part, ChannelParams};
use crate::modem::{build_gray_constellation, Constellation, Modulation};
use crate::{db_to_linear, Error, Result};

/// Trials per RNG block.
pub const BLOCK_TRIALS: u64 = 4096;

/// How the decoding order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicMode {
    /// Strongest instantaneous `|h|` first, ties to UE 1.
    Dynamic,
    /// Always decode UE `first` (0-based) first.
    Fixed { first: usize },
}

impl SicMode {
    /// Fixed order by descending average gain, ties to UE 1.
    pub fn fixed_by_average_gain(channel: &ChannelParams) -> Self {
        let s = channel.scales();
        Self::Fixed { first: if s.len() == 2 && s[1] > s[0] { 1 } else { 0 } }
    }
}

/// Simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub power: PowerSplit,
    /// Modulation of UE 1 and UE 2.
    pub modulations: [Modulation; 2],
    /// Eb/N0 grid in dB, or any other swept parameter the caller maps.
    pub grid_db: Vec<f64>,
    pub trials: u64,
    pub mode: SicMode,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channel.len() != 2 {
            return Err(Error::Configuration("the simulator handles two UEs"));
        }
        if self.trials == 0 {
            return Err(Error::Configuration("trials must be at least 1"));
        }
        if self.grid_db.is_empty() || self.grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Configuration("grid must be non-empty and finite"));
        }
        if self.grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Configuration("grid must be strictly increasing"));
        }
        if let SicMode::Fixed { first } = self.mode {
            if first > 1 {
                return Err(Error::Configuration("fixed order names UE 0 or 1"));
            }
        }
        Ok(())
    }

    /// Number of RNG blocks per grid point.
    pub fn blocks_per_point(&self) -> u64 {
        self.trials.div_ceil(BLOCK_TRIALS)
    }

    /// Trials in block `block` of a grid point.
    pub fn block_size(&self, block: u64) -> u64 {
        let start = block * BLOCK_TRIALS;
        BLOCK_TRIALS.min(self.trials.saturating_sub(start))
    }
}

/// Prepared constellations and noise levels for a [`SimConfig`].
#[derive(Debug, Clone)]
pub struct Link {
    cfg: SimConfig,
    constellations: [Constellation; 2],
}

impl Link {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let c0 = build_gray_constellation(cfg.modulations[0].order(), 1.0)?;
        let c1 = build_gray_constellation(cfg.modulations[1].order(), 1.0)?;
        Ok(Self { cfg: cfg.clone(), constellations: [c0, c1] })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn constellation(&self, ue: usize) -> &Constellation {
        &self.constellations[ue]
    }

    fn noise_density(&self, point: usize) -> f64 {
        1.0 / db_to_linear(self.cfg.grid_db[point])
    }
}

/// Result of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: [u32; 2],
    pub bits_sent: [u32; 2],
    /// UEs in decoding order.
    pub order: [usize; 2],
    pub first_stage_correct: bool,
}

/// Runs one trial at grid point `point`.
pub fn run_trial<R: RngCore + ?Sized>(link: &Link, point: usize, rng: &mut R) -> TrialOutcome {
    let cfg = &link.cfg;
    let n0 = link.noise_density(point);
    let real = sample_channels(&cfg.channel, rng);
    let order = match cfg.mode {
        SicMode::Dynamic => [real.order[0], real.order[1]],
        SicMode::Fixed { first } => [first, 1 - first],
    };
    let h = [real.gains[0], real.gains[1]];
    let sent = [
        rng.random_range(0..link.constellations[0].points().len()),
        rng.random_range(0..link.constellations[1].points().len()),
    ];
    let amp = [libm::sqrt(cfg.power.first()), libm::sqrt(cfg.power.second())];
    let mut y = complex_gaussian(libm::sqrt(n0), rng);
    for (pos, &ue) in order.iter().enumerate() {
        y += amp[pos] * h[ue] * link.constellations[ue].points()[sent[ue]];
    }

    let (a, b) = (order[0], order[1]);
    let ca = &link.constellations[a];
    let got_a = ca.nearest(y, amp[0] * h[a]);
    let residual: Complex64 = y - amp[0] * h[a] * ca.points()[got_a];
    let got_b = link.constellations[b].nearest(residual, amp[1] * h[b]);

    let mut bit_errors = [0; 2];
    bit_errors[a] = ca.bit_errors(sent[a], got_a);
    bit_errors[b] = link.constellations[b].bit_errors(sent[b], got_b);
    let bits_sent = [link.constellations[0].bits_per_symbol(), link.constellations[1].bits_per_symbol()];
    TrialOutcome { bit_errors, bits_sent, order, first_stage_correct: got_a == sent[a] }
}

/// Error and bit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Count {
    pub errors: u64,
    pub bits: u64,
}

impl Count {
    fn add(&mut self, errors: u32, bits: u32) {
        self.errors += errors as u64;
        self.bits += bits as u64;
    }

    fn merge(&mut self, other: &Count) {
        self.errors += other.errors;
        self.bits += other.bits;
    }

    /// BER with a normal-approximation 95% half-width, or `None` when empty.
    pub fn estimate(&self) -> Option<BerEstimate> {
        if self.bits == 0 {
            return None;
        }
        let n = self.bits as f64;
        let ber = self.errors as f64 / n;
        Some(BerEstimate { ber, ci95: 1.96 * libm::sqrt(ber * (1.0 - ber) / n), bits: self.bits })
    }
}

/// Aggregated counts over trials. Addition is commutative, so blocks can be
/// merged in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub trials: u64,
    pub per_ue: [Count; 2],
    /// `bucket_trials[k]`: trials in which UE `k` was decoded first.
    pub bucket_trials: [u64; 2],
    /// `buckets[k][ue]`: counts of `ue` among trials where UE `k` went first.
    pub buckets: [[Count; 2]; 2],
    /// Second-stage counts after a correct first decision.
    pub second_after_correct: Count,
    /// Second-stage counts after a wrong first decision.
    pub second_after_failure: Count,
}

impl Tally {
    pub fn record(&mut self, t: &TrialOutcome) {
        self.trials += 1;
        let lead = t.order[0];
        self.bucket_trials[lead] += 1;
        for ue in 0..2 {
            self.per_ue[ue].add(t.bit_errors[ue], t.bits_sent[ue]);
            self.buckets[lead][ue].add(t.bit_errors[ue], t.bits_sent[ue]);
        }
        let b = t.order[1];
        let second = if t.first_stage_correct { &mut self.second_after_correct } else { &mut self.second_after_failure };
        second.add(t.bit_errors[b], t.bits_sent[b]);
    }

    pub fn merge(&mut self, other: &Tally) {
        self.trials += other.trials;
        for k in 0..2 {
            self.bucket_trials[k] += other.bucket_trials[k];
            self.per_ue[k].merge(&other.per_ue[k]);
            for ue in 0..2 {
                self.buckets[k][ue].merge(&other.buckets[k][ue]);
            }
        }
        self.second_after_correct.merge(&other.second_after_correct);
        self.second_after_failure.merge(&other.second_after_failure);
    }
}

/// RNG for block `block` of grid point `point`.
pub fn block_rng(seed: u64, point: usize, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | block);
    rng
}

/// Runs one block of trials.
pub fn run_block(link: &Link, point: usize, block: u64) -> Tally {
    let mut rng = block_rng(link.cfg.seed, point, block);
    let mut tally = Tally::default();
    for _ in 0..link.cfg.block_size(block) {
        tally.record(&run_trial(link, point, &mut rng));
    }
    tally
}

/// BER estimate with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub ber: f64,
    pub ci95: f64,
    pub bits: u64,
}

/// Results at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub param: f64,
    pub tally: Tally,
    pub ue: [BerEstimate; 2],
    /// `buckets[k][ue]`, `None` when no trial had UE `k` decoded first.
    pub buckets: [[Option<BerEstimate>; 2]; 2],
}

impl CurvePoint {
    pub fn from_tally(param: f64, tally: Tally) -> Result<Self> {
        let ue0 = tally.per_ue[0].estimate().ok_or(Error::Configuration("no bits were counted"))?;
        let ue1 = tally.per_ue[1].estimate().ok_or(Error::Configuration("no bits were counted"))?;
        let b = |k: usize, ue: usize| tally.buckets[k][ue].estimate();
        Ok(Self { param, tally, ue: [ue0, ue1], buckets: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]] })
    }
}

/// Simulated BER over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub mode: SicMode,
    pub points: Vec<CurvePoint>,
}

impl BerCurve {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.param).collect()
    }
}

/// Assembles a curve from per-point tallies.
pub fn assemble_curve(cfg: &SimConfig, tallies: Vec<Tally>) -> Result<BerCurve> {
    if tallies.len() != cfg.grid_db.len() {
        return Err(Error::Size { size: tallies.len(), max: cfg.grid_db.len() });
    }
    let points = cfg.grid_db.iter().zip(tallies).map(|(&x, t)| CurvePoint::from_tally(x, t)).collect::<Result<Vec<_>>>()?;
    Ok(BerCurve { mode: cfg.mode, points })
}

/// Runs every grid point sequentially.
pub fn run_curve(cfg: &SimConfig) -> Result<BerCurve> {
    let link = Link::new(cfg)?;
    let tallies = (0..cfg.grid_db.len())
        .map(|point| {
            let mut t = Tally::default();
            for block in 0..cfg.blocks_per_point() {
                t.merge(&run_block(&link, point, block));
            }
            t
        })
        .collect();
    assemble_curve(cfg, tallies)
}

/// Which conditioned channel statistic to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `|h_ue|` given decoding position `order`.
    Gain { ue: usize, order: usize },
    /// `ℜ{h_ue}` given decoding position `order`.
    RealPart { ue: usize, order: usize },
}

/// Samples a conditioned channel statistic.
pub fn collect_statistics(cfg: &SimConfig, which: Statistic, count: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match which {
        Statistic::Gain { ue, order } => sample_conditioned_gain(ue, order, &cfg.channel, &mut rng, count),
        Statistic::RealPart { ue, order } => sample_conditioned_real_part(ue, order, &cfg.channel, &mut rng, count),
    }
}
