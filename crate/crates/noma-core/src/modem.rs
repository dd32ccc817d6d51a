//! Gray-coded square QAM and BPSK, ML detection and per-bit error distances.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::{Error, Result};

/// Supported modulation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Bpsk,
    Qam4,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Bpsk),
            4 => Ok(Self::Qam4),
            16 => Ok(Self::Qam16),
            64 => Ok(Self::Qam64),
            _ => Err(Error::Domain { op: "Modulation::from_order", reason: "order must be 2, 4, 16 or 64" }),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Self::Bpsk => 2,
            Self::Qam4 => 4,
            Self::Qam16 => 16,
            Self::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }

    /// Levels per axis; BPSK has two levels on the in-phase axis only.
    pub fn levels_per_axis(self) -> u32 {
        match self {
            Self::Bpsk => 2,
            other => 1 << (other.bits_per_symbol() / 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Qam4 => "4qam",
            Self::Qam16 => "16qam",
            Self::Qam64 => "64qam",
        }
    }
}

impl core::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bpsk" | "2" => Ok(Self::Bpsk),
            "4qam" | "qpsk" | "4" => Ok(Self::Qam4),
            "16qam" | "16" => Ok(Self::Qam16),
            "64qam" | "64" => Ok(Self::Qam64),
            _ => Err(Error::Domain { op: "Modulation::from_str", reason: "expected bpsk, 4qam, 16qam or 64qam" }),
        }
    }
}

/// Half-spacing `d` of the constellation grid.
///
/// Square QAM uses `√(3·Eb·log₂M / (2(M−1)))`, which gives mean symbol energy
/// `Eb·log₂M`. BPSK uses `√Eb` for the same unit-energy convention.
pub fn scaling_factor(order: u32, eb: f64) -> Result<f64> {
    if !(eb > 0.0 && eb.is_finite()) {
        return Err(Error::Domain { op: "scaling_factor", reason: "energy per bit must be positive" });
    }
    let m = Modulation::from_order(order)?;
    Ok(match m {
        Modulation::Bpsk => libm::sqrt(eb),
        _ => {
            let bits = m.bits_per_symbol() as f64;
            libm::sqrt(3.0 * eb * bits / (2.0 * (order as f64 - 1.0)))
        }
    })
}

/// A Gray-labelled constellation. Labels carry the in-phase bits in the most
/// significant half, then the quadrature bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
    labels: Vec<u32>,
    d: f64,
    eb: f64,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Builds the constellation with levels `±d, ±3d, …` per axis and Gray labels.
pub fn build_gray_constellation(order: u32, eb: f64) -> Result<Constellation> {
    let modulation = Modulation::from_order(order)?;
    let d = scaling_factor(order, eb)?;
    let (points, labels) = match modulation {
        Modulation::Bpsk => (alloc::vec![Complex64::new(-d, 0.0), Complex64::new(d, 0.0)], alloc::vec![0, 1]),
        _ => {
            let levels = modulation.levels_per_axis();
            let half_bits = modulation.bits_per_symbol() / 2;
            let amp = |i: u32| d * (2.0 * i as f64 - (levels as f64 - 1.0));
            let mut pts = Vec::with_capacity(order as usize);
            let mut labs = Vec::with_capacity(order as usize);
            for i in 0..levels {
                for q in 0..levels {
                    pts.push(Complex64::new(amp(i), amp(q)));
                    labs.push((gray(i) << half_bits) | gray(q));
                }
            }
            (pts, labs)
        }
    };
    Ok(Constellation { modulation, points, labels, d, eb })
}

impl Constellation {
    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn order(&self) -> u32 {
        self.modulation.order()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.modulation.bits_per_symbol()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn eb(&self) -> f64 {
        self.eb
    }

    /// Label of symbol `idx` as a bit vector, first bit first.
    pub fn label_bits(&self, idx: usize) -> Vec<u8> {
        let n = self.bits_per_symbol();
        (0..n).map(|j| ((self.labels[idx] >> (n - 1 - j)) & 1) as u8).collect()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Number of differing label bits between two symbols.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.labels[sent] ^ self.labels[detected]).count_ones()
    }

    /// Nearest point to `y` after scaling by `gain`, lowest index on ties.
    pub(crate) fn nearest(&self, y: Complex64, gain: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let dist = (y - gain * p).norm_sqr();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }
}

/// Maximum-likelihood detection of `y = √p·h·x + noise`.
pub fn mld_detect(y: Complex64, h: Complex64, p: f64, c: &Constellation) -> Result<(usize, Vec<u8>)> {
    if h.norm_sqr() == 0.0 || !h.norm_sqr().is_finite() {
        return Err(Error::DegenerateChannel);
    }
    if !(p > 0.0) {
        return Err(Error::Domain { op: "mld_detect", reason: "power coefficient must be positive" });
    }
    let idx = c.nearest(y, h * libm::sqrt(p));
    Ok((idx, c.label_bits(idx)))
}

/// One weighted Q-term `weight·Q(multiple·d·ρ + …)` of the per-bit BER expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceTerm {
    pub weight: i32,
    pub multiple: u32,
}

/// Q-term expansion of the in-phase bit used for the BER expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistanceTable {
    pub modulation: Modulation,
    /// Overall factor in front of the weighted sum.
    pub prefactor: f64,
    pub terms: Vec<DistanceTerm>,
    /// Bit-boundary distances from the table of minimum error distances,
    /// listed per in-phase bit as `(lower, upper)` multiples of `d`; `None`
    /// marks an open upper end.
    pub boundaries: Vec<Vec<(u32, Option<u32>)>>,
}

impl ErrorDistanceTable {
    /// Zero-distance value of the expansion, i.e. with every Q-term equal to `q0`.
    pub fn zero_argument_sum(&self, q0: f64) -> f64 {
        self.prefactor * self.terms.iter().map(|t| t.weight as f64).sum::<f64>() * q0
    }
}

/// Returns the Q-term table for `order`.
pub fn error_distance_table(order: u32) -> Result<ErrorDistanceTable> {
    let modulation = Modulation::from_order(order)?;
    let t = |weight, multiple| DistanceTerm { weight, multiple };
    let (prefactor, terms, boundaries) = match modulation {
        Modulation::Bpsk | Modulation::Qam4 => (1.0, alloc::vec![t(1, 2)], alloc::vec![alloc::vec![(1, None)]]),
        Modulation::Qam16 => (
            0.5,
            alloc::vec![t(2, 2), t(1, 6), t(-1, 10)],
            alloc::vec![alloc::vec![(1, None), (3, None)], alloc::vec![(1, None), (3, None), (1, Some(5))]],
        ),
        Modulation::Qam64 => (
            1.0 / 6.0,
            alloc::vec![t(4, 2), t(4, 6), t(1, 18), t(-1, 26)],
            alloc::vec![
                alloc::vec![(1, None), (3, None), (5, None), (7, None)],
                alloc::vec![(1, None), (3, None), (5, None), (7, None), (1, Some(9)), (3, Some(11))],
                alloc::vec![(1, None), (3, None), (1, Some(5)), (3, Some(7)), (9, None), (11, None), (9, Some(13))],
            ],
        ),
    };
    Ok(ErrorDistanceTable { modulation, prefactor, terms, boundaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{q_chiani, q_exact};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn scaling_factor_examples() {
        assert!((scaling_factor(4, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((scaling_factor(16, 1.0).unwrap() - libm::sqrt(12.0 / 30.0)).abs() < 1e-15);
        assert!((scaling_factor(16, 1.0).unwrap() - 0.632_456).abs() < 1e-6);
        assert_eq!(scaling_factor(2, 1.0).unwrap(), 1.0);
        assert!(scaling_factor(8, 1.0).is_err());
        assert!(scaling_factor(32, 1.0).is_err());
    }

    #[test]
    fn mean_energy_is_eb_log2m() {
        for (m, eb) in [(2, 1.0), (4, 1.0), (16, 2.0), (64, 1.0), (64, 0.3)] {
            let c = build_gray_constellation(m, eb).unwrap();
            let bits = m.trailing_zeros() as f64;
            assert!((c.mean_energy() - eb * bits).abs() < 1e-12, "M = {m}");
        }
    }

    #[test]
    fn qpsk_is_the_gray_square() {
        let c = build_gray_constellation(4, 1.0).unwrap();
        for p in c.points() {
            assert_eq!(p.re.abs(), 1.0);
            assert_eq!(p.im.abs(), 1.0);
        }
    }

    #[test]
    fn axis_levels_are_odd_multiples_of_d() {
        for m in [4, 16, 64] {
            let c = build_gray_constellation(m, 1.0).unwrap();
            for p in c.points() {
                for v in [p.re, p.im] {
                    let k = v / c.d();
                    assert!((k - libm::round(k)).abs() < 1e-12);
                    assert_eq!(libm::round(k) as i64 % 2, if k > 0.0 { 1 } else { -1 });
                }
            }
        }
    }

    // Exhaustive check over all pairs: minimum-distance neighbours differ in one bit
    // and labels form a bijection.
    #[test]
    fn gray_property_is_exhaustive() {
        for m in [2, 4, 16, 64] {
            let c = build_gray_constellation(m, 1.0).unwrap();
            let mut seen = alloc::vec![false; m as usize];
            for &l in c.labels() {
                assert!(!seen[l as usize]);
                seen[l as usize] = true;
            }
            let mut pairs = 0;
            for i in 0..m as usize {
                for j in i + 1..m as usize {
                    let dist = (c.points()[i] - c.points()[j]).norm();
                    if (dist - 2.0 * c.d()).abs() < 1e-12 {
                        assert_eq!(c.bit_errors(i, j), 1, "M = {m}, pair ({i}, {j})");
                    }
                    pairs += 1;
                }
            }
            assert_eq!(pairs, (m * (m - 1) / 2) as usize);
        }
    }

    #[test]
    fn in_phase_bits_lead_the_label() {
        let c = build_gray_constellation(16, 1.0).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if c.points()[i].re == c.points()[j].re {
                    assert_eq!(c.label_bits(i)[..2], c.label_bits(j)[..2]);
                }
            }
        }
    }

    #[test]
    fn mld_noiseless_and_ties() {
        let h = Complex64::new(0.3, -1.7);
        for m in [2, 4, 16, 64] {
            let c = build_gray_constellation(m, 1.0).unwrap();
            for (i, x) in c.points().iter().enumerate() {
                let y = h * libm::sqrt(0.4) * x;
                assert_eq!(mld_detect(y, h, 0.4, &c).unwrap().0, i);
            }
        }
        let c = build_gray_constellation(4, 1.0).unwrap();
        assert_eq!(mld_detect(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 1.0, &c).unwrap().0, 0);
        assert_eq!(mld_detect(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 1.0, &c), Err(Error::DegenerateChannel));
    }

    #[test]
    fn bpsk_awgn_ber_matches_tail() {
        let c = build_gray_constellation(2, 1.0).unwrap();
        let ebn0 = crate::db_to_linear(4.0);
        let n0 = 1.0 / ebn0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let mut errors = 0;
        let h = Complex64::new(1.0, 0.0);
        for _ in 0..trials {
            let s = rng.random_range(0..2usize);
            let w = Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                * libm::sqrt(n0 / 2.0);
            let (det, _) = mld_detect(c.points()[s] + w, h, 1.0, &c).unwrap();
            errors += c.bit_errors(s, det);
        }
        let p = q_exact(libm::sqrt(2.0 * ebn0)).unwrap();
        let ber = errors as f64 / trials as f64;
        let sigma = libm::sqrt(p * (1.0 - p) / trials as f64);
        assert!((ber - p).abs() < 3.0 * sigma, "ber {ber}, expected {p}");
    }

    #[test]
    fn error_distance_tables() {
        let t4 = error_distance_table(4).unwrap();
        assert_eq!(t4.terms, alloc::vec![DistanceTerm { weight: 1, multiple: 2 }]);
        assert_eq!(t4.prefactor, 1.0);
        let t16 = error_distance_table(16).unwrap();
        assert_eq!(t16.prefactor, 0.5);
        let w: Vec<(i32, u32)> = t16.terms.iter().map(|t| (t.weight, t.multiple)).collect();
        assert_eq!(w, alloc::vec![(2, 2), (1, 6), (-1, 10)]);
        let t64 = error_distance_table(64).unwrap();
        assert!((t64.prefactor - 1.0 / 6.0).abs() < 1e-16);
        let w: Vec<(i32, u32)> = t64.terms.iter().map(|t| (t.weight, t.multiple)).collect();
        assert_eq!(w, alloc::vec![(4, 2), (4, 6), (1, 18), (-1, 26)]);
        assert!(error_distance_table(8).is_err());
    }

    #[test]
    fn zero_argument_limits() {
        let q0 = q_chiani(0.0).unwrap();
        // The 64QAM expansion sums to 8/6 of a single tail at zero argument.
        for (m, want) in [(2, 1.0 / 3.0), (4, 1.0 / 3.0), (16, 1.0 / 3.0), (64, 4.0 / 9.0)] {
            let t = error_distance_table(m).unwrap();
            assert!((t.zero_argument_sum(q0) - want).abs() < 1e-15, "M = {m}");
        }
    }

    proptest! {
        #[test]
        fn mld_is_scale_consistent(re in -5.0f64..5.0, im in -5.0f64..5.0, hr in 0.1f64..3.0, hi in -3.0f64..3.0,
                                   alpha in 0.01f64..100.0, m in prop::sample::select(alloc::vec![2u32, 4, 16, 64])) {
            let c = build_gray_constellation(m, 1.0).unwrap();
            let y = Complex64::new(re, im);
            let h = Complex64::new(hr, hi);
            let a = mld_detect(y, h, 0.7, &c).unwrap().0;
            let b = mld_detect(y * alpha, h * alpha, 0.7, &c).unwrap().0;
            prop_assert_eq!(a, b);
        }
    }
}
