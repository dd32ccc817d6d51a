//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored. Powers and channel gains are
//! given in dB and converted once, here. Unknown keys are rejected.

use std::fmt::Write as _;
use std::str::FromStr;

use noma_sic_core::analytic::PowerSplit;
use noma_sic_core::modem::Modulation;

use crate::error::{CliError, CliResult};

/// Experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// BER against Eb/N0.
    BerVsSnr,
    /// BER against `10·log10(p1/p2)` at a fixed Eb/N0.
    PowerRatioSweep,
    /// BER against `σ1² - σ2²` (dB) with `σ2²` fixed.
    ChannelGapSweep,
    /// Dynamic and fixed SIC against Eb/N0.
    SicCompare,
    /// Same as `SicCompare`, used for mixed modulations.
    Hetero,
    /// Gaussian-mixture fits of the conditioned real parts.
    FitReport,
    /// Decision-statistic densities against Monte Carlo histograms.
    PdfReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BerVsSnr => "ber-vs-snr",
            Self::PowerRatioSweep => "power-ratio-sweep",
            Self::ChannelGapSweep => "channel-gap-sweep",
            Self::SicCompare => "sic-compare",
            Self::Hetero => "hetero",
            Self::FitReport => "fit-report",
            Self::PdfReport => "pdf-report",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ber-vs-snr" => Self::BerVsSnr,
            "power-ratio-sweep" => Self::PowerRatioSweep,
            "channel-gap-sweep" => Self::ChannelGapSweep,
            "sic-compare" => Self::SicCompare,
            "hetero" => Self::Hetero,
            "fit-report" => Self::FitReport,
            "pdf-report" => Self::PdfReport,
            _ => return Err(format!("unknown experiment `{s}`")),
        })
    }
}

/// Which SIC orders to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    Dynamic,
    Fixed,
    Both,
}

impl ModeSelection {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dynamic => "dynamic",
            Self::Fixed => "fixed",
            Self::Both => "both",
        }
    }

    pub fn dynamic(self) -> bool {
        self != Self::Fixed
    }

    pub fn fixed(self) -> bool {
        self != Self::Dynamic
    }
}

/// A parsed and validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub modulations: [Modulation; 2],
    pub power_db: [f64; 2],
    pub sigma_db: [f64; 2],
    /// Swept values in dB (Eb/N0, power ratio or channel gap).
    pub grid: Vec<f64>,
    /// Eb/N0 used by the parameter sweeps and reports.
    pub ebn0_db: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: ModeSelection,
    pub emit_theory: bool,
    pub emit_sim: bool,
    /// Mixture terms for `fit-report`.
    pub components: usize,
    /// Sample count for `fit-report` and `pdf-report`.
    pub samples: usize,
    /// Keys that took their default value.
    pub defaulted: Vec<&'static str>,
}

/// Keys in the order they are echoed.
pub const KEYS: [&str; 15] = [
    "experiment",
    "modulation1",
    "modulation2",
    "power1_db",
    "power2_db",
    "sigma1_db",
    "sigma2_db",
    "grid",
    "ebn0_db",
    "trials",
    "seed",
    "mode",
    "emit_theory",
    "emit_sim",
    "components",
];

const SAMPLES_KEY: &str = "samples";

impl Default for ExperimentSpec {
    /// BPSK with the powers -2.22/-3.98 dB and channel gains 20/7.96 dB.
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::BerVsSnr,
            modulations: [Modulation::Bpsk, Modulation::Bpsk],
            power_db: [-2.22, -3.98],
            sigma_db: [20.0, 7.96],
            grid: (0..=6).map(|i| 5.0 * i as f64).collect(),
            ebn0_db: 20.0,
            trials: 100_000,
            seed: 1,
            mode: ModeSelection::Dynamic,
            emit_theory: true,
            emit_sim: true,
            components: 1,
            samples: 1_000_000,
            defaulted: Vec::new(),
        }
    }
}

/// `a:step:b` (inclusive) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let grid = if parts.len() == 3 {
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        let nums = nums.map_err(|e| format!("bad range: {e}"))?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err("range needs a positive step and stop ≥ start".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value `{v}`: {e}"))).collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err("grid must be a non-empty list of finite numbers".into());
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err("grid must be strictly increasing".into());
    }
    Ok(grid)
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn number<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

/// Parses and validates config text.
pub fn validate_spec(text: &str) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let mut seen: Vec<(&'static str, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| CliError::Config { line, key: key.to_string(), message };
        let (key, value) = content.split_once('=').ok_or_else(|| err(content, "expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let known = KEYS.iter().chain(std::iter::once(&SAMPLES_KEY)).find(|k| **k == key);
        let Some(&known) = known else {
            return Err(err(key, "unknown key".into()));
        };
        if seen.iter().any(|(k, _)| *k == known) {
            return Err(err(key, "duplicate key".into()));
        }
        seen.push((known, line));
        let parsed: Result<(), String> = (|| {
            match known {
                "experiment" => spec.experiment = value.parse()?,
                "modulation1" => spec.modulations[0] = value.parse().map_err(|e: noma_sic_core::Error| e.to_string())?,
                "modulation2" => spec.modulations[1] = value.parse().map_err(|e: noma_sic_core::Error| e.to_string())?,
                "power1_db" => spec.power_db[0] = number(value)?,
                "power2_db" => spec.power_db[1] = number(value)?,
                "sigma1_db" => spec.sigma_db[0] = number(value)?,
                "sigma2_db" => spec.sigma_db[1] = number(value)?,
                "grid" => spec.grid = parse_grid(value)?,
                "ebn0_db" => spec.ebn0_db = number(value)?,
                "trials" => spec.trials = number(value)?,
                "seed" => spec.seed = number(value)?,
                "mode" => {
                    spec.mode = match value {
                        "dynamic" => ModeSelection::Dynamic,
                        "fixed" => ModeSelection::Fixed,
                        "both" => ModeSelection::Both,
                        _ => return Err(format!("expected dynamic, fixed or both, got `{value}`")),
                    }
                }
                "emit_theory" => spec.emit_theory = parse_bool(value)?,
                "emit_sim" => spec.emit_sim = parse_bool(value)?,
                "components" => spec.components = number(value)?,
                "samples" => spec.samples = number(value)?,
                _ => unreachable!(),
            }
            Ok(())
        })();
        parsed.map_err(|m| err(key, m))?;
    }
    spec.defaulted = KEYS.iter().chain(std::iter::once(&SAMPLES_KEY)).copied().filter(|k| !seen.iter().any(|(s, _)| s == k)).collect();
    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
    check(&spec, line_of)?;
    Ok(spec)
}

fn check(spec: &ExperimentSpec, line_of: impl Fn(&str) -> usize) -> CliResult<()> {
    let fail = |key: &str, message: &str| Err(CliError::Config { line: line_of(key), key: key.to_string(), message: message.to_string() });
    if spec.power_db[0] <= spec.power_db[1] {
        return fail(
            "power1_db",
            "range error: the first decoding position must get strictly more power than the second (power1_db > power2_db)",
        );
    }
    if spec.experiment != ExperimentKind::PowerRatioSweep {
        if let Err(e) = PowerSplit::from_db(spec.power_db[0], spec.power_db[1]) {
            return fail("power2_db", &format!("range error: {e}"));
        }
    } else if spec.grid.iter().any(|&r| r <= 0.0) {
        return fail("grid", "range error: power ratios must be positive dB values");
    }
    if spec.sigma_db.iter().any(|s| !s.is_finite()) {
        return fail("sigma1_db", "channel gains must be finite");
    }
    if spec.trials == 0 {
        return fail("trials", "range error: trials must be at least 1");
    }
    if !spec.emit_theory && !spec.emit_sim {
        return fail("emit_sim", "at least one of emit_theory and emit_sim must be true");
    }
    if !(spec.components == 1 || spec.components == 3) {
        return fail("components", "range error: components must be 1 or 3");
    }
    if spec.samples < 1000 {
        return fail("samples", "range error: samples must be at least 1000");
    }
    Ok(())
}

impl ExperimentSpec {
    /// Config text that parses back to the same spec.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.grid.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let _ = writeln!(s, "modulation1 = {}", self.modulations[0].name());
        let _ = writeln!(s, "modulation2 = {}", self.modulations[1].name());
        let _ = writeln!(s, "power1_db = {}", self.power_db[0]);
        let _ = writeln!(s, "power2_db = {}", self.power_db[1]);
        let _ = writeln!(s, "sigma1_db = {}", self.sigma_db[0]);
        let _ = writeln!(s, "sigma2_db = {}", self.sigma_db[1]);
        let _ = writeln!(s, "grid = {}", grid.join(","));
        let _ = writeln!(s, "ebn0_db = {}", self.ebn0_db);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mode = {}", self.mode.name());
        let _ = writeln!(s, "emit_theory = {}", self.emit_theory);
        let _ = writeln!(s, "emit_sim = {}", self.emit_sim);
        let _ = writeln!(s, "components = {}", self.components);
        let _ = writeln!(s, "samples = {}", self.samples);
        s
    }
}
