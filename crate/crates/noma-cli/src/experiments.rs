//! Experiment families: theory and simulation curves, fits and density reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use noma_sic_core::analytic::{
    pdf_z_first, theory_ber, theory_ber_fixed, OtherSignal, PepContext, PowerSplit, TheoryConfig, TheoryPoint,
};
use noma_sic_core::channel::{ordered_gain_density, real_part_mixture_exact, sample_channels, ChannelParams, GainForm};
use noma_sic_core::gaussfit::{fit_mixture, MixtureFit};
use noma_sic_core::modem::scaling_factor;
use noma_sic_core::numerics::{histogram_pdf, histogram_pdf_padded, rice_bins, Quadrature};
use noma_sic_core::simcore::{block_rng, collect_statistics, BerCurve, SicMode, SimConfig, Statistic};
use noma_sic_core::db_to_linear;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::{CliError, CliResult};
use crate::output::{gnuplot_script, write_manifest, write_rows, BucketRow, CurveRow};
use crate::runner::simulate;

/// Channel, power split and Eb/N0 at one swept value.
pub fn scenario(spec: &ExperimentSpec, param: f64) -> CliResult<(ChannelParams, PowerSplit, f64)> {
    let from_db = || PowerSplit::from_db(spec.power_db[0], spec.power_db[1]);
    Ok(match spec.experiment {
        ExperimentKind::PowerRatioSweep => {
            (ChannelParams::two_ue_db(spec.sigma_db[0], spec.sigma_db[1])?, PowerSplit::from_ratio_db(param)?, spec.ebn0_db)
        }
        ExperimentKind::ChannelGapSweep => {
            (ChannelParams::two_ue_db(spec.sigma_db[1] + param, spec.sigma_db[1])?, from_db()?, spec.ebn0_db)
        }
        _ => (ChannelParams::two_ue_db(spec.sigma_db[0], spec.sigma_db[1])?, from_db()?, param),
    })
}

/// Label of the swept axis.
pub fn axis_label(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::PowerRatioSweep => "10 log10(p1/p2) (dB)",
        ExperimentKind::ChannelGapSweep => "sigma1^2 - sigma2^2 (dB)",
        _ => "Eb/N0 (dB)",
    }
}

fn modes(spec: &ExperimentSpec) -> Vec<&'static str> {
    let both = matches!(spec.experiment, ExperimentKind::SicCompare | ExperimentKind::Hetero);
    let mut m = Vec::new();
    if spec.mode.dynamic() || both {
        m.push("dynamic");
    }
    if spec.mode.fixed() || both {
        m.push("fixed");
    }
    m
}

fn sim_mode(mode: &str, channel: &ChannelParams) -> SicMode {
    if mode == "fixed" { SicMode::fixed_by_average_gain(channel) } else { SicMode::Dynamic }
}

/// Seed of grid entry `index`, so swept points draw independent streams.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Theory at one swept value.
pub fn theory_at(spec: &ExperimentSpec, param: f64, mode: &str) -> CliResult<TheoryPoint> {
    let (channel, power, ebn0) = scenario(spec, param)?;
    let cfg = TheoryConfig::new(channel, power, spec.modulations);
    Ok(if mode == "fixed" { theory_ber_fixed(&cfg, ebn0, &Quadrature::default())? } else { theory_ber(&cfg, ebn0)? })
}

/// One single-point simulation config per swept value.
pub fn sim_configs(spec: &ExperimentSpec, mode: &str) -> CliResult<Vec<SimConfig>> {
    spec.grid
        .iter()
        .enumerate()
        .map(|(i, &param)| {
            let (channel, power, ebn0) = scenario(spec, param)?;
            let mode = sim_mode(mode, &channel);
            Ok(SimConfig {
                channel,
                power,
                modulations: spec.modulations,
                grid_db: vec![ebn0],
                trials: spec.trials,
                mode,
                seed: point_seed(spec.seed, i),
            })
        })
        .collect()
}

/// Rows produced by a curve experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveResults {
    pub rows: Vec<CurveRow>,
    pub buckets: Vec<BucketRow>,
}

/// Evaluates theory and/or simulation for a curve experiment.
pub fn evaluate_curves(spec: &ExperimentSpec, threads: usize) -> CliResult<CurveResults> {
    let mut out = CurveResults::default();
    for mode in modes(spec) {
        if spec.emit_theory {
            for &param in &spec.grid {
                let t = theory_at(spec, param, mode)?;
                for ue in 0..2 {
                    out.rows.push(CurveRow {
                        param,
                        ue: ue as u8 + 1,
                        mode: mode.into(),
                        source: "theory".into(),
                        value: t.ue[ue].total,
                        ci95: None,
                        trials: None,
                    });
                }
                if mode == "dynamic" {
                    for lead in 0..2 {
                        for ue in 0..2 {
                            let b = t.ue[ue];
                            let value = if lead == ue { b.branches.first } else { b.second };
                            out.buckets.push(BucketRow {
                                param,
                                ue: ue as u8 + 1,
                                first_decoded: lead as u8 + 1,
                                mode: mode.into(),
                                source: "theory".into(),
                                value,
                                ci95: None,
                                trials: None,
                            });
                        }
                    }
                }
            }
        }
        if spec.emit_sim {
            let curves = simulate(&sim_configs(spec, mode)?, threads)?;
            push_sim_rows(&mut out, &spec.grid, mode, &curves);
        }
    }
    Ok(out)
}

fn push_sim_rows(out: &mut CurveResults, grid: &[f64], mode: &str, curves: &[BerCurve]) {
    for (&param, curve) in grid.iter().zip(curves) {
        let p = &curve.points[0];
        for ue in 0..2 {
            out.rows.push(CurveRow {
                param,
                ue: ue as u8 + 1,
                mode: mode.into(),
                source: "sim".into(),
                value: p.ue[ue].ber,
                ci95: Some(p.ue[ue].ci95),
                trials: Some(p.tally.trials),
            });
            for lead in 0..2 {
                if let Some(e) = p.buckets[lead][ue] {
                    out.buckets.push(BucketRow {
                        param,
                        ue: ue as u8 + 1,
                        first_decoded: lead as u8 + 1,
                        mode: mode.into(),
                        source: "sim".into(),
                        value: e.ber,
                        ci95: Some(e.ci95),
                        trials: Some(p.tally.bucket_trials[lead]),
                    });
                }
            }
        }
    }
}

/// Fitted coefficients of one conditioned real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub ue: u8,
    pub order: u8,
    pub term: u8,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms: f64,
    pub iterations: usize,
}

/// Fits `ℜ{h_ue}` given decoding position `order` from `samples` draws.
pub fn fit_real_part(spec: &ExperimentSpec, ue: usize, order: usize) -> CliResult<MixtureFit> {
    let (channel, power, _) = scenario(spec, spec.grid[0])?;
    let cfg = SimConfig {
        channel,
        power,
        modulations: spec.modulations,
        grid_db: vec![0.0],
        trials: 1,
        mode: SicMode::Dynamic,
        seed: point_seed(spec.seed, 2 * ue + order),
    };
    let samples = collect_statistics(&cfg, Statistic::RealPart { ue, order }, spec.samples)?;
    let bins = rice_bins(samples.len());
    let pdf = histogram_pdf_padded(&samples, bins, bins / 10)?;
    Ok(fit_mixture(&pdf, spec.components)?)
}

/// Fits for both UEs and both positions.
pub fn evaluate_fits(spec: &ExperimentSpec) -> CliResult<Vec<(usize, usize, MixtureFit)>> {
    let mut out = Vec::new();
    for ue in 0..2 {
        for order in 1..=2 {
            out.push((ue, order, fit_real_part(spec, ue, order)?));
        }
    }
    Ok(out)
}

/// Theoretical and histogram densities of the first-position statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfRow {
    pub ue: u8,
    pub z: f64,
    pub empirical: f64,
    pub theory: f64,
}

/// Samples `z = (√p₁·2d·|h_n| + 2√p₂·d_m·ℜ{h_m e^{-jθ_n}})/√(2N₀)` over
/// realizations in which `ue` is decoded first, for the smallest interferer
/// amplitude, and compares the histogram with the closed-form density.
/// Returns the rows and the sup-norm gap relative to the histogram peak.
pub fn first_order_pdf_report(spec: &ExperimentSpec, ue: usize) -> CliResult<(Vec<PdfRow>, f64)> {
    let (channel, power, ebn0) = scenario(spec, spec.grid[0])?;
    let ebn0 = if spec.experiment == ExperimentKind::PdfReport { spec.ebn0_db } else { ebn0 };
    let n0 = 1.0 / db_to_linear(ebn0);
    let other = 1 - ue;
    let d = scaling_factor(spec.modulations[ue].order(), 1.0)?;
    let d_other = scaling_factor(spec.modulations[other].order(), 1.0)?;
    let (k1, k2) = (power.first().sqrt() * 2.0 * d, 2.0 * power.second().sqrt() * d_other);
    let scale = (2.0 * n0).sqrt();
    let mut rng = block_rng(spec.seed, ue, 0);
    let mut z = Vec::with_capacity(spec.samples);
    while z.len() < spec.samples {
        let r = sample_channels(&channel, &mut rng);
        if r.order[0] != ue {
            continue;
        }
        let hn = r.gains[ue];
        let rotated = r.gains[other] * hn.conj() / hn.norm();
        z.push((k1 * hn.norm() + k2 * rotated.re) / scale);
    }
    let ctx = PepContext {
        power,
        noise_density: n0,
        desired_distance: 2.0 * d,
        other: OtherSignal::Interferer(d_other),
        gain: ordered_gain_density(ue, 1, &channel, GainForm::Approximate)?,
        interference: Some(real_part_mixture_exact(other, 2, &channel)?),
    };
    let hist = histogram_pdf(&z, rice_bins(z.len()))?;
    let mut rows = Vec::new();
    let mut gap: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (center, &emp) in hist.centers().iter().zip(hist.densities()) {
        if *center < 0.0 {
            continue;
        }
        let theory = pdf_z_first(*center, &ctx)?;
        gap = gap.max((theory - emp).abs());
        peak = peak.max(emp);
        rows.push(PdfRow { ue: ue as u8 + 1, z: *center, empirical: emp, theory });
    }
    Ok((rows, if peak > 0.0 { gap / peak } else { f64::INFINITY }))
}

/// Runs an experiment and writes its files into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, threads: usize) -> CliResult<Vec<PathBuf>> {
    let start = Instant::now();
    fs::create_dir_all(out_dir)?;
    let mut files: Vec<PathBuf> = Vec::new();
    match spec.experiment {
        ExperimentKind::FitReport => {
            let fits = evaluate_fits(spec)?;
            let mut rows = Vec::new();
            for (ue, order, fit) in &fits {
                let path = out_dir.join(format!("fit_ue{}_order{}.txt", ue + 1, order));
                fs::write(&path, fit.mixture.to_text())?;
                files.push(path);
                for (i, t) in fit.mixture.terms().iter().enumerate() {
                    rows.push(FitRow {
                        ue: *ue as u8 + 1,
                        order: *order as u8,
                        term: i as u8 + 1,
                        a: t.a,
                        b: t.b,
                        c: t.c,
                        rms: fit.rms,
                        iterations: fit.iterations,
                    });
                }
            }
            let path = out_dir.join("fit.csv");
            write_rows(&path, &rows)?;
            files.push(path);
        }
        ExperimentKind::PdfReport => {
            let mut rows = Vec::new();
            for ue in 0..2 {
                rows.extend(first_order_pdf_report(spec, ue)?.0);
            }
            let path = out_dir.join("pdf.csv");
            write_rows(&path, &rows)?;
            files.push(path);
        }
        _ => {
            let results = evaluate_curves(spec, threads)?;
            let name = format!("{}.csv", spec.experiment.name());
            let path = out_dir.join(&name);
            write_rows(&path, &results.rows)?;
            files.push(path);
            let path = out_dir.join("buckets.csv");
            write_rows(&path, &results.buckets)?;
            files.push(path);
            let path = out_dir.join("plot.gp");
            fs::write(&path, gnuplot_script(&name, axis_label(spec.experiment), &results.rows))?;
            files.push(path);
        }
    }
    let manifest = out_dir.join("manifest.txt");
    let names: Vec<String> =
        files.iter().map(|p| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())).collect();
    write_manifest(&manifest, &spec.to_config_text(), &spec.defaulted, threads, start.elapsed().as_secs_f64(), &names)?;
    files.push(manifest);
    Ok(files)
}

/// Presets for the figure reproductions.
pub fn figure_specs(figure: &str) -> CliResult<Vec<(String, ExperimentSpec)>> {
    let base = ExperimentSpec::default();
    let snr = |modulations, power_db, sigma_db, grid: Vec<f64>, experiment| ExperimentSpec {
        experiment,
        modulations,
        power_db,
        sigma_db,
        grid,
        ..base.clone()
    };
    use noma_sic_core::modem::Modulation::*;
    let range = |a: f64, step: f64, b: f64| crate::config::parse_grid(&format!("{a}:{step}:{b}")).expect("valid preset grid");
    Ok(match figure {
        "fig3" => vec![("fig3".into(), snr([Bpsk, Bpsk], [-2.22, -3.98], [20.0, 7.96], range(0.0, 5.0, 30.0), ExperimentKind::BerVsSnr))],
        "fig4" => [Bpsk, Qam4, Qam16, Qam64]
            .into_iter()
            .map(|m| {
                (
                    format!("fig4_{}", m.name()),
                    ExperimentSpec {
                        ebn0_db: 20.0,
                        ..snr([m, m], [-0.46, -10.0], [10.0, 0.0], range(0.25, 0.25, 20.0), ExperimentKind::PowerRatioSweep)
                    },
                )
            })
            .collect(),
        "fig5" => [Bpsk, Qam4, Qam16, Qam64]
            .into_iter()
            .map(|m| {
                (
                    format!("fig5_{}", m.name()),
                    ExperimentSpec {
                        ebn0_db: 20.0,
                        ..snr([m, m], [-0.04, -20.0], [10.0, 10.0], range(0.0, 5.0, 40.0), ExperimentKind::ChannelGapSweep)
                    },
                )
            })
            .collect(),
        "fig6" => vec![
            ("fig6_bpsk".into(), snr([Bpsk, Bpsk], [-2.22, -3.98], [20.0, 7.96], range(0.0, 5.0, 45.0), ExperimentKind::SicCompare)),
            ("fig6_4qam".into(), snr([Qam4, Qam4], [-0.46, -10.0], [20.0, 7.96], range(0.0, 5.0, 45.0), ExperimentKind::SicCompare)),
            ("fig6_16qam".into(), snr([Qam16, Qam16], [-0.04, -20.0], [38.06, 26.02], range(0.0, 5.0, 45.0), ExperimentKind::SicCompare)),
            ("fig6_64qam".into(), snr([Qam64, Qam64], [-0.04, -20.0], [38.06, 26.02], range(0.0, 5.0, 45.0), ExperimentKind::SicCompare)),
        ],
        "fig7" => vec![
            ("fig7_config1".into(), snr([Qam4, Bpsk], [-0.46, -10.0], [20.0, 7.96], range(0.0, 5.0, 45.0), ExperimentKind::Hetero)),
            ("fig7_config2".into(), snr([Qam16, Qam4], [-0.46, -10.0], [20.0, 7.96], range(0.0, 5.0, 45.0), ExperimentKind::Hetero)),
            ("fig7_config3".into(), snr([Qam64, Bpsk], [-0.04, -20.0], [38.06, 26.02], range(0.0, 5.0, 45.0), ExperimentKind::Hetero)),
        ],
        other => return Err(CliError::Usage(format!("unknown figure `{other}`, expected fig3 to fig7"))),
    })
}
