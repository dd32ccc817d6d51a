//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p noma-sic --test acceptance`.

use std::time::{Duration, Instant};

use noma_sic::config::{ExperimentKind, ExperimentSpec, ModeSelection};
use noma_sic::experiments::{evaluate_curves, fit_real_part, CurveResults};
use noma_sic::runner::{resolve_threads, simulate};
use noma_sic_core::analytic::{
    pdf_z_first, pdf_z_second, pep_first, pep_second_correct, pep_second_incorrect, OtherSignal, PepContext, PowerSplit,
};
use noma_sic_core::channel::{
    order_probability, order_statistic_cdf, ordered_gain_density, pdf_ordered_gain_strong, pdf_ordered_gain_weak,
    rayleigh_cdf, rayleigh_pdf, real_part_mixture_exact, sample_channels, ChannelParams, GainForm, RadialDensity,
};
use noma_sic_core::modem::Modulation::{self, *};
use noma_sic_core::numerics::{integrate_real_line, integrate_semi_infinite, Quadrature};
use noma_sic_core::simcore::{block_rng, SicMode, SimConfig};
use noma_sic_core::{db_to_linear, linear_to_db};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Oracle accuracy, well inside every tolerance it is compared against.
fn tight() -> Quadrature {
    Quadrature::new(1e-10, 1e-18, 4000).unwrap()
}

fn fig3_channel() -> ChannelParams {
    ChannelParams::new(vec![10.0, 2.5]).unwrap()
}

fn threads() -> usize {
    resolve_threads(None)
}

/// Order probability and its Monte Carlo frequency.
fn criterion_1() -> Outcome {
    let p = order_probability(10.0, 2.5);
    let ch = fig3_channel();
    let mut rng = block_rng(11, 0, 0);
    let n = 1_000_000;
    let first = (0..n).filter(|_| sample_channels(&ch, &mut rng).order[0] == 0).count();
    let f = first as f64 / n as f64;
    outcome((p - 0.941176).abs() < 5e-7 && (f - p).abs() <= 0.002, format!("P = {p:.6}, MC = {f:.6}"))
}

/// Clean-cancellation PEP against quadrature of the Rayleigh-form density.
fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for g in [0.1, 1.0, 4.0, 10.0, 100.0] {
        let (sigma, p2, n0): (f64, f64, f64) = (2.5, 0.4, 1.0);
        let dist = (g * n0 / (p2 * sigma * sigma)).sqrt();
        let ctx = PepContext {
            power: PowerSplit::new(0.6, 0.4).unwrap(),
            noise_density: n0,
            desired_distance: dist,
            other: OtherSignal::Absent,
            gain: RadialDensity::rayleigh(sigma),
            interference: None,
        };
        let q = ctx.pep_by_quadrature(&tight()).unwrap();
        worst = worst.max(rel(pep_second_correct(dist, sigma, p2, n0), q));
    }
    outcome(worst < 1e-9, format!("max relative gap {worst:.2e}"))
}

fn first_ctx(ue: usize, ch: &ChannelParams, power: PowerSplit, n0: f64) -> PepContext {
    PepContext {
        power,
        noise_density: n0,
        desired_distance: 2.0,
        other: OtherSignal::Interferer(1.0),
        gain: ordered_gain_density(ue, 1, ch, GainForm::Approximate).unwrap(),
        interference: Some(real_part_mixture_exact(1 - ue, 2, ch).unwrap()),
    }
}

fn incorrect_ctx(ue: usize, ch: &ChannelParams, power: PowerSplit, n0: f64) -> PepContext {
    PepContext {
        power,
        noise_density: n0,
        desired_distance: 2.0,
        other: OtherSignal::Residual(2.0),
        gain: ordered_gain_density(ue, 2, ch, GainForm::Approximate).unwrap(),
        interference: Some(real_part_mixture_exact(1 - ue, 1, ch).unwrap()),
    }
}

/// Closed-form first-position and incorrect-branch PEPs against quadrature.
fn criterion_3() -> Outcome {
    let ch = fig3_channel();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for e in [0.0, 10.0, 20.0, 30.0, 40.0] {
        for r in [2.0, 4.0, 8.0, 12.0, 16.0] {
            let power = PowerSplit::from_ratio_db(r).unwrap();
            let n0 = 1.0 / db_to_linear(e);
            for ue in 0..2 {
                let f = first_ctx(ue, &ch, power, n0);
                let i = incorrect_ctx(ue, &ch, power, n0);
                let pairs = [
                    (pep_first(&f), f.pep_by_quadrature(&tight())),
                    (pep_second_incorrect(&i), i.pep_by_quadrature(&tight())),
                ];
                for (c, q) in pairs {
                    match (c, q) {
                        (Ok(c), Ok(q)) => worst = worst.max(rel(c, q)),
                        (c, q) => failures.push(format!("{e} dB/{r} dB UE{}: {c:?} {q:?}", ue + 1)),
                    }
                }
            }
        }
    }
    outcome(worst < 1e-6 && failures.is_empty(), format!("max relative gap {worst:.2e} over 100 cases; errors {failures:?}"))
}

/// Single-term fits of the second-position real parts.
fn criterion_4() -> Outcome {
    let spec = ExperimentSpec {
        experiment: ExperimentKind::FitReport,
        sigma_db: [20.0, linear_to_db(6.25)],
        samples: 1_000_000,
        components: 1,
        ..ExperimentSpec::default()
    };
    let want = [(0.2329, 2.422), (0.2326, 2.426)];
    let mut pass = true;
    let mut detail = Vec::new();
    for ue in 0..2 {
        match fit_real_part(&spec, ue, 2) {
            Ok(fit) => {
                let t = fit.mixture.terms()[0];
                let ok = (t.a - want[ue].0).abs() <= 0.01 && (t.c.abs() - want[ue].1).abs() <= 0.05;
                pass &= ok;
                detail.push(format!("UE{}: a = {:.4}, c = {:.4}", ue + 1, t.a, t.c.abs()));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("UE{}: {e}", ue + 1));
            }
        }
    }
    outcome(pass, detail.join("; "))
}

fn lookup(results: &CurveResults, param: f64, ue: u8, mode: &str, source: &str) -> Option<f64> {
    results.rows.iter().find(|r| r.param == param && r.ue == ue && r.mode == mode && r.source == source).map(|r| r.value)
}

fn bucket(results: &CurveResults, param: f64, ue: u8, lead: u8, source: &str) -> Option<f64> {
    results
        .buckets
        .iter()
        .find(|r| r.param == param && r.ue == ue && r.first_decoded == lead && r.mode == "dynamic" && r.source == source)
        .map(|r| r.value)
}

/// Compares theory and simulation where the simulated BER exceeds 1e-4.
fn compare_rows(results: &CurveResults, grid: &[f64], tol: f64, mode: &str, with_buckets: bool) -> (bool, Vec<String>) {
    let mut pass = true;
    let mut notes = Vec::new();
    for &x in grid {
        for ue in 1..=2u8 {
            let mut check = |label: String, th: Option<f64>, sim: Option<f64>| {
                if let (Some(th), Some(sim)) = (th, sim) {
                    if sim > 1e-4 {
                        let r = rel(th, sim);
                        if r > tol {
                            pass = false;
                            notes.push(format!("{label} th {th:.3e} sim {sim:.3e} ({:+.0}%)", 100.0 * (th / sim - 1.0)));
                        }
                    }
                }
            };
            check(format!("{x} UE{ue}"), lookup(results, x, ue, mode, "theory"), lookup(results, x, ue, mode, "sim"));
            if with_buckets {
                for lead in 1..=2u8 {
                    check(
                        format!("{x} UE{ue}|UE{lead} first"),
                        bucket(results, x, ue, lead, "theory"),
                        bucket(results, x, ue, lead, "sim"),
                    );
                }
            }
        }
    }
    (pass, notes)
}

/// BPSK BER curves, overall and per ordering bucket.
fn criterion_5() -> Outcome {
    let spec = ExperimentSpec { trials: 1_000_000, ..ExperimentSpec::default() };
    let results = evaluate_curves(&spec, threads()).unwrap();
    let (pass, notes) = compare_rows(&results, &spec.grid, 0.15, "dynamic", true);
    outcome(pass, if notes.is_empty() { "all points within 15%".to_string() } else { format!("outside 15%: {}", notes.join("; ")) })
}

/// Smallest power ratio where the simulated UE 1 BER is within twice the theory.
fn knee(m: Modulation, trials: u64) -> Option<f64> {
    let spec = ExperimentSpec {
        experiment: ExperimentKind::PowerRatioSweep,
        modulations: [m, m],
        sigma_db: [10.0, 0.0],
        ebn0_db: 20.0,
        grid: noma_sic::config::parse_grid("0.25:0.25:20").unwrap(),
        trials,
        ..ExperimentSpec::default()
    };
    let results = evaluate_curves(&spec, threads()).unwrap();
    spec.grid.iter().copied().find(|&x| {
        let th = lookup(&results, x, 1, "dynamic", "theory").unwrap();
        let sim = lookup(&results, x, 1, "dynamic", "sim").unwrap();
        sim <= 2.0 * th
    })
}

fn criterion_6() -> Outcome {
    let cases = [(Bpsk, 1.63, 1.0, 1_000_000), (Qam4, 4.33, 1.0, 1_000_000), (Qam16, 12.61, 2.0, 100_000), (Qam64, 19.05, 2.0, 100_000)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (m, target, tol, trials) in cases {
        let k = knee(m, trials);
        let ok = k.is_some_and(|k| (k - target).abs() <= tol);
        pass &= ok;
        detail.push(format!("{}: {} (target {target} ± {tol})", m.name(), k.map_or("none".into(), |k| format!("{k:.2} dB"))));
    }
    outcome(pass, detail.join("; "))
}

/// Channel-gap sweep.
fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [Bpsk, Qam4] {
        let spec = ExperimentSpec {
            experiment: ExperimentKind::ChannelGapSweep,
            modulations: [m, m],
            power_db: [-0.04, -20.0],
            sigma_db: [10.0, 10.0],
            ebn0_db: 20.0,
            grid: noma_sic::config::parse_grid("0:5:40").unwrap(),
            trials: 1_000_000,
            ..ExperimentSpec::default()
        };
        let results = evaluate_curves(&spec, threads()).unwrap();
        let wide: Vec<f64> = spec.grid.iter().copied().filter(|&g| g >= 10.0).collect();
        let (ok, notes) = compare_rows(&results, &wide, 0.20, "dynamic", false);
        let ue1: Vec<f64> = spec.grid.iter().map(|&g| lookup(&results, g, 1, "dynamic", "sim").unwrap()).collect();
        let monotone = ue1.windows(2).all(|w| w[1] <= w[0]);
        pass &= ok && monotone;
        detail.push(format!(
            "{}: {}; UE1 sim {} [{}]",
            m.name(),
            if notes.is_empty() { "within 20%".to_string() } else { format!("outside 20%: {}", notes.join(", ")) },
            if monotone { "nonincreasing" } else { "NOT monotone" },
            ue1.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
        ));
    }
    outcome(pass, detail.join(" | "))
}

/// UE BER at 35 and 45 dB for one SIC mode.
fn high_snr_pair(channel: ChannelParams, power: PowerSplit, modulations: [Modulation; 2], mode: SicMode, trials: u64) -> [[f64; 2]; 2] {
    let cfg = SimConfig { channel, power, modulations, grid_db: vec![35.0, 45.0], trials, mode, seed: 8 };
    let curve = simulate(&[cfg], threads()).unwrap().remove(0);
    [0, 1].map(|i| [curve.points[i].ue[0].ber, curve.points[i].ue[1].ber])
}

fn floor_test(channel: ChannelParams, power: PowerSplit, modulations: [Modulation; 2], ues: &[usize]) -> (bool, String) {
    let fixed = high_snr_pair(channel.clone(), power, modulations, SicMode::fixed_by_average_gain(&channel), 1_000_000);
    let dynamic = high_snr_pair(channel, power, modulations, SicMode::Dynamic, 50_000_000);
    let mut pass = true;
    let mut notes = Vec::new();
    for &ue in ues {
        let f_ok = rel(fixed[0][ue], fixed[1][ue]) < 0.2 || rel(fixed[1][ue], fixed[0][ue]) < 0.2;
        let drop = dynamic[0][ue] / dynamic[1][ue];
        let d_ok = dynamic[0][ue] > 0.0 && drop >= 5.0;
        pass &= d_ok && (ue != 0 || f_ok);
        notes.push(format!(
            "UE{}: fixed {:.3e} -> {:.3e}, dynamic {:.3e} -> {:.3e} (x{:.1})",
            ue + 1,
            fixed[0][ue],
            fixed[1][ue],
            dynamic[0][ue],
            dynamic[1][ue],
            drop
        ));
    }
    (pass, notes.join("; "))
}

/// Fixed SIC floors while dynamic SIC keeps falling.
fn criterion_8() -> Outcome {
    let (pass, detail) =
        floor_test(ChannelParams::two_ue_db(20.0, 7.96).unwrap(), PowerSplit::from_db(-2.22, -3.98).unwrap(), [Bpsk, Bpsk], &[0]);
    outcome(pass, detail)
}

/// Permanent-form order-statistic CDF against sort-and-count.
fn criterion_9() -> Outcome {
    let scales = [1.0, 2.0, 0.5];
    let ch = ChannelParams::new(scales.to_vec()).unwrap();
    let mut rng = block_rng(9, 0, 0);
    let n = 1_000_000;
    let mut sorted: Vec<[f64; 3]> = Vec::with_capacity(n);
    for _ in 0..n {
        let r = sample_channels(&ch, &mut rng);
        let mut m = [r.gains[0].norm(), r.gains[1].norm(), r.gains[2].norm()];
        m.sort_by(f64::total_cmp);
        sorted.push(m);
    }
    let cdfs: Vec<Box<dyn Fn(f64) -> f64>> = scales.iter().map(|&s| Box::new(move |x| rayleigh_cdf(x, s)) as Box<dyn Fn(f64) -> f64>).collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = cdfs.iter().map(|b| b.as_ref()).collect();
    let mut worst: f64 = 0.0;
    for rank in 1..=3 {
        for i in 1..=10 {
            let x = 0.25 * i as f64;
            let theory = order_statistic_cdf(x, rank, &refs).unwrap();
            let mc = sorted.iter().filter(|s| s[rank - 1] <= x).count() as f64 / n as f64;
            worst = worst.max((theory - mc).abs());
        }
    }
    outcome(worst < 2e-3, format!("max |CDF - MC| = {worst:.2e} over 30 points"))
}

/// Normalization of every exported density.
fn criterion_10() -> Outcome {
    let ch = fig3_channel();
    let (s1, s2) = (10.0, 2.5);
    let quad = tight();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut check = |name: String, mass: f64, tol: f64| {
        let ok = (mass - 1.0).abs() <= tol;
        pass &= ok;
        notes.push(format!("{name} {mass:.6}{}", if ok { "" } else { " FAIL" }));
    };
    for (own, other) in [(s1, s2), (s2, s1)] {
        check(format!("strong({own})"), integrate_semi_infinite(|x| pdf_ordered_gain_strong(x, own, other).unwrap(), &quad).unwrap(), 1e-6);
        check(format!("weak({own})"), integrate_semi_infinite(|x| pdf_ordered_gain_weak(x, own).unwrap(), &quad).unwrap(), 1e-6);
        check(format!("rayleigh({own})"), integrate_semi_infinite(|x| rayleigh_pdf(x, own), &quad).unwrap(), 1e-6);
    }
    let power = PowerSplit::from_db(-2.22, -3.98).unwrap();
    let n0 = 1.0 / db_to_linear(10.0);
    for ue in 0..2 {
        let f = first_ctx(ue, &ch, power, n0);
        check(format!("z first UE{}", ue + 1), integrate_semi_infinite(|z| pdf_z_first(z, &f).unwrap(), &quad).unwrap(), 0.02);
        let i = incorrect_ctx(ue, &ch, power, n0);
        check(format!("z incorrect UE{}", ue + 1), integrate_real_line(|z| pdf_z_second(z, &i, false).unwrap(), &quad).unwrap(), 0.02);
        check(format!("z correct UE{}", ue + 1), integrate_semi_infinite(|z| pdf_z_second(z, &i, true).unwrap(), &quad).unwrap(), 1e-6);
    }
    outcome(pass, notes.join(", "))
}

/// Mixed-modulation configurations.
fn criterion_11() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, mods) in [("config 1", [Qam4, Bpsk]), ("config 2", [Qam16, Qam4])] {
        let spec = ExperimentSpec {
            experiment: ExperimentKind::BerVsSnr,
            modulations: mods,
            power_db: [-0.46, -10.0],
            sigma_db: [20.0, 7.96],
            grid: noma_sic::config::parse_grid("0:5:30").unwrap(),
            trials: 1_000_000,
            mode: ModeSelection::Dynamic,
            ..ExperimentSpec::default()
        };
        let results = evaluate_curves(&spec, threads()).unwrap();
        let (ok, notes) = compare_rows(&results, &spec.grid, 0.20, "dynamic", false);
        let (floor_ok, floor) = floor_test(
            ChannelParams::two_ue_db(20.0, 7.96).unwrap(),
            PowerSplit::from_db(-0.46, -10.0).unwrap(),
            mods,
            &[0, 1],
        );
        pass &= ok && floor_ok;
        detail.push(format!(
            "{name}: {}; {floor}",
            if notes.is_empty() { "within 20%".to_string() } else { format!("outside 20%: {}", notes.join(", ")) }
        ));
    }
    outcome(pass, detail.join(" | "))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 11] = [
        (1, "order probability", Duration::from_secs(5), criterion_1),
        (2, "clean-cancellation PEP vs quadrature", Duration::from_secs(1), criterion_2),
        (3, "first-position and incorrect-branch PEP vs quadrature", Duration::from_secs(30), criterion_3),
        (4, "Gaussian-fit coefficients", Duration::from_secs(60), criterion_4),
        (5, "BPSK theory vs simulation incl. ordering buckets", Duration::from_secs(300), criterion_5),
        (6, "power-ratio knees", Duration::from_secs(600), criterion_6),
        (7, "channel-gap validity", Duration::from_secs(300), criterion_7),
        (8, "fixed-SIC floor vs dynamic SIC", Duration::from_secs(300), criterion_8),
        (9, "order-statistic CDF", Duration::from_secs(30), criterion_9),
        (10, "density normalization", Duration::from_secs(10), criterion_10),
        (11, "mixed-modulation configurations", Duration::from_secs(600), criterion_11),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:2} [{}] {name} ({:.1} s of {} s): {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { o.detail } else { format!("over time budget; {}", o.detail) }
        );
    }
    println!("acceptance: {failed} failing");
    if failed > 0 {
        std::process::exit(1);
    }
}
