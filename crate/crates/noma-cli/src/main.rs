use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noma_sic::config::{validate_spec, ExperimentSpec};
use noma_sic::experiments::{evaluate_curves, evaluate_fits, figure_specs, first_order_pdf_report, run_experiment, theory_at};
use noma_sic::output::CURVE_HEADER;
use noma_sic::runner::resolve_threads;
use noma_sic::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "noma-sic", version, about = "Error analysis and simulation of two-user uplink NOMA with SIC")]
struct Cli {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per point (overrides the config).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads. NOMA_SIC_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Fit Gaussian mixtures to the conditioned real parts.
    Fit(ScenarioArgs),
    /// Compare first-position statistic densities with histograms.
    Pdf(ScenarioArgs),
    /// Print conditional error probabilities by decoding branch.
    Pep(ScenarioArgs),
    /// Theoretical BER curve as CSV on stdout.
    BerTheory(ScenarioArgs),
    /// Simulated BER curve as CSV on stdout.
    BerSim(ScenarioArgs),
    /// Reproduce a figure's data (fig3, fig4, fig5, fig6 or fig7).
    Reproduce { figure: String },
}

/// Scenario keys, same names and units as the config file.
#[derive(Args, Default)]
struct ScenarioArgs {
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    modulation1: Option<String>,
    #[arg(long)]
    modulation2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    power1_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    power2_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma1_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma2_db: Option<f64>,
    /// `start:step:stop` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ebn0_db: Option<f64>,
    /// dynamic, fixed or both.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

impl ScenarioArgs {
    fn config_text(&self) -> String {
        let mut lines = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                lines.push(format!("{k} = {v}"));
            }
        };
        push("experiment", self.experiment.clone());
        push("modulation1", self.modulation1.clone());
        push("modulation2", self.modulation2.clone());
        push("power1_db", self.power1_db.map(|v| v.to_string()));
        push("power2_db", self.power2_db.map(|v| v.to_string()));
        push("sigma1_db", self.sigma1_db.map(|v| v.to_string()));
        push("sigma2_db", self.sigma2_db.map(|v| v.to_string()));
        push("grid", self.grid.clone());
        push("ebn0_db", self.ebn0_db.map(|v| v.to_string()));
        push("mode", self.mode.clone());
        push("components", self.components.map(|v| v.to_string()));
        push("samples", self.samples.map(|v| v.to_string()));
        lines.join("\n")
    }
}

fn apply_overrides(mut spec: ExperimentSpec, cli: &Cli) -> CliResult<ExperimentSpec> {
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(t) = cli.trials {
        if t == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        spec.trials = t;
    }
    Ok(spec)
}

fn scenario_spec(args: &ScenarioArgs, cli: &Cli, emit_theory: bool, emit_sim: bool) -> CliResult<ExperimentSpec> {
    let mut text = args.config_text();
    text.push_str(&format!("\nemit_theory = {emit_theory}\nemit_sim = {emit_sim}\n"));
    apply_overrides(validate_spec(&text)?, cli)
}

fn print_curves(spec: &ExperimentSpec, threads: usize) -> CliResult<()> {
    let results = evaluate_curves(spec, threads)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::stdout());
    println!("{CURVE_HEADER}");
    for r in &results.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let threads = resolve_threads(cli.threads);
    match &cli.command {
        Command::Run { config } => {
            let text = fs::read_to_string(config)?;
            let spec = apply_overrides(validate_spec(&text)?, cli)?;
            report(&run_experiment(&spec, &cli.out, threads)?);
        }
        Command::Fit(args) => {
            let spec = scenario_spec(args, cli, true, false)?;
            for (ue, order, fit) in evaluate_fits(&spec)? {
                println!("# UE {} decoded at position {order}: rms {:.3e}, {} iterations", ue + 1, fit.rms, fit.iterations);
                print!("{}", fit.mixture.to_text());
            }
        }
        Command::Pdf(args) => {
            let spec = scenario_spec(args, cli, true, false)?;
            println!("ue,z,empirical,theory");
            for ue in 0..2 {
                let (rows, gap) = first_order_pdf_report(&spec, ue)?;
                for r in rows {
                    println!("{},{},{},{}", r.ue, r.z, r.empirical, r.theory);
                }
                eprintln!("UE {}: sup-norm gap {:.4} of the histogram peak", ue + 1, gap);
            }
        }
        Command::Pep(args) => {
            let spec = scenario_spec(args, cli, true, false)?;
            println!("param,ue,mode,first_probability,first,second_correct,second_incorrect,second,total");
            for &param in &spec.grid {
                for mode in ["dynamic", "fixed"] {
                    if (mode == "dynamic" && !spec.mode.dynamic()) || (mode == "fixed" && !spec.mode.fixed()) {
                        continue;
                    }
                    let t = theory_at(&spec, param, mode)?;
                    for (ue, b) in t.ue.iter().enumerate() {
                        println!(
                            "{param},{},{mode},{},{},{},{},{},{}",
                            ue + 1,
                            b.first_probability,
                            b.branches.first,
                            b.branches.second_correct,
                            b.branches.second_incorrect,
                            b.second,
                            b.total
                        );
                    }
                }
            }
        }
        Command::BerTheory(args) => print_curves(&scenario_spec(args, cli, true, false)?, threads)?,
        Command::BerSim(args) => print_curves(&scenario_spec(args, cli, false, true)?, threads)?,
        Command::Reproduce { figure } => {
            for (name, spec) in figure_specs(figure)? {
                let spec = apply_overrides(spec, cli)?;
                report(&run_experiment(&spec, &Path::new(&cli.out).join(name), threads)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Config { .. } | CliError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
