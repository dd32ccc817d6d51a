//! Parallel fan-out of simulation blocks.

use rayon::prelude::*;

use noma_sic_core::simcore::{assemble_curve, run_block, BerCurve, Link, SimConfig, Tally};

use crate::error::CliResult;

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "NOMA_SIC_THREADS";

/// Worker count: `NOMA_SIC_THREADS` if set and valid, else `flag`, else the
/// number of available cores.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    let env = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    env.or(flag.filter(|&n| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every config on a pool of `threads` workers. Each (config, point,
/// block) job uses its own RNG stream and tallies are summed, so the result
/// does not depend on `threads`.
pub fn simulate(configs: &[SimConfig], threads: usize) -> CliResult<Vec<BerCurve>> {
    let links = configs.iter().map(Link::new).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| {
            (0..cfg.grid_db.len()).flat_map(move |p| (0..cfg.blocks_per_point()).map(move |b| (c, p, b)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let tallies: Vec<Tally> = pool.install(|| jobs.par_iter().map(|&(c, p, b)| run_block(&links[c], p, b)).collect());
    let mut per_point: Vec<Vec<Tally>> = configs.iter().map(|c| vec![Tally::default(); c.grid_db.len()]).collect();
    for (&(c, p, _), t) in jobs.iter().zip(&tallies) {
        per_point[c][p].merge(t);
    }
    configs.iter().zip(per_point).map(|(cfg, t)| Ok(assemble_curve(cfg, t)?)).collect()
}
