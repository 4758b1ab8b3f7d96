//! Experiment orchestration: configs, seeded parallel batches, checks,
//! reports and plot data.
//!
//! Episodes run in parallel but are collected in index order, and every
//! aggregate is a compensated sum over that order, so reports are
//! bit-identical for any thread count.

pub mod checks;
pub mod config;
pub mod plot;
pub mod report;
pub mod scenarios;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::estimators::{estimate_dependence, Batch, EffSampleSizes, EpisodeSummary, Snapshot};
use crate::protocol::{run_episode, EpisodeRecord};
use crate::rng::{mix64, split_seed};

pub use checks::{CheckResult, PlotRow, VariantData};
pub use config::{ArmConfig, CheckSpec, ExperimentConfig, Variant};
pub use plot::{emit_plotdata, parse_plotdata, write_all_plotdata};
pub use report::{RunReport, VariantSummary};
pub use scenarios::{scenario, scenario_names, SCENARIOS};

const VARIANT_SALT: u64 = 0x5851_f42d_4c95_7f2d;

/// Root seed of variant `v`; the first variant uses the run's root seed.
pub fn variant_root(root: u64, v: usize) -> u64 {
    if v == 0 {
        root
    } else {
        mix64(root ^ VARIANT_SALT.wrapping_mul(v as u64))
    }
}

fn snapshots(rec: &EpisodeRecord, times: &[u64]) -> Vec<Option<Snapshot>> {
    let mut out = Vec::with_capacity(times.len());
    let mut counts = vec![0u64; rec.n_arms];
    let mut sums = vec![0f64; rec.n_arms];
    let mut t = 0u64;
    for &target in times {
        if target > rec.stop_time {
            out.push(None);
            continue;
        }
        while t < target {
            let a = rec.actions[t as usize];
            counts[a] += 1;
            sums[a] += rec.rewards[t as usize];
            t += 1;
        }
        out.push(Some(Snapshot {
            time: target,
            counts: counts.clone(),
            sums: sums.clone(),
        }));
    }
    out
}

fn simulate(variant: &config::ResolvedVariant, n_reps: usize, root: u64, times: &[u64]) -> Result<VariantData> {
    let per_episode: Vec<(EpisodeSummary, Vec<Option<Snapshot>>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let rec = run_episode(&variant.arms, &variant.bundle, split_seed(root, i))?;
            Ok((EpisodeSummary::from_record(&rec), snapshots(&rec, times)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (summaries, snapshots) = per_episode.into_iter().unzip();
    Ok(VariantData {
        summaries,
        snapshots,
        times: times.to_vec(),
    })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".to_string())
}

fn summarize(label: &str, variant: &config::ResolvedVariant, data: &Result<VariantData>, include_truncated: bool) -> VariantSummary {
    let k = variant.arms.len();
    let mut s = VariantSummary {
        label: label.to_string(),
        n_reps: 0,
        n_truncated: 0,
        truncation_fraction: 0.0,
        mean_stop_time: f64::NAN,
        choice_frequencies: vec![0.0; k],
        choice_entropy: 0.0,
        mean_counts: vec![0.0; k],
        n_eff: vec![None; k],
        error: None,
    };
    let data = match data {
        Ok(d) => d,
        Err(e) => {
            s.error = Some(e.to_string());
            return s;
        }
    };
    let batch = Batch::new(data.summaries.clone(), &variant.arms, variant.bundle.clock_step, include_truncated);
    let n = batch.len() as f64;
    s.n_reps = batch.len();
    s.n_truncated = batch.truncated();
    s.truncation_fraction = batch.truncation_fraction();
    s.mean_stop_time = data.summaries.iter().map(|e| e.stop.time as f64).collect::<crate::numeric::CompensatedSum>().value() / n;
    if let Ok(dep) = estimate_dependence(&batch) {
        s.choice_frequencies = dep.p;
        s.choice_entropy = dep.entropy;
    }
    for arm in 0..k {
        let counts: Vec<f64> = data.summaries.iter().map(|e| e.stop.counts[arm] as f64).collect();
        s.mean_counts[arm] = counts.iter().copied().collect::<crate::numeric::CompensatedSum>().value() / n;
        s.n_eff[arm] = EffSampleSizes::from_counts(counts).ok().map(|e| e.n_eff());
    }
    s
}

/// Run a configuration on the global thread pool.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    let variants = config.resolve()?;
    let times = config.snapshot_times();
    let data: Vec<Result<VariantData>> = variants
        .iter()
        .enumerate()
        .map(|(v, rv)| {
            catch_unwind(AssertUnwindSafe(|| simulate(rv, config.n_reps, variant_root(config.root_seed, v), &times)))
                .unwrap_or_else(|p| Err(Error::Protocol(format!("simulation panicked: {}", panic_message(p)))))
        })
        .collect();

    let summaries = variants
        .iter()
        .zip(&data)
        .map(|(rv, d)| summarize(&rv.label, rv, d, config.include_truncated))
        .collect();

    let mut checks = Vec::new();
    for spec in &config.checks {
        let failure = variants.iter().zip(&data).find_map(|(rv, d)| d.as_ref().err().map(|e| format!("variant `{}`: {e}", rv.label)));
        let outcome = match failure {
            Some(msg) => Err(Error::Protocol(msg)),
            None => {
                let ctxs: Vec<checks::Ctx<'_>> = variants
                    .iter()
                    .zip(&data)
                    .map(|(rv, d)| checks::Ctx {
                        config,
                        variant: rv,
                        data: d.as_ref().expect("checked above"),
                    })
                    .collect();
                catch_unwind(AssertUnwindSafe(|| checks::evaluate(spec, &ctxs)))
                    .unwrap_or_else(|p| Err(Error::Protocol(format!("check panicked: {}", panic_message(p)))))
            }
        };
        match outcome {
            Ok(results) => checks.extend(results),
            Err(e) => checks.push(CheckResult {
                name: spec.name().to_string(),
                kind: spec.name().to_string(),
                x_label: String::new(),
                reports: vec![BoundReport::failed(spec.name(), e.to_string())],
                table: Vec::new(),
            }),
        }
    }

    let report = RunReport {
        name: config.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_hash: report::config_hash(config),
        variants: summaries,
        checks,
        wall_time_secs: started.elapsed().as_secs_f64(),
        content_hash: String::new(),
    }
    .seal();
    if let Some(dir) = &config.output {
        report.persist(dir)?;
        write_all_plotdata(&report, dir)?;
    }
    Ok(report)
}

/// Run a configuration on a dedicated pool of `threads` workers.
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(|| run(config))
}
