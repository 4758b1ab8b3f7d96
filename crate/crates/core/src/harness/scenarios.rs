//! Built-in experiment catalog.

use std::f64::consts::LN_2;

use crate::arms::Family;
use crate::error::{Error, Result};
use crate::policies::{ChooserSpec, RewinderSpec, SamplerSpec, StopperSpec};

use super::config::{ArmConfig, CheckSpec, ExperimentConfig, Variant};

/// Name and one-line description of every built-in scenario.
pub const SCENARIOS: [(&str, &str); 11] = [
    ("prop-minimax", "nonadaptive sampling: normalized l2 risk equals the variance"),
    ("example-inconsistency", "a single lock-in arm keeps the sample mean away from the truth"),
    ("example-chosen-consistency", "most-sampled chooser is consistent although no fixed arm diverges"),
    ("lil-sandwich", "LIL stopper: undiscounted risk grows with b, log-log discounted risk stays bounded"),
    ("brownian-bias", "line-crossing random walk: bias 1/b and effective size b^2 against the bias bound"),
    ("lemma-deviation-subpsi", "fixed-n deviation of the Bregman loss against 2 exp(-delta b)"),
    ("lemma-deviation-polytail", "polynomial tail of the log-discounted l2 loss for Student-t rewards"),
    ("thm-bregman-stopping", "Bregman risk at a stopping time against U_{k,b}"),
    ("thm-fully-adaptive", "fully adaptive log-log discounted risk against 2 C_b sigma^2 (H + 1.25)"),
    ("appendix-g", "self-normalized risk against 4 sigma^2 (H + log 2 / 2)"),
    ("finite-moment-boundedness", "log-discounted risk stays flat across horizons, undiscounted risk grows"),
];

pub fn scenario_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

fn gaussian(mean: f64, sd: f64) -> ArmConfig {
    ArmConfig::gaussian(mean, sd)
}

fn student_t(df: f64, loc: f64) -> ArmConfig {
    ArmConfig::new(Family::StudentT { df, loc, scale: 1.0 })
}

fn base(name: &str, arms: Vec<ArmConfig>, stopper: StopperSpec, n_reps: usize, t_max: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        arms,
        sampler: SamplerSpec::Uniform,
        stopper,
        chooser: ChooserSpec::Fixed { arm: 0 },
        rewinder: RewinderSpec::None,
        n_reps,
        root_seed: 20_240_601,
        t_max,
        warmup: 1,
        include_truncated: false,
        psi: None,
        checks: Vec::new(),
        variants: Vec::new(),
        output: None,
    }
}

fn variant(label: impl Into<String>) -> Variant {
    Variant {
        label: label.into(),
        ..Variant::default()
    }
}

fn lil(arm: usize, b: u64) -> StopperSpec {
    StopperSpec::Lil { arm, b, mean: None, sd: None }
}

/// Two arms, epsilon-greedy sampling, LIL stopping on arm 0, best-empirical
/// choice.
fn fully_adaptive(name: &str, arms: Vec<ArmConfig>) -> ExperimentConfig {
    let mut c = base(name, arms, lil(0, 10), 20_000, 10_000);
    c.sampler = SamplerSpec::EpsilonGreedy { epsilon: 0.1 };
    c.chooser = ChooserSpec::BestEmpirical;
    c.rewinder = RewinderSpec::ArgmaxMean;
    c.warmup = 10;
    c.include_truncated = true;
    c
}

/// Fully specified configuration of a built-in scenario.
pub fn scenario(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "prop-minimax" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0), gaussian(0.0, 1.0)], StopperSpec::Fixed { t: 50 }, 100_000, 50);
            c.checks = vec![CheckSpec::MinimaxL2 { arm: 0 }];
            c
        }
        "example-inconsistency" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0), gaussian(0.0, 1.0)], StopperSpec::Fixed { t: 10_000 }, 10_000, 10_000);
            c.sampler = SamplerSpec::ThresholdLock { alpha: 0.1 };
            c.warmup = 0;
            c.checks = vec![CheckSpec::Inconsistency {
                arm: 0,
                times: vec![100, 1_000, 10_000],
                alpha: 0.1,
            }];
            c
        }
        "example-chosen-consistency" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0), gaussian(0.0, 1.0)], StopperSpec::Fixed { t: 10_000 }, 10_000, 10_000);
            c.sampler = SamplerSpec::ComparisonLock;
            c.warmup = 0;
            c.chooser = ChooserSpec::MostSampled;
            c.checks = vec![CheckSpec::ChosenConsistency {
                arm: 0,
                tolerance: 0.05,
                max_probability: 0.01,
                count_probability: 0.5,
            }];
            c
        }
        "lil-sandwich" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0)], lil(0, 3), 20_000, 1_000_000);
            c.variants = [3, 10, 30, 100]
                .into_iter()
                .map(|b| Variant {
                    stopper: Some(lil(0, b)),
                    ..variant(format!("b={b}"))
                })
                .collect();
            c.checks = vec![CheckSpec::LilSandwich {
                arm: 0,
                from_b: 3,
                to_b: 30,
                max_truncation: 0.01,
            }];
            c
        }
        "brownian-bias" => {
            let dt = 0.01;
            let drift = 0.5;
            let stopper = StopperSpec::LineCrossing {
                arm: 0,
                slope: drift,
                intercept: 5.0,
                dt,
            };
            let mut c = base(name, vec![gaussian(drift * dt, dt.sqrt())], stopper, 10_000, 100_000);
            // three time units of data before the boundary is monitored
            c.warmup = 300;
            c.include_truncated = true;
            c.checks = vec![CheckSpec::BrownianBias { arm: 0, rel_tol: 0.15 }];
            c
        }
        "lemma-deviation-subpsi" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0)], StopperSpec::Fixed { t: 5 }, 100_000, 20);
            c.variants = [5, 20]
                .into_iter()
                .map(|b| Variant {
                    stopper: Some(StopperSpec::Fixed { t: b }),
                    ..variant(format!("b={b}"))
                })
                .collect();
            c.checks = vec![CheckSpec::DeviationSubPsi {
                arm: 0,
                deltas: (1..=40).map(|j| 0.05 * j as f64).collect(),
            }];
            c
        }
        "lemma-deviation-polytail" => {
            let mut c = base(name, vec![student_t(5.0, 0.0)], lil(0, 3), 100_000, 1_000);
            c.warmup = 3;
            c.include_truncated = true;
            c.checks = vec![CheckSpec::DeviationPolytail {
                arm: 0,
                p: 2.0,
                deltas: (0..=19).map(|j| 1.0 + j as f64).collect(),
                max_ratio: 10.0,
            }];
            c
        }
        "thm-bregman-stopping" => {
            let mut c = base(name, vec![gaussian(0.0, 1.0)], lil(0, 10), 20_000, 10_000);
            c.include_truncated = true;
            let bern = || vec![ArmConfig::new(Family::Bernoulli { p: 0.3 })];
            let threshold = |level: f64| StopperSpec::MeanThreshold { arm: 0, level };
            c.variants = vec![
                Variant {
                    stopper: Some(threshold(0.2)),
                    t_max: Some(1_000),
                    warmup: Some(5),
                    ..variant("gaussian-threshold")
                },
                Variant {
                    stopper: Some(lil(0, 10)),
                    ..variant("gaussian-lil")
                },
                Variant {
                    arms: Some(bern()),
                    stopper: Some(threshold(0.4)),
                    t_max: Some(1_000),
                    warmup: Some(5),
                    ..variant("bernoulli-threshold")
                },
                Variant {
                    arms: Some(bern()),
                    stopper: Some(lil(0, 10)),
                    ..variant("bernoulli-lil")
                },
            ];
            c.checks = vec![CheckSpec::BregmanStopping { arm: 0 }];
            c
        }
        "thm-fully-adaptive" => {
            let mut c = fully_adaptive(name, vec![gaussian(0.0, 1.0), gaussian(0.2, 1.0)]);
            c.checks = vec![
                CheckSpec::FullyAdaptive { max_entropy: Some(LN_2) },
                CheckSpec::BregmanQuasinorm { r: 0.5 },
            ];
            c
        }
        "appendix-g" => {
            let mut c = fully_adaptive(name, vec![gaussian(0.0, 1.0), gaussian(0.2, 1.0)]);
            c.rewinder = RewinderSpec::None;
            c.checks = vec![CheckSpec::SelfNormalized];
            c
        }
        "finite-moment-boundedness" => {
            let mut c = fully_adaptive(name, vec![student_t(5.0, 0.0), student_t(5.0, 0.2)]);
            c.n_reps = 10_000;
            let caps = [100u64, 1_000, 10_000];
            let mut variants: Vec<Variant> = caps
                .iter()
                .map(|&t| Variant {
                    t_max: Some(t),
                    ..variant(format!("student-t/cap={t}"))
                })
                .collect();
            variants.extend(caps.iter().map(|&t| Variant {
                arms: Some(vec![gaussian(0.0, 1.0)]),
                sampler: Some(SamplerSpec::Uniform),
                stopper: Some(lil(0, 3)),
                chooser: Some(ChooserSpec::Fixed { arm: 0 }),
                rewinder: Some(RewinderSpec::None),
                t_max: Some(t),
                warmup: Some(1),
                ..variant(format!("lil/cap={t}"))
            }));
            c.checks = vec![CheckSpec::FiniteMomentBoundedness {
                discounted: caps.iter().map(|t| format!("student-t/cap={t}")).collect(),
                undiscounted: caps.iter().map(|t| format!("lil/cap={t}")).collect(),
                max_ratio: 2.0,
            }];
            c.variants = variants;
            c
        }
        other => {
            let mut names = scenario_names();
            names.sort_by_key(|n| strsim::levenshtein(n, other));
            return Err(Error::config(
                "scenario",
                format!("unknown scenario `{other}`; did you mean `{}`? known: {}", names[0], scenario_names().join(", ")),
            ));
        }
    };
    Ok(cfg)
}
