//! Concrete sampling, stopping, choosing and rewinding rules.
//!
//! Each rule is a serializable spec. Specs are immutable and shared between
//! episodes; stateful rules build per-episode state in `start`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::arms::{normal_upper_quantile, ArmSpec};
use crate::error::{Error, Result};
use crate::protocol::{Chooser, DataView, PolicyBundle, Rewinder, Sampler, SamplerFactory, Stopper, StopperFactory};

fn one() -> f64 {
    1.0
}

fn check(ok: bool, path: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, message))
    }
}

/// Index of the largest value, lowest index on ties.
fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn one_hot(out: &mut [f64], k: usize) {
    out.fill(0.0);
    out[k] = 1.0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerSpec {
    Uniform,
    EpsilonGreedy {
        epsilon: f64,
    },
    Ucb1 {
        c: f64,
    },
    /// Normal prior, known noise scale.
    ThompsonGaussian {
        prior_mean: f64,
        prior_sd: f64,
        #[serde(default = "one")]
        noise_sd: f64,
    },
    /// Beta prior on Bernoulli rewards.
    ThompsonBernoulli {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// Arm 0 at the first step, then a single arm forever: arm 1 when the
    /// first reward exceeds the two-sided normal `alpha` threshold, else arm 0.
    #[serde(rename = "example31")]
    ThresholdLock {
        alpha: f64,
    },
    /// Each of arms 0 and 1 once, then arm 1 forever if `Y_1 > Y_2`, else arm 0.
    #[serde(rename = "example32")]
    ComparisonLock,
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSpec::Uniform | SamplerSpec::ComparisonLock => Ok(()),
            SamplerSpec::EpsilonGreedy { epsilon } => check((0.0..=1.0).contains(epsilon), "sampler.epsilon", "must lie in [0, 1]"),
            SamplerSpec::Ucb1 { c } => check(c.is_finite() && *c >= 0.0, "sampler.c", "must be finite and nonnegative"),
            SamplerSpec::ThompsonGaussian { prior_mean, prior_sd, noise_sd } => {
                check(prior_mean.is_finite(), "sampler.prior_mean", "must be finite")?;
                check(prior_sd.is_finite() && *prior_sd > 0.0, "sampler.prior_sd", "must be positive")?;
                check(noise_sd.is_finite() && *noise_sd > 0.0, "sampler.noise_sd", "must be positive")
            }
            SamplerSpec::ThompsonBernoulli { a, b } => {
                check(a.is_finite() && *a > 0.0, "sampler.a", "must be positive")?;
                check(b.is_finite() && *b > 0.0, "sampler.b", "must be positive")
            }
            SamplerSpec::ThresholdLock { alpha } => check(*alpha > 0.0 && *alpha < 1.0, "sampler.alpha", "must lie in (0, 1)"),
        }
    }

    fn required_arms(&self) -> usize {
        match self {
            SamplerSpec::ThresholdLock { .. } | SamplerSpec::ComparisonLock => 2,
            _ => 1,
        }
    }
}

struct Uniform;
impl Sampler for Uniform {
    fn probabilities(&mut self, _: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
        let p = 1.0 / out.len() as f64;
        out.fill(p);
    }
}

/// Empirical means with unplayed arms ranked first.
fn optimistic_means<'a>(view: &'a DataView<'_>) -> impl Iterator<Item = f64> + 'a {
    (0..view.n_arms()).map(|k| view.sample_mean(k).unwrap_or(f64::INFINITY))
}

struct EpsilonGreedy(f64);
impl Sampler for EpsilonGreedy {
    fn probabilities(&mut self, view: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
        let greedy = argmax(optimistic_means(view));
        out.fill(self.0 / out.len() as f64);
        out[greedy] += 1.0 - self.0;
    }
}

struct Ucb1(f64);
impl Sampler for Ucb1 {
    fn probabilities(&mut self, view: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
        if let Some(k) = (0..view.n_arms()).find(|&k| view.count(k) == 0) {
            return one_hot(out, k);
        }
        let log_t = (view.t() as f64).ln().max(0.0);
        let idx = (0..view.n_arms()).map(|k| {
            let n = view.count(k) as f64;
            view.sample_mean(k).unwrap_or(0.0) + self.0 * (2.0 * log_t / n).sqrt()
        });
        one_hot(out, argmax(idx));
    }
}

struct ThompsonGaussian {
    prior_mean: f64,
    prior_precision: f64,
    noise_var: f64,
}
impl Sampler for ThompsonGaussian {
    fn probabilities(&mut self, view: &DataView<'_>, rng: &mut dyn RngCore, out: &mut [f64]) {
        let draws: Vec<f64> = (0..view.n_arms())
            .map(|k| {
                let precision = self.prior_precision + view.count(k) as f64 / self.noise_var;
                let mean = (self.prior_mean * self.prior_precision + view.sum(k) / self.noise_var) / precision;
                Normal::new(mean, precision.sqrt().recip()).expect("positive scale").sample(rng)
            })
            .collect();
        one_hot(out, argmax(draws));
    }
}

struct ThompsonBernoulli {
    a: f64,
    b: f64,
}
impl Sampler for ThompsonBernoulli {
    fn probabilities(&mut self, view: &DataView<'_>, rng: &mut dyn RngCore, out: &mut [f64]) {
        let draws: Vec<f64> = (0..view.n_arms())
            .map(|k| {
                let s = view.sum(k).clamp(0.0, view.count(k) as f64);
                let f = view.count(k) as f64 - s;
                Beta::new(self.a + s, self.b + f).expect("positive shapes").sample(rng)
            })
            .collect();
        one_hot(out, argmax(draws));
    }
}

struct ThresholdLock(f64);
impl Sampler for ThresholdLock {
    fn probabilities(&mut self, view: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
        let arm = match view.reward(1) {
            Some(y) if y.abs() > self.0 => 1,
            _ => 0,
        };
        one_hot(out, arm);
    }
}

struct ComparisonLock;
impl Sampler for ComparisonLock {
    fn probabilities(&mut self, view: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
        let arm = match (view.t(), view.reward(1), view.reward(2)) {
            (0, _, _) => 0,
            (1, _, _) => 1,
            (_, Some(y1), Some(y2)) if y1 > y2 => 1,
            _ => 0,
        };
        one_hot(out, arm);
    }
}

impl SamplerFactory for SamplerSpec {
    fn start(&self, _: usize, _: &mut dyn RngCore) -> Box<dyn Sampler> {
        match *self {
            SamplerSpec::Uniform => Box::new(Uniform),
            SamplerSpec::EpsilonGreedy { epsilon } => Box::new(EpsilonGreedy(epsilon)),
            SamplerSpec::Ucb1 { c } => Box::new(Ucb1(c)),
            SamplerSpec::ThompsonGaussian { prior_mean, prior_sd, noise_sd } => Box::new(ThompsonGaussian {
                prior_mean,
                prior_precision: prior_sd.powi(-2),
                noise_var: noise_sd * noise_sd,
            }),
            SamplerSpec::ThompsonBernoulli { a, b } => Box::new(ThompsonBernoulli { a, b }),
            SamplerSpec::ThresholdLock { alpha } => Box::new(ThresholdLock(normal_upper_quantile(alpha / 2.0))),
            SamplerSpec::ComparisonLock => Box::new(ComparisonLock),
        }
    }

    fn required_arms(&self) -> usize {
        SamplerSpec::required_arms(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopperSpec {
    Fixed {
        t: u64,
    },
    /// Nonadaptive random horizon `1 + Poisson(rate)`.
    PoissonPlusOne {
        rate: f64,
    },
    /// First time `N ≥ b` and the standardized sum of arm `arm` reaches the
    /// `√(N log log N)` envelope. Mean and sd default to the arm's true values.
    Lil {
        arm: usize,
        b: u64,
        #[serde(default)]
        mean: Option<f64>,
        #[serde(default)]
        sd: Option<f64>,
    },
    /// First time the sample mean of `arm` reaches `level`.
    MeanThreshold {
        arm: usize,
        level: f64,
    },
    /// First time the running sum of `arm` reaches `slope · clock + intercept`.
    /// `dt` is the clock step of the random walk.
    LineCrossing {
        arm: usize,
        slope: f64,
        intercept: f64,
        dt: f64,
    },
}

impl StopperSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            StopperSpec::Fixed { t } => check(*t >= 1, "stopper.t", "must be at least 1"),
            StopperSpec::PoissonPlusOne { rate } => check(rate.is_finite() && *rate > 0.0, "stopper.rate", "must be positive"),
            StopperSpec::Lil { b, mean, sd, .. } => {
                check(*b >= 3, "stopper.b", "must be at least 3 so that log log N > 0")?;
                check(mean.is_none_or(f64::is_finite), "stopper.mean", "must be finite")?;
                check(sd.is_none_or(|s| s.is_finite() && s > 0.0), "stopper.sd", "must be positive")
            }
            StopperSpec::MeanThreshold { level, .. } => check(level.is_finite(), "stopper.level", "must be finite"),
            StopperSpec::LineCrossing { slope, intercept, dt, .. } => {
                check(slope.is_finite(), "stopper.slope", "must be finite")?;
                check(intercept.is_finite(), "stopper.intercept", "must be finite")?;
                check(dt.is_finite() && *dt > 0.0, "stopper.dt", "must be positive")
            }
        }
    }

    /// Clock step implied by the rule, if any.
    pub fn clock_step(&self) -> Option<f64> {
        match self {
            StopperSpec::LineCrossing { dt, .. } => Some(*dt),
            _ => None,
        }
    }

    fn target_arm(&self) -> Option<usize> {
        match self {
            StopperSpec::Lil { arm, .. } | StopperSpec::MeanThreshold { arm, .. } | StopperSpec::LineCrossing { arm, .. } => Some(*arm),
            _ => None,
        }
    }
}

struct Horizon(u64);
impl Stopper for Horizon {
    fn should_stop(&mut self, view: &DataView<'_>) -> bool {
        view.t() >= self.0
    }
}

struct Lil {
    arm: usize,
    b: u64,
    mean: f64,
    sd: f64,
}
impl Stopper for Lil {
    fn should_stop(&mut self, view: &DataView<'_>) -> bool {
        let n = view.count(self.arm);
        if n < self.b {
            return false;
        }
        let n = n as f64;
        let dev = view.sum(self.arm) - self.mean * n;
        // the envelope is positive, so the log-log term is only needed above zero
        dev > 0.0 && dev >= self.sd * (n * n.ln().ln()).sqrt()
    }
}

struct MeanThreshold {
    arm: usize,
    level: f64,
}
impl Stopper for MeanThreshold {
    fn should_stop(&mut self, view: &DataView<'_>) -> bool {
        view.sample_mean(self.arm).is_ok_and(|m| m >= self.level)
    }
}

struct LineCrossing {
    arm: usize,
    slope: f64,
    intercept: f64,
}
impl Stopper for LineCrossing {
    fn should_stop(&mut self, view: &DataView<'_>) -> bool {
        view.sum(self.arm) >= self.slope * view.exposure(self.arm) + self.intercept
    }
}

impl StopperFactory for StopperSpec {
    fn start(&self, arms: &[ArmSpec], rng: &mut dyn RngCore) -> Box<dyn Stopper> {
        match *self {
            StopperSpec::Fixed { t } => Box::new(Horizon(t)),
            StopperSpec::PoissonPlusOne { rate } => {
                let z: f64 = Poisson::new(rate).expect("validated rate").sample(rng);
                Box::new(Horizon(1 + z as u64))
            }
            StopperSpec::Lil { arm, b, mean, sd } => Box::new(Lil {
                arm,
                b,
                mean: mean.unwrap_or_else(|| arms[arm].mean()),
                sd: sd.unwrap_or_else(|| arms[arm].sd()),
            }),
            StopperSpec::MeanThreshold { arm, level } => Box::new(MeanThreshold { arm, level }),
            StopperSpec::LineCrossing { arm, slope, intercept, .. } => Box::new(LineCrossing { arm, slope, intercept }),
        }
    }

    fn required_arms(&self) -> usize {
        self.target_arm().map_or(1, |a| a + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChooserSpec {
    Fixed { arm: usize },
    /// Arm drawn from `weights`, independent of the data.
    RandomNonadaptive { weights: Vec<f64> },
    BestEmpirical,
    MostSampled,
    WorstEmpirical,
}

impl ChooserSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChooserSpec::RandomNonadaptive { weights } => check(
                !weights.is_empty() && weights.iter().all(|w| w.is_finite() && *w >= 0.0) && weights.iter().sum::<f64>() > 0.0,
                "chooser.weights",
                "must be nonnegative with a positive sum",
            ),
            _ => Ok(()),
        }
    }
}

impl Chooser for ChooserSpec {
    fn choose(&self, view: &DataView<'_>, rng: &mut dyn RngCore) -> usize {
        let k = view.n_arms();
        match self {
            ChooserSpec::Fixed { arm } => *arm,
            ChooserSpec::RandomNonadaptive { weights } => {
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc && *w > 0.0 {
                        return i;
                    }
                }
                weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
            }
            ChooserSpec::BestEmpirical => argmax((0..k).map(|a| view.sample_mean(a).unwrap_or(f64::NEG_INFINITY))),
            ChooserSpec::WorstEmpirical => argmax((0..k).map(|a| view.sample_mean(a).map_or(f64::NEG_INFINITY, |m| -m))),
            ChooserSpec::MostSampled => argmax((0..k).map(|a| view.count(a) as f64)),
        }
    }

    fn required_arms(&self) -> usize {
        match self {
            ChooserSpec::Fixed { arm } => arm + 1,
            ChooserSpec::RandomNonadaptive { weights } => weights.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewinderSpec {
    None,
    /// Earliest time in `[t0, T]` maximizing the chosen arm's running mean.
    ArgmaxMean,
    /// `max(t0, ⌈ρT⌉)`.
    FixedFraction { rho: f64 },
}

impl RewinderSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RewinderSpec::FixedFraction { rho } => check(*rho > 0.0 && *rho <= 1.0, "rewinder.rho", "must lie in (0, 1]"),
            _ => Ok(()),
        }
    }
}

impl Rewinder for RewinderSpec {
    fn rewind(&self, view: &DataView<'_>, chosen: usize, t0: u64) -> u64 {
        let stop = view.t();
        match self {
            RewinderSpec::None => stop,
            RewinderSpec::FixedFraction { rho } => ((rho * stop as f64).ceil() as u64).clamp(t0, stop),
            RewinderSpec::ArgmaxMean => {
                let mut n = 0u64;
                let mut s = 0.0;
                let mut best = (stop, f64::NEG_INFINITY);
                for (i, (&a, &y)) in view.actions().iter().zip(view.rewards()).enumerate() {
                    if a == chosen {
                        n += 1;
                        s += y;
                    }
                    let t = i as u64 + 1;
                    if t >= t0 && n > 0 {
                        let m = s / n as f64;
                        if m > best.1 {
                            best = (t, m);
                        }
                    }
                }
                best.0
            }
        }
    }
}

/// Validate four rule specs and assemble them with the engine settings.
pub fn bundle(
    sampler: &SamplerSpec,
    stopper: &StopperSpec,
    chooser: &ChooserSpec,
    rewinder: &RewinderSpec,
    warmup: u64,
    horizon_cap: u64,
    clock_step: f64,
) -> Result<PolicyBundle> {
    sampler.validate()?;
    stopper.validate()?;
    chooser.validate()?;
    rewinder.validate()?;
    Ok(PolicyBundle {
        sampler: Arc::new(sampler.clone()),
        stopper: Arc::new(stopper.clone()),
        chooser: Arc::new(chooser.clone()),
        rewinder: Arc::new(rewinder.clone()),
        warmup,
        horizon_cap,
        clock_step,
    })
}
