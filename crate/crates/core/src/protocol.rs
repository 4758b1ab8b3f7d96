//! Episode engine for adaptive sampling, stopping, choosing and rewinding.
//!
//! Rules never see the engine's buffers directly. Each call receives a
//! [`DataView`] whose slices end at the time the rule is allowed to observe,
//! so a sampler deciding `A_t` cannot read `Y_t` or anything later.

use std::borrow::Cow;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::arms::ArmSpec;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Read-only prefix `D_t` of an episode.
#[derive(Debug, Clone)]
pub struct DataView<'a> {
    seed: u64,
    actions: &'a [usize],
    rewards: &'a [f64],
    counts: Cow<'a, [u64]>,
    sums: Cow<'a, [f64]>,
    clock_step: f64,
}

impl<'a> DataView<'a> {
    /// Number of observed steps.
    pub fn t(&self) -> u64 {
        self.actions.len() as u64
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len()
    }

    /// Episode seed (the external randomness).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock_step(&self) -> f64 {
        self.clock_step
    }

    /// Arm played at time `s` (1-based); `None` beyond the view.
    pub fn action(&self, s: u64) -> Option<usize> {
        s.checked_sub(1).and_then(|i| self.actions.get(i as usize).copied())
    }

    /// Reward observed at time `s` (1-based); `None` beyond the view.
    pub fn reward(&self, s: u64) -> Option<f64> {
        s.checked_sub(1).and_then(|i| self.rewards.get(i as usize).copied())
    }

    pub fn actions(&self) -> &[usize] {
        self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        self.rewards
    }

    /// `N_k(t)`.
    pub fn count(&self, k: usize) -> u64 {
        self.counts[k]
    }

    /// `S_k(t)`.
    pub fn sum(&self, k: usize) -> f64 {
        self.sums[k]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Elapsed clock time on arm `k`: `N_k(t)` times the clock step.
    pub fn exposure(&self, k: usize) -> f64 {
        self.counts[k] as f64 * self.clock_step
    }

    /// `μ̂_k(t) = S_k(t) / exposure`.
    pub fn sample_mean(&self, k: usize) -> Result<f64> {
        if self.counts[k] == 0 {
            return Err(Error::UndefinedMean { arm: k, t: self.t() });
        }
        Ok(self.sums[k] / self.exposure(k))
    }
}

/// Sampling rule state for one episode.
pub trait Sampler {
    /// Write `ν_t(· | D_{t−1})` into `out`; `view` holds `D_{t−1}`.
    fn probabilities(&mut self, view: &DataView<'_>, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Stopping rule state for one episode.
pub trait Stopper {
    /// Decide after observing `D_t`.
    fn should_stop(&mut self, view: &DataView<'_>) -> bool;
}

/// Builds fresh sampler state at the start of every episode.
pub trait SamplerFactory: Send + Sync {
    fn start(&self, n_arms: usize, rng: &mut dyn RngCore) -> Box<dyn Sampler>;

    /// Smallest number of arms the rule can run on.
    fn required_arms(&self) -> usize {
        1
    }
}

/// Builds fresh stopper state at the start of every episode. Nonadaptive
/// random horizons draw from `rng` here.
pub trait StopperFactory: Send + Sync {
    fn start(&self, arms: &[ArmSpec], rng: &mut dyn RngCore) -> Box<dyn Stopper>;

    fn required_arms(&self) -> usize {
        1
    }
}

/// Chooses the target arm from the completed data.
pub trait Chooser: Send + Sync {
    fn choose(&self, view: &DataView<'_>, rng: &mut dyn RngCore) -> usize;

    fn required_arms(&self) -> usize {
        1
    }
}

/// Picks a time `τ ∈ [t0, T]` from the completed data.
pub trait Rewinder: Send + Sync {
    fn rewind(&self, view: &DataView<'_>, chosen: usize, t0: u64) -> u64;
}

/// The four rules plus the engine settings they run under.
#[derive(Clone)]
pub struct PolicyBundle {
    pub sampler: Arc<dyn SamplerFactory>,
    pub stopper: Arc<dyn StopperFactory>,
    pub chooser: Arc<dyn Chooser>,
    pub rewinder: Arc<dyn Rewinder>,
    /// Minimum count `b` per arm, reached by round robin before any rule runs.
    pub warmup: u64,
    /// Hard truncation `T_max`.
    pub horizon_cap: u64,
    /// Clock time per step; 1 for ordinary bandits.
    pub clock_step: f64,
}

impl PolicyBundle {
    /// `t0`: the end of the round-robin warmup, at least 1.
    pub fn warmup_end(&self, n_arms: usize) -> u64 {
        (n_arms as u64 * self.warmup).max(1)
    }

    pub fn validate(&self, n_arms: usize) -> Result<()> {
        if n_arms == 0 {
            return Err(Error::config("arms", "at least one arm is required"));
        }
        for (rule, need) in [
            ("sampler", self.sampler.required_arms()),
            ("stopper", self.stopper.required_arms()),
            ("chooser", self.chooser.required_arms()),
        ] {
            if n_arms < need {
                return Err(Error::config(rule, format!("rule needs at least {need} arms, got {n_arms}")));
            }
        }
        if !(self.clock_step.is_finite() && self.clock_step > 0.0) {
            return Err(Error::config("clock_step", "must be finite and positive"));
        }
        if self.horizon_cap < self.warmup_end(n_arms) {
            return Err(Error::config("t_max", "horizon cap is shorter than the warmup"));
        }
        Ok(())
    }
}

/// One realized trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub n_arms: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub stop_time: u64,
    pub chosen_arm: usize,
    pub rewound_time: u64,
    pub warmup_end: u64,
    pub truncated: bool,
    pub clock_step: f64,
    /// `N_k(T)`.
    pub counts: Vec<u64>,
    /// `S_k(T)`.
    pub sums: Vec<f64>,
}

impl EpisodeRecord {
    /// Prefix view `D_t`; counts and sums are recomputed from the prefix.
    pub fn view(&self, t: u64) -> Result<DataView<'_>> {
        if t > self.stop_time {
            return Err(Error::Domain(format!("view at {t} beyond stop time {}", self.stop_time)));
        }
        let t = t as usize;
        let (counts, sums) = if t == self.actions.len() {
            (Cow::Borrowed(&self.counts[..]), Cow::Borrowed(&self.sums[..]))
        } else {
            let mut c = vec![0u64; self.n_arms];
            let mut s = vec![0f64; self.n_arms];
            for (&a, &y) in self.actions[..t].iter().zip(&self.rewards[..t]) {
                c[a] += 1;
                s[a] += y;
            }
            (Cow::Owned(c), Cow::Owned(s))
        };
        Ok(DataView {
            seed: self.seed,
            actions: &self.actions[..t],
            rewards: &self.rewards[..t],
            counts,
            sums,
            clock_step: self.clock_step,
        })
    }

    pub fn count_at(&self, k: usize, t: u64) -> Result<u64> {
        Ok(self.view(t)?.count(k))
    }

    /// `μ̂_k(t)`.
    pub fn sample_mean(&self, k: usize, t: u64) -> Result<f64> {
        self.view(t)?.sample_mean(k)
    }

    /// `(N, N/log N, N/log log N)` for arm `k` at time `t`.
    pub fn discounted_counts(&self, k: usize, t: u64) -> Result<(f64, f64, f64)> {
        let n = self.count_at(k, t)? as f64;
        Ok((n, log_discounted(n)?, loglog_discounted(n)?))
    }

    /// One-line JSON dump; fields in declaration order.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record fields are plain data")
    }
}

/// `N / log N`; needs `N ≥ 2`.
pub fn log_discounted(n: f64) -> Result<f64> {
    if n < 2.0 {
        return Err(Error::Domain(format!("log discount needs N >= 2, got {n}")));
    }
    Ok(n / n.ln())
}

/// `N / log log N`; needs `N ≥ 3`.
pub fn loglog_discounted(n: f64) -> Result<f64> {
    if n < 3.0 {
        return Err(Error::Domain(format!("log-log discount needs N >= 3, got {n}")));
    }
    Ok(n / n.ln().ln())
}

fn view_of<'a>(seed: u64, actions: &'a [usize], rewards: &'a [f64], counts: &'a [u64], sums: &'a [f64], clock_step: f64) -> DataView<'a> {
    DataView {
        seed,
        actions,
        rewards,
        counts: Cow::Borrowed(counts),
        sums: Cow::Borrowed(sums),
        clock_step,
    }
}

fn draw_arm(probs: &[f64], u: f64) -> Result<usize> {
    let mut total = 0.0;
    for &p in probs {
        if !(p >= 0.0) {
            return Err(Error::Protocol(format!("sampler returned a negative or NaN probability: {probs:?}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Protocol(format!("sampler probabilities sum to {total}")));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if target < acc {
                return Ok(k);
            }
        }
    }
    Ok(last)
}

/// Run one episode. Deterministic in `(arms, bundle, seed)`.
pub fn run_episode(arms: &[ArmSpec], bundle: &PolicyBundle, seed: u64) -> Result<EpisodeRecord> {
    let k = arms.len();
    bundle.validate(k)?;
    let mut arm_rng = stream(seed, Stream::Arms);
    let mut sampler_rng = stream(seed, Stream::Sampler);
    let mut stopper_rng = stream(seed, Stream::Stopper);
    let mut chooser_rng = stream(seed, Stream::Chooser);

    let mut sampler = bundle.sampler.start(k, &mut sampler_rng);
    let mut stopper = bundle.stopper.start(arms, &mut stopper_rng);
    let round_robin = k as u64 * bundle.warmup;
    let t0 = bundle.warmup_end(k);

    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut counts = vec![0u64; k];
    let mut sums = vec![0f64; k];
    let mut probs = vec![0f64; k];
    let mut truncated = false;
    let mut t = 0u64;
    loop {
        t += 1;
        let arm = if t <= round_robin {
            ((t - 1) % k as u64) as usize
        } else {
            let view = view_of(seed, &actions, &rewards, &counts, &sums, bundle.clock_step);
            sampler.probabilities(&view, &mut sampler_rng, &mut probs);
            draw_arm(&probs, sampler_rng.random::<f64>())?
        };
        let y = arms[arm].sample(&mut arm_rng);
        actions.push(arm);
        rewards.push(y);
        counts[arm] += 1;
        sums[arm] += y;
        if t >= t0 {
            let view = view_of(seed, &actions, &rewards, &counts, &sums, bundle.clock_step);
            if stopper.should_stop(&view) {
                break;
            }
            if t >= bundle.horizon_cap {
                truncated = true;
                break;
            }
        }
    }

    let view = view_of(seed, &actions, &rewards, &counts, &sums, bundle.clock_step);
    let chosen = bundle.chooser.choose(&view, &mut chooser_rng);
    if chosen >= k {
        return Err(Error::Protocol(format!("chooser returned arm {chosen} of {k}")));
    }
    let tau = bundle.rewinder.rewind(&view, chosen, t0);
    if tau < t0 || tau > t {
        return Err(Error::Protocol(format!("rewound time {tau} outside [{t0}, {t}]")));
    }
    Ok(EpisodeRecord {
        seed,
        n_arms: k,
        actions,
        rewards,
        stop_time: t,
        chosen_arm: chosen,
        rewound_time: tau,
        warmup_end: t0,
        truncated,
        clock_step: bundle.clock_step,
        counts,
        sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{ChooserSpec, RewinderSpec, SamplerSpec, StopperSpec};
    use proptest::prelude::*;
    use rand::RngCore;

    fn bundle(sampler: SamplerSpec, stopper: StopperSpec, warmup: u64) -> PolicyBundle {
        crate::policies::bundle(&sampler, &stopper, &ChooserSpec::Fixed { arm: 0 }, &RewinderSpec::None, warmup, 1_000_000, 1.0).unwrap()
    }

    fn gaussians(k: usize) -> Vec<ArmSpec> {
        (0..k).map(|i| ArmSpec::gaussian(i as f64 * 0.1, 1.0).unwrap()).collect()
    }

    #[test]
    fn single_arm_fixed_horizon() {
        let b = bundle(SamplerSpec::Uniform, StopperSpec::Fixed { t: 5 }, 0);
        let r = run_episode(&gaussians(1), &b, 3).unwrap();
        assert_eq!(r.stop_time, 5);
        assert_eq!(r.count_at(0, 5).unwrap(), 5);
    }

    #[test]
    fn sample_mean_of_hand_built_record() {
        let r = EpisodeRecord {
            seed: 0,
            n_arms: 2,
            actions: vec![0, 0, 0],
            rewards: vec![1.0, 2.0, 3.0],
            stop_time: 3,
            chosen_arm: 0,
            rewound_time: 3,
            warmup_end: 1,
            truncated: false,
            clock_step: 1.0,
            counts: vec![3, 0],
            sums: vec![6.0, 0.0],
        };
        assert_eq!(r.sample_mean(0, 3).unwrap(), 2.0);
        assert_eq!(r.sample_mean(0, 1).unwrap(), 1.0);
        assert!(matches!(r.sample_mean(1, 3), Err(Error::UndefinedMean { arm: 1, t: 3 })));
        assert_eq!(r.view(0).unwrap().t(), 0);
        assert_eq!(r.view(0).unwrap().reward(1), None);
        assert_eq!(r.view(2).unwrap().count(0), 2);
    }

    #[test]
    fn discount_examples() {
        let e2 = std::f64::consts::E.powi(2);
        assert!((log_discounted(e2).unwrap() - e2 / 2.0).abs() < 1e-12);
        assert!((loglog_discounted(3.0).unwrap() - 31.898).abs() < 1e-3);
        assert!(loglog_discounted(2.0).is_err());
        assert!(log_discounted(1.0).is_err());
    }

    struct Peeking;
    impl Sampler for Peeking {
        fn probabilities(&mut self, view: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
            // the current step's reward is not part of the view
            assert_eq!(view.reward(view.t() + 1), None);
            out.fill(1.0 / out.len() as f64);
        }
    }
    struct PeekingFactory;
    impl SamplerFactory for PeekingFactory {
        fn start(&self, _: usize, _: &mut dyn RngCore) -> Box<dyn Sampler> {
            Box::new(Peeking)
        }
    }

    #[test]
    fn sampler_cannot_read_the_pending_reward() {
        let mut b = bundle(SamplerSpec::Uniform, StopperSpec::Fixed { t: 50 }, 1);
        b.sampler = Arc::new(PeekingFactory);
        run_episode(&gaussians(3), &b, 11).unwrap();
    }

    struct Broken;
    impl Sampler for Broken {
        fn probabilities(&mut self, _: &DataView<'_>, _: &mut dyn RngCore, out: &mut [f64]) {
            out.fill(0.6);
        }
    }
    struct BrokenFactory;
    impl SamplerFactory for BrokenFactory {
        fn start(&self, _: usize, _: &mut dyn RngCore) -> Box<dyn Sampler> {
            Box::new(Broken)
        }
    }

    #[test]
    fn invalid_probability_vector_is_a_protocol_error() {
        let mut b = bundle(SamplerSpec::Uniform, StopperSpec::Fixed { t: 10 }, 0);
        b.sampler = Arc::new(BrokenFactory);
        assert!(matches!(run_episode(&gaussians(2), &b, 1), Err(Error::Protocol(_))));
    }

    #[test]
    fn horizon_cap_truncates() {
        let b = crate::policies::bundle(
            &SamplerSpec::Uniform,
            &StopperSpec::MeanThreshold { arm: 0, level: 1e9 },
            &ChooserSpec::Fixed { arm: 0 },
            &RewinderSpec::None,
            1,
            40,
            1.0,
        )
        .unwrap();
        let r = run_episode(&gaussians(2), &b, 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.stop_time, 40);
    }

    #[test]
    fn uniform_sampler_mean_count() {
        // warmup gives each of the 2 arms one pull; the remaining 18 are fair coin flips
        let b = bundle(SamplerSpec::Uniform, StopperSpec::Fixed { t: 20 }, 1);
        let arms = gaussians(2);
        let n = 100_000;
        let counts: Vec<f64> = (0..n)
            .map(|i| run_episode(&arms, &b, crate::rng::split_seed(17, i)).unwrap().counts[0] as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let expected = 1.0 + 18.0 * 0.5;
        let se = (18.0f64 * 0.25).sqrt() / (n as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn json_dump_round_trips() {
        let b = bundle(SamplerSpec::Uniform, StopperSpec::Fixed { t: 8 }, 1);
        let r = run_episode(&gaussians(2), &b, 9).unwrap();
        let back: EpisodeRecord = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn counts_partition_time_and_sums_replay(seed in any::<u64>(), k in 1usize..5, horizon in 1u64..80, eps in 0.0f64..1.0) {
            let b = bundle(SamplerSpec::EpsilonGreedy { epsilon: eps }, StopperSpec::Fixed { t: horizon.max(k as u64) }, 1);
            let r = run_episode(&gaussians(k), &b, seed).unwrap();
            for t in 0..=r.stop_time {
                let v = r.view(t).unwrap();
                prop_assert_eq!(v.counts().iter().sum::<u64>(), t);
            }
            for arm in 0..k {
                let s: f64 = r.actions.iter().zip(&r.rewards).filter(|(a, _)| **a == arm).map(|(_, y)| y).sum();
                prop_assert_eq!(s, r.sums[arm]);
            }
            prop_assert!(r.rewound_time <= r.stop_time);
        }

        #[test]
        fn later_stopping_preserves_the_prefix(seed in any::<u64>(), t1 in 2u64..40, extra in 1u64..40) {
            let arms = gaussians(3);
            let short = run_episode(&arms, &bundle(SamplerSpec::Ucb1 { c: 1.0 }, StopperSpec::Fixed { t: t1.max(3) }, 1), seed).unwrap();
            let long = run_episode(&arms, &bundle(SamplerSpec::Ucb1 { c: 1.0 }, StopperSpec::Fixed { t: t1.max(3) + extra }, 1), seed).unwrap();
            let n = short.actions.len();
            prop_assert_eq!(&short.actions[..], &long.actions[..n]);
            prop_assert_eq!(&short.rewards[..], &long.rewards[..n]);
        }

        #[test]
        fn episodes_are_reproducible(seed in any::<u64>()) {
            let b = bundle(SamplerSpec::ThompsonGaussian { prior_mean: 0.0, prior_sd: 1.0, noise_sd: 1.0 }, StopperSpec::Fixed { t: 30 }, 1);
            let arms = gaussians(2);
            prop_assert_eq!(run_episode(&arms, &b, seed).unwrap(), run_episode(&arms, &b, seed).unwrap());
        }
    }
}
