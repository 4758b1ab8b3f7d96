//! Monte Carlo estimators over batches of episodes.
//!
//! Standard errors:
//! * plain means use `sd / √n` with the unbiased sample variance;
//! * power means `(Ê X^r)^{1/r}` use the delta method,
//!   `se = (1/r) m^{1/r − 1} se(m)` with `m = Ê X^r`;
//! * effective sample sizes `(Ê N^{−r})^{−1/r}` use the same delta method;
//! * exceedance probabilities use the binomial `√(p(1−p)/n)`.
//!
//! All sums are compensated and taken in batch order, which the harness fixes
//! to episode-index order, so estimates do not depend on worker scheduling.

use serde::{Deserialize, Serialize};

use crate::arms::ArmSpec;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::protocol::{log_discounted, loglog_discounted, EpisodeRecord};
use crate::subpsi::PsiFamily;

/// Counts and sums of every arm at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: u64,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

/// What an estimator needs from one episode; the raw trajectory is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub chosen_arm: usize,
    pub truncated: bool,
    pub clock_step: f64,
    pub stop: Snapshot,
    pub rewound: Snapshot,
}

impl EpisodeSummary {
    pub fn from_record(rec: &EpisodeRecord) -> Self {
        let stop = Snapshot {
            time: rec.stop_time,
            counts: rec.counts.clone(),
            sums: rec.sums.clone(),
        };
        let rewound = if rec.rewound_time == rec.stop_time {
            stop.clone()
        } else {
            let v = rec.view(rec.rewound_time).expect("rewound time never exceeds the stop time");
            Snapshot {
                time: rec.rewound_time,
                counts: v.counts().to_vec(),
                sums: v.sums().to_vec(),
            }
        };
        EpisodeSummary {
            seed: rec.seed,
            chosen_arm: rec.chosen_arm,
            truncated: rec.truncated,
            clock_step: rec.clock_step,
            stop,
            rewound,
        }
    }
}

/// Which arm an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Fixed(usize),
    Chosen,
}

/// At which time the sample mean is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum At {
    Stop,
    Rewound,
}

/// The quantities one episode contributes for a `(target, at)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obs {
    pub arm: usize,
    pub count: u64,
    /// Count times clock step; equals `count` for ordinary bandits.
    pub exposure: f64,
    pub mean_hat: f64,
    pub mean: f64,
}

impl Obs {
    pub fn error(&self) -> f64 {
        self.mean_hat - self.mean
    }
}

/// A batch of episode summaries together with the true arm means.
#[derive(Debug, Clone)]
pub struct Batch {
    pub summaries: Vec<EpisodeSummary>,
    /// True means on the exposure scale.
    pub means: Vec<f64>,
    /// Keep truncated episodes (evaluated at the cap) instead of dropping them.
    pub include_truncated: bool,
}

impl Batch {
    /// Means are rescaled by the clock step so that they match `S / exposure`.
    pub fn new(summaries: Vec<EpisodeSummary>, arms: &[ArmSpec], clock_step: f64, include_truncated: bool) -> Self {
        Batch {
            summaries,
            means: arms.iter().map(|a| a.mean() / clock_step).collect(),
            include_truncated,
        }
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    pub fn truncated(&self) -> usize {
        self.summaries.iter().filter(|s| s.truncated).count()
    }

    pub fn truncation_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.truncated() as f64 / self.len() as f64
        }
    }

    fn obs(&self, s: &EpisodeSummary, target: Target, at: At) -> Result<Obs> {
        let arm = match target {
            Target::Fixed(k) => k,
            Target::Chosen => s.chosen_arm,
        };
        let snap = match at {
            At::Stop => &s.stop,
            At::Rewound => &s.rewound,
        };
        let count = *snap
            .counts
            .get(arm)
            .ok_or_else(|| Error::Domain(format!("arm {arm} out of range")))?;
        if count == 0 {
            return Err(Error::UndefinedMean { arm, t: snap.time });
        }
        let exposure = count as f64 * s.clock_step;
        Ok(Obs {
            arm,
            count,
            exposure,
            mean_hat: snap.sums[arm] / exposure,
            mean: self.means[arm],
        })
    }

    /// Observations of the episodes kept under the truncation policy, in
    /// batch order, plus the number dropped for truncation.
    pub fn observations(&self, target: Target, at: At) -> Result<(Vec<Obs>, usize)> {
        if self.is_empty() {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        let mut out = Vec::with_capacity(self.len());
        let mut excluded = 0;
        for s in &self.summaries {
            if s.truncated && !self.include_truncated {
                excluded += 1;
                continue;
            }
            out.push(self.obs(s, target, at)?);
        }
        Ok((out, excluded))
    }

    /// Mean of a per-episode statistic. Episodes where `f` fails are
    /// flagged and left out.
    pub fn mean_of<F>(&self, target: Target, at: At, f: F) -> Result<MCEstimate>
    where
        F: Fn(&Obs) -> Result<f64>,
    {
        let (obs, excluded) = self.observations(target, at)?;
        let mut values = Vec::with_capacity(obs.len());
        let mut flagged = 0;
        for o in &obs {
            match f(o) {
                Ok(v) => values.push(v),
                Err(_) => flagged += 1,
            }
        }
        let mut est = MCEstimate::from_values(&values)?;
        est.n_truncated_excluded = excluded;
        est.n_flagged = flagged;
        Ok(est)
    }

    /// Probability of a per-episode event, with binomial stderr.
    pub fn probability_of<F>(&self, target: Target, at: At, event: F) -> Result<MCEstimate>
    where
        F: Fn(&Obs) -> bool,
    {
        let (obs, excluded) = self.observations(target, at)?;
        let hits = obs.iter().filter(|o| event(o)).count();
        let mut est = MCEstimate::proportion(hits, obs.len())?;
        est.n_truncated_excluded = excluded;
        Ok(est)
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_reps: usize,
    pub n_truncated_excluded: usize,
    /// Episodes dropped because the statistic was undefined for them.
    pub n_flagged: usize,
}

impl MCEstimate {
    /// Sample mean and `sd / √n`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 values, got {n}")));
        }
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value();
        let sd = (ss / (n - 1) as f64).sqrt();
        Ok(MCEstimate {
            value: mean,
            stderr: sd / (n as f64).sqrt(),
            n_reps: n,
            n_truncated_excluded: 0,
            n_flagged: 0,
        })
    }

    pub fn proportion(hits: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 trials, got {n}")));
        }
        let p = hits as f64 / n as f64;
        Ok(MCEstimate {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n_reps: n,
            n_truncated_excluded: 0,
            n_flagged: 0,
        })
    }

    /// `(Ê X^r)^{1/r}` with a delta-method stderr. `values` must be nonnegative.
    pub fn power_mean(values: &[f64], r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("power mean needs r > 0, got {r}")));
        }
        let powered: Vec<f64> = values.iter().map(|v| v.powf(r)).collect();
        let m = Self::from_values(&powered)?;
        let value = m.value.powf(1.0 / r);
        let slope = if m.value > 0.0 { m.value.powf(1.0 / r - 1.0) / r } else { 0.0 };
        Ok(MCEstimate {
            value,
            stderr: slope * m.stderr,
            ..m
        })
    }

    /// Difference of two estimates from independent batches.
    pub fn minus(&self, other: &MCEstimate) -> MCEstimate {
        MCEstimate {
            value: self.value - other.value,
            stderr: self.stderr.hypot(other.stderr),
            n_reps: self.n_reps.min(other.n_reps),
            n_truncated_excluded: self.n_truncated_excluded + other.n_truncated_excluded,
            n_flagged: self.n_flagged + other.n_flagged,
        }
    }
}

/// Multiplier applied to a loss before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    /// `N`.
    Count,
    /// `N / log N`.
    LogCount,
    /// `N / log log N`.
    LogLogCount,
    /// `N² / (N + (E√N_k)²)`, with `E√N_k` estimated per arm on the batch.
    SelfNormalized,
}

fn count_weight(norm: Normalization, n: f64, sqrt_means: &[f64], arm: usize) -> Result<f64> {
    match norm {
        Normalization::None => Ok(1.0),
        Normalization::Count => Ok(n),
        Normalization::LogCount => log_discounted(n),
        Normalization::LogLogCount => loglog_discounted(n),
        Normalization::SelfNormalized => {
            let e = sqrt_means[arm];
            Ok(n * n / (n + e * e))
        }
    }
}

/// Per-arm `Ê√N_k`, over the episodes kept by the truncation policy.
pub fn mean_sqrt_counts(batch: &Batch, at: At) -> Result<Vec<f64>> {
    let kept: Vec<&EpisodeSummary> = batch.summaries.iter().filter(|s| batch.include_truncated || !s.truncated).collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData("no episodes kept".into()));
    }
    Ok((0..batch.means.len())
        .map(|arm| {
            let total: CompensatedSum = kept
                .iter()
                .map(|s| {
                    let snap = if at == At::Stop { &s.stop } else { &s.rewound };
                    (snap.counts[arm] as f64 * s.clock_step).sqrt()
                })
                .collect();
            total.value() / kept.len() as f64
        })
        .collect())
}

/// `Ê[μ̂ − μ]`.
pub fn estimate_bias(batch: &Batch, target: Target, at: At) -> Result<MCEstimate> {
    batch.mean_of(target, at, |o| Ok(o.error()))
}

/// `Ê[w(N)(μ̂ − μ)²]`. Fails if any kept episode is below the count
/// threshold of the normalization.
pub fn estimate_l2_risk(batch: &Batch, target: Target, at: At, norm: Normalization) -> Result<MCEstimate> {
    normalized_loss(batch, target, at, norm, |o| Ok(o.error() * o.error()))
}

/// `Ê|μ̂ − μ|`.
pub fn estimate_l1_risk(batch: &Batch, target: Target, at: At) -> Result<MCEstimate> {
    batch.mean_of(target, at, |o| Ok(o.error().abs()))
}

/// Per-arm sub-ψ families: a single entry applies to every arm.
fn psi_for(psis: &[PsiFamily], arm: usize) -> Result<&PsiFamily> {
    match psis.len() {
        0 => Err(Error::config("psi", "a sub-psi family is required")),
        1 => Ok(&psis[0]),
        _ => psis.get(arm).ok_or_else(|| Error::config("psi", format!("no family for arm {arm}"))),
    }
}

/// `Ê[w(N) D(μ̂, μ)]`. Episodes whose error lies outside the conjugate
/// domain are flagged and excluded.
pub fn estimate_bregman_risk(batch: &Batch, psis: &[PsiFamily], target: Target, at: At, norm: Normalization) -> Result<MCEstimate> {
    psi_for(psis, 0)?;
    normalized_loss(batch, target, at, norm, |o| psi_for(psis, o.arm)?.bregman(o.mean_hat, o.mean))
}

fn normalized_loss<F>(batch: &Batch, target: Target, at: At, norm: Normalization, loss: F) -> Result<MCEstimate>
where
    F: Fn(&Obs) -> Result<f64>,
{
    let sqrt_means = if norm == Normalization::SelfNormalized {
        mean_sqrt_counts(batch, at)?
    } else {
        Vec::new()
    };
    let (obs, _) = batch.observations(target, at)?;
    for o in &obs {
        count_weight(norm, o.exposure, &sqrt_means, o.arm)?;
    }
    batch.mean_of(target, at, |o| Ok(count_weight(norm, o.exposure, &sqrt_means, o.arm)? * loss(o)?))
}

/// Loss used inside an `r`-quasinorm.
#[derive(Debug, Clone, PartialEq)]
pub enum QuasiLoss {
    L2,
    Bregman(Vec<PsiFamily>),
}

/// `(Ê[loss^r])^{1/r}` for `r ∈ (0, 1)`.
pub fn estimate_r_quasinorm(batch: &Batch, target: Target, at: At, r: f64, loss: &QuasiLoss) -> Result<MCEstimate> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("quasinorm order must lie in (0, 1), got {r}")));
    }
    let (obs, excluded) = batch.observations(target, at)?;
    let mut values = Vec::with_capacity(obs.len());
    let mut flagged = 0;
    for o in &obs {
        let v = match loss {
            QuasiLoss::L2 => Ok(o.error() * o.error()),
            QuasiLoss::Bregman(psis) => psi_for(psis, o.arm).and_then(|f| f.bregman(o.mean_hat, o.mean)),
        };
        match v {
            Ok(v) => values.push(v),
            Err(_) => flagged += 1,
        }
    }
    let mut est = MCEstimate::power_mean(&values, r)?;
    est.n_truncated_excluded = excluded;
    est.n_flagged = flagged;
    Ok(est)
}

/// Default grid of orders on which effective-size curves are reported.
pub const EFF_SIZE_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Effective sample sizes of the target arm: harmonic-type means of its count.
#[derive(Debug, Clone, PartialEq)]
pub struct EffSampleSizes {
    counts: Vec<f64>,
    excluded: usize,
}

/// Effective-size curves on a grid of orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffSizeCurves {
    pub r: Vec<f64>,
    pub n_eff_r: Vec<f64>,
    pub n_tilde_eff_r: Vec<Option<f64>>,
    pub n_dbtilde_eff_r: Vec<Option<f64>>,
}

fn neg_power_mean(values: impl Iterator<Item = f64>, r: f64) -> f64 {
    let (sum, n) = values.fold((CompensatedSum::default(), 0usize), |(mut s, n), v| {
        s.add(v.powf(-r));
        (s, n + 1)
    });
    (sum.value() / n as f64).powf(-1.0 / r)
}

impl EffSampleSizes {
    /// Built directly from counts (exposures); used by tests and synthetic checks.
    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|&n| !(n > 0.0)) {
            return Err(Error::Domain("effective sizes need positive counts".into()));
        }
        Ok(EffSampleSizes { counts, excluded: 0 })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n_truncated_excluded(&self) -> usize {
        self.excluded
    }

    /// `1 / Ê[1/N]`.
    pub fn n_eff(&self) -> f64 {
        self.n_eff_r(1.0)
    }

    /// `n_eff` with a delta-method stderr.
    pub fn n_eff_estimate(&self) -> Result<MCEstimate> {
        let inv: Vec<f64> = self.counts.iter().map(|n| 1.0 / n).collect();
        let m = MCEstimate::from_values(&inv)?;
        Ok(MCEstimate {
            value: 1.0 / m.value,
            stderr: m.stderr / (m.value * m.value),
            n_truncated_excluded: self.excluded,
            ..m
        })
    }

    pub fn mean_count(&self) -> f64 {
        self.counts.iter().copied().collect::<CompensatedSum>().value() / self.counts.len() as f64
    }

    /// `(Ê N^{−r})^{−1/r}`.
    pub fn n_eff_r(&self, r: f64) -> f64 {
        neg_power_mean(self.counts.iter().copied(), r)
    }

    /// Same with `N / log N` in place of `N`; needs every count `≥ 2`.
    pub fn n_tilde_eff_r(&self, r: f64) -> Result<f64> {
        let d = self.counts.iter().map(|&n| log_discounted(n)).collect::<Result<Vec<_>>>()?;
        Ok(neg_power_mean(d.into_iter(), r))
    }

    /// Same with `N / log log N`; needs every count `≥ 3`.
    pub fn n_dbtilde_eff_r(&self, r: f64) -> Result<f64> {
        let d = self.counts.iter().map(|&n| loglog_discounted(n)).collect::<Result<Vec<_>>>()?;
        Ok(neg_power_mean(d.into_iter(), r))
    }

    pub fn curves(&self, grid: &[f64]) -> EffSizeCurves {
        EffSizeCurves {
            r: grid.to_vec(),
            n_eff_r: grid.iter().map(|&r| self.n_eff_r(r)).collect(),
            n_tilde_eff_r: grid.iter().map(|&r| self.n_tilde_eff_r(r).ok()).collect(),
            n_dbtilde_eff_r: grid.iter().map(|&r| self.n_dbtilde_eff_r(r).ok()).collect(),
        }
    }
}

pub fn estimate_eff_sizes(batch: &Batch, target: Target, at: At) -> Result<EffSampleSizes> {
    let (obs, excluded) = batch.observations(target, at)?;
    let mut e = EffSampleSizes::from_counts(obs.iter().map(|o| o.exposure).collect())?;
    e.excluded = excluded;
    Ok(e)
}

/// Per-episode statistic for deviation curves.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviationStatistic {
    /// `D(μ̂, μ)`.
    Bregman(Vec<PsiFamily>),
    /// `(N / log N) ((μ̂ − μ) / σ)²`.
    DiscountedL2 { sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub delta: f64,
    pub probability: f64,
    pub stderr: f64,
}

/// `P̂(statistic ≥ δ)` on an increasing grid.
pub fn estimate_deviation_curve(batch: &Batch, target: Target, at: At, stat: &DeviationStatistic, deltas: &[f64]) -> Result<Vec<DeviationPoint>> {
    if deltas.windows(2).any(|w| w[0] >= w[1]) || deltas.iter().any(|d| *d < 0.0) {
        return Err(Error::Domain("deviation grid must be nonnegative and increasing".into()));
    }
    let (obs, _) = batch.observations(target, at)?;
    let values = obs
        .iter()
        .map(|o| match stat {
            DeviationStatistic::Bregman(psis) => psi_for(psis, o.arm)?.bregman(o.mean_hat, o.mean),
            DeviationStatistic::DiscountedL2 { sd } => Ok(log_discounted(o.exposure)? * (o.error() / sd).powi(2)),
        })
        .collect::<Result<Vec<f64>>>()?;
    deltas
        .iter()
        .map(|&d| {
            let hits = values.iter().filter(|&&v| v >= d).count();
            let p = MCEstimate::proportion(hits, values.len())?;
            Ok(DeviationPoint {
                delta: d,
                probability: p.value,
                stderr: p.stderr,
            })
        })
        .collect()
}

/// Empirical law of the chosen arm and its plug-in entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dependence {
    pub p: Vec<f64>,
    /// Natural-log entropy of the empirical choice frequencies.
    pub entropy: f64,
}

impl Dependence {
    pub fn from_frequencies(p: Vec<f64>) -> Self {
        let entropy = -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        Dependence { p, entropy: entropy.max(0.0) }
    }

    /// `1 + Σ_{p_k > 0} p_k²(|1/p_k − 1|^q − 1)`.
    pub fn iq_upper(&self, q: f64) -> f64 {
        let s: f64 = self
            .p
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x * ((1.0 / x - 1.0).abs().powf(q) - 1.0))
            .sum();
        (1.0 + s).max(0.0)
    }

    /// Distribution-free cap `(k−1)/k · ((k−1)^{q−1} + 1)`, valid for `q ∈ [1, 2]`.
    pub fn iq_cap(&self, q: f64) -> Result<f64> {
        if !(1.0..=2.0).contains(&q) {
            return Err(Error::Domain(format!("cap holds for q in [1, 2], got {q}")));
        }
        let k = self.p.len() as f64;
        Ok((k - 1.0) / k * ((k - 1.0).powf(q - 1.0) + 1.0))
    }
}

pub fn estimate_dependence(batch: &Batch) -> Result<Dependence> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    let k = batch.means.len();
    let kept: Vec<&EpisodeSummary> = batch.summaries.iter().filter(|s| batch.include_truncated || !s.truncated).collect();
    let mut counts = vec![0usize; k];
    for s in &kept {
        counts[s.chosen_arm] += 1;
    }
    let n = kept.len().max(1) as f64;
    Ok(Dependence::from_frequencies(counts.iter().map(|&c| c as f64 / n).collect()))
}
