//! Evaluation of the named checks against simulated batches.

use serde::{Deserialize, Serialize};

use crate::arms::normal_upper_quantile;
use crate::bounds::{
    bound_bias_l1, bound_bregman_stopping, bound_fully_adaptive_bregman, bound_fully_adaptive_l2, bound_minimax_nonadaptive, bound_r_quasinorm,
    bound_self_normalized, c_b, quasinorm_eff_order, BoundReport, Relation, StoppingBound, StoppingBranch, SIGMAS,
};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_bias, estimate_bregman_risk, estimate_dependence, estimate_deviation_curve, estimate_eff_sizes, estimate_l2_risk, estimate_r_quasinorm,
    mean_sqrt_counts, At, Batch, DeviationStatistic, EpisodeSummary, MCEstimate, Normalization, QuasiLoss, Snapshot, Target,
};
use crate::policies::{ChooserSpec, StopperSpec};
use crate::protocol::loglog_discounted;
use crate::subpsi::PsiFamily;

use super::config::{CheckSpec, ExperimentConfig, ResolvedVariant};

/// One simulated variant.
#[derive(Debug, Clone)]
pub struct VariantData {
    pub summaries: Vec<EpisodeSummary>,
    /// `snapshots[i][j]`: state of episode `i` at the `j`-th requested time,
    /// absent when the episode stopped earlier.
    pub snapshots: Vec<Vec<Option<Snapshot>>>,
    pub times: Vec<u64>,
}

/// One row of plot data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
}

/// Reports and plot rows produced by one check on one or more variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: String,
    pub x_label: String,
    pub reports: Vec<BoundReport>,
    pub table: Vec<PlotRow>,
}

impl CheckResult {
    fn new(name: impl Into<String>, kind: &str, x_label: &str) -> Self {
        CheckResult {
            name: name.into(),
            kind: kind.to_string(),
            x_label: x_label.to_string(),
            reports: Vec::new(),
            table: Vec::new(),
        }
    }

    fn push(&mut self, report: BoundReport) {
        self.reports.push(report);
    }

    fn row(&mut self, x: f64, lhs: &MCEstimate, rhs: f64) {
        self.table.push(PlotRow {
            x,
            lhs: lhs.value,
            lhs_stderr: lhs.stderr,
            rhs,
        });
    }
}

/// A variant together with its data.
pub struct Ctx<'a> {
    pub config: &'a ExperimentConfig,
    pub variant: &'a ResolvedVariant,
    pub data: &'a VariantData,
}

impl Ctx<'_> {
    fn batch(&self) -> Batch {
        Batch::new(self.data.summaries.clone(), &self.variant.arms, self.variant.bundle.clock_step, self.config.include_truncated)
    }

    /// Batch evaluated at a fixed time instead of the stopping time.
    fn batch_at(&self, t: u64) -> Result<Batch> {
        let j = self
            .data
            .times
            .iter()
            .position(|&s| s == t)
            .ok_or_else(|| Error::Domain(format!("no snapshot at time {t}")))?;
        let summaries = self
            .data
            .summaries
            .iter()
            .zip(&self.data.snapshots)
            .map(|(s, snaps)| {
                let snap = snaps[j].clone().ok_or_else(|| Error::InsufficientData(format!("episode {} stopped before time {t}", s.seed)))?;
                Ok(EpisodeSummary {
                    truncated: false,
                    stop: snap.clone(),
                    rewound: snap,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch::new(summaries, &self.variant.arms, self.variant.bundle.clock_step, true))
    }

    /// Standard deviation of arm `k` per unit of exposure.
    fn sd(&self, k: usize) -> f64 {
        self.variant.arms[k].sd() / self.variant.bundle.clock_step.sqrt()
    }

    /// Largest sub-Gaussian scale among the arms.
    fn max_sd(&self) -> f64 {
        (0..self.variant.arms.len()).map(|k| self.sd(k)).fold(0.0, f64::max)
    }

    fn sub_gaussian_psis(&self) -> Result<Vec<PsiFamily>> {
        (0..self.variant.arms.len()).map(|k| PsiFamily::sub_gaussian(self.sd(k))).collect()
    }

    fn name(&self, kind: &str) -> String {
        if self.config.variants.is_empty() {
            kind.to_string()
        } else {
            format!("{kind}[{}]", self.variant.label)
        }
    }
}

fn plain(value: f64) -> MCEstimate {
    MCEstimate {
        value,
        stderr: 0.0,
        n_reps: 0,
        n_truncated_excluded: 0,
        n_flagged: 0,
    }
}

fn with_stopping_details(r: BoundReport, u: &StoppingBound, b: f64, n_eff: f64) -> BoundReport {
    r.with_detail("b", b)
        .with_detail("n_eff", n_eff)
        .with_detail("u_log_ratio", u.log_ratio)
        .with_detail("u_moment", u.moment)
        .with_detail("best_r", u.best_r)
        .with_detail("u", u.value)
        .with_detail("widened", if u.widened { 1.0 } else { 0.0 })
        .with_note(format!(
            "U attained by the {} branch",
            if u.branch == StoppingBranch::LogRatio { "log-ratio" } else { "moment" }
        ))
}

/// Evaluate one check over all variants it applies to.
pub fn evaluate(spec: &CheckSpec, ctxs: &[Ctx<'_>]) -> Result<Vec<CheckResult>> {
    let kind = spec.name();
    match spec {
        CheckSpec::MinimaxL2 { arm } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let lhs = estimate_l2_risk(&c.batch(), Target::Fixed(*arm), At::Stop, Normalization::Count)?;
                let rhs = bound_minimax_nonadaptive(c.sd(*arm))?;
                res.row(i as f64, &lhs, rhs);
                res.push(BoundReport::new(c.name(kind), lhs, rhs, Relation::Equal));
            }
            Ok(vec![res])
        }
        CheckSpec::Inconsistency { arm, times, alpha } => {
            let z = normal_upper_quantile(alpha / 2.0);
            let mut out = Vec::new();
            for c in ctxs {
                let mut tail = CheckResult::new(c.name(&format!("{kind}/tail")), kind, "t");
                let mut counts = CheckResult::new(c.name(&format!("{kind}/count")), kind, "t");
                for &t in times {
                    let batch = c.batch_at(t)?;
                    let one_sided = batch.probability_of(Target::Fixed(*arm), At::Stop, |o| o.mean_hat > z)?;
                    let two_sided = batch.probability_of(Target::Fixed(*arm), At::Stop, |o| o.mean_hat.abs() > z)?;
                    tail.row(t as f64, &one_sided, *alpha);
                    tail.push(BoundReport::new(format!("{}/t={t}", tail.name), one_sided, *alpha, Relation::AtLeast).with_detail("z", z));
                    tail.push(
                        BoundReport::new(format!("{}/two-sided/t={t}", tail.name), two_sided, *alpha, Relation::AtLeast)
                            .with_note("supplementary: the event |mean| > z that the lower bound actually controls"),
                    );
                    let n: Vec<f64> = batch.summaries.iter().map(|s| s.stop.counts[*arm] as f64).collect();
                    let lhs = MCEstimate::from_values(&n)?;
                    let rhs = 1.0 + (t - 1) as f64 * (1.0 - alpha);
                    counts.row(t as f64, &lhs, rhs);
                    counts.push(BoundReport::new(format!("{}/t={t}", counts.name), lhs, rhs, Relation::Equal));
                }
                out.push(tail);
                out.push(counts);
            }
            Ok(out)
        }
        CheckSpec::ChosenConsistency { arm, tolerance, max_probability, count_probability } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for c in ctxs {
                let batch = c.batch();
                let miss = batch.probability_of(Target::Chosen, At::Stop, |o| o.error().abs() > *tolerance)?;
                res.push(BoundReport::new(c.name(&format!("{kind}/deviation")), miss, *max_probability, Relation::AtMost).with_detail("tolerance", *tolerance));
                let few = batch.probability_of(Target::Fixed(*arm), At::Stop, |o| o.count <= 1)?;
                res.push(BoundReport::new(c.name(&format!("{kind}/count-at-most-one")), few, *count_probability, Relation::Equal));
                res.row(res.table.len() as f64, &miss, *max_probability);
            }
            Ok(vec![res])
        }
        CheckSpec::LilSandwich { arm, from_b, to_b, max_truncation } => lil_sandwich(kind, *arm, *from_b, *to_b, *max_truncation, ctxs),
        CheckSpec::BrownianBias { arm, rel_tol } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let StopperSpec::LineCrossing { intercept, .. } = c.variant.stopper else {
                    return Err(Error::config("stopper", "line-crossing stopper required"));
                };
                let batch = c.batch();
                let bias = estimate_bias(&batch, Target::Fixed(*arm), At::Stop)?;
                let eff = estimate_eff_sizes(&batch, Target::Fixed(*arm), At::Stop)?;
                let n_eff = eff.n_eff_estimate()?;
                let b = c.variant.guaranteed_exposure(*arm);
                let psi = PsiFamily::sub_gaussian(c.sd(*arm))?;
                let u = bound_bregman_stopping(n_eff.value, |r| eff.n_eff_r(r), b)?;
                let interval = bound_bias_l1(&psi, u.value)?;
                let trunc = batch.truncation_fraction();
                let name = c.name(kind);
                res.row(i as f64, &bias, interval.upper);
                res.push(
                    BoundReport::new(format!("{name}/bias"), bias, 1.0 / intercept, Relation::Within { rel: *rel_tol })
                        .with_detail("truncation_fraction", trunc),
                );
                res.push(BoundReport::new(format!("{name}/n-eff"), n_eff, intercept * intercept, Relation::Within { rel: *rel_tol }));
                res.push(with_stopping_details(
                    BoundReport::new(format!("{name}/bias-bound"), bias, interval.upper, Relation::AtMost).with_detail("lower", interval.lower),
                    &u,
                    b,
                    n_eff.value,
                ));
                let floor = 1.0 / (n_eff.value.sqrt() * 5.0);
                res.push(
                    BoundReport::new(format!("{name}/log-factor-headroom"), bias, floor, Relation::AtLeast)
                        .with_note("measured bias is at least 1/(5 sqrt(n_eff))"),
                );
            }
            Ok(vec![res])
        }
        CheckSpec::DeviationSubPsi { arm, deltas } => {
            let mut out = Vec::new();
            for c in ctxs {
                let mut res = CheckResult::new(c.name(kind), kind, "delta");
                let b = c.variant.guaranteed_exposure(*arm);
                let curve = estimate_deviation_curve(&c.batch(), Target::Fixed(*arm), At::Stop, &DeviationStatistic::Bregman(c.variant.psis.clone()), deltas)?;
                let mut worst: Option<((u8, f64), BoundReport)> = None;
                for pt in &curve {
                    let rhs = 2.0 * (-pt.delta * b).exp();
                    let est = MCEstimate {
                        value: pt.probability,
                        stderr: pt.stderr,
                        n_reps: c.data.summaries.len(),
                        n_truncated_excluded: 0,
                        n_flagged: 0,
                    };
                    res.row(pt.delta, &est, rhs);
                    // a violated point outranks any holding one; holding points rank by p/rhs
                    let excess = pt.probability - SIGMAS * pt.stderr - rhs;
                    let score = if excess > 0.0 { (1, excess) } else { (0, pt.probability / rhs) };
                    if worst.as_ref().is_none_or(|(w, _)| score.0 > w.0 || (score.0 == w.0 && score.1 > w.1)) {
                        let r = BoundReport::new(res.name.clone(), est, rhs, Relation::AtMost).with_detail("delta", pt.delta).with_detail("b", b);
                        worst = Some((score, r));
                    }
                }
                let (_, r) = worst.ok_or_else(|| Error::InsufficientData("empty deviation grid".into()))?;
                res.push(r.with_note("tightest point of the delta grid"));
                out.push(res);
            }
            Ok(out)
        }
        CheckSpec::BregmanStopping { arm } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let batch = c.batch();
                let lhs = estimate_bregman_risk(&batch, &c.variant.psis, Target::Fixed(*arm), At::Stop, Normalization::None)?;
                let eff = estimate_eff_sizes(&batch, Target::Fixed(*arm), At::Stop)?;
                let b = c.variant.guaranteed_exposure(*arm);
                let u = bound_bregman_stopping(eff.n_eff(), |r| eff.n_eff_r(r), b)?;
                res.row(i as f64, &lhs, u.value);
                res.push(
                    with_stopping_details(BoundReport::new(c.name(kind), lhs, u.value, Relation::AtMost), &u, b, eff.n_eff())
                        .with_detail("truncation_fraction", batch.truncation_fraction()),
                );
            }
            Ok(vec![res])
        }
        CheckSpec::FullyAdaptive { max_entropy } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let batch = c.batch();
                let dep = estimate_dependence(&batch)?;
                let b = c.variant.warmup as f64;
                let sigma = c.max_sd();
                let lhs = estimate_l2_risk(&batch, Target::Chosen, At::Rewound, Normalization::LogLogCount)?;
                let rhs = bound_fully_adaptive_l2(b, sigma, dep.entropy)?;
                res.row(i as f64, &lhs, rhs);
                let mut r = BoundReport::new(c.name(kind), lhs, rhs, Relation::AtMost)
                    .with_detail("c_b", c_b(b)?)
                    .with_detail("entropy", dep.entropy)
                    .with_detail("sigma", sigma)
                    .with_detail("truncation_fraction", batch.truncation_fraction());
                if matches!(c.variant.chooser, ChooserSpec::RandomNonadaptive { .. }) {
                    r = r.with_note("via I <= H(kappa)");
                }
                res.push(r);
                if let Some(h) = max_entropy {
                    res.push(BoundReport::new(c.name(&format!("{kind}/entropy")), plain(dep.entropy), *h, Relation::Below));
                }
            }
            Ok(vec![res])
        }
        CheckSpec::BregmanQuasinorm { r } => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let batch = c.batch();
                let dep = estimate_dependence(&batch)?;
                let psis = if c.variant.psis.is_empty() { c.sub_gaussian_psis()? } else { c.variant.psis.clone() };
                let lhs = estimate_r_quasinorm(&batch, Target::Chosen, At::Rewound, *r, &QuasiLoss::Bregman(psis))?;
                let eff = estimate_eff_sizes(&batch, Target::Chosen, At::Rewound)?.n_dbtilde_eff_r(quasinorm_eff_order(*r))?;
                let numerator = bound_fully_adaptive_bregman(c.variant.warmup as f64, dep.entropy)?;
                let rhs = bound_r_quasinorm(*r, numerator, eff)?;
                res.row(i as f64, &lhs, rhs);
                res.push(
                    BoundReport::new(c.name(kind), lhs, rhs, Relation::AtMost)
                        .with_detail("r", *r)
                        .with_detail("eff", eff)
                        .with_detail("entropy", dep.entropy),
                );
            }
            Ok(vec![res])
        }
        CheckSpec::SelfNormalized => {
            let mut res = CheckResult::new(kind, kind, "variant");
            for (i, c) in ctxs.iter().enumerate() {
                let batch = c.batch();
                let dep = estimate_dependence(&batch)?;
                let lhs = estimate_l2_risk(&batch, Target::Chosen, At::Stop, Normalization::SelfNormalized)?;
                let rhs = bound_self_normalized(c.max_sd(), dep.entropy)?;
                res.row(i as f64, &lhs, rhs);
                let mut rep = BoundReport::new(c.name(kind), lhs, rhs, Relation::AtMost).with_detail("entropy", dep.entropy);
                for (k, e) in mean_sqrt_counts(&batch, At::Stop)?.into_iter().enumerate() {
                    rep = rep.with_detail(&format!("mean_sqrt_count_{k}"), e);
                }
                res.push(rep);
            }
            Ok(vec![res])
        }
        CheckSpec::FiniteMomentBoundedness { discounted, undiscounted, max_ratio } => {
            let find = |label: &String| {
                ctxs.iter()
                    .find(|c| &c.variant.label == label)
                    .ok_or_else(|| Error::config("discounted", format!("unknown variant `{label}`")))
            };
            let mut disc = CheckResult::new(format!("{kind}/discounted"), kind, "variant");
            let mut vals = Vec::new();
            for (i, l) in discounted.iter().enumerate() {
                let c = find(l)?;
                let est = estimate_l2_risk(&c.batch(), Target::Chosen, At::Rewound, Normalization::LogCount)?;
                disc.row(i as f64, &est, f64::NAN);
                vals.push(est);
            }
            let hi = vals.iter().max_by(|a, b| a.value.total_cmp(&b.value)).copied().expect("validated nonempty");
            let lo = vals.iter().min_by(|a, b| a.value.total_cmp(&b.value)).copied().expect("validated nonempty");
            let ratio = hi.value / lo.value;
            let ratio_est = MCEstimate {
                value: ratio,
                stderr: ratio * (hi.stderr / hi.value).hypot(lo.stderr / lo.value),
                ..hi
            };
            disc.push(BoundReport::new(format!("{kind}/discounted-ratio"), ratio_est, *max_ratio, Relation::Below).with_note("shape check: max over min"));
            let mut undisc = CheckResult::new(format!("{kind}/undiscounted"), kind, "variant");
            let mut uvals = Vec::new();
            for (i, l) in undiscounted.iter().enumerate() {
                let est = estimate_l2_risk(&find(l)?.batch(), Target::Fixed(0), At::Stop, Normalization::Count)?;
                undisc.row(i as f64, &est, f64::NAN);
                uvals.push(est);
            }
            let growth = uvals[uvals.len() - 1].minus(&uvals[0]);
            undisc.push(BoundReport::new(format!("{kind}/undiscounted-growth"), growth, 0.0, Relation::SignificantlyAbove).with_note("last minus first variant"));
            Ok(vec![disc, undisc])
        }
        CheckSpec::DeviationPolytail { arm, p, deltas, max_ratio } => {
            let mut out = Vec::new();
            for c in ctxs {
                let mut res = CheckResult::new(c.name(kind), kind, "delta");
                let curve = estimate_deviation_curve(&c.batch(), Target::Fixed(*arm), At::Stop, &DeviationStatistic::DiscountedL2 { sd: c.sd(*arm) }, deltas)?;
                let scaled: Vec<f64> = curve.iter().map(|pt| pt.delta.powf(*p) * pt.probability).collect();
                for (pt, s) in curve.iter().zip(&scaled) {
                    let est = MCEstimate {
                        value: *s,
                        stderr: pt.delta.powf(*p) * pt.stderr,
                        ..plain(0.0)
                    };
                    res.row(pt.delta, &est, f64::NAN);
                }
                let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
                let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                res.push(
                    BoundReport::new(format!("{}/ratio", res.name), plain(ratio), *max_ratio, Relation::Below)
                        .with_detail("max_scaled", hi)
                        .with_detail("min_scaled", lo)
                        .with_note("shape check: delta^p-scaled tail stays bounded"),
                );
                out.push(res);
            }
            Ok(out)
        }
    }
}

fn lil_sandwich(kind: &str, arm: usize, from_b: u64, to_b: u64, max_truncation: f64, ctxs: &[Ctx<'_>]) -> Result<Vec<CheckResult>> {
    let b_of = |c: &Ctx<'_>| match c.variant.stopper {
        StopperSpec::Lil { b, .. } => b,
        _ => 0,
    };
    let mut order: Vec<&Ctx<'_>> = ctxs.iter().collect();
    order.sort_by_key(|c| b_of(c));
    let reference = c_b(from_b as f64)?;
    let mut lower = CheckResult::new(format!("{kind}/undiscounted"), kind, "b");
    let mut upper = CheckResult::new(format!("{kind}/loglog"), kind, "b");
    let mut risks = Vec::new();
    for c in order {
        let b = b_of(c);
        let batch = c.batch();
        let sigma2 = c.sd(arm).powi(2);
        let name = c.name(kind);
        let risk = estimate_l2_risk(&batch, Target::Fixed(arm), At::Stop, Normalization::Count)?;
        let floor = batch.mean_of(Target::Fixed(arm), At::Stop, |o| Ok(sigma2 * o.exposure.ln().ln()))?;
        let paired = batch.mean_of(Target::Fixed(arm), At::Stop, |o| Ok(o.exposure * o.error().powi(2) - sigma2 * o.exposure.ln().ln()))?;
        lower.row(b as f64, &risk, floor.value);
        lower.push(
            BoundReport::new(format!("{name}/loglog-floor"), paired, 0.0, Relation::AtLeast)
                .with_detail("sigma2_mean_loglog_n", floor.value)
                .with_detail("risk", risk.value)
                .with_note("paired difference N err^2 - sigma^2 log log N"),
        );
        let disc = batch.mean_of(Target::Fixed(arm), At::Stop, |o| Ok(loglog_discounted(o.exposure)? * o.error().powi(2)))?;
        let cap = 2.5 * c_b(b as f64)? * sigma2;
        upper.row(b as f64, &disc, cap);
        upper.push(BoundReport::new(format!("{name}/loglog-lower"), disc, sigma2, Relation::AtLeast));
        upper.push(BoundReport::new(format!("{name}/loglog-upper"), disc, cap, Relation::AtMost).with_detail("c_b", c_b(b as f64)?));
        upper.push(BoundReport::new(format!("{name}/loglog-upper-reference"), disc, 2.5 * reference * sigma2, Relation::AtMost).with_detail("reference_b", from_b as f64));
        let trunc = MCEstimate::proportion(batch.truncated(), batch.len())?;
        upper.push(BoundReport::new(format!("{name}/truncation"), trunc, max_truncation, Relation::Below));
        risks.push((b, risk));
    }
    let pick = |b: u64| risks.iter().find(|(x, _)| *x == b).map(|(_, r)| *r).ok_or_else(|| Error::config("from_b", format!("no variant with b = {b}")));
    let growth = pick(to_b)?.minus(&pick(from_b)?);
    lower.push(
        BoundReport::new(format!("{kind}/growth b={from_b}..{to_b}"), growth, 0.0, Relation::SignificantlyAbove).with_note("undiscounted risk increases with b"),
    );
    Ok(vec![lower, upper])
}
