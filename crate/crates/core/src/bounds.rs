//! Closed-form right-hand sides and the comparison against Monte Carlo
//! estimates.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MCEstimate;
use crate::numeric::golden_section_min;
use crate::subpsi::PsiFamily;

/// Multiple of the standard error allowed when comparing against a bound.
pub const SIGMAS: f64 = 3.0;

/// `σ_k²`.
pub fn bound_minimax_nonadaptive(sigma: f64) -> Result<f64> {
    if !sigma.is_finite() {
        return Err(Error::Domain("minimax risk needs a finite variance".into()));
    }
    Ok(sigma * sigma)
}

/// `‖σ_κ‖_r = (Σ_k p_k σ_k^r)^{1/r}` for a chosen-arm law `p`.
pub fn chosen_norm(sigmas: &[f64], p: &[f64], r: f64) -> Result<f64> {
    if sigmas.len() != p.len() {
        return Err(Error::Domain("moment and probability vectors differ in length".into()));
    }
    let s: f64 = sigmas.iter().zip(p).filter(|(_, &w)| w > 0.0).map(|(s, w)| w * s.powf(r)).sum();
    Ok(s.powf(1.0 / r))
}

/// Hölder conjugate `p / (p − 1)`.
fn conjugate_exponent(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("moment order must exceed 1, got {p}")));
    }
    Ok(if p.is_infinite() { 1.0 } else { p / (p - 1.0) })
}

/// `‖σ_κ‖₂² + C_p ‖σ_κ^{(2p)}‖_{2p}² I_q^{1/q}` with `1/p + 1/q = 1`.
///
/// `sigma_2p[k]` is the centered `2p`-norm of arm `k`; `iq` the dependence term.
pub fn bound_finite_moment_nonadaptive(sigmas: &[f64], sigma_2p: &[f64], p_choice: &[f64], p: f64, c_p: f64, iq: f64) -> Result<f64> {
    let q = conjugate_exponent(p)?;
    if sigmas.iter().chain(sigma_2p).any(|s| !s.is_finite()) {
        return Err(Error::Domain("finite-moment bound needs finite 2p-norms".into()));
    }
    let base = chosen_norm(sigmas, p_choice, 2.0)?.powi(2);
    if iq == 0.0 {
        return Ok(base);
    }
    Ok(base + c_p * chosen_norm(sigma_2p, p_choice, 2.0 * p)?.powi(2) * iq.powf(1.0 / q))
}

/// Structure of the fully adaptive finite-moment bound: two coefficients
/// whose multipliers are unknown constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteMomentForm {
    /// `‖σ_κ‖₂²`.
    pub variance_term: f64,
    /// `‖σ_κ‖_{2p}² I_q^{1/q}`.
    pub dependence_term: f64,
}

impl FiniteMomentForm {
    /// Evaluate with supplied constants `(C_1, C_p)`.
    pub fn evaluate(&self, c1: f64, cp: f64) -> f64 {
        c1 * self.variance_term + cp * self.dependence_term
    }
}

pub fn bound_fully_adaptive_finite_moment(sigmas: &[f64], sigma_2p: &[f64], p_choice: &[f64], p: f64, iq: f64) -> Result<FiniteMomentForm> {
    let q = conjugate_exponent(p)?;
    Ok(FiniteMomentForm {
        variance_term: chosen_norm(sigmas, p_choice, 2.0)?.powi(2),
        dependence_term: if iq == 0.0 { 0.0 } else { chosen_norm(sigma_2p, p_choice, 2.0 * p)?.powi(2) * iq.powf(1.0 / q) },
    })
}

fn c_r_objective(r: f64, q: f64) -> f64 {
    2f64.powf(q / r) / E * r * r / ((r - q) * (q - 1.0))
}

/// `C_r = inf_{q ∈ (1, r)} 2^{q/r} r² / (e (r − q)(q − 1))`.
pub fn c_r(r: f64) -> Result<f64> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::Domain(format!("C_r needs r > 1, got {r}")));
    }
    // log-convex in q, so the interior minimum is unique
    let (_, v) = golden_section_min(|q| c_r_objective(r, q), 1.0 + 1e-9, r - 1e-9, 1e-12);
    Ok(v)
}

/// Which branch attains the stopping-time Bregman bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingBranch {
    LogRatio,
    Moment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingBound {
    /// `2e(1 + log(n_eff/b)) / n_eff`.
    pub log_ratio: f64,
    /// `inf_r C_r / n_eff_r`.
    pub moment: f64,
    /// Minimizing order for the moment branch.
    pub best_r: f64,
    /// The search range had to be extended past the default grid.
    pub widened: bool,
    pub value: f64,
    pub branch: StoppingBranch,
}

/// Log-spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn grid_minimum<F: Fn(f64) -> f64>(g: &F, grid: &[f64]) -> (usize, f64) {
    grid.iter()
        .enumerate()
        .map(|(i, &r)| (i, g(r)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// `U_{k,b} = min{2e(1 + log(n_eff/b))/n_eff, inf_{r>1} C_r / n_eff_r}`.
///
/// The infimum over `r` is taken on 65 log-spaced points in `[1.05, 16]`,
/// refined by golden section around the best grid point. If the best point
/// is the right end, the search is extended once to `[16, 256]`.
pub fn bound_bregman_stopping<F>(n_eff: f64, n_eff_r: F, b: f64) -> Result<StoppingBound>
where
    F: Fn(f64) -> f64,
{
    if !(b > 0.0) {
        return Err(Error::Domain(format!("minimum count must be positive, got {b}")));
    }
    if !(n_eff >= b) {
        return Err(Error::Domain(format!("effective size {n_eff} is below the minimum count {b}")));
    }
    let log_ratio = 2.0 * E * (1.0 + (n_eff / b).ln()) / n_eff;
    let g = |r: f64| c_r(r).map_or(f64::INFINITY, |c| c / n_eff_r(r));
    let mut grid = log_grid(1.05, 16.0, 65);
    let mut widened = false;
    let (mut i, _) = grid_minimum(&g, &grid);
    if i == grid.len() - 1 {
        widened = true;
        grid = log_grid(16.0, 256.0, 65);
        i = grid_minimum(&g, &grid).0;
    }
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (best_r, moment) = golden_section_min(g, lo, hi, 1e-10);
    let (value, branch) = if log_ratio <= moment {
        (log_ratio, StoppingBranch::LogRatio)
    } else {
        (moment, StoppingBranch::Moment)
    };
    Ok(StoppingBound {
        log_ratio,
        moment,
        best_r,
        widened,
        value,
        branch,
    })
}

/// Interval for the bias and, for symmetric conjugates, the `ℓ1` risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasBound {
    pub lower: f64,
    pub upper: f64,
    pub l1: Option<f64>,
}

pub fn bound_bias_l1(f: &PsiFamily, u: f64) -> Result<BiasBound> {
    let upper = f.inv_conjugate_plus(u)?;
    let lower = -f.inv_conjugate_minus(u)?;
    Ok(BiasBound {
        lower,
        upper,
        l1: f.is_symmetric().then_some(upper),
    })
}

/// `C_b = 4e(1 + 1/log log b)`.
pub fn c_b(b: f64) -> Result<f64> {
    if !(b >= 3.0) {
        return Err(Error::Domain(format!("C_b needs b >= 3, got {b}")));
    }
    Ok(4.0 * E * (1.0 + 1.0 / b.ln().ln()))
}

/// `C_b (I + 1.25)`.
pub fn bound_fully_adaptive_bregman(b: f64, i_upper: f64) -> Result<f64> {
    if !(i_upper >= 0.0) {
        return Err(Error::Domain("dependence term must be nonnegative".into()));
    }
    Ok(c_b(b)? * (i_upper + 1.25))
}

/// Sub-Gaussian `ℓ2` form `2 C_b σ² (I + 1.25)`.
pub fn bound_fully_adaptive_l2(b: f64, sigma: f64, i_upper: f64) -> Result<f64> {
    Ok(2.0 * sigma * sigma * bound_fully_adaptive_bregman(b, i_upper)?)
}

/// `numerator / eff`, where `eff` is the discounted effective size of order
/// `r / (1 − r)` matching the loss.
pub fn bound_r_quasinorm(r: f64, numerator: f64, eff: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("quasinorm order must lie in (0, 1), got {r}")));
    }
    if !(eff > 0.0) {
        return Err(Error::Domain(format!("effective size must be positive, got {eff}")));
    }
    Ok(numerator / eff)
}

/// Order of the effective size paired with an `r`-quasinorm.
pub fn quasinorm_eff_order(r: f64) -> f64 {
    r / (1.0 - r)
}

/// `N² / (N + (E√N)²)`.
pub fn self_normalizer(n: f64, mean_sqrt: f64) -> f64 {
    n * n / (n + mean_sqrt * mean_sqrt)
}

/// `4σ²(I + log 2 / 2)`.
pub fn bound_self_normalized(sigma: f64, i_upper: f64) -> Result<f64> {
    if !(i_upper >= 0.0) {
        return Err(Error::Domain("dependence term must be nonnegative".into()));
    }
    Ok(4.0 * sigma * sigma * (i_upper + 0.5 * LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// How the estimate is compared with the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Relation {
    /// `lhs − 3se ≤ rhs`.
    AtMost,
    /// `lhs + 3se ≥ rhs`.
    AtLeast,
    /// `|lhs − rhs| ≤ 3se`.
    Equal,
    /// `|lhs − rhs| ≤ rel · |rhs|`.
    Within { rel: f64 },
    /// `lhs ≤ rhs` with no allowance; for exact ratios and shape statistics.
    Below,
    /// `lhs − 3se > rhs`.
    SignificantlyAbove,
    /// Reported but not decided.
    Shape,
}

/// One verified inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: MCEstimate,
    pub rhs: f64,
    pub relation: Relation,
    pub slack: f64,
    /// `slack / stderr`; absent when the stderr is zero.
    pub margin_sigmas: Option<f64>,
    pub verdict: Verdict,
    /// Intermediate quantities (constants, branches, effective sizes).
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: MCEstimate, rhs: f64, relation: Relation) -> Self {
        let se = lhs.stderr;
        let v = lhs.value;
        let ok = match relation {
            Relation::AtMost => Some(v - SIGMAS * se <= rhs),
            Relation::AtLeast => Some(v + SIGMAS * se >= rhs),
            Relation::Equal => Some((v - rhs).abs() <= SIGMAS * se),
            Relation::Within { rel } => Some((v - rhs).abs() <= rel * rhs.abs()),
            Relation::Below => Some(v <= rhs),
            Relation::SignificantlyAbove => Some(v - SIGMAS * se > rhs),
            Relation::Shape => None,
        };
        let slack = rhs - v;
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            relation,
            slack,
            margin_sigmas: (se > 0.0).then(|| slack / se),
            verdict: match ok {
                Some(true) => Verdict::Holds,
                Some(false) => Verdict::Violated,
                None => Verdict::Inconclusive,
            },
            details: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// A failed check that could not produce an estimate.
    pub fn failed(name: impl Into<String>, reason: impl Into<String>) -> Self {
        BoundReport {
            name: name.into(),
            lhs: MCEstimate {
                value: f64::NAN,
                stderr: f64::NAN,
                n_reps: 0,
                n_truncated_excluded: 0,
                n_flagged: 0,
            },
            rhs: f64::NAN,
            relation: Relation::Shape,
            slack: f64::NAN,
            margin_sigmas: None,
            verdict: Verdict::Violated,
            details: BTreeMap::new(),
            notes: vec![reason.into()],
        }
    }
}

/// `lhs − 3se ≤ rhs`.
pub fn check(name: &str, lhs: MCEstimate, rhs: f64) -> BoundReport {
    BoundReport::new(name, lhs, rhs, Relation::AtMost)
}

/// One row of the bound catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogRow {
    pub tails: &'static str,
    pub collection: &'static str,
    pub bound: &'static str,
    pub scenarios: &'static str,
}

pub fn bound_catalog() -> Vec<CatalogRow> {
    vec![
        CatalogRow {
            tails: "finite variance",
            collection: "nonadaptive",
            bound: "E[N_k (mu_hat_k - mu_k)^2] = sigma_k^2",
            scenarios: "prop-minimax",
        },
        CatalogRow {
            tails: "finite 2p-norms",
            collection: "adaptive choosing",
            bound: "E[N_K (mu_hat_K - mu_K)^2] <= |sigma_K|_2^2 + C_p |sigma_K^(2p)|_2p^2 I_q^(1/q)",
            scenarios: "(unit tests only; C_p unknown)",
        },
        CatalogRow {
            tails: "finite 2(p+eps)-norms",
            collection: "fully adaptive",
            bound: "E[N/log N (mu_hat_K - mu_K)^2] <= C_1 |sigma_K|_2^2 + C_p |sigma_K|_2p^2 I_q^(1/q)",
            scenarios: "finite-moment-boundedness, lemma-deviation-polytail",
        },
        CatalogRow {
            tails: "sub-psi",
            collection: "adaptive sampling and stopping",
            bound: "E[D(mu_hat_k, mu_k)] <= min{2e(1 + log(n_eff/b))/n_eff, inf_r C_r/n_eff_r}",
            scenarios: "thm-bregman-stopping, brownian-bias, lemma-deviation-subpsi",
        },
        CatalogRow {
            tails: "sub-psi",
            collection: "fully adaptive",
            bound: "E[N/loglog N D(mu_hat_K, mu_K)] <= C_b (I + 1.25),  C_b = 4e(1 + 1/loglog b)",
            scenarios: "thm-fully-adaptive, lil-sandwich",
        },
        CatalogRow {
            tails: "sub-Gaussian",
            collection: "fully adaptive, tau = T",
            bound: "E[N^2/(N + (E sqrt N)^2) (mu_hat_K - mu_K)^2] <= 4 sigma^2 (I + log 2/2)",
            scenarios: "appendix-g",
        },
    ]
}

/// Plain-text rendering of [`bound_catalog`].
pub fn render_catalog() -> String {
    let rows = bound_catalog();
    let head = ("tails", "data collection", "risk bound", "scenarios");
    let w0 = rows.iter().map(|r| r.tails.len()).max().unwrap_or(0).max(head.0.len());
    let w1 = rows.iter().map(|r| r.collection.len()).max().unwrap_or(0).max(head.1.len());
    let w2 = rows.iter().map(|r| r.bound.len()).max().unwrap_or(0).max(head.2.len());
    let mut out = format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", head.0, head.1, head.2, head.3);
    out.push_str(&format!("{}\n", "-".repeat(w0 + w1 + w2 + 6 + head.3.len())));
    for r in rows {
        out.push_str(&format!("{:<w0$}  {:<w1$}  {:<w2$}  {}\n", r.tails, r.collection, r.bound, r.scenarios));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EffSampleSizes;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn est(value: f64, stderr: f64) -> MCEstimate {
        MCEstimate {
            value,
            stderr,
            n_reps: 100,
            n_truncated_excluded: 0,
            n_flagged: 0,
        }
    }

    /// Dense-grid oracle for C_r: step 1e-5 over (1, r), then a local re-grid.
    fn c_r_grid_oracle(r: f64) -> f64 {
        let f = |q: f64| 2f64.powf(q / r) * r * r / (E * (r - q) * (q - 1.0));
        let mut best = (1.0, f64::INFINITY);
        let n = ((r - 1.0) / 1e-5) as usize;
        for i in 1..n {
            let q = 1.0 + i as f64 * 1e-5;
            let v = f(q);
            if v < best.1 {
                best = (q, v);
            }
        }
        let (mut lo, mut hi) = (best.0 - 1e-5, best.0 + 1e-5);
        for _ in 0..6 {
            let step = (hi - lo) / 1000.0;
            for i in 0..=1000 {
                let q = lo + step * i as f64;
                let v = f(q);
                if v < best.1 {
                    best = (q, v);
                }
            }
            lo = best.0 - step;
            hi = best.0 + step;
        }
        best.1
    }

    #[test]
    fn minimax_examples() {
        assert_eq!(bound_minimax_nonadaptive(1.0).unwrap(), 1.0);
        assert_eq!(bound_minimax_nonadaptive(2.0).unwrap(), 4.0);
        let b = crate::arms::ArmSpec::bernoulli(0.3).unwrap();
        assert_relative_eq!(bound_minimax_nonadaptive(b.sd()).unwrap(), 0.21, epsilon = 1e-15);
        assert!(bound_minimax_nonadaptive(f64::INFINITY).is_err());
    }

    #[test]
    fn finite_moment_nonadaptive_examples() {
        assert_eq!(bound_finite_moment_nonadaptive(&[1.5, 2.0], &[3.0, 3.0], &[1.0, 0.0], 2.0, 7.0, 0.0).unwrap(), 2.25);
        assert_relative_eq!(bound_finite_moment_nonadaptive(&[1.0, 2.0], &[3.0, 3.0], &[0.5, 0.5], 2.0, 7.0, 0.0).unwrap(), 2.5, epsilon = 1e-15);
        assert!(bound_finite_moment_nonadaptive(&[1.0], &[f64::INFINITY], &[1.0], 2.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn fully_adaptive_finite_moment_form() {
        let form = bound_fully_adaptive_finite_moment(&[1.0, 1.0], &[1.0, 1.0], &[0.5, 0.5], 2.0, 1.0).unwrap();
        assert_relative_eq!(form.evaluate(1.0, 1.0), 2.0, epsilon = 1e-15);
        let zero = bound_fully_adaptive_finite_moment(&[1.0, 1.0], &[1.0, 1.0], &[0.5, 0.5], 2.0, 0.0).unwrap();
        assert_eq!(zero.dependence_term, 0.0);
        let more = bound_fully_adaptive_finite_moment(&[1.0, 1.0], &[1.0, 1.0], &[0.5, 0.5], 2.0, 1.5).unwrap();
        assert!(more.evaluate(1.0, 1.0) > form.evaluate(1.0, 1.0));
    }

    #[test]
    fn c_r_matches_grid_oracle() {
        assert!((c_r(2.0).unwrap() - 9.83).abs() < 5e-3);
        assert!(c_r(1.01).unwrap() > 1e3);
        for r in [1.1, 1.5, 2.0, 4.0, 8.0, 16.0] {
            let (a, b) = (c_r(r).unwrap(), c_r_grid_oracle(r));
            assert!((a - b).abs() < 1e-6, "r = {r}: {a} vs {b}");
        }
        assert!(c_r(1.0).is_err());
    }

    #[test]
    fn stopping_bound_examples() {
        let n = 40.0;
        let u = bound_bregman_stopping(n, |_| n, n).unwrap();
        assert_relative_eq!(u.log_ratio, 2.0 * E / n, epsilon = 1e-15);
        // deterministic counts: C_r / n decreases in r, so the widened search wins
        assert_eq!(u.branch, StoppingBranch::Moment);
        assert!(u.widened);
        assert!(u.value < u.log_ratio);

        // Brownian passage times: n_eff = 25, b = 3
        let u = bound_bregman_stopping(25.0, |_| 25.0, 3.0).unwrap();
        assert!((u.log_ratio - 0.6786).abs() < 1e-4);
        assert!(bound_bregman_stopping(2.0, |_| 2.0, 3.0).is_err());
    }

    #[test]
    fn stopping_bound_branches_cross_with_dispersion() {
        let tight = EffSampleSizes::from_counts(vec![50.0; 10]).unwrap();
        let u = bound_bregman_stopping(tight.n_eff(), |r| tight.n_eff_r(r), 10.0).unwrap();
        assert_eq!(u.branch, StoppingBranch::Moment);
        // a rare small count drags high-order effective sizes toward it
        let spread: Vec<f64> = (0..200).map(|i| if i == 0 { 10.0 } else { 1e6 }).collect();
        let wide = EffSampleSizes::from_counts(spread).unwrap();
        let u = bound_bregman_stopping(wide.n_eff(), |r| wide.n_eff_r(r), 10.0).unwrap();
        assert_eq!(u.branch, StoppingBranch::LogRatio, "{u:?}");
    }

    #[test]
    fn bias_bound_examples() {
        let g = PsiFamily::sub_gaussian(1.0).unwrap();
        let b = bound_bias_l1(&g, 0.5).unwrap();
        assert_relative_eq!(b.upper, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.lower, -1.0, epsilon = 1e-12);
        assert_eq!(b.l1, Some(b.upper));
        let z = bound_bias_l1(&g, 0.0).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
        let bern = PsiFamily::bernoulli(0.5).unwrap();
        let target = bern.conjugate(0.25).unwrap();
        assert_relative_eq!(bound_bias_l1(&bern, target).unwrap().upper, 0.25, epsilon = 1e-10);
    }

    #[test]
    fn c_b_examples() {
        assert!((c_b(3.0).unwrap() - 126.48).abs() < 0.01);
        assert!((bound_fully_adaptive_bregman(3.0, 0.0).unwrap() - 158.1).abs() < 0.05);
        assert!((c_b(10.0).unwrap() - 23.91).abs() < 0.01);
        assert!((bound_fully_adaptive_bregman(10.0, 0.0).unwrap() - 29.89).abs() < 0.01);
        assert!(c_b(2.5).is_err());
    }

    #[test]
    fn quasinorm_and_self_normalized_examples() {
        assert_eq!(quasinorm_eff_order(0.5), 1.0);
        assert_eq!(bound_r_quasinorm(0.3, 0.0, 5.0).unwrap(), 0.0);
        assert_eq!(bound_r_quasinorm(0.5, 2.0, 8.0).unwrap(), 0.25);
        assert!(bound_r_quasinorm(1.0, 2.0, 8.0).is_err());
        assert_eq!(self_normalizer(16.0, 4.0), 8.0);
        assert_relative_eq!(bound_self_normalized(1.0, 0.0).unwrap(), 2.0 * LN_2, epsilon = 1e-15);
        assert!(bound_self_normalized(1.0, 0.2).unwrap() > bound_self_normalized(1.0, 0.1).unwrap());
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(check("a", est(0.9, 0.01), 1.0).verdict, Verdict::Holds);
        assert_eq!(check("b", est(1.5, 0.01), 1.0).verdict, Verdict::Violated);
        assert_eq!(check("c", est(0.99, 0.02), 1.0).verdict, Verdict::Holds);
        assert_eq!(BoundReport::new("d", est(1.0, 0.1), 2.0, Relation::Shape).verdict, Verdict::Inconclusive);
        assert_eq!(check("e", est(1.0, 0.0), 2.0).margin_sigmas, None);
    }

    #[test]
    fn catalog_renders_every_row() {
        let text = render_catalog();
        assert_eq!(text.lines().count(), bound_catalog().len() + 2);
    }

    proptest! {
        #[test]
        fn c_b_decreasing(b in 3.0f64..1e6, d in 0.1f64..100.0) {
            prop_assert!(c_b(b + d).unwrap() < c_b(b).unwrap());
        }

        #[test]
        fn bias_bound_sub_gaussian_closed_form(sigma in 0.1f64..5.0, u in 0.0f64..10.0) {
            let b = bound_bias_l1(&PsiFamily::sub_gaussian(sigma).unwrap(), u).unwrap();
            let expect = sigma * (2.0 * u).sqrt();
            prop_assert!((b.upper - expect).abs() <= 1e-9 * expect.max(1.0));
            prop_assert!((b.lower + expect).abs() <= 1e-9 * expect.max(1.0));
        }

        #[test]
        fn bounds_are_pure(n in 10.0f64..1e4, b in 1.0f64..10.0) {
            let a = bound_bregman_stopping(n, |r| n / (1.0 + 0.01 * r), b).unwrap();
            let c = bound_bregman_stopping(n, |r| n / (1.0 + 0.01 * r), b).unwrap();
            prop_assert_eq!(a, c);
        }
    }
}
