//! Experiment configuration: a TOML document with fixed top-level keys
//! `arms`, `sampler`, `stopper`, `chooser`, `rewinder`, `n_reps`,
//! `root_seed`, `t_max`, `psi`, `checks`, plus optional `variants`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arms::{ArmSpec, Family};
use crate::error::{Error, Result};
use crate::policies::{bundle, ChooserSpec, RewinderSpec, SamplerSpec, StopperSpec};
use crate::protocol::PolicyBundle;
use crate::subpsi::PsiFamily;

pub const MIN_REPS: usize = 100;

/// An arm entry: `family`, `params`, and an optional `psi` override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiFamily>,
}

impl ArmConfig {
    pub fn new(family: Family) -> Self {
        ArmConfig { family, psi: None }
    }

    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Self::new(Family::Gaussian { mean, sd })
    }

    pub fn build(&self) -> Result<ArmSpec> {
        let arm = ArmSpec::new(self.family.clone())?;
        Ok(match &self.psi {
            Some(p) => {
                p.validate()?;
                arm.with_psi(Some(p.clone()))
            }
            None => arm,
        })
    }
}

/// Overrides applied on top of the base configuration. Each variant is
/// simulated as its own batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<ArmConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopper: Option<StopperSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chooser: Option<ChooserSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewinder: Option<RewinderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<u64>,
}

/// A named bound check and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    /// `Ê[N_k (μ̂_k − μ_k)²] = σ_k²` at the stopping time.
    MinimaxL2 { arm: usize },
    /// `P(μ̂_k(t) > z_{α/2}) ≥ α` and `Ê N_k(t) = 1 + (t − 1)(1 − α)` at
    /// each listed time.
    Inconsistency { arm: usize, times: Vec<u64>, alpha: f64 },
    /// Chosen-arm consistency at the stopping time: the chosen mean is within
    /// `tolerance` except with probability at most `max_probability`, while
    /// `P(N_arm ≤ 1)` equals `count_probability`.
    ChosenConsistency {
        arm: usize,
        tolerance: f64,
        max_probability: f64,
        count_probability: f64,
    },
    /// Lower and upper sandwich of the normalized risk under the LIL stopper,
    /// one variant per `b`. The undiscounted risk must grow from `from_b` to
    /// `to_b`, and the discounted risk must stay below `2.5 C_{from_b} σ²`.
    LilSandwich {
        arm: usize,
        from_b: u64,
        to_b: u64,
        #[serde(default = "one_percent")]
        max_truncation: f64,
    },
    /// Bias and effective size of a line-crossing random walk, compared with
    /// `1 / intercept`, `intercept²`, and the sub-Gaussian bias bound.
    BrownianBias { arm: usize, rel_tol: f64 },
    /// `P(D(μ̂, μ) ≥ δ) ≤ 2 e^{−δ b}` on a grid of `δ`.
    DeviationSubPsi { arm: usize, deltas: Vec<f64> },
    /// `Ê D(μ̂_k, μ_k) ≤ U_{k,b}` at the stopping time.
    BregmanStopping { arm: usize },
    /// `Ê[Ñ̃_κ (μ̂_κ − μ_κ)²] ≤ 2 C_b σ² (Ĥ(κ) + 1.25)` at the rewound time.
    FullyAdaptive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_entropy: Option<f64>,
    },
    /// r-quasinorm of the sub-Gaussian divergence at the rewound time.
    BregmanQuasinorm { r: f64 },
    /// `Ê[Ñ^E_κ (μ̂_κ − μ_κ)²] ≤ 4σ²(Ĥ(κ) + log 2 / 2)` at the stopping time.
    SelfNormalized,
    /// The log-discounted risk stays within `max_ratio` across the variants
    /// in `discounted`, while the undiscounted risk of arm 0 grows across
    /// `undiscounted`.
    FiniteMomentBoundedness {
        discounted: Vec<String>,
        undiscounted: Vec<String>,
        max_ratio: f64,
    },
    /// `max_δ δ^p P̂(Ñ((μ̂ − μ)/σ)² ≥ δ) / min_δ (…) ≤ max_ratio`.
    DeviationPolytail { arm: usize, p: f64, deltas: Vec<f64>, max_ratio: f64 },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::MinimaxL2 { .. } => "minimax-l2",
            CheckSpec::Inconsistency { .. } => "inconsistency",
            CheckSpec::ChosenConsistency { .. } => "chosen-consistency",
            CheckSpec::LilSandwich { .. } => "lil-sandwich",
            CheckSpec::BrownianBias { .. } => "brownian-bias",
            CheckSpec::DeviationSubPsi { .. } => "deviation-sub-psi",
            CheckSpec::BregmanStopping { .. } => "bregman-stopping",
            CheckSpec::FullyAdaptive { .. } => "fully-adaptive",
            CheckSpec::BregmanQuasinorm { .. } => "bregman-quasinorm",
            CheckSpec::SelfNormalized => "self-normalized",
            CheckSpec::FiniteMomentBoundedness { .. } => "finite-moment-boundedness",
            CheckSpec::DeviationPolytail { .. } => "deviation-polytail",
        }
    }

    /// Times at which per-episode snapshots are needed.
    pub fn snapshot_times(&self) -> &[u64] {
        match self {
            CheckSpec::Inconsistency { times, .. } => times,
            _ => &[],
        }
    }

    fn needs_psi(&self) -> bool {
        matches!(
            self,
            CheckSpec::DeviationSubPsi { .. } | CheckSpec::BregmanStopping { .. }
        )
    }

    fn arm(&self) -> Option<usize> {
        match self {
            CheckSpec::MinimaxL2 { arm }
            | CheckSpec::Inconsistency { arm, .. }
            | CheckSpec::ChosenConsistency { arm, .. }
            | CheckSpec::LilSandwich { arm, .. }
            | CheckSpec::BrownianBias { arm, .. }
            | CheckSpec::DeviationSubPsi { arm, .. }
            | CheckSpec::BregmanStopping { arm }
            | CheckSpec::DeviationPolytail { arm, .. } => Some(*arm),
            _ => None,
        }
    }
}

fn one_percent() -> f64 {
    0.01
}

fn default_warmup() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub arms: Vec<ArmConfig>,
    pub sampler: SamplerSpec,
    pub stopper: StopperSpec,
    pub chooser: ChooserSpec,
    #[serde(default = "no_rewind")]
    pub rewinder: RewinderSpec,
    pub n_reps: usize,
    pub root_seed: u64,
    pub t_max: u64,
    /// Per-arm count reached by round robin before the rules start.
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    /// Keep episodes that hit `t_max`, evaluated at the cap. The capped time
    /// is itself a stopping time, so every stopping-time bound still applies.
    #[serde(default)]
    pub include_truncated: bool,
    /// Sub-ψ family applied to every arm lacking its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiFamily>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn no_rewind() -> RewinderSpec {
    RewinderSpec::None
}

/// One fully resolved batch to simulate.
#[derive(Clone)]
pub struct ResolvedVariant {
    pub label: String,
    pub arms: Vec<ArmSpec>,
    pub psis: Vec<PsiFamily>,
    pub stopper: StopperSpec,
    pub chooser: ChooserSpec,
    pub warmup: u64,
    pub bundle: PolicyBundle,
}

impl std::fmt::Debug for ResolvedVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolvedVariant")
            .field("label", &self.label)
            .field("arms", &self.arms)
            .field("stopper", &self.stopper)
            .field("chooser", &self.chooser)
            .field("warmup", &self.warmup)
            .finish_non_exhaustive()
    }
}

impl ResolvedVariant {
    /// Count of `arm` guaranteed at every stopping time of this variant.
    pub fn guaranteed_count(&self, arm: usize) -> u64 {
        let from_rule = match self.stopper {
            StopperSpec::Fixed { t } if self.arms.len() == 1 => t,
            StopperSpec::Lil { arm: a, b, .. } if a == arm => b,
            _ => 0,
        };
        from_rule.max(self.warmup)
    }

    /// Guaranteed count in exposure units.
    pub fn guaranteed_exposure(&self, arm: usize) -> f64 {
        self.guaranteed_count(arm) as f64 * self.bundle.clock_step
    }
}

/// `line L, column C (<source line>)` for a byte offset into `text`.
fn locate(text: &str, offset: usize) -> String {
    let offset = offset.min(text.len());
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[offset..].find('\n').map_or(text.len(), |i| offset + i);
    let line = text[..offset].matches('\n').count() + 1;
    let column = text[line_start..offset].chars().count() + 1;
    format!("line {line}, column {column} ({})", text[line_start..line_end].trim())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let path = e.span().map_or_else(|| "<document>".to_string(), |s| locate(text, s.start));
            Error::config(path, e.message().to_string())
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// Resolve every variant (or the base alone) and validate all checks.
    /// Nothing is simulated before this succeeds.
    pub fn resolve(&self) -> Result<Vec<ResolvedVariant>> {
        if self.n_reps < MIN_REPS {
            return Err(Error::config("n_reps", format!("must be at least {MIN_REPS}, got {}", self.n_reps)));
        }
        if let Some(p) = &self.psi {
            p.validate().map_err(|e| Error::config("psi", e.to_string()))?;
        }
        let base = Variant {
            label: "base".into(),
            ..Variant::default()
        };
        let variants: Vec<&Variant> = if self.variants.is_empty() { vec![&base] } else { self.variants.iter().collect() };
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(variants.len());
        for (i, v) in variants.iter().enumerate() {
            let path = if self.variants.is_empty() { String::new() } else { format!("variants[{i}].") };
            if !seen.insert(v.label.clone()) {
                return Err(Error::config(format!("{path}label"), format!("duplicate label `{}`", v.label)));
            }
            out.push(self.resolve_one(v, &path)?);
        }
        for (i, c) in self.checks.iter().enumerate() {
            self.validate_check(c, &out).map_err(|e| match e {
                Error::Config { path, message } => Error::config(format!("checks[{i}].{path}"), message),
                other => Error::config(format!("checks[{i}]"), other.to_string()),
            })?;
        }
        Ok(out)
    }

    fn resolve_one(&self, v: &Variant, path: &str) -> Result<ResolvedVariant> {
        let arm_cfgs = v.arms.as_ref().unwrap_or(&self.arms);
        if arm_cfgs.is_empty() {
            return Err(Error::config(format!("{path}arms"), "at least one arm is required"));
        }
        let arms = arm_cfgs
            .iter()
            .enumerate()
            .map(|(k, a)| a.build().map_err(|e| Error::config(format!("{path}arms[{k}]"), e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let psis: Vec<PsiFamily> = arms.iter().filter_map(|a| a.psi().or(self.psi.as_ref()).cloned()).collect();
        let psis = if psis.len() == arms.len() { psis } else { Vec::new() };
        let sampler = v.sampler.as_ref().unwrap_or(&self.sampler);
        let stopper = v.stopper.as_ref().unwrap_or(&self.stopper);
        let chooser = v.chooser.as_ref().unwrap_or(&self.chooser);
        let rewinder = v.rewinder.as_ref().unwrap_or(&self.rewinder);
        let t_max = v.t_max.unwrap_or(self.t_max);
        let warmup = v.warmup.unwrap_or(self.warmup);
        let clock_step = stopper.clock_step().unwrap_or(1.0);
        let relabel = |e: Error| match e {
            Error::Config { path: p, message } => Error::config(format!("{path}{p}"), message),
            other => Error::config(path.trim_end_matches('.').to_string(), other.to_string()),
        };
        let b = bundle(sampler, stopper, chooser, rewinder, warmup, t_max, clock_step).map_err(relabel)?;
        b.validate(arms.len()).map_err(relabel)?;
        Ok(ResolvedVariant {
            label: v.label.clone(),
            arms,
            psis,
            stopper: stopper.clone(),
            chooser: chooser.clone(),
            warmup,
            bundle: b,
        })
    }

    fn validate_check(&self, c: &CheckSpec, variants: &[ResolvedVariant]) -> Result<()> {
        for v in variants {
            if let Some(arm) = c.arm() {
                if arm >= v.arms.len() {
                    return Err(Error::config("arm", format!("arm {arm} out of range in variant `{}`", v.label)));
                }
            }
            if c.needs_psi() && v.psis.is_empty() {
                return Err(Error::config("psi", format!("check `{}` needs a sub-psi family for every arm", c.name())));
            }
        }
        let positive = |x: f64, field: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field.to_string(), "must be positive"))
            }
        };
        match c {
            CheckSpec::Inconsistency { times, alpha, .. } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::config("alpha", "must lie in (0, 1)"));
                }
                if times.is_empty() {
                    return Err(Error::config("times", "must not be empty"));
                }
                for v in variants {
                    let limit = match v.stopper {
                        StopperSpec::Fixed { t } => t,
                        _ => return Err(Error::config("times", "snapshots need a fixed-horizon stopper")),
                    };
                    if let Some(t) = times.iter().find(|&&t| t < 2 || t > limit) {
                        return Err(Error::config("times", format!("time {t} outside [2, {limit}]")));
                    }
                }
            }
            CheckSpec::ChosenConsistency { tolerance, max_probability, count_probability, .. } => {
                positive(*tolerance, "tolerance")?;
                positive(*max_probability, "max_probability")?;
                positive(*count_probability, "count_probability")?;
            }
            CheckSpec::LilSandwich { arm, from_b, to_b, .. } => {
                for b in [from_b, to_b] {
                    if !variants.iter().any(|v| matches!(v.stopper, StopperSpec::Lil { b: vb, .. } if vb == *b)) {
                        return Err(Error::config("from_b", format!("no variant with b = {b}")));
                    }
                }
                for v in variants {
                    match v.stopper {
                        StopperSpec::Lil { arm: a, .. } if a == *arm => {}
                        _ => return Err(Error::config("kind", format!("variant `{}` does not use a LIL stopper on arm {arm}", v.label))),
                    }
                }
            }
            CheckSpec::BrownianBias { arm, rel_tol } => {
                positive(*rel_tol, "rel_tol")?;
                for v in variants {
                    match v.stopper {
                        StopperSpec::LineCrossing { arm: a, intercept, .. } if a == *arm && intercept > 0.0 => {}
                        _ => return Err(Error::config("kind", format!("variant `{}` needs a line-crossing stopper with positive intercept on arm {arm}", v.label))),
                    }
                }
            }
            CheckSpec::DeviationSubPsi { deltas, .. } | CheckSpec::DeviationPolytail { deltas, .. } => {
                if deltas.is_empty() || deltas.windows(2).any(|w| w[0] >= w[1]) || deltas[0] < 0.0 {
                    return Err(Error::config("deltas", "must be a nonempty increasing nonnegative grid"));
                }
                if let CheckSpec::DeviationPolytail { arm, p, max_ratio, .. } = c {
                    positive(*max_ratio, "max_ratio")?;
                    if !(*p > 1.0) {
                        return Err(Error::config("p", "must exceed 1"));
                    }
                    for v in variants {
                        if v.guaranteed_count(*arm) < 3 {
                            return Err(Error::config("arm", format!("variant `{}` does not guarantee 3 draws of arm {arm}", v.label)));
                        }
                    }
                }
            }
            CheckSpec::BregmanStopping { arm } => {
                for v in variants {
                    if v.guaranteed_count(*arm) == 0 {
                        return Err(Error::config("arm", format!("variant `{}` does not guarantee a draw of arm {arm}", v.label)));
                    }
                }
            }
            CheckSpec::FullyAdaptive { .. } | CheckSpec::BregmanQuasinorm { .. } => {
                for v in variants {
                    if v.warmup < 3 {
                        return Err(Error::config("warmup", format!("variant `{}` needs warmup >= 3 so that log log b > 0", v.label)));
                    }
                }
                if let CheckSpec::BregmanQuasinorm { r } = c {
                    if !(*r > 0.0 && *r < 1.0) {
                        return Err(Error::config("r", "must lie in (0, 1)"));
                    }
                }
            }
            CheckSpec::FiniteMomentBoundedness { discounted, undiscounted, max_ratio } => {
                positive(*max_ratio, "max_ratio")?;
                if discounted.len() < 2 || undiscounted.len() < 2 {
                    return Err(Error::config("discounted", "both variant lists need at least two labels"));
                }
                for l in discounted.iter().chain(undiscounted) {
                    let v = variants
                        .iter()
                        .find(|v| &v.label == l)
                        .ok_or_else(|| Error::config("discounted", format!("unknown variant `{l}`")))?;
                    if v.warmup < 2 && v.guaranteed_count(0) < 2 {
                        return Err(Error::config("discounted", format!("variant `{l}` needs at least 2 draws per arm")));
                    }
                }
            }
            CheckSpec::MinimaxL2 { .. } | CheckSpec::SelfNormalized => {}
        }
        Ok(())
    }

    /// Union of snapshot times requested by the checks, sorted.
    pub fn snapshot_times(&self) -> Vec<u64> {
        let mut t: Vec<u64> = self.checks.iter().flat_map(|c| c.snapshot_times().iter().copied()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
n_reps = 200
root_seed = 7
t_max = 100

[[arms]]
family = "gaussian"
params = { mean = 0.0, sd = 1.0 }

[[arms]]
family = "bernoulli"
params = { p = 0.3 }
psi = { kind = "sub-gaussian", sigma = 0.5 }

[sampler]
kind = "uniform"

[stopper]
kind = "fixed"
t = 20

[chooser]
kind = "fixed"
arm = 0

[[checks]]
kind = "minimax-l2"
arm = 0
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.arms.len(), 2);
        assert_eq!(cfg.arms[1].psi, Some(PsiFamily::sub_gaussian(0.5).unwrap()));
        assert_eq!(cfg.rewinder, RewinderSpec::None);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
        let v = cfg.resolve().unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].psis.len(), 2);
    }

    #[test]
    fn too_few_reps_is_a_config_error() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.n_reps = 1;
        match cfg.resolve() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "n_reps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = SAMPLE.replace("p = 0.3", "p = 1.3");
        match ExperimentConfig::from_toml_str(&bad).unwrap().resolve() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "arms[1]"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("arm = 0\n\"#", "arm = 5\n\"#").replace("kind = \"minimax-l2\"\narm = 0", "kind = \"minimax-l2\"\narm = 5");
        match ExperimentConfig::from_toml_str(&bad).unwrap().resolve() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "checks[0].arm"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ExperimentConfig::from_toml_str("n_reps = \"x\""), Err(Error::Config { .. })));
    }

    #[test]
    fn bregman_checks_need_psi() {
        let text = SAMPLE.replace("psi = { kind = \"sub-gaussian\", sigma = 0.5 }\n", "").replace("family = \"bernoulli\"\nparams = { p = 0.3 }", "family = \"student-t\"\nparams = { df = 5.0 }");
        let mut cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        cfg.checks = vec![CheckSpec::BregmanStopping { arm: 0 }];
        match cfg.resolve() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "checks[0].psi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variants_override_and_guarantee_counts() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.arms.truncate(1);
        cfg.variants = vec![
            Variant {
                label: "b3".into(),
                stopper: Some(StopperSpec::Lil { arm: 0, b: 3, mean: None, sd: None }),
                ..Variant::default()
            },
            Variant {
                label: "fixed".into(),
                ..Variant::default()
            },
        ];
        let v = cfg.resolve().unwrap();
        assert_eq!(v[0].guaranteed_count(0), 3);
        assert_eq!(v[1].guaranteed_count(0), 20);
        cfg.variants[1].label = "b3".into();
        assert!(cfg.resolve().is_err());
    }
}
