//! CGF-like functions, their convex conjugates, Bregman losses, and the
//! inverse branches of the conjugate.
//!
//! Closed forms are used where they exist. Everything else goes through a
//! one-dimensional Legendre transform, which also serves as the reference
//! against which the closed forms are tested.

use serde::{Deserialize, Serialize};

use crate::arms::sigmoid;
use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, golden_section_max, golden_section_min};

/// Log-partition function `B` of a one-parameter natural exponential family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogPartition {
    /// `B(θ) = θ²/2`: unit-variance normal with mean `θ`.
    Gaussian,
    /// `B(θ) = log(1 + e^θ)`: Bernoulli with success probability `sigmoid(θ)`.
    Bernoulli,
    /// `B(θ) = log Σ w_i e^{θ x_i}`: tilts of a finite reference measure.
    Discrete { support: Vec<f64>, weights: Vec<f64> },
}

impl LogPartition {
    pub fn validate(&self) -> Result<()> {
        if let LogPartition::Discrete { support, weights } = self {
            if support.len() != weights.len() || support.len() < 2 {
                return Err(Error::config(
                    "params.partition",
                    "discrete partition needs matching support and weights of length >= 2",
                ));
            }
            if support.iter().any(|x| !x.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::config(
                    "params.partition",
                    "support must be finite and weights positive",
                ));
            }
            let (lo, hi) = self.mean_range();
            if lo >= hi {
                return Err(Error::config("params.partition", "support needs two distinct points"));
            }
        }
        Ok(())
    }

    pub fn value(&self, theta: f64) -> f64 {
        match self {
            LogPartition::Gaussian => 0.5 * theta * theta,
            LogPartition::Bernoulli => theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
            LogPartition::Discrete { support, weights } => {
                let m = support
                    .iter()
                    .zip(weights)
                    .map(|(x, w)| theta * x + w.ln())
                    .fold(f64::NEG_INFINITY, f64::max);
                m + support
                    .iter()
                    .zip(weights)
                    .map(|(x, w)| (theta * x + w.ln() - m).exp())
                    .sum::<f64>()
                    .ln()
            }
        }
    }

    /// Mean parameter `B'(θ)`.
    pub fn first(&self, theta: f64) -> f64 {
        match self {
            LogPartition::Gaussian => theta,
            LogPartition::Bernoulli => sigmoid(theta),
            LogPartition::Discrete { support, .. } => {
                self.probabilities(theta).iter().zip(support).map(|(p, x)| p * x).sum()
            }
        }
    }

    /// Variance `B''(θ)`.
    pub fn second(&self, theta: f64) -> f64 {
        match self {
            LogPartition::Gaussian => 1.0,
            LogPartition::Bernoulli => {
                let s = sigmoid(theta);
                s * (1.0 - s)
            }
            LogPartition::Discrete { support, .. } => {
                let m = self.first(theta);
                self.probabilities(theta).iter().zip(support).map(|(p, x)| p * (x - m) * (x - m)).sum()
            }
        }
    }

    /// Tilted point masses for the discrete partition; empty otherwise.
    pub fn probabilities(&self, theta: f64) -> Vec<f64> {
        match self {
            LogPartition::Discrete { support, weights } => {
                let b = self.value(theta);
                support.iter().zip(weights).map(|(x, w)| (theta * x + w.ln() - b).exp()).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Open range of the mean parameter.
    pub fn mean_range(&self) -> (f64, f64) {
        match self {
            LogPartition::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            LogPartition::Bernoulli => (0.0, 1.0),
            LogPartition::Discrete { support, .. } => (
                support.iter().copied().fold(f64::INFINITY, f64::min),
                support.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    /// Natural parameter with `B'(θ) = mu`, found by bisection.
    pub fn theta_of_mean(&self, mu: f64) -> Result<f64> {
        let (lo, hi) = self.mean_range();
        if !(mu > lo && mu < hi) {
            return Err(Error::Domain(format!("mean {mu} outside the open range ({lo}, {hi})")));
        }
        let mut a = -1.0;
        let mut b = 1.0;
        while self.first(a) > mu {
            a *= 2.0;
            if a < -1e12 {
                return Err(Error::Domain(format!("mean {mu} too close to the range edge")));
            }
        }
        while self.first(b) < mu {
            b *= 2.0;
            if b > 1e12 {
                return Err(Error::Domain(format!("mean {mu} too close to the range edge")));
            }
        }
        Ok(bisect_increasing(|t| self.first(t) - mu, a, b, 1e-16))
    }
}

/// A CGF-like function `ψ` on an open interval around zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiFamily {
    /// `σ²λ²/2` on the whole line.
    SubGaussian { sigma: f64 },
    /// `ν²λ²/2` on `|λ| < 1/α`.
    SubExponential { nu: f64, alpha: f64 },
    /// `σ²λ²/(2(1 − b|λ|))` on `|λ| < 1/b`.
    Bernstein { sigma: f64, b: f64 },
    /// Centered Bernoulli CGF `log(1 − μ + μe^λ) − λμ`.
    Bernoulli { mu: f64 },
    /// Centered exponential-family CGF `B(λ+θ) − B(θ) − λB'(θ)`.
    ExpFamily { partition: LogPartition, theta: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("psi.{name}"), format!("must be finite and positive, got {v}")))
    }
}

impl PsiFamily {
    pub fn sub_gaussian(sigma: f64) -> Result<Self> {
        let f = PsiFamily::SubGaussian { sigma };
        f.validate()?;
        Ok(f)
    }

    pub fn sub_exponential(nu: f64, alpha: f64) -> Result<Self> {
        let f = PsiFamily::SubExponential { nu, alpha };
        f.validate()?;
        Ok(f)
    }

    pub fn bernstein(sigma: f64, b: f64) -> Result<Self> {
        let f = PsiFamily::Bernstein { sigma, b };
        f.validate()?;
        Ok(f)
    }

    pub fn bernoulli(mu: f64) -> Result<Self> {
        let f = PsiFamily::Bernoulli { mu };
        f.validate()?;
        Ok(f)
    }

    pub fn exp_family(partition: LogPartition, theta: f64) -> Result<Self> {
        let f = PsiFamily::ExpFamily { partition, theta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsiFamily::SubGaussian { sigma } => positive("sigma", *sigma),
            PsiFamily::SubExponential { nu, alpha } => positive("nu", *nu).and(positive("alpha", *alpha)),
            PsiFamily::Bernstein { sigma, b } => positive("sigma", *sigma).and(positive("b", *b)),
            PsiFamily::Bernoulli { mu } => {
                if *mu > 0.0 && *mu < 1.0 {
                    Ok(())
                } else {
                    Err(Error::config("psi.mu", format!("must lie in (0, 1), got {mu}")))
                }
            }
            PsiFamily::ExpFamily { partition, theta } => {
                partition.validate()?;
                if theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("psi.theta", "must be finite"))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PsiFamily::SubGaussian { .. } => "sub-gaussian",
            PsiFamily::SubExponential { .. } => "sub-exponential",
            PsiFamily::Bernstein { .. } => "bernstein",
            PsiFamily::Bernoulli { .. } => "bernoulli",
            PsiFamily::ExpFamily { .. } => "exp-family",
        }
    }

    /// Open domain `(λ_min, λ_max)`.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            PsiFamily::SubExponential { alpha, .. } => (-1.0 / alpha, 1.0 / alpha),
            PsiFamily::Bernstein { b, .. } => (-1.0 / b, 1.0 / b),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Whether `ψ*(z) = ψ*(−z)` for all `z`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            PsiFamily::SubGaussian { .. } | PsiFamily::SubExponential { .. } | PsiFamily::Bernstein { .. } => true,
            PsiFamily::Bernoulli { mu } => *mu == 0.5,
            PsiFamily::ExpFamily { partition, theta } => {
                matches!(partition, LogPartition::Gaussian) || (matches!(partition, LogPartition::Bernoulli) && *theta == 0.0)
            }
        }
    }

    fn in_domain(&self, lambda: f64) -> bool {
        let (lo, hi) = self.domain();
        lambda > lo && lambda < hi
    }

    /// The defining formula, also evaluated at a finite domain edge to get
    /// the one-sided limit.
    fn psi_formula(&self, lambda: f64) -> f64 {
        match self {
            PsiFamily::SubGaussian { sigma } => 0.5 * sigma * sigma * lambda * lambda,
            PsiFamily::SubExponential { nu, .. } => 0.5 * nu * nu * lambda * lambda,
            PsiFamily::Bernstein { sigma, b } => {
                let d = 1.0 - b * lambda.abs();
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    0.5 * sigma * sigma * lambda * lambda / d
                }
            }
            PsiFamily::Bernoulli { mu } => {
                // log(1 − μ + μe^λ) rewritten to avoid overflow for large |λ|
                let log_mgf = if lambda > 0.0 {
                    lambda + (mu + (1.0 - mu) * (-lambda).exp()).ln()
                } else {
                    (mu * lambda.exp_m1()).ln_1p()
                };
                log_mgf - lambda * mu
            }
            PsiFamily::ExpFamily { partition, theta } => {
                partition.value(lambda + theta) - partition.value(*theta) - lambda * partition.first(*theta)
            }
        }
    }

    /// `ψ(λ)`; `+∞` outside the domain.
    pub fn psi(&self, lambda: f64) -> f64 {
        if self.in_domain(lambda) {
            self.psi_formula(lambda)
        } else {
            f64::INFINITY
        }
    }

    pub fn psi_prime(&self, lambda: f64) -> f64 {
        match self {
            PsiFamily::SubGaussian { sigma } => sigma * sigma * lambda,
            PsiFamily::SubExponential { nu, .. } => nu * nu * lambda,
            PsiFamily::Bernstein { sigma, b } => {
                let u = 1.0 - b * lambda.abs();
                lambda.signum() * sigma * sigma / (2.0 * b) * (1.0 / (u * u) - 1.0)
            }
            PsiFamily::Bernoulli { mu } => tilted_bernoulli(*mu, lambda) - mu,
            PsiFamily::ExpFamily { partition, theta } => partition.first(lambda + theta) - partition.first(*theta),
        }
    }

    pub fn psi_double_prime(&self, lambda: f64) -> f64 {
        match self {
            PsiFamily::SubGaussian { sigma } => sigma * sigma,
            PsiFamily::SubExponential { nu, .. } => nu * nu,
            PsiFamily::Bernstein { sigma, b } => sigma * sigma / (1.0 - b * lambda.abs()).powi(3),
            PsiFamily::Bernoulli { mu } => {
                let p = tilted_bernoulli(*mu, lambda);
                p * (1.0 - p)
            }
            PsiFamily::ExpFamily { partition, theta } => partition.second(lambda + theta),
        }
    }

    /// Closure of the conjugate domain `(inf ψ', sup ψ')` on the mean scale;
    /// `ψ*` is `+∞` strictly outside it.
    pub fn conjugate_support(&self) -> (f64, f64) {
        match self {
            PsiFamily::Bernoulli { mu } => (-mu, 1.0 - mu),
            PsiFamily::ExpFamily { partition, theta } => {
                let m = partition.first(*theta);
                let (lo, hi) = partition.mean_range();
                (lo - m, hi - m)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Closed-form conjugate, when one is implemented.
    pub fn closed_conjugate(&self, z: f64) -> Option<Result<f64>> {
        let value = match self {
            PsiFamily::SubGaussian { sigma } => z * z / (2.0 * sigma * sigma),
            PsiFamily::SubExponential { nu, alpha } => {
                let a = z.abs();
                if a <= nu * nu / alpha {
                    z * z / (2.0 * nu * nu)
                } else {
                    a / alpha - nu * nu / (2.0 * alpha * alpha)
                }
            }
            PsiFamily::Bernstein { sigma, b } => {
                let s2 = sigma * sigma;
                let u = b * z.abs() / s2;
                // 1 + u − √(1+2u), written without cancellation
                s2 / (b * b) * u * u / (1.0 + u + (1.0 + 2.0 * u).sqrt())
            }
            PsiFamily::Bernoulli { mu } => {
                let target = mu + z;
                if !(-1e-15..=1.0 + 1e-15).contains(&target) {
                    return Some(Err(Error::InfiniteConjugate { z }));
                }
                bernoulli_kl(target.clamp(0.0, 1.0), *mu)
            }
            PsiFamily::ExpFamily { .. } => return None,
        };
        Some(Ok(value))
    }

    /// `ψ*(z) = sup_λ λz − ψ(λ)`.
    pub fn conjugate(&self, z: f64) -> Result<f64> {
        if z.is_nan() {
            return Err(Error::Domain("conjugate of NaN".into()));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        match self.closed_conjugate(z) {
            Some(r) => r,
            None => self.legendre(z),
        }
    }

    /// Conjugate by numerical maximization of the concave map `λ ↦ λz − ψ(λ)`.
    pub fn legendre(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Ok(0.0);
        }
        if !z.is_finite() {
            return Err(Error::InfiniteConjugate { z });
        }
        // search along the half-line where the maximizer lives
        let s = z.signum();
        let a = z.abs();
        let (lmin, lmax) = self.domain();
        let edge = if s > 0.0 { lmax } else { -lmin };
        let objective = |t: f64| t * a - self.psi_formula(s * t);
        let slope = |t: f64| a - s * self.psi_prime(s * t);

        let hi = if edge.is_finite() {
            let inner = edge * (1.0 - 1e-12);
            if slope(inner) > 0.0 {
                // the supremum is the one-sided limit at the open edge
                let limit = edge * a - self.psi_formula(s * edge);
                return if limit.is_finite() {
                    Ok(limit.max(0.0))
                } else {
                    Err(Error::InfiniteConjugate { z })
                };
            }
            let mut hi = inner.min(1.0);
            while slope(hi) > 0.0 {
                hi = (2.0 * hi).min(inner);
            }
            hi
        } else {
            let mut hi = 1.0;
            while slope(hi) > 0.0 {
                hi *= 2.0;
                if hi > 1e15 {
                    return Err(Error::InfiniteConjugate { z });
                }
            }
            hi
        };
        let (_, value) = golden_section_max(objective, 0.0, hi, 1e-12);
        Ok(value.max(0.0))
    }

    /// Bregman loss `D(μ̂, μ)`, equal to `ψ*(μ̂ − μ)` for a centered CGF.
    pub fn bregman(&self, mu_hat: f64, mu: f64) -> Result<f64> {
        self.conjugate(mu_hat - mu)
    }

    fn inverse_branch(&self, level: f64, sign: f64) -> Result<f64> {
        if !(level >= 0.0) {
            return Err(Error::Domain(format!("inverse conjugate needs a nonnegative level, got {level}")));
        }
        if level == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi_edge) = self.conjugate_support();
        let edge = if sign > 0.0 { hi_edge } else { -lo };
        let g = |x: f64| self.conjugate(sign * x);
        let hi = if edge.is_finite() {
            let sup = g(edge).or_else(|_| g(edge * (1.0 - 1e-12)))?;
            if level > sup {
                return Err(Error::Range { value: level, supremum: sup });
            }
            if level == sup {
                return Ok(edge);
            }
            edge
        } else {
            let mut hi = 1.0;
            while g(hi)? < level {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::Range { value: level, supremum: f64::INFINITY });
                }
            }
            hi
        };
        // the branch is continuous and increasing, so errors cannot occur inside [0, hi]
        Ok(bisect_increasing(|x| g(x).unwrap_or(f64::INFINITY) - level, 0.0, hi, 1e-15))
    }

    /// The `z ≥ 0` with `ψ*(z) = level`.
    pub fn inv_conjugate_plus(&self, level: f64) -> Result<f64> {
        self.inverse_branch(level, 1.0)
    }

    /// The `z ≥ 0` with `ψ*(−z) = level`.
    pub fn inv_conjugate_minus(&self, level: f64) -> Result<f64> {
        self.inverse_branch(level, -1.0)
    }
}

fn tilted_bernoulli(mu: f64, lambda: f64) -> f64 {
    // μe^λ / (1 − μ + μe^λ)
    sigmoid(lambda + mu.ln() - (1.0 - mu).ln())
}

fn xlogx_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// `KL(Ber(p) ‖ Ber(q))`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    xlogx_over(p, q) + xlogx_over(1.0 - p, 1.0 - q)
}

/// KL loss `KL(p_{θ1} ‖ p_{θ0})` between two members of a natural exponential
/// family, parameterized by their means. The natural parameters are
/// recovered by bisection on `B'`.
pub fn kl_loss_expfamily(partition: &LogPartition, mu1: f64, mu0: f64) -> Result<f64> {
    let t1 = partition.theta_of_mean(mu1)?;
    let t0 = partition.theta_of_mean(mu0)?;
    Ok((partition.first(t1) * (t1 - t0) - partition.value(t1) + partition.value(t0)).max(0.0))
}

/// Lower bound `z²/(2(σ² + b|z|))` on the Bernstein conjugate.
pub fn bernstein_lower_bound(sigma: f64, b: f64, z: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    positive("b", b)?;
    Ok(z * z / (2.0 * (sigma * sigma + b * z.abs())))
}

/// Piecewise lower bound on the sub-exponential conjugate: quadratic inside
/// `|z| ≤ ν²/α`, then `|z|/(2α)`. Below the exact conjugate on the outer branch.
pub fn sub_exponential_lower_bound(nu: f64, alpha: f64, z: f64) -> Result<f64> {
    positive("nu", nu)?;
    positive("alpha", alpha)?;
    Ok(if z.abs() <= nu * nu / alpha {
        z * z / (2.0 * nu * nu)
    } else {
        z.abs() / (2.0 * alpha)
    })
}

/// Brute-force conjugate: best of a uniform `λ` grid, re-gridded around the
/// winner a few times. Independent of the golden-section route.
pub fn numeric_conjugate_oracle(f: &PsiFamily, z: f64, grid_n: usize) -> f64 {
    let grid_n = grid_n.max(1000);
    let (lmin, lmax) = f.domain();
    let cap = 60.0;
    let shrink = |x: f64| if x.is_finite() { x * (1.0 - 1e-13) } else { x };
    let mut lo = shrink(lmin).max(-cap);
    let mut hi = shrink(lmax).min(cap);
    let (outer_lo, outer_hi) = (lo, hi);
    let mut best = 0.0f64;
    for _ in 0..12 {
        let step = (hi - lo) / (grid_n - 1) as f64;
        let mut arg = lo;
        for i in 0..grid_n {
            let l = lo + step * i as f64;
            let v = l * z - f.psi(l);
            if v > best || i == 0 && v >= best {
                best = v;
                arg = l;
            }
        }
        lo = (arg - 2.0 * step).max(outer_lo);
        hi = (arg + 2.0 * step).min(outer_hi);
    }
    best
}

/// `ψ**(λ)` by a second numerical transform over the conjugate support.
pub fn double_conjugate(f: &PsiFamily, lambda: f64) -> f64 {
    let (zlo, zhi) = f.conjugate_support();
    let width = 40.0 * (f.psi_double_prime(0.0).sqrt() + lambda.abs() * f.psi_double_prime(lambda));
    let lo = if zlo.is_finite() { zlo } else { -width.max(1.0) };
    let hi = if zhi.is_finite() { zhi } else { width.max(1.0) };
    let (_, v) = golden_section_min(|z| f.conjugate(z).unwrap_or(f64::INFINITY) - lambda * z, lo, hi, 1e-13);
    -v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn families() -> Vec<PsiFamily> {
        vec![
            PsiFamily::sub_gaussian(1.3).unwrap(),
            PsiFamily::sub_exponential(1.0, 1.0).unwrap(),
            PsiFamily::sub_exponential(0.7, 0.4).unwrap(),
            PsiFamily::bernstein(1.0, 0.5).unwrap(),
            PsiFamily::bernoulli(0.3).unwrap(),
            PsiFamily::bernoulli(0.5).unwrap(),
            PsiFamily::exp_family(LogPartition::Gaussian, 0.4).unwrap(),
            PsiFamily::exp_family(LogPartition::Bernoulli, -0.8).unwrap(),
            PsiFamily::exp_family(
                LogPartition::Discrete {
                    support: vec![-1.0, 0.0, 2.0],
                    weights: vec![1.0, 1.0, 0.5],
                },
                0.1,
            )
            .unwrap(),
        ]
    }

    fn interior_grid(f: &PsiFamily) -> Vec<f64> {
        let (lo, hi) = f.domain();
        let lo = lo.max(-3.0) * 0.95;
        let hi = hi.min(3.0) * 0.95;
        (1..=100).map(|i| lo + (hi - lo) * i as f64 / 101.0).collect()
    }

    fn z_grid(f: &PsiFamily) -> Vec<f64> {
        let (lo, hi) = f.conjugate_support();
        let lo = lo.max(-3.0) * 0.97;
        let hi = hi.min(3.0) * 0.97;
        (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect()
    }

    #[test]
    fn psi_vanishes_to_first_order_at_zero() {
        for f in families() {
            assert!(f.psi(0.0).abs() < 1e-10, "{}", f.name());
            assert!(f.psi_prime(0.0).abs() < 1e-10, "{}", f.name());
        }
    }

    #[test]
    fn psi_nonnegative_and_strictly_convex() {
        for f in families() {
            for l in interior_grid(&f) {
                assert!(f.psi(l) >= -1e-15, "{} at {l}", f.name());
                assert!(f.psi_double_prime(l) > 0.0, "{} at {l}", f.name());
            }
        }
    }

    #[test]
    fn closed_derivatives_match_finite_differences() {
        for f in families() {
            for l in interior_grid(&f).into_iter().step_by(7) {
                let (d1, d2) = crate::numeric::numeric_derivatives(|x| f.psi(x), l, 1e-6);
                assert!((d1 - f.psi_prime(l)).abs() < 1e-6 * (1.0 + d1.abs()), "{} psi' at {l}", f.name());
                assert!((d2 - f.psi_double_prime(l)).abs() < 1e-4 * (1.0 + d2.abs()), "{} psi'' at {l}", f.name());
            }
        }
    }

    #[test]
    fn double_conjugate_recovers_psi() {
        for f in families() {
            for l in interior_grid(&f).into_iter().step_by(9) {
                // the double transform needs psi'(λ) inside the bounded conjugate support
                let v = double_conjugate(&f, l);
                assert!((v - f.psi(l)).abs() < 1e-6 * (1.0 + f.psi(l)), "{} at {l}: {v} vs {}", f.name(), f.psi(l));
            }
        }
    }

    #[test]
    fn conjugate_examples() {
        let g = PsiFamily::sub_gaussian(1.0).unwrap();
        assert_relative_eq!(g.conjugate(1.0).unwrap(), 0.5, epsilon = 1e-15);
        for f in families() {
            assert_eq!(f.conjugate(0.0).unwrap(), 0.0);
        }
        let e = PsiFamily::sub_exponential(1.0, 1.0).unwrap();
        assert_relative_eq!(e.conjugate(2.0).unwrap(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(e.legendre(2.0).unwrap(), 1.5, epsilon = 1e-10);
        assert_relative_eq!(sub_exponential_lower_bound(1.0, 1.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_forms_match_legendre_and_grid_oracle() {
        for f in families() {
            for z in z_grid(&f) {
                let closed = f.conjugate(z).unwrap();
                let oracle = numeric_conjugate_oracle(&f, z, 2001);
                assert!((closed - oracle).abs() < 1e-6, "{} at {z}: {closed} vs {oracle}", f.name());
                let legendre = f.legendre(z).unwrap();
                assert!((closed - legendre).abs() < 1e-8, "{} at {z}: {closed} vs {legendre}", f.name());
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let g = PsiFamily::sub_gaussian(1.0).unwrap();
        assert!((numeric_conjugate_oracle(&g, 1.0, 1000) - 0.5).abs() < 1e-6);
        let e = PsiFamily::sub_exponential(1.0, 1.0).unwrap();
        assert!((numeric_conjugate_oracle(&e, 0.5, 1000) - 0.125).abs() < 1e-6);
        let b = PsiFamily::bernoulli(0.5).unwrap();
        assert!((numeric_conjugate_oracle(&b, 0.25, 1000) - 0.130_812).abs() < 1e-6);
    }

    #[test]
    fn sub_exponential_display_is_a_lower_bound() {
        for &(nu, alpha) in &[(1.0, 1.0), (0.7, 0.4), (2.0, 3.0)] {
            let f = PsiFamily::sub_exponential(nu, alpha).unwrap();
            for i in -60..=60 {
                let z = 0.1 * i as f64;
                assert!(sub_exponential_lower_bound(nu, alpha, z).unwrap() <= f.conjugate(z).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn bregman_examples() {
        let g = PsiFamily::sub_gaussian(2.0).unwrap();
        assert_relative_eq!(g.bregman(1.0, 0.0).unwrap(), 0.125, epsilon = 1e-15);
        let b = PsiFamily::bernoulli(0.5).unwrap();
        let direct = 0.75 * (0.75f64 / 0.5).ln() + 0.25 * (0.25f64 / 0.5).ln();
        assert_relative_eq!(b.bregman(0.75, 0.5).unwrap(), direct, epsilon = 1e-14);
        assert!((direct - 0.130_812).abs() < 1e-6);
        for f in families() {
            assert_eq!(f.bregman(0.2, 0.2).unwrap(), 0.0);
        }
        assert!(matches!(b.conjugate(0.6), Err(Error::InfiniteConjugate { .. })));
    }

    #[test]
    fn kl_loss_examples() {
        assert_relative_eq!(kl_loss_expfamily(&LogPartition::Gaussian, 1.0, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(kl_loss_expfamily(&LogPartition::Bernoulli, 0.4, 0.4).unwrap(), 0.0);
        let v = kl_loss_expfamily(&LogPartition::Bernoulli, 0.75, 0.5).unwrap();
        assert!((v - 0.130_812).abs() < 1e-6);
        assert!(kl_loss_expfamily(&LogPartition::Bernoulli, 1.2, 0.5).is_err());
    }

    #[test]
    fn inverse_examples() {
        let g = PsiFamily::sub_gaussian(1.0).unwrap();
        assert_relative_eq!(g.inv_conjugate_plus(2.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(g.inv_conjugate_plus(0.0).unwrap(), 0.0);
        let b = PsiFamily::bernoulli(0.5).unwrap();
        let z = b.inv_conjugate_plus(b.conjugate(0.25).unwrap()).unwrap();
        assert_relative_eq!(z, 0.25, epsilon = 1e-10);
        assert!(matches!(b.inv_conjugate_plus(10.0), Err(Error::Range { .. })));
        // closed-form Bernstein inverse σ√(2l) + b·l
        let bern = PsiFamily::bernstein(1.5, 0.3).unwrap();
        assert_relative_eq!(bern.inv_conjugate_plus(0.7).unwrap(), 1.5 * 1.4f64.sqrt() + 0.3 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn bernstein_lower_bound_examples() {
        assert_eq!(bernstein_lower_bound(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(bernstein_lower_bound(1.0, 1.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert!((bernstein_lower_bound(1.0, 0.001, 1.0).unwrap() - 0.4995).abs() < 1e-6);
        assert!(bernstein_lower_bound(0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn bernstein_lower_bound_below_conjugate(sigma in 0.1f64..5.0, b in 0.01f64..5.0, z in -20.0f64..20.0) {
            let f = PsiFamily::bernstein(sigma, b).unwrap();
            prop_assert!(bernstein_lower_bound(sigma, b, z).unwrap() <= f.conjugate(z).unwrap() * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn sub_gaussian_conjugate_is_even(sigma in 0.1f64..10.0, z in -50.0f64..50.0) {
            let f = PsiFamily::sub_gaussian(sigma).unwrap();
            prop_assert_eq!(f.conjugate(z).unwrap(), f.conjugate(-z).unwrap());
        }

        #[test]
        fn bregman_midpoint_convex(mu in 0.05f64..0.95, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            for f in [PsiFamily::bernoulli(mu).unwrap(), PsiFamily::bernstein(1.0, 0.7).unwrap(), PsiFamily::sub_exponential(1.0, 2.0).unwrap()] {
                let d = |x: f64| f.bregman(x, mu).unwrap();
                prop_assert!(d(0.5 * (a + b)) <= 0.5 * (d(a) + d(b)) + 1e-12);
            }
        }

        #[test]
        fn inverse_plus_round_trips(z in 0.0f64..0.69, which in 0usize..5) {
            let f = [
                PsiFamily::sub_gaussian(0.8).unwrap(),
                PsiFamily::sub_exponential(1.0, 1.0).unwrap(),
                PsiFamily::bernstein(1.0, 0.5).unwrap(),
                PsiFamily::bernoulli(0.3).unwrap(),
                PsiFamily::exp_family(LogPartition::Gaussian, 0.0).unwrap(),
            ][which].clone();
            let back = f.inv_conjugate_plus(f.conjugate(z).unwrap()).unwrap();
            prop_assert!((back - z).abs() < 1e-8, "{} {} -> {}", f.name(), z, back);
        }

        #[test]
        fn kl_matches_bregman_gaussian(mu1 in -3.0f64..3.0, mu0 in -3.0f64..3.0) {
            let kl = kl_loss_expfamily(&LogPartition::Gaussian, mu1, mu0).unwrap();
            let f = PsiFamily::exp_family(LogPartition::Gaussian, mu0).unwrap();
            prop_assert!((kl - f.bregman(mu1, mu0).unwrap()).abs() < 1e-6);
        }

        #[test]
        fn kl_matches_bregman_bernoulli(mu1 in 0.02f64..0.98, mu0 in 0.02f64..0.98) {
            let kl = kl_loss_expfamily(&LogPartition::Bernoulli, mu1, mu0).unwrap();
            let theta0 = LogPartition::Bernoulli.theta_of_mean(mu0).unwrap();
            let f = PsiFamily::exp_family(LogPartition::Bernoulli, theta0).unwrap();
            prop_assert!((kl - f.bregman(mu1, mu0).unwrap()).abs() < 1e-6);
        }
    }
}
