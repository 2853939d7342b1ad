//! Smoothness certificates and the guarantees derived from them.
//!
//! A certificate is either a uniform Lipschitz constant `L` of the
//! log-likelihood in the dataset, or a concentration constant `c` saying the
//! prior puts mass at least `1 - e^{-cL}` on parameters whose likelihood is
//! `L`-Lipschitz. From either we obtain a KL robustness bound on the
//! posterior, a generalized differential-privacy guarantee, and the dataset
//! distance at which a sampling adversary can tell two datasets apart.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilyPrior, NormalPrior};
use crate::metrics::PseudoMetric;
use crate::special::{bisect, ln_beta};

/// `ω`, the positive root of `e^ω = 2ω + 1`, and `κ = 2ω / (1 - e^{-ω})²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaConstants {
    pub omega: f64,
    pub kappa: f64,
}

static KAPPA: OnceLock<KappaConstants> = OnceLock::new();

pub fn kappa_constants() -> KappaConstants {
    *KAPPA.get_or_init(|| {
        // e^ω - 2ω - 1 is strictly convex, negative just above 0 and positive at 10.
        let omega = bisect(|w| w.exp() - 2.0 * w - 1.0, 1e-6, 10.0, 1e-12);
        let kappa = 2.0 * omega / (1.0 - (-omega).exp()).powi(2);
        KappaConstants { omega, kappa }
    })
}

pub fn kappa() -> f64 {
    kappa_constants().kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "assumption", rename_all = "snake_case")]
pub enum Smoothness {
    UniformLipschitz { lipschitz: f64 },
    Concentration { concentration: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub smoothness: Smoothness,
    pub metric: PseudoMetric,
    /// Number of i.i.d. elements (or differing elements) the certificate was
    /// lifted to; `None` for a single observation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifted_to: Option<u64>,
}

impl SmoothnessCertificate {
    pub fn uniform_lipschitz(lipschitz: f64, metric: PseudoMetric) -> Result<Self> {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::InvalidArgument(format!("Lipschitz constant {lipschitz}")));
        }
        Ok(Self {
            smoothness: Smoothness::UniformLipschitz { lipschitz },
            metric,
            lifted_to: None,
        })
    }

    pub fn concentration(concentration: f64, metric: PseudoMetric) -> Result<Self> {
        if !(concentration > 0.0) || !concentration.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "concentration constant must be positive, got {concentration}"
            )));
        }
        Ok(Self {
            smoothness: Smoothness::Concentration { concentration },
            metric,
            lifted_to: None,
        })
    }
}

/// Result of deriving a certificate for a family. Some parameterizations
/// yield a non-positive concentration constant, which is reported rather
/// than clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertificateOutcome {
    Valid(SmoothnessCertificate),
    Invalid {
        constant: f64,
        metric: PseudoMetric,
        reason: String,
    },
}

impl CertificateOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, CertificateOutcome::Valid(_))
    }

    pub fn into_valid(self) -> Result<SmoothnessCertificate> {
        match self {
            CertificateOutcome::Valid(c) => Ok(c),
            CertificateOutcome::Invalid {
                constant, reason, ..
            } => Err(Error::InvalidArgument(format!(
                "no valid certificate (constant {constant}): {reason}"
            ))),
        }
    }
}

/// `v = 2 n^α / (α B(α, α))` and the constant `ln(1/v) + α` for the
/// beta-binomial family.
pub fn beta_binomial_constant(trials: u32, prior_shape: f64) -> f64 {
    let ln_v = 2f64.ln() + prior_shape * f64::from(trials).ln()
        - prior_shape.ln()
        - ln_beta(prior_shape, prior_shape);
    -ln_v + prior_shape
}

/// Parameter interval on which the binomial likelihood is `L`-Lipschitz:
/// `[(1 + e^L/n)^{-1}, (1 + n/e^L)^{-1}]`, empty when `L < ln n`.
pub fn beta_binomial_region(trials: u32, level: f64) -> Option<(f64, f64)> {
    let n = f64::from(trials);
    if level < n.ln() {
        return None;
    }
    let el = level.exp();
    Some((1.0 / (1.0 + el / n), 1.0 / (1.0 + n / el)))
}

/// Exhaustive concentration constant of a finite family: the largest `c` with
/// `ξ(Θ_L) ≥ 1 - e^{-cL}` for every `L ≥ 0`. `None` when no positive `c`
/// exists, i.e. when no parameter has a constant likelihood.
pub fn finite_concentration(fp: &FamilyPrior) -> Result<Option<f64>> {
    let FamilyPrior::FiniteTheta(f) = fp else {
        return Err(Error::Unsupported(format!(
            "exhaustive concentration for {}",
            fp.name()
        )));
    };
    let mut levels: Vec<(f64, f64)> = (0..f.n_params())
        .filter(|&j| f.prior[j] > 0.0)
        .map(|j| (f.lipschitz(j), f.prior[j]))
        .collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    // ξ(Θ_L) is a right-continuous step function; the binding constraints sit
    // just below each jump.
    let mut best = f64::INFINITY;
    let mut cumulative: f64 = 0.0;
    let mut i = 0;
    while i < levels.len() {
        let level = levels[i].0;
        if cumulative < 1.0 - 1e-15 {
            if level <= 0.0 {
                // mass at L = 0 only raises the step; nothing to bound yet
            } else if cumulative == 0.0 {
                return Ok(None);
            } else {
                best = best.min(-(1.0 - cumulative).ln() / level);
            }
        }
        while i < levels.len() && levels[i].0 == level {
            cumulative += levels[i].1;
            i += 1;
        }
    }
    if best.is_finite() && best > 0.0 {
        Ok(Some(best))
    } else if best == f64::INFINITY {
        // Every parameter has a constant likelihood.
        Ok(Some(f64::INFINITY))
    } else {
        Ok(None)
    }
}

/// Smoothness certificate implied by the family's construction.
pub fn certificate(fp: &FamilyPrior) -> Result<CertificateOutcome> {
    fp.validate()?;
    let metric = fp.canonical_metric();
    let valid = |c: SmoothnessCertificate| Ok(CertificateOutcome::Valid(c));
    match fp {
        FamilyPrior::ExponentialRate { prior_rate }
        | FamilyPrior::LaplaceScale { prior_rate, .. } => {
            valid(SmoothnessCertificate::concentration(*prior_rate, metric)?)
        }
        FamilyPrior::BetaBinomial {
            trials,
            prior_shape,
        } => {
            let c = beta_binomial_constant(*trials, *prior_shape);
            if c > 0.0 {
                valid(SmoothnessCertificate::concentration(c, metric)?)
            } else {
                Ok(CertificateOutcome::Invalid {
                    constant: c,
                    metric,
                    reason: "ln(1/v) + α is not positive for this (α, n)".into(),
                })
            }
        }
        FamilyPrior::NormalVariance {
            mean,
            prior_rate,
            prior_on,
        } => {
            let c = match prior_on {
                NormalPrior::Precision => 2.0 * prior_rate / mean.abs().max(1.0),
                NormalPrior::Variance => *prior_rate,
            };
            valid(SmoothnessCertificate::concentration(c, metric)?)
        }
        FamilyPrior::DiscreteBayesNet(net) => valid(SmoothnessCertificate::uniform_lipschitz(
            (1.0 / net.epsilon_min).ln(),
            metric,
        )?),
        FamilyPrior::FiniteTheta(f) => {
            let l = (0..f.n_params())
                .map(|j| f.lipschitz(j))
                .fold(0.0, f64::max);
            if l.is_finite() {
                valid(SmoothnessCertificate::uniform_lipschitz(l, metric)?)
            } else {
                Ok(CertificateOutcome::Invalid {
                    constant: l,
                    metric,
                    reason: "some likelihood table has a zero entry".into(),
                })
            }
        }
    }
}

/// Upper bound on `KL(ξ(·|x) ‖ ξ(·|y))` at dataset distance `rho`.
pub fn robustness_bound(cert: &SmoothnessCertificate, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::NegativeInput(rho));
    }
    Ok(match cert.smoothness {
        Smoothness::UniformLipschitz { lipschitz } => 2.0 * lipschitz * rho,
        Smoothness::Concentration { concentration } => kappa() * rho / concentration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricTransform {
    Identity,
    SquareRoot,
}

/// `ξ(B|x) ≤ e^{ε ρ'} ξ(B|y) + δ ρ'` with `ρ' = ρ` or `√ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyGuarantee {
    pub epsilon_rate: f64,
    pub delta_rate: f64,
    pub metric_transform: MetricTransform,
}

impl PrivacyGuarantee {
    pub fn transformed_distance(&self, rho: f64) -> f64 {
        match self.metric_transform {
            MetricTransform::Identity => rho,
            MetricTransform::SquareRoot => rho.sqrt(),
        }
    }

    /// Multiplicative factor `e^{ε ρ'}` on event probabilities.
    pub fn multiplicative_factor(&self, rho: f64) -> f64 {
        (self.epsilon_rate * self.transformed_distance(rho)).exp()
    }

    /// Additive slack `δ ρ'` on event probabilities.
    pub fn additive_slack(&self, rho: f64) -> f64 {
        self.delta_rate * self.transformed_distance(rho)
    }

    /// Whether `p_x` and `p_y`, the probabilities of one event under two
    /// datasets at distance `rho`, respect the guarantee.
    pub fn admits(&self, p_x: f64, p_y: f64, rho: f64, tol: f64) -> bool {
        p_x <= self.multiplicative_factor(rho) * p_y + self.additive_slack(rho) + tol
    }
}

pub fn dp_guarantee(cert: &SmoothnessCertificate) -> PrivacyGuarantee {
    match cert.smoothness {
        Smoothness::UniformLipschitz { lipschitz } => PrivacyGuarantee {
            epsilon_rate: 2.0 * lipschitz,
            delta_rate: 0.0,
            metric_transform: MetricTransform::Identity,
        },
        Smoothness::Concentration { concentration } => PrivacyGuarantee {
            epsilon_rate: 0.0,
            delta_rate: (kappa() / (2.0 * concentration)).sqrt(),
            metric_transform: MetricTransform::SquareRoot,
        },
    }
}

/// Certificate for `n` i.i.d. observations under the summed metric; with
/// `k_differing`, for datasets that differ in at most that many elements.
pub fn lift_iid(
    cert: &SmoothnessCertificate,
    n: u64,
    k_differing: Option<u64>,
) -> Result<SmoothnessCertificate> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let factor = match k_differing {
        Some(0) => return Err(Error::InvalidArgument("k must be positive".into())),
        Some(k) if k > n => {
            return Err(Error::InvalidArgument(format!(
                "k = {k} differing elements exceeds n = {n}"
            )))
        }
        Some(k) => k,
        None => n,
    };
    let smoothness = match cert.smoothness {
        Smoothness::UniformLipschitz { lipschitz } => Smoothness::UniformLipschitz {
            lipschitz: lipschitz * factor as f64,
        },
        Smoothness::Concentration { concentration } => Smoothness::Concentration {
            concentration: concentration / factor as f64,
        },
    };
    Ok(SmoothnessCertificate {
        smoothness,
        metric: cert.metric.clone(),
        lifted_to: Some(factor),
    })
}

/// Largest partition size admissible at confidence `delta`: `⌊log₂ √(1/δ)⌋`.
pub fn max_partition_size(delta: f64) -> usize {
    (0.5 * (1.0 / delta).log2()).floor().max(0.0) as usize
}

/// With probability at least `1 - delta`, the empirical distribution of `n`
/// samples restricted to an `m`-cell partition is within this L1 distance of
/// the truth.
pub fn empirical_l1_bound(n: u64, delta: f64, m: usize) -> Result<f64> {
    check_probability(delta)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let max = max_partition_size(delta);
    if m > max {
        return Err(Error::PartitionTooLarge { m, max });
    }
    Ok((3.0 / n as f64 * (1.0 / delta).ln()).sqrt())
}

fn check_probability(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityBound {
    pub rho_threshold: f64,
    pub n_queries: u64,
    pub delta: f64,
}

/// Dataset distance beyond which `n` posterior samples let the adversary
/// distinguish datasets with probability `1 - delta`.
pub fn distinguishability_threshold(
    cert: &SmoothnessCertificate,
    n: u64,
    delta: f64,
) -> Result<DistinguishabilityBound> {
    check_probability(delta)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let scale = threshold_numerator(cert) * (1.0 / delta).ln();
    Ok(DistinguishabilityBound {
        rho_threshold: scale / n as f64,
        n_queries: n,
        delta,
    })
}

/// The `n`-independent factor `K` in `ρ* = K ln(1/δ) / n`.
fn threshold_numerator(cert: &SmoothnessCertificate) -> f64 {
    match cert.smoothness {
        Smoothness::UniformLipschitz { lipschitz } => 3.0 / (4.0 * lipschitz),
        Smoothness::Concentration { concentration } => 3.0 * concentration / (2.0 * kappa()),
    }
}

/// Largest query count `n` whose distinguishability threshold still exceeds
/// `rho_target`; zero if even a single query falls below it.
pub fn max_safe_queries(cert: &SmoothnessCertificate, rho_target: f64, delta: f64) -> Result<u64> {
    check_probability(delta)?;
    if !(rho_target > 0.0) {
        return Err(Error::InvalidArgument(format!("rho_target must be positive, got {rho_target}")));
    }
    let threshold = |n: u64| distinguishability_threshold(cert, n, delta).map(|b| b.rho_threshold);
    if threshold(1)? <= rho_target {
        return Ok(0);
    }
    let ratio = threshold_numerator(cert) * (1.0 / delta).ln() / rho_target;
    if !ratio.is_finite() || ratio >= u64::MAX as f64 {
        return Ok(u64::MAX);
    }
    let mut n = (ratio.ceil() as u64).saturating_sub(1).max(1);
    // Settle rounding at the boundary.
    while n > 1 && threshold(n)? <= rho_target {
        n -= 1;
    }
    while threshold(n + 1)? > rho_target {
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{BayesNet, FiniteFamily};
    use std::time::Instant;

    fn lip(l: f64) -> SmoothnessCertificate {
        SmoothnessCertificate::uniform_lipschitz(l, PseudoMetric::AbsDiffSum).unwrap()
    }

    fn conc(c: f64) -> SmoothnessCertificate {
        SmoothnessCertificate::concentration(c, PseudoMetric::AbsDiffSum).unwrap()
    }

    #[test]
    fn kappa_constants_match_reported_values() {
        let start = Instant::now();
        let k = kappa_constants();
        assert!((k.omega - 1.25643).abs() < 1e-4);
        assert!((k.kappa - 4.91081).abs() < 1e-4);
        assert!((k.omega.exp() - 2.0 * k.omega - 1.0).abs() < 1e-10);
        assert!(start.elapsed().as_millis() < 50);
    }

    #[test]
    fn certificates_per_family() {
        let net = BayesNet::with_uniform_prior(vec![2, 2], vec![vec![], vec![0]], 1.0, 0.1).unwrap();
        let cert = certificate(&FamilyPrior::DiscreteBayesNet(net)).unwrap().into_valid().unwrap();
        assert_eq!(
            cert.smoothness,
            Smoothness::UniformLipschitz {
                lipschitz: 10f64.ln()
            }
        );
        assert_eq!(
            cert.metric,
            PseudoMetric::WeightedCategorical {
                weights: vec![2.0, 2.0]
            }
        );

        let cert = certificate(&FamilyPrior::exponential(2.0).unwrap())
            .unwrap()
            .into_valid()
            .unwrap();
        assert_eq!(cert.smoothness, Smoothness::Concentration { concentration: 2.0 });

        let normal = FamilyPrior::normal(-3.0, 1.5, NormalPrior::Precision).unwrap();
        let cert = certificate(&normal).unwrap().into_valid().unwrap();
        assert_eq!(cert.smoothness, Smoothness::Concentration { concentration: 1.0 });
        assert_eq!(cert.metric, PseudoMetric::NormalMetric);
    }

    #[test]
    fn beta_binomial_certificate_is_flagged_invalid() {
        // B(2,2) = 1/6, so v = 2 * 10^2 / (2/6) = 600 and ln(1/600) + 2 ≈ -4.397.
        let v = 2.0 * 100.0 / (2.0 * (1.0 / 6.0));
        assert!((v - 600.0f64).abs() < 1e-9);
        let outcome = certificate(&FamilyPrior::beta_binomial(10, 2.0).unwrap()).unwrap();
        match outcome {
            CertificateOutcome::Invalid { constant, .. } => {
                assert!((constant - ((1.0 / v).ln() + 2.0)).abs() < 1e-12);
                assert!((constant + 4.397).abs() < 1e-2);
            }
            other => panic!("expected invalid certificate, got {other:?}"),
        }
    }

    #[test]
    fn beta_binomial_region_interval() {
        let (lo, hi) = beta_binomial_region(10, 100f64.ln()).unwrap();
        assert!((lo - 1.0 / 11.0).abs() < 1e-12);
        assert!((hi - 10.0 / 11.0).abs() < 1e-12);
        assert!(beta_binomial_region(10, 2.0).is_none());
    }

    #[test]
    fn robustness_bound_examples() {
        assert_eq!(robustness_bound(&lip(1.0), 0.5).unwrap(), 1.0);
        assert!((robustness_bound(&conc(1.0), 0.5).unwrap() - 2.45540).abs() < 1e-3);
        assert_eq!(robustness_bound(&conc(3.0), 0.0).unwrap(), 0.0);
        assert_eq!(robustness_bound(&lip(3.0), 0.0).unwrap(), 0.0);
        assert!(robustness_bound(&lip(3.0), -1.0).is_err());
    }

    #[test]
    fn dp_guarantee_examples() {
        let g = dp_guarantee(&lip(10f64.ln()));
        assert!((g.epsilon_rate - 4.60517).abs() < 1e-5);
        assert_eq!(g.delta_rate, 0.0);
        assert_eq!(g.metric_transform, MetricTransform::Identity);

        let g = dp_guarantee(&conc(2.0));
        assert!((g.delta_rate - 1.10806).abs() < 1e-3);
        assert_eq!(g.epsilon_rate, 0.0);
        assert_eq!(g.metric_transform, MetricTransform::SquareRoot);

        let g = dp_guarantee(&conc(1e4));
        assert!((g.delta_rate - 0.01567).abs() < 1e-5);
    }

    #[test]
    fn pinsker_link_between_bounds() {
        for c in [0.1, 0.7, 1.0, 3.3, 50.0] {
            let cert = conc(c);
            let via_kl = (robustness_bound(&cert, 1.0).unwrap() / 2.0).sqrt();
            assert!((dp_guarantee(&cert).delta_rate - via_kl).abs() < 1e-14);
        }
    }

    #[test]
    fn hamming_neighbours_reduce_to_standard_dp() {
        let g = dp_guarantee(&lip(0.5));
        // ρ = 1 for neighbouring datasets: the factor is e^ε with ε = 2L.
        assert!((g.multiplicative_factor(1.0) - 1f64.exp()).abs() < 1e-15);
        assert_eq!(g.additive_slack(1.0), 0.0);
        assert!(g.admits(0.2, 0.2 / 1f64.exp(), 1.0, 1e-15));
        assert!(!g.admits(0.2, 0.05, 1.0, 0.0));
    }

    #[test]
    fn lifting_examples() {
        let l = lift_iid(&lip(2.0), 5, None).unwrap();
        assert_eq!(l.smoothness, Smoothness::UniformLipschitz { lipschitz: 10.0 });
        let c = lift_iid(&conc(1.0), 5, None).unwrap();
        assert_eq!(c.smoothness, Smoothness::Concentration { concentration: 0.2 });
        let k = lift_iid(&lip(2.0), 5, Some(2)).unwrap();
        assert_eq!(k.smoothness, Smoothness::UniformLipschitz { lipschitz: 4.0 });
        assert!(lift_iid(&lip(2.0), 5, Some(6)).is_err());
        // Restricting to k differing elements matches lifting by k directly.
        assert_eq!(
            lift_iid(&lip(2.0), 9, Some(3)).unwrap().smoothness,
            lift_iid(&lip(2.0), 3, None).unwrap().smoothness
        );
    }

    #[test]
    fn empirical_bound_examples() {
        let b = empirical_l1_bound(300, 0.01, 3).unwrap();
        assert!((b - 0.21462).abs() < 1e-4);
        assert_eq!(
            empirical_l1_bound(300, 0.01, 5),
            Err(Error::PartitionTooLarge { m: 5, max: 3 })
        );
        let quarter = empirical_l1_bound(1200, 0.01, 3).unwrap();
        assert!((quarter - b / 2.0).abs() < 1e-15);
    }

    #[test]
    fn distinguishability_examples() {
        let b = distinguishability_threshold(&lip(1.0), 100, 0.05).unwrap();
        assert!((b.rho_threshold - 0.022468).abs() < 1e-5);
        assert!((b.rho_threshold - 3.0 / 400.0 * 20f64.ln()).abs() < 1e-15);
        let b = distinguishability_threshold(&conc(1.0), 100, 0.05).unwrap();
        assert!((b.rho_threshold - 0.0091497).abs() < 1e-5);
        let near_one = distinguishability_threshold(&lip(1.0), 100, 1.0 - 1e-12).unwrap();
        assert!(near_one.rho_threshold < 1e-13);
        assert!(distinguishability_threshold(&lip(1.0), 100, 1.0).is_err());
    }

    #[test]
    fn max_safe_queries_inverts_threshold() {
        assert_eq!(max_safe_queries(&lip(1.0), 0.022468, 0.05).unwrap(), 99);
        let at_one = distinguishability_threshold(&lip(1.0), 1, 0.05).unwrap().rho_threshold;
        assert_eq!(max_safe_queries(&lip(1.0), at_one, 0.05).unwrap(), 0);
        assert_eq!(max_safe_queries(&lip(1.0), 2.0 * at_one, 0.05).unwrap(), 0);
        let n1 = max_safe_queries(&conc(1.0), 0.001, 0.05).unwrap();
        let n2 = max_safe_queries(&conc(1.0), 0.002, 0.05).unwrap();
        assert!((n1 as i64 - 2 * n2 as i64).abs() <= 1, "{n1} vs {n2}");
    }

    #[test]
    fn finite_concentration_step_function() {
        // θ₀ flat (L = 0, mass 0.5), θ₁ with L = ln 3 (mass 0.5).
        let f = FiniteFamily::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]], vec![0.5, 0.5]).unwrap();
        let c = finite_concentration(&FamilyPrior::FiniteTheta(f)).unwrap().unwrap();
        assert!((c - 2f64.ln() / 3f64.ln()).abs() < 1e-14);

        let f = FiniteFamily::new(vec![vec![0.4, 0.6], vec![0.25, 0.75]], vec![0.5, 0.5]).unwrap();
        assert_eq!(finite_concentration(&FamilyPrior::FiniteTheta(f)).unwrap(), None);
    }
}
