//! Likelihood families paired with priors.
//!
//! Each [`FamilyPrior`] knows how to evaluate its likelihood, compute the
//! posterior after observing a dataset (exactly where a conjugate form
//! exists, on a fine grid otherwise), and report the per-parameter Lipschitz
//! constant of its likelihood under the family's canonical dataset metric.
//!
//! Parameter points are family specific:
//!
//! | family              | parameter point                               |
//! |---------------------|-----------------------------------------------|
//! | `ExponentialRate`   | rate `θ > 0`                                  |
//! | `LaplaceScale`      | inverse scale `1/s > 0`                       |
//! | `BetaBinomial`      | success probability `θ ∈ [0, 1]`              |
//! | `NormalVariance`    | precision `1/σ²`, or variance `σ²` when the prior is placed on the variance |
//! | `DiscreteBayesNet`  | conditional probability tables                |
//! | `FiniteTheta`       | index into the finite parameter list          |

mod bayesnet;
mod posterior;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bayesnet::{floor_and_renormalize, BayesNet, Tables};
pub use posterior::{posterior_kl, GridDensity, Posterior, PosteriorRepr};

use crate::error::{Error, Result};
use crate::metrics::{log_ratio_from_logs, Dataset, PseudoMetric};
use crate::special::{ln_beta, ln_choose, ln_gamma, log_sum_exp, xlogy};

/// Number of cells in a grid posterior.
pub const GRID_POINTS: usize = 4096;
/// Grid support for an `Exp(λ)` prior starts at `[0, GRID_PRIOR_SPAN / λ]`,
/// leaving prior mass `e^{-20}` outside.
pub const GRID_PRIOR_SPAN: f64 = 20.0;
/// The support is widened until the log posterior at its right edge is this
/// far below its maximum; an `Exp(λ)` prior alone already meets it at `20/λ`.
const GRID_TAIL_DROP: f64 = 19.0;

/// A point of a family's parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta {
    Scalar(f64),
    Tables(Tables),
    Index(usize),
}

impl Theta {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Theta::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

/// Which quantity of a normal model carries the exponential prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalPrior {
    /// `1/σ² ~ Exp(λ)`.
    Precision,
    /// `σ² ~ Exp(λ)`.
    Variance,
}

/// A finite parameter list with an explicit likelihood table per parameter
/// over a finite outcome set `{0, …, r-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteFamily {
    /// `likelihoods[j][o] = P_{θ_j}(o)`.
    pub likelihoods: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
}

impl FiniteFamily {
    pub fn new(likelihoods: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        let f = Self { likelihoods, prior };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.likelihoods.len();
        if m == 0 || self.prior.len() != m {
            return Err(Error::InvalidParameter(
                "finite family needs one prior weight per parameter".into(),
            ));
        }
        let r = self.likelihoods[0].len();
        if r == 0 {
            return Err(Error::InvalidParameter("empty outcome set".into()));
        }
        for row in &self.likelihoods {
            if row.len() != r || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidParameter("malformed likelihood table".into()));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter("likelihood table does not sum to 1".into()));
            }
        }
        if self.prior.iter().any(|&w| !(w >= 0.0)) || (self.prior.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter("prior weights must sum to 1".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.likelihoods.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.likelihoods[0].len()
    }

    /// Largest absolute log-ratio between two outcome probabilities of `θ_j`.
    pub fn lipschitz(&self, j: usize) -> f64 {
        let row = &self.likelihoods[j];
        let mut best: f64 = 0.0;
        for &a in row {
            for &b in row {
                let lr = crate::metrics::log_ratio(a, b).expect("probabilities are nonnegative");
                best = best.max(lr);
            }
        }
        best
    }
}

/// A likelihood family together with its prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyPrior {
    /// `x ~ Exp(θ)`, `θ ~ Exp(prior_rate)`.
    ExponentialRate { prior_rate: f64 },
    /// `x ~ Laplace(location, s)`, `1/s ~ Exp(prior_rate)`.
    LaplaceScale { location: f64, prior_rate: f64 },
    /// `k ~ Binomial(trials, θ)`, `θ ~ Beta(prior_shape, prior_shape)`.
    BetaBinomial { trials: u32, prior_shape: f64 },
    /// `x ~ N(mean, σ²)` with an exponential prior on the precision or variance.
    NormalVariance {
        mean: f64,
        prior_rate: f64,
        prior_on: NormalPrior,
    },
    DiscreteBayesNet(BayesNet),
    FiniteTheta(FiniteFamily),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl FamilyPrior {
    pub fn exponential(prior_rate: f64) -> Result<Self> {
        let fp = FamilyPrior::ExponentialRate { prior_rate };
        fp.validate()?;
        Ok(fp)
    }

    pub fn laplace(location: f64, prior_rate: f64) -> Result<Self> {
        let fp = FamilyPrior::LaplaceScale {
            location,
            prior_rate,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn beta_binomial(trials: u32, prior_shape: f64) -> Result<Self> {
        let fp = FamilyPrior::BetaBinomial {
            trials,
            prior_shape,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn normal(mean: f64, prior_rate: f64, prior_on: NormalPrior) -> Result<Self> {
        let fp = FamilyPrior::NormalVariance {
            mean,
            prior_rate,
            prior_on,
        };
        fp.validate()?;
        Ok(fp)
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyPrior::ExponentialRate { .. } => "exponential_rate",
            FamilyPrior::LaplaceScale { .. } => "laplace_scale",
            FamilyPrior::BetaBinomial { .. } => "beta_binomial",
            FamilyPrior::NormalVariance { .. } => "normal_variance",
            FamilyPrior::DiscreteBayesNet(_) => "discrete_bayes_net",
            FamilyPrior::FiniteTheta(_) => "finite_theta",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilyPrior::ExponentialRate { prior_rate } => positive("prior_rate", *prior_rate),
            FamilyPrior::LaplaceScale {
                location,
                prior_rate,
            } => {
                if !location.is_finite() {
                    return Err(Error::InvalidParameter("location must be finite".into()));
                }
                positive("prior_rate", *prior_rate)
            }
            FamilyPrior::BetaBinomial {
                trials,
                prior_shape,
            } => {
                if *trials == 0 {
                    return Err(Error::InvalidParameter("trials must be at least 1".into()));
                }
                if !(*prior_shape > 1.0) || !prior_shape.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "symmetric beta prior needs shape > 1, got {prior_shape}"
                    )));
                }
                Ok(())
            }
            FamilyPrior::NormalVariance {
                mean, prior_rate, ..
            } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter("mean must be finite".into()));
                }
                positive("prior_rate", *prior_rate)
            }
            FamilyPrior::DiscreteBayesNet(net) => net.validate(),
            FamilyPrior::FiniteTheta(f) => f.validate(),
        }
    }

    /// The dataset metric under which the family's smoothness is stated.
    pub fn canonical_metric(&self) -> PseudoMetric {
        match self {
            FamilyPrior::ExponentialRate { .. }
            | FamilyPrior::LaplaceScale { .. }
            | FamilyPrior::BetaBinomial { .. } => PseudoMetric::AbsDiffSum,
            FamilyPrior::NormalVariance { .. } => PseudoMetric::NormalMetric,
            FamilyPrior::DiscreteBayesNet(net) => PseudoMetric::WeightedCategorical {
                weights: net.metric_weights(),
            },
            FamilyPrior::FiniteTheta(_) => PseudoMetric::Hamming,
        }
    }

    /// Rejects datasets containing observations outside the sample space.
    pub fn check_dataset(&self, x: &Dataset) -> Result<()> {
        if x.is_empty() {
            return Ok(());
        }
        match self {
            FamilyPrior::ExponentialRate { .. } => {
                for v in x.scalar_values()? {
                    if v < 0.0 {
                        return Err(Error::IncompatibleObservations(format!(
                            "exponential observation {v} is negative"
                        )));
                    }
                }
            }
            FamilyPrior::LaplaceScale { .. } | FamilyPrior::NormalVariance { .. } => {
                x.scalar_values()?;
            }
            FamilyPrior::BetaBinomial { trials, .. } => {
                for v in x.scalar_values()? {
                    if v.fract() != 0.0 || v < 0.0 || v > f64::from(*trials) {
                        return Err(Error::IncompatibleObservations(format!(
                            "binomial count {v} is not an integer in [0, {trials}]"
                        )));
                    }
                }
            }
            FamilyPrior::DiscreteBayesNet(net) => {
                for obs in x.categorical_values()? {
                    net.check_observation(obs)?;
                }
            }
            FamilyPrior::FiniteTheta(f) => {
                for obs in x.categorical_values()? {
                    if obs.len() != 1 || obs[0] as usize >= f.n_outcomes() {
                        return Err(Error::IncompatibleObservations(format!(
                            "finite-family observation {obs:?} is not a single outcome below {}",
                            f.n_outcomes()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rejects parameter points outside the family's parameter space.
    pub fn check_theta(&self, theta: &Theta) -> Result<()> {
        let bad = || Error::ParameterOutOfSpace(format!("{theta:?} for family {}", self.name()));
        match (self, theta) {
            (
                FamilyPrior::ExponentialRate { .. }
                | FamilyPrior::LaplaceScale { .. }
                | FamilyPrior::NormalVariance { .. },
                Theta::Scalar(t),
            ) if *t > 0.0 && t.is_finite() => Ok(()),
            (FamilyPrior::BetaBinomial { .. }, Theta::Scalar(t)) if (0.0..=1.0).contains(t) => {
                Ok(())
            }
            (FamilyPrior::DiscreteBayesNet(net), Theta::Tables(t)) => net.check_tables(t),
            (FamilyPrior::FiniteTheta(f), Theta::Index(j)) if *j < f.n_params() => Ok(()),
            _ => Err(bad()),
        }
    }

    /// Whether the family's posterior is represented on a grid.
    pub fn uses_grid(&self) -> bool {
        matches!(
            self,
            FamilyPrior::LaplaceScale { .. } | FamilyPrior::NormalVariance { .. }
        )
    }

    /// `ξ` itself, i.e. the posterior given no data.
    pub fn prior(&self) -> Result<Posterior> {
        posterior(self, &Dataset::empty())
    }

    /// Exponential-family form of the likelihood, where implemented.
    pub fn exponential_family(&self) -> Option<ExponentialFamily> {
        match self {
            FamilyPrior::ExponentialRate { .. } => Some(ExponentialFamily::Exponential),
            FamilyPrior::BetaBinomial { trials, .. } => {
                Some(ExponentialFamily::Binomial { trials: *trials })
            }
            _ => None,
        }
    }
}

/// `p_θ(x) = h(x) exp{η_θ T(x) - A(η_θ)}` for one-parameter families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentialFamily {
    Exponential,
    Binomial { trials: u32 },
}

impl ExponentialFamily {
    pub fn natural_parameter(&self, theta: f64) -> f64 {
        match self {
            ExponentialFamily::Exponential => -theta,
            ExponentialFamily::Binomial { .. } => (theta / (1.0 - theta)).ln(),
        }
    }

    pub fn sufficient_statistic(&self, x: f64) -> f64 {
        x
    }

    pub fn log_base_measure(&self, x: f64) -> f64 {
        match self {
            ExponentialFamily::Exponential => 0.0,
            ExponentialFamily::Binomial { trials } => ln_choose(*trials, x as u32),
        }
    }

    pub fn log_partition(&self, eta: f64) -> f64 {
        match self {
            ExponentialFamily::Exponential => -(-eta).ln(),
            ExponentialFamily::Binomial { trials } => {
                f64::from(*trials) * (eta.max(0.0) + (-eta.abs()).exp().ln_1p())
            }
        }
    }

    /// `ln h(x) + η T(x) - A(η)` for a single observation.
    pub fn log_density(&self, theta: f64, x: f64) -> f64 {
        let eta = self.natural_parameter(theta);
        self.log_base_measure(x) + eta * self.sufficient_statistic(x) - self.log_partition(eta)
    }
}

fn scalar_theta(theta: &Theta) -> f64 {
    theta.as_scalar().expect("checked scalar parameter")
}

/// Log-likelihood of one scalar observation for the scalar families.
fn scalar_log_lik(fp: &FamilyPrior, t: f64, x: f64) -> f64 {
    match fp {
        FamilyPrior::ExponentialRate { .. } => t.ln() - t * x,
        FamilyPrior::LaplaceScale { location, .. } => (t / 2.0).ln() - t * (x - location).abs(),
        FamilyPrior::BetaBinomial { trials, .. } => {
            let k = x as u32;
            ln_choose(*trials, k) + xlogy(x, t) + xlogy(f64::from(trials - k), 1.0 - t)
        }
        FamilyPrior::NormalVariance { mean, prior_on, .. } => {
            let precision = match prior_on {
                NormalPrior::Precision => t,
                NormalPrior::Variance => 1.0 / t,
            };
            0.5 * (precision / (2.0 * std::f64::consts::PI)).ln()
                - 0.5 * precision * (x - mean).powi(2)
        }
        FamilyPrior::DiscreteBayesNet(_) | FamilyPrior::FiniteTheta(_) => {
            unreachable!("categorical family")
        }
    }
}

/// `ln p_θ(x)` as an i.i.d. product over the dataset.
pub fn log_density(fp: &FamilyPrior, theta: &Theta, x: &Dataset) -> Result<f64> {
    fp.check_theta(theta)?;
    fp.check_dataset(x)?;
    Ok(match (fp, theta) {
        (FamilyPrior::DiscreteBayesNet(net), Theta::Tables(t)) => x
            .categorical_values()?
            .iter()
            .map(|obs| net.log_prob(t, obs))
            .sum(),
        (FamilyPrior::FiniteTheta(f), Theta::Index(j)) => x
            .categorical_values()?
            .iter()
            .map(|obs| f.likelihoods[*j][obs[0] as usize].ln())
            .sum(),
        _ => {
            let t = scalar_theta(theta);
            x.scalar_values()?
                .iter()
                .map(|&v| scalar_log_lik(fp, t, v))
                .sum()
        }
    })
}

/// Exact posterior for conjugate families, grid posterior otherwise.
pub fn posterior(fp: &FamilyPrior, x: &Dataset) -> Result<Posterior> {
    fp.validate()?;
    fp.check_dataset(x)?;
    match fp {
        FamilyPrior::ExponentialRate { prior_rate } => {
            let values = x.scalar_values()?;
            let n = values.len() as f64;
            let sum: f64 = values.iter().sum();
            let shape = 1.0 + n;
            let rate = prior_rate + sum;
            Ok(Posterior {
                repr: PosteriorRepr::Gamma { shape, rate },
                marginal_log: prior_rate.ln() + ln_gamma(shape) - shape * rate.ln(),
            })
        }
        FamilyPrior::BetaBinomial {
            trials,
            prior_shape,
        } => {
            let values = x.scalar_values()?;
            let successes: f64 = values.iter().sum();
            let failures = values.len() as f64 * f64::from(*trials) - successes;
            let a = prior_shape + successes;
            let b = prior_shape + failures;
            let ln_binoms: f64 = values.iter().map(|&k| ln_choose(*trials, k as u32)).sum();
            Ok(Posterior {
                repr: PosteriorRepr::Beta { a, b },
                marginal_log: ln_binoms + ln_beta(a, b) - ln_beta(*prior_shape, *prior_shape),
            })
        }
        FamilyPrior::DiscreteBayesNet(net) => {
            let data = x.categorical_values()?;
            let counts = net.posterior_counts(&data);
            let marginal_log = net
                .pseudo_counts
                .iter()
                .flatten()
                .zip(counts.iter().flatten())
                .map(|(prior, post)| {
                    let a0: f64 = prior.iter().sum();
                    let a1: f64 = post.iter().sum();
                    ln_gamma(a0) - ln_gamma(a1)
                        + prior
                            .iter()
                            .zip(post)
                            .map(|(&p, &q)| ln_gamma(q) - ln_gamma(p))
                            .sum::<f64>()
                })
                .sum();
            Ok(Posterior {
                repr: PosteriorRepr::Dirichlet {
                    counts,
                    epsilon_min: net.epsilon_min,
                },
                marginal_log,
            })
        }
        FamilyPrior::FiniteTheta(f) => {
            let data = x.categorical_values()?;
            let log_joint: Vec<f64> = (0..f.n_params())
                .map(|j| {
                    f.prior[j].ln()
                        + data
                            .iter()
                            .map(|obs| f.likelihoods[j][obs[0] as usize].ln())
                            .sum::<f64>()
                })
                .collect();
            let marginal_log = log_sum_exp(&log_joint);
            if marginal_log == f64::NEG_INFINITY {
                return Err(Error::EmptySupport);
            }
            let weights = normalize_log_weights(&log_joint, marginal_log);
            Ok(Posterior {
                repr: PosteriorRepr::FiniteWeights { weights },
                marginal_log,
            })
        }
        FamilyPrior::LaplaceScale { .. } | FamilyPrior::NormalVariance { .. } => {
            let upper = grid_upper(fp, x)?;
            posterior_on_grid(fp, x, upper)
        }
    }
}

fn normalize_log_weights(log_w: &[f64], log_total: f64) -> Vec<f64> {
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - log_total).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

fn grid_prior_rate(fp: &FamilyPrior) -> f64 {
    match fp {
        FamilyPrior::LaplaceScale { prior_rate, .. }
        | FamilyPrior::NormalVariance { prior_rate, .. } => *prior_rate,
        _ => unreachable!("grid family"),
    }
}

/// Unnormalized log posterior `ln ξ(t) + ln p_t(x)` for the grid families.
fn grid_log_joint(fp: &FamilyPrior, values: &[f64], t: f64) -> f64 {
    let rate = grid_prior_rate(fp);
    rate.ln() - rate * t + values.iter().map(|&v| scalar_log_lik(fp, t, v)).sum::<f64>()
}

fn grid_log_values(fp: &FamilyPrior, values: &[f64], upper: f64) -> (f64, Vec<f64>) {
    let width = upper / GRID_POINTS as f64;
    let logs = (0..GRID_POINTS)
        .map(|i| grid_log_joint(fp, values, (i as f64 + 0.5) * width))
        .collect();
    (width, logs)
}

/// Right end of the default grid support for `x`: at least `20/λ`, widened
/// until the posterior tail beyond it is negligible.
pub fn grid_upper(fp: &FamilyPrior, x: &Dataset) -> Result<f64> {
    if !fp.uses_grid() {
        return Err(Error::Unsupported(format!("{} has an exact posterior", fp.name())));
    }
    let values = x.scalar_values()?;
    let mut upper = GRID_PRIOR_SPAN / grid_prior_rate(fp);
    for _ in 0..64 {
        let (_, logs) = grid_log_values(fp, &values, upper);
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let edge = *logs.last().expect("non-empty grid");
        if max == f64::NEG_INFINITY || edge < max - GRID_TAIL_DROP {
            return Ok(upper);
        }
        upper *= 2.0;
    }
    Ok(upper)
}

/// Grid posterior on `[0, upper]` with [`GRID_POINTS`] midpoint cells.
pub fn posterior_on_grid(fp: &FamilyPrior, x: &Dataset, upper: f64) -> Result<Posterior> {
    if !fp.uses_grid() {
        return Err(Error::Unsupported(format!("{} has an exact posterior", fp.name())));
    }
    if !(upper > 0.0) || !upper.is_finite() {
        return Err(Error::InvalidArgument(format!("grid upper bound {upper}")));
    }
    fp.validate()?;
    fp.check_dataset(x)?;
    let values = x.scalar_values()?;
    let (width, logs) = grid_log_values(fp, &values, upper);
    let (grid, log_total) = GridDensity::from_log_weights(0.0, width, &logs);
    if log_total == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    Ok(Posterior {
        repr: PosteriorRepr::Grid(grid),
        marginal_log: log_total + width.ln(),
    })
}

/// Posteriors for `x` and `y`; grid families share one support so that their
/// KL divergence is defined cell by cell.
pub fn posterior_pair(fp: &FamilyPrior, x: &Dataset, y: &Dataset) -> Result<(Posterior, Posterior)> {
    if fp.uses_grid() {
        let upper = grid_upper(fp, x)?.max(grid_upper(fp, y)?);
        Ok((posterior_on_grid(fp, x, upper)?, posterior_on_grid(fp, y, upper)?))
    } else {
        Ok((posterior(fp, x)?, posterior(fp, y)?))
    }
}

/// One draw `θ ~ ξ(·|x)`.
pub fn sample_posterior<R: Rng + ?Sized>(p: &Posterior, rng: &mut R) -> Theta {
    p.sample(rng)
}

/// Smallest `L` with `d(p_θ(x), p_θ(y)) ≤ L ρ(x, y)` over single observations.
pub fn lipschitz_at(fp: &FamilyPrior, theta: &Theta, metric: &PseudoMetric) -> Result<f64> {
    let canonical = fp.canonical_metric();
    if *metric != canonical {
        return Err(Error::UnsupportedMetric {
            metric: metric.name().into(),
            family: fp.name().into(),
        });
    }
    fp.check_theta(theta)?;
    Ok(match (fp, theta) {
        (FamilyPrior::ExponentialRate { .. }, Theta::Scalar(t))
        | (FamilyPrior::LaplaceScale { .. }, Theta::Scalar(t)) => *t,
        (FamilyPrior::BetaBinomial { trials, .. }, Theta::Scalar(t)) => {
            f64::from(*trials).ln() + (t / (1.0 - t)).ln().abs()
        }
        (FamilyPrior::NormalVariance { mean, prior_on, .. }, Theta::Scalar(t)) => {
            let variance = match prior_on {
                NormalPrior::Precision => 1.0 / t,
                NormalPrior::Variance => *t,
            };
            mean.abs().max(1.0) / (2.0 * variance)
        }
        (FamilyPrior::DiscreteBayesNet(net), Theta::Tables(_)) => (1.0 / net.epsilon_min).ln(),
        (FamilyPrior::FiniteTheta(f), Theta::Index(j)) => f.lipschitz(*j),
        _ => unreachable!("checked parameter"),
    })
}

/// Log-ratio of single-observation likelihoods, `d(p_θ(a), p_θ(b))`.
pub fn observation_log_ratio(
    fp: &FamilyPrior,
    theta: &Theta,
    a: &crate::metrics::Observation,
    b: &crate::metrics::Observation,
) -> Result<f64> {
    let xa = Dataset::new(vec![a.clone()])?;
    let xb = Dataset::new(vec![b.clone()])?;
    Ok(log_ratio_from_logs(
        log_density(fp, theta, &xa)?,
        log_density(fp, theta, &xb)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Observation;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_density_examples() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let x = Dataset::scalars([1.0]).unwrap();
        let v = log_density(&fp, &Theta::Scalar(2.0), &x).unwrap();
        assert!(close(v, 2f64.ln() - 2.0, 1e-15));

        let fp = FamilyPrior::beta_binomial(10, 2.0).unwrap();
        let x = Dataset::scalars([5.0]).unwrap();
        let v = log_density(&fp, &Theta::Scalar(0.5), &x).unwrap();
        assert!(close(v, 252f64.ln() - 10.0 * 2f64.ln(), 1e-12));

        let f = FiniteFamily::new(vec![vec![0.25, 0.75], vec![0.5, 0.5]], vec![0.5, 0.5]).unwrap();
        let fp = FamilyPrior::FiniteTheta(f);
        let x = Dataset::categorical([vec![0]]).unwrap();
        assert_eq!(log_density(&fp, &Theta::Index(0), &x).unwrap(), 0.25f64.ln());
    }

    #[test]
    fn log_density_rejects_parameters_outside_space() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let x = Dataset::scalars([1.0]).unwrap();
        assert!(matches!(
            log_density(&fp, &Theta::Scalar(-1.0), &x),
            Err(Error::ParameterOutOfSpace(_))
        ));
        assert!(log_density(&fp, &Theta::Index(0), &x).is_err());
        let neg = Dataset::scalars([-1.0]).unwrap();
        assert!(log_density(&fp, &Theta::Scalar(1.0), &neg).is_err());
    }

    #[test]
    fn conjugate_posteriors() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let p = posterior(&fp, &Dataset::scalars([1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(p.repr, PosteriorRepr::Gamma { shape: 3.0, rate: 4.0 });

        let fp = FamilyPrior::beta_binomial(10, 2.0).unwrap();
        let p = posterior(&fp, &Dataset::scalars([3.0]).unwrap()).unwrap();
        assert_eq!(p.repr, PosteriorRepr::Beta { a: 5.0, b: 9.0 });
    }

    #[test]
    fn empty_dataset_gives_prior() {
        let fp = FamilyPrior::exponential(2.5).unwrap();
        let p = fp.prior().unwrap();
        assert_eq!(p.repr, PosteriorRepr::Gamma { shape: 1.0, rate: 2.5 });
        assert!(close(p.marginal_log, 0.0, 1e-15));

        let f = FiniteFamily::new(vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![0.3, 0.7]).unwrap();
        let p = FamilyPrior::FiniteTheta(f).prior().unwrap();
        let PosteriorRepr::FiniteWeights { weights } = p.repr else {
            unreachable!()
        };
        assert!(close(weights[0], 0.3, 1e-15) && close(weights[1], 0.7, 1e-15));

        let fp = FamilyPrior::laplace(0.0, 1.0).unwrap();
        let p = fp.prior().unwrap();
        // Grid prior should match Exp(1) on the midpoints.
        let PosteriorRepr::Grid(g) = &p.repr else {
            unreachable!()
        };
        assert!(close(g.upper(), 20.0, 1e-12));
        assert!(close(p.cdf(1.0).unwrap(), 1.0 - (-1.0f64).exp(), 1e-5));
    }

    #[test]
    fn finite_posterior_with_zero_likelihood_everywhere_errors() {
        let f = FiniteFamily::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let fp = FamilyPrior::FiniteTheta(f);
        let x = Dataset::categorical([vec![1]]).unwrap();
        assert_eq!(posterior(&fp, &x), Err(Error::EmptySupport));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn lipschitz_examples() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let m = PseudoMetric::AbsDiffSum;
        assert_eq!(lipschitz_at(&fp, &Theta::Scalar(2.0), &m).unwrap(), 2.0);

        let fp = FamilyPrior::normal(3.0, 1.0, NormalPrior::Precision).unwrap();
        // σ² = 0.5 is precision 2.
        let l = lipschitz_at(&fp, &Theta::Scalar(2.0), &PseudoMetric::NormalMetric).unwrap();
        assert!(close(l, 3.0, 1e-15));

        let net = BayesNet::with_uniform_prior(vec![2, 2], vec![vec![], vec![0]], 1.0, 0.1).unwrap();
        let tables = net.floored_means(&net.pseudo_counts);
        let fp = FamilyPrior::DiscreteBayesNet(net);
        let l = lipschitz_at(&fp, &Theta::Tables(tables), &fp.canonical_metric()).unwrap();
        assert!(close(l, 10f64.ln(), 1e-15));
        assert!(close(l, 2.302585, 1e-6));
    }

    #[test]
    fn lipschitz_rejects_foreign_metric() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        assert!(matches!(
            lipschitz_at(&fp, &Theta::Scalar(1.0), &PseudoMetric::Hamming),
            Err(Error::UnsupportedMetric { .. })
        ));
    }

    #[test]
    fn exponential_family_reconstruction() {
        let ef = FamilyPrior::exponential(1.0).unwrap().exponential_family().unwrap();
        for (t, x) in [(0.3, 0.0), (2.0, 1.0), (7.5, 3.25)] {
            let fp = FamilyPrior::exponential(1.0).unwrap();
            let direct =
                log_density(&fp, &Theta::Scalar(t), &Dataset::scalars([x]).unwrap()).unwrap();
            assert!(close(ef.log_density(t, x), direct, 1e-10));
        }
        let fp = FamilyPrior::beta_binomial(12, 2.0).unwrap();
        let ef = fp.exponential_family().unwrap();
        for (t, k) in [(0.1, 0.0), (0.5, 6.0), (0.93, 12.0), (0.37, 4.0)] {
            let direct =
                log_density(&fp, &Theta::Scalar(t), &Dataset::scalars([k]).unwrap()).unwrap();
            assert!(close(ef.log_density(t, k), direct, 1e-10));
        }
    }

    #[test]
    fn observation_log_ratio_matches_closed_form() {
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let v = observation_log_ratio(
            &fp,
            &Theta::Scalar(1.5),
            &Observation::Scalar(1.0),
            &Observation::Scalar(3.0),
        )
        .unwrap();
        assert!(close(v, 3.0, 1e-12));
    }

    #[test]
    fn binomial_counts_must_be_integral() {
        let fp = FamilyPrior::beta_binomial(10, 2.0).unwrap();
        assert!(posterior(&fp, &Dataset::scalars([2.5]).unwrap()).is_err());
        assert!(posterior(&fp, &Dataset::scalars([11.0]).unwrap()).is_err());
    }

    #[test]
    fn invalid_family_parameters() {
        assert!(FamilyPrior::exponential(0.0).is_err());
        assert!(FamilyPrior::beta_binomial(10, 1.0).is_err());
        assert!(FamilyPrior::laplace(f64::NAN, 1.0).is_err());
        assert!(FiniteFamily::new(vec![vec![0.5, 0.6]], vec![1.0]).is_err());
    }
}
