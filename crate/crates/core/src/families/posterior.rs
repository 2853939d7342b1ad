//! Posterior representations: sampling, densities, CDFs and KL divergences.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::bayesnet::{floor_and_renormalize, Tables};
use super::Theta;
use crate::error::{Error, Result};
use crate::special::{beta_reg, log_sum_exp, digamma, gamma_lr, ln_beta, ln_gamma, quantile_positive, xlogy};

/// Cap on per-row rejection attempts when sampling floored Dirichlet tables.
const MAX_DIRICHLET_REJECTIONS: usize = 100_000;

/// Piecewise-constant density on `[lower, lower + width * weights.len()]`.
/// `weights[i]` is the probability of cell `i`; `log_weights` keeps its
/// logarithm where the weight itself underflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lower: f64,
    pub width: f64,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl GridDensity {
    pub fn new(lower: f64, width: f64, weights: Vec<f64>) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            lower,
            width,
            weights,
            log_weights,
        }
    }

    /// Grid from unnormalized log weights; also returns their log-sum.
    pub fn from_log_weights(lower: f64, width: f64, logs: &[f64]) -> (Self, f64) {
        let total = log_sum_exp(logs);
        let log_weights: Vec<f64> = logs.iter().map(|l| l - total).collect();
        let weights = log_weights.iter().map(|l| l.exp()).collect();
        (
            Self {
                lower,
                width,
                weights,
                log_weights,
            },
            total,
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn upper(&self) -> f64 {
        self.lower + self.width * self.weights.len() as f64
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.lower + (i as f64 + 0.5) * self.width
    }

    pub fn cell_of(&self, t: f64) -> Option<usize> {
        if t < self.lower || t > self.upper() {
            return None;
        }
        let i = ((t - self.lower) / self.width).floor() as usize;
        Some(i.min(self.weights.len() - 1))
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.lower {
            return 0.0;
        }
        if t >= self.upper() {
            return 1.0;
        }
        let pos = (t - self.lower) / self.width;
        let i = (pos.floor() as usize).min(self.weights.len() - 1);
        let below: f64 = self.weights[..i].iter().sum();
        (below + self.weights[i] * (pos - i as f64)).min(1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if acc + w >= p && w > 0.0 {
                let frac = ((p - acc) / w).clamp(0.0, 1.0);
                return self.lower + (i as f64 + frac) * self.width;
            }
            acc += w;
        }
        self.upper()
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.midpoint(i))
            .sum()
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.weights.len() == other.weights.len()
            && (self.lower - other.lower).abs() <= 1e-12 * (1.0 + self.lower.abs())
            && (self.width - other.width).abs() <= 1e-12 * self.width
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cell = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                cell = i;
                break;
            }
        }
        while self.weights[cell] == 0.0 && cell > 0 {
            cell -= 1;
        }
        self.lower + (cell as f64 + rng.random::<f64>()) * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PosteriorRepr {
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    /// Independent Dirichlet rows; samples are rejected until every entry is
    /// at least `epsilon_min`.
    Dirichlet { counts: Tables, epsilon_min: f64 },
    Grid(GridDensity),
    FiniteWeights { weights: Vec<f64> },
}

impl PosteriorRepr {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PosteriorRepr::Gamma { .. } => "gamma",
            PosteriorRepr::Beta { .. } => "beta",
            PosteriorRepr::Dirichlet { .. } => "dirichlet",
            PosteriorRepr::Grid(_) => "grid",
            PosteriorRepr::FiniteWeights { .. } => "finite_weights",
        }
    }
}

/// `ξ(·|x)` together with the log marginal likelihood `ln φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub repr: PosteriorRepr,
    pub marginal_log: f64,
}

impl Posterior {
    pub fn kind_name(&self) -> &'static str {
        self.repr.kind_name()
    }

    /// Draw one parameter point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        match &self.repr {
            PosteriorRepr::Gamma { shape, rate } => {
                let g = Gamma::new(*shape, 1.0 / rate).expect("validated gamma parameters");
                Theta::Scalar(g.sample(rng))
            }
            PosteriorRepr::Beta { a, b } => {
                let d = Beta::new(*a, *b).expect("validated beta parameters");
                Theta::Scalar(d.sample(rng))
            }
            PosteriorRepr::Dirichlet {
                counts,
                epsilon_min,
            } => Theta::Tables(
                counts
                    .iter()
                    .map(|rows| {
                        rows.iter()
                            .map(|row| sample_floored_dirichlet(row, *epsilon_min, rng))
                            .collect()
                    })
                    .collect(),
            ),
            PosteriorRepr::Grid(g) => Theta::Scalar(g.sample(rng)),
            PosteriorRepr::FiniteWeights { weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last_positive = 0;
                for (i, &w) in weights.iter().enumerate() {
                    if w > 0.0 {
                        last_positive = i;
                    }
                    acc += w;
                    if u < acc && w > 0.0 {
                        return Theta::Index(i);
                    }
                }
                Theta::Index(last_positive)
            }
        }
    }

    /// Log density (or log mass for finite supports) at `theta`.
    pub fn log_density(&self, theta: &Theta) -> Result<f64> {
        match (&self.repr, theta) {
            (PosteriorRepr::Gamma { shape, rate }, Theta::Scalar(t)) => Ok(if *t <= 0.0 {
                f64::NEG_INFINITY
            } else {
                shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * t.ln() - rate * t
            }),
            (PosteriorRepr::Beta { a, b }, Theta::Scalar(t)) => {
                Ok(if *t <= 0.0 || *t >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_beta(*a, *b)
                })
            }
            (PosteriorRepr::Dirichlet { counts, .. }, Theta::Tables(tables)) => {
                let mut total = 0.0;
                for (rows, trows) in counts.iter().zip(tables) {
                    for (alpha, p) in rows.iter().zip(trows) {
                        total += dirichlet_log_density(alpha, p);
                    }
                }
                Ok(total)
            }
            (PosteriorRepr::Grid(g), Theta::Scalar(t)) => Ok(match g.cell_of(*t) {
                Some(i) => g.log_weights[i] - g.width.ln(),
                None => f64::NEG_INFINITY,
            }),
            (PosteriorRepr::FiniteWeights { weights }, Theta::Index(i)) => Ok(weights
                .get(*i)
                .map_or(f64::NEG_INFINITY, |w| w.ln())),
            _ => Err(Error::ParameterOutOfSpace(format!(
                "{theta:?} is not a point of a {} posterior",
                self.kind_name()
            ))),
        }
    }

    /// CDF of a one-dimensional posterior.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        match &self.repr {
            PosteriorRepr::Gamma { shape, rate } => {
                Ok(if t <= 0.0 { 0.0 } else { gamma_lr(*shape, rate * t) })
            }
            PosteriorRepr::Beta { a, b } => Ok(if t <= 0.0 {
                0.0
            } else if t >= 1.0 {
                1.0
            } else {
                beta_reg(*a, *b, t)
            }),
            PosteriorRepr::Grid(g) => Ok(g.cdf(t)),
            _ => Err(Error::Unsupported(format!(
                "CDF of a {} posterior",
                self.kind_name()
            ))),
        }
    }

    /// Inverse CDF of a one-dimensional posterior.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p}")));
        }
        match &self.repr {
            PosteriorRepr::Gamma { shape, rate } => {
                Ok(quantile_positive(
                |t| if t <= 0.0 { 0.0 } else { gamma_lr(*shape, rate * t) },
                p,
                shape / rate,
            ))
            }
            PosteriorRepr::Beta { a, b } => Ok(crate::special::bisect(
                |t| beta_reg(*a, *b, t) - p,
                0.0,
                1.0,
                1e-15,
            )),
            PosteriorRepr::Grid(g) => Ok(g.quantile(p)),
            _ => Err(Error::Unsupported(format!(
                "quantile of a {} posterior",
                self.kind_name()
            ))),
        }
    }

    /// Posterior mean of a one-dimensional posterior.
    pub fn mean(&self) -> Result<f64> {
        match &self.repr {
            PosteriorRepr::Gamma { shape, rate } => Ok(shape / rate),
            PosteriorRepr::Beta { a, b } => Ok(a / (a + b)),
            PosteriorRepr::Grid(g) => Ok(g.mean()),
            _ => Err(Error::Unsupported(format!(
                "mean of a {} posterior",
                self.kind_name()
            ))),
        }
    }

    /// Sum-to-one check on the normalized representation.
    pub fn total_mass(&self) -> f64 {
        match &self.repr {
            PosteriorRepr::Grid(g) => g.weights.iter().sum(),
            PosteriorRepr::FiniteWeights { weights } => weights.iter().sum(),
            _ => 1.0,
        }
    }
}

fn dirichlet_log_density(alpha: &[f64], p: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    ln_gamma(a0) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
        + alpha
            .iter()
            .zip(p)
            .map(|(&a, &pi)| if pi <= 0.0 { f64::NEG_INFINITY } else { (a - 1.0) * pi.ln() })
            .sum::<f64>()
}

fn sample_floored_dirichlet<R: Rng + ?Sized>(alpha: &[f64], floor: f64, rng: &mut R) -> Vec<f64> {
    let mut last = Vec::new();
    for _ in 0..MAX_DIRICHLET_REJECTIONS {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive pseudo-count").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        last = draws.iter().map(|g| g / total).collect();
        if last.iter().all(|&p| p >= floor) {
            return last;
        }
    }
    // The floor region has negligible posterior mass; project onto it.
    floor_and_renormalize(&last, floor)
}

/// `KL(p ‖ q)`. Closed form for Gamma, Beta, Dirichlet and finite weights;
/// grid posteriors must share a grid and are compared cell by cell.
pub fn posterior_kl(p: &Posterior, q: &Posterior) -> Result<f64> {
    let kl = match (&p.repr, &q.repr) {
        (
            PosteriorRepr::Gamma { shape: a1, rate: b1 },
            PosteriorRepr::Gamma { shape: a2, rate: b2 },
        ) => gamma_kl(*a1, *b1, *a2, *b2),
        (PosteriorRepr::Beta { a: a1, b: b1 }, PosteriorRepr::Beta { a: a2, b: b2 }) => {
            ln_beta(*a2, *b2) - ln_beta(*a1, *b1)
                + (a1 - a2) * digamma(*a1)
                + (b1 - b2) * digamma(*b1)
                + (a2 - a1 + b2 - b1) * digamma(a1 + b1)
        }
        (
            PosteriorRepr::Dirichlet { counts: c1, .. },
            PosteriorRepr::Dirichlet { counts: c2, .. },
        ) => {
            let same_shape = c1.len() == c2.len()
                && c1.iter().zip(c2).all(|(r1, r2)| {
                    r1.len() == r2.len() && r1.iter().zip(r2).all(|(a, b)| a.len() == b.len())
                });
            if !same_shape {
                return Err(Error::InvalidArgument("Dirichlet tables differ in shape".into()));
            }
            c1.iter()
                .flatten()
                .zip(c2.iter().flatten())
                .map(|(a1, a2)| dirichlet_kl(a1, a2))
                .sum()
        }
        (PosteriorRepr::Grid(g1), PosteriorRepr::Grid(g2)) => {
            if !g1.same_grid(g2) {
                return Err(Error::InvalidArgument(
                    "grid posteriors must share a grid; build them on a common support".into(),
                ));
            }
            log_discrete_kl(&g1.weights, &g1.log_weights, &g2.log_weights)?
        }
        (
            PosteriorRepr::FiniteWeights { weights: w1 },
            PosteriorRepr::FiniteWeights { weights: w2 },
        ) => {
            if w1.len() != w2.len() {
                return Err(Error::InvalidArgument("finite supports differ in size".into()));
            }
            discrete_kl(w1, w2)?
        }
        _ => return Err(Error::MismatchedPosteriors(p.kind_name(), q.kind_name())),
    };
    // Rounding can leave a tiny negative value for identical arguments.
    Ok(kl.max(0.0))
}

fn gamma_kl(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    (a1 - a2) * digamma(a1) - ln_gamma(a1) + ln_gamma(a2) + a2 * (b1.ln() - b2.ln())
        + a1 * (b2 - b1) / b1
}

fn dirichlet_kl(a1: &[f64], a2: &[f64]) -> f64 {
    let s1: f64 = a1.iter().sum();
    let s2: f64 = a2.iter().sum();
    let mut kl = ln_gamma(s1) - ln_gamma(s2);
    for (&x, &y) in a1.iter().zip(a2) {
        kl += ln_gamma(y) - ln_gamma(x) + (x - y) * (digamma(x) - digamma(s1));
    }
    kl
}

/// `Σ p_i (ln p_i - ln q_i)` from log masses, so that cells whose `q` mass
/// underflows still contribute correctly.
fn log_discrete_kl(p: &[f64], log_p: &[f64], log_q: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (i, ((&pi, &lp), &lq)) in p.iter().zip(log_p).zip(log_q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if lq == f64::NEG_INFINITY {
            return Err(Error::NotDominated(format!("cell {i} has mass {pi} under p but none under q")));
        }
        kl += pi * (lp - lq);
    }
    Ok(kl)
}

fn discrete_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 && qi <= 0.0 {
            return Err(Error::NotDominated(format!("cell {i} has mass {pi} under p but none under q")));
        }
        kl += xlogy(pi, pi) - xlogy(pi, qi);
    }
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn gamma(shape: f64, rate: f64) -> Posterior {
        Posterior {
            repr: PosteriorRepr::Gamma { shape, rate },
            marginal_log: 0.0,
        }
    }

    fn finite(weights: Vec<f64>) -> Posterior {
        Posterior {
            repr: PosteriorRepr::FiniteWeights { weights },
            marginal_log: 0.0,
        }
    }

    /// Simpson quadrature of `∫ p ln(p/q)` for two gamma densities.
    fn gamma_kl_quadrature(a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
        let p = gamma(a1, b1);
        let q = gamma(a2, b2);
        let upper = 60.0;
        let n = 200_000;
        let h = upper / n as f64;
        let f = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let lp = p.log_density(&Theta::Scalar(t)).unwrap();
            let lq = q.log_density(&Theta::Scalar(t)).unwrap();
            lp.exp() * (lp - lq)
        };
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn gamma_kl_matches_closed_form_and_quadrature() {
        let kl = posterior_kl(&gamma(2.0, 2.0), &gamma(2.0, 2.5)).unwrap();
        let expected = 2.0 * 0.8f64.ln() + 2.0 * 0.5 / 2.0;
        assert!((kl - expected).abs() < 1e-14);
        assert!((kl - 0.05371).abs() < 1e-5);
        let quad = gamma_kl_quadrature(2.0, 2.0, 2.0, 2.5);
        assert!((kl - quad).abs() < 1e-8, "closed {kl} quadrature {quad}");
        let kl2 = posterior_kl(&gamma(3.5, 1.2), &gamma(2.0, 0.7)).unwrap();
        let quad2 = gamma_kl_quadrature(3.5, 1.2, 2.0, 0.7);
        assert!((kl2 - quad2).abs() < 1e-8, "closed {kl2} quadrature {quad2}");
    }

    #[test]
    fn finite_kl_matches_discrete_sum() {
        let kl = posterior_kl(&finite(vec![0.5, 0.5]), &finite(vec![0.25, 0.75])).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expected).abs() < 1e-15);
        assert!((kl - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn beta_kl_matches_quadrature() {
        let p = Posterior {
            repr: PosteriorRepr::Beta { a: 5.0, b: 9.0 },
            marginal_log: 0.0,
        };
        let q = Posterior {
            repr: PosteriorRepr::Beta { a: 3.0, b: 4.0 },
            marginal_log: 0.0,
        };
        let closed = posterior_kl(&p, &q).unwrap();
        let n = 100_000;
        let h = 1.0 / n as f64;
        let quad: f64 = (0..n)
            .map(|i| {
                let t = Theta::Scalar((i as f64 + 0.5) * h);
                let lp = p.log_density(&t).unwrap();
                lp.exp() * (lp - q.log_density(&t).unwrap()) * h
            })
            .sum();
        assert!((closed - quad).abs() < 1e-7, "closed {closed} quadrature {quad}");
    }

    #[test]
    fn kl_errors() {
        assert_eq!(
            posterior_kl(&gamma(1.0, 1.0), &finite(vec![1.0])),
            Err(Error::MismatchedPosteriors("gamma", "finite_weights"))
        );
        assert!(matches!(
            posterior_kl(&finite(vec![0.5, 0.5]), &finite(vec![1.0, 0.0])),
            Err(Error::NotDominated(_))
        ));
    }

    #[test]
    fn degenerate_finite_weights_sample_second_point() {
        let p = finite(vec![0.0, 1.0]);
        let mut r = rng::stream(1, "t", 0);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut r), Theta::Index(1));
        }
    }

    #[test]
    fn gamma_sample_mean() {
        let p = gamma(3.0, 4.0);
        let mut r = rng::stream(3, "t", 0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| match p.sample(&mut r) {
                Theta::Scalar(v) => v,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / n as f64;
        let tol = 4.0 * (3.0f64 / 16.0 / n as f64).sqrt();
        assert!((mean - 0.75).abs() < tol, "mean {mean}");
    }

    #[test]
    fn grid_cdf_and_quantile_are_inverse() {
        let g = GridDensity::new(0.0, 0.5, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(g.cdf(0.0), 0.0);
        assert!((g.cdf(1.0) - 0.3).abs() < 1e-15);
        assert!((g.quantile(0.3) - 1.0).abs() < 1e-12);
        assert!((g.quantile(g.cdf(1.37)) - 1.37).abs() < 1e-12);
        assert_eq!(g.cell_of(2.5), None);
    }

    #[test]
    fn floored_dirichlet_samples_respect_floor() {
        let p = Posterior {
            repr: PosteriorRepr::Dirichlet {
                counts: vec![vec![vec![1.0, 1.0, 1.0]]],
                epsilon_min: 0.2,
            },
            marginal_log: 0.0,
        };
        let mut r = rng::stream(4, "t", 0);
        for _ in 0..200 {
            let Theta::Tables(t) = p.sample(&mut r) else {
                unreachable!()
            };
            assert!(t[0][0].iter().all(|&v| v >= 0.2));
            assert!((t[0][0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
