//! Posterior sampling query sessions.
//!
//! A session computes `ξ(·|x)` once, then answers the `k`-th query `q_k` with
//! `q_k(θ_k)` for a fresh draw `θ_k ~ ξ(·|x)`. Draws are never shared between
//! queries.

use serde::{Deserialize, Serialize};

use crate::calculus::{max_safe_queries, SmoothnessCertificate};
use crate::error::{Error, Result};
use crate::families::{posterior, FamilyPrior, NormalPrior, Posterior, Tables, Theta};
use crate::metrics::Dataset;
use crate::rng::{self, RngStream};
use crate::special::ln_choose;

/// Scalar summaries of `P_θ` available to `Functional` queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Functional {
    Mean,
    Variance,
    /// `P_θ(X > threshold)`.
    TailProbability { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "snake_case")]
pub enum Query {
    /// Return the sampled parameter itself.
    Identity,
    /// `E_θ[x_Y | x_Z = values]` over a Bayesian network's variables.
    ConditionalExpectation {
        targets: Vec<usize>,
        given: Vec<(usize, u32)>,
    },
    Functional(Functional),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Scalar(f64),
    Vector(Vec<f64>),
    Parameter(Theta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// 1-based query index.
    pub k: u64,
    pub query: Query,
    /// Full-precision sampled parameter, kept so the log can be replayed.
    pub theta: Theta,
    pub answer: Answer,
}

/// One line of an exported transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub k: u64,
    pub query: Query,
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Theta>,
}

/// An open posterior sampling session. Answers are produced one at a time;
/// the log order is the query order.
#[derive(Debug, Clone)]
pub struct QuerySession {
    family: FamilyPrior,
    posterior: Posterior,
    rng: RngStream,
    log: Vec<LogEntry>,
}

pub const SESSION_STREAM: &str = "session";

pub fn open_session(fp: &FamilyPrior, x: &Dataset, seed: u64) -> Result<QuerySession> {
    Ok(QuerySession {
        family: fp.clone(),
        posterior: posterior(fp, x)?,
        rng: rng::stream(seed, SESSION_STREAM, 0),
        log: Vec::new(),
    })
}

/// Session over an already computed `ξ(·|x)`; callers guarantee that
/// `posterior` belongs to `fp`.
pub(crate) fn session_from_posterior(fp: &FamilyPrior, posterior: Posterior, seed: u64) -> QuerySession {
    QuerySession {
        family: fp.clone(),
        posterior,
        rng: rng::stream(seed, SESSION_STREAM, 0),
        log: Vec::new(),
    }
}

impl QuerySession {
    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn family(&self) -> &FamilyPrior {
        &self.family
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Draw a fresh `θ_k` and answer `query` with it.
    pub fn answer(&mut self, query: &Query) -> Result<Answer> {
        validate_query(&self.family, query)?;
        let theta = self.posterior.sample(&mut self.rng);
        let answer = evaluate(&self.family, query, &theta)?;
        self.log.push(LogEntry {
            k: self.log.len() as u64 + 1,
            query: query.clone(),
            theta,
            answer: answer.clone(),
        });
        Ok(answer)
    }

    /// Answer an identity query, returning the sampled parameter directly.
    pub fn sample_identity(&mut self) -> Result<Theta> {
        match self.answer(&Query::Identity)? {
            Answer::Parameter(t) => Ok(t),
            other => unreachable!("identity query answered with {other:?}"),
        }
    }

    /// Number of further queries that keep datasets farther apart than
    /// `rho_target` indistinguishable at confidence `delta`.
    pub fn budget_check(
        &self,
        cert: &SmoothnessCertificate,
        rho_target: f64,
        delta: f64,
    ) -> Result<BudgetCheck> {
        Ok(BudgetCheck {
            max_safe_queries: max_safe_queries(cert, rho_target, delta)?,
            queries_answered: self.log.len() as u64,
        })
    }

    /// JSON-lines transcript; the seed and dataset are never included, and
    /// sampled parameters only on request.
    pub fn transcript_jsonl(&self, include_theta: bool) -> String {
        let mut out = String::new();
        for entry in &self.log {
            let record = TranscriptRecord {
                k: entry.k,
                query: entry.query.clone(),
                answer: entry.answer.clone(),
                theta: include_theta.then(|| entry.theta.clone()),
            };
            out.push_str(&serde_json::to_string(&record).expect("transcript records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub max_safe_queries: u64,
    pub queries_answered: u64,
}

/// Re-run `queries` in a fresh session with the same inputs.
pub fn replay(fp: &FamilyPrior, x: &Dataset, seed: u64, queries: &[Query]) -> Result<Vec<Answer>> {
    let mut session = open_session(fp, x, seed)?;
    queries.iter().map(|q| session.answer(q)).collect()
}

fn validate_query(fp: &FamilyPrior, query: &Query) -> Result<()> {
    match query {
        Query::Identity => Ok(()),
        Query::ConditionalExpectation { targets, given } => {
            let FamilyPrior::DiscreteBayesNet(net) = fp else {
                return Err(Error::Unsupported(format!(
                    "conditional expectation on {}, which has no coordinate structure",
                    fp.name()
                )));
            };
            if targets.is_empty() {
                return Err(Error::InvalidArgument("no target coordinates".into()));
            }
            for &t in targets {
                if t >= net.n_vars() {
                    return Err(Error::InvalidArgument(format!("target {t} out of range")));
                }
            }
            for &(z, v) in given {
                if z >= net.n_vars() || v as usize >= net.alphabets[z] {
                    return Err(Error::InvalidArgument(format!(
                        "conditioning value {v} for variable {z} outside its alphabet"
                    )));
                }
                if targets.contains(&z) {
                    return Err(Error::InvalidArgument(format!(
                        "variable {z} is both a target and conditioned on"
                    )));
                }
            }
            Ok(())
        }
        Query::Functional(_) => match fp {
            FamilyPrior::DiscreteBayesNet(_) => Err(Error::Unsupported(
                "functional queries on a Bayesian network; use conditional expectations".into(),
            )),
            _ => Ok(()),
        },
    }
}

fn evaluate(fp: &FamilyPrior, query: &Query, theta: &Theta) -> Result<Answer> {
    match query {
        Query::Identity => Ok(Answer::Parameter(theta.clone())),
        Query::ConditionalExpectation { targets, given } => {
            let (FamilyPrior::DiscreteBayesNet(net), Theta::Tables(tables)) = (fp, theta) else {
                unreachable!("validated query")
            };
            let values = conditional_expectation(net, tables, targets, given);
            Ok(if values.len() == 1 {
                Answer::Scalar(values[0])
            } else {
                Answer::Vector(values)
            })
        }
        Query::Functional(f) => Ok(Answer::Scalar(functional(fp, theta, *f))),
    }
}

/// `E[x_t | x_Z = values]` for each target `t`, where `x_t` is the symbol
/// index, by enumeration of the joint distribution.
pub fn conditional_expectation(
    net: &crate::families::BayesNet,
    tables: &Tables,
    targets: &[usize],
    given: &[(usize, u32)],
) -> Vec<f64> {
    let mut mass = 0.0;
    let mut sums = vec![0.0; targets.len()];
    for obs in net.outcomes() {
        if given.iter().any(|&(z, v)| obs[z] != v) {
            continue;
        }
        let p = net.log_prob(tables, &obs).exp();
        mass += p;
        for (s, &t) in sums.iter_mut().zip(targets) {
            *s += p * f64::from(obs[t]);
        }
    }
    sums.into_iter().map(|s| s / mass).collect()
}

fn functional(fp: &FamilyPrior, theta: &Theta, f: Functional) -> f64 {
    match (fp, theta) {
        (FamilyPrior::ExponentialRate { .. }, Theta::Scalar(rate)) => match f {
            Functional::Mean => 1.0 / rate,
            Functional::Variance => 1.0 / (rate * rate),
            Functional::TailProbability { threshold } => {
                if threshold < 0.0 {
                    1.0
                } else {
                    (-rate * threshold).exp()
                }
            }
        },
        (FamilyPrior::LaplaceScale { location, .. }, Theta::Scalar(inv_scale)) => match f {
            Functional::Mean => *location,
            Functional::Variance => 2.0 / (inv_scale * inv_scale),
            Functional::TailProbability { threshold } => {
                let z = inv_scale * (threshold - location);
                if z >= 0.0 {
                    0.5 * (-z).exp()
                } else {
                    1.0 - 0.5 * z.exp()
                }
            }
        },
        (FamilyPrior::BetaBinomial { trials, .. }, Theta::Scalar(p)) => {
            let n = f64::from(*trials);
            match f {
                Functional::Mean => n * p,
                Functional::Variance => n * p * (1.0 - p),
                Functional::TailProbability { threshold } => (0..=*trials)
                    .filter(|&k| f64::from(k) > threshold)
                    .map(|k| {
                        (ln_choose(*trials, k)
                            + crate::special::xlogy(f64::from(k), *p)
                            + crate::special::xlogy(f64::from(trials - k), 1.0 - p))
                        .exp()
                    })
                    .sum(),
            }
        }
        (
            FamilyPrior::NormalVariance {
                mean, prior_on, ..
            },
            Theta::Scalar(t),
        ) => {
            let variance = match prior_on {
                NormalPrior::Precision => 1.0 / t,
                NormalPrior::Variance => *t,
            };
            match f {
                Functional::Mean => *mean,
                Functional::Variance => variance,
                Functional::TailProbability { threshold } => {
                    let z = (threshold - mean) / (2.0 * variance).sqrt();
                    0.5 * statrs::function::erf::erfc(z)
                }
            }
        }
        (FamilyPrior::FiniteTheta(fam), Theta::Index(j)) => {
            let row = &fam.likelihoods[*j];
            let mean: f64 = row.iter().enumerate().map(|(o, p)| o as f64 * p).sum();
            match f {
                Functional::Mean => mean,
                Functional::Variance => row
                    .iter()
                    .enumerate()
                    .map(|(o, p)| p * (o as f64 - mean).powi(2))
                    .sum(),
                Functional::TailProbability { threshold } => row
                    .iter()
                    .enumerate()
                    .filter(|(o, _)| *o as f64 > threshold)
                    .map(|(_, p)| p)
                    .sum(),
            }
        }
        _ => unreachable!("validated query"),
    }
}
