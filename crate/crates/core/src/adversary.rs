//! A strong adversary that rebuilds the posterior from sampled answers and
//! decides which candidate dataset produced them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    certificate, distinguishability_threshold, empirical_l1_bound, lift_iid, max_partition_size,
};
use crate::error::{Error, Result};
use crate::families::{posterior, FamilyPrior, Posterior, PosteriorRepr, Theta};
use crate::mechanism::session_from_posterior;
use crate::metrics::{distance, Dataset};
use crate::rng::{self, derive_seed};

/// L1 distances closer than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Disjoint cells covering the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// Cells `(-∞, b₀), [b₀, b₁), …, [b_{m-2}, ∞)` for strictly increasing
    /// breakpoints `b`.
    Intervals { breakpoints: Vec<f64> },
    /// Index sets over a finite parameter space.
    IndexSets { cells: Vec<Vec<usize>> },
}

impl Partition {
    pub fn intervals(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidArgument("a partition needs at least 2 cells".into()));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        Ok(Partition::Intervals { breakpoints })
    }

    /// Index-set partition of `{0, …, n_points - 1}`.
    pub fn index_sets(cells: Vec<Vec<usize>>, n_points: usize) -> Result<Self> {
        if cells.len() < 2 {
            return Err(Error::InvalidArgument("a partition needs at least 2 cells".into()));
        }
        let mut seen = vec![false; n_points];
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::InvalidArgument("empty partition cell".into()));
            }
            for &i in cell {
                match seen.get_mut(i) {
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "index {i} outside a {n_points}-point space"
                        )))
                    }
                    Some(true) => {
                        return Err(Error::InvalidArgument(format!("index {i} in two cells")))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("index {missing} is in no cell")));
        }
        Ok(Partition::IndexSets { cells })
    }

    pub fn len(&self) -> usize {
        match self {
            Partition::Intervals { breakpoints } => breakpoints.len() + 1,
            Partition::IndexSets { cells } => cells.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_of(&self, theta: &Theta) -> Result<usize> {
        let outside = || Error::SampleOutsidePartition(format!("{theta:?}"));
        match (self, theta) {
            (Partition::Intervals { breakpoints }, Theta::Scalar(t)) if !t.is_nan() => {
                Ok(breakpoints.partition_point(|b| b <= t))
            }
            (Partition::IndexSets { cells }, Theta::Index(i)) => {
                cells.iter().position(|c| c.contains(i)).ok_or_else(outside)
            }
            _ => Err(outside()),
        }
    }
}

/// Cell frequencies of `samples`.
pub fn empirical_distribution(samples: &[Theta], partition: &Partition) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut counts = vec![0u64; partition.len()];
    for s in samples {
        counts[partition.cell_of(s)?] += 1;
    }
    let n = samples.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Exact posterior mass of every cell.
pub fn cell_masses(p: &Posterior, partition: &Partition) -> Result<Vec<f64>> {
    match (partition, &p.repr) {
        (Partition::IndexSets { cells }, PosteriorRepr::FiniteWeights { weights }) => {
            if cells.iter().flatten().any(|&i| i >= weights.len()) {
                return Err(Error::InvalidArgument(
                    "partition indexes points outside the posterior's support".into(),
                ));
            }
            Ok(cells.iter().map(|c| c.iter().map(|&i| weights[i]).sum()).collect())
        }
        (Partition::Intervals { breakpoints }, _) => {
            let mut cdfs = Vec::with_capacity(breakpoints.len() + 2);
            cdfs.push(0.0);
            for &b in breakpoints {
                cdfs.push(p.cdf(b)?);
            }
            cdfs.push(1.0);
            Ok(cdfs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
        }
        (Partition::IndexSets { .. }, _) => Err(Error::Unsupported(format!(
            "index-set partition of a {} posterior",
            p.kind_name()
        ))),
    }
}

/// `m` cells of (as near as possible) equal mass under `p`.
pub fn equal_mass_partition(p: &Posterior, m: usize) -> Result<Partition> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("partition size {m} below 2")));
    }
    match &p.repr {
        PosteriorRepr::FiniteWeights { weights } => {
            if weights.len() < m {
                return Err(Error::InvalidArgument(format!(
                    "{m} cells over {} parameter points",
                    weights.len()
                )));
            }
            let mut cells = vec![Vec::new(); m];
            let mut before = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                let cell = ((before + 0.5 * w) * m as f64).floor() as usize;
                cells[cell.min(m - 1)].push(i);
                before += w;
            }
            cells.retain(|c| !c.is_empty());
            if cells.len() < 2 {
                // Mass concentrated on one point; split by count instead.
                let per = weights.len().div_ceil(m);
                cells = (0..weights.len())
                    .collect::<Vec<_>>()
                    .chunks(per)
                    .map(<[usize]>::to_vec)
                    .collect();
            }
            Partition::index_sets(cells, weights.len())
        }
        PosteriorRepr::Dirichlet { .. } => Err(Error::Unsupported(
            "partitions of multi-dimensional parameter spaces".into(),
        )),
        _ => {
            let mut breakpoints = Vec::with_capacity(m - 1);
            for i in 1..m {
                let q = p.quantile(i as f64 / m as f64)?;
                if breakpoints.last().is_none_or(|&b| q > b) {
                    breakpoints.push(q);
                }
            }
            Partition::intervals(breakpoints)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    Lowest,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub guess: usize,
    pub l1_to_candidates: Vec<f64>,
    pub n_used: u64,
    pub tie: bool,
    /// `None` without a known truth, or on a tie broken to the lowest index.
    pub success: Option<bool>,
}

/// Candidate posteriors restricted to a fixed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Adversary {
    partition: Partition,
    candidate_masses: Vec<Vec<f64>>,
}

impl Adversary {
    pub fn new(candidates: &[(FamilyPrior, Dataset)], partition: Partition) -> Result<Self> {
        let posteriors = candidates
            .iter()
            .map(|(fp, x)| posterior(fp, x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_posteriors(&posteriors, partition)
    }

    pub fn from_posteriors(posteriors: &[Posterior], partition: Partition) -> Result<Self> {
        if posteriors.is_empty() {
            return Err(Error::InvalidArgument("no candidates".into()));
        }
        let candidate_masses = posteriors
            .iter()
            .map(|p| cell_masses(p, &partition))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            partition,
            candidate_masses,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn candidate_masses(&self) -> &[Vec<f64>] {
        &self.candidate_masses
    }

    /// Draw `n` answers from `oracle` and pick the candidate whose restricted
    /// posterior is L1-nearest to their empirical distribution.
    pub fn attack<F, R>(
        &self,
        mut oracle: F,
        n: u64,
        tie_break: TieBreak,
        rng: &mut R,
        truth: Option<usize>,
    ) -> Result<AttackResult>
    where
        F: FnMut() -> Result<Theta>,
        R: Rng + ?Sized,
    {
        if n == 0 {
            return Err(Error::InvalidArgument("the adversary needs at least one sample".into()));
        }
        let samples = (0..n).map(|_| oracle()).collect::<Result<Vec<_>>>()?;
        let empirical = empirical_distribution(&samples, &self.partition)?;
        let l1: Vec<f64> = self
            .candidate_masses
            .iter()
            .map(|masses| masses.iter().zip(&empirical).map(|(p, q)| (p - q).abs()).sum())
            .collect();
        let best = l1.iter().copied().fold(f64::INFINITY, f64::min);
        let nearest: Vec<usize> =
            (0..l1.len()).filter(|&i| l1[i] - best <= TIE_TOLERANCE).collect();
        let tie = nearest.len() > 1;
        let guess = match tie_break {
            TieBreak::Random if tie => nearest[rng.random_range(0..nearest.len())],
            _ => nearest[0],
        };
        let success = match (truth, tie, tie_break) {
            (_, true, TieBreak::Lowest) | (None, _, _) => None,
            (Some(t), _, _) => Some(guess == t),
        };
        Ok(AttackResult {
            guess,
            l1_to_candidates: l1,
            n_used: n,
            tie,
            success,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: u64,
    pub delta: f64,
    pub trials: u64,
    /// Defaults to the largest size admissible at `delta`.
    pub partition_size: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub family: String,
    pub rho: f64,
    pub n: u64,
    pub delta: f64,
    pub threshold: f64,
    pub empirical_success: f64,
    pub trials: u64,
    pub partition_size: usize,
    pub ties: u64,
}

impl ExperimentResult {
    pub const CSV_HEADER: &'static str = "family,rho,n,delta,threshold,empirical_success,trials";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.family, self.rho, self.n, self.delta, self.threshold, self.empirical_success, self.trials
        )
    }
}

/// Attack a posterior sampling session on `x` with candidates `(x, y)`,
/// `trials` times, and report the success rate next to `ρ(x, y)` and the
/// distinguishability threshold.
pub fn threshold_experiment(
    fp: &FamilyPrior,
    x: &Dataset,
    y: &Dataset,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut cert = certificate(fp)?.into_valid()?;
    if x.len() > 1 {
        cert = lift_iid(&cert, x.len() as u64, None)?;
    }
    let rho = distance(&cert.metric, x, y)?;
    let threshold = distinguishability_threshold(&cert, config.n, config.delta)?.rho_threshold;

    let m = config
        .partition_size
        .unwrap_or_else(|| max_partition_size(config.delta));
    let post_x = posterior(fp, x)?;
    let post_y = posterior(fp, y)?;
    let partition = equal_mass_partition(&post_x, m)?;
    let adversary = Adversary::from_posteriors(&[post_x.clone(), post_y], partition)?;

    let outcomes = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let mut session =
                session_from_posterior(fp, post_x.clone(), derive_seed(config.seed, "attack-trial", i));
            let mut tie_rng = rng::stream(config.seed, "attack-tie", i);
            adversary.attack(
                || session.sample_identity(),
                config.n,
                TieBreak::Random,
                &mut tie_rng,
                Some(0),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let wins = outcomes.iter().filter(|r| r.success == Some(true)).count();
    let ties = outcomes.iter().filter(|r| r.tie).count();
    Ok(ExperimentResult {
        family: fp.name().into(),
        rho,
        n: config.n,
        delta: config.delta,
        threshold,
        empirical_success: wins as f64 / config.trials as f64,
        trials: config.trials,
        partition_size: adversary.partition().len(),
        ties: ties as u64,
    })
}

/// Fraction of `trials` multinomial samples of size `n` from `probs` whose
/// empirical distribution lies farther than the L1 bound from `probs`.
pub fn empirical_bound_violation_rate(
    probs: &[f64],
    n: u64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("probs must be a probability vector".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let bound = empirical_l1_bound(n, delta, probs.len())?;
    let violations: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, "multinomial-trial", i);
            let mut counts = vec![0u64; probs.len()];
            for _ in 0..n {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut cell = probs.len() - 1;
                for (j, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        cell = j;
                        break;
                    }
                }
                counts[cell] += 1;
            }
            let l1: f64 = counts
                .iter()
                .zip(probs)
                .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
                .sum();
            u64::from(l1 > bound)
        })
        .sum();
    Ok(violations as f64 / trials as f64)
}
