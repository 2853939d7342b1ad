//! Discrete Bayesian networks with Dirichlet priors on each conditional
//! probability table row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conditional probability tables indexed `[variable][parent configuration][value]`.
pub type Tables = Vec<Vec<Vec<f64>>>;

/// Network structure plus a Dirichlet prior per table row. Variables must be
/// listed in topological order: every parent index is smaller than its child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesNet {
    pub alphabets: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    /// Dirichlet pseudo-counts, same shape as [`Tables`].
    pub pseudo_counts: Tables,
    /// Floor on every served conditional probability.
    pub epsilon_min: f64,
}

impl BayesNet {
    /// Symmetric Dirichlet(`concentration`) prior on every row.
    pub fn with_uniform_prior(
        alphabets: Vec<usize>,
        parents: Vec<Vec<usize>>,
        concentration: f64,
        epsilon_min: f64,
    ) -> Result<Self> {
        let pseudo_counts = (0..alphabets.len())
            .map(|k| {
                let rows: usize = parents
                    .get(k)
                    .map(|ps| ps.iter().map(|&p| alphabets.get(p).copied().unwrap_or(1)).product())
                    .unwrap_or(1);
                vec![vec![concentration; alphabets[k]]; rows]
            })
            .collect();
        let net = Self {
            alphabets,
            parents,
            pseudo_counts,
            epsilon_min,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let k_vars = self.alphabets.len();
        if k_vars == 0 {
            return Err(Error::InvalidParameter("network has no variables".into()));
        }
        if self.parents.len() != k_vars || self.pseudo_counts.len() != k_vars {
            return Err(Error::InvalidParameter(
                "alphabets, parents and pseudo_counts must have one entry per variable".into(),
            ));
        }
        if !(self.epsilon_min > 0.0) {
            return Err(Error::InvalidParameter("epsilon_min must be positive".into()));
        }
        for k in 0..k_vars {
            let r = self.alphabets[k];
            if r < 2 {
                return Err(Error::InvalidParameter(format!("variable {k} needs at least 2 values")));
            }
            if self.epsilon_min * r as f64 > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "epsilon_min {} infeasible for a {r}-valued variable",
                    self.epsilon_min
                )));
            }
            for &p in &self.parents[k] {
                if p >= k {
                    return Err(Error::InvalidParameter(format!(
                        "parent {p} of variable {k} breaks topological order"
                    )));
                }
            }
            let rows = &self.pseudo_counts[k];
            if rows.len() != self.n_rows(k) {
                return Err(Error::InvalidParameter(format!(
                    "variable {k} has {} rows, expected {}",
                    rows.len(),
                    self.n_rows(k)
                )));
            }
            for row in rows {
                if row.len() != r || row.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "variable {k} has a malformed pseudo-count row"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.alphabets.len()
    }

    pub fn n_rows(&self, k: usize) -> usize {
        self.parents[k].iter().map(|&p| self.alphabets[p]).product()
    }

    /// Row of variable `k`'s table selected by the parents' values in `obs`.
    pub fn row_index(&self, k: usize, obs: &[u32]) -> usize {
        self.parents[k]
            .iter()
            .fold(0, |acc, &p| acc * self.alphabets[p] + obs[p] as usize)
    }

    /// Number of parents plus number of children.
    pub fn degree(&self, k: usize) -> usize {
        let children = self.parents.iter().filter(|ps| ps.contains(&k)).count();
        self.parents[k].len() + children
    }

    /// Coordinate weights `v_k = 1 + deg(k)` of the network's dataset metric.
    pub fn metric_weights(&self) -> Vec<f64> {
        (0..self.n_vars()).map(|k| 1.0 + self.degree(k) as f64).collect()
    }

    pub fn check_observation(&self, obs: &[u32]) -> Result<()> {
        if obs.len() != self.n_vars() {
            return Err(Error::IncompatibleObservations(format!(
                "observation of arity {} for a {}-variable network",
                obs.len(),
                self.n_vars()
            )));
        }
        for (k, (&v, &r)) in obs.iter().zip(&self.alphabets).enumerate() {
            if v as usize >= r {
                return Err(Error::IncompatibleObservations(format!(
                    "value {v} of variable {k} outside its {r}-symbol alphabet"
                )));
            }
        }
        Ok(())
    }

    /// Every joint outcome, in lexicographic order.
    pub fn outcomes(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for &r in &self.alphabets {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..r as u32).map(move |v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        out
    }

    pub fn check_tables(&self, tables: &Tables) -> Result<()> {
        let shape_ok = tables.len() == self.n_vars()
            && tables.iter().enumerate().all(|(k, rows)| {
                rows.len() == self.n_rows(k) && rows.iter().all(|r| r.len() == self.alphabets[k])
            });
        if !shape_ok {
            return Err(Error::ParameterOutOfSpace("table shape does not match the network".into()));
        }
        for row in tables.iter().flatten() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::ParameterOutOfSpace(format!("table row sums to {total}")));
            }
            if row.iter().any(|&p| p < self.epsilon_min * (1.0 - 1e-9)) {
                return Err(Error::ParameterOutOfSpace(format!(
                    "table entry below epsilon_min {}",
                    self.epsilon_min
                )));
            }
        }
        Ok(())
    }

    pub fn log_prob(&self, tables: &Tables, obs: &[u32]) -> f64 {
        (0..self.n_vars())
            .map(|k| tables[k][self.row_index(k, obs)][obs[k] as usize].ln())
            .sum()
    }

    /// Prior pseudo-counts plus the per-row value counts of `data`.
    pub fn posterior_counts(&self, data: &[&[u32]]) -> Tables {
        let mut counts = self.pseudo_counts.clone();
        for obs in data {
            for k in 0..self.n_vars() {
                counts[k][self.row_index(k, obs)][obs[k] as usize] += 1.0;
            }
        }
        counts
    }

    /// Row-normalized means of `counts`, floored at `epsilon_min`.
    pub fn floored_means(&self, counts: &Tables) -> Tables {
        counts
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| {
                        let total: f64 = row.iter().sum();
                        let mean: Vec<f64> = row.iter().map(|a| a / total).collect();
                        floor_and_renormalize(&mean, self.epsilon_min)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Raise entries below `floor` to `floor` and rescale the rest so the row
/// still sums to one. Requires `floor * row.len() <= 1`.
pub fn floor_and_renormalize(row: &[f64], floor: f64) -> Vec<f64> {
    let mut pinned = vec![false; row.len()];
    loop {
        let pinned_mass = floor * pinned.iter().filter(|&&p| p).count() as f64;
        let free_mass: f64 = row
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(v, _)| v)
            .sum();
        let scale = if free_mass > 0.0 {
            (1.0 - pinned_mass) / free_mass
        } else {
            0.0
        };
        let out: Vec<f64> = row
            .iter()
            .zip(&pinned)
            .map(|(&v, &p)| if p { floor } else { v * scale })
            .collect();
        let mut changed = false;
        for (i, &v) in out.iter().enumerate() {
            if !pinned[i] && v < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> BayesNet {
        BayesNet::with_uniform_prior(vec![2, 2, 2], vec![vec![], vec![0], vec![1]], 1.0, 0.1)
            .unwrap()
    }

    #[test]
    fn degrees_and_weights() {
        let net = chain();
        assert_eq!(net.metric_weights(), vec![2.0, 3.0, 2.0]);
        assert_eq!(net.n_rows(0), 1);
        assert_eq!(net.n_rows(2), 2);
        assert_eq!(net.outcomes().len(), 8);
    }

    #[test]
    fn rejects_cycles_and_bad_floor() {
        assert!(BayesNet::with_uniform_prior(vec![2, 2], vec![vec![1], vec![]], 1.0, 0.1).is_err());
        assert!(BayesNet::with_uniform_prior(vec![3], vec![vec![]], 1.0, 0.4).is_err());
    }

    #[test]
    fn floor_keeps_rows_normalized() {
        let row = floor_and_renormalize(&[0.01, 0.04, 0.95], 0.1);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&v| v >= 0.1 - 1e-15));
        assert_eq!(row[0], 0.1);
        assert_eq!(row[1], 0.1);
        let untouched = floor_and_renormalize(&[0.3, 0.7], 0.1);
        assert_eq!(untouched, vec![0.3, 0.7]);
    }

    #[test]
    fn observation_validation() {
        let net = chain();
        assert!(net.check_observation(&[0, 1, 1]).is_ok());
        assert!(net.check_observation(&[0, 2, 1]).is_err());
        assert!(net.check_observation(&[0, 1]).is_err());
    }
}
