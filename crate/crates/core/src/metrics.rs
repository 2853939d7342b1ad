//! Observations, datasets, pseudo-metrics on datasets and the absolute
//! log-ratio distance on densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single observation: a real scalar or a tuple of categorical symbol
/// indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Scalar(f64),
    Categorical(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Scalar,
    Categorical { arity: usize },
}

impl Observation {
    pub fn kind(&self) -> ObservationKind {
        match self {
            Observation::Scalar(_) => ObservationKind::Scalar,
            Observation::Categorical(c) => ObservationKind::Categorical { arity: c.len() },
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Observation::Scalar(v) => Some(*v),
            Observation::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u32]> {
        match self {
            Observation::Scalar(_) => None,
            Observation::Categorical(c) => Some(c),
        }
    }
}

/// An ordered, homogeneous sequence of observations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Observation>", into = "Vec<Observation>")]
pub struct Dataset {
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let mut kind = None;
        for (i, obs) in observations.iter().enumerate() {
            if let Observation::Scalar(v) = obs {
                if !v.is_finite() {
                    return Err(Error::IncompatibleObservations(format!(
                        "observation {i} is not finite"
                    )));
                }
            }
            match kind {
                None => kind = Some(obs.kind()),
                Some(k) if k != obs.kind() => {
                    return Err(Error::IncompatibleObservations(format!(
                        "observation {i} has kind {:?}, expected {k:?}",
                        obs.kind()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Self { observations })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn scalars(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(values.into_iter().map(Observation::Scalar).collect())
    }

    pub fn categorical(rows: impl IntoIterator<Item = Vec<u32>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Observation::Categorical).collect())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    /// `None` for the empty dataset.
    pub fn kind(&self) -> Option<ObservationKind> {
        self.observations.first().map(Observation::kind)
    }

    /// The scalar values, or an error if the dataset is categorical.
    pub fn scalar_values(&self) -> Result<Vec<f64>> {
        self.observations
            .iter()
            .map(|o| {
                o.as_scalar().ok_or_else(|| {
                    Error::IncompatibleObservations("expected scalar observations".into())
                })
            })
            .collect()
    }

    pub fn categorical_values(&self) -> Result<Vec<&[u32]>> {
        self.observations
            .iter()
            .map(|o| {
                o.as_categorical().ok_or_else(|| {
                    Error::IncompatibleObservations("expected categorical observations".into())
                })
            })
            .collect()
    }

    /// Copy with observation `index` replaced.
    pub fn with_replaced(&self, index: usize, obs: Observation) -> Result<Self> {
        let mut observations = self.observations.clone();
        let slot = observations
            .get_mut(index)
            .ok_or_else(|| Error::InvalidArgument(format!("index {index} out of range")))?;
        *slot = obs;
        Self::new(observations)
    }
}

impl TryFrom<Vec<Observation>> for Dataset {
    type Error = Error;
    fn try_from(observations: Vec<Observation>) -> Result<Self> {
        Self::new(observations)
    }
}

impl From<Dataset> for Vec<Observation> {
    fn from(d: Dataset) -> Self {
        d.observations
    }
}

/// Pseudo-metrics on datasets. Multi-element datasets are compared
/// element-wise and the per-element distances summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum PseudoMetric {
    /// Number of positions whose observations differ.
    Hamming,
    /// `Σ |x_i - y_i|` on scalars.
    AbsDiffSum,
    /// `Σ |x_i² - y_i²| + 2|x_i - y_i|` on scalars.
    NormalMetric,
    /// `Σ_t Σ_k v_k 1[x_{t,k} ≠ y_{t,k}]` on categorical tuples.
    WeightedCategorical { weights: Vec<f64> },
}

impl PseudoMetric {
    pub fn name(&self) -> &'static str {
        match self {
            PseudoMetric::Hamming => "hamming",
            PseudoMetric::AbsDiffSum => "abs_diff_sum",
            PseudoMetric::NormalMetric => "normal_metric",
            PseudoMetric::WeightedCategorical { .. } => "weighted_categorical",
        }
    }

    /// Distance between two single observations.
    pub fn observation_distance(&self, a: &Observation, b: &Observation) -> Result<f64> {
        if a.kind() != b.kind() {
            return Err(Error::IncompatibleObservations(format!(
                "{:?} vs {:?}",
                a.kind(),
                b.kind()
            )));
        }
        match (self, a, b) {
            (PseudoMetric::Hamming, _, _) => Ok(if a == b { 0.0 } else { 1.0 }),
            (PseudoMetric::AbsDiffSum, Observation::Scalar(x), Observation::Scalar(y)) => {
                Ok((x - y).abs())
            }
            (PseudoMetric::NormalMetric, Observation::Scalar(x), Observation::Scalar(y)) => {
                Ok((x * x - y * y).abs() + 2.0 * (x - y).abs())
            }
            (
                PseudoMetric::WeightedCategorical { weights },
                Observation::Categorical(x),
                Observation::Categorical(y),
            ) => {
                if weights.len() != x.len() {
                    return Err(Error::IncompatibleObservations(format!(
                        "{} weights for arity-{} observations",
                        weights.len(),
                        x.len()
                    )));
                }
                Ok(weights
                    .iter()
                    .zip(x.iter().zip(y))
                    .filter(|(_, (xk, yk))| xk != yk)
                    .map(|(w, _)| w)
                    .sum())
            }
            _ => Err(Error::IncompatibleObservations(format!(
                "metric {} cannot compare {:?} observations",
                self.name(),
                a.kind()
            ))),
        }
    }
}

/// `ρ(x, y)` for equal-length datasets.
pub fn distance(metric: &PseudoMetric, x: &Dataset, y: &Dataset) -> Result<f64> {
    product_metric(metric, x, y)
}

/// Lifted metric `ρⁿ({x_i}, {y_i}) = Σ ρ(x_i, y_i)`.
pub fn product_metric(base: &PseudoMetric, xs: &Dataset, ys: &Dataset) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    xs.iter()
        .zip(ys.iter())
        .map(|(a, b)| base.observation_distance(a, b))
        .sum()
}

/// Absolute log-ratio `|ln(a/b)|`, with `0` for `a = b = 0` and `+∞` when
/// exactly one argument is zero.
pub fn log_ratio(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("log_ratio of NaN".into()));
    }
    if a < 0.0 {
        return Err(Error::NegativeInput(a));
    }
    if b < 0.0 {
        return Err(Error::NegativeInput(b));
    }
    Ok(match (a == 0.0, b == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        (false, false) => (a.ln() - b.ln()).abs(),
    })
}

/// Log-ratio from log densities; avoids underflow for products of many terms.
pub fn log_ratio_from_logs(log_a: f64, log_b: f64) -> f64 {
    match (log_a == f64::NEG_INFINITY, log_b == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        (false, false) => (log_a - log_b).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat(rows: &[&[u32]]) -> Dataset {
        Dataset::categorical(rows.iter().map(|r| r.to_vec())).unwrap()
    }

    #[test]
    fn hamming_counts_differing_observations() {
        let x = cat(&[&[0], &[1], &[2]]);
        let y = cat(&[&[0], &[1], &[3]]);
        assert_eq!(distance(&PseudoMetric::Hamming, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn normal_metric_single_scalars() {
        let x = Dataset::scalars([1.0]).unwrap();
        let y = Dataset::scalars([2.0]).unwrap();
        assert_eq!(distance(&PseudoMetric::NormalMetric, &x, &y).unwrap(), 5.0);
    }

    #[test]
    fn weighted_categorical_uses_coordinate_weight() {
        let m = PseudoMetric::WeightedCategorical {
            weights: vec![2.0, 1.0],
        };
        let x = cat(&[&[0, 1]]);
        let y = cat(&[&[1, 1]]);
        assert_eq!(distance(&m, &x, &y).unwrap(), 2.0);
    }

    #[test]
    fn product_metric_sums_elements() {
        let x = Dataset::scalars([1.0, 2.0, 3.0]).unwrap();
        let y = Dataset::scalars([1.0, 3.0, 5.0]).unwrap();
        assert_eq!(product_metric(&PseudoMetric::AbsDiffSum, &x, &y).unwrap(), 3.0);
        assert_eq!(product_metric(&PseudoMetric::AbsDiffSum, &x, &x).unwrap(), 0.0);
        let y1 = x.with_replaced(1, Observation::Scalar(9.0)).unwrap();
        assert_eq!(product_metric(&PseudoMetric::Hamming, &x, &y1).unwrap(), 1.0);
    }

    #[test]
    fn unequal_lengths_rejected() {
        let x = Dataset::scalars([1.0]).unwrap();
        let y = Dataset::scalars([1.0, 2.0]).unwrap();
        assert_eq!(
            distance(&PseudoMetric::AbsDiffSum, &x, &y),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn incompatible_kinds_rejected() {
        assert!(Dataset::new(vec![Observation::Scalar(1.0), Observation::Categorical(vec![0])])
            .is_err());
        let x = Dataset::scalars([1.0]).unwrap();
        let y = cat(&[&[0]]);
        assert!(distance(&PseudoMetric::Hamming, &x, &y).is_err());
        assert!(distance(&PseudoMetric::AbsDiffSum, &y, &y).is_err());
        assert!(Dataset::scalars([f64::NAN]).is_err());
    }

    #[test]
    fn log_ratio_cases() {
        assert_eq!(log_ratio(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(log_ratio(0.0, 0.0).unwrap(), 0.0);
        assert!((log_ratio(2.0, 2.0 * std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(log_ratio(0.0, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(log_ratio(1.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(log_ratio(-1.0, 1.0), Err(Error::NegativeInput(-1.0)));
    }

    fn scalar_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|n| {
            let v = || proptest::collection::vec(-50.0f64..50.0, n);
            (v(), v(), v())
        })
    }

    fn cat_triple() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<Vec<u32>>, Vec<Vec<u32>>)> {
        (1usize..6).prop_flat_map(|n| {
            let v = || proptest::collection::vec(proptest::collection::vec(0u32..3, 3), n);
            (v(), v(), v())
        })
    }

    fn check_axioms(m: &PseudoMetric, x: &Dataset, y: &Dataset, z: &Dataset) {
        let dxy = distance(m, x, y).unwrap();
        let dyx = distance(m, y, x).unwrap();
        let dxz = distance(m, x, z).unwrap();
        let dyz = distance(m, y, z).unwrap();
        assert!(dxy >= 0.0);
        assert_eq!(dxy, dyx);
        assert_eq!(distance(m, x, x).unwrap(), 0.0);
        assert!(dxz <= dxy + dyz + 1e-9 * (1.0 + dxz));
    }

    proptest! {
        #[test]
        fn scalar_metrics_are_pseudo_metrics((a, b, c) in scalar_triple()) {
            let (x, y, z) = (
                Dataset::scalars(a).unwrap(),
                Dataset::scalars(b).unwrap(),
                Dataset::scalars(c).unwrap(),
            );
            for m in [PseudoMetric::Hamming, PseudoMetric::AbsDiffSum, PseudoMetric::NormalMetric] {
                check_axioms(&m, &x, &y, &z);
            }
        }

        #[test]
        fn categorical_metrics_are_pseudo_metrics((a, b, c) in cat_triple()) {
            let (x, y, z) = (
                Dataset::categorical(a).unwrap(),
                Dataset::categorical(b).unwrap(),
                Dataset::categorical(c).unwrap(),
            );
            check_axioms(&PseudoMetric::Hamming, &x, &y, &z);
            check_axioms(
                &PseudoMetric::WeightedCategorical { weights: vec![1.0, 2.0, 3.0] },
                &x, &y, &z,
            );
        }

        #[test]
        fn log_ratio_is_a_metric_on_positive_reals(
            a in 1e-6f64..1e6, b in 1e-6f64..1e6, c in 1e-6f64..1e6,
        ) {
            let ab = log_ratio(a, b).unwrap();
            prop_assert_eq!(ab, log_ratio(b, a).unwrap());
            prop_assert_eq!(log_ratio(a, a).unwrap(), 0.0);
            prop_assert!(log_ratio(a, c).unwrap() <= ab + log_ratio(b, c).unwrap() + 1e-12);
        }

        #[test]
        fn product_metric_only_counts_differing_elements(
            base in proptest::collection::vec(-10.0f64..10.0, 8),
            changes in proptest::collection::btree_map(0usize..8, -10.0f64..10.0, 0..8),
        ) {
            let x = Dataset::scalars(base.clone()).unwrap();
            let mut other = base.clone();
            for (&i, &v) in &changes {
                other[i] = v;
            }
            let y = Dataset::scalars(other).unwrap();
            let expected: f64 = changes.iter().map(|(&i, &v)| (base[i] - v).abs()).sum();
            let got = product_metric(&PseudoMetric::AbsDiffSum, &x, &y).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + expected));
        }
    }
}
