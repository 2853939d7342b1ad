use bayesdp_core::calculus::{certificate, finite_concentration, lift_iid, Smoothness};
use bayesdp_core::families::{
    lipschitz_at, log_density, observation_log_ratio, FamilyPrior, FiniteFamily, NormalPrior, Theta,
};
use bayesdp_core::metrics::{distance, log_ratio_from_logs, Dataset, Observation, PseudoMetric};
use bayesdp_core::verify::{check_marginal_ratio, check_pinsker, check_theorem2, ParameterRegion};
use proptest::prelude::*;

fn scalar_family() -> impl Strategy<Value = FamilyPrior> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|l| FamilyPrior::exponential(l).unwrap()),
        (-3.0f64..3.0, 0.1f64..5.0).prop_map(|(m, l)| FamilyPrior::laplace(m, l).unwrap()),
        (-3.0f64..3.0, 0.1f64..5.0)
            .prop_map(|(m, l)| FamilyPrior::normal(m, l, NormalPrior::Precision).unwrap()),
        (-3.0f64..3.0, 0.1f64..5.0)
            .prop_map(|(m, l)| FamilyPrior::normal(m, l, NormalPrior::Variance).unwrap()),
        (1u32..30, 1.01f64..5.0).prop_map(|(n, a)| FamilyPrior::beta_binomial(n, a).unwrap()),
    ]
}

fn observation_for(fp: &FamilyPrior, u: f64) -> f64 {
    match fp {
        FamilyPrior::ExponentialRate { .. } => 10.0 * u,
        FamilyPrior::BetaBinomial { trials, .. } => (u * f64::from(*trials)).round(),
        _ => 20.0 * u - 10.0,
    }
}

fn theta_for(fp: &FamilyPrior, u: f64) -> f64 {
    match fp {
        FamilyPrior::BetaBinomial { .. } => 0.001 + 0.998 * u,
        _ => 0.01 + 10.0 * u,
    }
}

fn finite_family() -> impl Strategy<Value = FiniteFamily> {
    (2usize..5, 2usize..5).prop_flat_map(|(k, r)| {
        (
            prop::collection::vec(prop::collection::vec(0.05f64..1.0, r), k),
            prop::collection::vec(0.05f64..1.0, k),
        )
            .prop_map(|(rows, prior)| {
                let norm = |v: Vec<f64>| {
                    let s: f64 = v.iter().sum();
                    v.into_iter().map(|x| x / s).collect::<Vec<_>>()
                };
                FiniteFamily::new(rows.into_iter().map(norm).collect(), norm(prior)).unwrap()
            })
    })
}

fn single(o: u32) -> Dataset {
    Dataset::categorical([vec![o]]).unwrap()
}

proptest! {
    #[test]
    fn likelihood_log_ratio_within_local_lipschitz(
        fp in scalar_family(), ut in 0.0f64..1.0, ua in 0.0f64..1.0, ub in 0.0f64..1.0,
    ) {
        let theta = Theta::Scalar(theta_for(&fp, ut));
        let (a, b) = (observation_for(&fp, ua), observation_for(&fp, ub));
        let metric = fp.canonical_metric();
        let lr = observation_log_ratio(&fp, &theta, &Observation::Scalar(a), &Observation::Scalar(b)).unwrap();
        let rho = metric.observation_distance(&Observation::Scalar(a), &Observation::Scalar(b)).unwrap();
        let l = lipschitz_at(&fp, &theta, &metric).unwrap();
        prop_assert!(lr <= l * rho + 1e-9 * (1.0 + lr), "lr {lr} > {l} * {rho}");
    }

    #[test]
    fn regions_are_nested(fp in scalar_family(), l1 in 0.0f64..20.0, dl in 0.0f64..20.0, ut in 0.0f64..1.0) {
        let theta = Theta::Scalar(theta_for(&fp, ut));
        let small = ParameterRegion::new(fp.clone(), l1).unwrap();
        let large = ParameterRegion::new(fp, l1 + dl).unwrap();
        if small.contains(&theta).unwrap() {
            prop_assert!(large.contains(&theta).unwrap());
        }
    }

    #[test]
    fn lifted_lipschitz_bounds_product_densities(
        ut in 0.0f64..1.0, xs in prop::collection::vec(0.0f64..10.0, 5), ys in prop::collection::vec(0.0f64..10.0, 5),
    ) {
        // At fixed θ the exponential likelihood is θ-Lipschitz, so the lifted
        // constant for 5 observations is 5θ.
        let fp = FamilyPrior::exponential(1.0).unwrap();
        let t = theta_for(&fp, ut);
        let x = Dataset::scalars(xs).unwrap();
        let y = Dataset::scalars(ys).unwrap();
        let lr = log_ratio_from_logs(
            log_density(&fp, &Theta::Scalar(t), &x).unwrap(),
            log_density(&fp, &Theta::Scalar(t), &y).unwrap(),
        );
        let base = bayesdp_core::calculus::SmoothnessCertificate::uniform_lipschitz(t, fp.canonical_metric()).unwrap();
        let lifted = lift_iid(&base, 5, None).unwrap();
        let Smoothness::UniformLipschitz { lipschitz } = lifted.smoothness else { unreachable!() };
        let rho = distance(&fp.canonical_metric(), &x, &y).unwrap();
        prop_assert!(lr <= lipschitz * rho + 1e-9);
    }

    #[test]
    fn finite_family_privacy_and_pinsker(f in finite_family(), a in 0u32..8, b in 0u32..8) {
        let r = f.n_outcomes() as u32;
        let fp = FamilyPrior::FiniteTheta(f);
        let pairs = vec![(single(a % r), single(b % r))];
        let cert = certificate(&fp).unwrap().into_valid().unwrap();
        prop_assert!(check_theorem2(&fp, &cert, &pairs).unwrap().passed);
        prop_assert!(check_pinsker(&fp, &pairs).unwrap().passed);
        let Smoothness::UniformLipschitz { lipschitz } = cert.smoothness else { unreachable!() };
        prop_assert!(check_marginal_ratio(&fp, lipschitz, &pairs).unwrap().passed);
    }

    #[test]
    fn finite_concentration_bounds_prior_mass(f in finite_family()) {
        let fp = FamilyPrior::FiniteTheta(f.clone());
        if let Some(c) = finite_concentration(&fp).unwrap() {
            for j in 0..f.n_params() {
                let level = f.lipschitz(j);
                let mass: f64 = (0..f.n_params()).filter(|&i| f.lipschitz(i) <= level).map(|i| f.prior[i]).sum();
                prop_assert!(mass >= 1.0 - (-c * level).exp() - 1e-12);
            }
        }
    }
}

fn triple(len: usize) -> impl Strategy<Value = [Vec<f64>; 3]> {
    let v = || prop::collection::vec(-5.0f64..5.0, len);
    (v(), v(), v()).prop_map(|(a, b, c)| [a, b, c])
}

fn assert_triangle(metric: &PseudoMetric, x: &Dataset, y: &Dataset, z: &Dataset) -> Result<(), TestCaseError> {
    let xy = distance(metric, x, y).unwrap();
    let yz = distance(metric, y, z).unwrap();
    let xz = distance(metric, x, z).unwrap();
    prop_assert!(xz <= xy + yz + 1e-9 * (1.0 + xz), "{} triangle", metric.name());
    prop_assert!(xz.sqrt() <= xy.sqrt() + yz.sqrt() + 1e-9, "{} sqrt triangle", metric.name());
    prop_assert_eq!(xy, distance(metric, y, x).unwrap());
    Ok(())
}

proptest! {
    #[test]
    fn scalar_metrics_and_their_roots_are_pseudo_metrics(t in (1usize..6).prop_flat_map(triple)) {
        let [x, y, z] = t.map(|v| Dataset::scalars(v).unwrap());
        for metric in [PseudoMetric::AbsDiffSum, PseudoMetric::NormalMetric, PseudoMetric::Hamming] {
            assert_triangle(&metric, &x, &y, &z)?;
        }
    }

    #[test]
    fn categorical_metrics_and_their_roots_are_pseudo_metrics(
        rows in prop::collection::vec(prop::collection::vec(0u32..3, 3), 3..=3),
        extra in prop::collection::vec(prop::collection::vec(0u32..3, 3), 6..=6),
        weights in prop::collection::vec(0.0f64..3.0, 3),
    ) {
        let x = Dataset::categorical(rows.clone()).unwrap();
        let y = Dataset::categorical(extra[..3].to_vec()).unwrap();
        let z = Dataset::categorical(extra[3..].to_vec()).unwrap();
        for metric in [PseudoMetric::Hamming, PseudoMetric::WeightedCategorical { weights: weights.clone() }] {
            assert_triangle(&metric, &x, &y, &z)?;
        }
    }
}
