use std::sync::OnceLock;

use mmangle::spaces::euclidean_cloud;
use mmangle::wasserstein::{gap_tolerance, solve_ot, ProbMeasure};
use mmangle::{PointId, Space};
use proptest::collection::vec;
use proptest::prelude::*;

fn cloud() -> &'static Space {
    static S: OnceLock<Space> = OnceLock::new();
    S.get_or_init(|| euclidean_cloud::<f64>(300, 2, 8, None).unwrap().space)
}

fn measure(s: &Space, atoms: &[(usize, f64)]) -> ProbMeasure<f64> {
    let mut w = vec![0.0; s.n()];
    for &(i, m) in atoms {
        w[i] += m;
    }
    ProbMeasure::normalized(w).unwrap()
}

fn atoms() -> impl Strategy<Value = Vec<(usize, f64)>> {
    vec((0usize..300, 0.1f64..1.0), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn strong_duality_and_marginals(a in atoms(), b in atoms()) {
        let s = cloud();
        let (mu, nu) = (measure(s, &a), measure(s, &b));
        let sol = solve_ot(s, &mu, &nu).unwrap();
        prop_assert!(sol.gap.abs() <= gap_tolerance(sol.plan.cost));
        prop_assert!(sol.potentials.max_infeasibility(s) <= 1e-9);
        let (ra, cb) = sol.plan.marginals(s.n());
        for i in 0..s.n() {
            prop_assert!((ra[i] - mu.weights[i]).abs() <= 1e-9);
            prop_assert!((cb[i] - nu.weights[i]).abs() <= 1e-9);
        }
        prop_assert!(sol.plan.entries.iter().all(|e| e.2 >= -1e-15));
    }

    #[test]
    fn w2_triangle(a in atoms(), b in atoms(), c in atoms()) {
        let s = cloud();
        let (m1, m2, m3) = (measure(s, &a), measure(s, &b), measure(s, &c));
        let w = |x: &ProbMeasure<f64>, y: &ProbMeasure<f64>| solve_ot(s, x, y).unwrap().plan.w2();
        prop_assert!(w(&m1, &m3) <= w(&m1, &m2) + w(&m2, &m3) + 1e-9);
    }
}

#[test]
fn dirac_distance_is_the_metric() {
    let s = cloud();
    for (i, j) in [(0, 1), (17, 250), (99, 3)] {
        let sol = solve_ot(s, &ProbMeasure::dirac(s.n(), PointId(i)), &ProbMeasure::dirac(s.n(), PointId(j))).unwrap();
        assert!((sol.plan.w2() - s.dist(PointId(i), PointId(j))).abs() <= 1e-12);
    }
}
