use std::sync::OnceLock;

use mmangle::angles::{f_eps_from_slopes, inner_product_at, Neighborhood};
use mmangle::spaces::euclidean_cloud;
use mmangle::{Field, PointId, ScalarField, Space};
use proptest::prelude::*;

fn cloud() -> &'static Space {
    static S: OnceLock<Space> = OnceLock::new();
    S.get_or_init(|| euclidean_cloud::<f64>(500, 2, 5, None).unwrap().space)
}

fn combo(s: &Space, p: usize, q: usize, a: f64, b: f64) -> Field {
    let f = s.distance_field(PointId(p));
    let g = s.distance_field(PointId(q));
    ScalarField::from_fn(s.n(), |i| a * f.values[i] + b * g.values[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn difference_quotients_bracket(
        x in 0usize..500, p in 0usize..500, q in 0usize..500, r in 0usize..500,
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
        e1 in 0.01f64..1.0, e2 in 0.01f64..1.0,
    ) {
        let s = cloud();
        let nb = Neighborhood::new(s, PointId(x), 2.0 * s.h()).unwrap();
        let sf = nb.slopes(&combo(s, p, q, a, b));
        let sg = nb.slopes(&combo(s, q, r, c, 1.0));
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let f = |e: f64| f_eps_from_slopes(&sf, &sg, e);
        prop_assert!(f(lo) <= f(hi) + 1e-12);
        prop_assert!(f(-hi) <= f(-lo) + 1e-12);
        prop_assert!(f(-lo) <= f(lo) + 1e-12);
    }

    #[test]
    fn cauchy_schwarz(x in 0usize..500, p in 0usize..500, q in 0usize..500) {
        let s = cloud();
        prop_assume!(p != x && q != x);
        let scale = 2.0 * s.h();
        let f = s.distance_field(PointId(p));
        let g = s.distance_field(PointId(q));
        let nb = Neighborhood::new(s, PointId(x), scale).unwrap();
        let (lf, lg) = (nb.lip(&f), nb.lip(&g));
        for eps in [0.5, 0.05] {
            let (mid, width) = inner_product_at(s, &f, &g, PointId(x), eps, scale).unwrap();
            prop_assert!(width >= -1e-12);
            prop_assert!(mid.abs() <= lf * lg + 0.5 * eps * lg * lg + 1e-12);
        }
    }
}
