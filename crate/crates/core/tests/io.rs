use mmangle::io::{read_space, write_space, SpaceDocument};
use mmangle::spaces::{euclidean_cloud, sphere_cloud, star, MetricKind, SphereSampling};
use mmangle::{PointId, Space};

fn same(a: &Space, b: &Space) {
    assert_eq!(a.n(), b.n());
    assert_eq!(a.h(), b.h());
    assert_eq!(a.measure(), b.measure());
    for i in (0..a.n()).step_by(7) {
        for j in (0..a.n()).step_by(11) {
            assert!((a.dist(PointId(i), PointId(j)) - b.dist(PointId(i), PointId(j))).abs() <= 1e-12);
        }
    }
}

#[test]
fn spaces_survive_a_file_roundtrip() {
    let dir = std::env::temp_dir().join(format!("mmangle-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cloud = euclidean_cloud::<f64>(200, 2, 1, None).unwrap().space;
    let sphere = sphere_cloud::<f64>(300, 2, Some(0.4), SphereSampling::Fibonacci, MetricKind::Exact)
        .unwrap()
        .space;
    let tree = star::<f64>(3, 1.0, 0.1).unwrap().space;
    let rescaled = cloud.rescale(PointId(5), 0.5).unwrap();
    for (k, s) in [cloud, sphere, tree, rescaled].iter().enumerate() {
        let path = dir.join(format!("space{k}.json"));
        write_space(&path, s).unwrap();
        same(s, &read_space::<f64>(&path).unwrap());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn documents_reject_bad_edges() {
    let tree = star::<f64>(2, 1.0, 0.5).unwrap().space;
    let mut doc = SpaceDocument::from_space(&tree);
    doc.edges[0].v = 10_000;
    assert!(doc.to_space::<f64>().is_err());
}
