use gridshare_core::graphs::{correlation_matrix, pearson, visibility_graph, visibility_graph_bruteforce};
use proptest::prelude::*;

fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            // Small integers make ties and collinear triples common.
            (-5i32..5).prop_map(f64::from),
            -1e3f64..1e3,
        ],
        1..=max_len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn visibility_matches_bruteforce(y in series(200)) {
        let fast = visibility_graph(&y, None).unwrap();
        let slow = visibility_graph_bruteforce(&y, None).unwrap();
        prop_assert_eq!(fast.sorted_edges(), slow.sorted_edges());
        prop_assert!(fast.is_connected());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn visibility_affine_invariant(
        y in prop::collection::vec((-20i32..20).prop_map(f64::from), 1..80),
        a in prop_oneof![Just(0.5), Just(2.0), Just(4.0)],
        b in -8i32..8,
        shift in -5i32..5,
    ) {
        // Dyadic scale factors and integer offsets keep the transform exact.
        let base = visibility_graph(&y, None).unwrap();
        let moved: Vec<f64> = y.iter().map(|v| a * v + f64::from(b)).collect();
        let xs: Vec<f64> = (0..y.len()).map(|i| (i as i32 + shift) as f64).collect();
        let g = visibility_graph(&moved, Some(&xs)).unwrap();
        prop_assert_eq!(base.sorted_edges(), g.sorted_edges());
    }

    #[test]
    fn visibility_with_irregular_times(
        pts in prop::collection::vec((0.01f64..3.0, -50.0f64..50.0), 1..60),
    ) {
        let mut t = 0.0;
        let xs: Vec<f64> = pts.iter().map(|(dt, _)| { t += dt; t }).collect();
        let ys: Vec<f64> = pts.iter().map(|(_, y)| *y).collect();
        let fast = visibility_graph(&ys, Some(&xs)).unwrap();
        let slow = visibility_graph_bruteforce(&ys, Some(&xs)).unwrap();
        prop_assert_eq!(fast.sorted_edges(), slow.sorted_edges());
    }

    #[test]
    fn pearson_symmetric_and_affine(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50),
        a in prop_oneof![-7.5f64..-0.1, 0.1f64..7.5],
        b in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let (Ok(r1), Ok(r2)) = (pearson(&x, &y), pearson(&y, &x)) {
            prop_assert_eq!(r1, r2);
            prop_assert!((-1.0..=1.0).contains(&r1));
        }
        if let Ok(r) = pearson(&x, &x.iter().map(|v| a * v + b).collect::<Vec<_>>()) {
            prop_assert!((r - a.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn correlation_matrix_invariants(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 12), 2..8),
    ) {
        let m = correlation_matrix(&rows).unwrap();
        for i in 0..m.size() {
            if !m.is_degenerate(i) {
                prop_assert_eq!(m.get(i, i), 1.0);
            }
            for j in 0..m.size() {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!((-1.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }
}

#[test]
fn convex_and_concave_shapes() {
    let convex: Vec<f64> = (0..30).map(|i| f64::from(i * i)).collect();
    assert_eq!(visibility_graph(&convex, None).unwrap().edge_count(), 30 * 29 / 2);
    let concave: Vec<f64> = (0..30).map(|i| -f64::from(i * i)).collect();
    assert_eq!(visibility_graph(&concave, None).unwrap().edge_count(), 29);
}
