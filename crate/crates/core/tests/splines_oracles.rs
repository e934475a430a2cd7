use proptest::prelude::*;
use shapespline::quadrature::integrate;
use shapespline::splines::{
    build_design_system, eval_basis, eval_basis_derivative, l1_norm, DesignPoints, KnotSequence,
};

/// Textbook recursive definition on an explicitly padded knot vector.
fn textbook(p: usize, t: &[f64], i: usize, x: f64, last: bool) -> f64 {
    if p == 1 {
        let (a, b) = (t[i], t[i + 1]);
        let inside = a <= x && x < b;
        // closed at the right end for the final nonempty interval
        let closing = last && x == b && b == *t.last().unwrap() && a < b;
        return if inside || closing { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = t[i + p - 1] - t[i];
    if d1 > 0.0 {
        v += (x - t[i]) / d1 * textbook(p - 1, t, i, x, last);
    }
    let d2 = t[i + p] - t[i + 1];
    if d2 > 0.0 {
        v += (t[i + p] - x) / d2 * textbook(p - 1, t, i + 1, x, last);
    }
    v
}

fn padded(knots: &KnotSequence, p: usize) -> Vec<f64> {
    let mut t = vec![0.0; p - 1];
    t.extend_from_slice(knots.points());
    t.extend(std::iter::repeat_n(1.0, p - 1));
    t
}

fn knots_from_gaps(gaps: &[f64]) -> KnotSequence {
    let total: f64 = gaps.iter().sum();
    let mut pts = vec![0.0];
    let mut acc = 0.0;
    for g in &gaps[..gaps.len() - 1] {
        acc += g / total;
        pts.push(acc);
    }
    pts.push(1.0);
    KnotSequence::from_breakpoints(pts).unwrap()
}

proptest! {
    #[test]
    fn matches_textbook_recursion(
        gaps in prop::collection::vec(0.5f64..1.5, 1..=8),
        p in 1usize..=5,
        x in 0.0f64..=1.0,
    ) {
        let knots = knots_from_gaps(&gaps);
        let t = padded(&knots, p);
        let b = eval_basis(p, &knots, x).unwrap();
        for (i, v) in b.iter().enumerate() {
            let last = true;
            prop_assert!((v - textbook(p, &t, i, x, last)).abs() < 1e-12);
        }
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(b.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn derivative_matches_finite_difference(
        gaps in prop::collection::vec(0.5f64..1.5, 2..=8),
        p in 2usize..=5,
        x in 0.01f64..0.99,
    ) {
        let knots = knots_from_gaps(&gaps);
        let h = 1e-6;
        prop_assume!(knots.points().iter().all(|t| (t - x).abs() > 2.0 * h));
        let d = eval_basis_derivative(p, &knots, x).unwrap();
        let hi = eval_basis(p, &knots, x + h).unwrap();
        let lo = eval_basis(p, &knots, x - h).unwrap();
        for i in 0..d.len() {
            let fd = (hi[i] - lo[i]) / (2.0 * h);
            prop_assert!((fd - d[i]).abs() < 1e-4 * (1.0 + d[i].abs()));
        }
    }

    #[test]
    fn l1_norm_matches_quadrature(
        gaps in prop::collection::vec(0.5f64..1.5, 1..=8),
        p in 1usize..=5,
    ) {
        let knots = knots_from_gaps(&gaps);
        for idx in 0..knots.basis_len(p) {
            let mut total = 0.0;
            for w in knots.points().windows(2) {
                total += integrate(|x| eval_basis(p, &knots, x).unwrap()[idx], w[0], w[1], p + 1);
            }
            prop_assert!((total - l1_norm(p, &knots, idx).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_matrix_is_banded_and_symmetric(k in 2usize..8, m in 1usize..=4, n_per in 8usize..20) {
        let knots = KnotSequence::uniform(k).unwrap();
        let design = DesignPoints::uniform(k * n_per).unwrap();
        let y: Vec<f64> = design.points().iter().map(|x| x.sin()).collect();
        let sys = build_design_system(m, &knots, &design, &y).unwrap();
        let t = sys.t_n();
        for i in 0..t {
            for j in 0..t {
                prop_assert_eq!(sys.lambda[(i, j)], sys.lambda[(j, i)]);
                if i.abs_diff(j) >= m {
                    prop_assert_eq!(sys.lambda[(i, j)], 0.0);
                }
            }
        }
        let again = sys.weighted_data(&y).unwrap();
        prop_assert!((again - &sys.ybar).abs().max() < 1e-13);
    }
}

#[test]
fn derivative_at_knot_takes_right_limit() {
    let knots = KnotSequence::uniform(4).unwrap();
    let d = eval_basis_derivative(2, &knots, 0.25).unwrap();
    // the hat on [0, 0.5] peaks at 0.25; to the right it descends
    assert!((d[1] + 4.0).abs() < 1e-12);
    let d = eval_basis_derivative(2, &knots, 1.0).unwrap();
    assert!((d[4] - 4.0).abs() < 1e-12);
}

#[test]
fn design_weights_and_gram_by_hand() {
    let knots = KnotSequence::uniform(2).unwrap();
    let design = DesignPoints::uniform(4).unwrap();
    let y = [0.0, 1.0, 2.0, 3.0, 4.0];
    let sys = build_design_system(1, &knots, &design, &y).unwrap();
    // points 0, .25 feed the first interval, .5, .75, 1 the second; last weight 0
    assert!((sys.lambda[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((sys.lambda[(1, 1)] - 1.0).abs() < 1e-15);
    assert!((sys.ybar[0] - 0.5).abs() < 1e-15);
    assert!((sys.ybar[1] - 2.5).abs() < 1e-15);
}

#[test]
fn tightest_mesh_constants() {
    let k = KnotSequence::from_breakpoints(vec![0.0, 0.2, 0.5, 1.0]).unwrap();
    assert!((k.c_kappa_1() - 0.6).abs() < 1e-12);
    assert!((k.c_kappa_2() - 1.5).abs() < 1e-12);
    let d = DesignPoints::from_points(vec![0.0, 0.5, 0.75, 1.0]).unwrap();
    assert!((d.c_omega() - 1.5).abs() < 1e-12);
}
