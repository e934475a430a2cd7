use nalgebra::DMatrix;
use proptest::prelude::*;
use shapespline::linalg::{inf_norm, min_singular_value, rank};
use shapespline::shapeops::{
    build_f, build_z_h, delta_diag, derivative_coeffs, is_shape_feasible, refinement_grid,
    v_alpha_knots, weighted_difference, x_final, ActiveSet,
};
use shapespline::splines::{eval_basis, eval_spline, KnotSequence};

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

fn instance() -> impl Strategy<Value = (usize, KnotSequence, u64)> {
    (1usize..=4, prop::collection::vec(0.5f64..1.5, 1..=10), any::<u64>())
        .prop_map(|(m, gaps, mask)| (m, knots_from_gaps(&gaps), mask))
}

fn alpha_for(knots: &KnotSequence, m: usize, mask: u64) -> ActiveSet {
    let k = knots.num_intervals();
    ActiveSet::from_mask(k, m, mask & ((1u64 << (k - 1)) - 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn factor_rows_span_face_null_space((m, knots, mask) in instance()) {
        let alpha = alpha_for(&knots, m, mask);
        let fs = build_f(&alpha, m, &knots).unwrap();
        let f = fs.f();
        let d = weighted_difference(m, &knots).unwrap();
        for &i in alpha.alpha() {
            let row = d.constraint().row(i - 1);
            let r = (row * f.transpose()).abs().max();
            prop_assert!(r <= 1e-9, "residual {}", r);
        }
        prop_assert_eq!(rank(f, 1e-10), alpha.q_alpha());
    }

    #[test]
    fn factor_maps_fine_basis_to_face_basis((m, knots, mask) in instance()) {
        let alpha = alpha_for(&knots, m, mask);
        let f = build_f(&alpha, m, &knots).unwrap().f().clone();
        let v = v_alpha_knots(&alpha, &knots).unwrap();
        for g in 0..200 {
            let x = g as f64 / 199.0;
            let fine = nalgebra::DVector::from_vec(eval_basis(m, &knots, x).unwrap());
            let coarse = eval_basis(m, &v, x).unwrap();
            let lhs = &f * fine;
            for (a, b) in lhs.iter().zip(&coarse) {
                prop_assert!((a - b).abs() <= 1e-9, "x={} {} vs {}", x, a, b);
            }
        }
    }

    #[test]
    fn factor_norms((m, knots, mask) in instance()) {
        let alpha = alpha_for(&knots, m, mask);
        let fs = build_f(&alpha, m, &knots).unwrap();
        let f = fs.f();
        prop_assert!(f.iter().all(|v| *v >= -1e-13));
        prop_assert!((inf_norm(&f.transpose()) - 1.0).abs() <= 1e-10);
        let k = knots.num_intervals() as f64;
        let c1 = knots.c_kappa_1();
        let mut scaled = f.clone() / k;
        shapespline::linalg::scale_rows(&mut scaled, fs.xi_top().as_slice());
        prop_assert!(inf_norm(&scaled) <= m as f64 / c1 + 1e-10);
        let t_n = knots.basis_len(m) as f64;
        let bound = (2.0 * m as f64 / c1 * (knots.c_kappa_2() / k).max(1.0) * t_n)
            .powi(m as i32 - 1)
            * k.powi(m as i32);
        prop_assert!(inf_norm(f) <= bound);
    }

    #[test]
    fn lower_stages_keep_identity_block((m, knots, mask) in instance()) {
        let alpha = alpha_for(&knots, m, mask);
        let fs = build_f(&alpha, m, &knots).unwrap();
        for p in 1..m {
            let f = &fs.stages[p - 1];
            let b = m - p;
            for i in 0..f.nrows() {
                for j in 0..f.ncols() {
                    if i < b || j < b {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        prop_assert!((f[(i, j)] - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn difference_stages_have_full_row_rank((m, knots, _mask) in instance()) {
        let d = weighted_difference(m, &knots).unwrap();
        for stage in &d.stages {
            if stage.nrows() > 0 {
                prop_assert!(min_singular_value(&stage.transpose()) > 1e-12);
            }
        }
        let ones = nalgebra::DVector::from_element(knots.basis_len(m), 1.0);
        prop_assert!((d.constraint() * ones).abs().max() < 1e-8);
    }

    #[test]
    fn spacing_bounds(gaps in prop::collection::vec(0.5f64..1.5, 2..=12), p in 1usize..4) {
        let knots = knots_from_gaps(&gaps);
        let k = knots.num_intervals() as f64;
        for v in delta_diag(p, &knots).iter() {
            prop_assert!(*v >= knots.c_kappa_1() / (p as f64 * k) - 1e-15);
            prop_assert!(*v <= knots.c_kappa_2() / k + 1e-15);
        }
    }

    #[test]
    fn derivative_coefficients_match_finite_differences(
        gaps in prop::collection::vec(0.5f64..1.5, 6..=6),
        b in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let knots = knots_from_gaps(&gaps);
        let second = derivative_coeffs(3, &knots, &b, 2).unwrap();
        let h = 1e-4;
        let mut checked = 0;
        for g in 1..50 {
            let x = g as f64 / 50.0;
            let near_knot = knots.points().iter().any(|t| (t - x).abs() < 3.0 * h);
            if near_knot {
                continue;
            }
            let s = |t: f64| eval_spline(3, &knots, &b, t).unwrap();
            let fd = (s(x + h) - 2.0 * s(x) + s(x - h)) / (h * h);
            let exact = eval_spline(1, &knots, second.as_slice(), x).unwrap();
            prop_assert!((fd - exact).abs() < 1e-4 * (1.0 + exact.abs()), "x={} fd={} exact={}", x, fd, exact);
            checked += 1;
        }
        prop_assert!(checked > 10);
    }
}

#[test]
fn face_factor_example() {
    let knots = KnotSequence::uniform(5).unwrap();
    let alpha = ActiveSet::new(5, 3, &[1, 3]).unwrap();
    let f = build_f(&alpha, 3, &knots).unwrap().f().clone();
    let d = weighted_difference(3, &knots).unwrap();
    for &i in alpha.alpha() {
        assert!((d.constraint().row(i - 1) * f.transpose()).abs().max() < 1e-10);
    }
    assert_eq!(rank(&f, 1e-10), 5);
}

#[test]
fn shape_feasibility_of_convex_and_kinked_coefficients() {
    let knots = KnotSequence::uniform(5).unwrap();
    // Greville abscissae of linear splines are the knots themselves
    let convex: Vec<f64> = knots.points().iter().map(|t| (t - 0.4) * (t - 0.4)).collect();
    assert!(is_shape_feasible(2, &knots, &convex).unwrap());
    let mut bent = convex.clone();
    bent[3] += 0.2;
    assert!(!is_shape_feasible(2, &knots, &bent).unwrap());
    assert!(is_shape_feasible(2, &knots, &[3.0; 6]).unwrap());
    assert!(is_shape_feasible(1, &knots, &[0.0, 0.1, 0.5, 0.6, 2.0]).unwrap());
    assert!(is_shape_feasible(2, &knots, &[1.0; 5]).is_err());
    let linear: Vec<f64> = knots.points().iter().map(|t| 2.0 * t - 1.0).collect();
    let slope = derivative_coeffs(2, &knots, &linear, 1).unwrap();
    assert!(slope.iter().all(|v| (v - 2.0).abs() < 1e-12));
}

/// Grid-point error of the recursive face matrices against face B-splines.
fn grid_errors(alpha: &ActiveSet, m: usize, knots: &KnotSequence, l: usize) -> Vec<f64> {
    let zs = build_z_h(alpha, m, knots, l).unwrap();
    let v = v_alpha_knots(alpha, knots).unwrap();
    (1..=m)
        .map(|p| {
            let z = &zs.z[p - 1];
            let mut worst: f64 = 0.0;
            for k in 0..l {
                let b = eval_basis(p, &v, k as f64 / l as f64).unwrap();
                for (j, bj) in b.iter().enumerate() {
                    worst = worst.max((z[(j, k)] - bj).abs());
                }
            }
            worst
        })
        .collect()
}

#[test]
fn recursive_grid_matrices_approximate_face_splines() {
    let knots = KnotSequence::uniform(3).unwrap();
    let m = 2;
    let (l, mm, _) = refinement_grid(m, 1.0, 3, 1).unwrap();
    for mask in 0..4u64 {
        let alpha = ActiveSet::from_mask(3, m, mask);
        let errs = grid_errors(&alpha, m, &knots, l);
        assert_eq!(errs[0], 0.0);
        let bound = 6.0 * mm as f64 / l as f64;
        assert!(errs[1] <= bound, "{} > {}", errs[1], bound);
        let zs = build_z_h(&alpha, m, &knots, l).unwrap();
        let f = build_f(&alpha, m, &knots).unwrap();
        let prod: DMatrix<f64> = f.f() * x_final(m, &knots, l).unwrap();
        assert!((&zs.z[m - 1] - prod).abs().max() < 1e-9);
    }
}
