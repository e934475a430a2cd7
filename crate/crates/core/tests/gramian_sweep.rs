use nalgebra::DMatrix;
use shapespline::experiments::gramian_sweep::{gramian_sweep, GramianSweepConfig};
use shapespline::experiments::records::to_csv_string;
use shapespline::experiments::Status;
use shapespline::shapeops::{gramian, ActiveSet};
use shapespline::splines::KnotSequence;

/// Double-double number `hi + lo`.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd(p, a.mul_add(b, -p))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        let t = s.1 + self.1 + o.1;
        two_sum(s.0, t)
    }
    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.0, o.0);
        two_sum(p.0, p.1 + self.0 * o.1 + self.1 * o.0)
    }
    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
    fn div(self, o: Dd) -> Dd {
        // one Newton refinement of the f64 quotient
        let q = self.0 / o.0;
        let r = self.add(o.mul(Dd(q, 0.0)).neg());
        two_sum(q, r.0 / o.0)
    }
}

/// Infinity norm of the inverse by Gauss-Jordan elimination with partial
/// pivoting in double-double arithmetic.
fn dd_inverse_norm(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let mut a: Vec<Vec<Dd>> = (0..n)
        .map(|i| {
            (0..2 * n)
                .map(|j| {
                    if j < n {
                        Dd(g[(i, j)], 0.0)
                    } else {
                        Dd(if j - n == i { 1.0 } else { 0.0 }, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].0.abs().total_cmp(&a[y][c].0.abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        for v in a[c].iter_mut() {
            *v = v.div(piv);
        }
        let pivot_row = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v = v.add(f.mul(*p).neg());
                }
            }
        }
    }
    (0..n)
        .map(|i| (n..2 * n).map(|j| a[i][j].0.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[test]
fn inverse_norm_matches_extended_precision() {
    let knots = KnotSequence::uniform(10).unwrap();
    let masks = [0u64, 0x1ff, 0b1010_1010, 0b1_0000_0001, 0b0_1111_0000];
    for mask in masks {
        let alpha = ActiveSet::from_mask(10, 2, mask);
        let rep = gramian(&alpha, 2, &knots).unwrap();
        let oracle = dd_inverse_norm(&rep.g);
        assert!(
            (rep.inv_inf_norm - oracle).abs() <= 1e-8,
            "alpha {alpha}: {} vs {oracle}",
            rep.inv_inf_norm
        );
    }
}

#[test]
fn order_one_gramians_are_identities() {
    let knots = KnotSequence::from_breakpoints(vec![0.0, 0.1, 0.45, 0.6, 1.0]).unwrap();
    for mask in 0..8 {
        let rep = gramian(&ActiveSet::from_mask(4, 1, mask), 1, &knots).unwrap();
        assert!((rep.inv_inf_norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sweep_estimates_plateau() {
    let r = gramian_sweep(&GramianSweepConfig::default()).unwrap();
    let failures: Vec<_> = r.records.iter().filter(|x| x.status == Status::Fail).collect();
    assert!(failures.is_empty(), "{failures:?}");
    assert!((r.rho[&1] - 1.0).abs() <= 1e-10);
    for m in 1..=4 {
        assert!(r.plateau[&m], "m={m}");
        let cells = r
            .records
            .iter()
            .filter(|x| x.params.starts_with(&format!("m={m} K=")) && x.statement != "grid-gramian-inverse");
        // the estimate is the running maximum over every sampled cell
        let mx = cells
            .map(|x| if m == 1 { 1.0 + x.measured } else { x.measured })
            .fold(0.0, f64::max);
        assert!((r.rho[&m] - mx).abs() <= 1e-12 * mx, "m={m}: {} vs {mx}", r.rho[&m]);
    }
    assert!(r.records.iter().any(|x| x.statement == "grid-gramian-inverse" && x.status == Status::Pass));
    // more draws can only raise the running maximum
    let small = gramian_sweep(&GramianSweepConfig { knots_per_cell: 10, grid_k_list: vec![], ..Default::default() }).unwrap();
    for m in 1..=4 {
        assert!(small.rho[&m] <= r.rho[&m]);
    }
}

#[test]
fn sweep_is_deterministic_and_validates_input() {
    let cfg = GramianSweepConfig { m_list: vec![2, 3], k_list: vec![5, 9], knots_per_cell: 4, ..Default::default() };
    let a = gramian_sweep(&cfg).unwrap();
    let b = gramian_sweep(&cfg).unwrap();
    assert_eq!(to_csv_string(&a.records), to_csv_string(&b.records));
    assert!(gramian_sweep(&GramianSweepConfig { m_list: vec![0], ..Default::default() }).is_err());
    assert!(gramian_sweep(&GramianSweepConfig { k_list: vec![], ..Default::default() }).is_err());
}
