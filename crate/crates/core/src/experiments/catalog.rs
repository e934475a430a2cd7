//! Named truth functions with known shape order and Hölder smoothness.

use crate::error::{arg, Result};
use crate::estimator::HolderSpec;

#[derive(Debug, Clone, Copy)]
pub struct Truth {
    pub name: &'static str,
    /// Shape order the function belongs to.
    pub m: usize,
    /// Hölder exponent `r` and constant `L`.
    pub r: f64,
    pub l: f64,
    pub f: fn(f64) -> f64,
}

impl Truth {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn holder(&self) -> HolderSpec {
        HolderSpec::new(self.r, self.l).expect("catalog constants are positive")
    }
}

fn exp_scaled(x: f64) -> f64 {
    x.exp_m1() / (std::f64::consts::E - 1.0)
}

pub const TRUTHS: [Truth; 6] = [
    Truth { name: "linear", m: 1, r: 1.0, l: 1.0, f: |x| x },
    Truth { name: "sqrt", m: 1, r: 0.5, l: 1.0, f: f64::sqrt },
    Truth { name: "kinked", m: 1, r: 1.0, l: 2.0, f: |x| (2.0 * x).min(0.5 + 0.5 * x) },
    Truth { name: "quadratic", m: 2, r: 2.0, l: 2.0, f: |x| x * x },
    Truth {
        name: "exp",
        m: 2,
        r: 2.0,
        l: std::f64::consts::E / (std::f64::consts::E - 1.0),
        f: exp_scaled,
    },
    Truth { name: "cubic", m: 3, r: 3.0, l: 6.0, f: |x| x * x * x },
];

pub fn truth_by_name(name: &str) -> Result<Truth> {
    TRUTHS
        .iter()
        .find(|t| t.name == name)
        .copied()
        .ok_or_else(|| {
            let names: Vec<&str> = TRUTHS.iter().map(|t| t.name).collect();
            crate::error::Error::Argument(format!(
                "unknown truth '{name}' (known: {})",
                names.join(", ")
            ))
        })
}

/// The default truth for a shape order.
pub fn default_truth(m: usize) -> Result<Truth> {
    match m {
        1 => truth_by_name("linear"),
        2 => truth_by_name("quadratic"),
        3 => truth_by_name("cubic"),
        _ => arg(format!("no catalog truth for m = {m}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let e = truth_by_name("exp").unwrap();
        assert_eq!(e.eval(0.0), 0.0);
        assert!((e.eval(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(truth_by_name("kinked").unwrap().eval(1.0), 1.0);
        assert_eq!(truth_by_name("sqrt").unwrap().holder().gamma, 0.5);
        assert!(truth_by_name("nope").is_err());
        for t in TRUTHS {
            assert_eq!(t.holder().m(), t.m);
        }
    }
}
