//! Constants used by the verification suite. The calibrated ones were
//! measured with `cargo run --release -p twl-cli --example calibrate` and
//! frozen with a safety margin; the others are theoretical.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConstants {
    /// Cap on `‖T̄‖ / max{ℒ^{1/r'}, ℒ*^{1/p}}`.
    pub c_eq: f64,
    /// Cap on `‖R‖ / max{direct, dual}` for the linear operator.
    pub c_lsu: f64,
    /// Constant of the weak-type inequalities.
    pub c_weak: f64,
    /// Constant of the strengthened testing inequalities.
    pub c_strengthened: f64,
    /// Relative slack for identities that hold exactly in real arithmetic.
    pub exact_tolerance: f64,
    /// Slack for `ℒ*^{1/p} <= ‖T̄‖`.
    pub direct_necessity_tolerance: f64,
    /// Slack for `ℒ^{1/r'} <= ‖T̄‖`.
    pub dual_necessity_tolerance: f64,
}

impl Default for SuiteConstants {
    fn default() -> Self {
        Self {
            // 4000 brute-force-sized instances, all profiles, d = 1 and 2:
            // maxima 1.18 (eq), 1.17 (lsu), 1.14 (weak), 1.26 (strengthened).
            c_eq: 2.5,
            c_lsu: 2.5,
            c_weak: 2.5,
            c_strengthened: 2.5,
            exact_tolerance: 1e-10,
            direct_necessity_tolerance: 1e-9,
            dual_necessity_tolerance: 1e-6,
        }
    }
}

impl SuiteConstants {
    /// `(p')^p`: the Carleson constant controls `‖T̄‖^p` up to this factor
    /// when `r = q = p`.
    pub fn c_carleson(p: f64) -> f64 {
        (p / (p - 1.0)).powf(p)
    }

    /// `2^r (r')^r`.
    pub fn c_corona(r: f64) -> f64 {
        crate::decompose::corona_constant(r)
    }

    /// `6 + ⌈1/η⌉`.
    pub fn c_occ(eta: f64) -> usize {
        crate::decompose::occurrence_bound(eta)
    }
}
