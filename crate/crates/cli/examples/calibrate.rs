//! Oracle sweep used to freeze the calibrated suite constants.
//!
//! Runs the verification suite on every brute-force-sized instance over all
//! weight profiles and prints the worst observed value of each calibrated
//! check. Constants are then frozen in `twl_core::suite` with a margin.

use std::collections::BTreeMap;

use twl_core::harness::{gen_instance, run_verify, verify_options_for, SweepConfig, WeightProfile};
use twl_core::suite::SuiteConstants;

const CHECKS: [&str; 10] = [
    "equivalence_upper",
    "lsu_equivalence",
    "weak_type_dual",
    "weak_type_direct",
    "strengthened_direct",
    "strengthened_dual",
    "carleson_upper",
    "corona_carleson",
    "necessity_direct",
    "necessity_dual",
];

fn main() {
    let per_config: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(150);
    let loose = SuiteConstants {
        c_eq: f64::INFINITY,
        c_lsu: f64::INFINITY,
        c_weak: f64::INFINITY,
        c_strengthened: f64::INFINITY,
        ..SuiteConstants::default()
    };
    let mut worst: BTreeMap<&str, (f64, String)> = BTreeMap::new();
    let mut instances = 0;
    for profile in [
        WeightProfile::Uniform,
        WeightProfile::Lognormal,
        WeightProfile::Spiky,
        WeightProfile::NearDegenerate,
    ] {
        for (dimension, depth) in [(1, 3), (2, 1)] {
            let config = SweepConfig {
                seed: 20_240_601,
                count: per_config,
                depth_range: [0, depth],
                dimension,
                exponent_grid: vec![
                    [2.0, 2.0, 2.0],
                    [3.0, 3.0, 3.0],
                    [3.0, 2.0, 2.0],
                    [2.5, 1.5, 3.0],
                    [4.0, 4.0, 4.0],
                    [1.5, 1.5, 1.5],
                    [4.0, 1.5, 1.2],
                ],
                weight_profile: profile,
                oracle_max_depth: depth,
                constants: loose.clone(),
                ..SweepConfig::default()
            };
            for index in 0..per_config as u64 {
                let inst = gen_instance(&config, index).expect("valid config");
                let opts = verify_options_for(&config, &inst, index);
                let report = run_verify(&inst, &opts).expect("verify");
                instances += 1;
                for item in &report.items {
                    if let Some(name) = CHECKS.iter().find(|&&c| c == item.name) {
                        let entry = worst.entry(name).or_insert((0.0, String::new()));
                        if item.observed > entry.0 {
                            *entry = (
                                item.observed,
                                format!(
                                    "{profile:?} d={dimension} index={index} (p,r,q)=({},{},{})",
                                    inst.p(),
                                    inst.r(),
                                    inst.q()
                                ),
                            );
                        }
                    }
                }
            }
        }
    }
    println!("{instances} oracle-sized instances");
    for (name, (value, at)) in &worst {
        println!("{name:<20} max={value:.6}  at {at}");
    }
}
