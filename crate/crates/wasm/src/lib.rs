use serde_json::json;
use wasm_bindgen::prelude::*;

use twl_core::decompose::decompose;
use twl_core::harness::{gen_instance, run_verify, SweepConfig, VerifyOptions};
use twl_core::norm::{opnorm_ascent, testing_scale, AscentConfig};
use twl_core::operators::apply_tbar;
use twl_core::testing::{compute_l, compute_l_star, OptimizerConfig};
use twl_core::{Instance, StepFunction};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Instance JSON for the given generator parameters.
#[allow(clippy::too_many_arguments)]
pub fn generate_json(
    seed: u32,
    depth: u32,
    dimension: usize,
    profile: &str,
    p: f64,
    r: f64,
    q: f64,
) -> Result<String, String> {
    let config = SweepConfig {
        seed: seed as u64,
        depth_range: [depth, depth],
        dimension,
        exponent_grid: vec![[p, r, q]],
        weight_profile: profile.parse().map_err(err)?,
        ..SweepConfig::default()
    };
    Ok(gen_instance(&config, 0).map_err(err)?.to_json())
}

/// Weights, `T̄(σ)`, testing constants and a norm lower bound.
pub fn summary_json(instance: &str) -> Result<String, String> {
    let inst = Instance::from_json(instance).map_err(err)?;
    let one = StepFunction::constant(*inst.grid(), 1.0);
    let tbar = apply_tbar(&inst, &one).map_err(err)?;
    let l_star = compute_l_star(&inst);
    let l = compute_l(&inst, &OptimizerConfig::default());
    let est = opnorm_ascent(&inst, &AscentConfig::default(), Some(&l), Some(&l_star));
    let scale = testing_scale(&inst, l.value, l_star.value);
    let raw = inst.to_json_value();
    Ok(json!({
        "dimension": raw.dimension,
        "depth": raw.depth,
        "sigma": raw.sigma,
        "w": raw.w,
        "cubes": raw.cubes,
        "tbar": tbar.values(),
        "L": l.value,
        "L_star": l_star.value,
        "L_witness": l.witness_cube,
        "L_star_witness": l_star.witness_cube,
        "opnorm_lb": est.lower_bound,
        "witness": est.witness_f.values(),
        "ratio": if scale > 0.0 { est.lower_bound / scale } else { 1.0 },
    })
    .to_string())
}

/// Level sets of `T̄(σ)` with their Whitney cubes and cube classes.
pub fn levels_json(instance: &str, eta: f64) -> Result<String, String> {
    let inst = Instance::from_json(instance).map_err(err)?;
    let one = StepFunction::constant(*inst.grid(), 1.0);
    let d = decompose(&inst, &one, eta).map_err(err)?;
    let levels: Vec<_> = d
        .classified
        .iter()
        .map(|level| {
            json!({
                "k": level.k,
                "omega_cells": d.levels.omega(level.k).iter().collect::<Vec<_>>(),
                "whitney_cubes": d.levels.family(level.k).map(|f| f.cubes.clone()).unwrap_or_default(),
                "classes": level.cubes.iter().map(|c| json!({"cube": c.cube, "class": c.class})).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "tbar": d.levels.tbar.values(),
        "levels": levels,
        "max_occurrence": d.occurrences.max_count(),
    })
    .to_string())
}

/// Verification table and overall verdict.
pub fn verify_json(instance: &str, eta: f64) -> Result<String, String> {
    let inst = Instance::from_json(instance).map_err(err)?;
    let opts = VerifyOptions {
        eta,
        ..VerifyOptions::default()
    };
    let report = run_verify(&inst, &opts).map_err(err)?;
    Ok(json!({
        "pass": report.pass(),
        "table": report.table(),
        "ratio": report.ratio,
        "failures": report.failures,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn generate(
    seed: u32,
    depth: u32,
    dimension: usize,
    profile: &str,
    p: f64,
    r: f64,
    q: f64,
) -> Result<String, JsError> {
    generate_json(seed, depth, dimension, profile, p, r, q).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn summary(instance: &str) -> Result<String, JsError> {
    summary_json(instance).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn levels(instance: &str, eta: f64) -> Result<String, JsError> {
    levels_json(instance, eta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn verify(instance: &str, eta: f64) -> Result<String, JsError> {
    verify_json(instance, eta).map_err(|e| JsError::new(&e))
}
