//! Browser bindings for a few `mforge` computations.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are what the native tests exercise.

use mforge::config::coincident_point;
use mforge::convex::Quadratic;
use mforge::critical::{calabi_decomposition, convexity_counterexample, extremal_field, p1_configuration};
use mforge::flow::{group_flow, StepControl};
use mforge::measure::{normalize_phi, tian_zhu_check, DiscreteMeasure};
use mforge::phase::{PhaseSpace, SpaceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_D: usize = 8;
const MAX_POINTS: usize = 500;

#[derive(Serialize)]
struct FlowOut {
    termination: String,
    steps: usize,
    t: Vec<f64>,
    energy: Vec<f64>,
    grad_norm: Vec<f64>,
    kn_value: Vec<f64>,
    csv: String,
}

#[derive(Serialize)]
struct SpectrumOut {
    d: usize,
    d_prime: usize,
    eigenvalues: Vec<f64>,
    zero_block_dim: usize,
    gz_dim: usize,
    kz_dim: usize,
    /// Imaginary diagonal of the extremal field, `None` when it is undefined.
    extremal_diagonal: Option<[f64; 2]>,
    counterexample: Vec<f64>,
    control: Vec<f64>,
}

#[derive(Serialize)]
struct TianZhuOut {
    points: usize,
    volume: f64,
    lhs: f64,
    rhs: f64,
    defect: f64,
    exp_c_hat: f64,
    chain_defect_raw: f64,
    chain_defect_corrected: f64,
}

fn check_d(d: usize) -> Result<(), String> {
    if d == 0 || d > MAX_D {
        return Err(format!("d must lie in 1..={MAX_D}"));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Quadratic flow on `(P^1)^d` from a seeded random start.
pub fn flow_json(d: usize, seed: u64, t_max: f64) -> Result<String, String> {
    check_d(d)?;
    if !(t_max.is_finite() && t_max > 0.0 && t_max <= 1000.0) {
        return Err("t_max must lie in (0, 1000]".into());
    }
    let space = PhaseSpace::p1_power(d);
    let z0 = space.random_point(&mut ChaCha8Rng::seed_from_u64(seed));
    let (trace, _) =
        group_flow(&space, &Quadratic, &z0, &StepControl::default(), 1e-8, t_max).map_err(|e| e.to_string())?;
    let col = |g: fn(&mforge::flow::FlowSample) -> f64| trace.samples.iter().map(g).collect::<Vec<f64>>();
    to_json(&FlowOut {
        termination: format!("{:?}", trace.reason),
        steps: trace.samples.len() - 1,
        t: col(|s| s.t),
        energy: col(|s| s.energy),
        grad_norm: col(|s| s.grad_norm),
        kn_value: col(|s| s.kn_value),
        csv: trace.to_csv(),
    })
}

/// Spectrum at `z_0(d')` for the quadratic, plus the indefinite pair on `(P^1)^d x (P^1)^d`.
pub fn spectrum_json(d: usize, d_prime: usize) -> Result<String, String> {
    check_d(d)?;
    let space = PhaseSpace::p1_power(d);
    let z = p1_configuration(&space, d_prime, 0.0).map_err(|e| e.to_string())?;
    let dec = calabi_decomposition(&space, &Quadratic, &z).map_err(|e| e.to_string())?;
    let extremal_diagonal = extremal_field(&space, &Quadratic, &z, 1e-10, None).ok().map(|ef| {
        let m = &ef.xi.blocks()[0];
        [m[(0, 0)].im, m[(1, 1)].im]
    });
    let product = PhaseSpace::product(&SpaceSpec::P1Power { d });
    let z0 = coincident_point(&space).map_err(|e| e.to_string())?;
    let ce = convexity_counterexample(&product, &z0).map_err(|e| e.to_string())?;
    to_json(&SpectrumOut {
        d,
        d_prime,
        eigenvalues: dec.eigenvalues,
        zero_block_dim: dec.zero_block_dim,
        gz_dim: dec.gz_dim,
        kz_dim: dec.kz_dim,
        extremal_diagonal,
        counterexample: ce.eigenvalues,
        control: ce.control_eigenvalues,
    })
}

/// Random discrete instance of the soliton Futaki identity.
pub fn tian_zhu_json(points: usize, seed: u64) -> Result<String, String> {
    if !(3..=MAX_POINTS).contains(&points) {
        return Err(format!("points must lie in 3..={MAX_POINTS}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..points).map(|_| rng.gen_range(0.1..1.0)).collect();
    let m = DiscreteMeasure::new(weights).map_err(|e| e.to_string())?;
    let mut raw = || (0..points).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let (p, a, b) = (raw(), raw(), raw());
    let phi = normalize_phi(&m, &p).map_err(|e| e.to_string())?;
    let r = tian_zhu_check(&m, &phi, &a, &b).map_err(|e| e.to_string())?;
    to_json(&TianZhuOut {
        points,
        volume: m.total(),
        lhs: r.lhs,
        rhs: r.rhs,
        defect: r.defect,
        exp_c_hat: r.exp_c_hat,
        chain_defect_raw: r.chain_defect_raw,
        chain_defect_corrected: r.chain_defect_corrected,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn flow(d: usize, seed: u32, t_max: f64) -> Result<String, JsValue> {
    js(flow_json(d, seed as u64, t_max))
}

#[wasm_bindgen]
pub fn spectrum(d: usize, d_prime: usize) -> Result<String, JsValue> {
    js(spectrum_json(d, d_prime))
}

#[wasm_bindgen]
pub fn tian_zhu(points: usize, seed: u32) -> Result<String, JsValue> {
    js(tian_zhu_json(points, seed as u64))
}
