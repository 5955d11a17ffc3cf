//! Browser bindings for the darboux demo page.
//!
//! Each export takes a JSON request and returns a JSON response; errors
//! become JavaScript exceptions carrying the message. The same functions are
//! available natively as [`simulate`], [`classify_field`] and
//! [`check_quantity`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use darboux::analysis::{self, Classification, POINTWISE_TOL};
use darboux::calculus::{ScalarFieldSpec, VectorFieldSpec};
use darboux::contact::{sample_states, State, SystemSpec, DEFAULT_SEED};
use darboux::integrate::{integrate_adaptive, integrate_fixed, Trajectory};
use darboux::models::{builtin, model_info, CATALOG};

const MAX_STEPS: f64 = 2e6;

/// A built-in model with parameter overrides, or a custom Hamiltonian.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemRequest {
    pub model: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub coordinates: Option<Vec<String>>,
    pub hamiltonian: Option<String>,
}

impl SystemRequest {
    fn build(&self) -> Result<SystemSpec, String> {
        match (&self.model, &self.hamiltonian) {
            (Some(name), None) => {
                let refs: Vec<(&str, f64)> = self.params.iter().map(|(n, v)| (n.as_str(), *v)).collect();
                builtin(name, &refs).map_err(|e| e.to_string())
            }
            (None, Some(h)) => {
                let coords = self.coordinates.as_deref().unwrap_or_default();
                let params: Vec<(String, f64)> = self.params.iter().map(|(n, v)| (n.clone(), *v)).collect();
                SystemSpec::new(coords, &params, h).map_err(|e| e.to_string())
            }
            _ => Err("give either `model` or `hamiltonian`".into()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub s: f64,
}

fn initial_state(sys: &SystemSpec, init: &Option<InitialState>) -> Result<State, String> {
    let n = sys.dim();
    let state = match init {
        Some(i) => State::new(i.q.clone(), i.p.clone(), i.s).map_err(|e| e.to_string())?,
        None => State::new(vec![0.0; n], vec![1.0; n], 0.0).map_err(|e| e.to_string())?,
    };
    if state.q.len() != n || state.p.len() != n {
        return Err(format!("initial state needs {n} positions and {n} momenta"));
    }
    Ok(state)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub system: SystemRequest,
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    #[serde(default = "default_points")]
    pub max_points: usize,
}

fn default_points() -> usize {
    800
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateResponse {
    pub names: Vec<String>,
    pub method: String,
    pub steps: usize,
    pub rejected: usize,
    pub times: Vec<f64>,
    /// One row per kept sample, in chart order.
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub decay_factor: Option<f64>,
}

fn run(sys: &SystemSpec, s0: &State, t0: f64, tf: f64, dt: Option<f64>, tol: Option<f64>) -> Result<Trajectory, String> {
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(format!("need t0 < tf, got {t0} and {tf}"));
    }
    let result = match (dt, tol) {
        (Some(_), Some(_)) => return Err("give dt or tol, not both".into()),
        (_, Some(tol)) => {
            if tol.is_nan() || tol <= 0.0 {
                return Err("tol must be positive".into());
            }
            integrate_adaptive(sys, s0, t0, tf, tol)
        }
        (dt, None) => {
            let dt = dt.unwrap_or(1e-2);
            if dt.is_nan() || dt <= 0.0 || (tf - t0) / dt > MAX_STEPS {
                return Err(format!("dt must be positive and give at most {MAX_STEPS} steps"));
            }
            integrate_fixed(sys, s0, t0, tf, dt)
        }
    };
    result.map_err(|e| e.to_string())
}

fn thin(len: usize, max: usize) -> Vec<usize> {
    if len <= max || max < 2 {
        return (0..len).collect();
    }
    let stride = (len - 1) as f64 / (max - 1) as f64;
    let mut idx: Vec<usize> = (0..max).map(|k| (k as f64 * stride).round() as usize).collect();
    idx.dedup();
    idx
}

pub fn simulate(req: &SimulateRequest) -> Result<SimulateResponse, String> {
    let sys = req.system.build()?;
    let s0 = initial_state(&sys, &req.initial)?;
    let traj = run(&sys, &s0, req.t0, req.tf, req.dt, req.tol)?;
    let energy_at = |s: &State| sys.energy(s).map_err(|e| e.to_string());
    let keep = thin(traj.len(), req.max_points);
    let h0 = energy_at(&traj.states[0])?;
    let h1 = energy_at(traj.states.last().unwrap())?;
    Ok(SimulateResponse {
        names: sys.chart().chart_names().map(str::to_string).collect(),
        method: traj.method.clone(),
        steps: traj.accepted_steps,
        rejected: traj.rejected_steps,
        times: keep.iter().map(|&k| traj.times[k]).collect(),
        states: keep.iter().map(|&k| traj.states[k].to_vec()).collect(),
        energy: keep
            .iter()
            .map(|&k| energy_at(&traj.states[k]))
            .collect::<Result<_, _>>()?,
        decay_factor: (h0 != 0.0).then(|| h1 / h0),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub system: SystemRequest,
    /// Components keyed by chart name; missing directions are zero.
    pub components: BTreeMap<String, String>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_samples() -> usize {
    100
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_tol() -> f64 {
    POINTWISE_TOL
}

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::Conserved => "conserved",
        Classification::Dissipated => "dissipated",
        Classification::Both => "conserved and dissipated",
        Classification::Neither => "neither",
        Classification::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyResponse {
    pub verdict: &'static str,
    pub max_lie_eta: f64,
    pub max_lie_hamiltonian: f64,
    pub max_bracket: f64,
    pub noether_quantity: String,
    pub noether_classification: &'static str,
    pub conserved_quotient: Option<String>,
    pub quotient_classification: Option<&'static str>,
}

pub fn classify_field(req: &ClassifyRequest) -> Result<ClassifyResponse, String> {
    let sys = req.system.build()?;
    if req.samples == 0 || req.samples > 10_000 {
        return Err("samples must be between 1 and 10000".into());
    }
    let pairs: Vec<(&String, &String)> = req.components.iter().collect();
    let y = VectorFieldSpec::parse("Y", sys.chart(), &pairs).map_err(|e| e.to_string())?;
    let samples = sample_states(sys.dim(), req.samples, req.seed);
    let report = analysis::classify_symmetry(&sys, &y, &samples, req.tol);
    if let Some(e) = report.contact.errors.first().or(report.dynamical.errors.first()) {
        return Err(format!("sample {}: {}", e.sample, e.message));
    }
    let verdict = if report.contact.passed {
        "contact symmetry"
    } else if report.dynamical.passed {
        "dynamical symmetry"
    } else {
        "not a symmetry"
    };
    let f = analysis::noether_quantity(&y);
    let fq = analysis::check_quantity(&sys, &f, &samples, req.tol);
    let h = analysis::hamiltonian_quantity(&sys);
    let h_clear = samples.iter().all(|s| {
        sys.bindings(s)
            .ok()
            .and_then(|b| h.evaluate(&b).ok())
            .is_some_and(|v| v.abs() >= 1e-3)
    });
    let (quotient, quotient_class) = if h_clear {
        let c = analysis::conserved_from_symmetry(&sys, &y);
        let cq = analysis::check_quantity(&sys, &c, &samples, req.tol);
        (Some(c.name), Some(class_name(cq.classification)))
    } else {
        (None, None)
    };
    Ok(ClassifyResponse {
        verdict,
        max_lie_eta: report.max_lie_eta,
        max_lie_hamiltonian: report.max_lie_hamiltonian,
        max_bracket: report.dynamical.max_residual,
        noether_quantity: f.expression.to_string(),
        noether_classification: class_name(fq.classification),
        conserved_quotient: quotient,
        quotient_classification: quotient_class,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRequest {
    pub system: SystemRequest,
    pub expression: String,
    pub initial: Option<InitialState>,
    pub tf: f64,
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_points")]
    pub max_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityResponse {
    pub classification: &'static str,
    pub max_conserved_residual: f64,
    pub max_dissipated_residual: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `F(0)·exp(−∫ ∂H/∂s dt)`, the value a dissipated quantity must take.
    pub predicted: Vec<f64>,
}

/// Classify `F` along a trajectory and compare it with the decay law.
pub fn check_quantity(req: &QuantityRequest) -> Result<QuantityResponse, String> {
    let sys = req.system.build()?;
    let f = ScalarFieldSpec::parse(req.expression.clone(), sys.chart(), &req.expression).map_err(|e| e.to_string())?;
    let s0 = initial_state(&sys, &req.initial)?;
    let traj = run(&sys, &s0, 0.0, req.tf, req.dt, None)?;
    let report = analysis::check_quantity(&sys, &f, &traj.states, req.tol);
    let s_slot = sys.chart().s_slot();
    let mut values = Vec::with_capacity(traj.len());
    let mut rates = Vec::with_capacity(traj.len());
    for s in &traj.states {
        let b = sys.bindings(s).map_err(|e| e.to_string())?;
        values.push(f.evaluate(&b).map_err(|e| e.to_string())?);
        rates.push(sys.hamiltonian().differentiate_slot(s_slot, &b).map_err(|e| e.to_string())?);
    }
    let mut predicted = Vec::with_capacity(traj.len());
    let mut integral = 0.0;
    for k in 0..traj.len() {
        if k > 0 {
            integral += 0.5 * (rates[k] + rates[k - 1]) * (traj.times[k] - traj.times[k - 1]);
        }
        predicted.push(values[0] * (-integral).exp());
    }
    let keep = thin(traj.len(), req.max_points);
    Ok(QuantityResponse {
        classification: class_name(report.classification),
        max_conserved_residual: report.conserved.max_residual,
        max_dissipated_residual: report.dissipated.max_residual,
        times: keep.iter().map(|&k| traj.times[k]).collect(),
        values: keep.iter().map(|&k| values[k]).collect(),
        predicted: keep.iter().map(|&k| predicted[k]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub coordinates: &'static [&'static str],
    pub parameters: Vec<(&'static str, f64)>,
    pub hamiltonian: &'static str,
}

pub fn models() -> Vec<ModelEntry> {
    CATALOG
        .iter()
        .map(|m| ModelEntry {
            name: m.name,
            description: m.description,
            coordinates: m.coordinates,
            parameters: m.parameters.to_vec(),
            hamiltonian: m.hamiltonian,
        })
        .collect()
}

fn respond<Req, Resp>(json: &str, f: impl FnOnce(&Req) -> Result<Resp, String>) -> Result<String, String>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let req: Req = serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))?;
    let resp = f(&req)?;
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

/// JSON in, JSON out; used by the bindings below.
pub fn simulate_json(json: &str) -> Result<String, String> {
    respond(json, simulate)
}

pub fn classify_field_json(json: &str) -> Result<String, String> {
    respond(json, classify_field)
}

pub fn check_quantity_json(json: &str) -> Result<String, String> {
    respond(json, check_quantity)
}

#[wasm_bindgen(js_name = listModels)]
pub fn list_models_js() -> String {
    serde_json::to_string(&models()).expect("catalog serializes")
}

#[wasm_bindgen(js_name = modelHamiltonian)]
pub fn model_hamiltonian_js(name: &str) -> Result<String, JsError> {
    model_info(name)
        .map(|m| m.hamiltonian.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = classifyField)]
pub fn classify_field_js(request: &str) -> Result<String, JsError> {
    classify_field_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = checkQuantity)]
pub fn check_quantity_js(request: &str) -> Result<String, JsError> {
    check_quantity_json(request).map_err(|e| JsError::new(&e))
}
