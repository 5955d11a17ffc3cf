//! Darboux-chart states, the contact form, the Reeb field and the contact
//! Hamiltonian vector field.
//!
//! The contact form is fixed to its Darboux normal form `η = ds − p_i dq^i`,
//! so `dη = dq^i ∧ dp_i` and the Reeb field is `∂/∂s`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Chart, Expression};

/// A point `(q^1..q^n, p_1..p_n, s)` of the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub s: f64,
}

impl State {
    pub fn new(q: Vec<f64>, p: Vec<f64>, s: f64) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(Error::Dimension {
                expected: q.len().max(1),
                found: p.len(),
            });
        }
        Ok(State { q, p, s })
    }

    pub fn zeros(n: usize) -> Self {
        State {
            q: vec![0.0; n],
            p: vec![0.0; n],
            s: 0.0,
        }
    }

    /// Inverse of [`State::to_vec`].
    pub fn from_slice(n: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), 2 * n + 1);
        State {
            q: flat[..n].to_vec(),
            p: flat[n..2 * n].to_vec(),
            s: flat[2 * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Coordinates in chart order `q.., p.., s`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dim() + 1);
        v.extend_from_slice(&self.q);
        v.extend_from_slice(&self.p);
        v.push(self.s);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite()) && self.s.is_finite()
    }

    pub fn norm_inf(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.p)
            .chain(std::iter::once(&self.s))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Vector components in the basis `(∂/∂q^i, ∂/∂p_i, ∂/∂s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub ds: f64,
}

impl Tangent {
    pub fn zeros(n: usize) -> Self {
        Tangent {
            dq: vec![0.0; n],
            dp: vec![0.0; n],
            ds: 0.0,
        }
    }

    pub fn from_slice(n: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), 2 * n + 1);
        Tangent {
            dq: flat[..n].to_vec(),
            dp: flat[n..2 * n].to_vec(),
            ds: flat[2 * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dq.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dim() + 1);
        v.extend_from_slice(&self.dq);
        v.extend_from_slice(&self.dp);
        v.push(self.ds);
        v
    }

    pub fn norm_inf(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Covector components in the basis `(dq^i, dp_i, ds)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub cq: Vec<f64>,
    pub cp: Vec<f64>,
    pub cs: f64,
}

impl Covector {
    pub fn zeros(n: usize) -> Self {
        Covector {
            cq: vec![0.0; n],
            cp: vec![0.0; n],
            cs: 0.0,
        }
    }

    pub fn from_slice(n: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), 2 * n + 1);
        Covector {
            cq: flat[..n].to_vec(),
            cp: flat[n..2 * n].to_vec(),
            cs: flat[2 * n],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.cq.len() + 1);
        v.extend_from_slice(&self.cq);
        v.extend_from_slice(&self.cp);
        v.push(self.cs);
        v
    }

    pub fn norm_inf(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A contact Hamiltonian system `(M, η, H)` on a Darboux chart.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    chart: Arc<Chart>,
    parameters: Vec<f64>,
    hamiltonian: Expression,
}

impl SystemSpec {
    /// Build a system from coordinate names, parameter values and the source
    /// text of the Hamiltonian.
    pub fn new<S: AsRef<str>>(
        coordinates: &[S],
        parameters: &[(String, f64)],
        hamiltonian: &str,
    ) -> Result<Self> {
        let names: Vec<&str> = parameters.iter().map(|(n, _)| n.as_str()).collect();
        let chart = Arc::new(Chart::new(coordinates, &names)?);
        let h = Expression::parse(hamiltonian, &chart)?;
        Self::from_parts(chart, parameters.iter().map(|(_, v)| *v).collect(), h)
    }

    pub fn from_parts(chart: Arc<Chart>, parameters: Vec<f64>, hamiltonian: Expression) -> Result<Self> {
        if parameters.len() != chart.parameters().len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameter values for {} declared parameters",
                parameters.len(),
                chart.parameters().len()
            )));
        }
        for (name, v) in chart.parameters().iter().zip(&parameters) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("parameter `{name}` = {v} is not finite")));
            }
        }
        if hamiltonian.chart() != &chart && **hamiltonian.chart() != *chart {
            return Err(Error::InvalidArgument("Hamiltonian belongs to another chart".into()));
        }
        Ok(SystemSpec {
            chart,
            parameters,
            hamiltonian,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn hamiltonian(&self) -> &Expression {
        &self.hamiltonian
    }

    pub fn parameter_values(&self) -> &[f64] {
        &self.parameters
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        let j = self.chart.parameters().iter().position(|p| p == name)?;
        Some(self.parameters[j])
    }

    /// Parse another expression on this system's chart.
    pub fn parse(&self, source: &str) -> Result<Expression> {
        Ok(Expression::parse(source, &self.chart)?)
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// Full bindings (coordinates and parameters) at a state.
    pub fn bindings(&self, state: &State) -> Result<Bindings> {
        self.check_dim(state.dim())?;
        let mut values = state.to_vec();
        values.extend_from_slice(&self.parameters);
        Ok(Bindings::from_slots(self.chart.clone(), values))
    }

    pub fn energy(&self, state: &State) -> Result<f64> {
        Ok(self.hamiltonian.evaluate(&self.bindings(state)?)?)
    }
}

/// `η(v) = v^s − Σ p_i v^{q_i}`.
pub fn contact_form_apply(state: &State, v: &Tangent) -> Result<f64> {
    if v.dim() != state.dim() {
        return Err(Error::Dimension {
            expected: state.dim(),
            found: v.dim(),
        });
    }
    Ok(v.ds - state.p.iter().zip(&v.dq).map(|(p, dq)| p * dq).sum::<f64>())
}

/// Components of `η` itself at a state.
pub fn contact_form(state: &State) -> Covector {
    Covector {
        cq: state.p.iter().map(|p| -p).collect(),
        cp: vec![0.0; state.dim()],
        cs: 1.0,
    }
}

/// `i(v) dη` with `dη = Σ dq^i ∧ dp_i`.
pub fn contract_d_eta(v: &Tangent) -> Covector {
    Covector {
        cq: v.dp.iter().map(|dp| -dp).collect(),
        cp: v.dq.clone(),
        cs: 0.0,
    }
}

/// The Reeb field, `∂/∂s` in Darboux coordinates.
pub fn reeb_field(state: &State) -> Tangent {
    let mut t = Tangent::zeros(state.dim());
    t.ds = 1.0;
    t
}

/// `X_H` at a state, from exact partials of `H`.
pub fn hamiltonian_vector_field(sys: &SystemSpec, state: &State) -> Result<Tangent> {
    let b = sys.bindings(state)?;
    let n = sys.dim();
    let (h, grad) = sys.hamiltonian.value_and_gradient(&b)?;
    let (h_q, rest) = grad.split_at(n);
    let (h_p, h_s) = (&rest[..n], rest[n]);
    Ok(Tangent {
        dq: h_p.to_vec(),
        dp: (0..n).map(|i| -(h_q[i] + state.p[i] * h_s)).collect(),
        ds: (0..n).map(|i| state.p[i] * h_p[i]).sum::<f64>() - h,
    })
}

/// Residuals of the two defining equations of `X_H`:
/// `i(X)η + H` and `i(X)dη − dH + (∂H/∂s) η`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonResiduals {
    pub r_eta: f64,
    pub r_deta: Covector,
}

impl HamiltonResiduals {
    pub fn max_abs(&self) -> f64 {
        self.r_eta.abs().max(self.r_deta.norm_inf())
    }
}

pub fn hamilton_equation_residuals(sys: &SystemSpec, state: &State) -> Result<HamiltonResiduals> {
    let x = hamiltonian_vector_field(sys, state)?;
    residuals_for_field(sys, state, &x)
}

/// Residuals for an arbitrary candidate field `x`.
pub fn residuals_for_field(sys: &SystemSpec, state: &State, x: &Tangent) -> Result<HamiltonResiduals> {
    let b = sys.bindings(state)?;
    let (h, grad) = sys.hamiltonian.value_and_gradient(&b)?;
    let dh = Covector::from_slice(sys.dim(), &grad);
    let h_s = dh.cs;
    let eta = contact_form(state);
    let contracted = contract_d_eta(x);
    let r_deta = Covector {
        cq: (0..sys.dim())
            .map(|i| contracted.cq[i] - dh.cq[i] + h_s * eta.cq[i])
            .collect(),
        cp: (0..sys.dim())
            .map(|i| contracted.cp[i] - dh.cp[i] + h_s * eta.cp[i])
            .collect(),
        cs: contracted.cs - dh.cs + h_s * eta.cs,
    };
    Ok(HamiltonResiduals {
        r_eta: contact_form_apply(state, x)? + h,
        r_deta,
    })
}

/// Deterministic uniform sampler over a box in the chart.
#[derive(Debug, Clone)]
pub struct StateSampler {
    rng: ChaCha8Rng,
    half_width: f64,
    min_abs_momentum: f64,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BOX: f64 = 2.0;

impl StateSampler {
    pub fn new(seed: u64) -> Self {
        StateSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            half_width: DEFAULT_BOX,
            min_abs_momentum: 0.0,
        }
    }

    pub fn half_width(mut self, w: f64) -> Self {
        self.half_width = w;
        self
    }

    /// Resample momenta closer to zero than `m`; used when downstream
    /// quantities divide by a momentum.
    pub fn avoid_small_momenta(mut self, m: f64) -> Self {
        self.min_abs_momentum = m;
        self
    }

    pub fn sample(&mut self, n: usize) -> State {
        let w = self.half_width;
        let q = (0..n).map(|_| self.rng.gen_range(-w..=w)).collect();
        let p = (0..n)
            .map(|_| loop {
                let v = self.rng.gen_range(-w..=w);
                if v.abs() >= self.min_abs_momentum {
                    break v;
                }
            })
            .collect();
        let s = self.rng.gen_range(-w..=w);
        State { q, p, s }
    }

    pub fn samples(&mut self, n: usize, count: usize) -> Vec<State> {
        (0..count).map(|_| self.sample(n)).collect()
    }
}

/// `count` states from the default box with the given seed.
pub fn sample_states(n: usize, count: usize, seed: u64) -> Vec<State> {
    StateSampler::new(seed).samples(n, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gravity() -> SystemSpec {
        SystemSpec::new(
            &["x", "y"],
            &[("m".into(), 1.0), ("g".into(), 9.8), ("gamma".into(), 0.5)],
            "(p_x^2+p_y^2)/(2*m) + m*g*y + gamma*s",
        )
        .unwrap()
    }

    fn reference_state() -> State {
        State::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn contact_form_on_hamiltonian_field_value() {
        let v = Tangent::from_slice(2, &[1.0, 1.0, -0.5, -10.3, 1.0]);
        assert_eq!(contact_form_apply(&reference_state(), &v).unwrap(), -1.0);
        assert_eq!(contact_form_apply(&reference_state(), &Tangent::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn contact_form_rejects_dimension_mismatch() {
        assert!(matches!(
            contact_form_apply(&reference_state(), &Tangent::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn reeb_field_normalizes_eta_and_annihilates_d_eta() {
        let state = State::new(vec![0.3, -1.0], vec![2.0, 0.7], 5.0).unwrap();
        let r = reeb_field(&state);
        assert_eq!(r.to_vec(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(contact_form_apply(&state, &r).unwrap(), 1.0);
        assert_eq!(contract_d_eta(&r).norm_inf(), 0.0);
    }

    #[test]
    fn gravity_field_at_reference_state() {
        let x = hamiltonian_vector_field(&gravity(), &reference_state()).unwrap();
        assert_eq!(x.dq, vec![1.0, 1.0]);
        assert_eq!(x.dp[0], -0.5);
        assert!((x.dp[1] + 10.3).abs() < 1e-14);
        assert_eq!(x.ds, 1.0);
    }

    #[test]
    fn zero_hamiltonian_gives_zero_field() {
        let sys = SystemSpec::new(&["x"], &[], "0").unwrap();
        let state = State::new(vec![1.0], vec![-2.0], 3.0).unwrap();
        assert_eq!(hamiltonian_vector_field(&sys, &state).unwrap(), Tangent::zeros(1));
        let r = hamilton_equation_residuals(&sys, &state).unwrap();
        assert_eq!(r.r_eta, 0.0);
        assert_eq!(r.r_deta, Covector::zeros(1));
    }

    #[test]
    fn action_hamiltonian() {
        let sys = SystemSpec::new(&["q"], &[], "s").unwrap();
        let state = State::new(vec![0.0], vec![1.0], 2.0).unwrap();
        let x = hamiltonian_vector_field(&sys, &state).unwrap();
        assert_eq!(x.to_vec(), vec![0.0, -1.0, -2.0]);
    }

    #[test]
    fn residuals_vanish_on_random_states() {
        let sys = gravity();
        for state in sample_states(2, 100, 7) {
            let r = hamilton_equation_residuals(&sys, &state).unwrap();
            assert!(r.r_eta.abs() <= 1e-12, "{r:?}");
            assert!(r.r_deta.norm_inf() <= 1e-12, "{r:?}");
            assert_eq!(r.r_deta.cs, 0.0);
        }
    }

    #[test]
    fn residuals_detect_corrupted_field() {
        let sys = gravity();
        let state = reference_state();
        let mut x = hamiltonian_vector_field(&sys, &state).unwrap();
        x.dq[0] += 1.0;
        let r = residuals_for_field(&sys, &state, &x).unwrap();
        assert_eq!(r.r_deta.cp[0], 1.0);
    }

    #[test]
    fn energy_dissipation_along_field() {
        // dH(X_H) = -(∂H/∂s) H
        let sys = gravity();
        for state in sample_states(2, 50, 3) {
            let b = sys.bindings(&state).unwrap();
            let (h, grad) = sys.hamiltonian().value_and_gradient(&b).unwrap();
            let x = hamiltonian_vector_field(&sys, &state).unwrap();
            let dh_x: f64 = grad.iter().zip(x.to_vec()).map(|(g, v)| g * v).sum();
            assert!((dh_x + grad[4] * h).abs() <= 1e-10 * h.abs().max(1.0));
        }
    }

    #[test]
    fn sampler_is_deterministic_and_respects_momentum_gap() {
        let a = sample_states(2, 10, 42);
        let b = sample_states(2, 10, 42);
        assert_eq!(a, b);
        let mut sampler = StateSampler::new(1).avoid_small_momenta(0.5);
        for st in sampler.samples(3, 200) {
            assert!(st.p.iter().all(|p| p.abs() >= 0.5));
            assert!(st.norm_inf() <= 2.0);
        }
    }
}
