//! Built-in systems with closed-form solutions used as oracles.

use crate::contact::{State, SystemSpec};
use crate::error::{Error, Result};

/// Static description of a built-in model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub coordinates: &'static [&'static str],
    /// Parameter names with default values.
    pub parameters: &'static [(&'static str, f64)],
    pub hamiltonian: &'static str,
}

pub const GRAVITY_FRICTION: ModelInfo = ModelInfo {
    name: "gravity_friction",
    description: "particle in a vertical plane under gravity with linear friction",
    coordinates: &["x", "y"],
    parameters: &[("m", 1.0), ("g", 9.8), ("gamma", 0.5)],
    hamiltonian: "(p_x^2+p_y^2)/(2*m) + m*g*y + gamma*s",
};

pub const DAMPED_FREE_PARTICLE: ModelInfo = ModelInfo {
    name: "damped_free_particle",
    description: "free particle on a line with linear friction",
    coordinates: &["x"],
    parameters: &[("m", 1.0), ("gamma", 0.5)],
    hamiltonian: "p_x^2/(2*m) + gamma*s",
};

pub const DAMPED_OSCILLATOR: ModelInfo = ModelInfo {
    name: "damped_oscillator",
    description: "harmonic oscillator with linear friction",
    coordinates: &["x"],
    parameters: &[("m", 1.0), ("k", 1.0), ("gamma", 0.5)],
    hamiltonian: "p_x^2/(2*m) + k*x^2/2 + gamma*s",
};

pub const CATALOG: [ModelInfo; 3] = [GRAVITY_FRICTION, DAMPED_FREE_PARTICLE, DAMPED_OSCILLATOR];

pub fn model_info(name: &str) -> Result<&'static ModelInfo> {
    CATALOG
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::UnknownModel(name.to_string()))
}

/// Parameter values for a model: defaults with `overrides` applied.
pub fn resolve_parameters(info: &ModelInfo, overrides: &[(&str, f64)]) -> Result<Vec<(String, f64)>> {
    let mut params: Vec<(String, f64)> = info
        .parameters
        .iter()
        .map(|(n, v)| (n.to_string(), *v))
        .collect();
    for (name, value) in overrides {
        let slot = params.iter_mut().find(|(n, _)| n == name).ok_or_else(|| {
            Error::InvalidArgument(format!("model `{}` has no parameter `{name}`", info.name))
        })?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter `{name}` = {value} is not finite")));
        }
        slot.1 = *value;
    }
    Ok(params)
}

/// A built-in system with default parameters overridden by `overrides`.
pub fn builtin(name: &str, overrides: &[(&str, f64)]) -> Result<SystemSpec> {
    let info = model_info(name)?;
    let params = resolve_parameters(info, overrides)?;
    SystemSpec::new(info.coordinates, &params, info.hamiltonian)
}

fn param(sys: &SystemSpec, name: &str) -> Result<f64> {
    sys.parameter(name)
        .ok_or_else(|| Error::NoClosedForm(format!("system has no parameter `{name}`")))
}

/// Closed-form state at time `t` starting from `s0` at time 0.
///
/// `sys` supplies the parameter values and must be an instance of the named
/// model. For `gamma != 0` the action is recovered from
/// `s = (H(t) − kinetic − potential)/γ` with `H(t) = H(0)·e^{−γt}`; for
/// `gamma == 0` the action integral is evaluated in closed form.
pub fn analytic_reference(name: &str, sys: &SystemSpec, s0: &State, t: f64) -> Result<State> {
    let info = model_info(name)?;
    sys.check_dim(info.coordinates.len())?;
    sys.check_dim(s0.dim())?;
    if t == 0.0 {
        return Ok(s0.clone());
    }
    let m = param(sys, "m")?;
    let gamma = param(sys, "gamma")?;
    let (q, p, s_undamped) = match info.name {
        "gravity_friction" => gravity_solution(m, param(sys, "g")?, gamma, s0, t),
        "damped_free_particle" => {
            let (x, px, s) = oscillator_solution(m, 0.0, gamma, s0.q[0], s0.p[0], s0.s, t);
            (vec![x], vec![px], s)
        }
        "damped_oscillator" => {
            let (x, px, s) = oscillator_solution(m, param(sys, "k")?, gamma, s0.q[0], s0.p[0], s0.s, t);
            (vec![x], vec![px], s)
        }
        other => return Err(Error::NoClosedForm(other.to_string())),
    };
    let s = if gamma == 0.0 {
        s_undamped
    } else {
        // H without the γs term, at the new point.
        let mut rest = State::new(q.clone(), p.clone(), 0.0)?;
        let mechanical = sys.energy(&rest)?;
        let h0 = sys.energy(s0)?;
        let h_t = h0 * (-gamma * t).exp();
        rest.s = (h_t - mechanical) / gamma;
        rest.s
    };
    State::new(q, p, s)
}

fn gravity_solution(m: f64, g: f64, gamma: f64, s0: &State, t: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let (x0, y0, px0, py0) = (s0.q[0], s0.q[1], s0.p[0], s0.p[1]);
    if gamma == 0.0 {
        let x = x0 + px0 * t / m;
        let py = py0 - m * g * t;
        let y = y0 + py0 * t / m - 0.5 * g * t * t;
        let s = s0.s + (px0 * px0 / (2.0 * m) + py0 * py0 / (2.0 * m) - m * g * y0) * t
            - g * py0 * t * t
            + m * g * g * t.powi(3) / 3.0;
        return (vec![x, y], vec![px0, py], s);
    }
    let decay = (-gamma * t).exp();
    let grow = -(-gamma * t).exp_m1(); // 1 − e^{−γt}
    let px = px0 * decay;
    let x = x0 + px0 / (m * gamma) * grow;
    let py = (py0 + m * g / gamma) * decay - m * g / gamma;
    let y = y0 + (py0 / (m * gamma) + g / (gamma * gamma)) * grow - g / gamma * t;
    (vec![x, y], vec![px, py], f64::NAN)
}

/// Solution of `q̇ = p/m`, `ṗ = −k q − γ p`. The action is only computed for
/// `γ = 0` (NaN otherwise).
fn oscillator_solution(m: f64, k: f64, gamma: f64, q0: f64, p0: f64, s0: f64, t: f64) -> (f64, f64, f64) {
    let v0 = p0 / m;
    if gamma == 0.0 {
        if k == 0.0 {
            return (q0 + v0 * t, p0, s0 + p0 * p0 / (2.0 * m) * t);
        }
        let w = (k / m).sqrt();
        let (a, b) = (q0, v0 / w);
        let (sn, cs) = (w * t).sin_cos();
        let q = a * cs + b * sn;
        let p = m * w * (-a * sn + b * cs);
        let (s2, c2) = (2.0 * w * t).sin_cos();
        let action = 0.5 * k * ((b * b - a * a) * s2 / (2.0 * w) - a * b * (1.0 - c2) / w);
        return (q, p, s0 + action);
    }
    let w0sq = k / m;
    let half = 0.5 * gamma;
    let disc = half * half - w0sq;
    let (q, v) = if k == 0.0 {
        let decay = (-gamma * t).exp();
        (q0 + v0 / gamma * -(-gamma * t).exp_m1(), v0 * decay)
    } else if disc < 0.0 {
        let wd = (-disc).sqrt();
        let b = (v0 + half * q0) / wd;
        let env = (-half * t).exp();
        let (sn, cs) = (wd * t).sin_cos();
        let core = q0 * cs + b * sn;
        let dcore = -q0 * wd * sn + b * wd * cs;
        (env * core, env * (dcore - half * core))
    } else if disc > 0.0 {
        let r = disc.sqrt();
        let (l1, l2) = (-half + r, -half - r);
        let c1 = (v0 - l2 * q0) / (l1 - l2);
        let c2 = q0 - c1;
        let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
        (c1 * e1 + c2 * e2, c1 * l1 * e1 + c2 * l2 * e2)
    } else {
        let b = v0 + half * q0;
        let env = (-half * t).exp();
        let lin = q0 + b * t;
        (lin * env, (b - half * lin) * env)
    };
    (q, m * v, f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::hamiltonian_vector_field;
    use rand::{Rng, SeedableRng};

    fn reference() -> State {
        State::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn gravity_defaults() {
        let sys = builtin("gravity_friction", &[]).unwrap();
        assert_eq!(sys.energy(&reference()).unwrap(), 1.0);
        assert_eq!(sys.parameter("gamma"), Some(0.5));
        assert_eq!(sys.parameter("g"), Some(9.8));
    }

    #[test]
    fn overrides_and_errors() {
        let sys = builtin("damped_oscillator", &[("gamma", 0.0), ("m", 1.0), ("k", 1.0)]).unwrap();
        assert_eq!(sys.parameter("gamma"), Some(0.0));
        assert!(matches!(builtin("unknown", &[]), Err(Error::UnknownModel(_))));
        assert!(builtin("damped_oscillator", &[("omega", 1.0)]).is_err());
        assert!(builtin("damped_oscillator", &[("k", f64::NAN)]).is_err());
    }

    #[test]
    fn gravity_reference_values() {
        let sys = builtin("gravity_friction", &[]).unwrap();
        let st = analytic_reference("gravity_friction", &sys, &reference(), 10.0).unwrap();
        let e5 = (-5.0f64).exp();
        assert!((st.q[0] - 2.0 * (1.0 - e5)).abs() < 1e-15);
        assert!((st.q[0] - 1.986524106).abs() < 1e-9);
        assert!((st.p[1] - (20.6 * e5 - 19.6)).abs() < 1e-13);
        assert!((st.p[1] + 19.46119).abs() < 1e-5);
        assert_eq!(analytic_reference("gravity_friction", &sys, &reference(), 0.0).unwrap(), reference());
    }

    #[test]
    fn missing_closed_form_inputs() {
        let sys = builtin("damped_oscillator", &[]).unwrap();
        assert!(analytic_reference("gravity_friction", &sys, &reference(), 1.0).is_err());
    }

    /// Every model and branch, as (name, overrides, initial state).
    type Case = (&'static str, Vec<(&'static str, f64)>, State);

    fn cases() -> Vec<Case> {
        let one = |q: f64, p: f64, s: f64| State::new(vec![q], vec![p], s).unwrap();
        vec![
            ("gravity_friction", vec![], reference()),
            ("gravity_friction", vec![("gamma", 0.0)], State::new(vec![0.3, 1.0], vec![-0.4, 2.0], 0.7).unwrap()),
            ("gravity_friction", vec![("gamma", 1.3), ("m", 2.0)], State::new(vec![0.3, 1.0], vec![-0.4, 2.0], 0.7).unwrap()),
            ("damped_free_particle", vec![], one(0.5, 1.5, -0.2)),
            ("damped_free_particle", vec![("gamma", 0.0)], one(0.5, 1.5, -0.2)),
            ("damped_oscillator", vec![], one(1.0, 0.5, 0.3)),
            ("damped_oscillator", vec![("gamma", 3.0)], one(1.0, 0.5, 0.3)),
            ("damped_oscillator", vec![("gamma", 2.0)], one(1.0, 0.5, 0.3)),
            ("damped_oscillator", vec![("gamma", 0.0), ("k", 2.0), ("m", 0.5)], one(1.0, 0.5, 0.3)),
            ("damped_oscillator", vec![("k", 0.0)], one(1.0, 0.5, 0.3)),
        ]
    }

    #[test]
    fn references_satisfy_the_equations_of_motion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for (name, overrides, s0) in cases() {
            let sys = builtin(name, &overrides).unwrap();
            for _ in 0..20 {
                let t: f64 = rng.gen_range(0.1..5.0);
                let at = |t| analytic_reference(name, &sys, &s0, t).unwrap().to_vec();
                let (plus, minus) = (at(t + h), at(t - h));
                let state = State::from_slice(sys.dim(), &at(t));
                let field = hamiltonian_vector_field(&sys, &state).unwrap().to_vec();
                for k in 0..field.len() {
                    let fd = (plus[k] - minus[k]) / (2.0 * h);
                    assert!(
                        (fd - field[k]).abs() <= 1e-6 * field[k].abs().max(1.0),
                        "{name} {overrides:?} t={t} component {k}: fd {fd} vs {}",
                        field[k]
                    );
                }
            }
        }
    }

    #[test]
    fn references_decay_the_energy_exponentially() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for (name, overrides, s0) in cases() {
            let sys = builtin(name, &overrides).unwrap();
            let gamma = sys.parameter("gamma").unwrap();
            let h0 = sys.energy(&s0).unwrap();
            for _ in 0..20 {
                let t: f64 = rng.gen_range(0.0..10.0);
                let st = analytic_reference(name, &sys, &s0, t).unwrap();
                let expected = h0 * (-gamma * t).exp();
                assert!((sys.energy(&st).unwrap() - expected).abs() <= 1e-10, "{name} t={t}");
            }
        }
    }
}
