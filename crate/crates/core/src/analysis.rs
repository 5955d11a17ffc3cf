//! Symmetries, dissipated and conserved quantities.
//!
//! Every check evaluates its defining identity pointwise with exact
//! derivatives at a set of sample states (random draws, or the samples of a
//! trajectory) and summarizes the residuals in a [`CheckReport`].
//!
//! A function `F` is *conserved* when `X_H(F) = 0` and *dissipated* when
//! `X_H(F) = −R(H)·F`. If `Y` is an infinitesimal dynamical symmetry
//! (`[Y, X_H] = 0`) then `−η(Y)` is dissipated; quotients of dissipated
//! quantities are conserved.

use serde::Serialize;

use crate::calculus::{
    contraction_with_eta, lie_bracket, lie_derivative_contact_form, lie_derivative_scalar,
    vf_jacobian, ScalarFieldSpec, VectorFieldSpec,
};
use crate::contact::{contact_form, contact_form_apply, hamiltonian_vector_field, State, SystemSpec};
use crate::error::{Error, Result};
use crate::expr::{Chart, Expression};

/// Default tolerance for pointwise residuals with exact derivatives.
pub const POINTWISE_TOL: f64 = 1e-8;
/// Default tolerance for comparisons against integrated trajectories.
pub const TRAJECTORY_TOL: f64 = 1e-6;
/// A "neither" verdict needs residuals this many times above tolerance.
pub const NEITHER_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    ContactSymmetry,
    DynamicalSymmetry,
    Conserved,
    Dissipated,
    BracketCharacterization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleError {
    pub sample: usize,
    pub message: String,
}

/// Residual statistics of one check over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub subject: String,
    pub kind: CheckKind,
    pub samples: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<SampleError>,
}

impl CheckReport {
    /// Summarize per-sample residuals. Samples that failed to evaluate, or
    /// produced a non-finite residual, are listed and fail the check.
    pub fn from_residuals(
        subject: impl Into<String>,
        kind: CheckKind,
        tolerance: f64,
        residuals: impl IntoIterator<Item = Result<f64>>,
    ) -> Self {
        let mut errors = Vec::new();
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut ok = 0usize;
        let mut total = 0usize;
        for (k, r) in residuals.into_iter().enumerate() {
            total += 1;
            match r {
                Ok(v) if v.is_finite() => {
                    let v = v.abs();
                    max = max.max(v);
                    sum += v;
                    ok += 1;
                }
                Ok(v) => errors.push(SampleError {
                    sample: k,
                    message: format!("non-finite residual {v}"),
                }),
                Err(e) => errors.push(SampleError {
                    sample: k,
                    message: e.to_string(),
                }),
            }
        }
        let mean = if ok > 0 { sum / ok as f64 } else { 0.0 };
        CheckReport {
            subject: subject.into(),
            kind,
            samples: total,
            max_residual: max,
            mean_residual: mean,
            tolerance,
            passed: total > 0 && errors.is_empty() && max <= tolerance,
            errors,
        }
    }

    pub fn failed_samples(&self) -> usize {
        self.errors.len()
    }
}

/// Contact- and dynamical-symmetry verdicts for one vector field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub contact: CheckReport,
    pub dynamical: CheckReport,
    /// Largest `‖L_Y η‖∞` over the samples.
    pub max_lie_eta: f64,
    /// Largest `|L_Y H|` over the samples.
    pub max_lie_hamiltonian: f64,
}

impl SymmetryReport {
    /// A contact symmetry is always a dynamical symmetry.
    pub fn implication_holds(&self) -> bool {
        !self.contact.passed || self.dynamical.passed
    }
}

/// Check `L_Y η = 0, L_Y H = 0` (contact) and `[Y, X_H] = 0` (dynamical).
pub fn classify_symmetry(sys: &SystemSpec, y: &VectorFieldSpec, samples: &[State], tol: f64) -> SymmetryReport {
    let xh = VectorFieldSpec::hamiltonian(sys);
    let h = ScalarFieldSpec::new("H", sys.hamiltonian().clone());
    let mut max_eta = 0.0f64;
    let mut max_h = 0.0f64;
    let mut contact = Vec::with_capacity(samples.len());
    let mut dynamical = Vec::with_capacity(samples.len());
    for state in samples {
        let b = match sys.bindings(state) {
            Ok(b) => b,
            Err(e) => {
                contact.push(Err(Error::InvalidArgument(e.to_string())));
                dynamical.push(Err(e));
                continue;
            }
        };
        contact.push((|| {
            let eta = lie_derivative_contact_form(y, &b)?.norm_inf();
            let lh = lie_derivative_scalar(y, &h, &b)?.abs();
            max_eta = max_eta.max(eta);
            max_h = max_h.max(lh);
            Ok(eta.max(lh))
        })());
        dynamical.push(lie_bracket(y, &xh, &b).map(|t| t.norm_inf()));
    }
    SymmetryReport {
        contact: CheckReport::from_residuals(&y.name, CheckKind::ContactSymmetry, tol, contact),
        dynamical: CheckReport::from_residuals(&y.name, CheckKind::DynamicalSymmetry, tol, dynamical),
        max_lie_eta: max_eta,
        max_lie_hamiltonian: max_h,
    }
}

fn group(name: &str) -> String {
    let simple = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
    if simple {
        name.to_string()
    } else {
        format!("({name})")
    }
}

/// `F = −η(Y)`, the quantity the Dissipation theorem attaches to `Y`.
pub fn noether_quantity(y: &VectorFieldSpec) -> ScalarFieldSpec {
    ScalarFieldSpec::from_expression(contraction_with_eta(y).neg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Conserved,
    Dissipated,
    /// Both identities hold (e.g. `F = 0`).
    Both,
    Neither,
    /// Residuals fall between the tolerance and the "neither" threshold, or
    /// some samples could not be evaluated.
    Inconclusive,
}

impl Classification {
    pub fn is_conserved(self) -> bool {
        matches!(self, Classification::Conserved | Classification::Both)
    }

    pub fn is_dissipated(self) -> bool {
        matches!(self, Classification::Dissipated | Classification::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityReport {
    pub subject: String,
    pub classification: Classification,
    pub conserved: CheckReport,
    pub dissipated: CheckReport,
}

/// Classify `F` from `r_cons = X_H(F)` and `r_diss = X_H(F) + (∂H/∂s)·F`.
pub fn check_quantity(sys: &SystemSpec, f: &ScalarFieldSpec, samples: &[State], tol: f64) -> QuantityReport {
    let mut cons = Vec::with_capacity(samples.len());
    let mut diss = Vec::with_capacity(samples.len());
    let s_slot = sys.chart().s_slot();
    for state in samples {
        let r = (|| {
            let b = sys.bindings(state)?;
            let x = hamiltonian_vector_field(sys, state)?.to_vec();
            let (value, grad) = f.expression.value_and_gradient(&b)?;
            let lie: f64 = grad.iter().zip(&x).map(|(g, v)| g * v).sum();
            let h_s = sys.hamiltonian().differentiate_slot(s_slot, &b)?;
            Ok((lie, lie + h_s * value))
        })();
        match r {
            Ok((c, d)) => {
                cons.push(Ok(c));
                diss.push(Ok(d));
            }
            Err(e) => {
                let e: Error = e;
                diss.push(Err(Error::InvalidArgument(e.to_string())));
                cons.push(Err(e));
            }
        }
    }
    let conserved = CheckReport::from_residuals(&f.name, CheckKind::Conserved, tol, cons);
    let dissipated = CheckReport::from_residuals(&f.name, CheckKind::Dissipated, tol, diss);
    let classification = match (conserved.passed, dissipated.passed) {
        (true, true) => Classification::Both,
        (true, false) => Classification::Conserved,
        (false, true) => Classification::Dissipated,
        (false, false) => {
            let far = NEITHER_FACTOR * tol;
            let clean = conserved.errors.is_empty() && dissipated.errors.is_empty();
            if clean && conserved.max_residual > far && dissipated.max_residual > far {
                Classification::Neither
            } else {
                Classification::Inconclusive
            }
        }
    };
    QuantityReport {
        subject: f.name.clone(),
        classification,
        conserved,
        dissipated,
    }
}

/// `F1/F2`; conserved when both are dissipated and `F2 ≠ 0`.
pub fn quotient_quantity(f1: &ScalarFieldSpec, f2: &ScalarFieldSpec) -> ScalarFieldSpec {
    ScalarFieldSpec::new(
        format!("{}/{}", group(&f1.name), group(&f2.name)),
        f1.expression.div(&f2.expression),
    )
}

/// `F·G`; dissipated when `F` is dissipated and `G` conserved.
pub fn product_quantity(f_diss: &ScalarFieldSpec, g_cons: &ScalarFieldSpec) -> ScalarFieldSpec {
    ScalarFieldSpec::new(
        format!("{}*{}", group(&f_diss.name), group(&g_cons.name)),
        f_diss.expression.mul(&g_cons.expression),
    )
}

/// The Hamiltonian as a scalar field named `H`.
pub fn hamiltonian_quantity(sys: &SystemSpec) -> ScalarFieldSpec {
    ScalarFieldSpec::new("H", sys.hamiltonian().clone())
}

/// `−η(Y)/H`, conserved for a dynamical symmetry `Y` wherever `H ≠ 0`.
pub fn conserved_from_symmetry(sys: &SystemSpec, y: &VectorFieldSpec) -> ScalarFieldSpec {
    quotient_quantity(&noether_quantity(y), &hamiltonian_quantity(sys))
}

/// `Y_F = −F·R`, the field with `−η(Y_F) = F`.
pub fn reeb_lift(f: &ScalarFieldSpec) -> VectorFieldSpec {
    let chart = f.expression.chart();
    let mut components: Vec<Expression> = (0..chart.manifold_dim())
        .map(|_| Expression::zero(chart))
        .collect();
    components[chart.s_slot()] = f.expression.neg();
    VectorFieldSpec::new(format!("Y_{}", group(&f.name)), components)
        .expect("component count matches the chart")
}

/// `η([X, X_H])`; zero exactly when `η(X)` is a dissipated quantity.
pub fn characterization_residual(sys: &SystemSpec, x: &VectorFieldSpec, state: &State) -> Result<f64> {
    characterization_residual_with(sys, x, &VectorFieldSpec::hamiltonian(sys), state)
}

fn characterization_residual_with(
    sys: &SystemSpec,
    x: &VectorFieldSpec,
    xh: &VectorFieldSpec,
    state: &State,
) -> Result<f64> {
    let b = sys.bindings(state)?;
    let bracket = lie_bracket(x, xh, &b)?;
    contact_form_apply(state, &bracket)
}

/// [`characterization_residual`] over many samples.
pub fn check_characterization(sys: &SystemSpec, x: &VectorFieldSpec, samples: &[State], tol: f64) -> CheckReport {
    let xh = VectorFieldSpec::hamiltonian(sys);
    CheckReport::from_residuals(
        &x.name,
        CheckKind::BracketCharacterization,
        tol,
        samples
            .iter()
            .map(|s| characterization_residual_with(sys, x, &xh, s)),
    )
}

/// A self-map of the chart, one expression per coordinate.
#[derive(Debug, Clone)]
pub struct PointMap {
    pub name: String,
    components: Vec<Expression>,
}

impl PointMap {
    pub fn identity(chart: &std::sync::Arc<Chart>) -> Self {
        PointMap {
            name: "id".into(),
            components: (0..chart.manifold_dim())
                .map(|k| Expression::slot(chart, k))
                .collect(),
        }
    }

    /// Parse components keyed by coordinate; unlisted coordinates map to
    /// themselves.
    pub fn parse<K: AsRef<str>, V: AsRef<str>>(
        name: impl Into<String>,
        chart: &std::sync::Arc<Chart>,
        components: &[(K, V)],
    ) -> Result<Self> {
        let mut map = Self::identity(chart);
        map.name = name.into();
        for (key, src) in components {
            let key = key.as_ref();
            let slot = chart
                .slot(key)
                .filter(|&k| chart.is_chart_slot(k))
                .ok_or_else(|| Error::InvalidArgument(format!("`{key}` is not a chart coordinate")))?;
            map.components[slot] = Expression::parse(src.as_ref(), chart)?;
        }
        Ok(map)
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn apply(&self, sys: &SystemSpec, state: &State) -> Result<State> {
        let b = sys.bindings(state)?;
        let image = self
            .components
            .iter()
            .map(|c| c.evaluate(&b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(State::from_slice(sys.dim(), &image))
    }
}

/// `Φ*F = F ∘ Φ`.
pub fn pullback_quantity(map: &PointMap, f: &ScalarFieldSpec) -> ScalarFieldSpec {
    ScalarFieldSpec::new(
        format!("{}*{}", map.name, group(&f.name)),
        f.expression.compose(&map.components),
    )
}

/// Check `Φ*η = η` and `H∘Φ = H` at each sample.
pub fn check_contact_symmetry_map(sys: &SystemSpec, map: &PointMap, samples: &[State], tol: f64) -> CheckReport {
    let as_field = VectorFieldSpec::new(map.name.clone(), map.components.clone())
        .expect("map has one component per coordinate");
    let residuals = samples.iter().map(|state| {
        let b = sys.bindings(state)?;
        let image = map.apply(sys, state)?;
        let eta_image = contact_form(&image).to_vec();
        let eta_here = contact_form(state).to_vec();
        let jac = vf_jacobian(&as_field, &b)?;
        let dim = eta_here.len();
        let mut worst = 0.0f64;
        for j in 0..dim {
            let pulled: f64 = (0..dim).map(|k| eta_image[k] * jac[k][j]).sum();
            worst = worst.max((pulled - eta_here[j]).abs());
        }
        let dh = (sys.energy(&image)? - sys.energy(state)?).abs();
        Ok(worst.max(dh))
    });
    CheckReport::from_residuals(&map.name, CheckKind::ContactSymmetry, tol, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::sample_states;
    use crate::integrate::integrate_fixed;
    use crate::models::builtin;

    fn gravity() -> SystemSpec {
        builtin("gravity_friction", &[]).unwrap()
    }

    fn reference() -> State {
        State::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).unwrap()
    }

    fn trajectory(sys: &SystemSpec) -> Vec<State> {
        integrate_fixed(sys, &reference(), 0.0, 10.0, 1e-2).unwrap().states
    }

    fn scalar(sys: &SystemSpec, src: &str) -> ScalarFieldSpec {
        ScalarFieldSpec::parse(src, sys.chart(), src).unwrap()
    }

    #[test]
    fn report_statistics() {
        let r = CheckReport::from_residuals(
            "f",
            CheckKind::Conserved,
            0.5,
            vec![Ok(0.1), Ok(-0.3), Ok(0.2)],
        );
        assert_eq!(r.samples, 3);
        assert_eq!(r.max_residual, 0.3);
        assert!((r.mean_residual - 0.2).abs() < 1e-15);
        assert!(r.passed);
        let r = CheckReport::from_residuals("f", CheckKind::Conserved, 0.5, vec![Ok(0.1), Ok(f64::NAN)]);
        assert!(!r.passed);
        assert_eq!(r.failed_samples(), 1);
        let r = CheckReport::from_residuals("f", CheckKind::Conserved, 0.5, Vec::new());
        assert!(!r.passed);
    }

    #[test]
    fn translation_is_a_contact_symmetry() {
        let sys = gravity();
        let y = VectorFieldSpec::coordinate(sys.chart(), 0);
        let r = classify_symmetry(&sys, &y, &sample_states(2, 100, 42), POINTWISE_TOL);
        assert!(r.contact.passed && r.dynamical.passed);
        assert_eq!(r.contact.max_residual, 0.0);
    }

    #[test]
    fn reeb_field_is_not_a_contact_symmetry_here() {
        let sys = gravity();
        let y = VectorFieldSpec::reeb(sys.chart());
        let r = classify_symmetry(&sys, &y, &sample_states(2, 100, 42), POINTWISE_TOL);
        assert!(!r.contact.passed);
        assert_eq!(r.max_lie_hamiltonian, 0.5);
        assert_eq!(r.max_lie_eta, 0.0);
        // [∂/∂s, X_H] = ∂_s X_H = −γ ∂/∂s for this Hamiltonian.
        assert_eq!(r.dynamical.max_residual, 0.5);
        assert!(!r.dynamical.passed);
        assert!(r.implication_holds());
    }

    #[test]
    fn hamiltonian_field_is_a_dynamical_symmetry() {
        let sys = gravity();
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let r = classify_symmetry(&sys, &xh, &sample_states(2, 100, 42), POINTWISE_TOL);
        assert!(r.dynamical.passed);
        assert_eq!(r.dynamical.max_residual, 0.0);
    }

    #[test]
    fn noether_quantities() {
        let sys = gravity();
        let chart = sys.chart();
        let dx = VectorFieldSpec::coordinate(chart, 0);
        assert_eq!(noether_quantity(&dx).expression.to_string(), "p_x");
        let r = noether_quantity(&VectorFieldSpec::reeb(chart));
        assert_eq!(r.expression.as_constant(), Some(-1.0));
        let f = noether_quantity(&VectorFieldSpec::hamiltonian(&sys));
        for state in sample_states(2, 100, 1) {
            let b = sys.bindings(&state).unwrap();
            let d = f.evaluate(&b).unwrap() - sys.energy(&state).unwrap();
            assert!(d.abs() <= 1e-12);
        }
    }

    #[test]
    fn quantity_classification_along_trajectory() {
        let sys = gravity();
        let traj = trajectory(&sys);
        let px = check_quantity(&sys, &scalar(&sys, "p_x"), &traj, POINTWISE_TOL);
        assert_eq!(px.classification, Classification::Dissipated);
        let h = check_quantity(&sys, &hamiltonian_quantity(&sys), &traj, POINTWISE_TOL);
        assert_eq!(h.classification, Classification::Dissipated);
        let x = check_quantity(&sys, &scalar(&sys, "x"), &traj, POINTWISE_TOL);
        assert_eq!(x.classification, Classification::Neither);
        // At t = 0: ẋ + γx = 1.
        let x0 = check_quantity(&sys, &scalar(&sys, "x"), &[reference()], POINTWISE_TOL);
        assert_eq!(x0.dissipated.max_residual, 1.0);
        let zero = check_quantity(&sys, &scalar(&sys, "0"), &traj, POINTWISE_TOL);
        assert_eq!(zero.classification, Classification::Both);
    }

    #[test]
    fn borderline_residuals_are_inconclusive() {
        let sys = gravity();
        // r_diss = 1e-7·ẋ, between tol and 1e3·tol.
        let f = scalar(&sys, "p_x + 0.0000001*x");
        let r = check_quantity(&sys, &f, &[reference()], POINTWISE_TOL);
        assert_eq!(r.classification, Classification::Inconclusive);
    }

    #[test]
    fn quotients_and_products() {
        let sys = gravity();
        let traj = trajectory(&sys);
        let h = hamiltonian_quantity(&sys);
        let px = scalar(&sys, "p_x");
        let q = quotient_quantity(&h, &px);
        assert_eq!(q.name, "H/p_x");
        let r = check_quantity(&sys, &q, &traj, POINTWISE_TOL);
        assert!(r.classification.is_conserved(), "{r:?}");
        for state in &traj {
            let v = q.evaluate(&sys.bindings(state).unwrap()).unwrap();
            assert!((v - 1.0).abs() < 1e-8);
        }
        let same = quotient_quantity(&px, &px);
        assert_eq!(same.evaluate(&sys.bindings(&reference()).unwrap()).unwrap(), 1.0);
        let bad = quotient_quantity(&px, &scalar(&sys, "0"));
        let r = check_quantity(&sys, &bad, &traj[..10], POINTWISE_TOL);
        assert_eq!(r.conserved.failed_samples(), 10);
        assert_eq!(r.classification, Classification::Inconclusive);

        let prod = product_quantity(&px, &q);
        assert_eq!(check_quantity(&sys, &prod, &traj, POINTWISE_TOL).classification, Classification::Dissipated);
        let prod = product_quantity(&h, &q);
        assert_eq!(prod.name, "H*(H/p_x)");
        assert_eq!(check_quantity(&sys, &prod, &traj, POINTWISE_TOL).classification, Classification::Dissipated);
        let one = product_quantity(&px, &scalar(&sys, "1"));
        assert_eq!(one.expression.to_string(), "p_x");
    }

    #[test]
    fn conserved_quotient_from_symmetry() {
        let sys = gravity();
        let traj = trajectory(&sys);
        let dx = VectorFieldSpec::coordinate(sys.chart(), 0);
        let c = conserved_from_symmetry(&sys, &dx);
        assert_eq!(c.name, "p_x/H");
        for state in &traj {
            let v = c.evaluate(&sys.bindings(state).unwrap()).unwrap();
            assert!((v - 1.0).abs() < 1e-8);
        }
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let c = conserved_from_symmetry(&sys, &xh);
        for state in sample_states(2, 20, 8) {
            let v = c.evaluate(&sys.bindings(&state).unwrap()).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
        // H vanishes on this state: H = 1/2 + 0 - 1/2.
        let zero_h = State::new(vec![0.0, 0.0], vec![1.0, 0.0], -1.0).unwrap();
        let r = check_quantity(&sys, &conserved_from_symmetry(&sys, &dx), &[zero_h], POINTWISE_TOL);
        assert_eq!(r.conserved.failed_samples(), 1);
    }

    #[test]
    fn reeb_lifts() {
        let sys = gravity();
        let px = scalar(&sys, "p_x");
        let y = reeb_lift(&px);
        assert_eq!(y.component(4).to_string(), "-p_x");
        assert!(y.components()[..4].iter().all(|c| c.as_constant() == Some(0.0)));
        let back = noether_quantity(&y);
        for state in sample_states(2, 100, 2) {
            let b = sys.bindings(&state).unwrap();
            assert!((back.evaluate(&b).unwrap() - state.p[0]).abs() <= 1e-12);
        }
        let zero = reeb_lift(&scalar(&sys, "0"));
        assert!(zero.components().iter().all(|c| c.as_constant() == Some(0.0)));
        let h = reeb_lift(&hamiltonian_quantity(&sys));
        let b = sys.bindings(&reference()).unwrap();
        assert_eq!(h.component(4).evaluate(&b).unwrap(), -1.0);
    }

    #[test]
    fn bracket_characterization() {
        let sys = gravity();
        let samples = sample_states(2, 100, 42);
        let good = check_characterization(&sys, &reeb_lift(&scalar(&sys, "p_x")), &samples, 1e-10);
        assert!(good.passed, "{good:?}");
        let xh = VectorFieldSpec::hamiltonian(&sys);
        for s in &samples[..10] {
            assert_eq!(characterization_residual(&sys, &xh, s).unwrap(), 0.0);
        }
        let bad = reeb_lift(&scalar(&sys, "x"));
        let r = characterization_residual(&sys, &bad, &reference()).unwrap();
        assert!((r.abs() - 1.0).abs() < 1e-14, "{r}");
    }

    #[test]
    fn pullbacks() {
        let sys = gravity();
        let chart = sys.chart();
        let shift = PointMap::parse("shift", chart, &[("x", "x + 0.75")]).unwrap();
        let px = scalar(&sys, "p_x");
        let pulled = pullback_quantity(&shift, &px);
        assert_eq!(pulled.expression.to_string(), "p_x");
        assert_eq!(
            check_quantity(&sys, &pulled, &trajectory(&sys), POINTWISE_TOL).classification,
            Classification::Dissipated
        );
        let h = hamiltonian_quantity(&sys);
        let pulled = pullback_quantity(&shift, &h);
        assert_eq!(pulled.expression.to_string(), h.expression.to_string());
        let id = pullback_quantity(&PointMap::identity(chart), &h);
        assert_eq!(id.expression.to_string(), h.expression.to_string());
    }

    #[test]
    fn contact_maps() {
        let sys = gravity();
        let chart = sys.chart();
        let samples = sample_states(2, 100, 42);
        let shift = PointMap::parse("shift", chart, &[("x", "x + 0.75")]).unwrap();
        assert!(check_contact_symmetry_map(&sys, &shift, &samples, POINTWISE_TOL).passed);
        let id = check_contact_symmetry_map(&sys, &PointMap::identity(chart), &samples, POINTWISE_TOL);
        assert!(id.passed);
        assert_eq!(id.max_residual, 0.0);
        let stretch = PointMap::parse("stretch", chart, &[("x", "2*x")]).unwrap();
        let r = check_contact_symmetry_map(&sys, &stretch, &samples, POINTWISE_TOL);
        assert!(!r.passed);
        // (Φ*η)_x = −2p_x against −p_x: deviation |p_x|.
        let worst = samples.iter().map(|s| s.p[0].abs()).fold(0.0, f64::max);
        assert!((r.max_residual - worst).abs() < 1e-15);
    }

    mod invariants {
        use super::*;
        use proptest::prelude::*;

        fn oscillator(k: f64, gamma: f64) -> SystemSpec {
            builtin("damped_oscillator", &[("k", k), ("gamma", gamma)]).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn hamiltonian_decays_at_rate_gamma(
                k in 0.0f64..3.0, gamma in -1.0f64..1.0, seed in any::<u64>(),
            ) {
                let sys = oscillator(k, gamma);
                let r = check_quantity(&sys, &hamiltonian_quantity(&sys), &sample_states(1, 16, seed), POINTWISE_TOL);
                prop_assert!(r.classification.is_dissipated());
            }

            #[test]
            fn dynamical_symmetries_give_dissipated_quantities(
                gamma in -1.0f64..1.0, c in -2.0f64..2.0, seed in any::<u64>(),
            ) {
                let sys = builtin("gravity_friction", &[("gamma", gamma)]).unwrap();
                let xh = VectorFieldSpec::hamiltonian(&sys);
                let dx = VectorFieldSpec::coordinate(sys.chart(), 0);
                // c·∂/∂x + X_H commutes with X_H.
                let comps: Vec<Expression> = dx.components().iter().zip(xh.components())
                    .map(|(a, b)| a.mul(&Expression::constant(sys.chart(), c)).add(b))
                    .collect();
                let y = VectorFieldSpec::new("Y", comps).unwrap();
                let samples = sample_states(2, 16, seed);
                prop_assert!(classify_symmetry(&sys, &y, &samples, POINTWISE_TOL).dynamical.passed);
                let f = noether_quantity(&y);
                prop_assert!(check_quantity(&sys, &f, &samples, POINTWISE_TOL).classification.is_dissipated());
                prop_assert!(check_characterization(&sys, &y, &samples, POINTWISE_TOL).passed);
            }

            #[test]
            fn quotient_of_dissipated_is_conserved(
                k in 0.1f64..3.0, gamma in -1.0f64..1.0, a in 0.5f64..2.0, seed in any::<u64>(),
            ) {
                let sys = oscillator(k, gamma);
                let h = hamiltonian_quantity(&sys);
                let scaled = ScalarFieldSpec::from_expression(
                    h.expression.mul(&Expression::constant(sys.chart(), a)),
                );
                let samples: Vec<State> = sample_states(1, 16, seed)
                    .into_iter()
                    .filter(|s| sys.energy(s).is_ok_and(|e| e.abs() > 0.1))
                    .collect();
                prop_assume!(!samples.is_empty());
                let q = quotient_quantity(&scaled, &h);
                prop_assert!(check_quantity(&sys, &q, &samples, POINTWISE_TOL).classification.is_conserved());
            }

            #[test]
            fn contact_symmetry_implies_dynamical(
                shift in -2.0f64..2.0, seed in any::<u64>(),
            ) {
                let sys = builtin("gravity_friction", &[]).unwrap();
                let samples = sample_states(2, 16, seed);
                for y in [
                    VectorFieldSpec::coordinate(sys.chart(), 0),
                    VectorFieldSpec::reeb(sys.chart()),
                    VectorFieldSpec::hamiltonian(&sys),
                    VectorFieldSpec::parse("Y", sys.chart(), &[("x", shift.to_string())]).unwrap(),
                ] {
                    prop_assert!(classify_symmetry(&sys, &y, &samples, POINTWISE_TOL).implication_holds());
                }
            }
        }
    }
}
