//! Vector fields, scalar fields, Jacobians, Lie brackets and Lie derivatives
//! on a Darboux chart.

use std::sync::Arc;

use crate::contact::{Covector, SystemSpec, Tangent};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Chart, Expression};

/// A vector field given by one expression per direction
/// `(∂/∂q^1.., ∂/∂p_1.., ∂/∂s)`.
#[derive(Debug, Clone)]
pub struct VectorFieldSpec {
    pub name: String,
    components: Vec<Expression>,
}

impl VectorFieldSpec {
    pub fn new(name: impl Into<String>, components: Vec<Expression>) -> Result<Self> {
        let chart = components
            .first()
            .map(|c| c.chart().clone())
            .ok_or_else(|| Error::InvalidArgument("vector field without components".into()))?;
        if components.len() != chart.manifold_dim() {
            return Err(Error::InvalidArgument(format!(
                "vector field needs {} components, got {}",
                chart.manifold_dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| **c.chart() != *chart) {
            return Err(Error::InvalidArgument("components from different charts".into()));
        }
        Ok(VectorFieldSpec {
            name: name.into(),
            components,
        })
    }

    /// Parse components keyed by coordinate name; directions not listed are
    /// zero.
    pub fn parse<K: AsRef<str>, V: AsRef<str>>(
        name: impl Into<String>,
        chart: &Arc<Chart>,
        components: &[(K, V)],
    ) -> Result<Self> {
        let mut out: Vec<Expression> = (0..chart.manifold_dim())
            .map(|_| Expression::zero(chart))
            .collect();
        for (key, src) in components {
            let key = key.as_ref();
            let slot = chart
                .slot(key)
                .filter(|&k| chart.is_chart_slot(k))
                .ok_or_else(|| Error::InvalidArgument(format!("`{key}` is not a chart coordinate")))?;
            out[slot] = Expression::parse(src.as_ref(), chart)?;
        }
        Self::new(name, out)
    }

    pub fn zero(chart: &Arc<Chart>) -> Self {
        let components = (0..chart.manifold_dim()).map(|_| Expression::zero(chart)).collect();
        VectorFieldSpec {
            name: "0".into(),
            components,
        }
    }

    /// Coordinate field `∂/∂x^k`.
    pub fn coordinate(chart: &Arc<Chart>, slot: usize) -> Self {
        assert!(chart.is_chart_slot(slot));
        let components = (0..chart.manifold_dim())
            .map(|k| Expression::constant(chart, if k == slot { 1.0 } else { 0.0 }))
            .collect();
        VectorFieldSpec {
            name: format!("d/d{}", chart.name(slot)),
            components,
        }
    }

    /// The Reeb field `∂/∂s`.
    pub fn reeb(chart: &Arc<Chart>) -> Self {
        let mut r = Self::coordinate(chart, chart.s_slot());
        r.name = "R".into();
        r
    }

    /// `X_H` assembled from the Darboux formulas, with the partials of `H`
    /// kept as derivative nodes so that its own derivatives stay exact.
    pub fn hamiltonian(sys: &SystemSpec) -> Self {
        let chart = sys.chart();
        let h = sys.hamiltonian();
        let n = chart.dim();
        let h_s = h.partial(chart.s_slot());
        let mut dq = Vec::with_capacity(n);
        let mut dp = Vec::with_capacity(n);
        let mut ds = h.neg();
        for i in 0..n {
            let h_p = h.partial(chart.p_slot(i));
            let h_q = h.partial(chart.q_slot(i));
            let p = Expression::slot(chart, chart.p_slot(i));
            dp.push(h_q.add(&p.mul(&h_s)).neg());
            ds = p.mul(&h_p).add(&ds);
            dq.push(h_p);
        }
        let mut components = dq;
        components.extend(dp);
        components.push(ds);
        VectorFieldSpec {
            name: "X_H".into(),
            components,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.components[0].chart()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn component(&self, slot: usize) -> &Expression {
        &self.components[slot]
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<Tangent> {
        let values = self
            .components
            .iter()
            .map(|c| c.evaluate(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tangent::from_slice(self.chart().dim(), &values))
    }

    /// `f · self` for a scalar expression `f`.
    pub fn scaled(&self, name: impl Into<String>, f: &Expression) -> Self {
        VectorFieldSpec {
            name: name.into(),
            components: self.components.iter().map(|c| f.mul(c)).collect(),
        }
    }
}

/// A named scalar field.
#[derive(Debug, Clone)]
pub struct ScalarFieldSpec {
    pub name: String,
    pub expression: Expression,
}

impl ScalarFieldSpec {
    pub fn new(name: impl Into<String>, expression: Expression) -> Self {
        ScalarFieldSpec {
            name: name.into(),
            expression,
        }
    }

    /// Named after its own printed form.
    pub fn from_expression(expression: Expression) -> Self {
        ScalarFieldSpec {
            name: expression.to_string(),
            expression,
        }
    }

    pub fn parse(name: impl Into<String>, chart: &Arc<Chart>, source: &str) -> Result<Self> {
        Ok(Self::new(name, Expression::parse(source, chart)?))
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<f64> {
        Ok(self.expression.evaluate(b)?)
    }
}

fn check_chart(field: &VectorFieldSpec, b: &Bindings) -> Result<()> {
    if **field.chart() != **b.chart() {
        return Err(Error::InvalidArgument(format!(
            "field `{}` is defined on another chart",
            field.name
        )));
    }
    Ok(())
}

/// `J[k][j] = ∂Y^k/∂x^j`, coordinates ordered `q.., p.., s`.
pub fn vf_jacobian(y: &VectorFieldSpec, b: &Bindings) -> Result<Vec<Vec<f64>>> {
    check_chart(y, b)?;
    let dim = y.chart().manifold_dim();
    y.components
        .iter()
        .map(|c| {
            (0..dim)
                .map(|j| c.differentiate_slot(j, b).map_err(Error::from))
                .collect()
        })
        .collect()
}

/// `[Y, X]^k = Σ_j (Y^j ∂_j X^k − X^j ∂_j Y^k)`.
pub fn lie_bracket(y: &VectorFieldSpec, x: &VectorFieldSpec, b: &Bindings) -> Result<Tangent> {
    check_chart(x, b)?;
    let yv = y.evaluate(b)?.to_vec();
    let xv = x.evaluate(b)?.to_vec();
    let jy = vf_jacobian(y, b)?;
    let jx = vf_jacobian(x, b)?;
    let out: Vec<f64> = (0..yv.len())
        .map(|k| {
            (0..yv.len())
                .map(|j| yv[j] * jx[k][j] - xv[j] * jy[k][j])
                .sum()
        })
        .collect();
    Ok(Tangent::from_slice(y.chart().dim(), &out))
}

/// `L_Y F = Σ_k Y^k ∂F/∂x^k`.
pub fn lie_derivative_scalar(y: &VectorFieldSpec, f: &ScalarFieldSpec, b: &Bindings) -> Result<f64> {
    check_chart(y, b)?;
    let mut total = 0.0;
    for (k, c) in y.components.iter().enumerate() {
        if !f.expression.depends_on_slot(k) {
            continue;
        }
        total += c.evaluate(b)? * f.expression.differentiate_slot(k, b)?;
    }
    Ok(total)
}

/// `i(Y)η = Y^s − Σ p_i Y^{q_i}` as an expression.
pub fn contraction_with_eta(y: &VectorFieldSpec) -> Expression {
    let chart = y.chart();
    let mut g = y.component(chart.s_slot()).clone();
    for i in 0..chart.dim() {
        let p = Expression::slot(chart, chart.p_slot(i));
        g = g.sub(&p.mul(y.component(chart.q_slot(i))));
    }
    g
}

/// `L_Y η = i(Y) dη + d(i(Y) η)` by Cartan's formula.
pub fn lie_derivative_contact_form(y: &VectorFieldSpec, b: &Bindings) -> Result<Covector> {
    check_chart(y, b)?;
    let chart = y.chart();
    let n = chart.dim();
    let g = contraction_with_eta(y);
    let mut cq = Vec::with_capacity(n);
    let mut cp = Vec::with_capacity(n);
    for i in 0..n {
        cq.push(-y.component(chart.p_slot(i)).evaluate(b)? + g.differentiate_slot(chart.q_slot(i), b)?);
        cp.push(y.component(chart.q_slot(i)).evaluate(b)? + g.differentiate_slot(chart.p_slot(i), b)?);
    }
    let cs = g.differentiate_slot(chart.s_slot(), b)?;
    Ok(Covector { cq, cp, cs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{hamiltonian_vector_field, sample_states, State};

    fn gravity() -> SystemSpec {
        SystemSpec::new(
            &["x", "y"],
            &[("m".into(), 1.0), ("g".into(), 9.8), ("gamma".into(), 0.5)],
            "(p_x^2+p_y^2)/(2*m) + m*g*y + gamma*s",
        )
        .unwrap()
    }

    fn at(sys: &SystemSpec, v: &[f64]) -> Bindings {
        sys.bindings(&State::from_slice(sys.dim(), v)).unwrap()
    }

    const REF: [f64; 5] = [0.0, 0.0, 1.0, 1.0, 0.0];

    #[test]
    fn jacobian_of_constant_field_is_zero() {
        let sys = gravity();
        let y = VectorFieldSpec::coordinate(sys.chart(), 0);
        let j = vf_jacobian(&y, &at(&sys, &REF)).unwrap();
        assert!(j.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_single_entry() {
        let sys = gravity();
        let y = VectorFieldSpec::parse("Y", sys.chart(), &[("s", "gamma*s")]).unwrap();
        let j = vf_jacobian(&y, &at(&sys, &[0.1, 0.2, 0.3, 0.4, 0.5])).unwrap();
        for (k, row) in j.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let expected = if (k, c) == (4, 4) { 0.5 } else { 0.0 };
                assert_eq!(v, expected, "entry ({k},{c})");
            }
        }
    }

    #[test]
    fn jacobian_of_hamiltonian_field() {
        // Rows of X_H for the gravity model, by hand:
        // dq_x = p_x/m, dq_y = p_y/m, dp_x = -γ p_x, dp_y = -(mg + γ p_y),
        // ds = (p_x²+p_y²)/(2m) - mgy - γs.
        let sys = gravity();
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let j = vf_jacobian(&xh, &at(&sys, &REF)).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, -0.5, 0.0, 0.0],
            [0.0, 0.0, 0.0, -0.5, 0.0],
            [0.0, -9.8, 1.0, 1.0, -0.5],
        ];
        for k in 0..5 {
            for c in 0..5 {
                assert!((j[k][c] - expected[k][c]).abs() < 1e-14, "({k},{c}) = {}", j[k][c]);
            }
        }
    }

    #[test]
    fn symbolic_field_matches_direct_field() {
        let sys = gravity();
        let xh = VectorFieldSpec::hamiltonian(&sys);
        for state in sample_states(2, 50, 11) {
            let b = sys.bindings(&state).unwrap();
            let a = xh.evaluate(&b).unwrap().to_vec();
            let d = hamiltonian_vector_field(&sys, &state).unwrap().to_vec();
            for (u, v) in a.iter().zip(&d) {
                assert!((u - v).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let sys = gravity();
        let chart = sys.chart();
        let b = at(&sys, &[0.7, -1.1, 0.4, 1.9, -0.3]);
        let dx = VectorFieldSpec::coordinate(chart, 0);
        let xh = VectorFieldSpec::hamiltonian(&sys);
        assert_eq!(lie_bracket(&dx, &xh, &b).unwrap(), Tangent::zeros(2));
        assert_eq!(lie_bracket(&xh, &xh, &b).unwrap().norm_inf(), 0.0);
        let dp = VectorFieldSpec::coordinate(chart, 2);
        assert_eq!(lie_bracket(&dx, &dp, &b).unwrap(), Tangent::zeros(2));
    }

    #[test]
    fn lie_derivative_scalar_examples() {
        let sys = gravity();
        let chart = sys.chart();
        let b = at(&sys, &REF);
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let h = ScalarFieldSpec::new("H", sys.hamiltonian().clone());
        assert!((lie_derivative_scalar(&xh, &h, &b).unwrap() + 0.5).abs() < 1e-14);
        let px = ScalarFieldSpec::parse("p_x", chart, "p_x").unwrap();
        assert_eq!(lie_derivative_scalar(&xh, &px, &b).unwrap(), -0.5);
        let c = ScalarFieldSpec::parse("c", chart, "3.5").unwrap();
        assert_eq!(lie_derivative_scalar(&xh, &c, &b).unwrap(), 0.0);
    }

    #[test]
    fn lie_derivative_of_eta_examples() {
        let sys = gravity();
        let chart = sys.chart();
        let b = at(&sys, &[0.7, -1.1, 0.4, 1.9, -0.3]);
        let dx = VectorFieldSpec::coordinate(chart, 0);
        assert_eq!(lie_derivative_contact_form(&dx, &b).unwrap(), Covector::zeros(2));
        let r = VectorFieldSpec::reeb(chart);
        assert_eq!(lie_derivative_contact_form(&r, &b).unwrap(), Covector::zeros(2));

        let one = Arc::new(Chart::new(&["q1"], &[] as &[&str]).unwrap());
        let y = VectorFieldSpec::parse("Y", &one, &[("q1", "q1")]).unwrap();
        let b = Bindings::from_slots(one.clone(), vec![1.0, 2.0, 0.0]);
        let l = lie_derivative_contact_form(&y, &b).unwrap();
        assert_eq!(l.cq, vec![-2.0]);
        assert_eq!(l.cp, vec![0.0]);
        assert_eq!(l.cs, 0.0);
    }

    #[test]
    fn bracket_antisymmetry_and_bilinearity() {
        let sys = gravity();
        let chart = sys.chart();
        let y = VectorFieldSpec::parse(
            "Y",
            chart,
            &[("x", "sin(y)*p_x"), ("p_y", "x^2 - s"), ("s", "cos(p_x*y)")],
        )
        .unwrap();
        let z = VectorFieldSpec::parse("Z", chart, &[("y", "exp(x/3)"), ("p_x", "p_y*s")]).unwrap();
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let two = Expression::constant(chart, 2.0);
        let three = Expression::constant(chart, -3.0);
        let combo = VectorFieldSpec::new(
            "2Y-3Z",
            y.components()
                .iter()
                .zip(z.components())
                .map(|(a, c)| two.mul(a).add(&three.mul(c)))
                .collect(),
        )
        .unwrap();
        for state in sample_states(2, 100, 5) {
            let b = sys.bindings(&state).unwrap();
            let a = lie_bracket(&y, &xh, &b).unwrap().to_vec();
            let r = lie_bracket(&xh, &y, &b).unwrap().to_vec();
            for (u, v) in a.iter().zip(&r) {
                assert!((u + v).abs() <= 1e-12);
            }
            let lhs = lie_bracket(&combo, &xh, &b).unwrap().to_vec();
            let zb = lie_bracket(&z, &xh, &b).unwrap().to_vec();
            for k in 0..5 {
                let rhs = 2.0 * a[k] - 3.0 * zb[k];
                assert!((lhs[k] - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn contact_symmetries_commute_with_reeb() {
        let sys = gravity();
        let chart = sys.chart();
        let r = VectorFieldSpec::reeb(chart);
        // Infinitesimal contact transformations generated by functions of
        // (q, p) alone; ∂/∂x is the one relevant to the gravity model.
        let candidates = [
            VectorFieldSpec::coordinate(chart, 0),
            VectorFieldSpec::parse("rot", chart, &[("x", "-y"), ("y", "x"), ("p_x", "-p_y"), ("p_y", "p_x")]).unwrap(),
        ];
        for y in &candidates {
            for state in sample_states(2, 100, 9) {
                let b = sys.bindings(&state).unwrap();
                assert!(lie_derivative_contact_form(y, &b).unwrap().norm_inf() <= 1e-12);
                assert!(lie_bracket(y, &r, &b).unwrap().norm_inf() <= 1e-10);
            }
        }
    }

    #[test]
    fn hamiltonian_dissipates_along_its_field() {
        let sys = gravity();
        let xh = VectorFieldSpec::hamiltonian(&sys);
        let h = ScalarFieldSpec::new("H", sys.hamiltonian().clone());
        for state in sample_states(2, 100, 13) {
            let b = sys.bindings(&state).unwrap();
            let lh = lie_derivative_scalar(&xh, &h, &b).unwrap();
            let hv = h.evaluate(&b).unwrap();
            assert!((lh + 0.5 * hv).abs() <= 1e-10);
        }
    }
}
