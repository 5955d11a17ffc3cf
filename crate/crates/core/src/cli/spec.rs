//! Spec documents: a system plus declared candidates, in TOML.
//!
//! ```toml
//! n = 2
//! coordinates = ["x", "y"]
//! hamiltonian = "(p_x^2 + p_y^2)/(2*m) + m*g*y + gamma*s"
//!
//! [parameters]
//! m = 1.0
//!
//! [initial]
//! q = [0.0, 0.0]
//! p = [1.0, 1.0]
//! s = 0.0
//!
//! [[symmetries]]
//! name = "d/dx"
//! components = { x = "1" }
//! expect = "contact"
//!
//! [[quantities]]
//! name = "p_x"
//! expression = "p_x"
//! expect = "dissipated"
//!
//! [[quantities]]
//! name = "H/p_x"
//! quotient = ["H", "p_x"]
//! expect = "conserved"
//!
//! [[maps]]
//! name = "shift"
//! components = { x = "x + 0.75" }
//! expect = "contact"
//! ```
//!
//! `quotient` and `product` refer to earlier quantities by name; `H` names
//! the Hamiltonian unless a quantity of that name was declared.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::analysis::{hamiltonian_quantity, product_quantity, quotient_quantity, PointMap};
use crate::calculus::{ScalarFieldSpec, VectorFieldSpec};
use crate::contact::{State, SystemSpec};
use crate::error::{Error, Result};
use crate::expr::{Chart, Expression};
use crate::models::{model_info, resolve_parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryClass {
    Contact,
    Dynamical,
    Neither,
}

impl std::fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SymmetryClass::Contact => "contact symmetry",
            SymmetryClass::Dynamical => "dynamical symmetry",
            SymmetryClass::Neither => "no symmetry",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityClass {
    Conserved,
    Dissipated,
    Neither,
}

impl std::fmt::Display for QuantityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuantityClass::Conserved => "conserved",
            QuantityClass::Dissipated => "dissipated",
            QuantityClass::Neither => "neither",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapClass {
    Contact,
    Neither,
}

impl std::fmt::Display for MapClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MapClass::Contact => "contact symmetry",
            MapClass::Neither => "no symmetry",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDecl {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryDecl {
    pub name: String,
    #[serde(default)]
    pub components: BTreeMap<String, Spanned<String>>,
    pub expect: Option<SymmetryClass>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityDecl {
    pub name: String,
    pub expression: Option<Spanned<String>>,
    pub quotient: Option<Spanned<[String; 2]>>,
    pub product: Option<Spanned<[String; 2]>>,
    pub expect: Option<QuantityClass>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDecl {
    pub name: String,
    #[serde(default)]
    pub components: BTreeMap<String, Spanned<String>>,
    pub expect: Option<MapClass>,
}

/// The document as written.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub n: Spanned<usize>,
    pub coordinates: Spanned<Vec<String>>,
    #[serde(default)]
    pub parameters: toml::Table,
    pub hamiltonian: Spanned<String>,
    pub initial: Option<Spanned<InitialDecl>>,
    #[serde(default)]
    pub symmetries: Vec<SymmetryDecl>,
    #[serde(default)]
    pub quantities: Vec<QuantityDecl>,
    #[serde(default)]
    pub maps: Vec<MapDecl>,
}

#[derive(Debug, Clone)]
pub struct Candidate<T, E> {
    pub value: T,
    pub expect: Option<E>,
}

/// A spec document resolved into a system and parsed candidates.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub system: SystemSpec,
    pub initial: Option<State>,
    pub symmetries: Vec<Candidate<VectorFieldSpec, SymmetryClass>>,
    pub quantities: Vec<Candidate<ScalarFieldSpec, QuantityClass>>,
    pub maps: Vec<Candidate<PointMap, MapClass>>,
}

impl LoadedSpec {
    pub fn candidate_count(&self) -> usize {
        self.symmetries.len() + self.quantities.len() + self.maps.len()
    }
}

struct Locator<'a> {
    source: &'a str,
}

impl Locator<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.source.len());
        self.source[..end].matches('\n').count() + 1
    }

    fn err(&self, span: Range<usize>, field: &str, message: impl std::fmt::Display) -> Error {
        Error::Spec(format!("line {}, `{field}`: {message}", self.line(span)))
    }
}

pub fn load_spec(path: &Path, overrides: &[(String, f64)]) -> Result<LoadedSpec> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&source, overrides)
}

pub fn parse_spec(source: &str, overrides: &[(String, f64)]) -> Result<LoadedSpec> {
    let doc: SpecDocument = toml::from_str(source).map_err(|e| Error::Spec(e.to_string().trim_end().to_string()))?;
    resolve(doc, source, overrides)
}

fn resolve(doc: SpecDocument, source: &str, overrides: &[(String, f64)]) -> Result<LoadedSpec> {
    let at = Locator { source };
    let coords = doc.coordinates.get_ref();
    if *doc.n.get_ref() != coords.len() {
        return Err(at.err(
            doc.n.span(),
            "n",
            format!("n = {} but {} coordinates are listed", doc.n.get_ref(), coords.len()),
        ));
    }
    if coords.is_empty() {
        return Err(at.err(doc.coordinates.span(), "coordinates", "at least one coordinate is required"));
    }

    let mut params = Vec::with_capacity(doc.parameters.len());
    for (name, value) in &doc.parameters {
        let v = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            other => {
                return Err(Error::Spec(format!(
                    "`parameters.{name}`: expected a number, found {}",
                    other.type_str()
                )))
            }
        };
        params.push((name.clone(), v));
    }
    for (name, value) in overrides {
        match params.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = *value,
            None => return Err(Error::InvalidArgument(format!("spec has no parameter `{name}`"))),
        }
    }

    let chart = Arc::new(
        Chart::new(coords, &params.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>())
            .map_err(|e| at.err(doc.coordinates.span(), "coordinates", e))?,
    );
    let hamiltonian = Expression::parse(doc.hamiltonian.get_ref(), &chart)
        .map_err(|e| at.err(doc.hamiltonian.span(), "hamiltonian", e))?;
    let system = SystemSpec::from_parts(chart.clone(), params.iter().map(|(_, v)| *v).collect(), hamiltonian)
        .map_err(|e| Error::Spec(format!("`parameters`: {e}")))?;
    let n = system.dim();

    let initial = match &doc.initial {
        None => None,
        Some(decl) => {
            let d = decl.get_ref();
            if d.q.len() != n || d.p.len() != n {
                return Err(at.err(
                    decl.span(),
                    "initial",
                    format!("expected {n} values for q and p, found {} and {}", d.q.len(), d.p.len()),
                ));
            }
            Some(State::new(d.q.clone(), d.p.clone(), d.s).map_err(|e| at.err(decl.span(), "initial", e))?)
        }
    };

    let mut symmetries = Vec::with_capacity(doc.symmetries.len());
    for (k, decl) in doc.symmetries.iter().enumerate() {
        let field = format!("symmetries[{k}]");
        let components = parse_components(&at, &chart, &field, &decl.components)?;
        let value = VectorFieldSpec::new(decl.name.clone(), components)?;
        symmetries.push(Candidate { value, expect: decl.expect });
    }

    let mut quantities: Vec<Candidate<ScalarFieldSpec, QuantityClass>> = Vec::new();
    for (k, decl) in doc.quantities.iter().enumerate() {
        let field = format!("quantities[{k}]");
        let lookup = |name: &str, span: Range<usize>| -> Result<ScalarFieldSpec> {
            if let Some(c) = quantities.iter().find(|c| c.value.name == name) {
                return Ok(c.value.clone());
            }
            if name == "H" {
                return Ok(hamiltonian_quantity(&system));
            }
            Err(at.err(span, &field, format!("`{name}` is not an earlier quantity")))
        };
        let value = match (&decl.expression, &decl.quotient, &decl.product) {
            (Some(src), None, None) => {
                let e = Expression::parse(src.get_ref(), &chart)
                    .map_err(|e| at.err(src.span(), &format!("{field}.expression"), e))?;
                ScalarFieldSpec::new(decl.name.clone(), e)
            }
            (None, Some(pair), None) => {
                let [a, b] = pair.get_ref();
                let q = quotient_quantity(&lookup(a, pair.span())?, &lookup(b, pair.span())?);
                ScalarFieldSpec::new(decl.name.clone(), q.expression)
            }
            (None, None, Some(pair)) => {
                let [a, b] = pair.get_ref();
                let q = product_quantity(&lookup(a, pair.span())?, &lookup(b, pair.span())?);
                ScalarFieldSpec::new(decl.name.clone(), q.expression)
            }
            _ => {
                return Err(Error::Spec(format!(
                    "`{field}` ({}): give exactly one of expression, quotient, product",
                    decl.name
                )))
            }
        };
        if quantities.iter().any(|c| c.value.name == decl.name) {
            return Err(Error::Spec(format!("`{field}`: duplicate quantity name `{}`", decl.name)));
        }
        quantities.push(Candidate { value, expect: decl.expect });
    }

    let mut maps = Vec::with_capacity(doc.maps.len());
    for (k, decl) in doc.maps.iter().enumerate() {
        let field = format!("maps[{k}]");
        let pairs: Vec<(&str, &str)> = decl
            .components
            .iter()
            .map(|(key, src)| (key.as_str(), src.get_ref().as_str()))
            .collect();
        // Validate each component first so errors carry a line number.
        parse_components(&at, &chart, &field, &decl.components)?;
        let value = PointMap::parse(decl.name.clone(), &chart, &pairs)?;
        maps.push(Candidate { value, expect: decl.expect });
    }

    Ok(LoadedSpec {
        system,
        initial,
        symmetries,
        quantities,
        maps,
    })
}

fn parse_components(
    at: &Locator<'_>,
    chart: &Arc<Chart>,
    field: &str,
    decl: &BTreeMap<String, Spanned<String>>,
) -> Result<Vec<Expression>> {
    let mut out: Vec<Expression> = (0..chart.manifold_dim()).map(|_| Expression::zero(chart)).collect();
    for (key, src) in decl {
        let name = format!("{field}.components.{key}");
        let slot = chart
            .slot(key)
            .filter(|&s| chart.is_chart_slot(s))
            .ok_or_else(|| at.err(src.span(), &name, format!("`{key}` is not a chart coordinate")))?;
        out[slot] = Expression::parse(src.get_ref(), chart).map_err(|e| at.err(src.span(), &name, e))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct ExportDocument<'a> {
    n: usize,
    coordinates: &'a [&'a str],
    hamiltonian: &'a str,
    parameters: toml::Table,
    initial: InitialDecl,
}

/// The reference initial state used for exported models: `q = 0, p = 1, s = 0`.
pub fn reference_initial(n: usize) -> State {
    State::new(vec![0.0; n], vec![1.0; n], 0.0).expect("finite")
}

/// Render a built-in model as a spec document.
pub fn export_model(name: &str, overrides: &[(String, f64)]) -> Result<String> {
    let info = model_info(name)?;
    let refs: Vec<(&str, f64)> = overrides.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let params = resolve_parameters(info, &refs)?;
    let n = info.coordinates.len();
    let initial = reference_initial(n);
    let doc = ExportDocument {
        n,
        coordinates: info.coordinates,
        hamiltonian: info.hamiltonian,
        parameters: params.into_iter().map(|(k, v)| (k, toml::Value::Float(v))).collect(),
        initial: InitialDecl {
            q: initial.q,
            p: initial.p,
            s: initial.s,
        },
    };
    let body = toml::to_string(&doc).map_err(|e| Error::Spec(e.to_string()))?;
    Ok(format!("# {}: {}\n{body}", info.name, info.description))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAVITY: &str = r#"
n = 2
coordinates = ["x", "y"]
hamiltonian = "(p_x^2+p_y^2)/(2*m) + m*g*y + gamma*s"

[parameters]
m = 1
g = 9.8
gamma = 0.5

[initial]
q = [0, 0]
p = [1, 1]

[[symmetries]]
name = "d/dx"
components = { x = "1" }
expect = "contact"

[[quantities]]
name = "p_x"
expression = "p_x"
expect = "dissipated"

[[quantities]]
name = "H/p_x"
quotient = ["H", "p_x"]
expect = "conserved"

[[maps]]
name = "shift"
components = { x = "x + 0.75" }
"#;

    fn err(src: &str) -> String {
        parse_spec(src, &[]).unwrap_err().to_string()
    }

    #[test]
    fn loads_a_complete_document() {
        let spec = parse_spec(GRAVITY, &[]).unwrap();
        assert_eq!(spec.system.dim(), 2);
        assert_eq!(spec.system.parameter("g"), Some(9.8));
        assert_eq!(spec.system.chart().parameters(), ["m", "g", "gamma"]);
        assert_eq!(spec.initial.as_ref().unwrap().p, vec![1.0, 1.0]);
        assert_eq!(spec.symmetries[0].value.name, "d/dx");
        assert_eq!(spec.symmetries[0].expect, Some(SymmetryClass::Contact));
        assert_eq!(spec.quantities[1].value.expression.to_string(), "((p_x^2 + p_y^2)/(2*m) + m*g*y + gamma*s)/p_x");
        assert_eq!(spec.maps[0].expect, None);
        assert_eq!(spec.candidate_count(), 4);
    }

    #[test]
    fn overrides_replace_parameters() {
        let spec = parse_spec(GRAVITY, &[("gamma".into(), 0.0)]).unwrap();
        assert_eq!(spec.system.parameter("gamma"), Some(0.0));
        assert!(parse_spec(GRAVITY, &[("k".into(), 1.0)]).is_err());
    }

    #[test]
    fn errors_name_line_and_field() {
        let bad = GRAVITY.replace("m*g*y + gamma*s\"", "m*g*y + gamma*s)\"");
        let e = err(&bad);
        assert!(e.contains("line 4") && e.contains("hamiltonian"), "{e}");
        let e = err(&GRAVITY.replace("n = 2", "n = 3"));
        assert!(e.contains("line 2") && e.contains("n = 3"), "{e}");
        let e = err(&GRAVITY.replace("x = \"1\"", "z = \"1\""));
        assert!(e.contains("symmetries[0].components.z"), "{e}");
        let e = err(&GRAVITY.replace("[\"H\", \"p_x\"]", "[\"H\", \"p_y\"]"));
        assert!(e.contains("`p_y` is not an earlier quantity"), "{e}");
        let e = err(&GRAVITY.replace("expect = \"conserved\"", "expect = \"preserved\""));
        assert!(e.contains("line"), "{e}");
        let e = err(&GRAVITY.replace("q = [0, 0]", "q = [0]"));
        assert!(e.contains("initial"), "{e}");
        let e = err("n = 1\ncoordinates = [\"x\"]\nhamiltonian = \"p_x\"\nextra = 1\n");
        assert!(e.contains("extra"), "{e}");
        let e = err("n = 1\ncoordinates = [\"x\"]\nhamiltonian = \"p_x\"\n[parameters]\nm = \"one\"\n");
        assert!(e.contains("parameters.m"), "{e}");
    }

    #[test]
    fn exported_models_round_trip() {
        for info in crate::models::CATALOG {
            let text = export_model(info.name, &[]).unwrap();
            let spec = parse_spec(&text, &[]).unwrap();
            let reference = crate::models::builtin(info.name, &[]).unwrap();
            assert_eq!(spec.system.parameter_values(), reference.parameter_values());
            assert_eq!(spec.system.hamiltonian().to_string(), reference.hamiltonian().to_string());
            assert_eq!(spec.initial.clone().unwrap(), reference_initial(info.coordinates.len()));
            assert_eq!(spec.candidate_count(), 0);
        }
        let text = export_model("damped_oscillator", &[("gamma".into(), 0.0)]).unwrap();
        assert!(text.contains("gamma = 0.0"), "{text}");
        assert!(export_model("pendulum", &[]).is_err());
    }
}
