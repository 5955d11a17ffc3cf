//! The verification suite behind `darboux verify`.

use serde::Serialize;

use super::spec::{LoadedSpec, MapClass, QuantityClass, SymmetryClass};
use crate::analysis::{
    check_contact_symmetry_map, check_quantity, classify_symmetry, conserved_from_symmetry, noether_quantity,
    pullback_quantity, quotient_quantity, Classification, CheckReport, QuantityReport, SymmetryReport,
};
use crate::calculus::ScalarFieldSpec;
use crate::contact::{sample_states, State, SystemSpec};

/// Divisors smaller than this anywhere on the samples skip derived quotients.
pub const MIN_DIVISOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
}

/// Where quantity checks were evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSource {
    pub source: &'static str,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityEntry {
    pub name: String,
    pub expression: String,
    pub expected: Option<QuantityClass>,
    pub matches: Option<bool>,
    pub report: QuantityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryEntry {
    pub name: String,
    pub components: Vec<String>,
    pub verdict: SymmetryClass,
    pub expected: Option<SymmetryClass>,
    pub matches: Option<bool>,
    pub report: SymmetryReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noether_quantity: Option<QuantityEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conserved_quotient: Option<QuantityEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEntry {
    pub name: String,
    pub components: Vec<String>,
    pub verdict: MapClass,
    pub expected: Option<MapClass>,
    pub matches: Option<bool>,
    pub report: CheckReport,
}

/// The report document written by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub coordinates: Vec<String>,
    pub parameters: Vec<Parameter>,
    pub hamiltonian: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub quantity_samples: SampleSource,
    pub symmetries: Vec<SymmetryEntry>,
    pub quantities: Vec<QuantityEntry>,
    pub quotients: Vec<QuantityEntry>,
    pub maps: Vec<MapEntry>,
    pub pullbacks: Vec<QuantityEntry>,
    pub mismatches: Vec<String>,
    pub passed: bool,
}

fn quantity_matches(expected: QuantityClass, found: Classification) -> bool {
    match expected {
        QuantityClass::Conserved => found.is_conserved(),
        QuantityClass::Dissipated => found.is_dissipated(),
        QuantityClass::Neither => found == Classification::Neither,
    }
}

fn min_abs(f: &ScalarFieldSpec, sys: &SystemSpec, samples: &[State]) -> Option<f64> {
    let mut m = f64::INFINITY;
    for s in samples {
        let v = f.evaluate(&sys.bindings(s).ok()?).ok()?;
        m = m.min(v.abs());
    }
    Some(m)
}

struct Suite<'a> {
    sys: &'a SystemSpec,
    samples: &'a [State],
    tol: f64,
    mismatches: Vec<String>,
}

impl Suite<'_> {
    fn quantity(&mut self, label: &str, f: &ScalarFieldSpec, expected: Option<QuantityClass>) -> QuantityEntry {
        let report = check_quantity(self.sys, f, self.samples, self.tol);
        let matches = expected.map(|e| quantity_matches(e, report.classification));
        if matches == Some(false) {
            self.mismatches.push(format!(
                "{label} {}: expected {}, found {}",
                f.name,
                expected.unwrap(),
                classification_name(report.classification)
            ));
        }
        QuantityEntry {
            name: f.name.clone(),
            expression: f.expression.to_string(),
            expected,
            matches,
            report,
        }
    }
}

pub fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Conserved => "conserved",
        Classification::Dissipated => "dissipated",
        Classification::Both => "conserved and dissipated",
        Classification::Neither => "neither",
        Classification::Inconclusive => "inconclusive",
    }
}

pub fn symmetry_verdict(r: &SymmetryReport) -> SymmetryClass {
    if r.contact.passed {
        SymmetryClass::Contact
    } else if r.dynamical.passed {
        SymmetryClass::Dynamical
    } else {
        SymmetryClass::Neither
    }
}

/// Run every check the spec declares. Symmetry and map checks use
/// `opts.samples` seeded random states; quantity checks use `quantity_samples`.
pub fn verify(
    spec: &LoadedSpec,
    quantity_samples: &[State],
    source: SampleSource,
    opts: VerifyOptions,
) -> VerifyReport {
    let sys = &spec.system;
    let chart = sys.chart();
    let random = sample_states(sys.dim(), opts.samples, opts.seed);
    let mut suite = Suite {
        sys,
        samples: quantity_samples,
        tol: opts.tolerance,
        mismatches: Vec::new(),
    };
    let h_bounded = min_abs(&crate::analysis::hamiltonian_quantity(sys), sys, quantity_samples)
        .is_some_and(|m| m >= MIN_DIVISOR);

    let mut symmetries = Vec::new();
    for cand in &spec.symmetries {
        let y = &cand.value;
        let report = classify_symmetry(sys, y, &random, opts.tolerance);
        let verdict = symmetry_verdict(&report);
        let matches = cand.expect.map(|e| e == verdict);
        if matches == Some(false) {
            suite.mismatches.push(format!(
                "symmetry {}: expected {}, found {}",
                y.name,
                cand.expect.unwrap(),
                verdict
            ));
        }
        if !report.implication_holds() {
            suite
                .mismatches
                .push(format!("symmetry {}: contact check passed but dynamical check failed", y.name));
        }
        let (noether, quotient) = if report.dynamical.passed {
            let f = noether_quantity(y);
            let f = ScalarFieldSpec::new(format!("-eta({})", y.name), f.expression);
            let noether = suite.quantity("Noether quantity", &f, Some(QuantityClass::Dissipated));
            let quotient = h_bounded.then(|| {
                let c = conserved_from_symmetry(sys, y);
                let c = ScalarFieldSpec::new(format!("-eta({})/H", y.name), c.expression);
                suite.quantity("conserved quotient", &c, Some(QuantityClass::Conserved))
            });
            (Some(noether), quotient)
        } else {
            (None, None)
        };
        symmetries.push(SymmetryEntry {
            name: y.name.clone(),
            components: y.components().iter().map(|c| c.to_string()).collect(),
            verdict,
            expected: cand.expect,
            matches,
            report,
            noether_quantity: noether,
            conserved_quotient: quotient,
        });
    }

    let mut quantities = Vec::new();
    for cand in &spec.quantities {
        quantities.push(suite.quantity("quantity", &cand.value, cand.expect));
    }

    let dissipated: Vec<&ScalarFieldSpec> = spec
        .quantities
        .iter()
        .zip(&quantities)
        .filter(|(c, e)| c.expect == Some(QuantityClass::Dissipated) && e.report.classification.is_dissipated())
        .map(|(c, _)| &c.value)
        .collect();
    let mut quotients = Vec::new();
    for (i, f1) in dissipated.iter().enumerate() {
        for f2 in &dissipated[i + 1..] {
            if min_abs(f2, sys, quantity_samples).is_some_and(|m| m >= MIN_DIVISOR) {
                let q = quotient_quantity(f1, f2);
                quotients.push(suite.quantity("quotient", &q, Some(QuantityClass::Conserved)));
            }
        }
    }

    let mut maps = Vec::new();
    let mut pullbacks = Vec::new();
    for cand in &spec.maps {
        let map = &cand.value;
        let report = check_contact_symmetry_map(sys, map, &random, opts.tolerance);
        let verdict = if report.passed { MapClass::Contact } else { MapClass::Neither };
        let matches = cand.expect.map(|e| e == verdict);
        if matches == Some(false) {
            suite
                .mismatches
                .push(format!("map {}: expected {}, found {}", map.name, cand.expect.unwrap(), verdict));
        }
        if verdict == MapClass::Contact {
            let verified = spec
                .quantities
                .iter()
                .zip(&quantities)
                .filter(|(_, e)| e.report.classification.is_dissipated());
            for (c, _) in verified {
                let pulled = pullback_quantity(map, &c.value);
                pullbacks.push(suite.quantity("pullback", &pulled, Some(QuantityClass::Dissipated)));
            }
        }
        maps.push(MapEntry {
            name: map.name.clone(),
            components: map.components().iter().map(|c| c.to_string()).collect(),
            verdict,
            expected: cand.expect,
            matches,
            report,
        });
    }

    let mismatches = suite.mismatches;
    VerifyReport {
        coordinates: chart.coordinates().to_vec(),
        parameters: chart
            .parameters()
            .iter()
            .zip(sys.parameter_values())
            .map(|(n, v)| Parameter {
                name: n.clone(),
                value: *v,
            })
            .collect(),
        hamiltonian: sys.hamiltonian().to_string(),
        seed: opts.seed,
        samples: opts.samples,
        tolerance: opts.tolerance,
        quantity_samples: source,
        symmetries,
        quantities,
        quotients,
        maps,
        pullbacks,
        passed: mismatches.is_empty(),
        mismatches,
    }
}
