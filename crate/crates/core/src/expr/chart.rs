use std::collections::HashMap;
use std::fmt;

use super::ExprError;

/// Name of the action coordinate. Reserved in every chart.
pub const ACTION: &str = "s";

pub(crate) const FUNCTIONS: [&str; 6] = ["sin", "cos", "exp", "log", "sqrt", "abs"];

/// The set of names an expression may refer to, with a fixed slot order.
///
/// Slots are laid out as `q^1..q^n, p_1..p_n, s, parameters...`, so the first
/// `2n + 1` slots are exactly the Darboux chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coordinates: Vec<String>,
    momenta: Vec<String>,
    parameters: Vec<String>,
    index: HashMap<String, usize>,
}

/// Momentum paired with a coordinate: `x` ↦ `p_x`, and `q<k>` ↦ `p_<k>`.
pub fn momentum_name(coordinate: &str) -> String {
    match coordinate.strip_prefix('q') {
        Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => {
            format!("p_{rest}")
        }
        _ => format!("p_{coordinate}"),
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Chart {
    pub fn new<S: AsRef<str>, P: AsRef<str>>(
        coordinates: &[S],
        parameters: &[P],
    ) -> Result<Self, ExprError> {
        if coordinates.is_empty() {
            return Err(ExprError::InvalidChart(
                "a chart needs at least one coordinate".into(),
            ));
        }
        let coordinates: Vec<String> = coordinates.iter().map(|c| c.as_ref().to_string()).collect();
        let momenta: Vec<String> = coordinates.iter().map(|c| momentum_name(c)).collect();
        let parameters: Vec<String> = parameters.iter().map(|c| c.as_ref().to_string()).collect();

        let mut index = HashMap::new();
        let ordered = coordinates
            .iter()
            .chain(momenta.iter())
            .chain(std::iter::once(&ACTION.to_string()))
            .chain(parameters.iter())
            .cloned()
            .collect::<Vec<_>>();
        for (slot, name) in ordered.into_iter().enumerate() {
            if !is_identifier(&name) {
                return Err(ExprError::InvalidChart(format!("`{name}` is not a valid identifier")));
            }
            if FUNCTIONS.contains(&name.as_str()) {
                return Err(ExprError::InvalidChart(format!("`{name}` is a function name")));
            }
            if index.insert(name.clone(), slot).is_some() {
                return Err(ExprError::InvalidChart(format!("name `{name}` declared twice")));
            }
        }
        Ok(Chart {
            coordinates,
            momenta,
            parameters,
            index,
        })
    }

    /// Number of degrees of freedom `n`.
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Dimension `2n + 1` of the contact manifold.
    pub fn manifold_dim(&self) -> usize {
        2 * self.dim() + 1
    }

    pub fn slot_count(&self) -> usize {
        self.manifold_dim() + self.parameters.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn momenta(&self) -> &[String] {
        &self.momenta
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn q_slot(&self, i: usize) -> usize {
        i
    }

    pub fn p_slot(&self, i: usize) -> usize {
        self.dim() + i
    }

    pub fn s_slot(&self) -> usize {
        2 * self.dim()
    }

    pub fn param_slot(&self, j: usize) -> usize {
        self.manifold_dim() + j
    }

    pub fn is_chart_slot(&self, slot: usize) -> bool {
        slot < self.manifold_dim()
    }

    pub fn name(&self, slot: usize) -> &str {
        let n = self.dim();
        if slot < n {
            &self.coordinates[slot]
        } else if slot < 2 * n {
            &self.momenta[slot - n]
        } else if slot == 2 * n {
            ACTION
        } else {
            &self.parameters[slot - 2 * n - 1]
        }
    }

    /// Chart coordinate names in slot order: `q.., p.., s`.
    pub fn chart_names(&self) -> impl Iterator<Item = &str> {
        (0..self.manifold_dim()).map(move |k| self.name(k))
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.chart_names().collect();
        write!(f, "({})", names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_pairing() {
        assert_eq!(momentum_name("x"), "p_x");
        assert_eq!(momentum_name("q1"), "p_1");
        assert_eq!(momentum_name("q"), "p_q");
        assert_eq!(momentum_name("qa"), "p_qa");
    }

    #[test]
    fn slot_layout() {
        let chart = Chart::new(&["x", "y"], &["m", "g"]).unwrap();
        assert_eq!(chart.manifold_dim(), 5);
        assert_eq!(chart.slot("x"), Some(0));
        assert_eq!(chart.slot("p_y"), Some(3));
        assert_eq!(chart.slot("s"), Some(4));
        assert_eq!(chart.slot("g"), Some(6));
        assert_eq!(chart.name(4), "s");
        assert_eq!(chart.to_string(), "(x, y, p_x, p_y, s)");
    }

    #[test]
    fn rejects_bad_names() {
        assert!(Chart::new::<&str, &str>(&[], &[]).is_err());
        assert!(Chart::new(&["s"], &["m"]).is_err());
        assert!(Chart::new(&["x"], &["p_x"]).is_err());
        assert!(Chart::new(&["sin"], &["m"]).is_err());
        assert!(Chart::new(&["2x"], &["m"]).is_err());
    }
}
