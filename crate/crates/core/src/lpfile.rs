//! Textual LP-format export and a `name value` solution file format.
//!
//! The export is byte-stable: variables in column order, rows in row order,
//! shortest round-trip float formatting. Solution files hold one `name value`
//! pair per line with `#` comments, so externally computed solutions can be
//! checked against the model.

use std::collections::HashMap;
use std::fmt;

use crate::formulation::{LpProblem, Relation};

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn push_terms(out: &mut String, terms: &[(usize, f64)], p: &LpProblem) {
    for (i, &(col, coef)) in terms.iter().enumerate() {
        if i > 0 && i % 6 == 0 {
            out.push_str("\n   ");
        }
        if coef >= 0.0 {
            if i > 0 {
                out.push_str(" + ");
            } else {
                out.push(' ');
            }
            out.push_str(&format!("{} {}", coef, p.variable_name(col)));
        } else {
            out.push_str(&format!(" - {} {}", -coef, p.variable_name(col)));
        }
    }
}

/// Serializes the problem in the standard textual LP format.
pub fn export_lp_file(p: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let obj_terms: Vec<(usize, f64)> = p
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (j, *c))
        .collect();
    push_terms(&mut out, &obj_terms, p);
    out.push_str("\nSubject To\n");
    for row in &p.rows {
        out.push_str(&format!(" {}:", row.tag));
        push_terms(&mut out, &row.coeffs, p);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(" {} {}\n", rel, row.rhs));
    }
    out.push_str("Bounds\n");
    for j in 0..p.num_variables() {
        let name = p.variable_name(j);
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo == hi {
            out.push_str(&format!(" {} = {}\n", name, lo));
        } else if hi.is_finite() {
            out.push_str(&format!(" {} <= {} <= {}\n", lo, name, hi));
        } else {
            out.push_str(&format!(" {} >= {}\n", name, lo));
        }
    }
    let binaries: Vec<usize> = (0..p.num_variables())
        .filter(|&j| p.integer[j] && p.upper[j] - p.lower[j] <= 1.0 + 1e-9)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for j in binaries {
            out.push_str(&format!(" {}\n", p.variable_name(j)));
        }
    }
    let generals: Vec<usize> = (0..p.num_variables())
        .filter(|&j| p.integer[j] && p.upper[j] - p.lower[j] > 1.0 + 1e-9)
        .collect();
    if !generals.is_empty() {
        out.push_str("General\n");
        for j in generals {
            out.push_str(&format!(" {}\n", p.variable_name(j)));
        }
    }
    out.push_str("End\n");
    out
}

/// Writes a solution as `name value` lines in column order.
pub fn write_solution(p: &LpProblem, values: &[f64]) -> String {
    let mut out = String::from("# variable value\n");
    for (j, v) in values.iter().enumerate() {
        out.push_str(&format!("{} {}\n", p.variable_name(j), v));
    }
    out
}

/// Parses a solution file into a partial assignment (per column), tolerating
/// unknown names, which are returned as warnings.
pub fn import_solution(
    p: &LpProblem,
    text: &str,
) -> Result<(Vec<Option<f64>>, Vec<String>), ParseError> {
    let name_to_col: HashMap<String, usize> =
        (0..p.num_variables()).map(|j| (p.variable_name(j), j)).collect();
    let mut values = vec![None; p.num_variables()];
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let (Some(name), Some(value)) = (parts.next(), parts.next()) else {
            return Err(ParseError { line, message: format!("expected `name value`, got {raw:?}") });
        };
        if parts.next().is_some() {
            return Err(ParseError { line, message: "trailing tokens".into() });
        }
        let v: f64 = value
            .parse()
            .map_err(|_| ParseError { line, message: format!("bad number {value:?}") })?;
        match name_to_col.get(name) {
            Some(&col) => values[col] = Some(v),
            None => warnings.push(format!("unknown variable {name} on line {line}")),
        }
    }
    Ok((values, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{FormulationOptions, Row, RowTag, VariableKey};
    use crate::graph::LinkId;
    use crate::service::CommodityId;

    fn one_var_problem() -> LpProblem {
        LpProblem::from_parts(
            vec![VariableKey::Flow { commodity: CommodityId(3), link: LinkId(12) }],
            vec![2.0],
            vec![Row {
                coeffs: vec![(0, 1.0)],
                relation: Relation::Ge,
                rhs: 1.0,
                tag: RowTag::ObjectSum { link: LinkId(12) },
            }],
            vec![0.0],
            vec![1.0],
            vec![true],
            FormulationOptions::default(),
        )
    }

    #[test]
    fn lp_file_has_format_skeleton() {
        let p = one_var_problem();
        let text = export_lp_file(&p);
        for section in ["Minimize", "Subject To", "Bounds", "Binary", "End"] {
            assert!(text.contains(section), "missing {section} in:\n{text}");
        }
        assert!(text.contains("f_k3_e12"));
        // byte-stable across calls
        assert_eq!(text, export_lp_file(&p));
    }

    #[test]
    fn solution_round_trip_preserves_objective() {
        let p = one_var_problem();
        let values = vec![0.73];
        let text = write_solution(&p, &values);
        let (parsed, warnings) = import_solution(&p, &text).unwrap();
        assert!(warnings.is_empty());
        let restored: Vec<f64> = parsed.iter().map(|v| v.unwrap_or(0.0)).collect();
        assert!((p.objective_value(&restored) - p.objective_value(&values)).abs() < 1e-6);
    }

    #[test]
    fn unknown_names_warn_and_malformed_lines_error() {
        let p = one_var_problem();
        let (_, warnings) = import_solution(&p, "mystery 1.0\n# comment\n").unwrap();
        assert_eq!(warnings.len(), 1);
        let err = import_solution(&p, "f_k3_e12 =").unwrap_err();
        assert_eq!(err.line, 1);
    }
}
