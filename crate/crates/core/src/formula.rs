//! Model formulas for design-matrix construction.
//!
//! A formula is a `+`-separated list of terms; each term is a `:`-separated
//! product of factors; a factor is a column name with an optional integer
//! power (`LogOpTime^2`). The intercept is implicit: fitting routines always
//! prepend a constant column themselves.
//!
//! Example: `KeyLogPop + KeyLogPop:KeyPctUrban + LogOpTime^2`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::table::Frame;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Factor {
    name: String,
    power: u32,
}

/// One product term of a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    /// Canonical label, e.g. `KeyLogPop:KeyPctUrban` or `LogOpTime^2`.
    pub fn label(&self) -> String {
        self.factors
            .iter()
            .map(|f| {
                if f.power == 1 {
                    f.name.clone()
                } else {
                    format!("{}^{}", f.name, f.power)
                }
            })
            .collect::<Vec<_>>()
            .join(":")
    }

    /// True when the term is exactly the single first-power column `name`.
    fn is_main_effect(&self, name: &str) -> bool {
        self.factors.len() == 1 && self.factors[0].power == 1 && self.factors[0].name == name
    }

    fn evaluate(&self, frame: &Frame) -> Result<Vec<f64>> {
        let mut out = vec![1.0; frame.nrows()];
        for f in &self.factors {
            let col = frame
                .column(&f.name)
                .ok_or_else(|| Error::Format(format!("formula references unknown column '{}'", f.name)))?;
            for (o, &v) in out.iter_mut().zip(col) {
                *o *= v.powi(f.power as i32);
            }
        }
        Ok(out)
    }
}

/// A parsed model formula (right-hand side only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    terms: Vec<Term>,
}

impl Formula {
    /// Parse a formula string. Whitespace around separators is ignored.
    pub fn parse(text: &str) -> Result<Formula> {
        let mut terms = Vec::new();
        for raw_term in text.split('+') {
            let raw_term = raw_term.trim();
            if raw_term.is_empty() {
                return Err(Error::Parameter(format!("empty term in formula '{}'", text)));
            }
            let mut factors = Vec::new();
            for raw_factor in raw_term.split(':') {
                let raw_factor = raw_factor.trim();
                let (name, power) = match raw_factor.split_once('^') {
                    Some((n, p)) => {
                        let power: u32 = p.trim().parse().map_err(|_| {
                            Error::Parameter(format!("bad power in factor '{}'", raw_factor))
                        })?;
                        if power == 0 {
                            return Err(Error::Parameter(format!(
                                "zero power in factor '{}'",
                                raw_factor
                            )));
                        }
                        (n.trim(), power)
                    }
                    None => (raw_factor, 1),
                };
                if name.is_empty()
                    || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
                {
                    return Err(Error::Parameter(format!("bad column name '{}'", name)));
                }
                factors.push(Factor { name: name.to_string(), power });
            }
            terms.push(Term { factors });
        }
        if terms.is_empty() {
            return Err(Error::Parameter("formula has no terms".into()));
        }
        Ok(Formula { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::label).collect()
    }

    /// True when the formula contains `name` as a plain main-effect term.
    pub fn has_main_effect(&self, name: &str) -> bool {
        self.terms.iter().any(|t| t.is_main_effect(name))
    }

    /// Evaluate the formula against a frame, producing the design matrix
    /// (one column per term, no intercept).
    pub fn design(&self, frame: &Frame) -> Result<Matrix> {
        let mut columns = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            columns.push(term.evaluate(frame)?);
        }
        Matrix::from_columns(&columns)
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.term_labels().join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Frame {
        let mut f = Frame::new();
        f.push_column("a", vec![1.0, 2.0, 3.0]).unwrap();
        f.push_column("b", vec![0.5, 0.5, 2.0]).unwrap();
        f
    }

    #[test]
    fn parses_interactions_and_powers() {
        let f = Formula::parse("a + a:b + b^2").unwrap();
        assert_eq!(f.term_labels(), vec!["a", "a:b", "b^2"]);
        let d = f.design(&frame()).unwrap();
        assert_eq!(d.rows(), 3);
        assert_eq!(d.get(2, 0), 3.0); // a
        assert_eq!(d.get(2, 1), 6.0); // a*b
        assert_eq!(d.get(2, 2), 4.0); // b^2
    }

    #[test]
    fn unknown_column_is_a_format_error() {
        let f = Formula::parse("missing").unwrap();
        assert!(matches!(f.design(&frame()), Err(Error::Format(_))));
    }

    #[test]
    fn main_effect_detection() {
        let f = Formula::parse("a + a:b").unwrap();
        assert!(f.has_main_effect("a"));
        assert!(!f.has_main_effect("b"));
    }

    #[test]
    fn rejects_malformed_formulas() {
        assert!(Formula::parse("a + + b").is_err());
        assert!(Formula::parse("a^0").is_err());
        assert!(Formula::parse("a^x").is_err());
        assert!(Formula::parse("bad name").is_err());
    }

    #[test]
    fn display_round_trips() {
        let f = Formula::parse(" a +a:b+ b^2 ").unwrap();
        assert_eq!(f.to_string(), "a + a:b + b^2");
    }
}
