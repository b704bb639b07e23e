//! Named-column tables for unit-level data.
//!
//! `Frame` is a minimal ordered collection of named numeric columns; it backs
//! formula evaluation and design-matrix construction. `UnitTable` couples a
//! covariate frame with unit identifiers and the optional treatment/outcome
//! columns of one side of the bipartite graph.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Ordered set of equally-long named `f64` columns.
#[derive(Debug, Clone, Default)]
pub struct Frame {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    nrows: usize,
}

impl Frame {
    pub fn new() -> Self {
        Frame::default()
    }

    /// Append a column. The first column fixes the row count.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.names.iter().any(|n| n == &name) {
            return Err(Error::Duplicate(format!("column '{}'", name)));
        }
        if self.columns.is_empty() {
            self.nrows = values.len();
        } else if values.len() != self.nrows {
            return Err(Error::Dimension(format!(
                "column '{}' has {} rows, expected {}",
                name,
                values.len(),
                self.nrows
            )));
        }
        self.names.push(name);
        self.columns.push(values);
        Ok(())
    }

    /// Replace an existing column's values.
    pub fn replace_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.nrows {
            return Err(Error::Dimension(format!(
                "replacement for '{}' has {} rows, expected {}",
                name,
                values.len(),
                self.nrows
            )));
        }
        match self.names.iter().position(|n| n == name) {
            Some(idx) => {
                self.columns[idx] = values;
                Ok(())
            }
            None => Err(Error::Format(format!("unknown column '{}'", name))),
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|idx| self.columns[idx].as_slice())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// New frame with the given rows (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Frame {
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Frame { names: self.names.clone(), columns, nrows: rows.len() }
    }

    /// Merge all columns of `other` into `self` (row counts must match).
    pub fn extend_from(&mut self, other: &Frame) -> Result<()> {
        for (name, col) in other.names.iter().zip(&other.columns) {
            self.push_column(name.clone(), col.clone())?;
        }
        Ok(())
    }
}

/// One side of the bipartite graph: identifiers, covariates, and the
/// optional treatment (intervention side) or outcome (outcome side) column.
#[derive(Debug, Clone)]
pub struct UnitTable {
    pub ids: Vec<String>,
    pub covariates: Frame,
    pub treatment: Option<Vec<u8>>,
    pub outcome: Option<Vec<f64>>,
}

impl UnitTable {
    pub fn new(ids: Vec<String>, covariates: Frame) -> Result<Self> {
        let mut seen = HashSet::new();
        for id in &ids {
            if id.is_empty() {
                return Err(Error::Format("empty unit id".into()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Duplicate(format!("unit id '{}'", id)));
            }
        }
        if !covariates.is_empty() && covariates.nrows() != ids.len() {
            return Err(Error::Dimension(format!(
                "{} ids but {} covariate rows",
                ids.len(),
                covariates.nrows()
            )));
        }
        Ok(UnitTable { ids, covariates, treatment: None, outcome: None })
    }

    pub fn with_treatment(mut self, treatment: Vec<u8>) -> Result<Self> {
        if treatment.len() != self.ids.len() {
            return Err(Error::Dimension("treatment length mismatch".into()));
        }
        if treatment.iter().any(|&t| t > 1) {
            return Err(Error::Format("treatment values must be 0 or 1".into()));
        }
        self.treatment = Some(treatment);
        Ok(self)
    }

    pub fn with_outcome(mut self, outcome: Vec<f64>) -> Result<Self> {
        if outcome.len() != self.ids.len() {
            return Err(Error::Dimension("outcome length mismatch".into()));
        }
        self.outcome = Some(outcome);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// New table restricted to the given rows (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> UnitTable {
        UnitTable {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            covariates: self.covariates.select_rows(rows),
            treatment: self
                .treatment
                .as_ref()
                .map(|t| rows.iter().map(|&r| t[r]).collect()),
            outcome: self
                .outcome
                .as_ref()
                .map(|y| rows.iter().map(|&r| y[r]).collect()),
        }
    }
}
