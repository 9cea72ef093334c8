//! Named columns shared by the generators, imputation and estimators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every variable a simulated dataset can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    X,
    Y,
    Zc,
    Zc1,
    Zc2,
    Zi,
    Zp,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::X,
        Variable::Y,
        Variable::Zc,
        Variable::Zc1,
        Variable::Zc2,
        Variable::Zi,
        Variable::Zp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::X => "x",
            Variable::Y => "y",
            Variable::Zc => "zc",
            Variable::Zc1 => "zc1",
            Variable::Zc2 => "zc2",
            Variable::Zi => "zi",
            Variable::Zp => "zp",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown variable `{s}` (expected one of x, y, zc, zc1, zc2, zi, zp)"
                ))
            })
    }
}

/// A set of equal-length columns keyed by [`Variable`].
///
/// Missing entries are stored as NaN. Anything that turns a frame into a
/// design matrix rejects NaN, so unfilled values cannot leak into a fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    n: usize,
    columns: [Option<Vec<f64>>; 7],
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            columns: Default::default(),
        }
    }

    pub fn with(mut self, var: Variable, values: Vec<f64>) -> Result<Self> {
        self.insert(var, values)?;
        Ok(self)
    }

    pub fn insert(&mut self, var: Variable, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::Argument(format!(
                "column {var} has length {} but the frame has {} rows",
                values.len(),
                self.n
            )));
        }
        self.columns[var.index()] = Some(values);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has(&self, var: Variable) -> bool {
        self.columns[var.index()].is_some()
    }

    pub fn column(&self, var: Variable) -> Result<&[f64]> {
        self.columns[var.index()]
            .as_deref()
            .ok_or_else(|| Error::Argument(format!("frame has no column `{var}`")))
    }

    pub fn column_mut(&mut self, var: Variable) -> Result<&mut [f64]> {
        self.columns[var.index()]
            .as_deref_mut()
            .ok_or_else(|| Error::Argument(format!("frame has no column `{var}`")))
    }

    pub fn variables(&self) -> Vec<Variable> {
        Variable::ALL.into_iter().filter(|v| self.has(*v)).collect()
    }

    /// New frame holding the given rows of every column, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Frame {
        let mut out = Frame::new(rows.len());
        for (slot, col) in out.columns.iter_mut().zip(&self.columns) {
            *slot = col.as_ref().map(|c| rows.iter().map(|&i| c[i]).collect());
        }
        out
    }

    /// Row indices where `x` equals `arm` (0 or 1).
    pub fn arm_rows(&self, arm: u8) -> Result<Vec<usize>> {
        let x = self.column(Variable::X)?;
        let a = f64::from(arm);
        Ok((0..self.n).filter(|&i| x[i] == a).collect())
    }
}
