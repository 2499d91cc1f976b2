//! Labeled and unlabeled records.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ising::{check_intercept, check_q, OutcomeConfig, StackedLayout};

/// Shared feature layout: `q` outcomes, `p` auxiliary features, `w_len`
/// adjustment entries (intercept included).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub q: usize,
    pub p: usize,
    pub w_len: usize,
}

impl Schema {
    pub fn ising_layout(&self) -> StackedLayout {
        StackedLayout::ising(self.q, self.w_len)
    }

    fn check_zw(&self, x: &[f64], w: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "auxiliary features x",
                expected: self.p,
                found: x.len(),
            });
        }
        if w.len() != self.w_len {
            return Err(Error::DimensionMismatch {
                what: "adjustment vector w",
                expected: self.w_len,
                found: w.len(),
            });
        }
        check_intercept(w)
    }

    /// Infers the schema from the labeled sample and checks every record.
    pub fn infer(q: usize, labeled: &[LabeledSample], unlabeled: &[UnlabeledSample]) -> Result<Self> {
        check_q(q)?;
        let first = labeled.first().ok_or(Error::EmptyLabeled)?;
        let schema = Schema {
            q,
            p: first.x.len(),
            w_len: first.w.len(),
        };
        for s in labeled {
            schema.check_zw(&s.x, &s.w)?;
            if s.y.0 >> q != 0 {
                return Err(Error::NonBinaryOutcome);
            }
        }
        for s in unlabeled {
            schema.check_zw(&s.x, &s.w)?;
        }
        Ok(schema)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub y: OutcomeConfig,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSample {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl LabeledSample {
    pub fn unlabeled(&self) -> UnlabeledSample {
        UnlabeledSample {
            x: self.x.clone(),
            w: self.w.clone(),
        }
    }
}

/// Borrowed `(x, w)` view shared by both kinds of record.
pub trait Features {
    fn x(&self) -> &[f64];
    fn w(&self) -> &[f64];
}

impl Features for LabeledSample {
    fn x(&self) -> &[f64] {
        &self.x
    }
    fn w(&self) -> &[f64] {
        &self.w
    }
}

impl Features for UnlabeledSample {
    fn x(&self) -> &[f64] {
        &self.x
    }
    fn w(&self) -> &[f64] {
        &self.w
    }
}
