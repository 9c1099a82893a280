//! Multi-block primal-dual hybrid gradient solver for `min F(Kx) + G(x)`.
//!
//! The primal variable is a list of columns (for the coupled problem:
//! `f1, f2, f3`). Each block pairs one linear operator acting on one column
//! with one separable function. Blocks are normalized by their operator norm
//! and scaled by `ν_i`; the step sizes come from [`compute_step_sizes`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{estimate_norm, OperatorRef, Shape};
use crate::prox::SeparableFunction;

mod pdhg;
mod steps;

pub use pdhg::{
    pdhg_iterate, solve, ConvergenceReport, IterationRecord, Pdhg, SolverState, StopReason,
    StoppingRule,
};
pub use steps::{
    compute_step_sizes, step_condition, weighted_normal_norm, PowerSettings, StepSizeConfig,
};

/// One term `F_i(K_i x_c)` of the objective.
#[derive(Debug, Clone)]
pub struct Block {
    pub name: String,
    pub operator: OperatorRef,
    pub function: SeparableFunction,
    /// Index of the primal column the operator reads.
    pub column: usize,
    /// Blocks that contain the X-ray transform receive the heavier step weight.
    pub xray: bool,
    /// Cached `‖K_i‖₂`.
    pub norm: Option<f64>,
}

impl Block {
    pub fn new(
        name: impl Into<String>,
        operator: OperatorRef,
        function: SeparableFunction,
        column: usize,
    ) -> Self {
        Self {
            name: name.into(),
            operator,
            function,
            column,
            xray: false,
            norm: None,
        }
    }

    pub fn with_xray(mut self) -> Self {
        self.xray = true;
        self
    }
}

/// The `G` term, applied to the primal variable through its prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimalConstraint {
    Free,
    /// Indicator of `x_0 − x_1 − x_2 = 0` over three equally shaped columns.
    Coupling,
    /// `weight · ‖x‖₁` over all columns.
    L1 {
        weight: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub columns: Vec<Shape>,
    pub blocks: Vec<Block>,
    pub constraint: PrimalConstraint,
}

impl ProblemSpec {
    pub fn new(
        columns: Vec<Shape>,
        blocks: Vec<Block>,
        constraint: PrimalConstraint,
    ) -> Result<Self> {
        if columns.is_empty() || blocks.is_empty() {
            return Err(Error::param(
                "problem needs at least one column and one block",
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            let col = columns.get(b.column).ok_or_else(|| {
                Error::shape(format!(
                    "block {i} ({}) reads missing column {}",
                    b.name, b.column
                ))
            })?;
            if b.operator.domain() != *col {
                return Err(Error::shape(format!(
                    "block {i} ({}) expects {}, column {} is {}",
                    b.name,
                    b.operator.domain(),
                    b.column,
                    col
                )));
            }
            let m = b.operator.range().len();
            let center_len = match &b.function {
                SeparableFunction::L2Ball { center, .. }
                | SeparableFunction::SquaredL2 { center, .. } => Some(center.len()),
                SeparableFunction::L1 { .. } => None,
            };
            if center_len.is_some_and(|n| n != m) {
                return Err(Error::shape(format!(
                    "block {i} ({}) has a center of the wrong length",
                    b.name
                )));
            }
        }
        match constraint {
            PrimalConstraint::Coupling => {
                if columns.len() != 3
                    || columns[1].len() != columns[0].len()
                    || columns[2].len() != columns[0].len()
                {
                    return Err(Error::shape("coupling needs three equally sized columns"));
                }
            }
            PrimalConstraint::L1 { weight } if !(weight >= 0.0) => {
                return Err(Error::param("primal l1 weight must be >= 0"));
            }
            _ => {}
        }
        Ok(Self {
            columns,
            blocks,
            constraint,
        })
    }

    pub fn primal_len(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    /// Fill in `‖K_i‖₂` for every block, sharing results between blocks that
    /// hold the same operator.
    pub fn estimate_block_norms(&mut self, power: PowerSettings) -> Result<()> {
        let mut done: Vec<(OperatorRef, f64)> = Vec::new();
        for b in &mut self.blocks {
            if b.norm.is_some() {
                continue;
            }
            let known = done
                .iter()
                .find(|(op, _)| Arc::ptr_eq(op, &b.operator))
                .map(|(_, n)| *n);
            let n = match known {
                Some(n) => n,
                None => {
                    let n = estimate_norm(b.operator.as_ref(), power.tol, power.max_iters)?;
                    done.push((b.operator.clone(), n));
                    n
                }
            };
            if !(n > 0.0) {
                return Err(Error::param(format!(
                    "block {} has a zero operator",
                    b.name
                )));
            }
            b.norm = Some(n);
        }
        Ok(())
    }

    pub fn block_norms(&self) -> Result<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                b.norm
                    .ok_or_else(|| Error::param(format!("norm of block {} not estimated", b.name)))
            })
            .collect()
    }

    /// Offsets of each column in the stacked primal vector.
    pub(crate) fn column_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.columns.len() + 1);
        let mut acc = 0;
        off.push(0);
        for c in &self.columns {
            acc += c.len();
            off.push(acc);
        }
        off
    }
}
