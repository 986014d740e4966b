use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};

use super::spline::{bspline_basis, difference_penalty, equispaced_breakpoints};
use super::{Formula, Term};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Observed `[min, max]` per variable, captured at fit time.
pub type VarRanges = BTreeMap<String, (f64, f64)>;

/// Design matrix of one structured term with its quadratic penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBlock {
    pub matrix: Array2<f64>,
    /// Zero matrix for unpenalized terms.
    pub penalty: Array2<f64>,
    /// Smoothing parameter for smooths, L1 weight for lasso terms.
    pub lambda: f64,
    pub term: Term,
}

impl DesignBlock {
    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    /// Penalty contribution for coefficients `beta`: `λ βᵀPβ` for smooths
    /// and `λ ‖β‖₁` for lasso terms.
    pub fn penalty_value(&self, beta: &[f64]) -> f64 {
        match self.term {
            Term::Smooth(_) if self.lambda > 0.0 => {
                let b = ArrayView1::from(beta);
                self.lambda * b.dot(&self.penalty.dot(&b))
            }
            Term::L1Linear { .. } => self.lambda * beta.iter().map(|v| v.abs()).sum::<f64>(),
            _ => 0.0,
        }
    }

    /// Adds the penalty gradient for `beta` into `out`.
    pub(crate) fn add_penalty_grad(&self, beta: &[f64], out: &mut [f64]) {
        match self.term {
            Term::Smooth(_) if self.lambda > 0.0 => {
                let b = ArrayView1::from(beta);
                let pb = self.penalty.dot(&b);
                for (o, v) in out.iter_mut().zip(pb.iter()) {
                    *o += 2.0 * self.lambda * v;
                }
            }
            Term::L1Linear { .. } => {
                for (o, b) in out.iter_mut().zip(beta) {
                    *o += self.lambda * crate::distributions::sign(*b);
                }
            }
            _ => {}
        }
    }
}

/// Input rows for a deep term, routed to its network.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepInput {
    pub term: Term,
    pub net: String,
    pub inputs: Array2<f64>,
}

/// Min/max of every variable referenced by `formulas`.
pub fn variable_ranges<'a>(
    formulas: impl IntoIterator<Item = &'a Formula>,
    data: &Dataset,
) -> Result<VarRanges> {
    let mut ranges = VarRanges::new();
    for f in formulas {
        for t in f.terms() {
            for v in t.variables() {
                if ranges.contains_key(v) {
                    continue;
                }
                let col = data.column(v)?;
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ranges.insert(v.to_string(), (lo, hi));
            }
        }
    }
    Ok(ranges)
}

/// Builds design blocks for `formula` on `data`, with smooth knots placed
/// over the observed range of `data`.
pub fn build_design(formula: &Formula, data: &Dataset) -> Result<(Vec<DesignBlock>, Vec<DeepInput>)> {
    let ranges = variable_ranges([formula], data)?;
    build_design_with_ranges(formula, data, &ranges)
}

/// Builds design blocks using fit-time `ranges` for knot placement. Smooth
/// inputs outside their range are clamped to the boundary.
pub fn build_design_with_ranges(
    formula: &Formula,
    data: &Dataset,
    ranges: &VarRanges,
) -> Result<(Vec<DesignBlock>, Vec<DeepInput>)> {
    let n = data.len();
    let mut blocks = Vec::new();
    let mut deep = Vec::new();
    for term in formula.terms() {
        match term {
            Term::Intercept => blocks.push(DesignBlock {
                matrix: Array2::ones((n, 1)),
                penalty: Array2::zeros((1, 1)),
                lambda: 0.0,
                term: term.clone(),
            }),
            Term::Linear(v) => blocks.push(DesignBlock {
                matrix: column_matrix(data.column(v)?),
                penalty: Array2::zeros((1, 1)),
                lambda: 0.0,
                term: term.clone(),
            }),
            Term::L1Linear { var, lambda } => blocks.push(DesignBlock {
                matrix: column_matrix(data.column(var)?),
                penalty: Array2::zeros((1, 1)),
                lambda: *lambda,
                term: term.clone(),
            }),
            Term::Smooth(s) => {
                let col = data.column(&s.var)?;
                let &(lo, hi) = ranges
                    .get(&s.var)
                    .ok_or_else(|| Error::MissingColumn(s.var.clone()))?;
                let breaks = equispaced_breakpoints(lo, hi, s.n_basis, s.degree)?;
                let mut matrix = Array2::zeros((n, s.n_basis));
                for (i, &x) in col.iter().enumerate() {
                    let row = bspline_basis(x.clamp(lo, hi), &breaks, s.degree)?;
                    for (j, v) in row.into_iter().enumerate() {
                        matrix[[i, j]] = v;
                    }
                }
                blocks.push(DesignBlock {
                    matrix,
                    penalty: difference_penalty(s.n_basis, s.penalty_order)?,
                    lambda: s.lambda,
                    term: term.clone(),
                });
            }
            Term::Deep { net, vars } => {
                let cols = vars
                    .iter()
                    .map(|v| data.column(v))
                    .collect::<Result<Vec<_>>>()?;
                let inputs = Array2::from_shape_fn((n, vars.len()), |(i, j)| cols[j][i]);
                deep.push(DeepInput { term: term.clone(), net: net.clone(), inputs });
            }
        }
    }
    Ok((blocks, deep))
}

fn column_matrix(col: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((col.len(), 1), |(i, _)| col[i])
}

/// η = Σ_j blockⱼ·βⱼ + Σ deep outputs.
pub fn evaluate_predictor(
    blocks: &[DesignBlock],
    coefficients: &[Vec<f64>],
    deep_outputs: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if blocks.len() != coefficients.len() {
        return Err(Error::Dimension(format!(
            "{} blocks but {} coefficient sets",
            blocks.len(),
            coefficients.len()
        )));
    }
    let n = blocks
        .first()
        .map(|b| b.matrix.nrows())
        .or_else(|| deep_outputs.first().map(Vec::len))
        .unwrap_or(0);
    let mut eta = vec![0.0; n];
    for (block, beta) in blocks.iter().zip(coefficients) {
        if block.width() != beta.len() || block.matrix.nrows() != n {
            return Err(Error::Dimension(format!(
                "term `{}`: block is {}x{}, got {} coefficients",
                block.term,
                block.matrix.nrows(),
                block.width(),
                beta.len()
            )));
        }
        let contrib = block.matrix.dot(&ArrayView1::from(beta.as_slice()));
        for (e, c) in eta.iter_mut().zip(contrib.iter()) {
            *e += c;
        }
    }
    for out in deep_outputs {
        if out.len() != n {
            return Err(Error::Dimension(format!(
                "deep output has {} rows, expected {n}",
                out.len()
            )));
        }
        for (e, c) in eta.iter_mut().zip(out) {
            *e += c;
        }
    }
    Ok(eta)
}
