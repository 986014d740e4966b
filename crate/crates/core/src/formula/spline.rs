//! Clamped B-spline bases and P-spline difference penalties.

use ndarray::Array2;

use crate::error::{Error, Result};

const BOUNDARY_SLACK: f64 = 1e-12;

/// Evaluates every B-spline basis function of `degree` at `x`.
///
/// `breakpoints` is the strictly increasing breakpoint sequence; it is
/// augmented with `degree` repeated boundary knots on each side, giving
/// `breakpoints.len() + degree - 1` basis functions.
pub fn bspline_basis(x: f64, breakpoints: &[f64], degree: usize) -> Result<Vec<f64>> {
    if breakpoints.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("breakpoints must be strictly increasing".into()));
    }
    let lo = breakpoints[0];
    let hi = breakpoints[breakpoints.len() - 1];
    if !(x >= lo - BOUNDARY_SLACK && x <= hi + BOUNDARY_SLACK) {
        return Err(Error::Domain(format!("x = {x} outside [{lo}, {hi}]")));
    }
    let x = x.clamp(lo, hi);

    let mut knots = Vec::with_capacity(breakpoints.len() + 2 * degree);
    knots.extend(std::iter::repeat_n(lo, degree));
    knots.extend_from_slice(breakpoints);
    knots.extend(std::iter::repeat_n(hi, degree));
    let n_basis = breakpoints.len() + degree - 1;

    // knot span: knots[span] <= x < knots[span + 1], right end folded into the last span
    let interval = match breakpoints.partition_point(|&b| b <= x) {
        0 => 0,
        k if k >= breakpoints.len() => breakpoints.len() - 2,
        k => k - 1,
    };
    let span = interval + degree;

    let mut local = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    local[0] = 1.0;
    for k in 1..=degree {
        left[k] = x - knots[span + 1 - k];
        right[k] = knots[span + k] - x;
        let mut saved = 0.0;
        for r in 0..k {
            let temp = local[r] / (right[r + 1] + left[k - r]);
            local[r] = saved + right[r + 1] * temp;
            saved = left[k - r] * temp;
        }
        local[k] = saved;
    }

    let mut out = vec![0.0; n_basis];
    for (r, v) in local.into_iter().enumerate() {
        out[span - degree + r] = v;
    }
    Ok(out)
}

/// Equally spaced breakpoints over `[lo, hi]` for a basis of `n_basis`
/// functions of the given degree.
pub fn equispaced_breakpoints(lo: f64, hi: f64, n_basis: usize, degree: usize) -> Result<Vec<f64>> {
    if n_basis < degree + 1 {
        return Err(Error::Domain(format!(
            "n_basis {n_basis} too small for degree {degree}"
        )));
    }
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "smooth needs a non-degenerate range, got [{lo}, {hi}]"
        )));
    }
    let count = n_basis - degree + 1;
    let step = (hi - lo) / (count - 1) as f64;
    let mut b: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    b[count - 1] = hi;
    Ok(b)
}

/// `DᵀD` for the `order`-th difference operator on `n_basis` coefficients.
pub fn difference_penalty(n_basis: usize, order: usize) -> Result<Array2<f64>> {
    if order == 0 || n_basis <= order {
        return Err(Error::Dimension(format!(
            "difference penalty needs n_basis > order >= 1, got n_basis={n_basis}, order={order}"
        )));
    }
    let mut d = Array2::<f64>::eye(n_basis);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let next = Array2::from_shape_fn((rows, n_basis), |(i, j)| d[[i + 1, j]] - d[[i, j]]);
        d = next;
    }
    Ok(d.t().dot(&d))
}
