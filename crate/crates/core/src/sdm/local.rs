//! Local analyses: interpolation matrices over a window and the influence row
//! of its center coarse point.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fdm::{LocalSolver, StencilField, SubdomainWindow};
use crate::linear::solve_dense_small;

/// Result of one local analysis. Shared between operators with identical windows.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    /// Interpolation matrix: one row per window node (row-major), one column per reference point.
    pub nl: DMatrix<f64>,
    /// Influence coefficients, the row of `nl` at the center node.
    pub al: Vec<f64>,
    /// Condition number of the oversampling matrix, if one was inverted.
    pub d_cond: Option<f64>,
    /// Whether the pseudo-inverse replaced an ill-conditioned oversampling matrix.
    pub pinv_fallback: bool,
    /// Whether a singular oversampling matrix led to a plain analysis instead.
    pub plain_fallback: bool,
}

impl LocalBasis {
    /// Largest deviation of a row sum of `nl` or of `al` from one.
    pub fn partition_defect(&self) -> f64 {
        let rows = (0..self.nl.nrows()).map(|r| (self.nl.row(r).sum() - 1.0).abs());
        rows.chain(std::iter::once((self.al.iter().sum::<f64>() - 1.0).abs())).fold(0.0, f64::max)
    }
}

/// Weights of the piecewise-linear interpolation, by arc length along the
/// window perimeter, between anchor nodes lying on the perimeter.
///
/// Row `k` corresponds to the `k`-th node of [`SubdomainWindow::perimeter`].
pub fn perimeter_interpolation(window: &SubdomainWindow, coords: &[f64], anchors: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let per = window.perimeter();
    let dist = |a: (usize, usize), b: (usize, usize)| (coords[a.0] - coords[b.0]).abs() + (coords[a.1] - coords[b.1]).abs();
    let mut s = vec![0.0; per.len()];
    for k in 1..per.len() {
        s[k] = s[k - 1] + dist(per[k - 1], per[k]);
    }
    let total = s[per.len() - 1] + dist(per[per.len() - 1], per[0]);

    if anchors.len() < 2 {
        return Err(Error::InvalidConfiguration(format!("{} boundary anchors, need at least 2", anchors.len())));
    }
    let mut pos = Vec::with_capacity(anchors.len());
    for (m, a) in anchors.iter().enumerate() {
        let k = per.iter().position(|p| p == a).ok_or_else(|| {
            Error::InvalidConfiguration(format!("reference node {a:?} is not on the boundary of window {window:?}"))
        })?;
        pos.push((s[k], m));
    }
    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pos.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidConfiguration("repeated boundary anchor".into()));
    }

    let mut w = DMatrix::zeros(per.len(), anchors.len());
    for (k, &sk) in s.iter().enumerate() {
        let t = pos.iter().rposition(|p| p.0 <= sk).unwrap_or(pos.len() - 1);
        let (p0, m0) = pos[t];
        let (p1, m1) = pos[(t + 1) % pos.len()];
        let mut span = p1 - p0;
        if span <= 0.0 {
            span += total;
        }
        let mut off = sk - p0;
        if off < 0.0 {
            off += total;
        }
        let f = off / span;
        w[(k, m0)] += 1.0 - f;
        w[(k, m1)] += f;
    }
    Ok(w)
}

/// Solves the window once per unit boundary value at `anchors`; column `m` is
/// the local field for anchor `m`.
fn unit_responses(stencil: &StencilField, coords: &[f64], window: SubdomainWindow, anchors: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let interp = perimeter_interpolation(&window, coords, anchors)?;
    let solver = LocalSolver::new(stencil, window)?;
    let per = window.perimeter();
    let mut out = DMatrix::zeros(window.node_count(), anchors.len());
    let mut values = vec![0.0; window.node_count()];
    for m in 0..anchors.len() {
        values.iter_mut().for_each(|v| *v = 0.0);
        for (k, &(i, j)) in per.iter().enumerate() {
            values[window.local_index(i, j)] = interp[(k, m)];
        }
        solver.solve_in_place(&mut values);
        out.column_mut(m).copy_from_slice(&values);
    }
    Ok(out)
}

/// Local analysis on a window whose boundary carries the reference points.
pub fn local_basis_plain(
    stencil: &StencilField,
    coords: &[f64],
    window: SubdomainWindow,
    center: (usize, usize),
    refs: &[(usize, usize)],
) -> Result<LocalBasis> {
    check_center(&window, center)?;
    let nl = unit_responses(stencil, coords, window, refs)?;
    let al = nl.row(window.local_index(center.0, center.1)).iter().copied().collect();
    Ok(LocalBasis { nl, al, d_cond: None, pinv_fallback: false, plain_fallback: false })
}

/// Local analysis on an enlarged window: unit responses to `boundary_points`
/// are re-expressed in terms of the reference values through the inverse of
/// their values at the reference nodes.
pub fn local_basis_oversampled(
    stencil: &StencilField,
    coords: &[f64],
    window: SubdomainWindow,
    center: (usize, usize),
    refs: &[(usize, usize)],
    boundary_points: &[(usize, usize)],
    allow_pinv: bool,
) -> Result<LocalBasis> {
    check_center(&window, center)?;
    if boundary_points.len() != refs.len() {
        return Err(Error::InvalidConfiguration(format!(
            "{} oversampling boundary points for {} reference points",
            boundary_points.len(),
            refs.len()
        )));
    }
    if let Some(r) = refs.iter().find(|r| !window.contains(r.0, r.1)) {
        return Err(Error::InvalidConfiguration(format!("reference node {r:?} outside window {window:?}")));
    }
    let nplus = unit_responses(stencil, coords, window, boundary_points)?;
    let n = refs.len();
    let d = DMatrix::from_fn(n, n, |a, b| nplus[(window.local_index(refs[a].0, refs[a].1), b)]);
    let (dinv, d_cond, pinv_fallback) = match solve_dense_small(&d, &DMatrix::identity(n, n)) {
        Ok(sol) => (sol.x, sol.cond, false),
        Err(Error::IllConditioned { cond }) => {
            if !allow_pinv {
                return Err(Error::OversamplingSingular { cond });
            }
            let pinv = d.clone().pseudo_inverse(f64::EPSILON * n as f64).map_err(|_| Error::OversamplingSingular { cond })?;
            (pinv, cond, true)
        }
        Err(e) => return Err(e),
    };
    let nl = nplus * dinv;
    let al = nl.row(window.local_index(center.0, center.1)).iter().copied().collect();
    Ok(LocalBasis { nl, al, d_cond: Some(d_cond), pinv_fallback, plain_fallback: false })
}

fn check_center(window: &SubdomainWindow, center: (usize, usize)) -> Result<()> {
    if !window.contains(center.0, center.1) || window.on_boundary(center.0, center.1) {
        return Err(Error::InvalidConfiguration(format!("center {center:?} is not inside window {window:?}")));
    }
    Ok(())
}

/// A local basis attached to one center coarse point.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    pub center: usize,
    pub refs: Vec<usize>,
    pub window: SubdomainWindow,
    pub basis: Arc<LocalBasis>,
}

impl LocalOperator {
    pub fn al(&self) -> &[f64] {
        &self.basis.al
    }

    pub fn nl(&self) -> &DMatrix<f64> {
        &self.basis.nl
    }

    /// Interpolated temperature at global node `(i, j)` from reference values.
    pub fn value_at(&self, i: usize, j: usize, ref_values: &[f64]) -> f64 {
        let row = self.window.local_index(i, j);
        ref_values.iter().enumerate().map(|(m, v)| self.basis.nl[(row, m)] * v).sum()
    }
}
