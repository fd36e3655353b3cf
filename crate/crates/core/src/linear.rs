//! Sparse system assembly and direct solvers.
//!
//! Systems are accumulated as triplets, finalized (sorted, duplicates summed)
//! and factored with a banded LU with partial pivoting in natural ordering.

use std::borrow::Cow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dense system [`solve_dense_small`] accepts by default.
pub const DENSE_CAP: usize = 64;

/// Condition estimate above which a dense solve is rejected.
pub const DENSE_COND_LIMIT: f64 = 1e12;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    Stencil,
    Dirichlet,
    Reduction,
}

#[derive(Debug, Clone)]
pub struct SparseSystem {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    row_kind: Vec<Option<RowKind>>,
    finalized: bool,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new(), rhs: vec![0.0; n], row_kind: vec![None; n], finalized: true }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
        self.finalized = false;
    }

    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] += value;
    }

    pub fn set_kind(&mut self, row: usize, kind: RowKind) {
        self.row_kind[row] = Some(kind);
    }

    /// Pins unknown `row` to `value`: a single unit entry and the value in the rhs.
    pub fn set_dirichlet(&mut self, row: usize, value: f64) {
        self.add(row, row, 1.0);
        self.rhs[row] = value;
        self.row_kind[row] = Some(RowKind::Dirichlet);
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_kind(&self, row: usize) -> Option<RowKind> {
        self.row_kind[row]
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Sorts entries by (row, col) and sums duplicates.
    pub fn finalize(&mut self) {
        if !self.finalized {
            self.entries = merge_triplets(std::mem::take(&mut self.entries));
            self.finalized = true;
        }
    }

    pub fn entries(&self) -> Cow<'_, [(usize, usize, f64)]> {
        if self.finalized {
            Cow::Borrowed(&self.entries)
        } else {
            Cow::Owned(merge_triplets(self.entries.clone()))
        }
    }

    /// Fails when some row received no equation.
    pub fn check_rows(&self) -> Result<()> {
        match self.row_kind.iter().position(Option::is_none) {
            Some(row) => Err(Error::IncompleteAssembly(format!("unknown {row} has no equation"))),
            None => Ok(()),
        }
    }

    /// Structural lower and upper half-bandwidths.
    pub fn half_bandwidths(&self) -> (usize, usize) {
        self.entries.iter().fold((0, 0), |(kl, ku), &(r, c, _)| {
            if r > c {
                (kl.max(r - c), ku)
            } else {
                (kl, ku.max(c - r))
            }
        })
    }

    /// Largest number of off-diagonal couplings in any row.
    pub fn couplings(&self) -> usize {
        let entries = self.entries();
        let mut per_row = vec![0usize; self.n];
        for &(r, c, v) in entries.iter() {
            if r != c && v != 0.0 {
                per_row[r] += 1;
            }
        }
        per_row.into_iter().max().unwrap_or(0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in self.entries.iter() {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in self.entries.iter() {
            a[(r, c)] += v;
        }
        a
    }
}

fn merge_triplets(mut t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    t.sort_by_key(|&(r, c, _)| (r, c));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

/// Banded LU factorization with partial pivoting.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals absorb fill from row interchanges. Multipliers are kept per
/// pivot column and replayed on the right-hand side during the solve.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            rows: vec![0.0; n * width],
            lower: vec![0.0; n * kl],
            pivots: vec![0; n],
        };
        let mut scale = 0.0f64;
        for &(r, c, v) in entries {
            if c + kl < r || c > r + ku {
                return Err(Error::SolverFailure {
                    row: r,
                    detail: format!("entry ({r}, {c}) outside declared band ({kl}, {ku})"),
                });
            }
            *lu.at_mut(r, c) += v;
            scale = scale.max(v.abs());
        }
        lu.eliminate(scale)?;
        Ok(lu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.rows[self.offset(r, c)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let o = self.offset(r, c);
        &mut self.rows[o]
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let n = self.n;
        let tiny = scale * f64::EPSILON * (n.max(1) as f64);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SolverFailure {
                    row: k,
                    detail: format!("pivot {best:.3e} below threshold {tiny:.3e} (singular matrix)"),
                });
            }
            self.pivots[k] = p;
            let last_col = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = self.offset(k, c);
                    let b = self.offset(p, c);
                    self.rows.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            let k_base = self.offset(k, k);
            for i in k + 1..=last_row {
                let f = self.at(i, k) / pivot;
                self.lower[k * self.kl + (i - k - 1)] = f;
                *self.at_mut(i, k) = 0.0;
                if f == 0.0 {
                    continue;
                }
                let i_base = self.offset(i, k);
                let len = last_col - k;
                for t in 1..=len {
                    self.rows[i_base + t] -= f * self.rows[k_base + t];
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last_row = (k + self.kl).min(n - 1);
                for i in k + 1..=last_row {
                    b[i] -= self.lower[k * self.kl + (i - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let base = self.offset(k, k);
            let mut s = b[k];
            for t in 1..=last_col - k {
                s -= self.rows[base + t] * b[k + t];
            }
            b[k] = s / self.rows[base];
        }
    }
}

/// Direct solve of a finalized (or finalizable) sparse system.
///
/// The returned solution satisfies `|A x - b|_inf <= 1e-10 (1 + |b|_inf)`;
/// one step of iterative refinement is attempted before giving up.
pub fn solve_sparse(sys: &SparseSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let entries = sys.entries();
    let (kl, ku) = entries.iter().fold((0, 0), |(kl, ku), &(r, c, _)| {
        if r > c {
            (kl.max(r - c), ku)
        } else {
            (kl, ku.max(c - r))
        }
    });
    let lu = BandLu::factor(n, kl, ku, &entries)?;
    let b = sys.rhs();
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for &(i, j, v) in entries.iter() {
            r[i] -= v * x[j];
        }
        r
    };
    let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = RESIDUAL_TOL * (1.0 + b_norm);
    let mut r = residual(&x);
    if inf_norm(&r) > tol {
        lu.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        let r2 = residual(&x);
        let res = inf_norm(&r2);
        if res > tol {
            let row = r2.iter().enumerate().fold(0, |best, (i, v)| if v.abs() > r2[best].abs() { i } else { best });
            return Err(Error::SolverFailure { row, detail: format!("residual {res:.3e} exceeds {tol:.3e}") });
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure { row: 0, detail: "non-finite solution".into() });
    }
    Ok(x)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub x: DMatrix<f64>,
    /// 1-norm condition number `|A|_1 |A^-1|_1`.
    pub cond: f64,
}

/// Solves `a X = b` column-wise by Gaussian elimination with partial pivoting.
pub fn solve_dense_small(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DenseSolution> {
    solve_dense_capped(a, b, DENSE_CAP)
}

pub fn solve_dense_capped(a: &DMatrix<f64>, b: &DMatrix<f64>, cap: usize) -> Result<DenseSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidParameter(format!("dense matrix is {}x{}, not square", n, a.ncols())));
    }
    if n > cap {
        return Err(Error::InvalidParameter(format!("dense system of order {n} exceeds cap {cap}")));
    }
    if b.nrows() != n {
        return Err(Error::InvalidParameter(format!("rhs has {} rows, expected {n}", b.nrows())));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if lu[(i, k)].abs() > lu[(p, k)].abs() {
                p = i;
            }
        }
        if lu[(p, k)] == 0.0 {
            singular = true;
            break;
        }
        if p != k {
            lu.swap_rows(k, p);
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
        }
    }
    if singular {
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }
    let solve = |rhs: &DMatrix<f64>| -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n, rhs.ncols());
        for col in 0..rhs.ncols() {
            let mut y: Vec<f64> = perm.iter().map(|&p| rhs[(p, col)]).collect();
            for i in 0..n {
                for j in 0..i {
                    y[i] -= lu[(i, j)] * y[j];
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    y[i] -= lu[(i, j)] * y[j];
                }
                y[i] /= lu[(i, i)];
            }
            for i in 0..n {
                x[(i, col)] = y[i];
            }
        }
        x
    };
    let inv = solve(&DMatrix::identity(n, n));
    let cond = one_norm(a) * one_norm(&inv);
    if !cond.is_finite() || cond > DENSE_COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }
    Ok(DenseSolution { x: solve(b), cond })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_oracle(sys: &SparseSystem) -> Vec<f64> {
        let a = sys.to_dense();
        let b = nalgebra::DVector::from_column_slice(sys.rhs());
        a.lu().solve(&b).expect("oracle solve").iter().copied().collect()
    }

    #[test]
    fn identity_system() {
        let mut s = SparseSystem::new(4);
        for i in 0..4 {
            s.set_dirichlet(i, i as f64 * 1.5 - 2.0);
        }
        s.finalize();
        assert_eq!(solve_sparse(&s).unwrap(), vec![-2.0, -0.5, 1.0, 2.5]);
    }

    #[test]
    fn three_point_laplace() {
        let mut s = SparseSystem::new(3);
        s.set_dirichlet(0, 0.0);
        s.set_dirichlet(2, 1.0);
        s.add(1, 1, 1.0);
        s.add(1, 0, -0.5);
        s.add(1, 2, -0.5);
        s.set_kind(1, RowKind::Stencil);
        s.finalize();
        let x = solve_sparse(&s).unwrap();
        assert_relative_eq!(x[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn duplicates_are_summed() {
        let mut s = SparseSystem::new(2);
        s.add(0, 0, 1.0);
        s.add(1, 1, 2.0);
        s.add(0, 0, 1.0);
        s.add(0, 1, 0.5);
        s.add_rhs(0, 2.5);
        s.add_rhs(1, 2.0);
        s.finalize();
        assert_eq!(s.entries().len(), 3);
        let x = solve_sparse(&s).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let mut s = SparseSystem::new(3);
        s.add(0, 0, 1.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 1.0);
        s.add(2, 2, 1.0);
        match solve_sparse(&s) {
            Err(Error::SolverFailure { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn orphan_rows_detected() {
        let mut s = SparseSystem::new(2);
        s.set_dirichlet(0, 1.0);
        assert!(matches!(s.check_rows(), Err(Error::IncompleteAssembly(_))));
        s.set_dirichlet(1, 1.0);
        assert!(s.check_rows().is_ok());
    }

    #[test]
    fn banded_lu_matches_dense_on_random_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let (kl, ku) = (5, 3);
        let mut s = SparseSystem::new(n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Weak diagonal so that pivoting actually happens.
                let v: f64 = rng.gen_range(-1.0..1.0);
                s.add(i, j, if i == j { 0.1 * v } else { v });
            }
            s.add_rhs(i, rng.gen_range(-1.0..1.0));
            s.set_kind(i, RowKind::Stencil);
        }
        s.finalize();
        let x = solve_sparse(&s).unwrap();
        let oracle = dense_oracle(&s);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let mut s = SparseSystem::new(20);
        for i in 0..20 {
            s.add(i, i, 3.0);
            if i > 0 {
                s.add(i, i - 1, -1.0);
            }
            if i + 2 < 20 {
                s.add(i, i + 2, -1.1);
            }
            s.add_rhs(i, (i as f64).sin());
        }
        s.finalize();
        let a = solve_sparse(&s).unwrap();
        let b = solve_sparse(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_identity_and_diagonal() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let sol = solve_dense_small(&DMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(sol.x, b);
        assert_eq!(sol.cond, 1.0);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let sol = solve_dense_small(&a, &DMatrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert_eq!(sol.x[(0, 0)], 0.5);
        assert_eq!(sol.x[(1, 0)], 0.25);
        assert_eq!(sol.cond, 2.0);
    }

    #[test]
    fn dense_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let a = DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 4.0 } else { 0.0 });
        let b = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let sol = solve_dense_small(&a, &b).unwrap();
        let r = &a * &sol.x - &b;
        assert!(r.amax() <= 1e-12, "residual {}", r.amax());
        assert!(sol.cond < 10.0);
    }

    #[test]
    fn dense_rejects_ill_conditioned_and_oversized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(matches!(solve_dense_small(&a, &DMatrix::identity(2, 2)), Err(Error::IllConditioned { .. })));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve_dense_small(&singular, &DMatrix::identity(2, 2)), Err(Error::IllConditioned { .. })));
        let big = DMatrix::<f64>::identity(65, 65);
        assert!(matches!(solve_dense_small(&big, &DMatrix::zeros(65, 1)), Err(Error::InvalidParameter(_))));
    }
}
