//! Size bookkeeping for the three discretizations.
//!
//! `intervals` is the number of lattice intervals per side (`n_grid - 1` for a
//! vertex grid); `r` and `m` are the coarse-point spacing and the
//! decomposition window side, both in fine-grid intervals.

use crate::error::{invalid, Error, Result};

/// Points of the direct model, `(n_grid - 1)^2`.
pub fn fdm_points(n_grid: usize) -> usize {
    (n_grid - 1) * (n_grid - 1)
}

/// Coarse points per side, `intervals / r + 1`.
pub fn cp_per_side(intervals: usize, r: usize) -> Result<usize> {
    if r == 0 || intervals % r != 0 {
        return Err(invalid(format!(
            "coarse spacing r={r} does not divide {intervals} intervals; admissible r: {:?}",
            divisors(intervals)
        )));
    }
    Ok(intervals / r + 1)
}

/// Total coarse points, the square of [`cp_per_side`].
pub fn cp_total(intervals: usize, r: usize) -> Result<usize> {
    cp_per_side(intervals, r).map(|n| n * n)
}

/// Grid points in an oversampled window of side `4 r`: `(4 r + 1)^2`.
pub fn oversampled_window_points(r: usize) -> usize {
    (4 * r + 1) * (4 * r + 1)
}

/// Outer ring size of a decomposition window, corners excluded: `4 (m - 1)`.
pub fn ddm_outer(m: usize) -> usize {
    4 * (m - 1)
}

/// Inner ring size, corners included: `4 (m - 2)`.
pub fn ddm_inner(m: usize) -> usize {
    4 * (m - 2)
}

/// Points of one decomposition window, `(m + 1)^2`.
pub fn ddm_window_points(m: usize) -> usize {
    (m + 1) * (m + 1)
}

/// Points eliminated per window (inside the inner ring), `(m - 3)^2`.
pub fn ddm_deleted_per_window(m: usize) -> usize {
    (m - 3) * (m - 3)
}

/// Windows tiling the domain, `(intervals / m)^2`.
pub fn ddm_windows(intervals: usize, m: usize) -> Result<usize> {
    if m < 3 {
        return Err(Error::DegenerateDomain(format!("window side m={m} leaves no inner ring (need m >= 3)")));
    }
    if intervals % m != 0 {
        return Err(invalid(format!(
            "window side m={m} does not divide {intervals} intervals; admissible m: {:?}",
            divisors(intervals).into_iter().filter(|&d| d >= 3).collect::<Vec<_>>()
        )));
    }
    Ok((intervals / m) * (intervals / m))
}

/// Unknowns left after elimination: `n_fdm - windows (m - 3)^2`.
pub fn ddm_reduced(n_fdm: usize, windows: usize, m: usize) -> usize {
    n_fdm - windows * ddm_deleted_per_window(m)
}

pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}
