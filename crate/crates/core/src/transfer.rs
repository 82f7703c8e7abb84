//! Exact Ulam discretization of the fiberwise transfer operators and their
//! twisted versions.
//!
//! For a piecewise-linear map the entries `m(A_i ∩ T^{-1} A_j) / m(A_i)` are
//! exact interval intersections, so every matrix is row-stochastic to
//! round-off, preserves mass and positivity, and represents the invariant
//! density of constant-slope full-branch maps with no discretization error.
//! Operators act on densities (`d' = P^T d` on the uniform grid, where mass
//! and density vectors are proportional) and on functionals via `P`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bv::{exp_twist, GridFunction};
use crate::error::Error;
use crate::rds::{DrivingSystem, MapFamily, PiecewiseLinearMap};
use crate::spectral::Observable;
use crate::stats::kahan_sum;
use crate::Result;

/// Row-stochastic Ulam matrix of one map, stored both row-major (for the
/// adjoint action) and column-major (for the density push-forward).
#[derive(Debug, Clone)]
pub struct UlamMatrix {
    n_cells: usize,
    // Row-major: P[i][j] for the adjoint/functional action.
    row_ptr: Vec<u32>,
    row_cols: Vec<u32>,
    row_w: Vec<f64>,
    // Column-major (transpose): entries feeding output cell j.
    col_ptr: Vec<u32>,
    col_rows: Vec<u32>,
    col_w: Vec<f64>,
}

impl UlamMatrix {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Row sums; 1 to round-off by construction.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_cells)
            .map(|i| {
                let (a, b) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
                kahan_sum(self.row_w[a..b].iter().copied())
            })
            .collect()
    }

    /// Triplets `(row, col, weight)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cells).flat_map(move |i| {
            let (a, b) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
            (a..b).map(move |k| (i, self.row_cols[k] as usize, self.row_w[k]))
        })
    }

    /// Density push-forward on raw slices: `dst[j] = sum_i src[i] P[i][j]`.
    pub fn apply_density_slice(&self, src: &[Complex64], dst: &mut [Complex64]) {
        debug_assert_eq!(src.len(), self.n_cells);
        debug_assert_eq!(dst.len(), self.n_cells);
        for j in 0..self.n_cells {
            let (a, b) = (self.col_ptr[j] as usize, self.col_ptr[j + 1] as usize);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in a..b {
                acc += src[self.col_rows[k] as usize] * self.col_w[k];
            }
            dst[j] = acc;
        }
    }

    /// Functional action on raw slices: `dst[i] = sum_j P[i][j] src[j]`.
    pub fn apply_row_slice(&self, src: &[Complex64], dst: &mut [Complex64]) {
        debug_assert_eq!(src.len(), self.n_cells);
        debug_assert_eq!(dst.len(), self.n_cells);
        for i in 0..self.n_cells {
            let (a, b) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in a..b {
                acc += src[self.row_cols[k] as usize] * self.row_w[k];
            }
            dst[i] = acc;
        }
    }
}

/// Build the Ulam matrix of `map` at resolution `n_cells` by exact interval
/// intersection of each branch's affine image of `A_i` with each `A_j`.
pub fn build_ulam(map: &PiecewiseLinearMap, n_cells: usize) -> Result<UlamMatrix> {
    if n_cells < 2 || !n_cells.is_power_of_two() {
        return Err(Error::BadInput("n_cells must be a power of two >= 2"));
    }
    let n = n_cells;
    let nf = n as f64;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];

    for (i, row) in rows.iter_mut().enumerate() {
        let cell_lo = i as f64 / nf;
        let cell_hi = (i + 1) as f64 / nf;
        for b in map.branches() {
            let lo = cell_lo.max(b.lo);
            let hi = cell_hi.min(b.hi);
            if hi <= lo {
                continue;
            }
            let (y0, y1) = if b.slope > 0.0 {
                (b.apply(lo), b.apply(hi))
            } else {
                (b.apply(hi), b.apply(lo))
            };
            let y0 = y0.max(0.0);
            let y1 = y1.min(1.0);
            if y1 <= y0 {
                continue;
            }
            let j_lo = (y0 * nf) as usize;
            let j_hi = ((y1 * nf).ceil() as usize).min(n);
            for j in j_lo..j_hi {
                let a_lo = (j as f64 / nf).max(y0);
                let a_hi = ((j + 1) as f64 / nf).min(y1);
                if a_hi > a_lo {
                    let w = (a_hi - a_lo) * nf / b.slope.abs();
                    row.push((j as u32, w));
                }
            }
        }
        row.sort_unstable_by_key(|&(j, _)| j);
        // Merge duplicate columns from different branches.
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
        for &(j, w) in row.iter() {
            if let Some(last) = merged.last_mut() {
                if last.0 == j {
                    last.1 += w;
                    continue;
                }
            }
            merged.push((j, w));
        }
        *row = merged;
    }

    // Assemble CSR and its transpose.
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut row_cols = Vec::new();
    let mut row_w = Vec::new();
    row_ptr.push(0u32);
    for row in &rows {
        for &(j, w) in row {
            row_cols.push(j);
            row_w.push(w);
        }
        row_ptr.push(row_cols.len() as u32);
    }
    let mut col_counts = vec![0u32; n + 1];
    for &j in &row_cols {
        col_counts[j as usize + 1] += 1;
    }
    for j in 0..n {
        col_counts[j + 1] += col_counts[j];
    }
    let col_ptr = col_counts.clone();
    let mut fill = col_counts;
    let nnz = row_cols.len();
    let mut col_rows = vec![0u32; nnz];
    let mut col_w = vec![0.0f64; nnz];
    for i in 0..n {
        let (a, b) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
        for k in a..b {
            let j = row_cols[k] as usize;
            let slot = fill[j] as usize;
            col_rows[slot] = i as u32;
            col_w[slot] = row_w[k];
            fill[j] += 1;
        }
    }

    Ok(UlamMatrix { n_cells: n, row_ptr, row_cols, row_w, col_ptr, col_rows, col_w })
}

/// `d' = P^T d`; valid on uniform grids where mass and density vectors are
/// proportional. Preserves the integral to row-stochasticity error.
pub fn apply_density(matrix: &UlamMatrix, d: &GridFunction) -> Result<GridFunction> {
    if matrix.n_cells() != d.n_cells() {
        return Err(Error::GridMismatch { left: matrix.n_cells(), right: d.n_cells() });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); d.n_cells()];
    matrix.apply_density_slice(d.values(), &mut out);
    GridFunction::new(out)
}

/// A fiber transfer operator twisted by `exp(theta * g)` sampled at cell
/// midpoints.
#[derive(Debug, Clone)]
pub struct TwistedOperator {
    pub base: UlamMatrix,
    pub twist_diag: GridFunction,
    pub theta: Complex64,
}

impl TwistedOperator {
    /// Twist `base` by the observable values `g` (a real grid function).
    pub fn new(base: UlamMatrix, g: &GridFunction, theta: Complex64) -> Result<Self> {
        if base.n_cells() != g.n_cells() {
            return Err(Error::GridMismatch { left: base.n_cells(), right: g.n_cells() });
        }
        let twist_diag = exp_twist(g, theta);
        Ok(TwistedOperator { base, twist_diag, theta })
    }
}

/// `L^theta d = L(e^{theta g} d)`.
pub fn apply_twisted(op: &TwistedOperator, d: &GridFunction) -> Result<GridFunction> {
    if op.base.n_cells() != d.n_cells() {
        return Err(Error::GridMismatch { left: op.base.n_cells(), right: d.n_cells() });
    }
    let mut tmp = Vec::with_capacity(d.n_cells());
    for (v, e) in d.values().iter().zip(op.twist_diag.values()) {
        tmp.push(v * e);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); d.n_cells()];
    op.base.apply_density_slice(&tmp, &mut out);
    GridFunction::new(out)
}

/// Adjoint action on functionals in cell representation
/// (`phi(f) = (1/N) sum phi[i] f[i]`): returns `twist ⊙ (P phi)` so that
/// `<apply_adjoint(phi), f> = <phi, apply_twisted(f)>`.
pub fn apply_adjoint(op: &TwistedOperator, phi: &GridFunction) -> Result<GridFunction> {
    if op.base.n_cells() != phi.n_cells() {
        return Err(Error::GridMismatch { left: op.base.n_cells(), right: phi.n_cells() });
    }
    let mut tmp = vec![Complex64::new(0.0, 0.0); phi.n_cells()];
    op.base.apply_row_slice(phi.values(), &mut tmp);
    for (v, e) in tmp.iter_mut().zip(op.twist_diag.values()) {
        *v *= e;
    }
    GridFunction::new(tmp)
}

/// The bilinear pairing `(1/N) sum phi[i] f[i]`.
pub fn pair(phi: &GridFunction, f: &GridFunction) -> Result<Complex64> {
    if phi.n_cells() != f.n_cells() {
        return Err(Error::GridMismatch { left: phi.n_cells(), right: f.n_cells() });
    }
    let n = phi.n_cells() as f64;
    let re = kahan_sum(phi.values().iter().zip(f.values()).map(|(p, v)| (p * v).re));
    let im = kahan_sum(phi.values().iter().zip(f.values()).map(|(p, v)| (p * v).im));
    Ok(Complex64::new(re / n, im / n))
}

/// Apply the length-`n` twisted cocycle starting at fiber time `t0`,
/// without normalization; returns the final function and the integral after
/// each step. At `theta = 0` every integral equals the starting mass.
pub fn cocycle_apply(
    family: &MapFamily,
    driving: &DrivingSystem,
    t0: i64,
    n: usize,
    theta: Complex64,
    observable: &Observable,
    d: &GridFunction,
) -> Result<(GridFunction, Vec<Complex64>)> {
    let n_cells = d.n_cells();
    let mut matrices: Vec<Option<UlamMatrix>> = vec![None; family.len()];
    let mut diags: Vec<Option<Vec<Complex64>>> = vec![None; family.len()];
    let mut cur = d.values().to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut integrals = Vec::with_capacity(n);

    for step in 0..n {
        let t = t0 + step as i64;
        let sym = driving.symbol(t);
        if sym >= family.len() {
            return Err(Error::SymbolOutOfRange { symbol: sym, n_maps: family.len() });
        }
        if matrices[sym].is_none() {
            matrices[sym] = Some(build_ulam(&family.maps()[sym], n_cells)?);
            let g = observable.raw_grid(sym, n_cells)?;
            diags[sym] =
                Some(g.values().iter().map(|v| (theta * v).exp()).collect());
        }
        let m = matrices[sym].as_ref().unwrap();
        let diag = diags[sym].as_ref().unwrap();
        let shift = observable.offset(t, sym)?;
        let factor = (-theta * shift).exp();
        for ((c, e), dst) in cur.iter().zip(diag).zip(next.iter_mut()) {
            *dst = c * e * factor;
        }
        core::mem::swap(&mut cur, &mut next);
        // Push forward in place: next becomes scratch.
        m.apply_density_slice(&cur, &mut next);
        core::mem::swap(&mut cur, &mut next);
        let nf = n_cells as f64;
        let re = kahan_sum(cur.iter().map(|v| v.re)) / nf;
        let im = kahan_sum(cur.iter().map(|v| v.im)) / nf;
        integrals.push(Complex64::new(re, im));
    }
    Ok((GridFunction::new(cur)?, integrals))
}
