//! Quenched spectral objects of the twisted cocycle.
//!
//! The equivariant density at fiber time `t` is computed by pull-back power
//! iteration: seed the uniform density far in the past, push it forward
//! through the twisted fiber operators, and normalize each step by its
//! integral. The per-step normalizers are the fiber multipliers; the
//! Birkhoff average of their log-moduli is the top Lyapunov exponent
//! `Lambda(theta)`. Normalizers divide by the complex integral, not its
//! modulus, so phases accumulate correctly; `Lambda` uses `log |.|`.
//!
//! Duals are pulled backward through the adjoint action and rescaled so the
//! pairing with the equivariant density is 1. The variance combines a
//! correlation series (quadrature with push-forward, no Monte-Carlo noise)
//! with the second derivative of the measured exponent curve; the two are
//! independent estimates of the same number.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bv::{bv_distance, norms, GridFunction};
use crate::error::Error;
use crate::rds::{DrivingSystem, MapFamily};
use crate::rng::CounterStream;
use crate::stats::{fit_line, kahan_sum};
use crate::transfer::{build_ulam, UlamMatrix};
use crate::Result;

const TAU: f64 = core::f64::consts::TAU;
/// Below this modulus a per-step normalizer counts as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;
/// Horizon cap for the doubling pull-back iteration.
pub const MAX_HORIZON: u32 = 1 << 14;

/// How an observable assigns a value to `(fiber time, point)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    /// `cos(2 pi k x)`, the same on every fiber.
    Cosine { k: u32 },
    /// `1_[threshold, 1) - offset`, the same on every fiber.
    Indicator { threshold: f64, offset: f64 },
    /// One step function per map symbol.
    Table { per_symbol: Vec<GridFunction> },
}

/// Fiberwise centering state of an observable.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    None,
    /// Offsets indexed by map symbol; valid when the invariant density is
    /// the same on every fiber (all maps preserve Lebesgue).
    PerSymbol(Vec<f64>),
    /// Offsets per fiber time on a window starting at `t0`.
    Window { t0: i64, offsets: Vec<f64> },
}

/// An observable with its sup bound, centering offsets, and optional
/// lattice shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    kind: ObservableKind,
    centering: Centering,
    m_raw: f64,
    /// Per-symbol lattice shifts when the observable has the form
    /// `eta_symbol + integer-valued part` (set by lattice detection).
    pub eta: Option<Vec<f64>>,
}

impl Observable {
    pub fn new(kind: ObservableKind) -> Result<Self> {
        let m_raw = match &kind {
            ObservableKind::Cosine { .. } => 1.0,
            ObservableKind::Indicator { offset, .. } => {
                let hi: f64 = (1.0 - offset).abs();
                hi.max(offset.abs())
            }
            ObservableKind::Table { per_symbol } => {
                if per_symbol.is_empty() {
                    return Err(Error::BadInput("table observable needs at least one symbol"));
                }
                let n = per_symbol[0].n_cells();
                if per_symbol.iter().any(|g| g.n_cells() != n) {
                    return Err(Error::BadInput("table observable grids must share a resolution"));
                }
                if per_symbol
                    .iter()
                    .any(|g| g.values().iter().any(|v| v.im != 0.0))
                {
                    return Err(Error::BadInput("observables are real-valued"));
                }
                per_symbol.iter().map(|g| norms(g).sup).fold(0.0, f64::max)
            }
        };
        Ok(Observable { kind, centering: Centering::None, m_raw, eta: None })
    }

    pub fn cosine(k: u32) -> Self {
        Observable::new(ObservableKind::Cosine { k }).expect("cosine observable is valid")
    }

    pub fn indicator(threshold: f64, offset: f64) -> Self {
        Observable::new(ObservableKind::Indicator { threshold, offset })
            .expect("indicator observable is valid")
    }

    pub fn kind(&self) -> &ObservableKind {
        &self.kind
    }

    pub fn centering(&self) -> &Centering {
        &self.centering
    }

    pub fn is_centered(&self) -> bool {
        !matches!(self.centering, Centering::None)
    }

    /// Sup bound on `|g|` including the centering shift.
    pub fn m_bound(&self) -> f64 {
        let shift = match &self.centering {
            Centering::None => 0.0,
            Centering::PerSymbol(o) => o.iter().map(|x| x.abs()).fold(0.0, f64::max),
            Centering::Window { offsets, .. } => {
                offsets.iter().map(|x| x.abs()).fold(0.0, f64::max)
            }
        };
        self.m_raw + shift
    }

    /// Uncentered value at a point of the fiber with the given symbol.
    #[inline]
    pub fn raw_point(&self, symbol: usize, x: f64) -> f64 {
        match &self.kind {
            ObservableKind::Cosine { k } => (TAU * *k as f64 * x).cos(),
            ObservableKind::Indicator { threshold, offset } => {
                (if x >= *threshold { 1.0 } else { 0.0 }) - offset
            }
            ObservableKind::Table { per_symbol } => {
                per_symbol[symbol.min(per_symbol.len() - 1)].at(x).re
            }
        }
    }

    /// Uncentered values at the midpoints of an `n_cells` grid.
    pub fn raw_grid(&self, symbol: usize, n_cells: usize) -> Result<GridFunction> {
        match &self.kind {
            ObservableKind::Cosine { .. } | ObservableKind::Indicator { .. } => {
                GridFunction::from_midpoints(n_cells, |x| self.raw_point(symbol, x))
            }
            ObservableKind::Table { per_symbol } => {
                let g = per_symbol
                    .get(symbol)
                    .ok_or(Error::SymbolOutOfRange { symbol, n_maps: per_symbol.len() })?;
                let n = g.n_cells();
                if n == n_cells {
                    Ok(g.clone())
                } else if n < n_cells && n_cells % n == 0 {
                    g.refine(n_cells / n)
                } else {
                    Err(Error::BadInput("table observable finer than the requested grid"))
                }
            }
        }
    }

    /// Centering offset at fiber time `t` carrying symbol `symbol`.
    pub fn offset(&self, t: i64, symbol: usize) -> Result<f64> {
        match &self.centering {
            Centering::None => Ok(0.0),
            Centering::PerSymbol(offsets) => offsets
                .get(symbol)
                .copied()
                .ok_or(Error::SymbolOutOfRange { symbol, n_maps: offsets.len() }),
            Centering::Window { t0, offsets } => {
                let idx = t - t0;
                if idx < 0 || idx as usize >= offsets.len() {
                    Err(Error::CenteringWindow { t })
                } else {
                    Ok(offsets[idx as usize])
                }
            }
        }
    }

    /// Centered value at `(t, x)`.
    pub fn eval(&self, t: i64, symbol: usize, x: f64) -> Result<f64> {
        Ok(self.raw_point(symbol, x) - self.offset(t, symbol)?)
    }

    /// Centering offsets for the times `t0 .. t0 + n`, resolved per fiber.
    pub fn offsets_for(&self, driving: &DrivingSystem, t0: i64, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|i| self.offset(t0 + i as i64, driving.symbol(t0 + i as i64))).collect()
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }
}

/// Cached per-symbol operators for one twist; the stepping engine behind
/// every spectral computation.
pub(crate) struct Engine {
    pub n_cells: usize,
    pub theta: Complex64,
    driving: DrivingSystem,
    n_maps: usize,
    matrices: Vec<UlamMatrix>,
    /// `exp(theta * g_raw)` at midpoints, per symbol; empty when theta = 0.
    diags: Vec<Vec<Complex64>>,
    /// Raw observable values at midpoints, per symbol.
    pub g_grids: Vec<Vec<f64>>,
    observable: Observable,
    theta_zero: bool,
}

impl Engine {
    pub fn new(
        family: &MapFamily,
        driving: &DrivingSystem,
        theta: Complex64,
        observable: &Observable,
        n_cells: usize,
    ) -> Result<Self> {
        let mut matrices = Vec::with_capacity(family.len());
        let mut diags = Vec::with_capacity(family.len());
        let mut g_grids = Vec::with_capacity(family.len());
        let theta_zero = theta == Complex64::new(0.0, 0.0);
        for (s, map) in family.maps().iter().enumerate() {
            matrices.push(build_ulam(map, n_cells)?);
            let g = observable.raw_grid(s, n_cells)?;
            g_grids.push(g.values().iter().map(|v| v.re).collect());
            if theta_zero {
                diags.push(Vec::new());
            } else {
                diags.push(g.values().iter().map(|v| (theta * v).exp()).collect());
            }
        }
        Ok(Engine {
            n_cells,
            theta,
            driving: driving.clone(),
            n_maps: family.len(),
            matrices,
            diags,
            g_grids,
            observable: observable.clone(),
            theta_zero,
        })
    }

    #[inline]
    fn symbol(&self, t: i64) -> Result<usize> {
        let s = self.driving.symbol(t);
        if s >= self.n_maps {
            return Err(Error::SymbolOutOfRange { symbol: s, n_maps: self.n_maps });
        }
        Ok(s)
    }

    fn mean(&self, v: &[Complex64]) -> Complex64 {
        let n = self.n_cells as f64;
        Complex64::new(
            kahan_sum(v.iter().map(|z| z.re)) / n,
            kahan_sum(v.iter().map(|z| z.im)) / n,
        )
    }

    /// Apply the twisted operator of fiber `t` without normalization;
    /// returns the integral of the result.
    pub fn step_raw(
        &self,
        t: i64,
        cur: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
    ) -> Result<Complex64> {
        let s = self.symbol(t)?;
        if self.theta_zero {
            self.matrices[s].apply_density_slice(cur, scratch);
        } else {
            let shift = self.observable.offset(t, s)?;
            let factor = (-self.theta * shift).exp();
            let diag = &self.diags[s];
            for ((c, e), dst) in cur.iter().zip(diag).zip(scratch.iter_mut()) {
                *dst = c * e * factor;
            }
            core::mem::swap(cur, scratch);
            self.matrices[s].apply_density_slice(cur, scratch);
        }
        core::mem::swap(cur, scratch);
        Ok(self.mean(cur))
    }

    /// Apply and normalize by the complex integral; returns the normalizer.
    pub fn step_normalized(
        &self,
        t: i64,
        cur: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
    ) -> Result<Complex64> {
        let lambda = self.step_raw(t, cur, scratch)?;
        if lambda.norm() < COLLAPSE_THRESHOLD {
            return Err(Error::NormalizerCollapse { t, modulus: lambda.norm() });
        }
        let inv = Complex64::new(1.0, 0.0) / lambda;
        for v in cur.iter_mut() {
            *v *= inv;
        }
        Ok(lambda)
    }

    /// Adjoint action of fiber `t`: maps a functional at time `t + 1` to one
    /// at time `t`, without normalization.
    pub fn step_adjoint(
        &self,
        t: i64,
        cur: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
    ) -> Result<()> {
        let s = self.symbol(t)?;
        self.matrices[s].apply_row_slice(cur, scratch);
        core::mem::swap(cur, scratch);
        if !self.theta_zero {
            let shift = self.observable.offset(t, s)?;
            let factor = (-self.theta * shift).exp();
            for (v, e) in cur.iter_mut().zip(&self.diags[s]) {
                *v *= e * factor;
            }
        }
        Ok(())
    }

    /// `integral of exp(theta g_t) v dm` by grid quadrature — the fiber
    /// multiplier of `v` at time `t`.
    pub fn lambda_at(&self, t: i64, v: &[Complex64]) -> Result<Complex64> {
        let s = self.symbol(t)?;
        if self.theta_zero {
            return Ok(self.mean(v));
        }
        let shift = self.observable.offset(t, s)?;
        let factor = (-self.theta * shift).exp();
        let diag = &self.diags[s];
        let n = self.n_cells as f64;
        let re = kahan_sum(v.iter().zip(diag).map(|(z, e)| (z * e).re)) / n;
        let im = kahan_sum(v.iter().zip(diag).map(|(z, e)| (z * e).im)) / n;
        Ok(Complex64::new(re, im) * factor)
    }

    /// Pull the uniform density forward from `t - horizon` to `t` with
    /// per-step normalization.
    pub fn pull_back(&self, t: i64, horizon: u32) -> Result<Vec<Complex64>> {
        let mut cur = vec![Complex64::new(1.0, 0.0); self.n_cells];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.n_cells];
        for s in (t - horizon as i64)..t {
            self.step_normalized(s, &mut cur, &mut scratch)?;
        }
        Ok(cur)
    }
}

/// Per-fiber spectral data: equivariant density, normalizer, optional dual.
#[derive(Debug, Clone)]
pub struct FiberSpectralData {
    pub t: i64,
    pub theta: Complex64,
    pub v: GridFunction,
    pub lambda: Complex64,
    pub phi: Option<GridFunction>,
    pub burn_in_used: u32,
    pub residual: f64,
}

/// Equivariant density `v^theta_t` by pull-back iteration: the horizon
/// doubles until two successive horizons agree to `tol` in the discrete BV
/// norm. The recorded `lambda` satisfies
/// `lambda = integral of exp(theta g_t) v dm`.
pub fn equivariant_density(
    family: &MapFamily,
    driving: &DrivingSystem,
    t: i64,
    theta: Complex64,
    observable: &Observable,
    n_cells: usize,
    tol: f64,
) -> Result<FiberSpectralData> {
    let engine = Engine::new(family, driving, theta, observable, n_cells)?;
    let mut horizon = 32u32;
    let mut prev = GridFunction::new(engine.pull_back(t, horizon)?)?;
    loop {
        horizon *= 2;
        let next = GridFunction::new(engine.pull_back(t, horizon)?)?;
        let dist = bv_distance(&prev, &next)?;
        if dist <= tol {
            let lambda = engine.lambda_at(t, next.values())?;
            return Ok(FiberSpectralData {
                t,
                theta,
                v: next,
                lambda,
                phi: None,
                burn_in_used: horizon,
                residual: dist,
            });
        }
        if horizon >= MAX_HORIZON {
            return Err(Error::NoConvergence { horizon, residual: dist, tol });
        }
        prev = next;
    }
}

/// Dual functional `phi^theta_t`: seed the Lebesgue functional in the
/// future, pull it backward through the adjoints with per-step
/// normalization, and rescale so the pairing with `v^theta_t` is 1.
pub fn dual_functional(
    family: &MapFamily,
    driving: &DrivingSystem,
    t: i64,
    theta: Complex64,
    observable: &Observable,
    n_fwd: u32,
    n_cells: usize,
    tol: f64,
) -> Result<GridFunction> {
    let data = equivariant_density(family, driving, t, theta, observable, n_cells, tol)?;
    let engine = Engine::new(family, driving, theta, observable, n_cells)?;
    let run = |horizon: u32| -> Result<GridFunction> {
        let mut cur = vec![Complex64::new(1.0, 0.0); n_cells];
        let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
        for s in (t..t + horizon as i64).rev() {
            engine.step_adjoint(s, &mut cur, &mut scratch)?;
            let scale = kahan_sum(cur.iter().map(|z| z.norm())) / n_cells as f64;
            if scale < COLLAPSE_THRESHOLD {
                return Err(Error::NormalizerCollapse { t: s, modulus: scale });
            }
            let inv = 1.0 / scale;
            for v in cur.iter_mut() {
                *v *= inv;
            }
        }
        // Align phase and scale through the pairing with v.
        let phi = GridFunction::new(cur)?;
        let p = crate::transfer::pair(&phi, &data.v)?;
        if p.norm() < COLLAPSE_THRESHOLD {
            return Err(Error::DegenerateInput("dual pairing with v collapsed"));
        }
        Ok(crate::bv::scale(&phi, Complex64::new(1.0, 0.0) / p))
    };

    let mut horizon = n_fwd.max(32);
    let mut prev = run(horizon)?;
    loop {
        horizon *= 2;
        let next = run(horizon)?;
        let dist = bv_distance(&prev, &next)?;
        if dist <= tol {
            return Ok(next);
        }
        if horizon >= MAX_HORIZON {
            return Err(Error::NoConvergence { horizon, residual: dist, tol });
        }
        prev = next;
    }
}

/// Center `raw` fiberwise: subtract `integral of g_t v^0_t dm` at every
/// fiber of the window. Families in which every map preserves Lebesgue
/// measure center per symbol (the invariant density is 1 on every fiber);
/// otherwise offsets are stored per fiber time over `window = (lo, hi)`.
pub fn center_observable(
    raw: &Observable,
    family: &MapFamily,
    driving: &DrivingSystem,
    window: (i64, i64),
    n_cells: usize,
    tol: f64,
) -> Result<Observable> {
    if family.preserves_lebesgue() {
        let offsets = (0..family.len())
            .map(|s| raw.raw_grid(s, n_cells).map(|g| g.mean().re))
            .collect::<Result<Vec<f64>>>()?;
        return Ok(raw.clone().with_centering(Centering::PerSymbol(offsets)));
    }
    let (lo, hi) = window;
    if hi <= lo {
        return Err(Error::BadInput("centering window is empty"));
    }
    let data = equivariant_density(
        family,
        driving,
        lo,
        Complex64::new(0.0, 0.0),
        raw,
        n_cells,
        tol,
    )?;
    let engine = Engine::new(family, driving, Complex64::new(0.0, 0.0), raw, n_cells)?;
    let mut v = data.v.into_values();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut offsets = Vec::with_capacity((hi - lo) as usize);
    for t in lo..hi {
        let s = driving.symbol(t);
        if s >= family.len() {
            return Err(Error::SymbolOutOfRange { symbol: s, n_maps: family.len() });
        }
        let g = &engine.g_grids[s];
        let dot = kahan_sum(v.iter().zip(g).map(|(z, gv)| z.re * gv)) / n_cells as f64;
        offsets.push(dot);
        engine.step_normalized(t, &mut v, &mut scratch)?;
    }
    Ok(raw.clone().with_centering(Centering::Window { t0: lo, offsets }))
}

/// Top Lyapunov exponent at one twist: a single pull-back pass from
/// `-(n_burn + n_orbit)` to 0, averaging `log |lambda_hat|` over the last
/// `n_orbit` steps.
pub fn lyapunov_exponent(
    family: &MapFamily,
    driving: &DrivingSystem,
    theta: Complex64,
    observable: &Observable,
    n_orbit: u32,
    n_burn: u32,
    n_cells: usize,
) -> Result<f64> {
    let engine = Engine::new(family, driving, theta, observable, n_cells)?;
    let start = -((n_burn + n_orbit) as i64);
    let mut cur = vec![Complex64::new(1.0, 0.0); n_cells];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
    for t in start..(start + n_burn as i64) {
        engine.step_normalized(t, &mut cur, &mut scratch)?;
    }
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    for t in (start + n_burn as i64)..0 {
        let lambda = engine.step_normalized(t, &mut cur, &mut scratch)?;
        let x = lambda.norm().ln();
        let t1 = acc + x;
        if acc.abs() >= x.abs() {
            comp += (acc - t1) + x;
        } else {
            comp += (x - t1) + acc;
        }
        acc = t1;
    }
    Ok((acc + comp) / n_orbit as f64)
}

/// Axis of a [`LambdaCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Real,
    Imaginary,
}

/// Sampled exponent curve with finite-difference derivatives at 0.
#[derive(Debug, Clone)]
pub struct LambdaCurve {
    pub axis: Axis,
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub n_orbit: u32,
    pub n_burn: u32,
    pub n_cells: usize,
    pub d1_at_0: f64,
    pub d2_at_0: f64,
    /// Indices of interior grid points where the discrete second difference
    /// is below `-1e-8` (real axis only).
    pub convexity_violations: Vec<usize>,
}

/// Resolution and orbit-length knobs shared by curve evaluations.
#[derive(Debug, Clone, Copy)]
pub struct CurveParams {
    pub n_orbit: u32,
    pub n_burn: u32,
    pub n_cells: usize,
    pub fd_step: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams { n_orbit: 20_000, n_burn: 512, n_cells: 4096, fd_step: 1e-2 }
    }
}

fn on_axis(axis: Axis, x: f64) -> Complex64 {
    match axis {
        Axis::Real => Complex64::new(x, 0.0),
        Axis::Imaginary => Complex64::new(0.0, x),
    }
}

/// Central differences at 0 with one Richardson step on `h, h/2`. All five
/// evaluations share the driving realization, so orbit noise cancels in the
/// differences.
fn derivatives_at_zero(
    family: &MapFamily,
    driving: &DrivingSystem,
    observable: &Observable,
    axis: Axis,
    params: &CurveParams,
) -> Result<(f64, f64)> {
    let h = params.fd_step;
    let eval = |x: f64| {
        lyapunov_exponent(
            family,
            driving,
            on_axis(axis, x),
            observable,
            params.n_orbit,
            params.n_burn,
            params.n_cells,
        )
    };
    let (fp, fm) = (eval(h)?, eval(-h)?);
    let (fp2, fm2) = (eval(h / 2.0)?, eval(-h / 2.0)?);
    let f0 = eval(0.0)?;
    let d1_h = (fp - fm) / (2.0 * h);
    let d1_h2 = (fp2 - fm2) / h;
    let d1 = (4.0 * d1_h2 - d1_h) / 3.0;
    let d2_h = (fp - 2.0 * f0 + fm) / (h * h);
    let d2_h2 = (fp2 - 2.0 * f0 + fm2) / (h * h / 4.0);
    let d2 = (4.0 * d2_h2 - d2_h) / 3.0;
    Ok((d1, d2))
}

/// Evaluate `Lambda` on a symmetric grid containing 0 (shared driving
/// realization across points) and attach Richardson derivatives at 0.
pub fn lambda_curve(
    family: &MapFamily,
    driving: &DrivingSystem,
    observable: &Observable,
    axis: Axis,
    theta_grid: &[f64],
    params: &CurveParams,
) -> Result<LambdaCurve> {
    if theta_grid.is_empty() {
        return Err(Error::BadInput("theta grid is empty"));
    }
    if theta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadInput("theta grid must be strictly increasing"));
    }
    if !theta_grid.iter().any(|&x| x == 0.0) {
        return Err(Error::BadInput("theta grid must contain 0"));
    }
    for &x in theta_grid {
        if !theta_grid.iter().any(|&y| (y + x).abs() <= 1e-12) {
            return Err(Error::BadInput("theta grid must be symmetric about 0"));
        }
    }
    let mut values = Vec::with_capacity(theta_grid.len());
    for &x in theta_grid {
        values.push(lyapunov_exponent(
            family,
            driving,
            on_axis(axis, x),
            observable,
            params.n_orbit,
            params.n_burn,
            params.n_cells,
        )?);
    }
    let (d1, d2) = derivatives_at_zero(family, driving, observable, axis, params)?;
    let mut convexity_violations = Vec::new();
    if axis == Axis::Real {
        for i in 1..values.len().saturating_sub(1) {
            if values[i - 1] + values[i + 1] - 2.0 * values[i] < -1e-8 {
                convexity_violations.push(i);
            }
        }
    }
    Ok(LambdaCurve {
        axis,
        thetas: theta_grid.to_vec(),
        values,
        n_orbit: params.n_orbit,
        n_burn: params.n_burn,
        n_cells: params.n_cells,
        d1_at_0: d1,
        d2_at_0: d2,
        convexity_violations,
    })
}

/// The two variance estimates and the correlation series behind the first.
#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub sigma2_series: f64,
    pub sigma2_curve: f64,
    /// `terms[0]` is the time-average of `integral g_t^2 dmu_t`; `terms[j]`
    /// the lag-`j` correlation term.
    pub terms: Vec<f64>,
    pub decay_rate: f64,
    pub truncation_j: usize,
    /// Set when the series estimate is below 1e-6 (coboundary suspicion).
    pub degenerate: bool,
}

/// Correlation-series variance with a curve-based cross check.
///
/// `term_j` is the time average over `n_orbit` fibers of
/// `integral g_t (g_{t+j} o T^{(j)}) dmu_t`, computed by pushing
/// `g_t v^0_t` forward `j` steps (duality form, quadrature only);
/// `sigma2_curve` is the Richardson second derivative of `Lambda` at 0.
pub fn variance(
    family: &MapFamily,
    driving: &DrivingSystem,
    observable: &Observable,
    j_max: usize,
    n_orbit: u32,
    n_cells: usize,
) -> Result<VarianceEstimate> {
    if !observable.is_centered() {
        return Err(Error::BadInput("variance needs a centered observable"));
    }
    let engine = Engine::new(family, driving, Complex64::new(0.0, 0.0), observable, n_cells)?;
    let t0 = 0i64;
    let v0 = equivariant_density(
        family,
        driving,
        t0,
        Complex64::new(0.0, 0.0),
        observable,
        n_cells,
        1e-10,
    )?;
    let nf = n_cells as f64;
    let mut v = v0.v.into_values();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut w = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut term_acc = vec![0.0f64; j_max + 1];

    // Centered observable values per fiber (offset folded in).
    let g_at = |t: i64| -> Result<(usize, f64)> {
        let s = driving.symbol(t);
        if s >= family.len() {
            return Err(Error::SymbolOutOfRange { symbol: s, n_maps: family.len() });
        }
        Ok((s, observable.offset(t, s)?))
    };

    for step in 0..n_orbit as i64 {
        let t = t0 + step;
        let (s, off) = g_at(t)?;
        let g = &engine.g_grids[s];
        term_acc[0] += kahan_sum(
            v.iter().zip(g).map(|(z, gv)| {
                let gc = gv - off;
                gc * gc * z.re
            }),
        ) / nf;
        for ((z, gv), dst) in v.iter().zip(g).zip(w.iter_mut()) {
            *dst = Complex64::new((gv - off) * z.re, 0.0);
        }
        for j in 1..=j_max {
            engine.step_raw(t + j as i64 - 1, &mut w, &mut scratch)?;
            // Early exit once the pushed correlation is at round-off.
            let sup = w.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            if sup < 1e-13 {
                break;
            }
            let (s_j, off_j) = g_at(t + j as i64)?;
            let g_j = &engine.g_grids[s_j];
            term_acc[j] +=
                kahan_sum(w.iter().zip(g_j).map(|(z, gv)| (gv - off_j) * z.re)) / nf;
        }
        engine.step_normalized(t, &mut v, &mut scratch)?;
    }

    let terms: Vec<f64> = term_acc.iter().map(|a| a / n_orbit as f64).collect();
    let mut truncation_j = j_max;
    for j in 1..=j_max {
        if terms[j].abs() < 1e-8 {
            truncation_j = j;
            break;
        }
    }
    let tail = kahan_sum(terms[1..truncation_j].iter().copied());
    let sigma2_series = terms[0] + 2.0 * tail;

    // Decay-rate fit on the magnitudes of the correlation terms.
    let pts: Vec<(f64, f64)> = (1..=truncation_j.min(j_max))
        .filter(|&j| terms[j].abs() > 1e-14)
        .map(|j| (j as f64, terms[j].abs().ln()))
        .collect();
    let decay_rate = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        match fit_line(&xs, &ys) {
            Some(fit) => fit.slope.exp().clamp(0.0, 1.0),
            None => 1.0 / family.delta(),
        }
    } else {
        // Series died immediately; fall back to the a priori contraction.
        1.0 / family.delta()
    };

    let params = CurveParams {
        n_orbit,
        n_burn: 512,
        n_cells,
        fd_step: 1e-2,
    };
    let (_, d2) = derivatives_at_zero(family, driving, observable, Axis::Real, &params)?;

    Ok(VarianceEstimate {
        sigma2_series,
        sigma2_curve: d2,
        terms,
        decay_rate,
        truncation_j,
        degenerate: sigma2_series < 1e-6,
    })
}

/// Least-squares fit of the projected cocycle decay.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub r_hat: f64,
    pub c_hat: f64,
    pub residual: f64,
}

/// Push `f - <phi, f> v` through the twisted cocycle, dividing by the
/// normalizer moduli, and fit `log bv-norm` against the step count.
pub fn decay_rate(
    family: &MapFamily,
    driving: &DrivingSystem,
    theta: Complex64,
    observable: &Observable,
    n: u32,
    n_cells: usize,
    trials: u32,
    seed: u64,
) -> Result<DecayFit> {
    let data = equivariant_density(family, driving, 0, theta, observable, n_cells, 1e-10)?;
    let phi = dual_functional(family, driving, 0, theta, observable, 64, n_cells, 1e-10)?;
    let engine = Engine::new(family, driving, theta, observable, n_cells)?;
    let mut rng = CounterStream::new(seed, crate::rng::streams::TEST_FUNCTIONS);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
    for _ in 0..trials {
        let f = crate::bv::random_step_function(n_cells, 8, -1.0, 1.0, &mut rng);
        let coeff = crate::transfer::pair(&phi, &f)?;
        let mut track: Vec<Complex64> = f
            .values()
            .iter()
            .zip(data.v.values())
            .map(|(a, b)| a - coeff * b)
            .collect();
        let init = norms(&GridFunction::new(track.clone())?).bv;
        if init < 1e-12 {
            return Err(Error::DegenerateInput(
                "test function equals the equivariant density; nothing to project",
            ));
        }
        let mut v = data.v.values().to_vec();
        let mut vscratch = vec![Complex64::new(0.0, 0.0); n_cells];
        for s in 0..n as i64 {
            let lambda = engine.step_normalized(s, &mut v, &mut vscratch)?;
            engine.step_raw(s, &mut track, &mut scratch)?;
            let inv = 1.0 / lambda.norm();
            for z in track.iter_mut() {
                *z *= inv;
            }
            let b = norms(&GridFunction::new(track.clone())?).bv;
            // Stay well above the collapse floor: dyadic-aligned matrices
            // are nilpotent on mean-zero vectors after log2(N) steps, and
            // points from that plunge would corrupt the geometric fit.
            if b < 1e-8 * init {
                break;
            }
            xs.push((s + 1) as f64);
            ys.push(b.ln());
        }
    }
    let fit = fit_line(&xs, &ys)
        .ok_or(Error::DegenerateInput("not enough decay points for a fit"))?;
    Ok(DecayFit { r_hat: fit.slope.exp(), c_hat: fit.intercept.exp(), residual: fit.rel_residual })
}

/// Fit of the correlation-decay envelope: at lag `n` the quantity
///
/// `sup over |h|_sup <= 1 of |integral L^(n)(f v_t) h dm
///     - (integral f dmu_t)(integral h dmu_{t+n})|
///   = || L^(n)(f v_t) - (integral f dmu_t) v_{t+n} ||_1`,
///
/// maximized over the test functions and normalized by their bv norms. Any
/// concrete pair `(f, h)` then satisfies
/// `|C_n| <= k_hat * rho^n * bv(f) * sup(h)`.
#[derive(Debug, Clone)]
pub struct CorrelationFit {
    pub k_hat: f64,
    pub rho: f64,
    pub residual: f64,
    /// The fitted envelope per lag, starting at lag 1.
    pub values: Vec<f64>,
}

pub fn decay_of_correlations(
    family: &MapFamily,
    driving: &DrivingSystem,
    t: i64,
    test_fns: &[GridFunction],
    n_max: u32,
    n_cells: usize,
) -> Result<CorrelationFit> {
    if test_fns.is_empty() {
        return Err(Error::BadInput("correlation fit needs at least one test function"));
    }
    for f in test_fns {
        if f.n_cells() != n_cells {
            return Err(Error::GridMismatch { left: f.n_cells(), right: n_cells });
        }
    }
    let obs = Observable::cosine(1); // irrelevant at theta = 0
    let engine = Engine::new(family, driving, Complex64::new(0.0, 0.0), &obs, n_cells)?;
    let data =
        equivariant_density(family, driving, t, Complex64::new(0.0, 0.0), &obs, n_cells, 1e-10)?;
    let nf = n_cells as f64;
    let mut v = data.v.into_values();
    let mut tracks: Vec<(f64, f64, Vec<Complex64>)> = test_fns
        .iter()
        .map(|f| {
            let w: Vec<Complex64> = f
                .values()
                .iter()
                .zip(&v)
                .map(|(a, b)| Complex64::new(a.re * b.re, 0.0))
                .collect();
            let f_mean = kahan_sum(w.iter().map(|z| z.re)) / nf;
            (norms(f).bv, f_mean, w)
        })
        .collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut vscratch = vec![Complex64::new(0.0, 0.0); n_cells];
    let mut values = Vec::with_capacity(n_max as usize);
    for s in 0..n_max as i64 {
        engine.step_normalized(t + s, &mut v, &mut vscratch)?;
        let mut envelope = 0.0f64;
        for (f_bv, f_mean, w) in tracks.iter_mut() {
            engine.step_raw(t + s, w, &mut scratch)?;
            let l1 = kahan_sum(w.iter().zip(&v).map(|(a, b)| (a.re - *f_mean * b.re).abs())) / nf;
            envelope = envelope.max(l1 / *f_bv);
        }
        values.push(envelope);
    }
    // Fit above the round-off floor of the leading value.
    let floor = values[0] * 1e-10;
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > floor)
        .map(|(i, &c)| ((i + 1) as f64, c.ln()))
        .collect();
    if pts.len() < 2 {
        // Correlations at round-off from the first step: decay is immediate.
        return Ok(CorrelationFit { k_hat: 0.0, rho: 1.0 / family.delta(), residual: 0.0, values });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = fit_line(&xs, &ys)
        .ok_or(Error::DegenerateInput("not enough correlation points for a fit"))?;
    Ok(CorrelationFit {
        k_hat: fit.intercept.exp(),
        rho: fit.slope.exp(),
        residual: fit.rel_residual,
        values,
    })
}
