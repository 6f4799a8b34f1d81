//! Jost solutions of `ψ_x = (iλσ₃ - λM)ψ`, `M = [[0, q], [-q̄, 0]]`, the
//! transition matrix and the reflection coefficient.
//!
//! Propagation uses the midpoint Magnus rule: across a sub-cell of width `h`
//! the coefficient is frozen at the midpoint value `A = λ[[i, -q], [q̄, -i]]`,
//! and `exp(hA) = cos(hω)·I + sin(hω)/ω·A` with `ω = λ⟨q⟩` is exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkiError};
use crate::lattice::{Grid, Mat2, SpatialGrid, SpectralGrid, C64, I};
use crate::lax::{akns_potentials, bracket, conserved_e1, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    /// Bound on `λ²·|Δq|·h²` per sub-cell.
    pub commutator_bound: f64,
    pub max_substeps: usize,
    /// Use exactly this many sub-cells per grid cell (power of two).
    pub fixed_substeps: Option<usize>,
    /// Smallest accepted `|a|` on the real line.
    pub abs_a_floor: f64,
    /// Edge magnitude of `q` above which a warning is logged.
    pub edge_tolerance: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            commutator_bound: 1e-7,
            max_substeps: 1024,
            fixed_substeps: None,
            abs_a_floor: 0.5,
            edge_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JostSide {
    /// Normalized at `x = +∞`.
    Plus,
    /// Normalized at `x = -∞`.
    Minus,
}

#[derive(Debug, Clone)]
pub struct JostSolution {
    pub lambda: f64,
    pub side: JostSide,
    pub grid: SpatialGrid,
    pub psi: Vec<Mat2>,
    pub substeps: usize,
    /// Largest `|det ψ - 1|` met along the propagation.
    pub det_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub lambda: f64,
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    /// `|d + b̄| + |c - ā|`
    pub symmetry_defect: f64,
    /// `| |a|² + |b|² - 1 |`
    pub unitarity_defect: f64,
    pub det_defect: f64,
    pub substeps: usize,
}

impl TransitionMatrix {
    fn identity(lambda: f64) -> Self {
        TransitionMatrix {
            lambda,
            a: C64::new(1.0, 0.0),
            b: C64::new(0.0, 0.0),
            c: C64::new(1.0, 0.0),
            d: C64::new(0.0, 0.0),
            symmetry_defect: 0.0,
            unitarity_defect: 0.0,
            det_defect: 0.0,
            substeps: 0,
        }
    }
}

/// `exp(h·λ[[i, -q], [q̄, -i]])`
pub fn step_matrix(lambda: f64, q: C64, h: f64) -> Mat2 {
    let omega = lambda * bracket(q);
    let theta = h * omega;
    let c = theta.cos();
    let s = if theta == 0.0 { h } else { theta.sin() / omega };
    let sl = s * lambda;
    Mat2::new(
        C64::new(c, 0.0) + I * sl,
        -q * sl,
        q.conj() * sl,
        C64::new(c, 0.0) - I * sl,
    )
}

fn free_solution(lambda: f64, x: f64) -> Mat2 {
    let e = C64::from_polar(1.0, lambda * x);
    Mat2::new(e, C64::new(0.0, 0.0), C64::new(0.0, 0.0), e.conj())
}

fn det_defect(m: &Mat2) -> f64 {
    (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] - 1.0).norm()
}

/// Sub-cells per grid cell needed at `λ`.
pub fn substeps_for(p: &Potential, lambda: f64, cfg: &ForwardConfig) -> Result<usize> {
    if let Some(s) = cfg.fixed_substeps {
        if s == 0 || !s.is_power_of_two() {
            return Err(WkiError::InvalidArgument(format!(
                "fixed substep count must be a power of two, got {s}"
            )));
        }
        return Ok(s);
    }
    let n = p.q.len();
    let jump = (0..n)
        .map(|k| (p.q[(k + 1) % n] - p.q[k]).norm())
        .fold(0.0, f64::max);
    let h = p.grid.spacing();
    let mut s = 1;
    while lambda * lambda * (jump / s as f64) * (h / s as f64).powi(2) > cfg.commutator_bound {
        s *= 2;
        if s > cfg.max_substeps {
            return Err(WkiError::ResolutionExceeded {
                lambda,
                substeps: s,
                cap: cfg.max_substeps,
            });
        }
    }
    Ok(s)
}

/// Midpoint samples per substep count, shared across many `λ`.
struct MidpointCache<'a> {
    potential: &'a Potential,
    tables: HashMap<usize, Vec<C64>>,
}

impl<'a> MidpointCache<'a> {
    fn new(potential: &'a Potential) -> Self {
        MidpointCache {
            potential,
            tables: HashMap::new(),
        }
    }

    fn get(&mut self, substeps: usize) -> Result<&[C64]> {
        if !self.tables.contains_key(&substeps) {
            let t = self.potential.substep_midpoints(substeps)?;
            self.tables.insert(substeps, t);
        }
        Ok(&self.tables[&substeps])
    }
}

/// Propagates one Jost solution from its normalization end, recording ψ at
/// grid points `[lo, hi)` of the propagation path. Returns the samples in
/// increasing grid order.
fn propagate(
    lambda: f64,
    side: JostSide,
    grid: SpatialGrid,
    mids: &[C64],
    substeps: usize,
    stop: usize,
) -> (Vec<Mat2>, f64) {
    let n = grid.len();
    let h = grid.spacing() / substeps as f64;
    let l = grid.half_width();
    let mut worst: f64 = 0.0;
    match side {
        JostSide::Minus => {
            let mut psi = free_solution(lambda, -l);
            let mut out = Vec::with_capacity(stop + 1);
            out.push(psi);
            for cell in 0..stop {
                for s in 0..substeps {
                    psi = step_matrix(lambda, mids[cell * substeps + s], h) * psi;
                }
                worst = worst.max(det_defect(&psi));
                out.push(psi);
            }
            (out, worst)
        }
        JostSide::Plus => {
            let mut psi = free_solution(lambda, l);
            let mut out = Vec::with_capacity(n - stop + 1);
            for cell in (stop..n).rev() {
                for s in (0..substeps).rev() {
                    psi = step_matrix(lambda, mids[cell * substeps + s], -h) * psi;
                }
                worst = worst.max(det_defect(&psi));
                out.push(psi);
            }
            out.reverse();
            (out, worst)
        }
    }
}

fn warn_on_edges(p: &Potential, cfg: &ForwardConfig) {
    let e = p.edge_magnitude();
    if e > cfg.edge_tolerance {
        log::warn!("potential is {e:.3e} at the grid ends");
    }
}

/// Jost solution sampled over the whole spatial grid.
pub fn propagate_jost(
    p: &Potential,
    lambda: f64,
    side: JostSide,
    cfg: &ForwardConfig,
) -> Result<JostSolution> {
    if !lambda.is_finite() {
        return Err(WkiError::InvalidArgument("lambda must be finite".into()));
    }
    warn_on_edges(p, cfg);
    let substeps = substeps_for(p, lambda, cfg)?;
    let mids = p.substep_midpoints(substeps)?;
    let n = p.grid.len();
    let (psi, det) = match side {
        JostSide::Minus => propagate(lambda, side, p.grid, &mids, substeps, n - 1),
        JostSide::Plus => propagate(lambda, side, p.grid, &mids, substeps, 0),
    };
    Ok(JostSolution {
        lambda,
        side,
        grid: p.grid,
        psi,
        substeps,
        det_defect: det,
    })
}

fn transition_from_cache(
    cache: &mut MidpointCache,
    lambda: f64,
    cfg: &ForwardConfig,
) -> Result<TransitionMatrix> {
    if lambda == 0.0 {
        return Ok(TransitionMatrix::identity(0.0));
    }
    let p = cache.potential;
    let substeps = substeps_for(p, lambda, cfg)?;
    let grid = p.grid;
    let mid = grid.origin_index();
    let mids = cache.get(substeps)?;
    let (minus, dm) = propagate(lambda, JostSide::Minus, grid, mids, substeps, mid);
    let (plus, dp) = propagate(lambda, JostSide::Plus, grid, mids, substeps, mid);
    let pm = minus[minus.len() - 1];
    let pp = plus[0];
    let det_m = pm[(0, 0)] * pm[(1, 1)] - pm[(0, 1)] * pm[(1, 0)];
    let adj = Mat2::new(pm[(1, 1)], -pm[(0, 1)], -pm[(1, 0)], pm[(0, 0)]);
    let t = adj * pp / det_m;
    let (a, b, d, c) = (t[(0, 0)], t[(1, 0)], t[(0, 1)], t[(1, 1)]);
    Ok(TransitionMatrix {
        lambda,
        a,
        b,
        c,
        d,
        symmetry_defect: (d + b.conj()).norm() + (c - a.conj()).norm(),
        unitarity_defect: (a.norm_sqr() + b.norm_sqr() - 1.0).abs(),
        det_defect: dm.max(dp),
        substeps,
    })
}

/// `T = ψ₋⁻¹ψ₊` at `x = 0`; `a = T₁₁`, `b = T₂₁`, `d = T₁₂`, `c = T₂₂`.
pub fn transition_matrix(
    p: &Potential,
    lambda: f64,
    cfg: &ForwardConfig,
) -> Result<TransitionMatrix> {
    warn_on_edges(p, cfg);
    transition_from_cache(&mut MidpointCache::new(p), lambda, cfg)
}

/// Transition matrices over an arbitrary list of `λ`.
pub fn lambda_scan(
    p: &Potential,
    lambdas: &[f64],
    cfg: &ForwardConfig,
) -> Result<Vec<TransitionMatrix>> {
    warn_on_edges(p, cfg);
    let mut cache = MidpointCache::new(p);
    lambdas
        .iter()
        .map(|&l| transition_from_cache(&mut cache, l, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScatteringDiagnostics {
    pub max_unitarity_defect: f64,
    pub max_det_defect: f64,
    pub max_symmetry_defect: f64,
    pub min_abs_a: f64,
    pub max_abs_r: f64,
    /// Largest `|r|` at the outermost grid points and next to the `z_min` gap.
    pub truncation_level: f64,
    pub max_substeps: usize,
    /// Turns of `a(λ)·e^{iλE1}` along the real line, the zero count of `a`
    /// in its half plane.
    pub winding: i64,
    /// Largest phase step between neighbours in the winding count.
    pub max_phase_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringData {
    pub zgrid: SpectralGrid,
    /// Time the data refers to.
    pub time: f64,
    /// `λ = -1/z` per grid point.
    pub lambda: Vec<f64>,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    /// `r(z) = b(-1/z)/a(-1/z)`, zero where inactive.
    pub r: Vec<C64>,
    /// Whether `|z| ≥ z_min`.
    pub active: Vec<bool>,
    pub diagnostics: ScatteringDiagnostics,
}

impl ScatteringData {
    /// Data with `r ≡ 0`.
    pub fn zero(zgrid: SpectralGrid) -> Self {
        let n = zgrid.len();
        ScatteringData {
            zgrid,
            time: 0.0,
            lambda: (0..n).map(|k| zgrid.lambda(k)).collect(),
            a: vec![C64::new(1.0, 0.0); n],
            b: vec![C64::new(0.0, 0.0); n],
            r: vec![C64::new(0.0, 0.0); n],
            active: (0..n).map(|k| zgrid.is_active(k)).collect(),
            diagnostics: ScatteringDiagnostics {
                min_abs_a: 1.0,
                ..Default::default()
            },
        }
    }

    /// Data carrying only `r` (with `a = 1`, `b = r`) at `time`.
    pub fn from_reflection(zgrid: SpectralGrid, r: Vec<C64>, time: f64) -> Result<Self> {
        if r.len() != zgrid.len() {
            return Err(WkiError::InvalidArgument(format!(
                "{} reflection samples for a grid of {}",
                r.len(),
                zgrid.len()
            )));
        }
        if r.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(WkiError::InvalidArgument(
                "reflection samples must be finite".into(),
            ));
        }
        let mut sd = ScatteringData::zero(zgrid);
        for k in 0..r.len() {
            if sd.active[k] {
                sd.r[k] = r[k];
                sd.b[k] = r[k];
            }
        }
        sd.time = time;
        sd.diagnostics.max_abs_r = sd.r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(sd)
    }

    /// CSV with columns `z,r_re,r_im`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z,r_re,r_im")?;
        for k in 0..self.zgrid.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e}",
                self.zgrid.coordinate(k),
                self.r[k].re,
                self.r[k].im
            )?;
        }
        Ok(())
    }
}

pub fn reflection_coefficient(
    p: &Potential,
    zgrid: SpectralGrid,
    cfg: &ForwardConfig,
) -> Result<ScatteringData> {
    warn_on_edges(p, cfg);
    let mut sd = ScatteringData::zero(zgrid);
    let mut cache = MidpointCache::new(p);
    let mut diag = ScatteringDiagnostics {
        min_abs_a: f64::INFINITY,
        ..Default::default()
    };
    for k in 0..zgrid.len() {
        if !sd.active[k] {
            continue;
        }
        let t = transition_from_cache(&mut cache, sd.lambda[k], cfg)?;
        sd.a[k] = t.a;
        sd.b[k] = t.b;
        sd.r[k] = t.b / t.a;
        diag.max_unitarity_defect = diag.max_unitarity_defect.max(t.unitarity_defect);
        diag.max_det_defect = diag.max_det_defect.max(t.det_defect);
        diag.max_symmetry_defect = diag.max_symmetry_defect.max(t.symmetry_defect);
        diag.min_abs_a = diag.min_abs_a.min(t.a.norm());
        diag.max_abs_r = diag.max_abs_r.max(sd.r[k].norm());
        diag.max_substeps = diag.max_substeps.max(t.substeps);
    }
    if !diag.min_abs_a.is_finite() {
        diag.min_abs_a = 1.0;
    }
    let n = zgrid.len();
    let mut trunc = sd.r[0].norm().max(sd.r[n - 1].norm());
    for k in 0..n {
        let edge =
            sd.active[k] && ((k > 0 && !sd.active[k - 1]) || (k + 1 < n && !sd.active[k + 1]));
        if edge {
            trunc = trunc.max(sd.r[k].norm());
        }
    }
    diag.truncation_level = trunc;
    let (winding, step) = phase_winding(&sd, conserved_e1(p));
    diag.winding = winding;
    diag.max_phase_step = step;
    if step > std::f64::consts::FRAC_PI_2 {
        log::warn!(
            "phase of a jumps by {step:.3} between grid points; bound-state count unreliable"
        );
    }
    sd.diagnostics = diag;
    if diag.min_abs_a < cfg.abs_a_floor || winding != 0 {
        return Err(WkiError::PossibleBoundState {
            min_abs_a: diag.min_abs_a,
            floor: cfg.abs_a_floor,
            winding,
        });
    }
    Ok(sd)
}

fn phase_winding(sd: &ScatteringData, e1: f64) -> (i64, f64) {
    let renormalized: Vec<C64> = (0..sd.a.len())
        .filter(|&k| sd.active[k])
        .map(|k| sd.a[k] * C64::from_polar(1.0, sd.lambda[k] * e1))
        .collect();
    let n = renormalized.len();
    let mut total = 0.0;
    let mut step: f64 = 0.0;
    for k in 0..n {
        let d = (renormalized[(k + 1) % n] / renormalized[k]).arg();
        total += d;
        step = step.max(d.abs());
    }
    ((total / std::f64::consts::TAU).round() as i64, step)
}

/// `r(z, t) = r(z)·e^{4it/z²}`; `b` picks up the same factor.
pub fn evolve_reflection(sd: &ScatteringData, t: f64) -> ScatteringData {
    let mut out = sd.clone();
    for k in 0..sd.r.len() {
        if !sd.active[k] {
            continue;
        }
        let l = sd.lambda[k];
        let f = C64::from_polar(1.0, 4.0 * t * l * l);
        out.r[k] *= f;
        out.b[k] *= f;
    }
    out.time = sd.time + t;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticDefect {
    pub lambda: f64,
    /// `|a(λ)e^{iλ∫H} - e^{-∫B}|`
    pub defect: f64,
}

pub fn check_a_asymptotics(
    p: &Potential,
    lambdas: &[f64],
    cfg: &ForwardConfig,
) -> Result<Vec<AsymptoticDefect>> {
    let fields = akns_potentials(p);
    let int_h = fields.integral_h();
    let target = (-fields.integral_b()).exp();
    lambda_scan(p, lambdas, cfg).map(|ts| {
        ts.iter()
            .map(|t| AsymptoticDefect {
                lambda: t.lambda,
                defect: (t.a * C64::from_polar(1.0, t.lambda * int_h) - target).norm(),
            })
            .collect()
    })
}

/// `b = -λ∫ e^{2iλy} q̄(y) m⁺₁₁(y) dy`, the integral form of `T₂₁`, by the
/// trapezoid rule over the `ψ₊` samples.
pub fn b_from_integral(p: &Potential, lambda: f64, cfg: &ForwardConfig) -> Result<C64> {
    let jost = propagate_jost(p, lambda, JostSide::Plus, cfg)?;
    let h = p.grid.spacing();
    let sum: C64 = (0..p.grid.len())
        .map(|k| {
            let y = p.grid.coordinate(k);
            C64::from_polar(1.0, lambda * y) * p.q[k].conj() * jost.psi[k][(0, 0)]
        })
        .sum();
    Ok(-lambda * h * sum)
}
