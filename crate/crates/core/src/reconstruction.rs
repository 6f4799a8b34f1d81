//! From the RHP moment to `q_H(x_H)`, through the hodograph map back to `q(x)`.

use serde::{Deserialize, Serialize};

use crate::direct_scattering::ScatteringData;
use crate::error::{Result, WkiError};
use crate::lattice::{cumulative_integral, Grid, GridFunction, SpatialGrid, C64};
use crate::lax::{bracket, DerivativeKind, Potential};
use crate::rhp::{
    build_factorization, delta_function, FactorizationKind, RhpSolver, SolverConfig, SolverKind,
};

/// Inverts `s = q_H/⟨q_H⟩`.
pub fn qh_from_slope(s: C64, margin: f64) -> Result<C64> {
    let a = s.norm();
    if !(a < 1.0 - margin) {
        return Err(WkiError::SlopeConditionViolated { slope: a, margin });
    }
    let mod2 = a * a / (1.0 - a * a);
    Ok((1.0 + mod2).sqrt() * s)
}

/// Shape-preserving piecewise cubic Hermite interpolant (PCHIP derivatives).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(WkiError::InvalidArgument(
                "interpolation needs two or more matching samples".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(WkiError::InvalidArgument(
                "interpolation abscissae must increase strictly".into(),
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(MonotoneCubic { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value at `t`, or `None` outside the sampled range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let n = self.x.len();
        if !(t >= self.x[0] && t <= self.x[n - 1]) {
            return None;
        }
        let k = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Complex samples interpolated part by part, zero outside the samples
/// when the end values are below `decay`.
#[derive(Debug, Clone)]
pub struct ComplexInterpolant {
    re: MonotoneCubic,
    im: MonotoneCubic,
    ends: (C64, C64),
    decay: f64,
}

impl ComplexInterpolant {
    pub fn new(x: Vec<f64>, v: &[C64], decay: f64) -> Result<Self> {
        Ok(ComplexInterpolant {
            re: MonotoneCubic::new(x.clone(), v.iter().map(|c| c.re).collect())?,
            im: MonotoneCubic::new(x, v.iter().map(|c| c.im).collect())?,
            ends: (v[0], v[v.len() - 1]),
            decay,
        })
    }

    pub fn eval(&self, t: f64) -> Result<C64> {
        match (self.re.eval(t), self.im.eval(t)) {
            (Some(a), Some(b)) => Ok(C64::new(a, b)),
            _ => {
                let (lo, hi) = self.re.domain();
                let end = if t < lo { self.ends.0 } else { self.ends.1 };
                if end.norm() <= self.decay {
                    Ok(C64::new(0.0, 0.0))
                } else {
                    Err(WkiError::RangeError(format!(
                        "x_H = {t} outside the sweep [{lo}, {hi}] where q_H is still {:.3e}",
                        end.norm()
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Number of `x_H` cells; zero means one per target grid point.
    pub sweep_points: usize,
    pub slope_margin: f64,
    pub fixed_point_tolerance: f64,
    pub max_fixed_point_iterations: usize,
    /// Magnitude below which `q_H` counts as decayed.
    pub decay_tolerance: f64,
    /// Allowed deviation of `m⁽¹⁾₁₁` from the positive imaginary axis.
    pub m11_tolerance: f64,
    pub solver: SolverConfig,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            sweep_points: 0,
            slope_margin: 1e-6,
            fixed_point_tolerance: 1e-10,
            max_fixed_point_iterations: 500,
            decay_tolerance: 1e-6,
            m11_tolerance: 1e-6,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub iterations: usize,
    pub last_change: f64,
}

/// Picard iteration for `ε(x) = ∫_{-L}^x (⟨q_H(y + ε(y))⟩ - 1) dy` on `grid`.
pub fn epsilon_fixed_point(
    qh: &ComplexInterpolant,
    grid: SpatialGrid,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, FixedPoint)> {
    let xs = grid.coordinates();
    let mut eps = vec![0.0; xs.len()];
    let mut change = f64::INFINITY;
    for it in 1..=max_iterations {
        let integrand = xs
            .iter()
            .zip(&eps)
            .map(|(&x, &e)| Ok(C64::new(bracket(qh.eval(x + e)?) - 1.0, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let next: Vec<f64> = cumulative_integral(&GridFunction {
            grid,
            values: integrand,
        })
        .values
        .iter()
        .map(|v| v.re)
        .collect();
        change = next
            .iter()
            .zip(&eps)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        eps = next;
        if change < tolerance {
            return Ok((
                eps,
                FixedPoint {
                    iterations: it,
                    last_change: change,
                },
            ));
        }
    }
    Err(WkiError::HodographUnsolved {
        iterations: max_iterations,
        change,
    })
}

/// `x = x_H - (1/i)·m⁽¹⁾₁₁(x_H)`, checked for strict monotonicity.
pub fn x_from_m11(x_h: &[f64], m11: &[C64], tolerance: f64) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(x_h.len());
    for (&xh, &m) in x_h.iter().zip(m11) {
        if m.re.abs() > tolerance || m.im < -tolerance {
            return Err(WkiError::HodographInconsistent(format!(
                "m11 = {m} at x_H = {xh} is not on the positive imaginary axis"
            )));
        }
        x.push(xh - m.im);
    }
    if let Some(k) = x.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(WkiError::HodographInconsistent(format!(
            "x(x_H) not increasing between x_H = {} and {}",
            x_h[k],
            x_h[k + 1]
        )));
    }
    Ok(x)
}

/// `q(x) = q_H(x + ε(x))` on the target grid.
pub fn resample_q(
    qh: &ComplexInterpolant,
    epsilon: &[f64],
    grid: SpatialGrid,
) -> Result<Potential> {
    let q = grid
        .coordinates()
        .iter()
        .zip(epsilon)
        .map(|(&x, &e)| qh.eval(x + e))
        .collect::<Result<Vec<_>>>()?;
    Potential::from_samples(grid, q, DerivativeKind::Spectral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub x_h: f64,
    pub t: f64,
    pub kind: FactorizationKind,
    pub solver: SolverKind,
    pub iterations: usize,
    pub residual: f64,
    pub dmu_residual: f64,
    pub abs_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReconstructionDiagnostics {
    pub max_abs_slope: f64,
    pub max_residual: f64,
    /// Largest decrease of ε between neighbors (zero when nondecreasing).
    pub epsilon_monotonicity_defect: f64,
    /// `sup |ε_fixed_point - ε_from_m11|` on the target grid.
    pub route_gap: f64,
    /// Fixed-point ε at the right end of the target grid.
    pub epsilon_infinity: f64,
    /// `Im m⁽¹⁾₁₁` at the right end of the sweep.
    pub epsilon_infinity_m11: f64,
    /// `∫(1 - 1/⟨q_H⟩) dx_H`, the mass of `q_H` measured in `x`.
    pub e1_hodograph: f64,
    /// `∫(⟨q⟩ - 1) dx` of the resampled potential.
    pub e1: f64,
    /// Change of `q` when the sweep is thinned by two.
    pub interpolation_error: f64,
    pub min_map_slope: f64,
    pub max_map_slope: f64,
    /// Root of the `x_H` map, `x_H(x_c) = 0`.
    pub x_c: f64,
    pub fixed_point_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub t: f64,
    pub x_h: Vec<f64>,
    pub q_h: Vec<C64>,
    pub slope: Vec<C64>,
    pub m1_11: Vec<C64>,
    pub x_of_xh: Vec<f64>,
    pub cells: Vec<CellRecord>,
    pub epsilon: Vec<f64>,
    pub potential: Potential,
    pub diagnostics: ReconstructionDiagnostics,
}

impl ReconstructionResult {
    /// CSV with columns `x,q_re,q_im,q_abs`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,q_re,q_im,q_abs")?;
        let g = self.potential.grid;
        for (k, q) in self.potential.q.iter().enumerate() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                g.coordinate(k),
                q.re,
                q.im,
                q.norm()
            )?;
        }
        Ok(())
    }

    /// CSV with columns `x_h,x,qh_re,qh_im,s_re,s_im`.
    pub fn write_hodograph_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_h,x,qh_re,qh_im,s_re,s_im")?;
        for k in 0..self.x_h.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.x_h[k],
                self.x_of_xh[k],
                self.q_h[k].re,
                self.q_h[k].im,
                self.slope[k].re,
                self.slope[k].im
            )?;
        }
        Ok(())
    }

    /// CSV with columns `x_h,t,kind,solver,iterations,residual,dmu_residual,abs_dx_m1_12`.
    pub fn write_cell_log<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "x_h,t,kind,solver,iterations,residual,dmu_residual,abs_dx_m1_12"
        )?;
        for c in &self.cells {
            let kind = match c.kind {
                FactorizationKind::Triangular => "triangular",
                FactorizationKind::DeltaConjugated => "delta-conjugated",
            };
            let solver = match c.solver {
                SolverKind::Neumann => "neumann",
                SolverKind::Dense => "dense",
            };
            writeln!(
                out,
                "{:.17e},{:.17e},{kind},{solver},{},{:.6e},{:.6e},{:.17e}",
                c.x_h, c.t, c.iterations, c.residual, c.dmu_residual, c.abs_slope
            )?;
        }
        Ok(())
    }
}

/// Solves the RHP at one `x_H` with the factorization chosen by the sign
/// of `x_H`.
pub fn solve_cell(
    solver: &RhpSolver,
    sd: &ScatteringData,
    delta: &crate::rhp::DeltaFunction,
    x_h: f64,
    t: f64,
) -> Result<crate::rhp::RhpSolution> {
    let kind = if x_h <= 0.0 {
        FactorizationKind::Triangular
    } else {
        FactorizationKind::DeltaConjugated
    };
    build_factorization(sd, Some(delta), x_h, t, kind)
        .and_then(|f| solver.solve(&f))
        .map_err(|e| e.in_cell(x_h, t))
}

/// Scattering data at any time → `q(·, t)` on `grid`.
pub fn inverse_transform(
    sd: &ScatteringData,
    t: f64,
    grid: SpatialGrid,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    let solver = RhpSolver::new(sd.zgrid, cfg.solver);
    let delta = delta_function(&sd.r, solver.cauchy());
    let l = grid.half_width();

    let first = solve_cell(&solver, sd, &delta, l, t)?;
    let eps_max = first.m1[(0, 0)].im.max(0.0);
    let count = if cfg.sweep_points == 0 {
        grid.len()
    } else {
        cfg.sweep_points
    };
    if count < 8 {
        return Err(WkiError::InvalidArgument(format!(
            "sweep needs at least 8 points, got {count}"
        )));
    }
    let width = 2.0 * l + eps_max;
    let step = width / (count - 1) as f64;
    let right = l + eps_max + 2.0 * step;
    let step = (right + l) / (count - 1) as f64;
    let x_h: Vec<f64> = (0..count).map(|k| -l + k as f64 * step).collect();

    let mut q_h = Vec::with_capacity(count);
    let mut slope = Vec::with_capacity(count);
    let mut m1_11 = Vec::with_capacity(count);
    let mut cells = Vec::with_capacity(count);
    let mut diag = ReconstructionDiagnostics::default();
    for &xh in &x_h {
        let sol = solve_cell(&solver, sd, &delta, xh, t)?;
        let s = sol.dx_m1.map(|m| m[(0, 1)]).unwrap_or_default();
        q_h.push(qh_from_slope(s, cfg.slope_margin).map_err(|e| e.in_cell(xh, t))?);
        slope.push(s);
        m1_11.push(sol.m1[(0, 0)]);
        diag.max_abs_slope = diag.max_abs_slope.max(s.norm());
        diag.max_residual = diag
            .max_residual
            .max(sol.residual)
            .max(sol.dmu_residual.unwrap_or(0.0));
        cells.push(CellRecord {
            x_h: xh,
            t,
            kind: if xh <= 0.0 {
                FactorizationKind::Triangular
            } else {
                FactorizationKind::DeltaConjugated
            },
            solver: sol.solver,
            iterations: sol.iterations,
            residual: sol.residual,
            dmu_residual: sol.dmu_residual.unwrap_or(0.0),
            abs_slope: s.norm(),
        });
    }

    let interp = ComplexInterpolant::new(x_h.clone(), &q_h, cfg.decay_tolerance)?;
    let (epsilon, fp) = epsilon_fixed_point(
        &interp,
        grid,
        cfg.fixed_point_tolerance,
        cfg.max_fixed_point_iterations,
    )?;
    let potential = resample_q(&interp, &epsilon, grid)?;

    let x_of_xh = x_from_m11(&x_h, &m1_11, cfg.m11_tolerance)?;
    let explicit = MonotoneCubic::new(
        x_of_xh.clone(),
        x_h.iter().zip(&x_of_xh).map(|(a, b)| a - b).collect(),
    )?;
    let xs = grid.coordinates();
    diag.route_gap = xs
        .iter()
        .zip(&epsilon)
        .filter_map(|(&x, &e)| explicit.eval(x).map(|v| (v - e).abs()))
        .fold(0.0, f64::max);
    diag.epsilon_monotonicity_defect = epsilon
        .windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max);
    diag.epsilon_infinity = epsilon[epsilon.len() - 1];
    diag.epsilon_infinity_m11 = m1_11[m1_11.len() - 1].im;
    let mass: Vec<f64> = q_h.iter().map(|&q| 1.0 - 1.0 / bracket(q)).collect();
    diag.e1_hodograph = step * (mass.iter().sum::<f64>() - 0.5 * (mass[0] + mass[mass.len() - 1]));
    diag.e1 = crate::lax::conserved_e1(&potential);
    let slopes: Vec<f64> = x_of_xh.windows(2).map(|w| (w[1] - w[0]) / step).collect();
    diag.min_map_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    diag.max_map_slope = slopes.iter().copied().fold(0.0, f64::max);
    let inverse_map = MonotoneCubic::new(x_h.clone(), x_of_xh.clone())?;
    diag.x_c = inverse_map.eval(0.0).unwrap_or(f64::NAN);
    diag.fixed_point_iterations = fp.iterations;

    let thin_x: Vec<f64> = x_h.iter().step_by(2).copied().collect();
    let thin_q: Vec<C64> = q_h.iter().step_by(2).copied().collect();
    let thin = ComplexInterpolant::new(thin_x, &thin_q, cfg.decay_tolerance)?;
    diag.interpolation_error = xs
        .iter()
        .zip(&epsilon)
        .zip(&potential.q)
        .map(|((&x, &e), &q)| thin.eval(x + e).map(|v| (v - q).norm()).unwrap_or(0.0))
        .fold(0.0, f64::max);

    Ok(ReconstructionResult {
        t,
        x_h,
        q_h,
        slope,
        m1_11,
        x_of_xh,
        cells,
        epsilon,
        potential,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_spatial_grid, SpectralGrid};
    use crate::soliton::{soliton_epsilon, soliton_m1_entries, soliton_qh, SolitonParams};
    use proptest::prelude::*;

    #[test]
    fn slope_inversion() {
        assert_eq!(
            qh_from_slope(C64::new(0.0, 0.0), 1e-6).unwrap(),
            C64::new(0.0, 0.0)
        );
        let q = qh_from_slope(C64::new(0.6, 0.0), 1e-6).unwrap();
        assert!((q - 0.75).norm() < 1e-15);
        assert!((bracket(q) - 1.25).abs() < 1e-15);
        assert!(matches!(
            qh_from_slope(C64::new(0.999999, 0.0), 1e-6),
            Err(WkiError::SlopeConditionViolated { .. })
        ));
    }

    #[test]
    fn monotone_cubic_reproduces_cubic_free_data() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = MonotoneCubic::new(x, y).unwrap();
        assert!((m.eval(0.55).unwrap() - 2.1).abs() < 1e-14);
        assert!(m.eval(5.0).is_none());
    }

    #[test]
    fn zero_hodograph_data() {
        let grid = make_spatial_grid(5.0, 64).unwrap();
        let xh: Vec<f64> = (0..40).map(|k| -5.0 + k as f64 * 0.3).collect();
        let qh = ComplexInterpolant::new(xh.clone(), &vec![C64::new(0.0, 0.0); 40], 1e-6).unwrap();
        let (eps, _) = epsilon_fixed_point(&qh, grid, 1e-10, 500).unwrap();
        assert!(eps.iter().all(|&e| e == 0.0));
        let p = resample_q(&qh, &eps, grid).unwrap();
        assert!(p.q.iter().all(|v| v.norm() == 0.0));
        let x = x_from_m11(&xh, &vec![C64::new(0.0, 0.0); 40], 1e-8).unwrap();
        assert_eq!(x, xh);
    }

    #[test]
    fn soliton_hodograph_routes() {
        let p = SolitonParams::new(3.0, 1.0).unwrap();
        let xh: Vec<f64> = (0..3201).map(|k| -8.0 + k as f64 * 0.005).collect();
        let m11: Vec<C64> = xh
            .iter()
            .map(|&v| soliton_m1_entries(v, 0.0, &p).1)
            .collect();
        let x = x_from_m11(&xh, &m11, 1e-12).unwrap();
        for (k, &v) in xh.iter().enumerate() {
            let e = 0.1 * ((2.0 * v).tanh() + 1.0);
            assert!((v - x[k] - e).abs() < 1e-9);
        }
        let q: Vec<C64> = xh
            .iter()
            .map(|&v| soliton_qh(v, 0.0, &p).finite().unwrap())
            .collect();
        let interp = ComplexInterpolant::new(xh, &q, 1e-6).unwrap();
        let grid = make_spatial_grid(7.5, 1500).unwrap();
        let (eps, _) = epsilon_fixed_point(&interp, grid, 1e-12, 500).unwrap();
        for (k, xv) in grid.coordinates().into_iter().enumerate() {
            let err = (eps[k] - soliton_epsilon(xv, 0.0, &p).unwrap()).abs();
            assert!(err < 5e-6, "x = {xv}: {err}");
        }
    }

    #[test]
    fn zero_data_reconstructs_zero() {
        let sd = ScatteringData::zero(SpectralGrid::new(64, 0.5, 0.125).unwrap());
        let grid = make_spatial_grid(5.0, 64).unwrap();
        let r = inverse_transform(&sd, 0.3, grid, &ReconstructionConfig::default()).unwrap();
        assert!(r.potential.q.iter().all(|v| v.norm() == 0.0));
        assert_eq!(r.diagnostics.route_gap, 0.0);
    }

    proptest! {
        #[test]
        fn slope_roundtrip(re in -0.7f64..0.7, im in -0.7f64..0.7) {
            let s = C64::new(re, im);
            let q = qh_from_slope(s, 1e-6).unwrap();
            prop_assert!((q / bracket(q) - s).norm() < 1e-12);
        }

        #[test]
        fn monotone_data_stays_monotone(ys in proptest::collection::vec(0.0f64..1.0, 3..30)) {
            let mut acc = 0.0;
            let y: Vec<f64> = ys.iter().map(|v| { acc += v; acc }).collect();
            let x: Vec<f64> = (0..y.len()).map(|k| k as f64).collect();
            let m = MonotoneCubic::new(x, y.clone()).unwrap();
            let mut last = f64::NEG_INFINITY;
            for j in 0..(10 * (y.len() - 1)) {
                let v = m.eval(j as f64 / 10.0).unwrap();
                prop_assert!(v >= last - 1e-12);
                last = v;
            }
        }
    }
}
