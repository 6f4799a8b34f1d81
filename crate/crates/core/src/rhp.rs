//! Jump data of the normalized Riemann–Hilbert problem in `z = -1/λ`, the
//! Beals–Coifman equation `μ = I + C⁺(μw₋) + C⁻(μw₊)` and its moments.
//!
//! Both factorizations used here put exactly one nonzero entry in each of
//! `w₊` and `w₋`, so the rows of `μ` solve two independent 2-vector
//! equations.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::direct_scattering::ScatteringData;
use crate::error::{Result, WkiError};
use crate::lattice::{CauchyOperator, Grid, Mat2, SpectralGrid, C64, I};

/// `θ = x_H/z + 2t/z²`
pub fn phase(z: f64, x_h: f64, t: f64) -> Result<f64> {
    if z == 0.0 || !z.is_finite() {
        return Err(WkiError::InvalidArgument(format!(
            "phase needs finite z != 0, got {z}"
        )));
    }
    Ok(x_h / z + 2.0 * t / (z * z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorizationKind {
    /// `w₊ = [[0, 0], [r e^{2iθ}, 0]]`, `w₋ = [[0, r̄ e^{-2iθ}], [0, 0]]`
    Triangular,
    /// `w₊ = [[0, r̄ δ₊δ₋ e^{-2iθ}], [0, 0]]`, `w₋ = [[0, 0], [r e^{2iθ}/(δ₊δ₋), 0]]`,
    /// for `m̃ = m δ^{-σ₃}`.
    DeltaConjugated,
}

/// `δ± = exp(C±[log(1 + |r|²)])` on the z grid.
#[derive(Debug, Clone)]
pub struct DeltaFunction {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
    /// `Δ = 1/(δ₊δ₋)`
    pub big_delta: Vec<C64>,
    /// `lim z(δ(z) - 1)` at infinity.
    pub moment: C64,
    /// `max |δ₊ - δ₋(1 + |r|²)|`
    pub boundary_defect: f64,
    /// `max | |δ₊δ₋| - 1 |`
    pub unimodularity_defect: f64,
}

pub fn delta_function(r: &[C64], cauchy: &CauchyOperator) -> DeltaFunction {
    let log: Vec<C64> = r
        .iter()
        .map(|v| C64::new(v.norm_sqr().ln_1p(), 0.0))
        .collect();
    let plus: Vec<C64> = cauchy.plus(&log).into_iter().map(|v| v.exp()).collect();
    let minus: Vec<C64> = cauchy.minus(&log).into_iter().map(|v| v.exp()).collect();
    let mut boundary_defect: f64 = 0.0;
    let mut unimodularity_defect: f64 = 0.0;
    let big_delta = (0..r.len())
        .map(|k| {
            boundary_defect =
                boundary_defect.max((plus[k] - minus[k] * (1.0 + r[k].norm_sqr())).norm());
            let prod = plus[k] * minus[k];
            unimodularity_defect = unimodularity_defect.max((prod.norm() - 1.0).abs());
            1.0 / prod
        })
        .collect();
    DeltaFunction {
        moment: cauchy.moment(&log),
        plus,
        minus,
        big_delta,
        boundary_defect,
        unimodularity_defect,
    }
}

/// A 2×2 field on the z grid with a single nonzero entry at `(row, col)`.
#[derive(Debug, Clone)]
pub struct OffDiagonal {
    pub row: usize,
    pub col: usize,
    pub values: Vec<C64>,
    /// `∂_{x_H}` of `values`.
    pub derivative: Vec<C64>,
}

impl OffDiagonal {
    pub fn matrix(&self, k: usize) -> Mat2 {
        let mut m = Mat2::zeros();
        m[(self.row, self.col)] = self.values[k];
        m
    }

    pub fn derivative_matrix(&self, k: usize) -> Mat2 {
        let mut m = Mat2::zeros();
        m[(self.row, self.col)] = self.derivative[k];
        m
    }
}

#[derive(Debug, Clone)]
pub struct JumpFactorization {
    pub kind: FactorizationKind,
    pub zgrid: SpectralGrid,
    pub x_h: f64,
    pub t: f64,
    pub theta: Vec<f64>,
    pub w_plus: OffDiagonal,
    pub w_minus: OffDiagonal,
    /// `δ⁽¹⁾`, zero for the triangular kind.
    pub delta_moment: C64,
}

/// Jump factors at `(x_H, t)`. The data's own time is honored: the time
/// part of the phase is `2(t - sd.time)/z²`, so unevolved data and evolved
/// data give the same problem.
pub fn build_factorization(
    sd: &ScatteringData,
    delta: Option<&DeltaFunction>,
    x_h: f64,
    t: f64,
    kind: FactorizationKind,
) -> Result<JumpFactorization> {
    let grid = sd.zgrid;
    let n = grid.len();
    let dt = t - sd.time;
    let mut theta = vec![0.0; n];
    let mut up = vec![C64::new(0.0, 0.0); n];
    let mut dup = vec![C64::new(0.0, 0.0); n];
    let mut low = vec![C64::new(0.0, 0.0); n];
    let mut dlow = vec![C64::new(0.0, 0.0); n];
    if kind == FactorizationKind::DeltaConjugated && delta.is_none() {
        return Err(WkiError::InvalidArgument(
            "delta-conjugated factorization needs the delta function".into(),
        ));
    }
    for k in 0..n {
        let z = grid.coordinate(k);
        theta[k] = phase(z, x_h, dt)?;
        let r = sd.r[k];
        if !sd.active[k] || r == C64::new(0.0, 0.0) {
            continue;
        }
        let e = C64::from_polar(1.0, 2.0 * theta[k]);
        let (u, l) = match (kind, delta) {
            (FactorizationKind::DeltaConjugated, Some(d)) => {
                let prod = d.plus[k] * d.minus[k];
                (r.conj() * prod * e.conj(), r / prod * e)
            }
            _ => (r.conj() * e.conj(), r * e),
        };
        up[k] = u;
        low[k] = l;
        dup[k] = -2.0 * I / z * u;
        dlow[k] = 2.0 * I / z * l;
    }
    let upper = OffDiagonal {
        row: 0,
        col: 1,
        values: up,
        derivative: dup,
    };
    let lower = OffDiagonal {
        row: 1,
        col: 0,
        values: low,
        derivative: dlow,
    };
    let (w_plus, w_minus, delta_moment) = match kind {
        FactorizationKind::Triangular => (lower, upper, C64::new(0.0, 0.0)),
        FactorizationKind::DeltaConjugated => {
            (upper, lower, delta.map(|d| d.moment).unwrap_or_default())
        }
    };
    Ok(JumpFactorization {
        kind,
        zgrid: grid,
        x_h,
        t,
        theta,
        w_plus,
        w_minus,
        delta_moment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Neumann,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest grid for the dense fallback.
    pub dense_cap: usize,
    /// Skip the policy and use this solver.
    pub force: Option<SolverKind>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 200,
            dense_cap: 1024,
            force: None,
        }
    }
}

/// Row-major 2×2 field: `field[i][j][k]` is entry `(i, j)` at grid point `k`.
pub type Field = [[Vec<C64>; 2]; 2];

#[derive(Debug, Clone)]
pub struct RhpSolution {
    pub mu: Field,
    pub dmu: Option<Field>,
    pub m1: Mat2,
    pub dx_m1: Option<Mat2>,
    /// Grid-L² residual of the μ equation (root mean square over points).
    pub residual: f64,
    pub dmu_residual: Option<f64>,
    pub iterations: usize,
    pub solver: SolverKind,
}

/// Solver state tied to one z grid.
#[derive(Debug)]
pub struct RhpSolver {
    cauchy: CauchyOperator,
    config: SolverConfig,
    dense_plus: OnceLock<DMatrix<C64>>,
}

fn rms(v: &[Vec<C64>; 2]) -> f64 {
    let n = v[0].len() as f64;
    ((v[0].iter().chain(&v[1]).map(|c| c.norm_sqr()).sum::<f64>()) / n).sqrt()
}

impl RhpSolver {
    pub fn new(zgrid: SpectralGrid, config: SolverConfig) -> Self {
        RhpSolver {
            cauchy: CauchyOperator::new(zgrid),
            config,
            dense_plus: OnceLock::new(),
        }
    }

    pub fn cauchy(&self) -> &CauchyOperator {
        &self.cauchy
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `C_w u = C⁺(u w₋) + C⁻(u w₊)` for a row vector `u`.
    fn apply_cw(
        &self,
        f: &JumpFactorization,
        u: &[Vec<C64>; 2],
        derivative: bool,
    ) -> [Vec<C64>; 2] {
        let n = u[0].len();
        let mut out = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
        for (w, plus) in [(&f.w_minus, true), (&f.w_plus, false)] {
            let vals = if derivative { &w.derivative } else { &w.values };
            let mut buf: Vec<C64> = u[w.row].iter().zip(vals).map(|(a, b)| a * b).collect();
            if plus {
                self.cauchy.plus_in_place(&mut buf);
            } else {
                self.cauchy.minus_in_place(&mut buf);
            }
            out[w.col].iter_mut().zip(buf).for_each(|(o, v)| *o += v);
        }
        out
    }

    fn residual_of(&self, f: &JumpFactorization, u: &[Vec<C64>; 2], rhs: &[Vec<C64>; 2]) -> f64 {
        let cu = self.apply_cw(f, u, false);
        let r = [0, 1].map(|c| {
            (0..u[c].len())
                .map(|k| u[c][k] - rhs[c][k] - cu[c][k])
                .collect::<Vec<_>>()
        });
        rms(&r)
    }

    /// Solves `(I - C_w)u = rhs` by successive substitution.
    fn neumann(
        &self,
        f: &JumpFactorization,
        rhs: &[Vec<C64>; 2],
    ) -> Option<([Vec<C64>; 2], usize)> {
        let mut u = rhs.clone();
        let mut last = f64::INFINITY;
        let mut growth = 0;
        for it in 1..=self.config.max_iterations {
            let cu = self.apply_cw(f, &u, false);
            let next = [0, 1].map(|c| {
                rhs[c]
                    .iter()
                    .zip(&cu[c])
                    .map(|(a, b)| a + b)
                    .collect::<Vec<_>>()
            });
            let change = rms(&[0, 1].map(|c| {
                next[c]
                    .iter()
                    .zip(&u[c])
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>()
            }));
            u = next;
            if !change.is_finite() {
                return None;
            }
            if change < 0.1 * self.config.tolerance {
                return Some((u, it));
            }
            if change > last {
                growth += 1;
                if growth > 5 {
                    return None;
                }
            }
            last = change;
        }
        None
    }

    fn dense_plus(&self) -> &DMatrix<C64> {
        self.dense_plus.get_or_init(|| {
            let m = self.cauchy.grid().len();
            let mut p = DMatrix::zeros(m, m);
            for j in 0..m {
                let mut e = vec![C64::new(0.0, 0.0); m];
                e[j] = C64::new(1.0, 0.0);
                self.cauchy.plus_in_place(&mut e);
                for i in 0..m {
                    p[(i, j)] = e[i];
                }
            }
            p
        })
    }

    /// Collocation solve of `(I - C_w)u = rhs` for several right-hand sides.
    fn dense(&self, f: &JumpFactorization, rhs: &[[Vec<C64>; 2]]) -> Result<Vec<[Vec<C64>; 2]>> {
        let m = self.cauchy.grid().len();
        if m > self.config.dense_cap {
            return Err(WkiError::RhpUnsolved(format!(
                "dense fallback capped at {} points, grid has {m}",
                self.config.dense_cap
            )));
        }
        let p = self.dense_plus();
        let mut a = DMatrix::<C64>::identity(2 * m, 2 * m);
        for (w, plus) in [(&f.w_minus, true), (&f.w_plus, false)] {
            for j in 0..m {
                let wj = w.values[j];
                if wj == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..m {
                    let mut c = p[(i, j)];
                    if !plus && i == j {
                        c -= 1.0;
                    }
                    a[(w.col * m + i, w.row * m + j)] -= c * wj;
                }
            }
        }
        let lu = a.lu();
        rhs.iter()
            .map(|r| {
                let b = nalgebra::DVector::from_iterator(2 * m, r[0].iter().chain(&r[1]).copied());
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| WkiError::RhpUnsolved("singular collocation matrix".into()))?;
                Ok([
                    x.rows(0, m).iter().copied().collect(),
                    x.rows(m, m).iter().copied().collect(),
                ])
            })
            .collect()
    }

    fn solve_rows(
        &self,
        f: &JumpFactorization,
        rhs: [[Vec<C64>; 2]; 2],
    ) -> Result<(Field, usize, SolverKind)> {
        let use_dense = self.config.force == Some(SolverKind::Dense);
        if !use_dense {
            let a = self.neumann(f, &rhs[0]);
            let b = self.neumann(f, &rhs[1]);
            if let (Some((r0, i0)), Some((r1, i1))) = (a, b) {
                return Ok(([r0, r1], i0.max(i1), SolverKind::Neumann));
            }
            if self.config.force == Some(SolverKind::Neumann) {
                return Err(WkiError::RhpUnsolved(
                    "Neumann iteration did not converge".into(),
                ));
            }
        }
        let mut rows = self.dense(f, &rhs)?.into_iter();
        let r0 = rows.next().unwrap();
        let r1 = rows.next().unwrap();
        Ok(([r0, r1], 1, SolverKind::Dense))
    }

    fn moment_of_product(&self, left: &Field, w: &OffDiagonal, derivative: bool) -> Mat2 {
        let vals = if derivative { &w.derivative } else { &w.values };
        let mut m = Mat2::zeros();
        for i in 0..2 {
            let g: Vec<C64> = left[i][w.row]
                .iter()
                .zip(vals)
                .map(|(a, b)| a * b)
                .collect();
            m[(i, w.col)] = self.cauchy.moment(&g);
        }
        m
    }

    /// Solves for μ and records `m⁽¹⁾`.
    pub fn solve_mu(&self, f: &JumpFactorization) -> Result<RhpSolution> {
        let n = f.zgrid.len();
        let one = vec![C64::new(1.0, 0.0); n];
        let zero = vec![C64::new(0.0, 0.0); n];
        let rhs = [[one.clone(), zero.clone()], [zero, one]];
        let (mu, iterations, solver) = self.solve_rows(f, rhs.clone())?;
        let residual = self
            .residual_of(f, &mu[0], &rhs[0])
            .max(self.residual_of(f, &mu[1], &rhs[1]));
        if !(residual < self.config.tolerance) {
            return Err(WkiError::RhpUnsolved(format!(
                "residual {residual:.3e} above tolerance {:.1e}",
                self.config.tolerance
            )));
        }
        let m1 = self.m1_moment(f, &mu);
        Ok(RhpSolution {
            mu,
            dmu: None,
            m1,
            dx_m1: None,
            residual,
            dmu_residual: None,
            iterations,
            solver,
        })
    }

    /// `m⁽¹⁾ = -(1/2πi)∫ μ(w₊ + w₋) dz`, plus `δ⁽¹⁾σ₃` for the conjugated kind.
    pub fn m1_moment(&self, f: &JumpFactorization, mu: &Field) -> Mat2 {
        let mut m = self.moment_of_product(mu, &f.w_plus, false)
            + self.moment_of_product(mu, &f.w_minus, false);
        m[(0, 0)] += f.delta_moment;
        m[(1, 1)] -= f.delta_moment;
        m
    }

    /// Solves `(I - C_w)∂μ = C_{∂w}μ` and records `∂_{x_H}m⁽¹⁾`.
    pub fn solve_dmu(&self, f: &JumpFactorization, sol: &mut RhpSolution) -> Result<()> {
        let rhs = [
            self.apply_cw(f, &sol.mu[0], true),
            self.apply_cw(f, &sol.mu[1], true),
        ];
        let (dmu, _, _) = self.solve_rows(f, rhs.clone())?;
        let residual = self
            .residual_of(f, &dmu[0], &rhs[0])
            .max(self.residual_of(f, &dmu[1], &rhs[1]));
        if !(residual < self.config.tolerance) {
            return Err(WkiError::RhpUnsolved(format!(
                "derivative residual {residual:.3e} above tolerance {:.1e}",
                self.config.tolerance
            )));
        }
        sol.dx_m1 = Some(self.dx_m1(f, &sol.mu, &dmu));
        sol.dmu = Some(dmu);
        sol.dmu_residual = Some(residual);
        Ok(())
    }

    /// `∂m⁽¹⁾ = -(1/2πi)∫ [∂μ(w₊ + w₋) + μ(∂w₊ + ∂w₋)] dz`
    pub fn dx_m1(&self, f: &JumpFactorization, mu: &Field, dmu: &Field) -> Mat2 {
        self.moment_of_product(dmu, &f.w_plus, false)
            + self.moment_of_product(dmu, &f.w_minus, false)
            + self.moment_of_product(mu, &f.w_plus, true)
            + self.moment_of_product(mu, &f.w_minus, true)
    }

    /// μ, ∂μ and both moments in one call.
    pub fn solve(&self, f: &JumpFactorization) -> Result<RhpSolution> {
        let mut sol = self.solve_mu(f)?;
        self.solve_dmu(f, &mut sol)?;
        Ok(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize) -> ScatteringData {
        let grid = SpectralGrid::new(n, 0.5, 0.0).unwrap();
        let mut sd = ScatteringData::zero(grid);
        for k in 0..n {
            let z = grid.coordinate(k);
            // smooth, decaying at both ends, r(z) = O(1/z) at infinity
            sd.r[k] = C64::new(0.3, 0.1) * z / (z * z + 1.0) * (-1.0 / (z * z)).exp();
        }
        sd
    }

    #[test]
    fn phase_examples() {
        assert_eq!(phase(1.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(phase(2.0, 4.0, 1.0).unwrap(), 2.5);
        assert_eq!(phase(-1.0, 1.0, 0.0).unwrap(), -1.0);
        assert!(phase(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_data_gives_identity() {
        let grid = SpectralGrid::new(64, 1.0, 0.1).unwrap();
        let sd = ScatteringData::zero(grid);
        let solver = RhpSolver::new(grid, SolverConfig::default());
        let d = delta_function(&sd.r, solver.cauchy());
        assert!(d.plus.iter().all(|v| (v - 1.0).norm() < 1e-15));
        for kind in [
            FactorizationKind::Triangular,
            FactorizationKind::DeltaConjugated,
        ] {
            let f = build_factorization(&sd, Some(&d), 0.3, 0.2, kind).unwrap();
            assert!(f.w_plus.values.iter().all(|v| v.norm() == 0.0));
            let sol = solver.solve(&f).unwrap();
            assert_eq!(sol.iterations, 1);
            assert!(sol.m1.norm() == 0.0);
            assert!(sol.dx_m1.unwrap().norm() == 0.0);
        }
    }

    #[test]
    fn triangular_entries() {
        let sd = synthetic(64);
        let f = build_factorization(&sd, None, 0.7, 0.1, FactorizationKind::Triangular).unwrap();
        for k in 0..64 {
            let e = C64::from_polar(1.0, 2.0 * f.theta[k]);
            assert!((f.w_plus.matrix(k)[(1, 0)] - sd.r[k] * e).norm() < 1e-15);
            assert!((f.w_minus.matrix(k)[(0, 1)] - sd.r[k].conj() * e.conj()).norm() < 1e-15);
            assert_eq!(f.w_plus.matrix(k)[(0, 1)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn delta_relations() {
        let sd = synthetic(256);
        let c = CauchyOperator::new(sd.zgrid);
        let d = delta_function(&sd.r, &c);
        assert!(d.boundary_defect < 1e-12);
        assert!(d.unimodularity_defect < 1e-8);
    }

    #[test]
    fn neumann_matches_dense() {
        let sd = synthetic(128);
        let neu = RhpSolver::new(sd.zgrid, SolverConfig::default());
        let den = RhpSolver::new(
            sd.zgrid,
            SolverConfig {
                force: Some(SolverKind::Dense),
                ..Default::default()
            },
        );
        let f = build_factorization(&sd, None, -0.4, 0.1, FactorizationKind::Triangular).unwrap();
        let a = neu.solve(&f).unwrap();
        let b = den.solve(&f).unwrap();
        assert_eq!(b.solver, SolverKind::Dense);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..128 {
                    assert!((a.mu[i][j][k] - b.mu[i][j][k]).norm() < 1e-8);
                }
            }
        }
        assert!((a.m1 - b.m1).norm() < 1e-8);
    }

    #[test]
    fn factorizations_agree() {
        let sd = synthetic(512);
        let solver = RhpSolver::new(sd.zgrid, SolverConfig::default());
        let d = delta_function(&sd.r, solver.cauchy());
        for &xh in &[-0.5, 0.0, 0.8] {
            let a = solver
                .solve(
                    &build_factorization(&sd, Some(&d), xh, 0.0, FactorizationKind::Triangular)
                        .unwrap(),
                )
                .unwrap();
            let b = solver
                .solve(
                    &build_factorization(
                        &sd,
                        Some(&d),
                        xh,
                        0.0,
                        FactorizationKind::DeltaConjugated,
                    )
                    .unwrap(),
                )
                .unwrap();
            assert!(
                (a.m1[(0, 0)] - b.m1[(0, 0)]).norm() < 1e-8,
                "{} {}",
                a.m1,
                b.m1
            );
            assert!((a.dx_m1.unwrap()[(0, 1)] - b.dx_m1.unwrap()[(0, 1)]).norm() < 1e-8);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let sd = synthetic(256);
        let solver = RhpSolver::new(sd.zgrid, SolverConfig::default());
        let h = 1e-3;
        let m = |x: f64| {
            solver
                .solve(
                    &build_factorization(&sd, None, x, 0.2, FactorizationKind::Triangular).unwrap(),
                )
                .unwrap()
        };
        let s = m(-0.3);
        let fd = (m(-0.3 + h).m1 - m(-0.3 - h).m1) / C64::new(2.0 * h, 0.0);
        assert!((fd - s.dx_m1.unwrap()).norm() < 1e-5);
    }
}
