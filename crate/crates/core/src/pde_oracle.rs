//! Direct pseudo-spectral integrator for `i q_t + (q/⟨q⟩)_xx = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkiError};
use crate::lattice::{Grid, GridFunction, SpatialGrid, SpectralCalculus, C64, I};
use crate::lax::{bracket, conserved_e1, DerivativeKind, Potential};

fn rhs_into(calc: &SpectralCalculus, q: &[C64], out: &mut [C64]) {
    for (o, &v) in out.iter_mut().zip(q) {
        *o = v / bracket(v);
    }
    calc.d2_in_place(out);
    for o in out.iter_mut() {
        *o *= I;
    }
}

/// `i·∂²(q/⟨q⟩)`.
pub fn wki_rhs(p: &Potential) -> GridFunction<SpatialGrid> {
    let mut out = vec![C64::new(0.0, 0.0); p.q.len()];
    rhs_into(&p.grid.calculus(), &p.q, &mut out);
    GridFunction {
        grid: p.grid,
        values: out,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Upper bound on `dt/h²`.
    pub cfl: f64,
    pub blowup_guard: f64,
    /// Times at which to keep the state; the final time is always kept.
    pub snapshot_times: Vec<f64>,
    pub edge_tolerance: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            cfl: 0.2,
            blowup_guard: 1e3,
            snapshot_times: Vec::new(),
            edge_tolerance: 1e-8,
        }
    }
}

/// Largest admissible step on `grid`.
pub fn max_time_step(grid: SpatialGrid, cfl: f64) -> f64 {
    let h = grid.spacing();
    cfl * h * h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub q: Vec<C64>,
    pub e1: f64,
    /// `|E1(t) - E1(0)|`.
    pub e1_drift: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub initial: Potential,
    pub t_final: f64,
    /// Requested step; actual steps are shortened to land on snapshot times.
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub max_e1_drift: f64,
}

impl EvolutionRun {
    pub fn final_state(&self) -> Result<Potential> {
        let last = self
            .snapshots
            .last()
            .expect("final snapshot always present");
        Potential::from_samples(self.initial.grid, last.q.clone(), DerivativeKind::Spectral)
    }

    /// CSV with columns `t,x,q_re,q_im,q_abs`, one block per snapshot.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,q_re,q_im,q_abs")?;
        let g = self.initial.grid;
        for s in &self.snapshots {
            for (k, q) in s.q.iter().enumerate() {
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    s.time,
                    g.coordinate(k),
                    q.re,
                    q.im,
                    q.norm()
                )?;
            }
        }
        Ok(())
    }
}

struct Stepper {
    calc: SpectralCalculus,
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

impl Stepper {
    fn new(grid: SpatialGrid) -> Self {
        let n = grid.len();
        let z = vec![C64::new(0.0, 0.0); n];
        Stepper {
            calc: grid.calculus(),
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            stage: z,
        }
    }

    fn step(&mut self, q: &mut [C64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        rhs_into(&self.calc, q, k1);
        for j in 0..q.len() {
            self.stage[j] = q[j] + 0.5 * dt * k1[j];
        }
        rhs_into(&self.calc, &self.stage, k2);
        for j in 0..q.len() {
            self.stage[j] = q[j] + 0.5 * dt * k2[j];
        }
        rhs_into(&self.calc, &self.stage, k3);
        for j in 0..q.len() {
            self.stage[j] = q[j] + dt * k3[j];
        }
        rhs_into(&self.calc, &self.stage, k4);
        for j in 0..q.len() {
            q[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
}

/// Classical RK4 from `0` to `t_final` with steps no longer than `dt`.
pub fn evolve(q0: &Potential, t_final: f64, dt: f64, cfg: &EvolveConfig) -> Result<EvolutionRun> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(WkiError::InvalidArgument(format!(
            "final time must be finite and nonnegative, got {t_final}"
        )));
    }
    let limit = max_time_step(q0.grid, cfg.cfl);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(WkiError::InvalidArgument(format!(
            "time step {dt} outside (0, {limit}] for cfl {}",
            cfg.cfl
        )));
    }
    if q0.edge_magnitude() > cfg.edge_tolerance {
        log::warn!(
            "initial data is {:.3e} at the domain ends",
            q0.edge_magnitude()
        );
    }
    let mut stops: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t_final)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    stops.push(t_final);

    let e1_0 = conserved_e1(q0);
    let mut q = q0.q.clone();
    let mut stepper = Stepper::new(q0.grid);
    let mut time = 0.0;
    let mut steps = 0;
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut max_drift: f64 = 0.0;
    for &stop in &stops {
        let span = stop - time;
        let count = (span / dt).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        let step = if count > 0 { span / count as f64 } else { 0.0 };
        for j in 0..count {
            stepper.step(&mut q, step);
            steps += 1;
            let now = time + (j + 1) as f64 * step;
            guard(&q, q0.grid, now, cfg.blowup_guard)?;
        }
        time = stop;
        let e1 = e1_of(&q, q0.grid);
        let drift = (e1 - e1_0).abs();
        max_drift = max_drift.max(drift);
        snapshots.push(Snapshot {
            time,
            q: q.clone(),
            e1,
            e1_drift: drift,
        });
    }
    Ok(EvolutionRun {
        initial: q0.clone(),
        t_final,
        dt,
        steps,
        snapshots,
        max_e1_drift: max_drift,
    })
}

fn e1_of(q: &[C64], grid: SpatialGrid) -> f64 {
    grid.spacing() * q.iter().map(|&v| bracket(v) - 1.0).sum::<f64>()
}

fn guard(q: &[C64], grid: SpatialGrid, time: f64, limit: f64) -> Result<()> {
    let (k, a) = q
        .iter()
        .map(|v| v.norm())
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (k, a)| if !(a <= best.1) { (k, a) } else { best },
        );
    if !(a <= limit) {
        return Err(WkiError::EvolutionDiverged {
            time,
            x: grid.coordinate(k),
            value: a,
        });
    }
    Ok(())
}
