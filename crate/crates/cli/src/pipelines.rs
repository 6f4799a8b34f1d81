use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use wki_core::direct_scattering::{
    evolve_reflection, lambda_scan, reflection_coefficient, ScatteringData,
};
use wki_core::lattice::{make_spatial_grid, Grid, GridFunction, SpatialGrid, SpectralGrid, C64};
use wki_core::lax::{akns_potentials, conserved_e1, conserved_e2, DerivativeKind, Potential};
use wki_core::pde_oracle::{evolve, max_time_step, EvolveConfig, Snapshot};
use wki_core::reconstruction::{inverse_transform, ReconstructionResult};
use wki_core::soliton::{soliton_q, soliton_qh_abs_sq, SolitonParams, SolitonValue};
use wki_core::WkiError;

use crate::config::{Pipeline, PotentialSpec, RunConfig};
use crate::error::CliError;

/// Output directory that remembers what was written to it.
pub struct Output {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

pub fn spatial_grid(cfg: &RunConfig) -> Result<SpatialGrid, CliError> {
    Ok(make_spatial_grid(cfg.grid.half_width, cfg.grid.points)?)
}

pub fn spectral_grid(cfg: &RunConfig) -> Result<SpectralGrid, CliError> {
    Ok(SpectralGrid::new(
        cfg.spectral.points,
        cfg.spectral.scale,
        cfg.spectral.z_min,
    )?)
}

/// Reads the leading columns of a CSV file. Each expected name may list
/// accepted spellings separated by `|`.
fn read_columns(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.len() < expected.len()
        || headers
            .iter()
            .zip(expected)
            .any(|(h, e)| !e.split('|').any(|n| n == h))
    {
        return Err(CliError::Input(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            expected.join(","),
            headers.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let row = (0..expected.len())
            .map(|k| {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Input(format!("{}: `{}`: {e}", path.display(), &rec[k])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn match_coordinates(
    path: &Path,
    found: &[f64],
    grid: &impl Grid,
    scale: f64,
) -> Result<(), CliError> {
    if found.len() != grid.len() {
        return Err(CliError::Input(format!(
            "{}: {} rows for a grid of {} points",
            path.display(),
            found.len(),
            grid.len()
        )));
    }
    for (k, &x) in found.iter().enumerate() {
        let want = grid.coordinate(k);
        if (x - want).abs() > 1e-9 * scale.max(want.abs()) {
            return Err(CliError::Input(format!(
                "{}: row {k} has coordinate {x}, the configured grid has {want}",
                path.display()
            )));
        }
    }
    Ok(())
}

pub fn potential(cfg: &RunConfig) -> Result<Potential, CliError> {
    let grid = spatial_grid(cfg)?;
    match &cfg.potential {
        PotentialSpec::Family(profile) => Ok(Potential::from_profile(
            grid,
            profile.clone(),
            DerivativeKind::Spectral,
        )?),
        PotentialSpec::File { file } => {
            let rows = read_columns(file, &["coordinate|x", "re", "im"])?;
            let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            match_coordinates(file, &xs, &grid, grid.half_width())?;
            let q = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
            Ok(Potential::from_samples(grid, q, DerivativeKind::Spectral)?)
        }
    }
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn l2_diff(a: &[C64], b: &[C64], h: f64) -> f64 {
    (h * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>())
    .sqrt()
}

/// Relative `L²(dz)` distance between two reflection coefficients.
fn reflection_gap(a: &ScatteringData, b: &ScatteringData) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..a.r.len() {
        let w = a.zgrid.weight(k);
        num += w * (a.r[k] - b.r[k]).norm_sqr();
        den += w * b.r[k].norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn write_potential(out: &mut Output, name: &str, p: &Potential) -> Result<(), CliError> {
    let f = GridFunction::new(p.grid, p.q.clone())?;
    out.write(name, |w| f.write_csv(w))
}

fn write_reconstruction(
    out: &mut Output,
    suffix: &str,
    rec: &ReconstructionResult,
) -> Result<(), CliError> {
    out.write(&format!("q{suffix}.csv"), |w| rec.write_csv(w))?;
    out.write(&format!("hodograph{suffix}.csv"), |w| {
        rec.write_hodograph_csv(w)
    })?;
    out.write(&format!("cells{suffix}.csv"), |w| rec.write_cell_log(w))
}

fn e2_record(p: &Potential, cfg: &RunConfig) -> Value {
    match conserved_e2(p, &cfg.e2) {
        Ok(r) => json!(r),
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

pub fn run(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    match cfg.pipeline {
        Some(Pipeline::Forward) => forward(cfg, out),
        Some(Pipeline::Evolve) => evolve_pipeline(cfg, out),
        Some(Pipeline::Inverse) => inverse(cfg, out),
        Some(Pipeline::Roundtrip) => roundtrip(cfg, out),
        Some(Pipeline::ComparePde) => compare_pde(cfg, out),
        Some(Pipeline::Soliton) => soliton(cfg, out),
        None => Err(CliError::Input("no pipeline selected".into())),
    }
}

fn forward(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let p = potential(cfg)?;
    let zg = spectral_grid(cfg)?;
    write_potential(out, "potential.csv", &p)?;
    if cfg.dump.akns {
        let fields = akns_potentials(&p);
        out.write("akns.csv", |w| fields.write_csv(w))?;
    }
    if cfg.dump.lambda {
        let n = cfg.dump.lambda_points.max(2);
        let lambdas: Vec<f64> = (0..n)
            .map(|k| -cfg.dump.lambda_max + 2.0 * cfg.dump.lambda_max * k as f64 / (n - 1) as f64)
            .collect();
        let ts = lambda_scan(&p, &lambdas, &cfg.forward)?;
        out.write("lambda.csv", |w| {
            writeln!(w, "lambda,a_re,a_im,b_re,b_im,unitarity_defect,det_defect")?;
            for t in &ts {
                writeln!(
                    w,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e},{:.6e}",
                    t.lambda, t.a.re, t.a.im, t.b.re, t.b.im, t.unitarity_defect, t.det_defect
                )?;
            }
            Ok(())
        })?;
    }
    let sd = reflection_coefficient(&p, zg, &cfg.forward)?;
    out.write("r.csv", |w| sd.write_csv(w))?;
    let report = json!({
        "spatial_grid": p.grid,
        "spectral_grid": zg,
        "time": sd.time,
        "potential": p.diagnostics,
        "e1": conserved_e1(&p),
        "scattering": sd.diagnostics,
    });
    out.json("scattering.json", &report)?;
    Ok(report)
}

fn time_step(cfg: &RunConfig, grid: SpatialGrid) -> f64 {
    if cfg.time.dt > 0.0 {
        cfg.time.dt
    } else {
        max_time_step(grid, cfg.time.cfl)
    }
}

/// Oracle snapshots at every requested time, including `t = 0`.
fn pde_snapshots(cfg: &RunConfig, p: &Potential) -> Result<(Vec<Snapshot>, Value), CliError> {
    let t_final = cfg.time.times.iter().copied().fold(0.0, f64::max);
    let ecfg = EvolveConfig {
        cfl: cfg.time.cfl,
        blowup_guard: cfg.time.blowup_guard,
        snapshot_times: cfg.time.times.clone(),
        edge_tolerance: cfg.forward.edge_tolerance,
    };
    let dt = time_step(cfg, p.grid);
    let run = evolve(p, t_final, dt, &ecfg)?;
    let e1 = conserved_e1(p);
    let mut snaps = Vec::new();
    let mut times = cfg.time.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for t in times {
        if t == 0.0 {
            snaps.push(Snapshot {
                time: 0.0,
                q: p.q.clone(),
                e1,
                e1_drift: 0.0,
            });
        } else if let Some(s) = run.snapshots.iter().find(|s| s.time == t) {
            snaps.push(s.clone());
        }
    }
    let summary = json!({
        "dt": dt,
        "steps": run.steps,
        "t_final": t_final,
        "max_e1_drift": run.max_e1_drift,
        "blowup_guard": cfg.time.blowup_guard,
        "guard_events": [],
    });
    Ok((snaps, summary))
}

fn evolve_pipeline(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let p = potential(cfg)?;
    write_potential(out, "potential.csv", &p)?;
    let (snaps, mut summary) = match pde_snapshots(cfg, &p) {
        Err(CliError::Core(WkiError::EvolutionDiverged { time, x, value })) => {
            let summary = json!({
                "dt": time_step(cfg, p.grid),
                "blowup_guard": cfg.time.blowup_guard,
                "guard_events": [{ "time": time, "x": x, "abs_q": value }],
                "snapshots": [],
            });
            out.json("summary.json", &summary)?;
            return Err(WkiError::EvolutionDiverged { time, x, value }.into());
        }
        other => other?,
    };
    out.write("snapshots.csv", |w| {
        writeln!(w, "t,x,q_re,q_im,q_abs")?;
        for s in &snaps {
            for (k, q) in s.q.iter().enumerate() {
                writeln!(
                    w,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    s.time,
                    p.grid.coordinate(k),
                    q.re,
                    q.im,
                    q.norm()
                )?;
            }
        }
        Ok(())
    })?;
    let mut records = Vec::new();
    for s in &snaps {
        let sp = Potential::from_samples(p.grid, s.q.clone(), DerivativeKind::Spectral)?;
        records.push(json!({
            "time": s.time,
            "e1": s.e1,
            "e1_drift": s.e1_drift,
            "e2": e2_record(&sp, cfg),
        }));
    }
    summary["snapshots"] = json!(records);
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn read_reflection(cfg: &RunConfig, zg: SpectralGrid) -> Result<ScatteringData, CliError> {
    let path = cfg.inverse.data.as_ref().ok_or_else(|| {
        CliError::Input("inverse needs inverse.data (or --data) pointing at an r.csv".into())
    })?;
    let rows = read_columns(path, &["z", "r_re", "r_im"])?;
    let zs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    match_coordinates(path, &zs, &zg, zg.scale())?;
    let r = rows.iter().map(|r| C64::new(r[1], r[2])).collect();
    Ok(ScatteringData::from_reflection(
        zg,
        r,
        cfg.inverse.data_time,
    )?)
}

fn inverse(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let zg = spectral_grid(cfg)?;
    let grid = spatial_grid(cfg)?;
    let sd = read_reflection(cfg, zg)?;
    let mut records = Vec::new();
    for (k, &t) in cfg.time.times.iter().enumerate() {
        let sd_t = evolve_reflection(&sd, t - sd.time);
        let rec = inverse_transform(&sd_t, t, grid, &cfg.reconstruction)?;
        let suffix = format!("_{k}");
        write_reconstruction(out, &suffix, &rec)?;
        records.push(json!({
            "t": t,
            "q": format!("q{suffix}.csv"),
            "diagnostics": rec.diagnostics,
        }));
    }
    let report = json!({ "spatial_grid": grid, "spectral_grid": zg, "reconstructions": records });
    out.json("reconstruction.json", &report)?;
    Ok(report)
}

struct RoundtripRun {
    sup_error: f64,
    l2_error: f64,
    report: Value,
}

fn roundtrip_once(cfg: &RunConfig, out: Option<&mut Output>) -> Result<RoundtripRun, CliError> {
    let p = potential(cfg)?;
    let zg = spectral_grid(cfg)?;
    let sd = reflection_coefficient(&p, zg, &cfg.forward)?;
    let rec = inverse_transform(&sd, 0.0, p.grid, &cfg.reconstruction)?;
    let sup_error = sup_diff(&rec.potential.q, &p.q);
    let l2_error = l2_diff(&rec.potential.q, &p.q, p.grid.spacing());
    let e1 = conserved_e1(&p);
    let d = rec.diagnostics;
    if let Some(out) = out {
        write_potential(out, "potential.csv", &p)?;
        out.write("r.csv", |w| sd.write_csv(w))?;
        write_reconstruction(out, "", &rec)?;
    }
    Ok(RoundtripRun {
        sup_error,
        l2_error,
        report: json!({
            "spatial_grid": p.grid,
            "spectral_grid": zg,
            "sup_error": sup_error,
            "l2_error": l2_error,
            "e1": e1,
            "epsilon_route_gap": d.route_gap,
            "epsilon_infinity_gap_m11": (d.epsilon_infinity - d.epsilon_infinity_m11).abs(),
            "epsilon_infinity_gap_e1": (d.epsilon_infinity - e1).abs(),
            "forward": sd.diagnostics,
            "reconstruction": d,
        }),
    })
}

fn doubled(cfg: &RunConfig) -> RunConfig {
    let mut fine = cfg.clone();
    fine.grid.points *= 2;
    fine.spectral.points *= 2;
    if fine.reconstruction.sweep_points > 0 {
        fine.reconstruction.sweep_points *= 2;
    }
    fine
}

fn roundtrip(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let base = roundtrip_once(cfg, Some(out))?;
    let mut report = base.report;
    if cfg.roundtrip.convergence {
        let fine = roundtrip_once(&doubled(cfg), None)?;
        report["convergence"] = json!({
            "doubled_sup_error": fine.sup_error,
            "doubled_l2_error": fine.l2_error,
            "sup_ratio": base.sup_error / fine.sup_error,
            "l2_ratio": base.l2_error / fine.l2_error,
        });
    }
    out.json("report.json", &report)?;
    Ok(report)
}

fn compare_pde(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let p = potential(cfg)?;
    let zg = spectral_grid(cfg)?;
    let sd = reflection_coefficient(&p, zg, &cfg.forward)?;
    let (snaps, pde_summary) = pde_snapshots(cfg, &p)?;
    let h = p.grid.spacing();
    let mut rows = Vec::new();
    for (k, s) in snaps.iter().enumerate() {
        let sd_t = evolve_reflection(&sd, s.time);
        let rec = inverse_transform(&sd_t, s.time, p.grid, &cfg.reconstruction)?;
        let pde = Potential::from_samples(p.grid, s.q.clone(), DerivativeKind::Spectral)?;
        let rescattered = reflection_coefficient(&pde, zg, &cfg.forward)?;
        let row = json!({
            "t": s.time,
            "sup_diff": sup_diff(&rec.potential.q, &s.q),
            "l2_diff": l2_diff(&rec.potential.q, &s.q, h),
            "r_rel_l2": reflection_gap(&rescattered, &sd_t),
            "e1_drift": s.e1_drift,
            "reconstruction": rec.diagnostics,
        });
        out.write(&format!("compare_{k}.csv"), |w| {
            writeln!(w, "x,ist_re,ist_im,pde_re,pde_im")?;
            for (j, (a, b)) in rec.potential.q.iter().zip(&s.q).enumerate() {
                writeln!(
                    w,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    p.grid.coordinate(j),
                    a.re,
                    a.im,
                    b.re,
                    b.im
                )?;
            }
            Ok(())
        })?;
        rows.push(row);
    }
    out.write("compare.csv", |w| {
        writeln!(w, "t,sup_diff,l2_diff,r_rel_l2,e1_drift")?;
        for r in &rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r["t"].as_f64().unwrap_or(f64::NAN),
                r["sup_diff"].as_f64().unwrap_or(f64::NAN),
                r["l2_diff"].as_f64().unwrap_or(f64::NAN),
                r["r_rel_l2"].as_f64().unwrap_or(f64::NAN),
                r["e1_drift"].as_f64().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    })?;
    let report = json!({ "forward": sd.diagnostics, "pde": pde_summary, "times": rows });
    out.json("compare.json", &report)?;
    Ok(report)
}

fn soliton(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sp = SolitonParams::new(cfg.soliton.xi, cfg.soliton.eta)?;
    let grid = spatial_grid(cfg)?;
    let t = cfg.soliton.t;
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        values.push(soliton_q(grid.coordinate(k), t, &sp)?);
    }
    out.write("soliton.csv", |w| {
        writeln!(w, "x,q_abs,q_re,q_im")?;
        for (k, v) in values.iter().enumerate() {
            let x = grid.coordinate(k);
            match v {
                SolitonValue::Finite(q) => {
                    writeln!(w, "{x:.17e},{:.17e},{:.17e},{:.17e}", q.norm(), q.re, q.im)?
                }
                SolitonValue::AtSingularity => writeln!(w, "{x:.17e},inf,nan,nan")?,
            }
        }
        Ok(())
    })?;
    let peak_sampled = values
        .iter()
        .filter_map(|v| v.finite())
        .map(|q| q.norm())
        .fold(0.0, f64::max);
    let singular_points = values.iter().filter(|v| v.finite().is_none()).count();
    let report = json!({
        "xi": sp.xi,
        "eta": sp.eta,
        "t": t,
        "bursting": sp.is_bursting(),
        "epsilon_max": sp.epsilon_max(),
        "singular_star": sp.singular_star(),
        "peak_closed_form": (!sp.is_bursting()).then(|| soliton_qh_abs_sq(0.0, &sp).sqrt()),
        "peak_sampled": peak_sampled,
        "singular_points": singular_points,
    });
    out.json("soliton.json", &report)?;
    Ok(report)
}
