//! Browser bindings for three interactive operations: the closed-form
//! one-soliton, the forward transform of a chosen potential and a full
//! forward/inverse round trip.
//!
//! Every exported function returns a JSON document. Failures come back as
//! `{"error": kind, "message": text}` instead of throwing.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wki_core::direct_scattering::{reflection_coefficient, ForwardConfig};
use wki_core::lattice::{make_spatial_grid, Grid, SpectralGrid};
use wki_core::lax::{conserved_e1, DerivativeKind, Potential, Profile};
use wki_core::reconstruction::{inverse_transform, ReconstructionConfig};
use wki_core::soliton::{soliton_q, SolitonParams};
use wki_core::WkiError;

const HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Serialize)]
pub struct SolitonView {
    pub x: Vec<f64>,
    /// `|q|`, `null` at singular samples.
    pub q_abs: Vec<Option<f64>>,
    pub bursting: bool,
    pub epsilon_max: f64,
}

#[derive(Debug, Serialize)]
pub struct ForwardView {
    pub z: Vec<f64>,
    pub r_abs: Vec<f64>,
    pub min_abs_a: f64,
    pub winding: i64,
    pub max_unitarity_defect: f64,
    pub e1: f64,
}

#[derive(Debug, Serialize)]
pub struct RoundtripView {
    pub x: Vec<f64>,
    pub q_re: Vec<f64>,
    pub recon_re: Vec<f64>,
    pub sup_error: f64,
    pub route_gap: f64,
    pub epsilon_infinity: f64,
    pub e1: f64,
}

fn profile(family: &str, amplitude: f64, width: f64) -> Result<Profile, WkiError> {
    match family {
        "gaussian" => Ok(Profile::Gaussian {
            amplitude,
            width,
            center: 0.0,
            wavenumber: 0.0,
        }),
        "sech" => Ok(Profile::Sech { amplitude, width }),
        "box" => Ok(Profile::Box {
            amplitude,
            half_width: width,
        }),
        other => Err(WkiError::InvalidArgument(format!(
            "unknown family `{other}`"
        ))),
    }
}

fn potential(
    family: &str,
    amplitude: f64,
    width: f64,
    points: usize,
) -> Result<Potential, WkiError> {
    Potential::from_profile(
        make_spatial_grid(HALF_WIDTH, points)?,
        profile(family, amplitude, width)?,
        DerivativeKind::Spectral,
    )
}

pub fn soliton_view(xi: f64, eta: f64, t: f64, points: usize) -> Result<SolitonView, WkiError> {
    let p = SolitonParams::new(xi, eta)?;
    let grid = make_spatial_grid(HALF_WIDTH, points)?;
    let x = grid.coordinates();
    let q_abs = x
        .iter()
        .map(|&x| soliton_q(x, t, &p).map(|v| v.finite().map(|q| q.norm())))
        .collect::<Result<_, _>>()?;
    Ok(SolitonView {
        x,
        q_abs,
        bursting: p.is_bursting(),
        epsilon_max: p.epsilon_max(),
    })
}

pub fn forward_view(
    family: &str,
    amplitude: f64,
    width: f64,
    points: usize,
) -> Result<ForwardView, WkiError> {
    let p = potential(family, amplitude, width, points)?;
    let sd = reflection_coefficient(
        &p,
        SpectralGrid::new(points, 0.5, 0.125)?,
        &ForwardConfig::default(),
    )?;
    Ok(ForwardView {
        z: sd.zgrid.coordinates(),
        r_abs: sd.r.iter().map(|v| v.norm()).collect(),
        min_abs_a: sd.diagnostics.min_abs_a,
        winding: sd.diagnostics.winding,
        max_unitarity_defect: sd.diagnostics.max_unitarity_defect,
        e1: conserved_e1(&p),
    })
}

pub fn roundtrip_view(
    family: &str,
    amplitude: f64,
    width: f64,
    points: usize,
) -> Result<RoundtripView, WkiError> {
    let p = potential(family, amplitude, width, points)?;
    let sd = reflection_coefficient(
        &p,
        SpectralGrid::new(points, 0.5, 0.125)?,
        &ForwardConfig::default(),
    )?;
    let rec = inverse_transform(&sd, 0.0, p.grid, &ReconstructionConfig::default())?;
    let sup_error = rec
        .potential
        .q
        .iter()
        .zip(&p.q)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(RoundtripView {
        x: p.grid.coordinates(),
        q_re: p.q.iter().map(|v| v.re).collect(),
        recon_re: rec.potential.q.iter().map(|v| v.re).collect(),
        sup_error,
        route_gap: rec.diagnostics.route_gap,
        epsilon_infinity: rec.diagnostics.epsilon_infinity,
        e1: conserved_e1(&p),
    })
}

fn to_json<T: Serialize>(r: Result<T, WkiError>) -> String {
    let value = match r {
        Ok(v) => serde_json::to_value(v),
        Err(e) => Ok(serde_json::json!({ "error": e.kind(), "message": e.to_string() })),
    };
    value
        .map(|v| v.to_string())
        .unwrap_or_else(|e| format!("{{\"error\":\"internal\",\"message\":\"{e}\"}}"))
}

/// `|q(x, t)|` of the one-soliton with `λ₁ = ξ + iη` on `[-20, 20)`.
#[wasm_bindgen]
pub fn soliton(xi: f64, eta: f64, t: f64, points: usize) -> String {
    to_json(soliton_view(xi, eta, t, points))
}

/// `|r(z)|` and the `a`-diagnostics of a `gaussian`, `sech` or `box` potential.
#[wasm_bindgen]
pub fn forward(family: &str, amplitude: f64, width: f64, points: usize) -> String {
    to_json(forward_view(family, amplitude, width, points))
}

/// Forward transform followed by reconstruction at `t = 0`.
#[wasm_bindgen]
pub fn roundtrip(family: &str, amplitude: f64, width: f64, points: usize) -> String {
    to_json(roundtrip_view(family, amplitude, width, points))
}
