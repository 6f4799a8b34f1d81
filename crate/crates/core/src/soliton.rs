//! Closed-form one-soliton of the WKI equation, including the bursting case
//! `|ξ| = |η|`, with spectral parameter `λ₁ = ξ + iη`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkiError};
use crate::lattice::{C64, I};
use crate::lax::bracket;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub xi: f64,
    pub eta: f64,
}

impl SolitonParams {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        if !(xi.is_finite() && eta.is_finite() && eta > 0.0) {
            return Err(WkiError::InvalidArgument(format!(
                "soliton needs finite xi and eta > 0, got ({xi}, {eta})"
            )));
        }
        Ok(SolitonParams { xi, eta })
    }

    /// `ξ² + η²`
    pub fn modulus_sq(&self) -> f64 {
        self.xi * self.xi + self.eta * self.eta
    }

    /// `α` with `tan α = η/ξ`.
    pub fn alpha(&self) -> f64 {
        self.eta.atan2(self.xi)
    }

    pub fn is_bursting(&self) -> bool {
        (self.xi.abs() - self.eta).abs() <= 1e-14 * self.eta
    }

    /// Total phase shift `2η/(ξ² + η²)`, the limit of ε at `x → +∞`.
    pub fn epsilon_max(&self) -> f64 {
        2.0 * self.eta / self.modulus_sq()
    }

    /// Value of `*` at which `|q|` is unbounded, if any (`η ≥ |ξ|`).
    pub fn singular_star(&self) -> Option<f64> {
        let c = 2.0 * self.eta * self.eta / self.modulus_sq();
        (c >= 1.0).then(|| c.sqrt().acosh())
    }

    /// `* = 2η·x_H - 8ξη·t`
    pub fn star(&self, x_h: f64, t: f64) -> f64 {
        2.0 * self.eta * x_h - 8.0 * self.xi * self.eta * t
    }

    /// Carrier `exp(-i(-2ξ·x_H + 4(ξ² - η²)t))`.
    fn carrier(&self, x_h: f64, t: f64) -> C64 {
        let phase = -(-2.0 * self.xi * x_h + 4.0 * (self.xi * self.xi - self.eta * self.eta) * t);
        C64::from_polar(1.0, phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolitonValue {
    Finite(C64),
    /// The evaluation point sits on the singularity of an unbounded soliton.
    AtSingularity,
}

impl SolitonValue {
    pub fn finite(self) -> Option<C64> {
        match self {
            SolitonValue::Finite(v) => Some(v),
            SolitonValue::AtSingularity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonSample {
    pub x: f64,
    pub t: f64,
    pub epsilon: f64,
    pub x_h: f64,
    pub star: f64,
    pub q: SolitonValue,
}

/// Solves `ε = (η/(ξ² + η²))·[tanh(2η(x - 4ξt + ε)) + 1]`.
pub fn soliton_epsilon(x: f64, t: f64, p: &SolitonParams) -> Result<f64> {
    let a = p.eta / p.modulus_sq();
    let shift = x - 4.0 * p.xi * t;
    let f = |e: f64| e - a * ((2.0 * p.eta * (shift + e)).tanh() + 1.0);
    let (mut lo, mut hi) = (0.0, 2.0 * a);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(WkiError::Internal(format!(
            "epsilon bracket failed at x = {x}: f(0) = {flo}, f(max) = {fhi}"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut e = 0.5 * (lo + hi);
    let th = (2.0 * p.eta * (shift + e)).tanh();
    let slope = 1.0 - a * 2.0 * p.eta * (1.0 - th * th);
    if slope > 1e-3 {
        let next = e - f(e) / slope;
        if next >= lo && next <= hi {
            e = next;
        }
    }
    Ok(e)
}

/// `q_H` as a function of the hodograph coordinate.
pub fn soliton_qh(x_h: f64, t: f64, p: &SolitonParams) -> SolitonValue {
    let s = p.star(x_h, t);
    if let Some(s0) = p.singular_star() {
        if (s.abs() - s0).abs() <= 1e-12 {
            return SolitonValue::AtSingularity;
        }
    }
    let d = p.modulus_sq();
    let c = 2.0 * p.eta * p.eta / d;
    let sech = 1.0 / s.cosh();
    let (sin_a, cos_a) = p.alpha().sin_cos();
    // cosh(* + iα)/(cosh²* - c) written in sech form so large |*| cannot overflow
    let shape = C64::new(cos_a, s.tanh() * sin_a) * sech / (1.0 - c * sech * sech);
    SolitonValue::Finite(2.0 * I * (p.eta / d.sqrt()) * p.carrier(x_h, t) * shape)
}

/// Closed-form `|q_H|²` at a given `*`.
pub fn soliton_qh_abs_sq(star: f64, p: &SolitonParams) -> f64 {
    let e2 = p.eta * p.eta / p.modulus_sq();
    let sech2 = 1.0 / (star.cosh() * star.cosh());
    // (cosh² - e2)/(cosh² - 2e2)² = sech²(1 - e2·sech²)/(1 - 2e2·sech²)²
    4.0 * e2 * sech2 * (1.0 - e2 * sech2) / (1.0 - 2.0 * e2 * sech2).powi(2)
}

pub fn soliton_sample(x: f64, t: f64, p: &SolitonParams) -> Result<SolitonSample> {
    let epsilon = soliton_epsilon(x, t, p)?;
    let x_h = x + epsilon;
    Ok(SolitonSample {
        x,
        t,
        epsilon,
        x_h,
        star: p.star(x_h, t),
        q: soliton_qh(x_h, t, p),
    })
}

pub fn soliton_q(x: f64, t: f64, p: &SolitonParams) -> Result<SolitonValue> {
    Ok(soliton_sample(x, t, p)?.q)
}

/// `(m⁽¹⁾₁₂, m⁽¹⁾₁₁)` of the one-soliton RHP.
pub fn soliton_m1_entries(x_h: f64, t: f64, p: &SolitonParams) -> (C64, C64) {
    let s = p.star(x_h, t);
    let a = p.eta / p.modulus_sq();
    let m12 = -a * p.carrier(x_h, t) / s.cosh();
    let m11 = I * a * (1.0 + s.tanh());
    (m12, m11)
}

/// `∂_{x_H} m⁽¹⁾₁₂ = (2η/(ξ² + η²))·carrier·[η·tanh(*) - iξ]·sech(*)`.
pub fn soliton_dm12(x_h: f64, t: f64, p: &SolitonParams) -> C64 {
    let s = p.star(x_h, t);
    let a = 2.0 * p.eta / p.modulus_sq();
    a * p.carrier(x_h, t) * C64::new(p.eta * s.tanh(), -p.xi) / s.cosh()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub spacings: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `residuals[k] / residuals[k + 1]`
    pub ratios: Vec<f64>,
}

/// Max of `|i q_t + (q/⟨q⟩)_xx|` over the points `x_j` by centered
/// differences with step `h` in x and `dt` in t, for `levels` successive
/// halvings of both steps.
pub fn soliton_pde_residual(
    p: &SolitonParams,
    points: &[f64],
    t: f64,
    h: f64,
    dt: f64,
    levels: usize,
) -> Result<ResidualReport> {
    let q = |x: f64, t: f64| -> Result<C64> {
        soliton_q(x, t, p)?.finite().ok_or_else(|| {
            WkiError::InvalidArgument(format!(
                "residual stencil touches the singularity at x = {x}"
            ))
        })
    };
    let flux = |x: f64, t: f64| -> Result<C64> {
        let v = q(x, t)?;
        Ok(v / bracket(v))
    };
    let mut spacings = Vec::new();
    let mut residuals = Vec::new();
    for level in 0..levels {
        let f = 0.5f64.powi(level as i32);
        let (hx, ht) = (h * f, dt * f);
        let mut worst: f64 = 0.0;
        for &x in points {
            let qt = (q(x, t + ht)? - q(x, t - ht)?) / (2.0 * ht);
            let fxx = (flux(x + hx, t)? - 2.0 * flux(x, t)? + flux(x - hx, t)?) / (hx * hx);
            worst = worst.max((I * qt + fxx).norm());
        }
        spacings.push(hx);
        residuals.push(worst);
    }
    let ratios = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ResidualReport {
        spacings,
        residuals,
        ratios,
    })
}
