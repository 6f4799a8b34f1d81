//! Potentials, the AKNS gauge chain (G, Q, B, H, p) and the conserved
//! functionals E1, E2.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WkiError};
use crate::lattice::{cumulative_integral, Grid, GridFunction, Mat2, SpatialGrid, C64, I};
use crate::soliton::{soliton_q, SolitonParams, SolitonValue};

/// `⟨q⟩ = √(1 + |q|²)`.
pub fn bracket(q: C64) -> f64 {
    (1.0 + q.norm_sqr()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeKind {
    Spectral,
    CenteredDifference,
}

/// Named potential families that can be evaluated off the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `A·exp(-((x - c)/w)²)·e^{ikx}`
    Gaussian {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        wavenumber: f64,
    },
    /// `A·sech(x/w)`
    Sech {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// `A` on `|x| < a`, zero outside, `A/2` on the edges.
    Box {
        amplitude: f64,
        half_width: f64,
    },
    /// One-soliton snapshot.
    Soliton {
        xi: f64,
        eta: f64,
        #[serde(default)]
        t: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn eval(&self, x: f64) -> Result<C64> {
        Ok(match *self {
            Profile::Zero => C64::new(0.0, 0.0),
            Profile::Gaussian {
                amplitude,
                width,
                center,
                wavenumber,
            } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp() * C64::from_polar(1.0, wavenumber * x)
            }
            Profile::Sech { amplitude, width } => C64::new(amplitude / (x / width).cosh(), 0.0),
            Profile::Box {
                amplitude,
                half_width,
            } => {
                let a = x.abs();
                let v = if a < half_width {
                    amplitude
                } else if a == half_width {
                    0.5 * amplitude
                } else {
                    0.0
                };
                C64::new(v, 0.0)
            }
            Profile::Soliton { xi, eta, t } => {
                let p = SolitonParams::new(xi, eta)?;
                match soliton_q(x, t, &p)? {
                    SolitonValue::Finite(v) => v,
                    SolitonValue::AtSingularity => {
                        return Err(WkiError::InvalidArgument(format!(
                            "soliton profile is singular at x = {x}"
                        )))
                    }
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialDiagnostics {
    pub sup_norm: f64,
    pub l1_norm: f64,
    /// `‖⟨x⟩q‖_{L²}`
    pub weighted_l2: f64,
    /// `‖⟨x⟩q_x‖_{L²}`
    pub weighted_l2_derivative: f64,
    /// Sum of the two weighted norms, a surrogate for the X₁ norm.
    pub x1_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub grid: SpatialGrid,
    pub q: Vec<C64>,
    pub q_x: Vec<C64>,
    pub derivative: DerivativeKind,
    pub profile: Option<Profile>,
    pub diagnostics: PotentialDiagnostics,
}

impl Potential {
    pub fn from_samples(
        grid: SpatialGrid,
        q: Vec<C64>,
        derivative: DerivativeKind,
    ) -> Result<Self> {
        let f = GridFunction::new(grid, q)?;
        if !f.is_finite() {
            return Err(WkiError::InvalidArgument(
                "potential has non-finite samples".into(),
            ));
        }
        Ok(Self::assemble(grid, f.values, derivative, None))
    }

    pub fn from_profile(
        grid: SpatialGrid,
        profile: Profile,
        derivative: DerivativeKind,
    ) -> Result<Self> {
        let q = grid
            .coordinates()
            .into_iter()
            .map(|x| profile.eval(x))
            .collect::<Result<Vec<_>>>()?;
        if q.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(WkiError::InvalidArgument(
                "potential has non-finite samples".into(),
            ));
        }
        Ok(Self::assemble(grid, q, derivative, Some(profile)))
    }

    pub fn zero(grid: SpatialGrid) -> Self {
        Self::assemble(
            grid,
            vec![C64::new(0.0, 0.0); grid.len()],
            DerivativeKind::Spectral,
            Some(Profile::Zero),
        )
    }

    fn assemble(
        grid: SpatialGrid,
        q: Vec<C64>,
        derivative: DerivativeKind,
        profile: Option<Profile>,
    ) -> Self {
        let q_x = match derivative {
            DerivativeKind::Spectral => grid.calculus().d1(&q),
            DerivativeKind::CenteredDifference => centered_difference(&q, grid.spacing()),
        };
        let h = grid.spacing();
        let xs = grid.coordinates();
        let weighted = |v: &[C64]| {
            (v.iter()
                .zip(&xs)
                .map(|(v, x)| (1.0 + x * x) * v.norm_sqr())
                .sum::<f64>()
                * h)
                .sqrt()
        };
        let weighted_l2 = weighted(&q);
        let weighted_l2_derivative = weighted(&q_x);
        let diagnostics = PotentialDiagnostics {
            sup_norm: q.iter().map(|v| v.norm()).fold(0.0, f64::max),
            l1_norm: q.iter().map(|v| v.norm()).sum::<f64>() * h,
            weighted_l2,
            weighted_l2_derivative,
            x1_norm: weighted_l2 + weighted_l2_derivative,
        };
        Potential {
            grid,
            q,
            q_x,
            derivative,
            profile,
            diagnostics,
        }
    }

    /// Largest of `|q|` at the two ends of the grid.
    pub fn edge_magnitude(&self) -> f64 {
        let n = self.q.len();
        self.q[0].norm().max(self.q[n - 1].norm())
    }

    /// Values at the midpoints of `substeps` equal sub-cells per grid cell,
    /// i.e. at `x = -L + (j + 1/2)·h/substeps`.
    pub fn substep_midpoints(&self, substeps: usize) -> Result<Vec<C64>> {
        let n = self.grid.len();
        let h = self.grid.spacing() / substeps as f64;
        let x0 = -self.grid.half_width();
        if let Some(profile) = &self.profile {
            return (0..n * substeps)
                .map(|j| profile.eval(x0 + (j as f64 + 0.5) * h))
                .collect();
        }
        Ok(match self.derivative {
            DerivativeKind::Spectral => {
                let fine = self.grid.calculus().refine(&self.q, 2 * substeps);
                fine.into_iter().skip(1).step_by(2).collect()
            }
            DerivativeKind::CenteredDifference => (0..n * substeps)
                .map(|j| {
                    let u = (j as f64 + 0.5) / substeps as f64;
                    let k = u.floor() as usize;
                    let frac = u - k as f64;
                    self.q[k] * (1.0 - frac) + self.q[(k + 1) % n] * frac
                })
                .collect(),
        })
    }
}

fn centered_difference(q: &[C64], h: f64) -> Vec<C64> {
    let n = q.len();
    (0..n)
        .map(|k| (q[(k + 1) % n] - q[(k + n - 1) % n]) / (2.0 * h))
        .collect()
}

/// The eigenvector matrix `G` with `iσ₃ - M = G (i⟨q⟩σ₃) G⁻¹`, `det G = 1`.
pub fn eigvec_matrix(q: C64) -> Mat2 {
    let b = bracket(q);
    let s = 1.0 / (2.0 * (b * b + b)).sqrt();
    let d = C64::new(1.0 + b, 0.0) * s;
    Mat2::new(d, -I * q * s, -I * q.conj() * s, d)
}

/// Gauge-chain fields sampled on the spatial grid.
#[derive(Debug, Clone)]
pub struct AknsFields {
    pub grid: SpatialGrid,
    /// Off-diagonal entry of `-G⁻¹G_x`.
    pub q_gauge: Vec<C64>,
    /// Diagonal entry of `-G⁻¹G_x`, purely imaginary.
    pub b: Vec<C64>,
    /// `⟨q⟩ - 1`
    pub h: Vec<f64>,
    /// `x + ∫_{-L}^x H`
    pub p: Vec<f64>,
    pub g: Vec<Mat2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

impl AknsFields {
    /// `∫_{x₀}^x B dy` with `x₀` the chosen end of the grid; `g_{x₀}` is
    /// `exp(-σ₃·this)`.
    pub fn gauge_exponent(&self, from: End) -> Vec<C64> {
        let f = GridFunction {
            grid: self.grid,
            values: self.b.clone(),
        };
        let c = cumulative_integral(&f).values;
        match from {
            End::Left => c,
            End::Right => {
                let total = c[c.len() - 1]
                    + 0.5 * self.grid.spacing() * (self.b[0] + self.b[self.b.len() - 1]);
                c.into_iter().map(|v| v - total).collect()
            }
        }
    }

    /// `∫ B` over the truncated line.
    pub fn integral_b(&self) -> C64 {
        self.b.iter().sum::<C64>() * self.grid.spacing()
    }

    /// `∫ H` over the truncated line.
    pub fn integral_h(&self) -> f64 {
        self.h.iter().sum::<f64>() * self.grid.spacing()
    }

    /// CSV with columns `x,Q_re,Q_im,B_re,B_im,H,p`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,Q_re,Q_im,B_re,B_im,H,p")?;
        for k in 0..self.grid.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid.coordinate(k),
                self.q_gauge[k].re,
                self.q_gauge[k].im,
                self.b[k].re,
                self.b[k].im,
                self.h[k],
                self.p[k]
            )?;
        }
        Ok(())
    }
}

pub fn akns_potentials(p: &Potential) -> AknsFields {
    let n = p.grid.len();
    let mut q_gauge = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for k in 0..n {
        let (q, qx) = (p.q[k], p.q_x[k]);
        let br = bracket(q);
        let br_x = (q.conj() * qx).re / br;
        let denom = br * br + br;
        q_gauge.push(-I / (2.0 * denom) * (q * br_x - qx * (1.0 + br)));
        b.push(0.25 * (qx * q.conj() - q * qx.conj()) / denom);
        h.push(br - 1.0);
        g.push(eigvec_matrix(q));
    }
    let hf = GridFunction {
        grid: p.grid,
        values: h.iter().map(|&v| C64::new(v, 0.0)).collect(),
    };
    let p_vals = cumulative_integral(&hf)
        .values
        .iter()
        .zip(p.grid.coordinates())
        .map(|(c, x)| x + c.re)
        .collect();
    AknsFields {
        grid: p.grid,
        q_gauge,
        b,
        h,
        p: p_vals,
        g,
    }
}

/// `E1 = ∫(⟨q⟩ - 1) dx` by the periodic trapezoid rule.
pub fn conserved_e1(p: &Potential) -> f64 {
    p.q.iter().map(|&q| bracket(q) - 1.0).sum::<f64>() * p.grid.spacing()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2Config {
    /// Points with `|q|` below this are excluded.
    pub guard: f64,
    /// Largest tolerated excluded share of `∫|q|`.
    pub max_excluded_fraction: f64,
}

impl Default for E2Config {
    fn default() -> Self {
        E2Config {
            guard: 1e-8,
            max_excluded_fraction: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2Report {
    pub value: C64,
    /// `∫ ½(|q|²)_x/(1 + |q|²)` over the retained points.
    pub gradient_term: C64,
    /// `∫ (q_x/q)(1 - ⟨q⟩)/⟨q⟩` over the retained points.
    pub ratio_term: C64,
    pub excluded_points: usize,
    /// Excluded share of `∫|q|`; 1 for `q ≡ 0`.
    pub excluded_fraction: f64,
}

pub fn conserved_e2(p: &Potential, cfg: &E2Config) -> Result<E2Report> {
    let h = p.grid.spacing();
    let mut gradient_term = C64::new(0.0, 0.0);
    let mut ratio_term = C64::new(0.0, 0.0);
    let mut excluded_points = 0;
    let (mut excluded_mass, mut total_mass) = (0.0, 0.0);
    for (&q, &qx) in p.q.iter().zip(&p.q_x) {
        let a = q.norm();
        total_mass += a;
        if a < cfg.guard {
            excluded_points += 1;
            excluded_mass += a;
            continue;
        }
        let br = bracket(q);
        let mod2_x = 2.0 * (q.conj() * qx).re;
        gradient_term += 0.5 * mod2_x / (1.0 + a * a) * h;
        ratio_term += qx / q * (1.0 - br) / br * h;
    }
    let excluded_fraction = if total_mass > 0.0 {
        excluded_mass / total_mass
    } else {
        1.0
    };
    if excluded_fraction > cfg.max_excluded_fraction {
        return Err(WkiError::DiagnosticUnreliable(format!(
            "E2 guard excluded {:.3e} of the mass (limit {:.1e})",
            excluded_fraction, cfg.max_excluded_fraction
        )));
    }
    Ok(E2Report {
        value: gradient_term + ratio_term,
        gradient_term,
        ratio_term,
        excluded_points,
        excluded_fraction,
    })
}
