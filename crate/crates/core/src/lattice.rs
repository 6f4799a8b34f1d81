//! Grids, quadrature and the discrete Cauchy projections C± on the real line.
//!
//! The spectral line is handled through the Möbius map
//! `w = (s - iκ)/(s + iκ)`, which sends the real axis onto the unit circle
//! and the upper half-plane into the disk. Samples are taken at the shifted
//! angles `φ_k = 2π(k + 1/2)/M`, so `z = ±∞` and `z = 0` are never grid points.
//! On the circle, C⁺ keeps the nonnegative Fourier modes (minus the value at
//! `w = 1`, which is `z = ∞`), which is exact for rational data.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WkiError};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Anything that places samples at real coordinates.
pub trait Grid {
    fn len(&self) -> usize;
    fn coordinate(&self, k: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coordinates(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.coordinate(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    half_width: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(WkiError::InvalidArgument(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(WkiError::InvalidArgument(format!(
                "point count must be even and at least 4, got {n}"
            )));
        }
        Ok(SpatialGrid { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Index of the point `x = 0`.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let scale = PI / self.half_width;
        (0..self.n)
            .map(|j| signed_index(j, self.n) as f64 * scale)
            .collect()
    }

    pub fn calculus(&self) -> SpectralCalculus {
        SpectralCalculus::new(*self)
    }

    /// Same extent, twice the points.
    pub fn refined(&self) -> SpatialGrid {
        SpatialGrid {
            half_width: self.half_width,
            n: 2 * self.n,
        }
    }
}

impl Grid for SpatialGrid {
    fn len(&self) -> usize {
        self.n
    }

    fn coordinate(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }
}

pub fn make_spatial_grid(half_width: f64, n: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(half_width, n)
}

/// Spectral line `z ∈ ℝ` sampled at `z_k = -κ·cot(φ_k/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    n: usize,
    scale: f64,
    z_min: f64,
}

impl SpectralGrid {
    pub fn new(n: usize, scale: f64, z_min: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(WkiError::InvalidArgument(format!(
                "spectral point count must be a power of two >= 8, got {n}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(WkiError::InvalidArgument(format!(
                "spectral scale must be positive, got {scale}"
            )));
        }
        if !(z_min.is_finite() && z_min >= 0.0) {
            return Err(WkiError::InvalidArgument(format!(
                "z_min must be nonnegative, got {z_min}"
            )));
        }
        Ok(SpectralGrid { n, scale, z_min })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * (k as f64 + 0.5) / self.n as f64
    }

    /// `λ = -1/z` at grid point `k`.
    pub fn lambda(&self, k: usize) -> f64 {
        (0.5 * self.angle(k)).tan() / self.scale
    }

    /// Whether `|z_k| >= z_min`, i.e. the point carries data.
    pub fn is_active(&self, k: usize) -> bool {
        self.coordinate(k).abs() >= self.z_min
    }

    /// Trapezoid weight of `∫ f dz` at point `k` (valid for `f = O(z⁻²)`).
    pub fn weight(&self, k: usize) -> f64 {
        let s = (0.5 * self.angle(k)).sin();
        0.5 * self.scale / (s * s) * 2.0 * PI / self.n as f64
    }

    /// Trapezoid weight of `∫ f dλ` at point `k` (valid for `f = O(λ⁻²)`).
    pub fn lambda_weight(&self, k: usize) -> f64 {
        let c = (0.5 * self.angle(k)).cos();
        0.5 / (self.scale * c * c) * 2.0 * PI / self.n as f64
    }

    pub fn refined(&self) -> SpectralGrid {
        SpectralGrid {
            n: 2 * self.n,
            ..*self
        }
    }
}

impl Grid for SpectralGrid {
    fn len(&self) -> usize {
        self.n
    }

    fn coordinate(&self, k: usize) -> f64 {
        let half = 0.5 * self.angle(k);
        -self.scale * half.cos() / half.sin()
    }
}

/// Samples attached to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<G, T = C64> {
    pub grid: G,
    pub values: Vec<T>,
}

impl<G: Grid, T> GridFunction<G, T> {
    pub fn new(grid: G, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(WkiError::InvalidArgument(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }
}

impl<G: Grid> GridFunction<G, C64> {
    pub fn from_fn(grid: G, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coordinate(k))).collect();
        GridFunction { grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// CSV with columns `coordinate,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "coordinate,re,im")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e}",
                self.grid.coordinate(k),
                v.re,
                v.im
            )?;
        }
        Ok(())
    }
}

impl<G: Grid + Serialize> GridFunction<G, C64> {
    /// JSON envelope carrying the grid parameters next to the samples.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "coordinate": self.grid.coordinates(),
            "re": self.values.iter().map(|v| v.re).collect::<Vec<_>>(),
            "im": self.values.iter().map(|v| v.im).collect::<Vec<_>>(),
        })
    }
}

/// Cumulative trapezoid integral from the left endpoint, with the first
/// Euler–Maclaurin end correction so smooth integrands are integrated to
/// fourth order.
pub fn cumulative_integral(f: &GridFunction<SpatialGrid>) -> GridFunction<SpatialGrid> {
    let h = f.grid.spacing();
    let v = &f.values;
    let n = v.len();
    let deriv = if n >= 5 {
        Some(fd_derivative(v, h))
    } else {
        None
    };
    let mut out = Vec::with_capacity(n);
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for k in 1..n {
        acc += 0.5 * h * (v[k - 1] + v[k]);
        let corr = match &deriv {
            Some(d) => h * h / 12.0 * (d[k] - d[0]),
            None => C64::new(0.0, 0.0),
        };
        out.push(acc - corr);
    }
    GridFunction {
        grid: f.grid,
        values: out,
    }
}

/// Fourth-order finite-difference derivative with one-sided end stencils.
fn fd_derivative(v: &[C64], h: f64) -> Vec<C64> {
    let n = v.len();
    let mut d = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        d[k] = if k >= 2 && k + 2 < n {
            (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h)
        } else if k < 2 {
            let c: [f64; 5] = if k == 0 {
                [-25.0, 48.0, -36.0, 16.0, -3.0]
            } else {
                [-3.0, -10.0, 18.0, -6.0, 1.0]
            };
            let w: C64 = (0..5).map(|j| c[j] * v[j]).sum();
            w / (12.0 * h)
        } else {
            let j0 = n - 5;
            let c: [f64; 5] = if k == n - 1 {
                [3.0, -16.0, 36.0, -48.0, 25.0]
            } else {
                [-1.0, 6.0, -18.0, 10.0, 3.0]
            };
            let w: C64 = (0..5).map(|j| c[j] * v[j0 + j]).sum();
            w / (12.0 * h)
        };
    }
    d
}

/// Periodic trapezoid integral over the truncated line.
pub fn integral(f: &GridFunction<SpatialGrid>) -> C64 {
    f.values.iter().sum::<C64>() * f.grid.spacing()
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Forward and inverse FFT plans of one length.
#[derive(Clone)]
pub struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fourier {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform in place, normalized by `1/n`.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Spectral derivatives and band-limited refinement on a periodic spatial grid.
#[derive(Debug, Clone)]
pub struct SpectralCalculus {
    grid: SpatialGrid,
    fourier: Fourier,
    k: Vec<f64>,
}

impl SpectralCalculus {
    pub fn new(grid: SpatialGrid) -> Self {
        SpectralCalculus {
            grid,
            fourier: Fourier::new(grid.len()),
            k: grid.wavenumbers(),
        }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    /// First derivative; the Nyquist mode is dropped.
    pub fn d1(&self, f: &[C64]) -> Vec<C64> {
        let n = self.grid.len();
        let mut buf = f.to_vec();
        self.fourier.forward(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= if j == n / 2 {
                C64::new(0.0, 0.0)
            } else {
                I * self.k[j]
            };
        }
        self.fourier.inverse(&mut buf);
        buf
    }

    /// Second derivative.
    pub fn d2(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.d2_in_place(&mut buf);
        buf
    }

    pub fn d2_in_place(&self, buf: &mut [C64]) {
        self.fourier.forward(buf);
        for (v, k) in buf.iter_mut().zip(&self.k) {
            *v *= -k * k;
        }
        self.fourier.inverse(buf);
    }

    /// Trigonometric interpolant sampled `factor` times more densely
    /// (the Nyquist mode is split evenly).
    pub fn refine(&self, f: &[C64], factor: usize) -> Vec<C64> {
        let n = self.grid.len();
        if factor == 1 {
            return f.to_vec();
        }
        let m = n * factor;
        let mut spec = f.to_vec();
        self.fourier.forward(&mut spec);
        let mut big = vec![C64::new(0.0, 0.0); m];
        for j in 0..n / 2 {
            big[j] = spec[j];
        }
        for j in n / 2 + 1..n {
            big[m - n + j] = spec[j];
        }
        big[n / 2] = 0.5 * spec[n / 2];
        big[m - n / 2] = 0.5 * spec[n / 2];
        let fine = Fourier::new(m);
        fine.inverse(&mut big);
        let s = factor as f64;
        big.iter_mut().for_each(|v| *v *= s);
        big
    }
}

/// Which boundary value of the Cauchy integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Discrete Cauchy projections on a [`SpectralGrid`].
#[derive(Debug, Clone)]
pub struct CauchyOperator {
    grid: SpectralGrid,
    fourier: Fourier,
    /// `e^{-iπn/M}` per FFT slot, turning DFT bins into circle coefficients.
    shift: Vec<C64>,
    /// Multiplier of the nonnegative-frequency projection per FFT slot.
    keep: Vec<f64>,
    decay_tolerance: f64,
}

impl CauchyOperator {
    pub fn new(grid: SpectralGrid) -> Self {
        let m = grid.len();
        let shift = (0..m)
            .map(|j| {
                let n = signed_index(j, m) as f64;
                C64::from_polar(1.0, -PI * n / m as f64)
            })
            .collect();
        let keep = (0..m)
            .map(|j| match j.cmp(&(m / 2)) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        CauchyOperator {
            grid,
            fourier: Fourier::new(m),
            shift,
            keep,
            decay_tolerance: 1e-6,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    fn check_decay(&self, f: &[C64]) {
        let end = f[0].norm().max(f[f.len() - 1].norm());
        if end > self.decay_tolerance {
            log::debug!("Cauchy projection input is {end:.3e} at the grid ends");
        }
    }

    pub fn plus(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.plus_in_place(&mut buf);
        buf
    }

    pub fn minus(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.minus_in_place(&mut buf);
        buf
    }

    pub fn apply(&self, side: Side, f: &[C64]) -> Vec<C64> {
        match side {
            Side::Plus => self.plus(f),
            Side::Minus => self.minus(f),
        }
    }

    pub fn plus_in_place(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.grid.len());
        self.check_decay(buf);
        self.fourier.forward(buf);
        let m = buf.len() as f64;
        let mut at_infinity = C64::new(0.0, 0.0);
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= self.keep[j];
            at_infinity += *v * self.shift[j];
        }
        at_infinity /= m;
        self.fourier.inverse(buf);
        buf.iter_mut().for_each(|v| *v -= at_infinity);
    }

    pub fn minus_in_place(&self, buf: &mut [C64]) {
        let f = buf.to_vec();
        self.plus_in_place(buf);
        buf.iter_mut().zip(f).for_each(|(v, x)| *v -= x);
    }

    /// Principal-value moment `-(1/2πi)∫ f dz`, computed as the
    /// average of `lim z·C[f](z)` from both half-planes.
    pub fn moment(&self, f: &[C64]) -> C64 {
        let mut buf = f.to_vec();
        self.fourier.forward(&mut buf);
        let m = buf.len();
        let mut acc = C64::new(0.0, 0.0);
        for (j, v) in buf.iter().enumerate() {
            if j == m / 2 {
                continue;
            }
            let n = signed_index(j, m).unsigned_abs() as f64;
            acc += n * v * self.shift[j];
        }
        -I * self.grid.scale() * acc / m as f64
    }

    /// Trapezoid value of `∫ f dz`.
    pub fn integrate(&self, f: &[C64]) -> C64 {
        f.iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.weight(k))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_grid_points() {
        let g = make_spatial_grid(10.0, 8).unwrap();
        assert_eq!(g.spacing(), 2.5);
        assert_eq!(
            g.coordinates(),
            vec![-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5]
        );
        let g = make_spatial_grid(1.0, 4).unwrap();
        assert_eq!(g.coordinates(), vec![-1.0, -0.5, 0.0, 0.5]);
        assert!(matches!(
            make_spatial_grid(10.0, 7),
            Err(WkiError::InvalidArgument(_))
        ));
        assert!(make_spatial_grid(10.0, 2).is_err());
        assert!(make_spatial_grid(0.0, 8).is_err());
    }

    #[test]
    fn cumulative_of_constants() {
        let g = make_spatial_grid(1.0, 4).unwrap();
        let one = GridFunction::from_fn(g, |_| C64::new(1.0, 0.0));
        let c = cumulative_integral(&one);
        let re: Vec<f64> = c.values.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0, 0.5, 1.0, 1.5]);
        let zero = GridFunction::from_fn(g, |_| C64::new(0.0, 0.0));
        assert!(cumulative_integral(&zero)
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
        let g = make_spatial_grid(3.0, 64).unwrap();
        let one = GridFunction::from_fn(g, |_| C64::new(1.0, 0.0));
        let c = cumulative_integral(&one);
        for (k, v) in c.values.iter().enumerate() {
            assert!((v.re - k as f64 * g.spacing()).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_grid_rejects_bad_sizes() {
        assert!(SpectralGrid::new(100, 1.0, 0.0).is_err());
        assert!(SpectralGrid::new(64, -1.0, 0.0).is_err());
        let g = SpectralGrid::new(64, 1.0, 0.0).unwrap();
        let z = g.coordinates();
        assert!(z.windows(2).all(|p| p[0] < p[1]));
        for k in 0..64 {
            assert!((g.lambda(k) + 1.0 / z[k]).abs() < 1e-9 * (1.0 + g.lambda(k).abs()));
        }
    }

    #[test]
    fn rational_boundary_values() {
        let g = SpectralGrid::new(256, 1.0, 0.0).unwrap();
        let c = CauchyOperator::new(g);
        let z = g.coordinates();
        let lower_pole: Vec<C64> = z.iter().map(|&s| 1.0 / (s + I)).collect();
        let upper_pole: Vec<C64> = z.iter().map(|&s| 1.0 / (s - I)).collect();
        let p = c.plus(&lower_pole);
        let m = c.minus(&lower_pole);
        for k in 0..256 {
            assert!((p[k] - lower_pole[k]).norm() < 1e-13);
            assert!(m[k].norm() < 1e-13);
        }
        let p = c.plus(&upper_pole);
        let m = c.minus(&upper_pole);
        for k in 0..256 {
            assert!(p[k].norm() < 1e-13);
            assert!((m[k] + upper_pole[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn moment_of_rational_function() {
        // -(1/2πi) ∫ ds / (s - i)(s + i) = -(1/2πi)·2πi·(1/2i) = i/2
        let g = SpectralGrid::new(128, 0.7, 0.0).unwrap();
        let c = CauchyOperator::new(g);
        let f: Vec<C64> = g
            .coordinates()
            .iter()
            .map(|&s| 1.0 / (s * s + 1.0) + 0.0 * I)
            .collect();
        assert!((c.moment(&f) - 0.5 * I).norm() < 1e-13);
        assert!((c.integrate(&f).re - PI).abs() < 1e-12);
    }

    #[test]
    fn refine_reproduces_band_limited_data() {
        let g = make_spatial_grid(PI, 16).unwrap();
        let sc = SpectralCalculus::new(g);
        let f: Vec<C64> = g
            .coordinates()
            .iter()
            .map(|&x| C64::from_polar(1.0, 3.0 * x))
            .collect();
        let fine = sc.refine(&f, 4);
        let h = g.spacing() / 4.0;
        for (j, v) in fine.iter().enumerate() {
            let x = -PI + j as f64 * h;
            assert!((v - C64::from_polar(1.0, 3.0 * x)).norm() < 1e-12);
        }
        let d = sc.d1(&f);
        let d2 = sc.d2(&f);
        for (k, &x) in g.coordinates().iter().enumerate() {
            assert!((d[k] - 3.0 * I * C64::from_polar(1.0, 3.0 * x)).norm() < 1e-12);
            assert!((d2[k] + 9.0 * C64::from_polar(1.0, 3.0 * x)).norm() < 1e-11);
        }
    }
}
