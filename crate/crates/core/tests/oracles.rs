//! Cross-module checks against independent reference computations.

use wki_core::direct_scattering::{
    check_a_asymptotics, reflection_coefficient, transition_matrix, ForwardConfig, ScatteringData,
};
use wki_core::lattice::{
    cumulative_integral, make_spatial_grid, CauchyOperator, Grid, GridFunction, Mat2, SpectralGrid,
    C64, I,
};
use wki_core::lax::{
    akns_potentials, conserved_e1, conserved_e2, DerivativeKind, E2Config, Potential, Profile,
};
use wki_core::pde_oracle::{evolve, max_time_step, EvolveConfig};
use wki_core::reconstruction::{inverse_transform, ReconstructionConfig};
use wki_core::rhp::{
    build_factorization, delta_function, FactorizationKind, RhpSolver, SolverConfig,
};

fn gaussian(l: f64, n: usize) -> Potential {
    Potential::from_profile(
        make_spatial_grid(l, n).unwrap(),
        Profile::Gaussian {
            amplitude: 0.05,
            width: 1.0,
            center: 0.0,
            wavenumber: 0.0,
        },
        DerivativeKind::Spectral,
    )
    .unwrap()
}

fn gaussian_data(n: usize, m: usize) -> ScatteringData {
    reflection_coefficient(
        &gaussian(20.0, n),
        SpectralGrid::new(m, 0.5, 0.125).unwrap(),
        &ForwardConfig::default(),
    )
    .unwrap()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        50,
    )
}

fn rk4_jost(
    lambda: f64,
    q: impl Fn(f64) -> C64,
    from: f64,
    to: f64,
    start: Mat2,
    steps: usize,
) -> Mat2 {
    let h = (to - from) / steps as f64;
    let a = |x: f64| {
        let v = q(x);
        Mat2::new(I * lambda, -v * lambda, v.conj() * lambda, -I * lambda)
    };
    let c = |v: f64| C64::new(v, 0.0);
    let mut psi = start;
    for k in 0..steps {
        let x = from + k as f64 * h;
        let k1 = a(x) * psi;
        let k2 = a(x + 0.5 * h) * (psi + k1 * c(0.5 * h));
        let k3 = a(x + 0.5 * h) * (psi + k2 * c(0.5 * h));
        let k4 = a(x + h) * (psi + k3 * c(h));
        psi += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0);
    }
    psi
}

#[test]
fn cumulative_gaussian_matches_adaptive_quadrature() {
    let grid = make_spatial_grid(10.0, 4096).unwrap();
    let f = GridFunction::from_fn(grid, |x| C64::new((-x * x).exp(), 0.0));
    let cum = cumulative_integral(&f);
    for k in (0..4096).step_by(97) {
        let x = grid.coordinate(k);
        let exact = simpson(&|y| (-y * y).exp(), -10.0, x, 1e-14);
        assert!((cum.values[k].re - exact).abs() < 1e-8, "x = {x}");
    }
}

#[test]
fn e1_matches_adaptive_quadrature() {
    let p = gaussian(20.0, 1024);
    let exact = simpson(
        &|x| (1.0 + 0.0025 * (-2.0 * x * x).exp()).sqrt() - 1.0,
        -20.0,
        20.0,
        1e-16,
    );
    assert!((conserved_e1(&p) - exact).abs() < 1e-10);
    let fields = akns_potentials(&p);
    let l1: f64 = p.q.iter().map(|v| v.norm()).sum::<f64>() * p.grid.spacing();
    assert!(fields.integral_h() <= l1);
}

#[test]
fn e2_is_conserved_along_soliton_evolution() {
    let p0 = Potential::from_profile(
        make_spatial_grid(20.0, 2048).unwrap(),
        Profile::Soliton {
            xi: 3.0,
            eta: 1.0,
            t: 0.0,
        },
        DerivativeKind::Spectral,
    )
    .unwrap();
    let run = evolve(
        &p0,
        0.25,
        max_time_step(p0.grid, 0.2),
        &EvolveConfig::default(),
    )
    .unwrap();
    let cfg = E2Config::default();
    let a = conserved_e2(&p0, &cfg).unwrap().value;
    let b = conserved_e2(&run.final_state().unwrap(), &cfg)
        .unwrap()
        .value;
    assert!((a - b).norm() < 1e-3, "{a} vs {b}");
}

#[test]
fn box_potential_matches_tiny_step_integration() {
    let p = Potential::from_profile(
        make_spatial_grid(4.0, 64).unwrap(),
        Profile::Box {
            amplitude: 0.1,
            half_width: 1.0,
        },
        DerivativeKind::Spectral,
    )
    .unwrap();
    let lambda = 2.0;
    let t = transition_matrix(&p, lambda, &ForwardConfig::default()).unwrap();
    let q = |_x: f64| C64::new(0.1, 0.0);
    let free = |x: f64| {
        let e = C64::from_polar(1.0, lambda * x);
        Mat2::new(e, C64::new(0.0, 0.0), C64::new(0.0, 0.0), e.conj())
    };
    let minus = rk4_jost(lambda, q, -1.0, 0.0, free(-1.0), 100_000);
    let plus = rk4_jost(lambda, q, 1.0, 0.0, free(1.0), 100_000);
    let oracle = minus.try_inverse().unwrap() * plus;
    assert!((t.a - oracle[(0, 0)]).norm() < 1e-6);
    assert!((t.b - oracle[(1, 0)]).norm() < 1e-6);
    assert!((t.d - oracle[(0, 1)]).norm() < 1e-6);
    assert!((t.c - oracle[(1, 1)]).norm() < 1e-6);
    assert!(t.b.norm() > 1e-3);
}

#[test]
fn transition_matrix_self_converges() {
    let cfg = ForwardConfig::default();
    let coarse = transition_matrix(&gaussian(20.0, 512), 1.0, &cfg).unwrap();
    let fine = transition_matrix(&gaussian(20.0, 1024), 1.0, &cfg).unwrap();
    assert!((coarse.a - fine.a).norm() < 1e-5);
    assert!((coarse.b - fine.b).norm() < 1e-5);
}

#[test]
fn gaussian_reflection_is_small_and_decays_at_the_ends() {
    let sd = gaussian_data(1024, 1024);
    assert!(sd.diagnostics.max_abs_r < 0.05);
    let m = sd.r.len();
    assert!(
        sd.r[0].norm() < 1e-3 && sd.r[m - 1].norm() < 1e-3,
        "{} {}",
        sd.r[0],
        sd.r[m - 1]
    );
    assert!(sd.diagnostics.truncation_level < 1e-3);
    assert_eq!(sd.diagnostics.winding, 0);
}

#[test]
fn a_approaches_its_large_lambda_limit() {
    let p = gaussian(20.0, 1024);
    let d = check_a_asymptotics(&p, &[5.0, 10.0, 20.0], &ForwardConfig::default()).unwrap();
    assert!(
        d[0].defect > d[1].defect && d[1].defect > d[2].defect,
        "{d:?}"
    );
}

#[test]
fn delta_relations_on_gaussian_data() {
    let sd = gaussian_data(1024, 512);
    let d = delta_function(&sd.r, &CauchyOperator::new(sd.zgrid));
    assert!(d.boundary_defect < 1e-6);
    assert!(d.unimodularity_defect < 1e-8);
}

#[test]
fn rhp_solutions_stay_bounded_and_differentiate_correctly() {
    let sd = gaussian_data(512, 256);
    let solver = RhpSolver::new(sd.zgrid, SolverConfig::default());
    let delta = delta_function(&sd.r, solver.cauchy());
    let mut worst_mu: f64 = 0.0;
    for &t in &[0.0, 0.3] {
        for j in 0..21 {
            let x_h = -10.0 + j as f64;
            let kind = if x_h <= 0.0 {
                FactorizationKind::Triangular
            } else {
                FactorizationKind::DeltaConjugated
            };
            let solve = |x: f64| {
                solver
                    .solve(&build_factorization(&sd, Some(&delta), x, t, kind).unwrap())
                    .unwrap()
            };
            let s = solve(x_h);
            assert!(s.residual < 1e-10 && s.dmu_residual.unwrap() < 1e-10);
            assert!(s.dx_m1.unwrap()[(0, 1)].norm() < 1.0);
            let m11 = s.m1[(0, 0)];
            assert!(
                m11.re.abs() < 1e-8 && m11.im > -1e-6,
                "t = {t}, x_H = {x_h}: {m11}"
            );
            for r in 0..2 {
                for c in 0..2 {
                    let id = if r == c { 1.0 } else { 0.0 };
                    for v in &s.mu[r][c] {
                        worst_mu = worst_mu.max((v - id).norm());
                    }
                }
            }
            if j % 5 == 0 {
                let (up, down) = (solve(x_h + 1e-3), solve(x_h - 1e-3));
                let dmu = s.dmu.as_ref().unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        for k in 0..s.mu[r][c].len() {
                            let fd = (up.mu[r][c][k] - down.mu[r][c][k]) / 2e-3;
                            assert!((fd - dmu[r][c][k]).norm() < 1e-5);
                        }
                    }
                }
            }
        }
    }
    assert!(worst_mu < 0.2, "{worst_mu}");
}

#[test]
fn hodograph_routes_agree_on_gaussian_data() {
    let q0 = gaussian(20.0, 512);
    let sd = reflection_coefficient(
        &q0,
        SpectralGrid::new(512, 0.5, 0.125).unwrap(),
        &ForwardConfig::default(),
    )
    .unwrap();
    let rec = inverse_transform(&sd, 0.0, q0.grid, &ReconstructionConfig::default()).unwrap();
    let d = rec.diagnostics;
    assert!(d.max_abs_slope < 1.0);
    assert!(d.route_gap < 1e-3);
    assert!((d.epsilon_infinity - d.e1_hodograph).abs() < 1e-6);
    assert!(d.epsilon_monotonicity_defect < 1e-12);
    assert!(d.min_map_slope > 0.0 && d.max_map_slope <= 1.0 + 1e-8);
    let err = rec
        .potential
        .q
        .iter()
        .zip(&q0.q)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 5e-3);
}

#[test]
fn zero_data_reconstructs_zero_at_positive_time() {
    let sd = ScatteringData::zero(SpectralGrid::new(128, 0.5, 0.125).unwrap());
    let rec = inverse_transform(
        &sd,
        0.8,
        make_spatial_grid(10.0, 128).unwrap(),
        &ReconstructionConfig::default(),
    )
    .unwrap();
    assert!(rec.potential.q.iter().all(|v| v.norm() == 0.0));
}
