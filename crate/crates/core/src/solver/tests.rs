use super::*;
use crate::coefficients::{Coefficient, CoefficientSet};

const ZERO: Coefficient = Coefficient::Constant { v: 0.0 };
const ONE: Coefficient = Coefficient::Constant { v: 1.0 };

fn problem(kernel: KernelSpec, b: Coefficient, sigma: Coefficient, g: OuterKernel) -> ProblemSpec {
    let coeffs = CoefficientSet { b, sigma, g, lipschitz: 2.5, beta1: 1.0, beta2: 1.0 };
    ProblemSpec::new(kernel, coeffs, 0.5, 1.0).unwrap()
}

fn p75() -> KernelSpec {
    KernelSpec::power_singular(0.75).unwrap()
}

fn path(n: usize, seed: u64) -> BrownianPath {
    sample_brownian(SimulationGrid::new(n, 1.0).unwrap(), PathSeed::new(seed, 0))
}

#[test]
fn grid_endpoints() {
    let g = SimulationGrid::new(3, 0.7).unwrap();
    assert_eq!(g.time(0), 0.0);
    assert_eq!(g.time(3), 0.7);
    assert!(SimulationGrid::new(1, 1.0).is_err());
    assert!(SimulationGrid::new(4, 0.0).is_err());
}

#[test]
fn zero_coefficients_stay_put() {
    let pr = problem(p75(), ZERO, ZERO, OuterKernel::One);
    let tr = solve_volterra(&pr, &path(64, 1)).unwrap();
    assert!(tr.values().iter().all(|&x| x == 0.5));
}

#[test]
fn pure_brownian_is_the_running_sum() {
    let pr = problem(p75(), ZERO, ONE, OuterKernel::One);
    let p = path(256, 2);
    let tr = solve_volterra(&pr, &p).unwrap();
    let mut s = 0.0;
    for (i, db) in p.increments().iter().enumerate() {
        s += db;
        assert_eq!(tr.values()[i + 1], 0.5 + s);
    }
}

#[test]
fn constant_drift_closed_form() {
    let pr = problem(p75(), ONE, ZERO, OuterKernel::One);
    let tr = solve_volterra(&pr, &path(4096, 0)).unwrap();
    let exact = 0.5 + 1.0 / 0.75;
    assert!((tr.terminal() - exact).abs() / exact <= 1e-3);
    // exact cell weights telescope, so the drift-only path is exact on the grid
    let g = tr.grid();
    for i in [1, 17, 4096] {
        let e = 0.5 + g.time(i).powf(0.75) / 0.75;
        assert!((tr.values()[i] - e).abs() < 1e-12);
    }
}

#[test]
fn regularized_closed_form() {
    let pr = problem(p75(), ONE, ZERO, OuterKernel::One);
    let eps = 0.01;
    let tr = solve_regularized(&pr, eps, &path(4096, 0)).unwrap();
    let exact = 0.5 + ((1.0 + eps).powf(0.75) - eps.powf(0.75)) / 0.75;
    assert!((tr.terminal() - exact).abs() / exact <= 1e-3);
    assert_eq!(tr.scheme(), Scheme::Regularized { eps });
}

#[test]
fn huge_shift_leaves_the_stochastic_part() {
    let pr = problem(p75(), ONE, ONE, OuterKernel::One);
    let p = path(128, 3);
    let tr = solve_regularized(&pr, 1e6, &p).unwrap();
    let noise: f64 = p.increments().iter().sum();
    let drift = ((1.0f64 + 1e6).powf(0.75) - 1e6f64.powf(0.75)) / 0.75;
    assert!(drift < 0.04);
    assert!((tr.terminal() - 0.5 - noise - drift).abs() < 1e-10);
}

/// Rectangle-free oracle: after r = y^{1/α} the φ integrand for b(t,x) = t is
/// smooth, so a plain composite midpoint rule converges quickly.
fn phi_oracle_b_equals_t(alpha: f64, t: f64) -> f64 {
    let m = 20_000;
    let top = t.powf(alpha);
    let h = top / m as f64;
    let mut s = 0.0;
    for k in 0..m {
        let y = (k as f64 + 0.5) * h;
        let r = y.powf(1.0 / alpha);
        let drdy = r / (alpha * y);
        // −∂ₜk(t, t−r)·(b(t) − b(t−r)) = (1−α) r^{α−2} · r
        s += (1.0 - alpha) * r.powf(alpha - 2.0) * r * drdy;
    }
    s * h
}

#[test]
fn phi_matches_quadrature_oracle() {
    let b = Coefficient::TimeHolder { v: 1.0, beta: 1.0, a1: 0.0 };
    let pr = problem(p75(), b, ZERO, OuterKernel::One);
    let tr = solve_volterra(&pr, &path(1024, 0)).unwrap();
    let phi = phi_at(&pr, &tr, 1024).unwrap();
    let oracle = phi_oracle_b_equals_t(0.75, 1.0);
    assert!((oracle - 1.0 / 3.0).abs() < 1e-9);
    assert!((phi - oracle).abs() <= 1e-3, "{phi} vs {oracle}");
}

#[test]
fn phi_edge_cases() {
    let pr = problem(p75(), ONE, ONE, OuterKernel::One);
    let tr = solve_volterra(&pr, &path(64, 4)).unwrap();
    assert_eq!(phi_at(&pr, &tr, 0).unwrap(), 0.0);
    for i in 0..=64 {
        assert_eq!(phi_at(&pr, &tr, i).unwrap().to_bits(), 0.0f64.to_bits());
    }
    assert!(phi_at(&pr, &tr, 65).is_err());
}

#[test]
fn ito_form_constant_drift() {
    let pr = problem(p75(), ONE, ZERO, OuterKernel::One);
    let tr = solve_ito_form(&pr, &path(4096, 0)).unwrap();
    let exact = 0.5 + 1.0 / 0.75;
    assert!((tr.terminal() - exact).abs() / exact <= 1e-3, "{}", tr.terminal());
    assert!(tr.aux().unwrap().iter().all(|a| a.phi == 0.0 && a.g == 0.0));
}

#[test]
fn ito_phi_agrees_with_phi_at() {
    let pr = ProblemSpec::benchmark();
    let tr = solve_ito_form(&pr, &path(128, 5)).unwrap();
    let aux = tr.aux().unwrap();
    for i in [0, 1, 2, 3, 50, 128] {
        let direct = phi_at(&pr, &tr, i).unwrap();
        assert!((aux[i].phi - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}

#[test]
fn drift_free_schemes_coincide() {
    let sigma = Coefficient::AffineSin { a0: 1.0, a1: 0.5 };
    let pr = problem(p75(), ZERO, sigma, OuterKernel::One);
    let p = path(2048, 6);
    let a = solve_volterra(&pr, &p).unwrap();
    let b = solve_ito_form(&pr, &p).unwrap();
    assert!(a.sup_distance(&b).unwrap() <= 1e-10);
}

#[test]
fn ito_requires_beta1() {
    let mut coeffs = ProblemSpec::benchmark().coeffs;
    coeffs.beta1 = 0.1;
    let pr = ProblemSpec::new_allowing_violation(p75(), coeffs, 0.0, 1.0).unwrap();
    assert!(solve_ito_form(&pr, &path(16, 0)).is_ok());
    let mut strict = pr.clone();
    strict.allow_assumption_violation = false;
    let err = solve_ito_form(&strict, &path(16, 0)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn inadmissible_kernel_is_rejected() {
    let k = KernelSpec::power_singular(0.45).unwrap();
    let pr = problem(k, ONE, ONE, OuterKernel::One);
    assert!(matches!(solve_volterra(&pr, &path(16, 0)), Err(Error::Precondition(_))));
}

#[test]
fn regular_form_examples() {
    let c = KernelSpec::constant(1.0).unwrap();
    let pr = problem(c, ONE, ZERO, OuterKernel::One);
    let tr = solve_ito_regular(&pr, &path(100, 0)).unwrap();
    assert!((tr.terminal() - 1.5).abs() < 1e-12);

    let sp = KernelSpec::shifted_power(0.75, 0.1).unwrap();
    let pr = problem(sp, ONE, ZERO, OuterKernel::One);
    let p = path(4096, 0);
    let reg = solve_ito_regular(&pr, &p).unwrap();
    let direct = solve_volterra(&pr, &p).unwrap();
    let rel = (reg.terminal() - direct.terminal()).abs() / direct.terminal();
    assert!(rel <= 1e-3, "{rel}");

    let pr = problem(KernelSpec::shifted_power(0.75, 0.1).unwrap(), ONE, ONE, OuterKernel::One);
    let tr = solve_ito_regular(&pr, &path(64, 1)).unwrap();
    assert!(tr.aux().unwrap().iter().all(|a| a.g == 0.0));

    let err = solve_ito_regular(&problem(p75(), ONE, ZERO, OuterKernel::One), &p).unwrap_err();
    assert!(err.to_string().contains("regular form requires a smooth diagonal"));
}

#[test]
fn regular_form_matches_regularized_scheme_on_shifted_kernel() {
    let pr = problem(p75(), ONE, ZERO, OuterKernel::One);
    let shifted = problem(p75().shifted(0.1).unwrap(), ONE, ZERO, OuterKernel::One);
    let p = path(4096, 0);
    let a = solve_regularized(&pr, 0.1, &p).unwrap();
    let b = solve_ito_regular(&shifted, &p).unwrap();
    assert!((a.terminal() - b.terminal()).abs() / a.terminal() <= 1e-3);
}

/// O(n²) evaluation of Σ_{j<i} g(t_i,t_j)σ(t_j,X_j)ΔB_j on a given path.
fn noise_oracle(pr: &ProblemSpec, tr: &Trajectory, p: &BrownianPath, i: usize) -> f64 {
    let grid = tr.grid();
    (0..i)
        .map(|j| {
            let (ti, tj) = (grid.time(i), grid.time(j));
            pr.coeffs.g.eval(ti, tj)
                * pr.coeffs.sigma.eval(tj, tr.values()[j])
                * p.increments()[j]
        })
        .sum()
}

#[test]
fn running_noise_sums_match_direct_sums() {
    let sigma = Coefficient::AffineSin { a0: 1.0, a1: 0.5 };
    for g in [
        OuterKernel::One,
        OuterKernel::Affine { c0: 0.5, c1: 2.0, c2: -1.0 },
        OuterKernel::Exp { lambda: -1.5 },
    ] {
        let pr = problem(KernelSpec::constant(1.0).unwrap(), ZERO, sigma, g);
        let p = path(256, 7);
        let tr = solve_volterra(&pr, &p).unwrap();
        for i in [1, 2, 100, 256] {
            let want = 0.5 + noise_oracle(&pr, &tr, &p, i);
            assert!((tr.values()[i] - want).abs() < 1e-12, "{g:?} step {i}");
        }
    }
}

#[test]
fn g_term_matches_direct_sum() {
    let sigma = Coefficient::AffineSin { a0: 1.0, a1: 0.5 };
    let g = OuterKernel::Exp { lambda: 0.7 };
    let pr = problem(p75(), ZERO, sigma, g);
    let p = path(128, 8);
    let tr = solve_ito_form(&pr, &p).unwrap();
    let grid = tr.grid();
    for i in [0, 5, 128] {
        let want: f64 = (0..i)
            .map(|j| {
                g.dt(grid.time(i), grid.time(j))
                    * sigma.eval(grid.time(j), tr.values()[j])
                    * p.increments()[j]
            })
            .sum();
        assert!((tr.aux().unwrap()[i].g - want).abs() < 1e-12);
    }
}

#[test]
fn blow_up_reports_the_step() {
    let b = Coefficient::Linear { a0: 0.0, a1: 1e300 };
    let pr = ProblemSpec::new_allowing_violation(
        KernelSpec::constant(1.0).unwrap(),
        CoefficientSet { b, sigma: ZERO, g: OuterKernel::One, lipschitz: 1.0, beta1: 1.0, beta2: 1.0 },
        1.0,
        1.0,
    )
    .unwrap();
    match solve_volterra(&pr, &path(16, 0)) {
        Err(Error::NonFinite { step, .. }) => assert!(step >= 1 && step <= 16),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn solvers_are_deterministic() {
    let pr = ProblemSpec::benchmark();
    let p = path(512, 9);
    for scheme in [Scheme::Volterra, Scheme::Regularized { eps: 0.01 }, Scheme::ItoSingular] {
        let s = Solver::new(&pr, p.grid(), scheme).unwrap();
        assert_eq!(s.solve(&p).unwrap(), s.solve(&p).unwrap());
    }
}

#[test]
fn horizon_mismatch_is_rejected() {
    let pr = ProblemSpec::benchmark();
    let p = sample_brownian(SimulationGrid::new(16, 2.0).unwrap(), PathSeed::new(0, 0));
    assert!(solve_volterra(&pr, &p).is_err());
}

#[test]
fn dot_matches_naive_sum() {
    let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
    let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
    let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    assert!((dot(&a, &b) - naive).abs() < 1e-13);
}

#[test]
fn csv_export() {
    let pr = ProblemSpec::benchmark();
    let p = path(4, 0);
    let trs = vec![solve_volterra(&pr, &p).unwrap(), solve_ito_form(&pr, &p).unwrap()];
    let mut buf = Vec::new();
    write_trajectories_csv(&mut buf, &trs, false).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path_id,step,t,X,phi,G");
    assert_eq!(lines.len(), 1 + 2 * 5);
    assert_eq!(lines[1], "0,0,0,0,,");
    assert!(lines[6].starts_with("1,0,0,0,0,0"));
    let mut buf = Vec::new();
    write_trajectories_csv(&mut buf, &trs, true).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn constant_drift_has_vanishing_phi(alpha in 0.51f64..0.99, v in -3.0f64..3.0, seed in 0u64..1000) {
            let k = KernelSpec::power_singular(alpha).unwrap();
            let pr = problem(k, Coefficient::Constant { v }, Coefficient::AffineSin { a0: 1.0, a1: 0.5 }, OuterKernel::One);
            let tr = solve_ito_form(&pr, &path(64, seed)).unwrap();
            for (i, a) in tr.aux().unwrap().iter().enumerate() {
                prop_assert_eq!(a.phi.to_bits(), 0.0f64.to_bits());
                prop_assert_eq!(phi_at(&pr, &tr, i).unwrap().to_bits(), 0.0f64.to_bits());
            }
        }

        #[test]
        fn trajectories_start_at_x0(seed in 0u64..1000, n in 2usize..200) {
            let pr = ProblemSpec::benchmark();
            let p = path(n, seed);
            for tr in [solve_volterra(&pr, &p).unwrap(), solve_ito_form(&pr, &p).unwrap()] {
                prop_assert_eq!(tr.values()[0], pr.x0);
                prop_assert!(tr.values().iter().all(|x| x.is_finite()));
            }
        }
    }
}
