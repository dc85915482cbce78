mod common;

use common::{aircraft, random_hurwitz, random_loop, random_matrix, random_vector};
use fcs_core::controller::{augment, aw_only, baseline_control, decide, delta_h, hard_saturate, ControllerMode, ServoLoop};
use fcs_core::design::PolynomialSpec;
use fcs_core::margins::{
    build_loop_model, loop_gain_at, mimo_margins, saturation_margins, siso_margins, DeltaPattern, FrequencyGrid,
    Stability, Treatment,
};
use fcs_core::model::{stack, ConstraintBox, ServoGains};
use fcs_core::numerics::{care_solve, care_residual, lyapunov_solve, spectrum, ComplexMatrix, RealMatrix, RealVector};
use fcs_core::simulate::{analyze, run, step, CommandSchedule, SimConfig};
use fcs_core::units::format_sig9;
use nalgebra::{dvector, Complex};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn state_strategy(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-scale..scale, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn branches_sum_to_negative_width(x in state_strategy(5, 0.5), y in state_strategy(2, 0.5)) {
        let study = aircraft();
        let sys = &study.sys;
        let x = RealVector::from_vec(x);
        let y = RealVector::from_vec(y);
        let (e, xp) = sys.ext.split_state(&x);
        let u_bl = baseline_control(&sys.gains, &e, &xp);
        let (lo, hi) = delta_h(&sys.design, &sys.ext, &x, &u_bl, &y);
        for i in 0..4 {
            let width = sys.design.alpha_pi[i] * (sys.ext.y_min[i] - sys.ext.y_max[i]);
            prop_assert!(lo[i] + hi[i] < 0.0);
            prop_assert!((lo[i] + hi[i] - width).abs() <= 1e-9 * (1.0 + width.abs() + lo[i].abs()));
        }
        prop_assert!(augment(&sys.design, &lo, &hi).is_ok());
    }

    #[test]
    fn inactive_augmentation_equals_baseline(x in state_strategy(5, 0.01)) {
        let study = aircraft();
        let x = RealVector::from_vec(x);
        let y = RealVector::zeros(2);
        let aug = decide(ControllerMode::Augmented, &study.sys, &x, &y).unwrap();
        prop_assume!(aug.delta.iter().all(|d| !d));
        let base = decide(ControllerMode::Baseline, &study.sys, &x, &y).unwrap();
        prop_assert_eq!(&aug, &base);
        let bounds = &study.sys.bounds;
        let inside = (0..2).all(|i| base.u_bl[i] >= bounds.u_min[i] && base.u_bl[i] <= bounds.u_max[i]);
        for mode in [ControllerMode::HardSaturation, ControllerMode::AwOnly] {
            let other = decide(mode, &study.sys, &x, &y).unwrap();
            if !inside || other.delta.iter().any(|d| *d) {
                continue;
            }
            prop_assert_eq!(&other.u_total, &base.u_total);
            prop_assert_eq!(&other.v, &base.v);
        }
    }

    #[test]
    fn nine_digit_formatting_round_trips(x in -1e12f64..1e12, e in -20i32..20) {
        let v = x * 10f64.powi(e);
        let parsed: f64 = format_sig9(v).parse().unwrap();
        prop_assert!((parsed - v).abs() <= 5e-9 * v.abs());
    }

    #[test]
    fn pattern_text_round_trips(flags in proptest::collection::vec(any::<bool>(), 1..12)) {
        let p = DeltaPattern::new(flags.clone());
        let back: DeltaPattern = p.to_string().parse().unwrap();
        prop_assert_eq!(back.flags(), &flags[..]);
    }
}

#[test]
fn augmentation_is_continuous_across_switching_surfaces() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let sys = random_loop(&mut rng, 2, 3);
        let x0 = random_vector(&mut rng, sys.n(), 1.0);
        let y = random_vector(&mut rng, 2, 0.5);
        let dh = |x: &RealVector| {
            let (e, xp) = sys.ext.split_state(x);
            let u = baseline_control(&sys.gains, &e, &xp);
            delta_h(&sys.design, &sys.ext, x, &u, &y)
        };
        // walk along a random direction to the first root of some ΔH branch
        let dir = random_vector(&mut rng, sys.n(), 1.0).normalize();
        let (lo0, hi0) = dh(&x0);
        let (lo1, hi1) = dh(&(&x0 + &dir));
        let slope_lo = &lo1 - &lo0;
        let slope_hi = &hi1 - &hi0;
        let mut root = None;
        for i in 0..4 {
            for (v, s) in [(lo0[i], slope_lo[i]), (hi0[i], slope_hi[i])] {
                let t = -v / s;
                if t.is_finite() && root.is_none_or(|r: f64| t.abs() < r.abs()) {
                    root = Some(t);
                }
            }
        }
        let xb = &x0 + &dir * root.unwrap();
        let eval = |x: &RealVector| {
            let (lo, hi) = dh(x);
            let a = augment(&sys.design, &lo, &hi).unwrap();
            stack(&a.v, &a.w)
        };
        let before = eval(&(&xb - &dir * 1e-8));
        let after = eval(&(&xb + &dir * 1e-8));
        let scale = sys.design.h_u_inv.norm() * sys.design.h_x.norm();
        assert!((before - after).norm() <= 1e-6 * scale.max(1.0));
    }
}

#[test]
fn awonly_matches_augment_without_output_limits() {
    let mut rng = StdRng::seed_from_u64(12);
    let mut active = 0;
    for _ in 0..300 {
        let sys = random_loop(&mut rng, 2, 3);
        let bounds = ConstraintBox::new(
            sys.bounds.u_min.clone(),
            sys.bounds.u_max.clone(),
            RealVector::from_element(2, f64::NEG_INFINITY),
            RealVector::from_element(2, f64::INFINITY),
        )
        .unwrap();
        let alphas: Vec<f64> = sys.design.alpha_pi.iter().copied().collect();
        let open = ServoLoop::new(sys.plant.clone(), bounds, sys.gains.clone(), &PolynomialSpec::from_alphas(&alphas).unwrap()).unwrap();
        let x = random_vector(&mut rng, open.n(), 1.0);
        let y = random_vector(&mut rng, 2, 0.5);
        let full = decide(ControllerMode::Augmented, &open, &x, &y).unwrap();
        let alpha_u = open.design.alpha_pi.rows(0, 2).into_owned();
        let v = aw_only(&open.gains, &open.plant, &alpha_u, &x, &y, &open.bounds.u_min, &open.bounds.u_max).unwrap();
        assert!((&v - &full.v).norm() <= 1e-9 * (1.0 + full.v.norm()));
        assert_eq!(full.w, RealVector::zeros(2));
        if full.delta.iter().any(|d| *d) {
            active += 1;
        }
    }
    assert!(active > 50);
}

#[test]
fn awonly_is_zero_inside() {
    let study = aircraft();
    let sys = &study.sys;
    let x = RealVector::zeros(5);
    let alpha_u = sys.design.alpha_pi.rows(0, 2).into_owned();
    let v = aw_only(&sys.gains, &sys.plant, &alpha_u, &x, &RealVector::zeros(2), &sys.bounds.u_min, &sys.bounds.u_max).unwrap();
    assert_eq!(v, RealVector::zeros(2));
}

#[test]
fn saturation_pins_aileron() {
    let study = aircraft();
    let trace = run(&study.sys, &study.schedule, &study.sim_config(ControllerMode::HardSaturation)).unwrap();
    let limit = study.sys.bounds.u_max[0];
    let pinned = trace
        .u_bl
        .iter()
        .zip(&trace.u_total)
        .filter(|(ub, _)| ub[0] > limit)
        .count();
    assert!(pinned > 0);
    for (ub, u) in trace.u_bl.iter().zip(&trace.u_total) {
        if ub[0] > limit {
            assert_eq!(u[0], limit);
        }
    }
    let d = std::f64::consts::PI / 180.0;
    let sat = hard_saturate(&dvector![10.0 * d, -10.0 * d], &study.sys.bounds);
    assert!((sat[0] - 3.0 * d).abs() < 1e-15 && (sat[1] + 2.0 * d).abs() < 1e-15);
}

#[test]
fn augmented_aileron_approaches_limit_from_inside() {
    let study = aircraft();
    let trace = run(&study.sys, &study.schedule, &study.sim_config(ControllerMode::Augmented)).unwrap();
    let limit = study.sys.bounds.u_max[0];
    let active: Vec<usize> = (0..trace.len()).filter(|&k| trace.delta[k][0]).collect();
    assert!(!active.is_empty());
    for &k in &active {
        assert!(trace.u_bl[k][0] <= limit + 1e-12);
    }
    let peak = trace.u_bl.iter().map(|u| u[0]).fold(f64::MIN, f64::max);
    assert!(peak > limit * 0.99);
}

#[test]
fn input_bounds_transfer_without_output_limits() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..5 {
        let sys = random_loop(&mut rng, 2, 3);
        let a_p = random_hurwitz(&mut rng, 3, 0.3);
        let mut plant = sys.plant.clone();
        plant.a_p = a_p;
        let Ok(plant) = fcs_core::model::Plant::new(plant.a_p, plant.b_p, plant.c_reg, plant.d_reg, plant.c_lim) else {
            continue;
        };
        let bounds = ConstraintBox::new(
            sys.bounds.u_min.clone(),
            sys.bounds.u_max.clone(),
            RealVector::from_element(2, f64::NEG_INFINITY),
            RealVector::from_element(2, f64::INFINITY),
        )
        .unwrap();
        let alphas: Vec<f64> = sys.design.alpha_pi.iter().copied().collect();
        let Ok(open) = ServoLoop::new(plant, bounds, sys.gains.clone(), &PolynomialSpec::from_alphas(&alphas).unwrap()) else {
            continue;
        };
        let schedule = CommandSchedule::new(
            vec![(0.0, random_vector(&mut rng, 2, 3.0)), (2.0, random_vector(&mut rng, 2, 3.0))],
            4.0,
        )
        .unwrap();
        let Ok(trace) = run(&open, &schedule, &SimConfig::new(ControllerMode::Augmented)) else {
            continue;
        };
        let report = analyze(&trace, &open.bounds, 0.0);
        for c in &report.applied_inputs {
            assert!(c.max_excursion <= 1e-9 * c.range(), "{c:?}");
        }
    }
}

#[test]
fn sensitivity_identity_along_trajectory() {
    // H_x x + H_u u' = d/dt(C_lim x) + α∘(C_lim x) for relative degree one
    let study = aircraft();
    let sys = &study.sys;
    let dt = 1e-4;
    let mut x = RealVector::from_vec(vec![0.001, -0.002, 0.01, 0.05, -0.02]);
    let y = dvector![0.1, 0.01];
    for _ in 0..20 {
        let dec = decide(ControllerMode::Baseline, sys, &x, &y).unwrap();
        let u_prime = stack(&(&dec.v - &y), &dec.u_total);
        let lhs = &sys.design.h_x * &x + &sys.design.h_u * &u_prime;
        let fwd = step(sys, ControllerMode::Baseline, &x, &y, dt).unwrap();
        let f2 = step(sys, ControllerMode::Baseline, &fwd, &y, dt).unwrap();
        let deriv = (&sys.ext.c_lim * (&fwd * 4.0 - &x * 3.0 - &f2)) / (2.0 * dt);
        let rhs = deriv + sys.design.alpha_pi.component_mul(&(&sys.ext.c_lim * &x));
        assert!((&lhs - &rhs).amax() <= 1e-5 * (1.0 + lhs.amax()), "{lhs} vs {rhs}");
        x = fwd;
    }
}

#[test]
fn simplified_switching_forms_hold_on_random_designs() {
    let mut rng = StdRng::seed_from_u64(14);
    for _ in 0..50 {
        let sys = random_loop(&mut rng, 2, 3);
        for p in DeltaPattern::enumerate(4) {
            let model = build_loop_model(&sys.ext, &sys.gains, &sys.design, &p).unwrap();
            assert!(model.k_eff.iter().chain(model.a_eff.iter()).all(|v| v.is_finite()));
        }
    }
}

#[test]
fn loop_model_matches_closed_loop_jacobian() {
    // inside a fixed activity region the augmented closed loop is affine in x
    let study = aircraft();
    let sys = &study.sys;
    let trace = run(sys, &study.schedule, &study.sim_config(ControllerMode::Augmented)).unwrap();
    let rhs = |x: &RealVector, y: &RealVector| {
        let d = decide(ControllerMode::Augmented, sys, x, y).unwrap();
        (&sys.ext.a * x + &sys.ext.b * stack(&(&d.v - y), &d.u_total), d.delta)
    };
    let mut checked = std::collections::HashSet::new();
    for k in (0..trace.len()).step_by(97) {
        let x = stack(&trace.e_yi[k], &trace.x_p[k]);
        let y = &trace.y_cmd[k];
        let (_, delta) = rhs(&x, y);
        if checked.contains(&delta) {
            continue;
        }
        let h = 1e-7;
        let mut jac = RealMatrix::zeros(5, 5);
        let mut same_region = true;
        for j in 0..5 {
            let mut e = RealVector::zeros(5);
            e[j] = h;
            let (fp, dp) = rhs(&(&x + &e), y);
            let (fm, dm) = rhs(&(&x - &e), y);
            same_region &= dp == delta && dm == delta;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        if !same_region {
            continue;
        }
        let pattern = DeltaPattern::new(delta.clone());
        let model = build_loop_model(&sys.ext, &sys.gains, &sys.design, &pattern).unwrap();
        let predicted = model.closed_loop();
        assert!(
            (&jac - &predicted).amax() <= 1e-5 * predicted.amax(),
            "pattern {pattern}: {jac} vs {predicted}"
        );
        checked.insert(delta);
    }
    assert!(checked.len() >= 3, "only {} regions visited", checked.len());
}

#[test]
fn resolvent_matches_eigendecomposition() {
    let study = aircraft();
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &DeltaPattern::inactive(2)).unwrap();
    let l = loop_gain_at(&model, 1.0).unwrap();
    // (jωI - A)⁻¹ = V (jωI - Λ)⁻¹ V⁻¹ with complex eigenvectors from the Schur-free eigen solver
    let a = fcs_core::numerics::to_complex(&model.a_eff);
    let eig = spectrum(&model.a_eff).unwrap();
    let n = 5;
    let mut v = ComplexMatrix::zeros(n, n);
    for (j, lambda) in eig.eigenvalues().iter().enumerate() {
        // repeated eigenvalues take successive null directions
        let repeat = eig.eigenvalues()[..j].iter().filter(|mu| (*mu - lambda).norm() < 1e-9).count();
        let shifted = &a - ComplexMatrix::identity(n, n) * *lambda;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|x, y| svd.singular_values[*x].total_cmp(&svd.singular_values[*y]));
        let col = vt.row(order[repeat]).adjoint();
        v.set_column(j, &col);
    }
    let v_inv = v.clone().lu().try_inverse().unwrap();
    let diag = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        eig.eigenvalues().iter().map(|lam| Complex::new(1.0, 0.0) / (Complex::new(0.0, 1.0) - lam)),
    ));
    let resolvent = &v * diag * v_inv;
    let expected = fcs_core::numerics::to_complex(&model.k_eff) * resolvent * fcs_core::numerics::to_complex(&model.b_u);
    assert!((&l - &expected).norm() <= 1e-8 * expected.norm());
}

#[test]
fn loop_gain_rolls_off() {
    let study = aircraft();
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &DeltaPattern::inactive(2)).unwrap();
    let norms: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
        .iter()
        .map(|w| loop_gain_at(&model, *w).unwrap().norm())
        .collect();
    assert!(norms.windows(2).all(|p| p[1] < p[0] * 0.2));
    assert!(norms[3] < 1e-3);
}

#[test]
fn margins_are_grid_converged() {
    let study = aircraft();
    let coarse = FrequencyGrid::new(1e-3, 1e4, 4000).unwrap();
    let fine = FrequencyGrid::new(1e-3, 1e4, 7999).unwrap();
    for bits in ["0000", "1000", "0100", "1100"] {
        let p: DeltaPattern = bits.parse().unwrap();
        let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &p).unwrap();
        let a = mimo_margins(&model, &coarse, Treatment::Augmented).unwrap();
        let b = mimo_margins(&model, &fine, Treatment::Augmented).unwrap();
        assert!((a.alpha.unwrap() - b.alpha.unwrap()).abs() < 1e-3);
        assert!((a.beta.unwrap() - b.beta.unwrap()).abs() < 1e-3);
        assert_eq!(a.stability, Stability::Stable, "pattern {bits}");
    }
}

#[test]
fn inactive_margins_near_lqr_guarantee() {
    let study = aircraft();
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &DeltaPattern::inactive(2)).unwrap();
    let r = mimo_margins(&model, &study.grid, Treatment::Augmented).unwrap();
    let alpha = r.alpha.unwrap();
    assert!((0.9..=1.0).contains(&alpha), "alpha = {alpha}");
    // single-loop perturbations are a special case of the MIMO guarantee
    let guaranteed = r.alpha_bounds.unwrap();
    for s in &r.siso {
        assert!(s.pm_deg[1] >= guaranteed.pm_deg[1] - 1e-6);
        assert!(s.gm_db[0] <= guaranteed.gm_db[0] + 1e-6);
        assert!(s.gm_db[1] >= guaranteed.gm_db[1] - 1e-6);
    }
    let direct = siso_margins(&model, 0, &study.grid).unwrap();
    assert_eq!(direct, r.siso[0]);
}

#[test]
fn saturation_without_saturated_channels_is_nominal() {
    let study = aircraft();
    let grid = FrequencyGrid::new(1e-3, 1e4, 800).unwrap();
    let sat = saturation_margins(&study.sys.ext, &study.sys.gains, &[false, false], &grid).unwrap();
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &DeltaPattern::inactive(2)).unwrap();
    let nominal = mimo_margins(&model, &grid, Treatment::Saturation).unwrap();
    assert_eq!(sat.alpha, nominal.alpha);
    assert_eq!(sat.beta, nominal.beta);
    assert_eq!(sat.gm_db, nominal.gm_db);
}

#[test]
fn all_active_model_is_well_posed() {
    let study = aircraft();
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, &"1111".parse().unwrap()).unwrap();
    assert!(model.k_eff.iter().chain(model.a_eff.iter()).all(|v| v.is_finite()));
}

#[test]
fn random_riccati_and_lyapunov_residuals() {
    let mut rng = StdRng::seed_from_u64(15);
    for trial in 0..30 {
        let n = 2 + trial % 4;
        let m = 1 + trial % 2;
        let a = random_matrix(&mut rng, n, n, 1.5);
        let b = random_matrix(&mut rng, n, m, 1.0);
        let c = random_matrix(&mut rng, n, n, 1.0);
        let q = c.transpose() * c + RealMatrix::identity(n, n) * 0.1;
        let r = RealMatrix::identity(m, m) * rng.gen_range(0.2..2.0);
        let sol = care_solve(&a, &b, &q, &r).unwrap();
        let s = &b * r.clone().try_inverse().unwrap() * b.transpose();
        assert!(care_residual(&a, &s, &q, &sol.p) <= 1e-9);
        let closed = &a - &b * &sol.k;
        assert!(spectrum(&closed).unwrap().max_real() < 0.0);

        let h = random_hurwitz(&mut rng, n, 0.2);
        let p = lyapunov_solve(&h, &q).unwrap();
        let res = (h.transpose() * &p + &p * &h + &q).norm() / q.norm();
        assert!(res <= 1e-10);
    }
}

#[test]
fn simulation_is_deterministic_and_quiet_at_rest() {
    let study = aircraft();
    let schedule = CommandSchedule::constant(RealVector::zeros(2), 2.0).unwrap();
    for mode in ControllerMode::ALL {
        let a = run(&study.sys, &schedule, &study.sim_config(mode)).unwrap();
        assert!(a.x_p.iter().chain(&a.e_yi).chain(&a.u_total).all(|v| v.iter().all(|x| *x == 0.0)));
    }
    let a = run(&study.sys, &study.schedule, &study.sim_config(ControllerMode::Augmented).with_dt(0.01)).unwrap();
    let b = run(&study.sys, &study.schedule, &study.sim_config(ControllerMode::Augmented).with_dt(0.01)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4001);
}

#[test]
fn gains_must_keep_integrator_invertible() {
    let k_i = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(ServoGains::new(k_i, RealMatrix::zeros(2, 3)).is_err());
}
