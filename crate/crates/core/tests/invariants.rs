//! Property tests over random vectors and random feasible scenes.

use proptest::prelude::*;

use hybrid_avoid::config::ScenarioConfig;
use hybrid_avoid::geometry::{cone_form, orth_proj_apply, par_proj_apply, reflect_apply};
use hybrid_avoid::params::mu_min;
use hybrid_avoid::sim::rk4_flow_step;
use hybrid_avoid::verify::lyapunov;
use hybrid_avoid::verify::sampling::{in_shell, random_params, rng};
use hybrid_avoid::verify::suites::random_law;
use hybrid_avoid::{validate, ControlLaw, Mode, ParamError, VecN};

fn vec_n(n: usize) -> impl Strategy<Value = VecN> {
    prop::collection::vec(-10.0..10.0f64, n).prop_map(|e| VecN::new(e).unwrap())
}

fn nonzero_pair() -> impl Strategy<Value = (VecN, VecN)> {
    (2usize..7)
        .prop_flat_map(|n| (vec_n(n), vec_n(n)))
        .prop_filter("direction must not vanish", |(z, _)| z.norm() > 1e-3)
}

proptest! {
    #[test]
    fn projections_split_x((z, x) in nonzero_pair()) {
        let par = par_proj_apply(&z, &x).unwrap();
        let orth = orth_proj_apply(&z, &x).unwrap();
        let scale = x.norm().max(1.0);
        prop_assert!((&par + &orth).max_abs_diff(&x) <= 1e-12 * scale);
        prop_assert!(orth.dot(&z).abs() <= 1e-10 * scale * z.norm());
    }

    #[test]
    fn reflection_is_an_isometric_involution((z, x) in nonzero_pair()) {
        let r = reflect_apply(&z, &x).unwrap();
        let scale = x.norm().max(1.0);
        prop_assert!((r.norm() - x.norm()).abs() <= 1e-12 * scale);
        prop_assert!(reflect_apply(&z, &r).unwrap().max_abs_diff(&x) <= 1e-12 * scale);
    }

    #[test]
    fn cone_form_sign_matches_angle((v, y) in nonzero_pair(), theta in 0.05..1.5f64) {
        prop_assume!(y.norm() > 1e-3);
        let vertex = VecN::zeros(v.dim());
        let q = cone_form(&vertex, &v, theta, &y).unwrap();
        let cos = (v.dot(&y) / (v.norm() * y.norm())).abs().min(1.0);
        let angle = cos.acos();
        prop_assume!((angle - theta).abs() > 1e-6);
        prop_assert_eq!(q < 0.0, angle < theta);
    }

    #[test]
    fn random_scenes_validate(n in 2usize..7, seed in any::<u64>()) {
        let raw = random_params(&mut rng(seed), n);
        let p = validate(raw.clone()).unwrap();
        prop_assert!(p.mu_min() < p.mu() && p.psi() < p.psi_bar() && p.psi_bar() < p.psi_max());
        let mut low = raw;
        low.mu = 0.5 * mu_min(&low.obstacle, low.eps_h).unwrap();
        prop_assert!(matches!(validate(low), Err(ParamError::ValidationFailure(_))));
    }

    #[test]
    fn stabilizing_feedback_is_linear(n in 2usize..7, seed in 0u64..64, x in vec_n(6)) {
        let law = random_law(n, seed).unwrap();
        let x = VecN::from_slice(&x.as_slice()[..n]).unwrap();
        prop_assume!(x.dist(law.params().center()) > law.params().epsilon());
        let u = law.kappa(&x, Mode::Stabilize).unwrap();
        prop_assert_eq!(u, x.scale(-law.gain(Mode::Stabilize)));
    }

    #[test]
    fn jump_select_is_deterministic_and_leaves_the_jump_set(n in 2usize..7, seed in 0u64..64, draw in any::<u64>()) {
        let law = random_law(n, seed).unwrap();
        let p = law.params();
        let x = in_shell(&mut rng(draw), p.center(), p.epsilon(), p.eps_s());
        prop_assume!(law.jump_set_contains(&x, Mode::Stabilize, 0.0));
        let a = law.jump_select(&x, Mode::Stabilize, 0.0).unwrap();
        let b = law.jump_select(&x, Mode::Stabilize, 0.0).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.mode.is_avoidance());
        prop_assert!(law.flow_set_contains(&x, a.mode, 0.0));
        prop_assert!(!law.jump_set_contains(&x, a.mode, 0.0));
    }

    #[test]
    fn lyapunov_drops_over_one_flow_step(n in 2usize..7, seed in 0u64..64, draw in any::<u64>(), mi in 0usize..3) {
        let law = random_law(n, seed).unwrap();
        let p = law.params();
        let m = [Mode::AvoidMinus, Mode::Stabilize, Mode::AvoidPlus][mi];
        let x = in_shell(&mut rng(draw), p.center(), p.epsilon(), 3.0 * p.eps_h());
        prop_assume!(law.flow_margin(&x, m) < -1e-6);
        prop_assume!(lyapunov(&law, &x, m) > 1e-6);
        let next = rk4_flow_step(&law, &x, m, 1e-3).unwrap();
        prop_assert!(lyapunov(&law, &next, m) <= lyapunov(&law, &x, m));
    }
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let cfg = ScenarioConfig::reference_3d();
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let back = ScenarioConfig::load(&path).unwrap();
    assert_eq!(back, cfg);
    let law = ControlLaw::new(validate(back.raw_params().unwrap()).unwrap());
    assert_eq!(law.params().p_minus1(), validate(cfg.raw_params().unwrap()).unwrap().p_minus1());
}
