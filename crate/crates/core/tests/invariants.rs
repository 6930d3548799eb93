use proptest::prelude::*;

use ncsdp::benchmarks::{
    analytic_scalar_problem, generate_psf, psf_as_nsdp, read_instance, write_instance,
    AffineProblem, CurvedProblem, PsfConfig,
};
use ncsdp::inner::{sigma_min, StepMode};
use ncsdp::merit::{merit_decrease, merit_value};
use ncsdp::verify::{
    merit_direct, merit_fd_errors, sample_iterates, verify_problem, StepAudit, VerifyOptions,
};
use ncsdp::{
    default_schedule, run_inner, run_inner_observed, run_method, Execution, IdentityScaling,
    InnerStatus, IpmParams, Iterate, MeritParams, Method, NsdpProblem, Procedure, SymMat, Vector,
};

fn fixed(mu: f64, nu: f64, max_inner_iters: usize) -> IpmParams {
    IpmParams {
        mu,
        nu,
        eps_g: mu,
        eps_mu: mu.powf(1.2),
        eps_h: mu,
        max_inner_iters,
        step_mode: StepMode::FixedLipschitz,
        ..IpmParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn merit_derivatives_match_finite_differences(seed in 0u64..1000, n in 1usize..4, m in 1usize..4) {
        let prob = CurvedProblem::random(n, m, seed).unwrap();
        let mp = MeritParams::new(0.2, 0.5).unwrap();
        for it in sample_iterates(&prob, &Vector::zeros(n), 0.05, 3, seed).unwrap() {
            let e = merit_fd_errors(&prob, &it, &mp, 1e-5).unwrap();
            prop_assert!(e.grad_x < 1e-5 && e.grad_z < 1e-5 && e.hess_xx < 1e-4, "{e:?}");
        }
    }

    #[test]
    fn decrease_agrees_with_direct_evaluation(seed in 0u64..1000) {
        let prob = CurvedProblem::random(3, 3, seed).unwrap();
        let mp = MeritParams::new(0.1, 0.8).unwrap();
        let its = sample_iterates(&prob, &Vector::zeros(3), 0.05, 2, seed).unwrap();
        let dec = merit_decrease(&prob, &its[0], &its[1], &mp).unwrap();
        let direct = merit_direct(&prob, its[0].x(), its[0].z(), &mp).unwrap()
            - merit_direct(&prob, its[1].x(), its[1].z(), &mp).unwrap();
        prop_assert!((dec - direct).abs() <= 1e-9 * (1.0 + direct.abs()), "{dec} vs {direct}");
    }

    #[test]
    fn fixed_steps_keep_their_guarantee_on_affine_problems(seed in 0u64..1000, n in 1usize..4) {
        let prob = AffineProblem::random(n, 3, seed).unwrap();
        let start = Iterate::on_central_path(&prob, Vector::zeros(n), 0.2).unwrap();
        let c = prob.lipschitz().unwrap();
        let mut audit = StepAudit::default();
        let mut short = 0;
        run_inner_observed(&prob, start, &fixed(0.2, 0.85, 300), &IdentityScaling, |b, a, rec| {
            audit.observe(b, a, rec, c.l0);
            let achieved = rec.merit_before - rec.merit_after;
            if achieved < rec.guaranteed_sigma.unwrap() - 1e-12 * rec.merit_before.abs() {
                short += 1;
            }
        })
        .unwrap();
        prop_assert_eq!(audit.violations(), 0, "{:?}", audit);
        prop_assert_eq!(short, 0);
    }

    #[test]
    fn scalar_inner_solve_respects_the_iteration_bound(c in 0.5f64..3.0, x0 in 0.2f64..2.0, z0 in 0.2f64..2.0) {
        let prob = analytic_scalar_problem(c).unwrap();
        let params = fixed(0.1, 0.1f64.powf(0.1), 10_000);
        let start = Iterate::new(&prob, Vector::from_element(1, x0), SymMat::from_diagonal(&[z0])).unwrap();
        let psi0 = merit_value(&prob, &start, &params.merit()).unwrap();
        let out = run_inner(&prob, start, &params, &IdentityScaling).unwrap();
        prop_assert_eq!(out.status, InnerStatus::Converged);
        let bound = (psi0 - prob.merit_lower_bound(0.1, params.nu)) / sigma_min(&params, prob.lipschitz().unwrap());
        prop_assert!(out.trace.len() as f64 <= bound);
    }
}

#[test]
fn scalar_path_following_tracks_the_central_path() {
    let prob = analytic_scalar_problem(2.0).unwrap();
    let schedule = default_schedule();
    let start = Iterate::on_central_path(&prob, Vector::from_element(1, 1.0), schedule.mu_init).unwrap();
    for method in [Method::Pdipm, Method::Primal] {
        let out = run_method(&prob, start.clone(), method, &schedule, &IpmParams::default(), &IdentityScaling).unwrap();
        let last = out.trace.last().unwrap();
        let x = out.iterate.x()[0];
        assert!((x - last.mu / 2.0).abs() <= 10.0 * last.mu, "{method}: x = {x}, mu = {}", last.mu);
        assert!(last.kkt.stationarity < 1e-4);
    }
}

#[test]
fn primal_variant_keeps_z_on_the_central_path() {
    let prob = CurvedProblem::random(3, 3, 11).unwrap();
    let start = Iterate::on_central_path(&prob, Vector::zeros(3), 0.3).unwrap();
    let schedule = ncsdp::Schedule { total_inner_budget: Some(2000), ..default_schedule() };
    let out = run_method(&prob, start, Method::Primal, &schedule, &IpmParams::default(), &IdentityScaling).unwrap();
    assert!(out.trace.len() > 5);
    assert!(out.trace.iter().all(|r| r.z_sync_error <= 1e-12 && r.counts.dual_grad == 0));
}

#[test]
fn disabling_negative_curvature_removes_it_from_the_trace() {
    let config = PsfConfig { m_rows: 3, n_cols: 3, q: 2, r: 0.3, seed: 2 };
    let prob = psf_as_nsdp(&generate_psf(&config).unwrap(), &config).unwrap();
    let schedule = ncsdp::Schedule { total_inner_budget: Some(200), ..default_schedule() };
    let start = ncsdp::benchmarks::psf_initial_point(&prob, 2, schedule.mu_init).unwrap();
    let mut procs = Vec::new();
    ncsdp::run_method_observed(&prob, start, Method::PdipmNoNc, &schedule, &IpmParams::default(), &IdentityScaling, |_, _, _, r| {
        procs.push(r.procedure)
    })
    .unwrap();
    assert!(!procs.is_empty());
    assert!(!procs.contains(&Procedure::NegCurvature));
}

#[test]
fn instance_text_round_trips_exactly() {
    let inst = generate_psf(&PsfConfig { m_rows: 4, n_cols: 3, q: 2, r: 0.3, seed: 8 }).unwrap();
    let mut buf = Vec::new();
    write_instance(&inst, &mut buf).unwrap();
    let back = read_instance(buf.as_slice()).unwrap();
    assert_eq!(back.v, inst.v);
}

#[test]
fn parallel_and_sequential_verification_agree() {
    let prob = AffineProblem::random(3, 3, 5).unwrap();
    let start = Iterate::on_central_path(&prob, Vector::zeros(3), 0.3).unwrap();
    let opts = VerifyOptions { derivative_samples: 8, lipschitz_pairs: 8, fixed_steps: 30, ..VerifyOptions::default() };
    let seq = verify_problem(&prob, &start, &IdentityScaling, &opts, Execution::Sequential).unwrap();
    let par = verify_problem(&prob, &start, &IdentityScaling, &opts, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert!(seq.all_passed(), "{seq:?}");
}
