use proptest::prelude::*;

use mess_plus::controller::{queue_update, select_model, Controller, ControllerConfig};
use mess_plus::harness::{run_policy, Policy, RunSpec};
use mess_plus::predictor::PredictorSettings;
use mess_plus::zoo::{query_all, synth_trace, SynthConfig, TraceBackend, TraceRecord};

fn spec(policy: Policy, seed: u64, v: f64, c: f64) -> RunSpec {
    RunSpec {
        policy,
        controller: ControllerConfig {
            v,
            c,
            seed,
            ..Default::default()
        },
        predictor: PredictorSettings {
            dim: 1 << 12,
            ..Default::default()
        },
        sla_alpha: 0.52,
    }
}

fn trace(n: usize, seed: u64) -> Vec<TraceRecord> {
    synth_trace(&SynthConfig::wmt14_two_model(n), seed).unwrap()
}

fn brute_force_argmin(objectives: &[f64], energies: &[f64]) -> usize {
    let mut best = 0;
    for m in 0..objectives.len() {
        let better = objectives[m] < objectives[best]
            || (objectives[m] == objectives[best] && energies[m] < energies[best]);
        if better {
            best = m;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queue_never_negative_and_telescopes(
        alpha in 0.0f64..1.0,
        q0 in 0.0f64..5.0,
        accs in prop::collection::vec(0.0f64..=1.0, 1..300),
    ) {
        let mut q = q0;
        let mut deficit = 0.0;
        for &a in &accs {
            q = queue_update(q, alpha, a).unwrap();
            deficit += alpha - a;
            prop_assert!(q >= 0.0);
            // Q(t+1) >= Q(1) + sum of deficits.
            prop_assert!(q >= q0 + deficit - 1e-9);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        prop_assert!(mean >= alpha - (q - q0) / accs.len() as f64 - 1e-9);
    }

    #[test]
    fn select_model_matches_brute_force(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 1..12),
    ) {
        let objectives: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 0.5).collect();
        let energies: Vec<f64> = pairs.iter().map(|p| p.1 as f64 * 100.0).collect();
        prop_assert_eq!(select_model(&objectives, &energies).unwrap(), brute_force_argmin(&objectives, &energies));
    }

    #[test]
    fn controller_invariants(seed in any::<u64>(), c in 0.1f64..5.0, steps in 1usize..400) {
        let mut ctl = Controller::new(ControllerConfig { seed, c, ..Default::default() }).unwrap();
        for i in 0..steps {
            let t = ctl.state().t;
            let d = ctl.step(&[44.6, 527.9], &[0.49, 0.55]).unwrap();
            if !d.explored {
                let min = d.objectives.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert_eq!(d.objectives[d.chosen_model], min);
            }
            ctl.observe(if i % 2 == 0 { 0.3 } else { 0.7 }).unwrap();
            prop_assert_eq!(ctl.state().t, t + 1);
            prop_assert!(ctl.queue() >= 0.0);
            prop_assert!(ctl.state().explorations <= ctl.state().t);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let tr = trace(600, 4);
    for policy in [
        Policy::MessPlus,
        Policy::RandomConstrained { q_large: Some(0.4) },
        Policy::SmallestOnly,
    ] {
        let a = run_policy(&spec(policy, 9, 0.1, 3.0), &tr).unwrap();
        let b = run_policy(&spec(policy, 9, 0.1, 3.0), &tr).unwrap();
        assert_eq!(a.steps, b.steps, "{policy}");
        assert_eq!(a.report, b.report, "{policy}");
    }
}

#[test]
fn report_totals_match_step_log() {
    let tr = trace(1500, 2);
    let out = run_policy(&spec(Policy::MessPlus, 1, 0.1, 3.0), &tr).unwrap();
    let r = &out.report;
    let t = out.steps.len() as f64;
    let acc: f64 = out.steps.iter().map(|s| s.accuracy).sum::<f64>() / t;
    let energy: f64 = out.steps.iter().map(|s| s.energy_joules).sum();
    assert!((r.mean_accuracy - acc).abs() < 1e-9);
    assert!((r.total_energy_joules - energy).abs() < 1e-6);
    assert_eq!(r.per_model_selection_counts.iter().sum::<u64>(), r.t);
    assert_eq!(r.queue_trajectory.len() as u64, r.t + 1);
    assert_eq!(
        r.exploration_count,
        out.steps.iter().filter(|s| s.explored).count() as u64
    );

    // Exploration overhead: every model's energy minus the served one.
    let backend = TraceBackend::new(2);
    let mut overhead = 0.0;
    for (s, rec) in out.steps.iter().zip(&tr) {
        if s.explored {
            let q = query_all(&backend, rec).unwrap();
            assert!((s.energy_joules - q.total_energy_joules).abs() < 1e-9);
            overhead += q.total_energy_joules - rec.per_model[s.chosen_model].energy_joules;
        }
    }
    assert!((r.exploration_overhead_joules - overhead).abs() < 1e-6);
}

#[test]
fn exploration_overhead_per_request_shrinks_with_t() {
    let per_request = |n: usize| {
        let out = run_policy(&spec(Policy::MessPlus, 3, 0.1, 3.0), &trace(n, 3)).unwrap();
        out.report.exploration_overhead_joules / n as f64
    };
    let (a, b, c) = (per_request(1000), per_request(4000), per_request(16000));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn largest_share_non_increasing_in_v() {
    // Predictions held fixed; only V changes.
    let energies = [44.6, 527.9];
    let predicted = [0.45, 0.60];
    let accs: Vec<f64> = (0..2000)
        .map(|i| if i % 3 == 0 { 0.3 } else { 0.6 })
        .collect();
    let mut prev = u64::MAX;
    for v in [0.0, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0] {
        let mut ctl = Controller::new(ControllerConfig {
            v,
            c: 1e-3,
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        let mut large = 0;
        for &a in &accs {
            let d = ctl.step(&energies, &predicted).unwrap();
            if d.chosen_model == 1 {
                large += 1;
            }
            ctl.observe(if d.chosen_model == 1 {
                a + 0.05
            } else {
                a - 0.05
            })
            .unwrap();
        }
        assert!(large <= prev, "V={v}: {large} > {prev}");
        prev = large;
    }
}

#[test]
fn exploration_grows_with_c_and_saturates() {
    let tr = trace(3000, 8);
    let mut prev = 0;
    for c in [0.5, 1.0, 3.0, 5.0, 10.0] {
        let k = run_policy(&spec(Policy::MessPlus, 8, 0.1, c), &tr)
            .unwrap()
            .report
            .exploration_count;
        assert!(k >= prev, "c={c}");
        prev = k;
    }
    // c^3 >= T makes p_t = 1 throughout.
    let all = run_policy(&spec(Policy::MessPlus, 8, 0.1, 15.0), &tr).unwrap();
    assert_eq!(all.report.exploration_count, 3000);
}

#[test]
fn baselines_reproduce_calibration_targets() {
    let tr = trace(20_000, 1);
    let large = run_policy(&spec(Policy::LargestOnly, 0, 0.1, 3.0), &tr)
        .unwrap()
        .report;
    let small = run_policy(&spec(Policy::SmallestOnly, 0, 0.1, 3.0), &tr)
        .unwrap()
        .report;
    assert!(
        (large.mean_accuracy - 0.551).abs() < 0.005,
        "{}",
        large.mean_accuracy
    );
    assert!((large.mean_energy_joules - 527.870).abs() / 527.870 < 0.01);
    assert!(large.sla_met);
    assert!(
        (small.mean_accuracy - 0.491).abs() < 0.005,
        "{}",
        small.mean_accuracy
    );
    assert!(!small.sla_met);
    for r in [&large, &small] {
        assert!(large.mean_energy_joules >= r.mean_energy_joules);
    }
}

#[test]
fn fixed_policy_on_single_model_zoo() {
    let mut cfg = SynthConfig::wmt14_two_model(50);
    cfg.models.truncate(1);
    let tr = synth_trace(&cfg, 0).unwrap();
    let mut s = spec(Policy::Fixed { model: 0 }, 0, 0.1, 3.0);
    s.controller.num_models = 1;
    let r = run_policy(&s, &tr).unwrap().report;
    assert_eq!(r.per_model_selection_counts, vec![50]);
}

#[test]
fn zoo_shape_mismatch_is_config_error() {
    let tr = trace(10, 0);
    let mut s = spec(Policy::MessPlus, 0, 0.1, 3.0);
    s.controller.num_models = 3;
    let err = run_policy(&s, &tr).unwrap_err();
    assert!(err.to_string().contains("config"), "{err}");
}
