mod common;

use common::{edge_loads, item_loads, small_muca, small_ufp, within_capacity};
use flowmech::engine::DualAssignment;
use flowmech::oracle::{
    brute_force_opt_muca, brute_force_opt_ufp, check_dual_feasible, check_dual_feasible_muca, enumerate_paths,
    path_length, OracleLimits,
};
use flowmech::pricing::LoadState;
use flowmech::{
    shortest_path, solve_muca_with, solve_ufp_repeat_with, solve_ufp_with, ExitReason, MucaInstance, NormalizedInstance,
    Selection, SolverConfig, StopRule, Trace, UfpInstance,
};
use proptest::prelude::*;

fn cfg(eps: f64, stop: StopRule) -> SolverConfig<f64> {
    SolverConfig::new(eps).with_stop_rule(stop)
}

fn stop_rule() -> impl Strategy<Value = StopRule> {
    prop_oneof![Just(StopRule::WeightThreshold), Just(StopRule::Exhaustion)]
}

fn check_trace_invariants(trace: &Trace<f64>, single_shot: bool) -> Result<(), TestCaseError> {
    let mut prev_alpha = f64::NEG_INFINITY;
    let mut prev_d1 = f64::NEG_INFINITY;
    for rec in &trace.records {
        if single_shot {
            prop_assert_eq!(rec.d2, rec.primal);
        }
        prop_assert!(rec.alpha >= prev_alpha, "alpha decreased: {} < {}", rec.alpha, prev_alpha);
        prop_assert!(rec.d1 >= prev_d1);
        prev_alpha = rec.alpha;
        prev_d1 = rec.d1;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ufp_json_round_trip(seed in any::<u64>()) {
        let inst = small_ufp(seed, 8, 8, (1.0, 20.0));
        let back = UfpInstance::<f64>::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn muca_json_round_trip(seed in any::<u64>()) {
        let inst = small_muca(seed, 6, 8, (1, 5));
        let back = MucaInstance::<f64>::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let mut inst = small_ufp(seed, 6, 6, (1.0, 5.0));
        for r in &mut inst.requests {
            r.demand *= scale;
        }
        let once = NormalizedInstance::normalize(&inst);
        let twice = NormalizedInstance::normalize(once.inner());
        prop_assert_eq!(twice.inner(), once.inner());
        prop_assert_eq!(twice.scale(), 1.0);
        prop_assert_eq!(twice.b(), once.b());
        let max = once.inner().requests.iter().map(|r| r.demand).fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
    }

    #[test]
    fn shortest_path_matches_enumeration(seed in any::<u64>(), weights in prop::collection::vec(0.0f64..10.0, 16)) {
        let inst = small_ufp(seed, 7, 4, (1.0, 1.0));
        let w: Vec<f64> = (0..inst.edge_count()).map(|e| weights[e % weights.len()]).collect();
        for r in &inst.requests {
            let Ok(all) = enumerate_paths(&inst, r.source, r.target, 10_000) else { continue };
            let best = all.iter().map(|p| path_length(&w, p)).fold(f64::INFINITY, f64::min);
            let found = shortest_path(&inst, &w, r.source, r.target).unwrap();
            prop_assert!(found.is_simple_walk(&inst));
            prop_assert!((found.length - best).abs() <= 1e-12 * best.max(1.0));
            let sum: f64 = found.edges.iter().map(|&e| w[e]).sum();
            prop_assert!((found.length - sum).abs() <= 4.0 * f64::EPSILON * sum.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn raising_a_weight_never_shortens(seed in any::<u64>(), edge in 0usize..64, bump in 0.0f64..5.0) {
        let inst = small_ufp(seed, 8, 4, (1.0, 1.0));
        let w: Vec<f64> = (0..inst.edge_count()).map(|e| 1.0 + (e % 3) as f64).collect();
        let mut raised = w.clone();
        raised[edge % inst.edge_count()] += bump;
        for r in &inst.requests {
            let a = shortest_path(&inst, &w, r.source, r.target).unwrap();
            let b = shortest_path(&inst, &raised, r.source, r.target).unwrap();
            prop_assert!(b.length >= a.length);
        }
    }

    #[test]
    fn weights_grow_with_load(load in 0.0f64..50.0, extra in 0.0f64..10.0, cap in 1.0f64..50.0, eps in 0.01f64..1.0, b in 1.0f64..50.0) {
        let y0 = flowmech::pricing::edge_weight(load, cap, eps, b);
        let y1 = flowmech::pricing::edge_weight(load + extra, cap, eps, b);
        prop_assert!(y1 >= y0);
        prop_assert!(y0 >= 1.0 / cap);
    }

    #[test]
    fn lazy_and_eager_select_identically(seed in any::<u64>(), eps in 0.05f64..1.0, stop in stop_rule()) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 10, (2.0, 15.0)));
        let lazy = solve_ufp_with(&inst, &cfg(eps, stop)).unwrap();
        let eager = solve_ufp_with(&inst, &cfg(eps, stop).with_selection(Selection::Eager)).unwrap();
        prop_assert_eq!(&lazy.trace, &eager.trace);
        let lazy = solve_ufp_repeat_with(&inst, &cfg(eps, stop)).unwrap();
        let eager = solve_ufp_repeat_with(&inst, &cfg(eps, stop).with_selection(Selection::Eager)).unwrap();
        prop_assert_eq!(&lazy.trace, &eager.trace);
        let m = small_muca(seed, 6, 10, (1, 8));
        let lazy = solve_muca_with(&m, &cfg(eps, stop)).unwrap();
        let eager = solve_muca_with(&m, &cfg(eps, stop).with_selection(Selection::Eager)).unwrap();
        prop_assert_eq!(&lazy.trace, &eager.trace);
    }

    #[test]
    fn ufp_runs_are_feasible_exact_and_certified(seed in any::<u64>(), eps in 0.05f64..1.0, stop in stop_rule()) {
        let raw = small_ufp(seed, 10, 12, (1.0, 20.0));
        let inst = NormalizedInstance::normalize(&raw);
        let sol = solve_ufp_with(&inst, &cfg(eps, stop)).unwrap();
        let load = edge_loads(inst.inner(), sol.allocation.iter().map(|a| (a.request, a.path.edges.clone(), 1)));
        prop_assert!(within_capacity(inst.inner(), &load));
        let mut seen = vec![false; raw.requests.len()];
        let mut value = 0.0;
        for a in &sol.allocation {
            prop_assert!(!seen[a.request], "request allocated twice");
            seen[a.request] = true;
            prop_assert!(a.path.is_simple_walk(inst.inner()));
            value += raw.requests[a.request].value;
        }
        prop_assert!((value - sol.primal_value).abs() <= 1e-9 * value.max(1.0));
        prop_assert!(sol.dual_certificate >= sol.primal_value * (1.0 - 1e-12));
        check_trace_invariants(&sol.trace, true)?;
        if stop == StopRule::WeightThreshold && sol.exit_reason() == ExitReason::WeightThreshold {
            let mut st = LoadState::new(inst.inner().edges.iter().map(|e| e.capacity).collect(), eps, inst.b());
            for a in &sol.allocation {
                st.route(&a.path.edges, inst.inner().requests[a.request].demand);
            }
            prop_assert!(!st.within_threshold());
        }
    }

    #[test]
    fn scaled_duals_are_feasible_on_every_iteration(seed in any::<u64>(), eps in 0.05f64..1.0) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 10, (2.0, 20.0)));
        let g = inst.inner();
        let sol = solve_ufp_with(&inst, &cfg(eps, StopRule::WeightThreshold)).unwrap();
        let mut st = LoadState::new(g.edges.iter().map(|e| e.capacity).collect(), eps, inst.b());
        let mut z = vec![0.0; g.requests.len()];
        for rec in &sol.trace.records {
            let dual = DualAssignment {
                y: st.weights().iter().map(|w| w / rec.alpha).collect(),
                z: Some(z.clone()),
            };
            let v = check_dual_feasible(g, &dual);
            prop_assert!(v.is_empty(), "iteration {}: {:?}", rec.iteration, v);
            st.route(&rec.resources, g.requests[rec.request].demand);
            z[rec.request] = g.requests[rec.request].value;
        }
        let v = check_dual_feasible(g, &sol.certificate.dual);
        prop_assert!(v.is_empty());
    }

    #[test]
    fn muca_runs_are_feasible_and_certified(seed in any::<u64>(), eps in 0.05f64..1.0, stop in stop_rule()) {
        let inst = small_muca(seed, 6, 12, (1, 10));
        let sol = solve_muca_with(&inst, &cfg(eps, stop)).unwrap();
        let load = item_loads(&inst, &sol.winners);
        prop_assert!(load.iter().zip(inst.items()).all(|(l, i)| *l <= i.multiplicity));
        prop_assert!(sol.dual_certificate >= sol.primal_value * (1.0 - 1e-12));
        check_trace_invariants(&sol.trace, true)?;
        if stop == StopRule::WeightThreshold {
            let mut st = LoadState::new(inst.items().iter().map(|i| i.multiplicity as f64).collect(), eps, inst.b() as f64);
            let mut z = vec![0.0; inst.requests().len()];
            for rec in &sol.trace.records {
                let dual = DualAssignment { y: st.weights().iter().map(|w| w / rec.alpha).collect(), z: Some(z.clone()) };
                prop_assert!(check_dual_feasible_muca(&inst, &dual).is_empty());
                st.route(&rec.resources, 1.0);
                z[rec.request] = inst.requests()[rec.request].value;
            }
        }
    }

    #[test]
    fn repeat_runs_are_feasible_and_certified(seed in any::<u64>(), eps in 0.1f64..1.0, stop in stop_rule()) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 6, (1.0, 8.0)));
        let sol = solve_ufp_repeat_with(&inst, &cfg(eps, stop)).unwrap();
        let load = edge_loads(inst.inner(), sol.allocation.iter().map(|a| (a.request, a.path.edges.clone(), a.count)));
        prop_assert!(within_capacity(inst.inner(), &load));
        prop_assert!(sol.dual_certificate >= sol.primal_value * (1.0 - 1e-12));
        prop_assert!(sol.certificate.dual.z.is_none());
        check_trace_invariants(&sol.trace, false)?;
        let m = inst.inner().edge_count() as f64;
        let c_max = inst.inner().max_capacity();
        prop_assert!(sol.routings() as f64 <= m * c_max / 0.1);
    }

    #[test]
    fn value_raise_and_demand_cut_keep_winners(seed in any::<u64>(), eps in 0.1f64..1.0, u in 0.1f64..1.0, w in 1.0f64..10.0) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 10, (2.0, 10.0)));
        let config = cfg(eps, StopRule::WeightThreshold);
        let sol = solve_ufp_with(&inst, &config).unwrap();
        for a in &sol.allocation {
            let r = &inst.inner().requests[a.request];
            let lower = inst.with_report(a.request, r.demand * u, r.value).unwrap();
            prop_assert!(solve_ufp_with(&lower, &config).unwrap().is_allocated(a.request));
            let higher = inst.with_report(a.request, r.demand, r.value * w).unwrap();
            prop_assert!(solve_ufp_with(&higher, &config).unwrap().is_allocated(a.request));
        }
    }

    #[test]
    fn muca_winners_stay_with_higher_value_or_smaller_bundle(seed in any::<u64>(), eps in 0.1f64..1.0, w in 1.0f64..10.0) {
        let inst = small_muca(seed, 6, 10, (1, 6));
        let config = SolverConfig::new(eps);
        let sol = solve_muca_with(&inst, &config).unwrap();
        for &r in &sol.winners {
            let req = &inst.requests()[r];
            let higher = inst.with_value(r, req.value * w).unwrap();
            prop_assert!(solve_muca_with(&higher, &config).unwrap().is_winner(r));
            if req.bundle.len() > 1 {
                let subset = inst.with_bundle(r, req.bundle[..req.bundle.len() - 1].to_vec()).unwrap();
                prop_assert!(solve_muca_with(&subset, &config).unwrap().is_winner(r));
            }
        }
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>(), eps in 0.05f64..1.0) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 10, (1.0, 10.0)));
        let a = solve_ufp_with(&inst, &SolverConfig::new(eps)).unwrap();
        let b = solve_ufp_with(&inst, &SolverConfig::new(eps)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalized_and_original_allocations_agree(seed in any::<u64>(), scale in 0.5f64..4.0) {
        // Scaling all demands and capacities by a common factor leaves the run unchanged.
        let raw = small_ufp(seed, 8, 8, (1.0, 10.0));
        let mut scaled = raw.clone();
        for e in &mut scaled.edges {
            e.capacity *= scale;
        }
        for r in &mut scaled.requests {
            r.demand *= scale;
        }
        let a = solve_ufp_with(&NormalizedInstance::normalize(&raw), &SolverConfig::new(0.5)).unwrap();
        let b = solve_ufp_with(&NormalizedInstance::normalize(&scaled), &SolverConfig::new(0.5)).unwrap();
        let pick = |s: &flowmech::UfpSolution<f64>| s.allocation.iter().map(|x| (x.request, x.path.edges.clone())).collect::<Vec<_>>();
        prop_assert_eq!(pick(&a), pick(&b));
    }

    #[test]
    fn primal_oracle_and_certificate_are_ordered(seed in any::<u64>(), eps in 0.05f64..1.0, stop in stop_rule()) {
        let raw = small_ufp(seed, 6, 7, (1.0, 10.0));
        let inst = NormalizedInstance::normalize(&raw);
        let limits = OracleLimits { max_requests: 10, max_paths: 64 };
        let Ok(opt) = brute_force_opt_ufp(&raw, &limits) else { return Ok(()) };
        let sol = solve_ufp_with(&inst, &cfg(eps, stop)).unwrap();
        prop_assert!(sol.primal_value <= opt.value * (1.0 + 1e-12));
        prop_assert!(opt.value <= sol.dual_certificate * (1.0 + 1e-9), "opt {} cert {}", opt.value, sol.dual_certificate);

        let m = small_muca(seed, 5, 9, (1, 6));
        let opt = brute_force_opt_muca(&m, 10).unwrap();
        let sol = solve_muca_with(&m, &cfg(eps, stop)).unwrap();
        prop_assert!(sol.primal_value <= opt.value * (1.0 + 1e-12));
        prop_assert!(opt.value <= sol.dual_certificate * (1.0 + 1e-9));
    }

    #[test]
    fn single_precision_runs_are_feasible(seed in any::<u64>(), eps in 0.1f32..1.0) {
        let raw = small_ufp(seed, 8, 8, (1.0, 10.0));
        let narrow = UfpInstance::<f32>::from_json(&raw.to_json()).unwrap();
        let inst = NormalizedInstance::normalize(&narrow);
        let sol = solve_ufp_with(&inst, &SolverConfig::new(eps)).unwrap();
        let mut load = vec![0.0f32; narrow.edge_count()];
        for a in &sol.allocation {
            for &e in &a.path.edges {
                load[e] += inst.inner().requests[a.request].demand;
            }
        }
        for (l, e) in load.iter().zip(&inst.inner().edges) {
            prop_assert!(*l <= e.capacity * (1.0 + 1e-5));
        }
        prop_assert!(sol.dual_certificate >= sol.primal_value * (1.0 - 1e-5));
    }

    #[test]
    fn repetition_never_lowers_the_value(seed in any::<u64>(), eps in 0.1f64..1.0, stop in stop_rule()) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 8, 8, (1.0, 8.0)));
        let single = solve_ufp_with(&inst, &cfg(eps, stop)).unwrap();
        let repeat = solve_ufp_repeat_with(&inst, &cfg(eps, stop)).unwrap();
        prop_assert!(repeat.primal_value >= single.primal_value * (1.0 - 1e-12),
            "repeat {} < single {}", repeat.primal_value, single.primal_value);
    }

    #[test]
    fn winning_reports_form_an_upper_interval(seed in any::<u64>(), eps in 0.1f64..1.0) {
        let inst = NormalizedInstance::normalize(&small_ufp(seed, 6, 6, (2.0, 8.0)));
        let config = SolverConfig::new(eps);
        let n = inst.inner().requests.len();
        let r = (seed as usize) % n;
        let d = inst.inner().requests[r].demand;
        let outcomes: Vec<bool> = (1..=60)
            .map(|k| {
                let report = inst.with_report(r, d, k as f64 * 0.25).unwrap();
                solve_ufp_with(&report, &config).unwrap().is_allocated(r)
            })
            .collect();
        let first = outcomes.iter().position(|w| *w).unwrap_or(outcomes.len());
        prop_assert!(outcomes[first..].iter().all(|w| *w), "{:?}", outcomes);
    }
}
