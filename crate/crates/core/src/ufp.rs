//! Bounded unsplittable flow: monotone primal-dual routing with
//! exponentially priced edges.

use serde::{Deserialize, Serialize};

use crate::engine::{self, Certificate, ExitReason, Market, RunParams, Selection, StopRule, Trace};
use crate::model::{NormalizedInstance, UfpInstance};
use crate::oracle;
use crate::path::{Graph, Path};
use crate::pricing::LoadState;
use crate::scalar::Scalar;
use crate::SolveError;

/// Parameters shared by the single-shot and repeat solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<S> {
    pub epsilon: S,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(skip)]
    pub selection: Selection,
}

impl<S: Scalar> SolverConfig<S> {
    pub fn new(epsilon: S) -> Self {
        SolverConfig {
            epsilon,
            stop_rule: StopRule::WeightThreshold,
            selection: Selection::Lazy,
        }
    }

    pub fn with_stop_rule(mut self, stop_rule: StopRule) -> Self {
        self.stop_rule = stop_rule;
        self
    }

    pub fn with_selection(mut self, selection: Selection) -> Self {
        self.selection = selection;
        self
    }
}

pub(crate) struct UfpMarket<'a, S> {
    pub inst: &'a UfpInstance<S>,
    pub graph: Graph,
}

impl<'a, S: Scalar> UfpMarket<'a, S> {
    pub fn new(inst: &'a UfpInstance<S>) -> Self {
        UfpMarket {
            inst,
            graph: Graph::new(inst),
        }
    }

    pub fn capacities(&self) -> Vec<S> {
        self.inst.edges.iter().map(|e| e.capacity).collect()
    }
}

impl<S: Scalar> Market<S> for UfpMarket<'_, S> {
    fn request_count(&self) -> usize {
        self.inst.requests.len()
    }

    fn demand(&self, r: usize) -> S {
        self.inst.requests[r].demand
    }

    fn value(&self, r: usize) -> S {
        self.inst.requests[r].value
    }

    fn cheapest(&self, r: usize, state: &LoadState<S>, fitting_only: bool) -> Option<(S, Vec<usize>)> {
        let req = &self.inst.requests[r];
        let path = if fitting_only {
            self.graph
                .shortest_path_filtered(state.weights(), req.source, req.target, |e| state.fits(e, req.demand))
        } else {
            self.graph.shortest_path(state.weights(), req.source, req.target)
        }?;
        Some((path.length, path.edges))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedRequest<S> {
    pub request: usize,
    pub id: String,
    pub path: Path<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UfpSolution<S> {
    pub allocation: Vec<RoutedRequest<S>>,
    pub primal_value: S,
    pub dual_certificate: S,
    pub certificate: Certificate<S>,
    pub trace: Trace<S>,
    pub epsilon: S,
    pub b: S,
}

impl<S: Scalar> UfpSolution<S> {
    pub fn exit_reason(&self) -> ExitReason {
        self.trace.exit_reason
    }

    pub fn is_allocated(&self, request: usize) -> bool {
        self.allocation.iter().any(|a| a.request == request)
    }

    /// Per-edge load of the allocation.
    pub fn edge_loads(&self, inst: &UfpInstance<S>) -> Vec<S> {
        let mut loads = vec![S::zero(); inst.edge_count()];
        for a in &self.allocation {
            for &e in &a.path.edges {
                loads[e] = loads[e] + inst.requests[a.request].demand;
            }
        }
        loads
    }
}

/// Runs the single-shot solver with the default configuration.
pub fn solve_ufp<S: Scalar>(inst: &NormalizedInstance<S>, epsilon: S) -> Result<UfpSolution<S>, SolveError> {
    solve_ufp_with(inst, &SolverConfig::new(epsilon))
}

pub fn solve_ufp_with<S: Scalar>(
    inst: &NormalizedInstance<S>,
    config: &SolverConfig<S>,
) -> Result<UfpSolution<S>, SolveError> {
    engine::check_params(config.epsilon, inst.b())?;
    let market = UfpMarket::new(inst.inner());
    let params = RunParams {
        epsilon: config.epsilon,
        b: inst.b(),
        stop_rule: config.stop_rule,
        selection: config.selection,
        repeat: false,
    };
    let trace = engine::run(&market, market.capacities(), &params)?;
    let certificate = dual_certificate(&trace, inst, config.epsilon)?;
    let requests = &inst.inner().requests;
    let allocation = trace
        .records
        .iter()
        .map(|rec| RoutedRequest {
            request: rec.request,
            id: requests[rec.request].id.clone(),
            path: Path {
                edges: rec.resources.clone(),
                source: requests[rec.request].source,
                target: requests[rec.request].target,
                length: rec.length,
            },
        })
        .collect();
    Ok(UfpSolution {
        allocation,
        primal_value: trace.primal_value(),
        dual_certificate: certificate.value,
        certificate,
        trace,
        epsilon: config.epsilon,
        b: inst.b(),
    })
}

/// Upper bound on the fractional optimum derived from a finished run.
///
/// Returns the best of the scaled-price duals over all traced states and the
/// value cover, after checking the chosen dual against every constraint.
pub fn dual_certificate<S: Scalar>(
    trace: &Trace<S>,
    inst: &NormalizedInstance<S>,
    epsilon: S,
) -> Result<Certificate<S>, SolveError> {
    let market = UfpMarket::new(inst.inner());
    let cert = engine::certificate(&market, market.capacities(), epsilon, inst.b(), trace);
    let violations = oracle::check_dual_feasible(inst.inner(), &cert.dual);
    if let Some(v) = violations.first() {
        return Err(SolveError::Invariant(format!(
            "dual certificate violates the constraint of request {} by {}",
            v.request, v.slack
        )));
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Edge, Request};

    fn single(cap: f64, d: f64, v: f64) -> NormalizedInstance<f64> {
        let inst = UfpInstance::new(
            true,
            2,
            vec![Edge { tail: 0, head: 1, capacity: cap }],
            vec![Request { id: "r".into(), source: 0, target: 1, demand: d, value: v }],
        )
        .unwrap();
        NormalizedInstance::normalize(&inst)
    }

    #[test]
    fn single_request_is_allocated() {
        let sol = solve_ufp(&single(10.0, 1.0, 5.0), 0.1).unwrap();
        assert_eq!(sol.primal_value, 5.0);
        assert_eq!(sol.allocation.len(), 1);
        assert_eq!(sol.allocation[0].path.edges, vec![0]);
        assert_eq!(sol.exit_reason(), ExitReason::ListEmpty);
        assert!(sol.dual_certificate >= sol.primal_value);
        // Bound at the initial state: D1(0) / alpha(0) + D2(0) = 1 / 0.02 = 50.
        assert!(sol.dual_certificate <= 50.0 + 1e-9);
    }

    #[test]
    fn single_request_in_f32() {
        let inst = single(10.0, 1.0, 5.0).into_inner().cast::<f32>();
        let sol = solve_ufp(&NormalizedInstance::normalize(&inst), 0.1f32).unwrap();
        assert_eq!(sol.primal_value, 5.0f32);
    }

    #[test]
    fn refuses_small_b_and_bad_epsilon() {
        assert!(matches!(solve_ufp(&single(1.0, 5.0, 1.0), 0.1), Err(SolveError::BTooSmall(_))));
        assert!(matches!(solve_ufp(&single(10.0, 1.0, 1.0), 0.0), Err(SolveError::EpsilonOutOfRange(_))));
        assert!(matches!(solve_ufp(&single(10.0, 1.0, 1.0), 1.5), Err(SolveError::EpsilonOutOfRange(_))));
    }

    #[test]
    fn stop_condition_checked_before_first_iteration() {
        // m = 2 > exp(eps (B - 1)) = 1 when B = 1: nothing is routed.
        let inst = UfpInstance::new(
            true,
            3,
            vec![Edge { tail: 0, head: 1, capacity: 1.0 }, Edge { tail: 1, head: 2, capacity: 1.0 }],
            vec![Request { id: "r".into(), source: 0, target: 2, demand: 1.0, value: 1.0 }],
        )
        .unwrap();
        let sol = solve_ufp(&NormalizedInstance::normalize(&inst), 0.5).unwrap();
        assert!(sol.allocation.is_empty());
        assert_eq!(sol.exit_reason(), ExitReason::WeightThreshold);
        assert!(sol.dual_certificate >= 1.0);
    }

    #[test]
    fn unroutable_requests_are_dropped() {
        let inst = UfpInstance::new(
            true,
            3,
            vec![Edge { tail: 0, head: 1, capacity: 10.0 }],
            vec![
                Request { id: "a".into(), source: 1, target: 0, demand: 1.0, value: 9.0 },
                Request { id: "b".into(), source: 0, target: 1, demand: 1.0, value: 1.0 },
            ],
        )
        .unwrap();
        let sol = solve_ufp(&NormalizedInstance::normalize(&inst), 0.1).unwrap();
        assert_eq!(sol.trace.dropped, vec![0]);
        assert_eq!(sol.primal_value, 1.0);
        // Value cover over servable requests is exactly the optimum here.
        assert_eq!(sol.dual_certificate, 1.0);
    }
}
