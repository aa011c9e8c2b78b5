//! UFP with repetitions: a request may be routed any number of times, each
//! copy earning its value again.

use crate::engine::{self, Certificate, ExitReason, RunParams, Trace};
use crate::model::NormalizedInstance;
use crate::oracle;
use crate::path::Path;
use crate::scalar::Scalar;
use crate::ufp::{SolverConfig, UfpMarket};
use crate::SolveError;

/// A request routed `count` times along the same path.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedRoute<S> {
    pub request: usize,
    pub id: String,
    pub path: Path<S>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSolution<S> {
    /// Routings grouped by request and path, in order of first use.
    pub allocation: Vec<RepeatedRoute<S>>,
    pub primal_value: S,
    pub dual_certificate: S,
    pub certificate: Certificate<S>,
    pub trace: Trace<S>,
    pub epsilon: S,
    pub b: S,
}

impl<S: Scalar> RepeatSolution<S> {
    pub fn exit_reason(&self) -> ExitReason {
        self.trace.exit_reason
    }

    /// Total number of routings.
    pub fn routings(&self) -> usize {
        self.trace.records.len()
    }

    /// Number of times `request` was routed.
    pub fn copies(&self, request: usize) -> usize {
        self.allocation.iter().filter(|a| a.request == request).map(|a| a.count).sum()
    }
}

pub fn solve_ufp_repeat<S: Scalar>(inst: &NormalizedInstance<S>, epsilon: S) -> Result<RepeatSolution<S>, SolveError> {
    solve_ufp_repeat_with(inst, &SolverConfig::new(epsilon))
}

pub fn solve_ufp_repeat_with<S: Scalar>(
    inst: &NormalizedInstance<S>,
    config: &SolverConfig<S>,
) -> Result<RepeatSolution<S>, SolveError> {
    engine::check_params(config.epsilon, inst.b())?;
    let market = UfpMarket::new(inst.inner());
    let params = RunParams {
        epsilon: config.epsilon,
        b: inst.b(),
        stop_rule: config.stop_rule,
        selection: config.selection,
        repeat: true,
    };
    let trace = engine::run(&market, market.capacities(), &params)?;

    // Every routing adds at least d_min to some edge of capacity at most c_max.
    let g = inst.inner();
    if let Some(d_min) = g.requests.iter().map(|r| r.demand).reduce(S::min) {
        let bound = S::from_count(g.edge_count()) * g.max_capacity() / d_min;
        if S::from_count(trace.records.len()) > bound {
            return Err(SolveError::Invariant(format!(
                "{} routings exceed the bound {}",
                trace.records.len(),
                bound
            )));
        }
    }

    let certificate = repeat_dual_certificate(&trace, inst, config.epsilon)?;
    let mut allocation: Vec<RepeatedRoute<S>> = Vec::new();
    for rec in &trace.records {
        if let Some(a) = allocation
            .iter_mut()
            .find(|a| a.request == rec.request && a.path.edges == rec.resources)
        {
            a.count += 1;
            continue;
        }
        let req = &g.requests[rec.request];
        allocation.push(RepeatedRoute {
            request: rec.request,
            id: req.id.clone(),
            path: Path {
                edges: rec.resources.clone(),
                source: req.source,
                target: req.target,
                length: rec.length,
            },
            count: 1,
        });
    }
    Ok(RepeatSolution {
        allocation,
        primal_value: trace.primal_value(),
        dual_certificate: certificate.value,
        certificate,
        trace,
        epsilon: config.epsilon,
        b: inst.b(),
    })
}

/// Smallest `Σ_e c_e y^i_e / alpha(i)` over the traced states. The repeat dual
/// has no per-request slack, so `z` is absent.
pub fn repeat_dual_certificate<S: Scalar>(
    trace: &Trace<S>,
    inst: &NormalizedInstance<S>,
    epsilon: S,
) -> Result<Certificate<S>, SolveError> {
    let market = UfpMarket::new(inst.inner());
    let cert = engine::certificate(&market, market.capacities(), epsilon, inst.b(), trace);
    if let Some(v) = oracle::check_dual_feasible(inst.inner(), &cert.dual).first() {
        return Err(SolveError::Invariant(format!(
            "dual certificate violates the constraint of request {} by {}",
            v.request, v.slack
        )));
    }
    Ok(cert)
}
