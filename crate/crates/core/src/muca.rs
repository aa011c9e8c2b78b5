//! Bounded multi-unit combinatorial auctions: the bundle specialization of
//! the UFP solver with unit demands and no path search.

use crate::engine::{self, Certificate, ExitReason, Market, RunParams, Trace};
use crate::model::MucaInstance;
use crate::oracle;
use crate::pricing::LoadState;
use crate::scalar::Scalar;
use crate::ufp::SolverConfig;
use crate::SolveError;

/// `(1 / v) * Σ y_u` over the bundle's item prices.
pub fn bundle_score<S: Scalar>(value: S, item_weights: impl IntoIterator<Item = S>) -> S {
    let sum = item_weights.into_iter().fold(S::zero(), |acc, y| acc + y);
    S::one() / value * sum
}

pub(crate) struct MucaMarket<'a, S> {
    pub inst: &'a MucaInstance<S>,
}

impl<S: Scalar> MucaMarket<'_, S> {
    pub fn capacities(&self) -> Vec<S> {
        self.inst
            .items()
            .iter()
            .map(|i| S::from_u64(i.multiplicity).expect("multiplicity fits scalar"))
            .collect()
    }
}

impl<S: Scalar> Market<S> for MucaMarket<'_, S> {
    fn request_count(&self) -> usize {
        self.inst.requests().len()
    }

    fn demand(&self, _r: usize) -> S {
        S::one()
    }

    fn value(&self, r: usize) -> S {
        self.inst.requests()[r].value
    }

    fn cheapest(&self, r: usize, state: &LoadState<S>, fitting_only: bool) -> Option<(S, Vec<usize>)> {
        let bundle = self.inst.bundle(r);
        if fitting_only && !bundle.iter().all(|&u| state.fits(u, S::one())) {
            return None;
        }
        let w = state.weights();
        let len = bundle.iter().fold(S::zero(), |acc, &u| acc + w[u]);
        Some((len, bundle.to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MucaSolution<S> {
    /// Winning request indices in selection order.
    pub winners: Vec<usize>,
    pub primal_value: S,
    pub dual_certificate: S,
    pub certificate: Certificate<S>,
    pub trace: Trace<S>,
    pub epsilon: S,
    pub b: u64,
}

impl<S: Scalar> MucaSolution<S> {
    pub fn exit_reason(&self) -> ExitReason {
        self.trace.exit_reason
    }

    pub fn is_winner(&self, request: usize) -> bool {
        self.winners.contains(&request)
    }

    /// Allocated copies per item.
    pub fn item_loads(&self, inst: &MucaInstance<S>) -> Vec<u64> {
        let mut loads = vec![0; inst.items().len()];
        for &r in &self.winners {
            for &u in inst.bundle(r) {
                loads[u] += 1;
            }
        }
        loads
    }
}

pub fn solve_muca<S: Scalar>(inst: &MucaInstance<S>, epsilon: S) -> Result<MucaSolution<S>, SolveError> {
    solve_muca_with(inst, &SolverConfig::new(epsilon))
}

pub fn solve_muca_with<S: Scalar>(inst: &MucaInstance<S>, config: &SolverConfig<S>) -> Result<MucaSolution<S>, SolveError> {
    let b = S::from_u64(inst.b()).expect("multiplicity fits scalar");
    engine::check_params(config.epsilon, b)?;
    let market = MucaMarket { inst };
    let params = RunParams {
        epsilon: config.epsilon,
        b,
        stop_rule: config.stop_rule,
        selection: config.selection,
        repeat: false,
    };
    let trace = engine::run(&market, market.capacities(), &params)?;
    let certificate = muca_dual_certificate(&trace, inst, config.epsilon)?;
    Ok(MucaSolution {
        winners: trace.records.iter().map(|r| r.request).collect(),
        primal_value: trace.primal_value(),
        dual_certificate: certificate.value,
        certificate,
        trace,
        epsilon: config.epsilon,
        b: inst.b(),
    })
}

/// Dual bound for a finished auction run; see [`crate::ufp::dual_certificate`].
pub fn muca_dual_certificate<S: Scalar>(
    trace: &Trace<S>,
    inst: &MucaInstance<S>,
    epsilon: S,
) -> Result<Certificate<S>, SolveError> {
    let market = MucaMarket { inst };
    let b = S::from_u64(inst.b()).expect("multiplicity fits scalar");
    let cert = engine::certificate(&market, market.capacities(), epsilon, b, trace);
    if let Some(v) = oracle::check_dual_feasible_muca(inst, &cert.dual).first() {
        return Err(SolveError::Invariant(format!(
            "dual certificate violates the constraint of request {} by {}",
            v.request, v.slack
        )));
    }
    Ok(cert)
}
