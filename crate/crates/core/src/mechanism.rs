//! Critical-value payments for the monotone solvers, and an empirical
//! truthfulness audit over grids of misreports.
//!
//! A winner pays the smallest reported value at which it would still win,
//! holding every other report (and its own demand) fixed. Because the
//! solvers are value-monotone the winning reports form an interval
//! `[theta, inf)`, so the threshold is found by bisection on `[0, v]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{self, Market, RunParams};
use crate::model::{InstanceError, MucaInstance, NormalizedInstance};
use crate::muca::{solve_muca_with, MucaMarket, MucaSolution};
use crate::scalar::Scalar;
use crate::ufp::{solve_ufp_with, SolverConfig, UfpMarket, UfpSolution};
use crate::SolveError;

/// Upper limit on bisection steps per payment.
pub const MAX_BISECTION_STEPS: usize = 64;

/// Relative default payment tolerance, multiplied by the winner's value.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

/// A sealed-bid market whose allocation can be recomputed under a changed
/// report of one agent.
pub trait Auction<S: Scalar>: Sync + Sized {
    fn request_count(&self) -> usize;
    fn request_id(&self, r: usize) -> &str;
    fn value(&self, r: usize) -> S;
    /// Reported demand, or `None` when the agent's only private parameter is
    /// its value.
    fn demand(&self, r: usize) -> Option<S>;
    /// Same market with request `r` reporting `demand` (ignored when the
    /// agent has no demand parameter) and `value`.
    fn with_report(&self, r: usize, demand: Option<S>, value: S) -> Result<Self, MechanismError>;
    /// Allocated requests in selection order.
    fn winners(&self) -> Result<Vec<usize>, SolveError>;

    fn wins(&self, r: usize) -> Result<bool, SolveError> {
        Ok(self.winners()?.contains(&r))
    }
}

fn trace_winners<S: Scalar, M: Market<S>>(
    market: &M,
    capacities: Vec<S>,
    config: &SolverConfig<S>,
    b: S,
) -> Result<Vec<usize>, SolveError> {
    engine::check_params(config.epsilon, b)?;
    let params = RunParams {
        epsilon: config.epsilon,
        b,
        stop_rule: config.stop_rule,
        selection: config.selection,
        repeat: false,
    };
    Ok(engine::run(market, capacities, &params)?
        .records
        .iter()
        .map(|r| r.request)
        .collect())
}

/// Unsplittable flow agents: private demand and value.
#[derive(Debug, Clone)]
pub struct UfpAuction<S> {
    pub instance: NormalizedInstance<S>,
    pub config: SolverConfig<S>,
}

impl<S: Scalar> UfpAuction<S> {
    pub fn new(instance: NormalizedInstance<S>, config: SolverConfig<S>) -> Self {
        UfpAuction { instance, config }
    }

    pub fn solve(&self) -> Result<UfpSolution<S>, SolveError> {
        solve_ufp_with(&self.instance, &self.config)
    }
}

impl<S: Scalar> Auction<S> for UfpAuction<S> {
    fn request_count(&self) -> usize {
        self.instance.inner().requests.len()
    }

    fn request_id(&self, r: usize) -> &str {
        &self.instance.inner().requests[r].id
    }

    fn value(&self, r: usize) -> S {
        self.instance.inner().requests[r].value
    }

    fn demand(&self, r: usize) -> Option<S> {
        Some(self.instance.inner().requests[r].demand)
    }

    fn with_report(&self, r: usize, demand: Option<S>, value: S) -> Result<Self, MechanismError> {
        let d = demand.unwrap_or_else(|| self.instance.inner().requests[r].demand);
        Ok(UfpAuction {
            instance: self.instance.with_report(r, d, value)?,
            config: self.config,
        })
    }

    fn winners(&self) -> Result<Vec<usize>, SolveError> {
        let market = UfpMarket::new(self.instance.inner());
        trace_winners(&market, market.capacities(), &self.config, self.instance.b())
    }
}

/// Single-minded bundle bidders: private value, public bundle.
#[derive(Debug, Clone)]
pub struct MucaAuction<S> {
    pub instance: MucaInstance<S>,
    pub config: SolverConfig<S>,
}

impl<S: Scalar> MucaAuction<S> {
    pub fn new(instance: MucaInstance<S>, config: SolverConfig<S>) -> Self {
        MucaAuction { instance, config }
    }

    pub fn solve(&self) -> Result<MucaSolution<S>, SolveError> {
        solve_muca_with(&self.instance, &self.config)
    }
}

impl<S: Scalar> Auction<S> for MucaAuction<S> {
    fn request_count(&self) -> usize {
        self.instance.requests().len()
    }

    fn request_id(&self, r: usize) -> &str {
        &self.instance.requests()[r].id
    }

    fn value(&self, r: usize) -> S {
        self.instance.requests()[r].value
    }

    fn demand(&self, _r: usize) -> Option<S> {
        None
    }

    fn with_report(&self, r: usize, _demand: Option<S>, value: S) -> Result<Self, MechanismError> {
        Ok(MucaAuction {
            instance: self.instance.with_value(r, value)?,
            config: self.config,
        })
    }

    fn winners(&self) -> Result<Vec<usize>, SolveError> {
        let market = MucaMarket { inst: &self.instance };
        let b = S::from_u64(self.instance.b()).expect("multiplicity fits scalar");
        trace_winners(&market, market.capacities(), &self.config, b)
    }
}

/// Payment of one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue<S> {
    pub payment: S,
    /// `false` marks a request that loses at its reported value; it pays 0.
    pub winner: bool,
    /// Width of the final bisection interval.
    pub precision: S,
}

fn default_tolerance<S: Scalar>(value: S) -> S {
    S::lit(DEFAULT_RELATIVE_TOLERANCE) * value
}

/// Smallest winning value report of request `r`, within `tolerance` (or
/// `1e-6 * v_r` when `None`). The returned payment is always a winning
/// report, so it never undercuts the true threshold by more than rounding.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn critical_payment<S: Scalar, A: Auction<S>>(
    auction: &A,
    r: usize,
    tolerance: Option<S>,
) -> Result<CriticalValue<S>, MechanismError> {
    let v = auction.value(r);
    let tol = tolerance.unwrap_or_else(|| default_tolerance(v));
    if !(tol > S::zero()) {
        return Err(MechanismError::Tolerance(tol.as_f64()));
    }
    if !auction.wins(r)? {
        return Ok(CriticalValue {
            payment: S::zero(),
            winner: false,
            precision: S::zero(),
        });
    }
    let (mut lo, mut hi) = (S::zero(), v);
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / S::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if auction.with_report(r, None, mid)?.wins(r)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalValue {
        payment: hi,
        winner: true,
        precision: hi - lo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentEntry<S> {
    pub request: String,
    pub index: usize,
    pub value: S,
    pub payment: S,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentProfile<S> {
    /// One entry per request, in instance order.
    pub entries: Vec<PaymentEntry<S>>,
    /// The supplied tolerance, or the largest per-winner default.
    pub tolerance: S,
}

impl<S: Scalar> PaymentProfile<S> {
    pub fn winners(&self) -> impl Iterator<Item = &PaymentEntry<S>> {
        self.entries.iter().filter(|e| e.winner)
    }

    pub fn payment(&self, r: usize) -> S {
        self.entries[r].payment
    }
}

/// Critical values of every request; winners are processed in parallel.
pub fn payments<S: Scalar, A: Auction<S>>(auction: &A, tolerance: Option<S>) -> Result<PaymentProfile<S>, MechanismError> {
    let winners = auction.winners()?;
    let mut is_winner = vec![false; auction.request_count()];
    for &w in &winners {
        is_winner[w] = true;
    }
    let computed: Vec<Result<CriticalValue<S>, MechanismError>> = (0..auction.request_count())
        .into_par_iter()
        .map(|r| {
            if is_winner[r] {
                critical_payment(auction, r, tolerance)
            } else {
                Ok(CriticalValue {
                    payment: S::zero(),
                    winner: false,
                    precision: S::zero(),
                })
            }
        })
        .collect();
    let mut entries = Vec::with_capacity(computed.len());
    let mut tol = tolerance.unwrap_or_else(S::zero);
    for (r, c) in computed.into_iter().enumerate() {
        let c = c?;
        if tolerance.is_none() && c.winner {
            tol = tol.max(default_tolerance(auction.value(r)));
        }
        entries.push(PaymentEntry {
            request: auction.request_id(r).to_string(),
            index: r,
            value: auction.value(r),
            payment: c.payment,
            winner: c.winner,
        });
    }
    Ok(PaymentProfile { entries, tolerance: tol })
}

/// Solves the truthfully reported instance and charges critical values.
pub fn run_mechanism<S: Scalar>(
    auction: &UfpAuction<S>,
    tolerance: Option<S>,
) -> Result<(UfpSolution<S>, PaymentProfile<S>), MechanismError> {
    let solution = auction.solve()?;
    let profile = payments(auction, tolerance)?;
    Ok((solution, profile))
}

/// [`run_mechanism`] for bundle auctions.
pub fn run_muca_mechanism<S: Scalar>(
    auction: &MucaAuction<S>,
    tolerance: Option<S>,
) -> Result<(MucaSolution<S>, PaymentProfile<S>), MechanismError> {
    let solution = auction.solve()?;
    let profile = payments(auction, tolerance)?;
    Ok((solution, profile))
}

/// Outcome of one misreport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misreport<S> {
    pub demand: Option<S>,
    pub value: S,
    pub allocated: bool,
    pub payment: S,
    /// Utility under the agent's true value.
    pub utility: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport<S> {
    pub request: String,
    pub true_value: S,
    pub true_demand: Option<S>,
    pub tolerance: S,
    pub truthful_utility: S,
    pub best: Misreport<S>,
    /// Best misreport utility minus truthful utility.
    pub gap: S,
    pub evaluated: Vec<Misreport<S>>,
    /// Demand grid points that could not be reported (below the true demand
    /// or above the normalized maximum of 1).
    pub skipped_demands: Vec<S>,
}

impl<S: Scalar> AuditReport<S> {
    /// Whether no misreport beats the truth by more than `2 * tolerance`.
    pub fn is_truthful(&self) -> bool {
        self.gap <= S::lit(2.0) * self.tolerance
    }
}

/// Evaluates the agent's true utility under every combination of reported
/// value in `value_grid` and reported demand in `demand_grid` (plus the true
/// demand). Payments use one fixed tolerance: `tolerance`, or `1e-6 * v_r`.
pub fn utility_audit<S: Scalar, A: Auction<S>>(
    auction: &A,
    r: usize,
    value_grid: &[S],
    demand_grid: Option<&[S]>,
    tolerance: Option<S>,
) -> Result<AuditReport<S>, MechanismError> {
    let v_true = auction.value(r);
    let d_true = auction.demand(r);
    let tol = tolerance.unwrap_or_else(|| default_tolerance(v_true));

    let evaluate = |a: &A, demand: Option<S>, value: S| -> Result<Misreport<S>, MechanismError> {
        let c = critical_payment(a, r, Some(tol))?;
        let utility = if c.winner { v_true - c.payment } else { S::zero() };
        Ok(Misreport {
            demand,
            value,
            allocated: c.winner,
            payment: c.payment,
            utility,
        })
    };
    let truthful = evaluate(auction, d_true, v_true)?;

    let mut demands = vec![d_true];
    let mut skipped_demands = Vec::new();
    if let (Some(d), Some(grid)) = (d_true, demand_grid) {
        for &x in grid {
            if x >= d && x <= S::one() {
                demands.push(Some(x));
            } else {
                skipped_demands.push(x);
            }
        }
    }
    let reports: Vec<(Option<S>, S)> = demands
        .iter()
        .flat_map(|&d| value_grid.iter().filter(|v| **v > S::zero()).map(move |&v| (d, v)))
        .collect();
    let evaluated: Vec<Misreport<S>> = reports
        .par_iter()
        .map(|&(d, v)| evaluate(&auction.with_report(r, d, v)?, d, v))
        .collect::<Result<_, _>>()?;

    let mut best = truthful;
    for m in &evaluated {
        if m.utility > best.utility {
            best = *m;
        }
    }
    Ok(AuditReport {
        request: auction.request_id(r).to_string(),
        true_value: v_true,
        true_demand: d_true,
        tolerance: tol,
        truthful_utility: truthful.utility,
        gap: best.utility - truthful.utility,
        best,
        evaluated,
        skipped_demands,
    })
}

/// `n` evenly spaced values covering `(0, hi]`.
pub fn value_grid<S: Scalar>(hi: S, n: usize) -> Vec<S> {
    (1..=n).map(|k| hi * S::from_count(k) / S::from_count(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BundleRequest, Edge, Item, Request, UfpInstance};

    fn bottleneck() -> UfpAuction<f64> {
        let inst = UfpInstance::new(
            true,
            2,
            vec![Edge { tail: 0, head: 1, capacity: 1.0 }],
            vec![
                Request { id: "r1".into(), source: 0, target: 1, demand: 1.0, value: 5.0 },
                Request { id: "r2".into(), source: 0, target: 1, demand: 1.0, value: 3.0 },
            ],
        )
        .unwrap();
        UfpAuction::new(NormalizedInstance::normalize(&inst), SolverConfig::new(0.1))
    }

    #[test]
    fn sole_bidder_pays_nothing() {
        let inst = UfpInstance::new(
            true,
            2,
            vec![Edge { tail: 0, head: 1, capacity: 10.0 }],
            vec![Request { id: "r".into(), source: 0, target: 1, demand: 1.0, value: 5.0 }],
        )
        .unwrap();
        let a = UfpAuction::new(NormalizedInstance::normalize(&inst), SolverConfig::new(0.1));
        let c = critical_payment(&a, 0, Some(1e-6)).unwrap();
        assert!(c.winner);
        assert!(c.payment <= 1e-6);
    }

    #[test]
    fn bottleneck_threshold_is_competing_value() {
        let a = bottleneck();
        assert_eq!(a.winners().unwrap(), vec![0]);
        let c = critical_payment(&a, 0, Some(1e-6)).unwrap();
        assert!((c.payment - 3.0).abs() <= 1e-6, "{}", c.payment);
        assert!(c.payment >= 3.0);
        let loser = critical_payment(&a, 1, Some(1e-6)).unwrap();
        assert!(!loser.winner);
        assert_eq!(loser.payment, 0.0);
    }

    #[test]
    fn profile_is_individually_rational() {
        let (sol, profile) = run_mechanism(&bottleneck(), None).unwrap();
        assert_eq!(sol.primal_value, 5.0);
        assert_eq!(profile.winners().count(), 1);
        for e in &profile.entries {
            assert!(e.payment <= e.value + profile.tolerance);
            if !e.winner {
                assert_eq!(e.payment, 0.0);
            }
        }
        assert!((profile.tolerance - 5e-6f64).abs() < 1e-18);
    }

    #[test]
    fn audit_of_winner_and_loser() {
        let a = bottleneck();
        let rep = utility_audit(&a, 0, &value_grid(10.0, 50), Some(&[0.5, 1.0, 2.0]), Some(1e-6)).unwrap();
        assert!(rep.is_truthful(), "gap {}", rep.gap);
        assert!(rep.gap >= -2e-6);
        assert_eq!(rep.skipped_demands, vec![0.5, 2.0]);

        let rep = utility_audit(&a, 1, &value_grid(10.0, 50), None, Some(1e-6)).unwrap();
        assert!(rep.is_truthful());
        // Overbidding above 5 wins but pays at least the true value.
        let over = rep.evaluated.iter().find(|m| m.value > 5.0).unwrap();
        assert!(over.allocated);
        assert!(over.utility <= 1e-6);
    }

    #[test]
    fn muca_threshold() {
        let inst = MucaInstance::new(
            vec![Item { id: "a".into(), multiplicity: 1 }],
            vec![
                BundleRequest { id: "x".into(), bundle: vec!["a".into()], value: 2.0 },
                BundleRequest { id: "y".into(), bundle: vec!["a".into()], value: 7.0 },
            ],
        )
        .unwrap();
        let a = MucaAuction::new(inst, SolverConfig::new(0.5));
        let (sol, profile) = run_muca_mechanism(&a, Some(1e-7)).unwrap();
        assert_eq!(sol.winners, vec![1]);
        assert!((profile.payment(1) - 2.0f64).abs() <= 1e-6);
        assert_eq!(profile.payment(0), 0.0);
    }
}
