//! The primal-dual selection loop shared by the UFP, repeat and MUCA solvers,
//! and the replay that turns a finished trace into a dual certificate.
//!
//! A [`Market`] describes the requests and how to find the cheapest way to
//! serve one of them under the current prices: a shortest path for UFP, the
//! fixed bundle for MUCA. Each iteration selects the pending request whose
//! normalized length `(d / v) * length` is smallest (ties by instance order),
//! charges its demand to the chosen resources and records the dual quantities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pricing::LoadState;
use crate::scalar::Scalar;
use crate::SolveError;

/// How the main loop decides to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop once `Σ c_e y_e > exp(eps (B - 1))` or no request is pending.
    #[default]
    WeightThreshold,
    /// Ignore the price threshold; only consider paths with enough residual
    /// capacity and stop when no pending request fits anywhere. This is the
    /// "route until nothing fits" behaviour analysed by the lower-bound
    /// constructions.
    Exhaustion,
}

/// How the argmin over pending requests is computed. Both strategies select
/// the same request in every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Re-evaluate a request only when it reaches the top of a queue keyed by
    /// its last (lower-bound) score. Scores never decrease because prices
    /// only grow.
    #[default]
    Lazy,
    /// Evaluate every pending request in every iteration (in parallel).
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    ListEmpty,
    WeightThreshold,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::ListEmpty => "list-empty",
            ExitReason::WeightThreshold => "weight-threshold",
        }
    }
}

/// One iteration of the main loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<S> {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Index of the selected request.
    pub request: usize,
    /// Edges of the chosen path, or items of the chosen bundle.
    pub resources: Vec<usize>,
    /// Length (price sum) of the chosen resources at selection time.
    pub length: S,
    /// Normalized length `(d / v) * length` at selection time.
    pub alpha: S,
    /// `ln Σ_e c_e y_e` after the update.
    pub log_d1: S,
    /// `Σ_e c_e y_e` after the update.
    pub d1: S,
    /// `Σ_r z_r` after the update (always zero for the repeat variant).
    pub d2: S,
    /// Primal value after the update.
    pub primal: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S> {
    pub records: Vec<IterationRecord<S>>,
    /// Requests discarded because they can never be served (no path at all,
    /// or, under [`StopRule::Exhaustion`], no path with enough room).
    pub dropped: Vec<usize>,
    pub exit_reason: ExitReason,
    pub stop_rule: StopRule,
    /// Requests may be selected repeatedly.
    pub repeat: bool,
}

impl<S: Scalar> Trace<S> {
    pub fn primal_value(&self) -> S {
        self.records.last().map_or(S::zero(), |r| r.primal)
    }
}

/// Requests and the way to serve them.
pub trait Market<S: Scalar>: Sync {
    fn request_count(&self) -> usize;
    fn demand(&self, r: usize) -> S;
    fn value(&self, r: usize) -> S;
    /// Cheapest resource set serving request `r` under `state`'s prices and
    /// its price sum. With `fitting_only`, only resources with room for the
    /// request's demand may be used.
    fn cheapest(&self, r: usize, state: &LoadState<S>, fitting_only: bool) -> Option<(S, Vec<usize>)>;
}

struct Candidate<S> {
    key: S,
    request: usize,
    /// Iteration at which `key` was computed; `usize::MAX` marks a stale bound.
    epoch: usize,
    found: Option<(S, Vec<usize>)>,
}

impl<S: Scalar> PartialEq for Candidate<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Candidate<S> {}
impl<S: Scalar> PartialOrd for Candidate<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Candidate<S> {
    // Max-heap on the reversed (key, request) order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .partial_cmp(&self.key)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.request.cmp(&self.request))
    }
}

#[inline]
fn score<S: Scalar>(market: &impl Market<S>, r: usize, length: S) -> S {
    market.demand(r) / market.value(r) * length
}

const STALE: usize = usize::MAX;

/// Lazily maintained argmin of `(score, index)` over a shrinking set of
/// requests whose scores never decrease.
struct LazyArgmin<S> {
    heap: BinaryHeap<Candidate<S>>,
}

impl<S: Scalar> LazyArgmin<S> {
    fn new(n: usize) -> Self {
        LazyArgmin {
            heap: (0..n)
                .map(|request| Candidate {
                    key: S::zero(),
                    request,
                    epoch: STALE,
                    found: None,
                })
                .collect(),
        }
    }

    fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Pops the exact minimizer at `epoch`. Requests for which `eval` returns
    /// `None` are removed and passed to `on_drop`; requests rejected by
    /// `alive` are discarded silently.
    fn pop_min(
        &mut self,
        epoch: usize,
        mut alive: impl FnMut(usize) -> bool,
        mut eval: impl FnMut(usize) -> Option<(S, S, Vec<usize>)>,
        mut on_drop: impl FnMut(usize),
    ) -> Option<Candidate<S>> {
        while let Some(top) = self.heap.pop() {
            if !alive(top.request) {
                continue;
            }
            if top.epoch == epoch {
                return Some(top);
            }
            match eval(top.request) {
                None => on_drop(top.request),
                Some((key, length, resources)) => self.heap.push(Candidate {
                    key,
                    request: top.request,
                    epoch,
                    found: Some((length, resources)),
                }),
            }
        }
        None
    }

    fn push_stale(&mut self, key: S, request: usize) {
        self.heap.push(Candidate {
            key,
            request,
            epoch: STALE,
            found: None,
        });
    }

    fn push_exact(&mut self, c: Candidate<S>) {
        self.heap.push(c);
    }
}

pub(crate) struct RunParams<S> {
    pub epsilon: S,
    pub b: S,
    pub stop_rule: StopRule,
    pub selection: Selection,
    pub repeat: bool,
}

// Negated comparisons also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn check_params<S: Scalar>(epsilon: S, b: S) -> Result<(), SolveError> {
    if !(epsilon > S::zero() && epsilon <= S::one()) {
        return Err(SolveError::EpsilonOutOfRange(epsilon.as_f64()));
    }
    if !(b >= S::one()) {
        return Err(SolveError::BTooSmall(b.as_f64()));
    }
    // Prices reach exp(eps * B) / c; keep that representable.
    if epsilon * b >= S::ln_max() - S::one() {
        return Err(SolveError::ExponentRange((epsilon * b).as_f64()));
    }
    Ok(())
}

/// Runs the primal-dual loop to completion.
pub(crate) fn run<S: Scalar, M: Market<S>>(
    market: &M,
    capacities: Vec<S>,
    params: &RunParams<S>,
) -> Result<Trace<S>, SolveError> {
    let mut state = LoadState::new(capacities, params.epsilon, params.b);
    let fitting_only = params.stop_rule == StopRule::Exhaustion;
    let n = market.request_count();
    let mut records = Vec::new();
    let mut dropped = Vec::new();
    let mut primal = S::zero();
    let mut selected = vec![false; n];

    let exit_reason = match params.selection {
        Selection::Lazy => {
            let mut queue = LazyArgmin::new(n);
            let mut epoch = 0usize;
            loop {
                if queue.is_empty() {
                    break ExitReason::ListEmpty;
                }
                if params.stop_rule == StopRule::WeightThreshold && !state.within_threshold() {
                    break ExitReason::WeightThreshold;
                }
                let st = &state;
                let picked = queue.pop_min(
                    epoch,
                    |_| true,
                    |r| {
                        market
                            .cheapest(r, st, fitting_only)
                            .map(|(len, res)| (score(market, r, len), len, res))
                    },
                    |r| dropped.push(r),
                );
                let Some(c) = picked else {
                    break ExitReason::ListEmpty;
                };
                let (length, resources) = c.found.expect("exact candidate carries its resources");
                apply(market, &mut state, &mut records, &mut primal, params.repeat, c.request, c.key, length, resources);
                selected[c.request] = true;
                if params.repeat {
                    queue.push_stale(c.key, c.request);
                }
                epoch += 1;
            }
        }
        Selection::Eager => {
            let mut pending: Vec<usize> = (0..n).collect();
            loop {
                if pending.is_empty() {
                    break ExitReason::ListEmpty;
                }
                if params.stop_rule == StopRule::WeightThreshold && !state.within_threshold() {
                    break ExitReason::WeightThreshold;
                }
                let st = &state;
                let evaluated: Vec<Option<(S, S, Vec<usize>)>> = pending
                    .par_iter()
                    .map(|&r| {
                        market
                            .cheapest(r, st, fitting_only)
                            .map(|(len, res)| (score(market, r, len), len, res))
                    })
                    .collect();
                let mut best: Option<(usize, S, S, Vec<usize>)> = None;
                let mut keep = Vec::with_capacity(pending.len());
                for (&r, ev) in pending.iter().zip(evaluated) {
                    match ev {
                        None => dropped.push(r),
                        Some((key, len, res)) => {
                            keep.push(r);
                            if best.as_ref().is_none_or(|b| key < b.1) {
                                best = Some((r, key, len, res));
                            }
                        }
                    }
                }
                pending = keep;
                let Some((r, key, length, resources)) = best else {
                    break ExitReason::ListEmpty;
                };
                apply(market, &mut state, &mut records, &mut primal, params.repeat, r, key, length, resources);
                selected[r] = true;
                if !params.repeat {
                    pending.retain(|&q| q != r);
                }
            }
        }
    };

    if !state.is_feasible() {
        return Err(SolveError::Invariant("a resource load exceeds its capacity".into()));
    }
    dropped.sort_unstable();
    Ok(Trace {
        records,
        dropped,
        exit_reason,
        stop_rule: params.stop_rule,
        repeat: params.repeat,
    })
}

#[allow(clippy::too_many_arguments)]
fn apply<S: Scalar, M: Market<S>>(
    market: &M,
    state: &mut LoadState<S>,
    records: &mut Vec<IterationRecord<S>>,
    primal: &mut S,
    repeat: bool,
    r: usize,
    alpha: S,
    length: S,
    resources: Vec<usize>,
) {
    state.route(&resources, market.demand(r));
    *primal = *primal + market.value(r);
    let log_d1 = state.log_potential();
    records.push(IterationRecord {
        iteration: records.len() + 1,
        request: r,
        resources,
        length,
        alpha,
        log_d1,
        d1: log_d1.exp(),
        d2: if repeat { S::zero() } else { *primal },
        primal: *primal,
    });
}

/// A dual solution: one price per resource and, except for the repeat
/// variant, one slack per request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAssignment<S> {
    pub y: Vec<S>,
    pub z: Option<Vec<S>>,
}

impl<S: Scalar> DualAssignment<S> {
    pub fn objective(&self, capacities: &[S]) -> S {
        let d1: S = self.y.iter().zip(capacities).map(|(&y, &c)| y * c).sum();
        let d2: S = self.z.as_ref().map_or(S::zero(), |z| z.iter().copied().sum());
        d1 + d2
    }
}

/// Where the reported certificate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "state")]
pub enum CertificateSource {
    /// Prices at the end of the given iteration (0 = initial prices), scaled
    /// by the inverse of the next normalized length.
    Iteration(usize),
    /// `y = 0`, `z_r = v_r` for every servable request.
    ValueCover,
    /// No request can be served, so the zero dual is feasible.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<S> {
    pub value: S,
    pub source: CertificateSource,
    pub dual: DualAssignment<S>,
}

/// Relative guard applied to the scaling factor so that rounding in the
/// scaled prices can never make a dual constraint fail.
fn alpha_guard<S: Scalar>() -> S {
    S::one() - S::lit(64.0) * S::epsilon()
}

/// Replays `trace` and returns the smallest dual bound among
///
/// * every state `i` (including the initial and final ones): prices `y^i`
///   divided by `alpha(i)`, the smallest normalized length over requests not
///   yet selected, together with `z_r = v_r` for selected requests;
/// * for single-shot variants, the value cover `y = 0, z_r = v_r`.
///
/// `alpha(i)` is recomputed over unrestricted paths, so the bound is valid
/// under either stop rule. Each candidate is a feasible dual solution, hence
/// an upper bound on the fractional (and integral) optimum.
pub(crate) fn certificate<S: Scalar, M: Market<S>>(
    market: &M,
    capacities: Vec<S>,
    epsilon: S,
    b: S,
    trace: &Trace<S>,
) -> Certificate<S> {
    let n = market.request_count();
    let mut state = LoadState::new(capacities, epsilon, b);
    let mut selected = vec![false; n];
    let mut unservable = vec![false; n];
    let mut queue = LazyArgmin::new(n);
    let mut d2 = S::zero();
    let guard = alpha_guard::<S>();
    let mut best: Option<Certificate<S>> = None;

    for i in 0..=trace.records.len() {
        let st = &state;
        let sel = &selected;
        let repeat = trace.repeat;
        let found = queue.pop_min(
            i,
            |r| repeat || !sel[r],
            |r| market.cheapest(r, st, false).map(|(len, res)| (score(market, r, len), len, res)),
            |r| unservable[r] = true,
        );
        if let Some(c) = found {
            let alpha = c.key * guard;
            let value = (state.log_potential() - alpha.ln()).exp() + d2;
            if best.as_ref().is_none_or(|b| value < b.value) {
                let y = state.weights().iter().map(|&w| w / alpha).collect();
                let z = (!trace.repeat).then(|| {
                    (0..n)
                        .map(|r| if selected[r] { market.value(r) } else { S::zero() })
                        .collect()
                });
                best = Some(Certificate {
                    value,
                    source: CertificateSource::Iteration(i),
                    dual: DualAssignment { y, z },
                });
            }
            queue.push_exact(c);
        }
        if let Some(rec) = trace.records.get(i) {
            state.route(&rec.resources, market.demand(rec.request));
            if !trace.repeat {
                selected[rec.request] = true;
                d2 = d2 + market.value(rec.request);
            }
        }
    }

    let m = state.capacities().len();
    if !trace.repeat {
        // Requests never popped are servable or were already selected; only
        // the ones proven unservable get z = 0.
        let z: Vec<S> = (0..n)
            .map(|r| if unservable[r] { S::zero() } else { market.value(r) })
            .collect();
        let value: S = z.iter().copied().sum();
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Certificate {
                value,
                source: CertificateSource::ValueCover,
                dual: DualAssignment {
                    y: vec![S::zero(); m],
                    z: Some(z),
                },
            });
        }
    }
    best.unwrap_or_else(|| Certificate {
        value: S::zero(),
        source: CertificateSource::Empty,
        dual: DualAssignment {
            y: vec![S::zero(); m],
            z: (!trace.repeat).then(|| vec![S::zero(); n]),
        },
    })
}
