//! Exhaustive ground truth for desk-sized instances: simple-path
//! enumeration, exact optima by branch and bound, and a dual feasibility
//! checker.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::DualAssignment;
use crate::model::{MucaInstance, UfpInstance};
use crate::path::{Graph, Path};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for oracle: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_requests: usize,
    pub max_paths: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_requests: 10,
            max_paths: 20,
        }
    }
}

/// Absolute slack tolerated by [`check_dual_feasible`].
pub const DUAL_SLACK: f64 = 1e-9;

/// All simple `s`–`t` paths in depth-first order (edges scanned by index).
/// Each path's `length` is its edge count.
pub fn enumerate_paths<S: Scalar>(
    inst: &UfpInstance<S>,
    s: usize,
    t: usize,
    max_paths: usize,
) -> Result<Vec<Path<S>>, OracleError> {
    let graph = Graph::new(inst);
    let mut out = Vec::new();
    let mut on_path = vec![false; inst.vertex_count];
    let mut edges = Vec::new();
    on_path[s] = true;
    dfs_paths(&graph, s, t, &mut on_path, &mut edges, &mut out, max_paths, s)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths<S: Scalar>(
    graph: &Graph,
    at: usize,
    t: usize,
    on_path: &mut [bool],
    edges: &mut Vec<usize>,
    out: &mut Vec<Path<S>>,
    max_paths: usize,
    source: usize,
) -> Result<(), OracleError> {
    if at == t {
        if out.len() == max_paths {
            return Err(OracleError::TooLarge(format!(
                "more than {max_paths} simple paths between {source} and {t}"
            )));
        }
        out.push(Path {
            edges: edges.clone(),
            source,
            target: t,
            length: S::from_count(edges.len()),
        });
        return Ok(());
    }
    for &(ei, u) in graph.neighbours(at) {
        if on_path[u] {
            continue;
        }
        on_path[u] = true;
        edges.push(ei);
        dfs_paths(graph, u, t, on_path, edges, out, max_paths, source)?;
        edges.pop();
        on_path[u] = false;
    }
    Ok(())
}

/// Sum of `weights` over the edges of `path`, in path order.
pub fn path_length<S: Scalar>(weights: &[S], path: &Path<S>) -> S {
    path.edges.iter().fold(S::zero(), |acc, &e| acc + weights[e])
}

#[derive(Debug, Clone, PartialEq)]
pub struct UfpOptimum<S> {
    pub value: S,
    /// `(request index, path)` for every routed request.
    pub witness: Vec<(usize, Path<S>)>,
}

fn request_paths<S: Scalar>(inst: &UfpInstance<S>, limits: &OracleLimits) -> Result<Vec<Vec<Path<S>>>, OracleError> {
    if inst.requests.len() > limits.max_requests {
        return Err(OracleError::TooLarge(format!(
            "{} requests exceed the limit of {}",
            inst.requests.len(),
            limits.max_requests
        )));
    }
    inst.requests
        .iter()
        .map(|r| enumerate_paths(inst, r.source, r.target, limits.max_paths))
        .collect()
}

/// Exact integral optimum over all request subsets and path choices.
pub fn brute_force_opt_ufp<S: Scalar>(
    inst: &UfpInstance<S>,
    limits: &OracleLimits,
) -> Result<UfpOptimum<S>, OracleError> {
    let paths = request_paths(inst, limits)?;
    let n = inst.requests.len();
    // suffix[i] = total value of requests i.. that have at least one path.
    let mut suffix = vec![S::zero(); n + 1];
    for i in (0..n).rev() {
        let v = if paths[i].is_empty() { S::zero() } else { inst.requests[i].value };
        suffix[i] = suffix[i + 1] + v;
    }
    let mut search = UfpSearch {
        inst,
        paths: &paths,
        suffix: &suffix,
        residual: inst.edges.iter().map(|e| e.capacity).collect(),
        chosen: Vec::new(),
        best_value: S::zero(),
        best: Vec::new(),
    };
    search.go(0, S::zero());
    let witness = search
        .best
        .iter()
        .map(|&(r, k)| (r, paths[r][k].clone()))
        .collect();
    Ok(UfpOptimum {
        value: search.best_value,
        witness,
    })
}

struct UfpSearch<'a, S> {
    inst: &'a UfpInstance<S>,
    paths: &'a [Vec<Path<S>>],
    suffix: &'a [S],
    residual: Vec<S>,
    chosen: Vec<(usize, usize)>,
    best_value: S,
    best: Vec<(usize, usize)>,
}

impl<S: Scalar> UfpSearch<'_, S> {
    fn go(&mut self, i: usize, value: S) {
        if value > self.best_value {
            self.best_value = value;
            self.best = self.chosen.clone();
        }
        if i == self.paths.len() || value + self.suffix[i] <= self.best_value {
            return;
        }
        let d = self.inst.requests[i].demand;
        for k in 0..self.paths[i].len() {
            let edges = &self.paths[i][k].edges;
            if edges.iter().all(|&e| d <= self.residual[e]) {
                // Restore saved residuals afterwards; (r - d) + d may not round back to r.
                let saved: Vec<S> = edges.iter().map(|&e| self.residual[e]).collect();
                for &e in edges {
                    self.residual[e] = self.residual[e] - d;
                }
                self.chosen.push((i, k));
                self.go(i + 1, value + self.inst.requests[i].value);
                self.chosen.pop();
                for (&e, &r) in self.paths[i][k].edges.iter().zip(&saved) {
                    self.residual[e] = r;
                }
            }
        }
        self.go(i + 1, value);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MucaOptimum<S> {
    pub value: S,
    pub witness: Vec<usize>,
}

/// Exact optimum of a multi-unit auction by subset enumeration with pruning.
pub fn brute_force_opt_muca<S: Scalar>(
    inst: &MucaInstance<S>,
    max_requests: usize,
) -> Result<MucaOptimum<S>, OracleError> {
    let n = inst.requests().len();
    if n > max_requests {
        return Err(OracleError::TooLarge(format!(
            "{n} requests exceed the limit of {max_requests}"
        )));
    }
    let mut suffix = vec![S::zero(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + inst.requests()[i].value;
    }
    let mut residual: Vec<u64> = inst.items().iter().map(|i| i.multiplicity).collect();
    let mut chosen = Vec::new();
    let mut best = (S::zero(), Vec::new());
    muca_go(inst, &suffix, &mut residual, &mut chosen, &mut best, 0, S::zero());
    Ok(MucaOptimum {
        value: best.0,
        witness: best.1,
    })
}

fn muca_go<S: Scalar>(
    inst: &MucaInstance<S>,
    suffix: &[S],
    residual: &mut [u64],
    chosen: &mut Vec<usize>,
    best: &mut (S, Vec<usize>),
    i: usize,
    value: S,
) {
    if value > best.0 {
        *best = (value, chosen.clone());
    }
    if i == inst.requests().len() || value + suffix[i] <= best.0 {
        return;
    }
    let bundle = inst.bundle(i);
    if bundle.iter().all(|&u| residual[u] > 0) {
        for &u in bundle {
            residual[u] -= 1;
        }
        chosen.push(i);
        muca_go(inst, suffix, residual, chosen, best, i + 1, value + inst.requests()[i].value);
        chosen.pop();
        for &u in bundle {
            residual[u] += 1;
        }
    }
    muca_go(inst, suffix, residual, chosen, best, i + 1, value);
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOptimum<S> {
    pub value: S,
    /// `(request index, path, copies)`.
    pub witness: Vec<(usize, Path<S>, usize)>,
    /// The copy cap cut off at least one feasible extension, so `value` is
    /// the capped optimum and may be below the true one.
    pub capped: bool,
}

/// Exact optimum of the repetition variant over integer copy vectors with at
/// most `max_total_copies` copies in total.
pub fn brute_force_opt_repeat<S: Scalar>(
    inst: &UfpInstance<S>,
    max_total_copies: usize,
    limits: &OracleLimits,
) -> Result<RepeatOptimum<S>, OracleError> {
    let paths = request_paths(inst, limits)?;
    let vars: Vec<(usize, usize)> = paths
        .iter()
        .enumerate()
        .flat_map(|(r, ps)| (0..ps.len()).map(move |k| (r, k)))
        .collect();
    let best_ratio_from: Vec<S> = {
        let mut v = vec![S::zero(); vars.len() + 1];
        for i in (0..vars.len()).rev() {
            v[i] = v[i + 1].max(inst.requests[vars[i].0].value);
        }
        v
    };
    let mut search = RepeatSearch {
        inst,
        paths: &paths,
        vars: &vars,
        best_value_from: &best_ratio_from,
        residual: inst.edges.iter().map(|e| e.capacity).collect(),
        counts: vec![0; vars.len()],
        best_value: S::zero(),
        best_counts: vec![0; vars.len()],
        capped: false,
        cap: max_total_copies,
    };
    search.go(0, 0, S::zero());
    let witness = vars
        .iter()
        .zip(&search.best_counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&(r, k), &c)| (r, paths[r][k].clone(), c))
        .collect();
    Ok(RepeatOptimum {
        value: search.best_value,
        witness,
        capped: search.capped,
    })
}

struct RepeatSearch<'a, S> {
    inst: &'a UfpInstance<S>,
    paths: &'a [Vec<Path<S>>],
    vars: &'a [(usize, usize)],
    best_value_from: &'a [S],
    residual: Vec<S>,
    counts: Vec<usize>,
    best_value: S,
    best_counts: Vec<usize>,
    capped: bool,
    cap: usize,
}

impl<S: Scalar> RepeatSearch<'_, S> {
    fn fits(&self, k: usize) -> bool {
        let (r, p) = self.vars[k];
        let d = self.inst.requests[r].demand;
        self.paths[r][p].edges.iter().all(|&e| d <= self.residual[e])
    }

    /// Takes one copy of variable `k`; returns the residuals it overwrote.
    fn take(&mut self, k: usize) -> Vec<S> {
        let (r, p) = self.vars[k];
        let d = self.inst.requests[r].demand;
        let edges = &self.paths[r][p].edges;
        let saved = edges.iter().map(|&e| self.residual[e]).collect();
        for &e in edges {
            self.residual[e] = self.residual[e] - d;
        }
        saved
    }

    fn restore(&mut self, k: usize, saved: &[S]) {
        let (r, p) = self.vars[k];
        for (&e, &v) in self.paths[r][p].edges.iter().zip(saved) {
            self.residual[e] = v;
        }
    }

    fn go(&mut self, k: usize, used: usize, value: S) {
        if value > self.best_value {
            self.best_value = value;
            self.best_counts = self.counts.clone();
        }
        if used == self.cap {
            if (0..self.vars.len()).any(|j| self.fits(j)) {
                self.capped = true;
            }
            return;
        }
        if k == self.vars.len() {
            return;
        }
        let room = S::from_count(self.cap - used);
        if value + room * self.best_value_from[k] <= self.best_value {
            return;
        }
        // Take as many copies of variable k as fit, then back off one by one.
        let mut stack = Vec::new();
        while used + stack.len() < self.cap && self.fits(k) {
            let saved = self.take(k);
            stack.push(saved);
        }
        let v = self.inst.requests[self.vars[k].0].value;
        loop {
            let taken = stack.len();
            self.counts[k] = taken;
            self.go(k + 1, used + taken, value + S::from_count(taken) * v);
            match stack.pop() {
                Some(saved) => self.restore(k, &saved),
                None => break,
            }
        }
        self.counts[k] = 0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualViolation<S> {
    pub request: usize,
    /// `z_r + d_r * (shortest length) - v_r`, negative when violated.
    pub slack: S,
}

/// Checks `z_r + d_r * Σ_{e∈s} y_e >= v_r` for every request and every path
/// `s` serving it. The binding path is the shortest one under `y`, so one
/// shortest-path query per request suffices. Requests with no path impose no
/// constraint.
pub fn check_dual_feasible<S: Scalar>(inst: &UfpInstance<S>, dual: &DualAssignment<S>) -> Vec<DualViolation<S>> {
    let graph = Graph::new(inst);
    let tol = S::lit(DUAL_SLACK);
    inst.requests
        .iter()
        .enumerate()
        .filter_map(|(r, req)| {
            let path = graph.shortest_path(&dual.y, req.source, req.target)?;
            let z = dual.z.as_ref().map_or(S::zero(), |z| z[r]);
            let slack = z + req.demand * path.length - req.value;
            (slack < -tol).then_some(DualViolation { request: r, slack })
        })
        .collect()
}

/// Multi-unit analogue: `z_r + Σ_{u∈U_r} y_u >= v_r`.
pub fn check_dual_feasible_muca<S: Scalar>(inst: &MucaInstance<S>, dual: &DualAssignment<S>) -> Vec<DualViolation<S>> {
    let tol = S::lit(DUAL_SLACK);
    inst.requests()
        .iter()
        .enumerate()
        .filter_map(|(r, req)| {
            let len = inst.bundle(r).iter().fold(S::zero(), |acc, &u| acc + dual.y[u]);
            let z = dual.z.as_ref().map_or(S::zero(), |z| z[r]);
            let slack = z + len - req.value;
            (slack < -tol).then_some(DualViolation { request: r, slack })
        })
        .collect()
}
