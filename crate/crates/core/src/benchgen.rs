//! Instance generators: the adversarial lower-bound families and seeded
//! random instances.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BundleRequest, Edge, InstanceError, Item, MucaInstance, Request, UfpInstance};
use crate::path::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator parameter {name}: {message}")]
    Parameter { name: &'static str, message: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn param(name: &'static str, message: impl Into<String>) -> GenError {
    GenError::Parameter {
        name,
        message: message.into(),
    }
}

/// Parameters of [`gen_random`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub vertices: usize,
    pub edges: usize,
    pub requests: usize,
    /// Capacities are drawn uniformly from `[b, 2b]`.
    pub b: f64,
    pub value_range: (f64, f64),
    /// Sub-range of `(0, 1]`.
    pub demand_range: (f64, f64),
    pub seed: u64,
    pub directed: bool,
}

/// Parameters of [`gen_random_muca`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMucaParams {
    pub items: usize,
    pub requests: usize,
    /// Multiplicities are drawn uniformly from `[b, 2b]`.
    pub b: u64,
    pub max_bundle: usize,
    pub value_range: (f64, f64),
    pub seed: u64,
}

/// A generator family together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    DirectedLb { b: usize, ell: usize, subdivide: bool },
    UndirectedLb { b: usize },
    MucaLb { p: usize, b: u64, m: usize },
    Random(RandomParams),
    RandomMuca(RandomMucaParams),
}

/// Output of a generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated<S> {
    Ufp(UfpInstance<S>),
    Muca(MucaInstance<S>),
}

impl<S: Scalar> Generated<S> {
    pub fn to_json(&self) -> String {
        match self {
            Generated::Ufp(i) => i.to_json(),
            Generated::Muca(i) => i.to_json(),
        }
    }
}

impl GeneratorSpec {
    pub fn generate<S: Scalar>(&self) -> Result<Generated<S>, GenError> {
        Ok(match self {
            GeneratorSpec::DirectedLb { b, ell, subdivide } => Generated::Ufp(gen_directed_lb(*b, *ell, *subdivide)?),
            GeneratorSpec::UndirectedLb { b } => Generated::Ufp(gen_undirected_lb(*b)?),
            GeneratorSpec::MucaLb { p, b, m } => Generated::Muca(gen_muca_lb(*p, *b, *m)?),
            GeneratorSpec::Random(p) => Generated::Ufp(gen_random(p)?),
            GeneratorSpec::RandomMuca(p) => Generated::Muca(gen_random_muca(p)?),
        })
    }
}

fn unit_request<S: Scalar>(id: String, source: usize, target: usize) -> Request<S> {
    Request {
        id,
        source,
        target,
        demand: S::one(),
        value: S::one(),
    }
}

/// Directed lower-bound instance together with the routing of every request
/// along its own path `s_i -> v_i -> t`.
#[allow(clippy::needless_range_loop)]
fn build_directed_lb<S: Scalar>(b: usize, ell: usize, subdivide: bool) -> Result<(UfpInstance<S>, Vec<Vec<usize>>), GenError> {
    if b < 1 {
        return Err(param("B", "must be at least 1"));
    }
    if ell < 1 {
        return Err(param("ell", "must be at least 1"));
    }
    // s_i = i - 1, v_j = ell + j - 1, t = 2 ell; subdivision vertices follow.
    let s = |i: usize| i - 1;
    let v = |j: usize| ell + j - 1;
    let t = 2 * ell;
    let cap = S::from_count(b);
    let mut n = 2 * ell + 1;
    let mut edges = Vec::new();
    let mut diagonal = vec![Vec::new(); ell + 1];
    for i in 1..=ell {
        // Highest j first, so the shortest-path tie-break prefers it.
        for j in (i..=ell).rev() {
            let hops = if subdivide { i * ell + 1 - j } else { 1 };
            let mut from = s(i);
            let mut chain = Vec::with_capacity(hops);
            for h in 0..hops {
                let to = if h + 1 == hops {
                    v(j)
                } else {
                    n += 1;
                    n - 1
                };
                chain.push(edges.len());
                edges.push(Edge {
                    tail: from,
                    head: to,
                    capacity: cap,
                });
                from = to;
            }
            if j == i {
                diagonal[i] = chain;
            }
        }
    }
    let mut sink = vec![0; ell + 1];
    for (j, slot) in sink.iter_mut().enumerate().skip(1) {
        *slot = edges.len();
        edges.push(Edge {
            tail: v(j),
            head: t,
            capacity: cap,
        });
    }
    let mut requests = Vec::with_capacity(b * ell);
    let mut witness = Vec::with_capacity(b * ell);
    for i in 1..=ell {
        for k in 0..b {
            requests.push(unit_request(format!("s{i}_{k}"), s(i), t));
            let mut p = diagonal[i].clone();
            p.push(sink[i]);
            witness.push(p);
        }
    }
    Ok((UfpInstance::new(true, n, edges, requests)?, witness))
}

/// The directed layered instance: sources `s_1..s_l`, middle vertices
/// `v_1..v_l`, sink `t`, edges `s_i -> v_j` for `j >= i` and `v_j -> t`, all
/// of capacity `B`, and `B` unit requests `(s_i, t)` per source. With
/// `subdivide`, each `s_i -> v_j` edge becomes a path of `i l + 1 - j` edges.
pub fn gen_directed_lb<S: Scalar>(b: usize, ell: usize, subdivide: bool) -> Result<UfpInstance<S>, GenError> {
    Ok(build_directed_lb(b, ell, subdivide)?.0)
}

/// Edge list of an optimal routing of [`gen_directed_lb`]: request `k`
/// follows the disjoint path `s_i -> v_i -> t`. Value `B l`.
pub fn directed_lb_witness(b: usize, ell: usize, subdivide: bool) -> Result<Vec<Vec<usize>>, GenError> {
    Ok(build_directed_lb::<f64>(b, ell, subdivide)?.1)
}

/// The seven-vertex undirected instance. Vertices `v1..v7` are `0..6`; the
/// edges, in index order, are `v1v7, v3v7, v4v7, v6v7, v1v2, v2v3, v4v5,
/// v5v6`, each of capacity `B`. Requests are `B` pairs `(v1,v3), (v4,v6)`
/// interleaved, then `B` copies of `(v1,v6)` and `B` copies of `(v3,v4)`.
pub fn gen_undirected_lb<S: Scalar>(b: usize) -> Result<UfpInstance<S>, GenError> {
    if b < 2 || !b.is_multiple_of(2) {
        return Err(param("B", "must be an even integer of at least 2"));
    }
    let cap = S::from_count(b);
    let pairs = [(0, 6), (2, 6), (3, 6), (5, 6), (0, 1), (1, 2), (3, 4), (4, 5)];
    let edges = pairs
        .iter()
        .map(|&(tail, head)| Edge {
            tail,
            head,
            capacity: cap,
        })
        .collect();
    let mut requests = Vec::with_capacity(4 * b);
    for k in 0..b {
        requests.push(unit_request(format!("a{k}"), 0, 2));
        requests.push(unit_request(format!("c{k}"), 3, 5));
    }
    for k in 0..b {
        requests.push(unit_request(format!("x{k}"), 0, 5));
    }
    for k in 0..b {
        requests.push(unit_request(format!("y{k}"), 2, 3));
    }
    Ok(UfpInstance::new(false, 7, edges, requests)?)
}

/// Optimal routing of [`gen_undirected_lb`] with value `4B`, aligned with
/// the request order.
pub fn undirected_lb_witness(b: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(4 * b);
    for _ in 0..b {
        out.push(vec![4, 5]);
        out.push(vec![6, 7]);
    }
    out.extend(std::iter::repeat_n(vec![0, 3], b));
    out.extend(std::iter::repeat_n(vec![1, 2], b));
    out
}

/// The bundle instance on `p (p + 1)` cells `U_{i,j}` of `m / (p (p + 1))`
/// items, every item with multiplicity `B`. Row bundles
/// `U_l = ∪_j U_{l,j}` come first (rows cycled `B / 2` times), followed by
/// `B / 2` copies of each crossing bundle
/// `U_{1,2l-1} ∪ U_{1,2l} ∪ ∪_{i>=2} U_{i,2l-1}` and then of
/// `U_{1,2l-1} ∪ U_{1,2l} ∪ ∪_{i>=2} U_{i,2l}`. All values are 1.
pub fn gen_muca_lb<S: Scalar>(p: usize, b: u64, m: usize) -> Result<MucaInstance<S>, GenError> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(param("p", "must be an odd integer of at least 3"));
    }
    if b < 2 || !b.is_multiple_of(2) {
        return Err(param("B", "must be an even integer of at least 2"));
    }
    let cells = p * (p + 1);
    if m == 0 || !m.is_multiple_of(cells) {
        return Err(param("m", format!("must be a positive multiple of p (p + 1) = {cells}")));
    }
    let per_cell = m / cells;
    let cell = |i: usize, j: usize| -> Vec<String> { (0..per_cell).map(|k| format!("u{i}_{j}_{k}")).collect() };
    let mut items = Vec::with_capacity(m);
    for i in 1..=p {
        for j in 1..=p + 1 {
            items.extend(cell(i, j).into_iter().map(|id| Item { id, multiplicity: b }));
        }
    }
    let half = (b / 2) as usize;
    let mut requests = Vec::new();
    for copy in 0..half {
        for l in 1..=p {
            let bundle = (1..=p + 1).flat_map(|j| cell(l, j)).collect();
            requests.push(BundleRequest {
                id: format!("row{l}_{copy}"),
                bundle,
                value: S::one(),
            });
        }
    }
    for (tag, offset) in [("a", 1), ("b", 0)] {
        for l in 1..=p.div_ceil(2) {
            let mut bundle = cell(1, 2 * l - 1);
            bundle.extend(cell(1, 2 * l));
            for i in 2..=p {
                bundle.extend(cell(i, 2 * l - offset));
            }
            for copy in 0..half {
                requests.push(BundleRequest {
                    id: format!("{tag}{l}_{copy}"),
                    bundle: bundle.clone(),
                    value: S::one(),
                });
            }
        }
    }
    Ok(MucaInstance::new(items, requests)?)
}

/// Winners of an optimal allocation of [`gen_muca_lb`] (value `p B`): every
/// request except the copies of the first row bundle.
pub fn muca_lb_witness<S: Scalar>(inst: &MucaInstance<S>) -> Vec<usize> {
    (0..inst.requests().len())
        .filter(|&r| !inst.requests()[r].id.starts_with("row1_"))
        .collect()
}

fn check_range(name: &'static str, (lo, hi): (f64, f64), unit: bool) -> Result<(), GenError> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) || (unit && hi > 1.0) {
        let bound = if unit { "0 < lo <= hi <= 1" } else { "0 < lo <= hi" };
        return Err(param(name, format!("[{lo}, {hi}] must satisfy {bound}")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Seeded connected random graph (a random spanning tree plus extra random
/// edges) with capacities in `[B, 2B]` and requests between distinct pairs
/// joined by a path.
pub fn gen_random<S: Scalar>(params: &RandomParams) -> Result<UfpInstance<S>, GenError> {
    let n = params.vertices;
    if n < 2 {
        return Err(param("vertices", "must be at least 2"));
    }
    if params.edges < n - 1 {
        return Err(param("edges", format!("must be at least vertices - 1 = {}", n - 1)));
    }
    if !(params.b >= 1.0 && params.b.is_finite()) {
        return Err(param("B", "must be a finite number of at least 1"));
    }
    check_range("value_range", params.value_range, false)?;
    check_range("demand_range", params.demand_range, true)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::with_capacity(params.edges);
    let random_edge = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
        let (tail, head) = if params.directed && rng.gen_bool(0.5) { (b, a) } else { (a, b) };
        let capacity = S::lit(uniform(rng, (params.b, 2.0 * params.b)));
        Edge { tail, head, capacity }
    };
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        edges.push(random_edge(&mut rng, parent, order[k]));
    }
    while edges.len() < params.edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n - 1);
        let b = if b >= a { b + 1 } else { b };
        edges.push(random_edge(&mut rng, a, b));
    }
    let skeleton = UfpInstance::<S>::new(params.directed, n, edges, Vec::new())?;
    let graph = Graph::new(&skeleton);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .filter(|&(s, t)| s != t && graph.reachable(s, t))
        .collect();
    if params.requests > 0 && pairs.is_empty() {
        return Err(param("edges", "no vertex pair is connected"));
    }
    let requests = (0..params.requests)
        .map(|k| {
            let (source, target) = pairs[rng.gen_range(0..pairs.len())];
            Request {
                id: format!("r{k}"),
                source,
                target,
                demand: S::lit(uniform(&mut rng, params.demand_range)),
                value: S::lit(uniform(&mut rng, params.value_range)),
            }
        })
        .collect();
    Ok(UfpInstance::new(params.directed, n, skeleton.edges, requests)?)
}

/// Seeded random single-minded auction: multiplicities in `[B, 2B]`,
/// bundles of 1 to `max_bundle` distinct items.
pub fn gen_random_muca<S: Scalar>(params: &RandomMucaParams) -> Result<MucaInstance<S>, GenError> {
    if params.items == 0 {
        return Err(param("items", "must be at least 1"));
    }
    if params.b < 1 {
        return Err(param("B", "must be at least 1"));
    }
    if params.max_bundle == 0 {
        return Err(param("max_bundle", "must be at least 1"));
    }
    check_range("value_range", params.value_range, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let items: Vec<Item> = (0..params.items)
        .map(|k| Item {
            id: format!("i{k}"),
            multiplicity: rng.gen_range(params.b..=2 * params.b),
        })
        .collect();
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let requests = (0..params.requests)
        .map(|k| {
            let size = rng.gen_range(1..=params.max_bundle.min(params.items));
            BundleRequest {
                id: format!("r{k}"),
                bundle: ids.choose_multiple(&mut rng, size).cloned().collect(),
                value: S::lit(uniform(&mut rng, params.value_range)),
            }
        })
        .collect();
    Ok(MucaInstance::new(items, requests)?)
}
