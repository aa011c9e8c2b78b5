//! Problem instances: capacitated graphs with connection requests, and
//! multi-unit auctions with single-minded bundle requests.
//!
//! Instances are validated on construction and immutable afterwards. The JSON
//! document layout is the on-disk format used by the CLI:
//!
//! ```json
//! {"directed": true, "vertices": 2,
//!  "edges": [{"tail": 0, "head": 1, "capacity": 10}],
//!  "requests": [{"id": "r0", "source": 0, "target": 1, "demand": 1, "value": 5}]}
//! ```

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Semantic { field: String, message: String },
}

impl InstanceError {
    fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        InstanceError::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }

    fn from_json(err: serde_json::Error) -> Self {
        InstanceError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge<S> {
    pub tail: usize,
    pub head: usize,
    pub capacity: S,
}

/// A connection request `(source, target, demand, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request<S> {
    pub id: String,
    pub source: usize,
    pub target: usize,
    pub demand: S,
    pub value: S,
}

/// Capacitated graph plus connection requests.
///
/// Parallel edges are kept distinct. Undirected edges are stored once and may
/// be traversed in either direction against one shared capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UfpInstance<S> {
    pub directed: bool,
    #[serde(rename = "vertices")]
    pub vertex_count: usize,
    pub edges: Vec<Edge<S>>,
    pub requests: Vec<Request<S>>,
}

fn check_positive<S: Scalar>(x: S, field: String, what: &str) -> Result<(), InstanceError> {
    if x.is_finite() && x > S::zero() {
        Ok(())
    } else {
        Err(InstanceError::semantic(field, format!("{what} must be positive")))
    }
}

impl<S: Scalar> UfpInstance<S> {
    pub fn new(
        directed: bool,
        vertex_count: usize,
        edges: Vec<Edge<S>>,
        requests: Vec<Request<S>>,
    ) -> Result<Self, InstanceError> {
        let inst = UfpInstance {
            directed,
            vertex_count,
            edges,
            requests,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: Self = serde_json::from_str(text).map_err(InstanceError::from_json)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.vertex_count == 0 {
            return Err(InstanceError::semantic("vertices", "must be positive"));
        }
        if self.edges.is_empty() {
            return Err(InstanceError::semantic("edges", "at least one edge is required"));
        }
        let n = self.vertex_count;
        for (i, e) in self.edges.iter().enumerate() {
            if e.tail >= n {
                return Err(InstanceError::semantic(
                    format!("edges[{i}].tail"),
                    format!("vertex id {} out of range (vertices = {n})", e.tail),
                ));
            }
            if e.head >= n {
                return Err(InstanceError::semantic(
                    format!("edges[{i}].head"),
                    format!("vertex id {} out of range (vertices = {n})", e.head),
                ));
            }
            if e.tail == e.head {
                return Err(InstanceError::semantic(
                    format!("edges[{i}]"),
                    "self-loops are not allowed",
                ));
            }
            check_positive(e.capacity, format!("edges[{i}].capacity"), "capacity")?;
        }
        let mut seen = HashSet::new();
        for (i, r) in self.requests.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].id"),
                    format!("duplicate request id {:?}", r.id),
                ));
            }
            if r.source >= n {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].source"),
                    format!("vertex id {} out of range (vertices = {n})", r.source),
                ));
            }
            if r.target >= n {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].target"),
                    format!("vertex id {} out of range (vertices = {n})", r.target),
                ));
            }
            if r.source == r.target {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].target"),
                    "target must differ from source",
                ));
            }
            check_positive(r.demand, format!("requests[{i}].demand"), "demand")?;
            check_positive(r.value, format!("requests[{i}].value"), "value")?;
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn request_index(&self, id: &str) -> Option<usize> {
        self.requests.iter().position(|r| r.id == id)
    }

    pub fn min_capacity(&self) -> S {
        self.edges
            .iter()
            .map(|e| e.capacity)
            .fold(S::infinity(), S::min)
    }

    pub fn max_capacity(&self) -> S {
        self.edges.iter().map(|e| e.capacity).fold(S::zero(), S::max)
    }

    pub fn max_demand(&self) -> Option<S> {
        self.requests.iter().map(|r| r.demand).reduce(S::max)
    }

    /// Converts every real field to another scalar type.
    pub fn cast<T: Scalar>(&self) -> UfpInstance<T> {
        let c = |x: S| T::from(x).expect("scalar cast");
        UfpInstance {
            directed: self.directed,
            vertex_count: self.vertex_count,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    tail: e.tail,
                    head: e.head,
                    capacity: c(e.capacity),
                })
                .collect(),
            requests: self
                .requests
                .iter()
                .map(|r| Request {
                    id: r.id.clone(),
                    source: r.source,
                    target: r.target,
                    demand: c(r.demand),
                    value: c(r.value),
                })
                .collect(),
        }
    }
}

/// An instance scaled so that every demand lies in `(0, 1]`, together with the
/// bound `B` (the smallest scaled capacity) and the scale factor used.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedInstance<S> {
    inner: UfpInstance<S>,
    b: S,
    scale: S,
}

impl<S: Scalar> NormalizedInstance<S> {
    /// Divides all demands and capacities by the largest demand.
    pub fn normalize(inst: &UfpInstance<S>) -> Self {
        let scale = inst.max_demand().unwrap_or_else(S::one);
        let mut inner = inst.clone();
        if scale != S::one() {
            for e in &mut inner.edges {
                e.capacity = e.capacity / scale;
            }
            for r in &mut inner.requests {
                r.demand = r.demand / scale;
            }
        }
        let b = inner.min_capacity();
        NormalizedInstance { inner, b, scale }
    }

    /// Accepts an instance whose demands already lie in `(0, 1]` without
    /// rescaling it.
    pub fn as_given(inst: &UfpInstance<S>) -> Result<Self, InstanceError> {
        for (i, r) in inst.requests.iter().enumerate() {
            if r.demand > S::one() {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].demand"),
                    "demand exceeds 1 in an unnormalized instance",
                ));
            }
        }
        Ok(NormalizedInstance {
            b: inst.min_capacity(),
            inner: inst.clone(),
            scale: S::one(),
        })
    }

    pub fn inner(&self) -> &UfpInstance<S> {
        &self.inner
    }

    pub fn into_inner(self) -> UfpInstance<S> {
        self.inner
    }

    pub fn b(&self) -> S {
        self.b
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    /// `B >= 1`; below that the solvers refuse to run.
    pub fn is_b_sufficient(&self) -> bool {
        self.b >= S::one()
    }

    /// Whether `B >= ln m / epsilon^2`, the regime in which the approximation
    /// guarantees apply.
    pub fn guarantee_holds(&self, epsilon: S) -> bool {
        let m = S::from_count(self.inner.edge_count());
        self.b >= m.ln() / (epsilon * epsilon)
    }

    /// `sqrt(ln m / B)`: the condition `B >= ln m / epsilon^2` holds exactly
    /// for epsilon at or above this value.
    pub fn max_epsilon(&self) -> S {
        let m = S::from_count(self.inner.edge_count());
        (m.ln() / self.b).sqrt()
    }

    /// Replaces one request's reported demand and value, keeping `B` and the
    /// scale fixed. The new demand must stay in `(0, 1]`.
    pub fn with_report(&self, request: usize, demand: S, value: S) -> Result<Self, InstanceError> {
        check_positive(demand, format!("requests[{request}].demand"), "demand")?;
        check_positive(value, format!("requests[{request}].value"), "value")?;
        if demand > S::one() {
            return Err(InstanceError::semantic(
                format!("requests[{request}].demand"),
                "normalized demand exceeds 1",
            ));
        }
        let mut out = self.clone();
        let r = out.inner.requests.get_mut(request).ok_or_else(|| {
            InstanceError::semantic(format!("requests[{request}]"), "no such request")
        })?;
        r.demand = demand;
        r.value = value;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub id: String,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleRequest<S> {
    pub id: String,
    pub bundle: Vec<String>,
    pub value: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MucaDocument<S> {
    items: Vec<Item>,
    requests: Vec<BundleRequest<S>>,
}

/// Multi-unit auction: items with multiplicities and single-minded bundle
/// requests. Bundles are resolved to item indices at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MucaInstance<S> {
    items: Vec<Item>,
    requests: Vec<BundleRequest<S>>,
    bundles: Vec<Vec<usize>>,
}

impl<S: Scalar> MucaInstance<S> {
    pub fn new(items: Vec<Item>, requests: Vec<BundleRequest<S>>) -> Result<Self, InstanceError> {
        if items.is_empty() {
            return Err(InstanceError::semantic("items", "at least one item is required"));
        }
        let mut index = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            if it.multiplicity == 0 {
                return Err(InstanceError::semantic(
                    format!("items[{i}].multiplicity"),
                    "multiplicity must be positive",
                ));
            }
            if index.insert(it.id.as_str(), i).is_some() {
                return Err(InstanceError::semantic(
                    format!("items[{i}].id"),
                    format!("duplicate item id {:?}", it.id),
                ));
            }
        }
        let mut seen = HashSet::new();
        let mut bundles = Vec::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].id"),
                    format!("duplicate request id {:?}", r.id),
                ));
            }
            if r.bundle.is_empty() {
                return Err(InstanceError::semantic(
                    format!("requests[{i}].bundle"),
                    "bundle must be nonempty",
                ));
            }
            check_positive(r.value, format!("requests[{i}].value"), "value")?;
            let mut resolved = Vec::with_capacity(r.bundle.len());
            for (k, id) in r.bundle.iter().enumerate() {
                let &u = index.get(id.as_str()).ok_or_else(|| {
                    InstanceError::semantic(
                        format!("requests[{i}].bundle[{k}]"),
                        format!("unknown item id {id:?}"),
                    )
                })?;
                if resolved.contains(&u) {
                    return Err(InstanceError::semantic(
                        format!("requests[{i}].bundle[{k}]"),
                        format!("item {id:?} listed twice"),
                    ));
                }
                resolved.push(u);
            }
            bundles.push(resolved);
        }
        Ok(MucaInstance {
            items,
            requests,
            bundles,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: MucaDocument<S> = serde_json::from_str(text).map_err(InstanceError::from_json)?;
        Self::new(doc.items, doc.requests)
    }

    pub fn to_json(&self) -> String {
        let doc = MucaDocument {
            items: self.items.clone(),
            requests: self.requests.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serializes")
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn requests(&self) -> &[BundleRequest<S>] {
        &self.requests
    }

    /// Item indices of request `r`'s bundle, in listed order.
    pub fn bundle(&self, r: usize) -> &[usize] {
        &self.bundles[r]
    }

    /// Smallest item multiplicity.
    pub fn b(&self) -> u64 {
        self.items.iter().map(|i| i.multiplicity).min().unwrap_or(0)
    }

    pub fn request_index(&self, id: &str) -> Option<usize> {
        self.requests.iter().position(|r| r.id == id)
    }

    pub fn guarantee_holds(&self, epsilon: S) -> bool {
        let m = S::from_count(self.items.len());
        S::from_u64(self.b()).expect("multiplicity fits scalar") >= m.ln() / (epsilon * epsilon)
    }

    /// Replaces one request's reported value.
    pub fn with_value(&self, request: usize, value: S) -> Result<Self, InstanceError> {
        check_positive(value, format!("requests[{request}].value"), "value")?;
        let mut out = self.clone();
        out.requests
            .get_mut(request)
            .ok_or_else(|| InstanceError::semantic(format!("requests[{request}]"), "no such request"))?
            .value = value;
        Ok(out)
    }

    /// Replaces one request's bundle by a different (typically smaller) set.
    pub fn with_bundle(&self, request: usize, bundle: Vec<String>) -> Result<Self, InstanceError> {
        let mut requests = self.requests.clone();
        requests
            .get_mut(request)
            .ok_or_else(|| InstanceError::semantic(format!("requests[{request}]"), "no such request"))?
            .bundle = bundle;
        Self::new(self.items.clone(), requests)
    }
}
