//! Machine-readable output documents of the command-line tool.

use serde::{Deserialize, Serialize};

use crate::engine::{CertificateSource, IterationRecord, StopRule};
use crate::mechanism::{AuditReport, PaymentProfile};
use crate::model::{MucaInstance, UfpInstance};
use crate::muca::MucaSolution;
use crate::oracle::{MucaOptimum, RepeatOptimum, UfpOptimum};
use crate::repeat::RepeatSolution;
use crate::scalar::Scalar;
use crate::ufp::UfpSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guarantee {
    Holds,
    Void,
}

impl Guarantee {
    pub fn from_bool(holds: bool) -> Self {
        if holds {
            Guarantee::Holds
        } else {
            Guarantee::Void
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Ufp,
    Muca,
    Repeat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocatedEntry {
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<Vec<String>>,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub problem: Problem,
    pub allocated: Vec<AllocatedEntry>,
    pub primal_value: f64,
    pub dual_certificate: f64,
    pub certificate_source: CertificateSource,
    pub exit_reason: String,
    pub stop_rule: StopRule,
    pub epsilon: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub guarantee: Guarantee,
    /// Requests that could not be served at all.
    pub dropped: Vec<String>,
}

pub fn ufp_solution_doc<S: Scalar>(inst: &UfpInstance<S>, sol: &UfpSolution<S>, guarantee: Guarantee) -> SolutionDoc {
    SolutionDoc {
        problem: Problem::Ufp,
        allocated: sol
            .allocation
            .iter()
            .map(|a| AllocatedEntry {
                request: a.id.clone(),
                path: Some(a.path.edges.clone()),
                bundle: None,
                value: inst.requests[a.request].value.as_f64(),
                count: None,
            })
            .collect(),
        primal_value: sol.primal_value.as_f64(),
        dual_certificate: sol.dual_certificate.as_f64(),
        certificate_source: sol.certificate.source,
        exit_reason: sol.exit_reason().as_str().into(),
        stop_rule: sol.trace.stop_rule,
        epsilon: sol.epsilon.as_f64(),
        b: sol.b.as_f64(),
        guarantee,
        dropped: sol.trace.dropped.iter().map(|&r| inst.requests[r].id.clone()).collect(),
    }
}

pub fn repeat_solution_doc<S: Scalar>(inst: &UfpInstance<S>, sol: &RepeatSolution<S>, guarantee: Guarantee) -> SolutionDoc {
    SolutionDoc {
        problem: Problem::Repeat,
        allocated: sol
            .allocation
            .iter()
            .map(|a| AllocatedEntry {
                request: a.id.clone(),
                path: Some(a.path.edges.clone()),
                bundle: None,
                value: inst.requests[a.request].value.as_f64(),
                count: Some(a.count),
            })
            .collect(),
        primal_value: sol.primal_value.as_f64(),
        dual_certificate: sol.dual_certificate.as_f64(),
        certificate_source: sol.certificate.source,
        exit_reason: sol.exit_reason().as_str().into(),
        stop_rule: sol.trace.stop_rule,
        epsilon: sol.epsilon.as_f64(),
        b: sol.b.as_f64(),
        guarantee,
        dropped: sol.trace.dropped.iter().map(|&r| inst.requests[r].id.clone()).collect(),
    }
}

pub fn muca_solution_doc<S: Scalar>(inst: &MucaInstance<S>, sol: &MucaSolution<S>, guarantee: Guarantee) -> SolutionDoc {
    SolutionDoc {
        problem: Problem::Muca,
        allocated: sol
            .winners
            .iter()
            .map(|&r| AllocatedEntry {
                request: inst.requests()[r].id.clone(),
                path: None,
                bundle: Some(inst.requests()[r].bundle.clone()),
                value: inst.requests()[r].value.as_f64(),
                count: None,
            })
            .collect(),
        primal_value: sol.primal_value.as_f64(),
        dual_certificate: sol.dual_certificate.as_f64(),
        certificate_source: sol.certificate.source,
        exit_reason: sol.exit_reason().as_str().into(),
        stop_rule: sol.trace.stop_rule,
        epsilon: sol.epsilon.as_f64(),
        b: sol.b as f64,
        guarantee,
        dropped: sol.trace.dropped.iter().map(|&r| inst.requests()[r].id.clone()).collect(),
    }
}

/// One trace line: an iteration record with the request id attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub id: String,
    #[serde(flatten)]
    pub record: IterationRecord<f64>,
}

/// JSON-lines rendering of a trace.
pub fn trace_lines<S: Scalar>(records: &[IterationRecord<S>], id: impl Fn(usize) -> String) -> String {
    let mut out = String::new();
    for r in records {
        let line = TraceLine {
            id: id(r.request),
            record: IterationRecord {
                iteration: r.iteration,
                request: r.request,
                resources: r.resources.clone(),
                length: r.length.as_f64(),
                alpha: r.alpha.as_f64(),
                log_d1: r.log_d1.as_f64(),
                d1: r.d1.as_f64(),
                d2: r.d2.as_f64(),
                primal: r.primal.as_f64(),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerPayment {
    pub request: String,
    pub value: f64,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentsDoc {
    pub winners: Vec<WinnerPayment>,
    pub tolerance: f64,
}

pub fn payments_doc<S: Scalar>(profile: &PaymentProfile<S>) -> PaymentsDoc {
    PaymentsDoc {
        winners: profile
            .winners()
            .map(|e| WinnerPayment {
                request: e.request.clone(),
                value: e.value.as_f64(),
                payment: e.payment.as_f64(),
            })
            .collect(),
        tolerance: profile.tolerance.as_f64(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<f64>,
    pub value: f64,
    pub allocated: bool,
    pub payment: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditDoc {
    pub request: String,
    pub true_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_demand: Option<f64>,
    pub truthful_utility: f64,
    pub best_misreport: ReportPoint,
    pub gap: f64,
    pub tolerance: f64,
    pub truthful: bool,
    pub evaluated: usize,
    pub skipped_demands: Vec<f64>,
}

/// `demand_scale` converts normalized demands back to input units.
pub fn audit_doc<S: Scalar>(report: &AuditReport<S>, demand_scale: S) -> AuditDoc {
    let d = |x: Option<S>| x.map(|x| (x * demand_scale).as_f64());
    AuditDoc {
        request: report.request.clone(),
        true_value: report.true_value.as_f64(),
        true_demand: d(report.true_demand),
        truthful_utility: report.truthful_utility.as_f64(),
        best_misreport: ReportPoint {
            demand: d(report.best.demand),
            value: report.best.value.as_f64(),
            allocated: report.best.allocated,
            payment: report.best.payment.as_f64(),
            utility: report.best.utility.as_f64(),
        },
        gap: report.gap.as_f64(),
        tolerance: report.tolerance.as_f64(),
        truthful: report.is_truthful(),
        evaluated: report.evaluated.len(),
        skipped_demands: report.skipped_demands.iter().map(|&x| (x * demand_scale).as_f64()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDoc {
    pub opt: f64,
    pub witness: Vec<WitnessEntry>,
    /// Set when the copy cap may have cut off better solutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capped: Option<bool>,
}

pub fn ufp_oracle_doc<S: Scalar>(inst: &UfpInstance<S>, opt: &UfpOptimum<S>) -> OracleDoc {
    OracleDoc {
        opt: opt.value.as_f64(),
        witness: opt
            .witness
            .iter()
            .map(|(r, p)| WitnessEntry {
                request: inst.requests[*r].id.clone(),
                path: Some(p.edges.clone()),
                bundle: None,
                count: None,
            })
            .collect(),
        capped: None,
    }
}

pub fn muca_oracle_doc<S: Scalar>(inst: &MucaInstance<S>, opt: &MucaOptimum<S>) -> OracleDoc {
    OracleDoc {
        opt: opt.value.as_f64(),
        witness: opt
            .witness
            .iter()
            .map(|&r| WitnessEntry {
                request: inst.requests()[r].id.clone(),
                path: None,
                bundle: Some(inst.requests()[r].bundle.clone()),
                count: None,
            })
            .collect(),
        capped: None,
    }
}

pub fn repeat_oracle_doc<S: Scalar>(inst: &UfpInstance<S>, opt: &RepeatOptimum<S>) -> OracleDoc {
    OracleDoc {
        opt: opt.value.as_f64(),
        witness: opt
            .witness
            .iter()
            .map(|(r, p, k)| WitnessEntry {
                request: inst.requests[*r].id.clone(),
                path: Some(p.edges.clone()),
                bundle: None,
                count: Some(*k),
            })
            .collect(),
        capped: Some(opt.capped),
    }
}

/// Feasibility report of a solution document against an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyDoc {
    pub feasible: bool,
    pub primal_value: f64,
    pub violations: Vec<String>,
}

/// Checks that every allocated path (or bundle) serves its request and that
/// no capacity (or multiplicity) is exceeded.
pub fn verify_ufp<S: Scalar>(inst: &UfpInstance<S>, doc: &SolutionDoc) -> VerifyDoc {
    let mut violations = Vec::new();
    let mut load = vec![0.0f64; inst.edge_count()];
    let mut value = 0.0;
    let mut seen = vec![false; inst.requests.len()];
    for a in &doc.allocated {
        let Some(r) = inst.request_index(&a.request) else {
            violations.push(format!("unknown request {}", a.request));
            continue;
        };
        let req = &inst.requests[r];
        if doc.problem != Problem::Repeat && std::mem::replace(&mut seen[r], true) {
            violations.push(format!("request {} allocated twice", a.request));
        }
        let Some(path) = &a.path else {
            violations.push(format!("request {} has no path", a.request));
            continue;
        };
        if path.iter().any(|&e| e >= inst.edge_count()) {
            violations.push(format!("request {} uses an unknown edge", a.request));
            continue;
        }
        match crate::path::walk_vertices(inst, req.source, path) {
            Some(vs) if vs.last() == Some(&req.target) => {}
            _ => violations.push(format!("path of request {} does not join its endpoints", a.request)),
        }
        let copies = a.count.unwrap_or(1);
        for &e in path {
            load[e] += req.demand.as_f64() * copies as f64;
        }
        value += req.value.as_f64() * copies as f64;
    }
    for (e, (&l, edge)) in load.iter().zip(&inst.edges).enumerate() {
        let c = edge.capacity.as_f64();
        if l > c * (1.0 + 1e-12) {
            violations.push(format!("edge {e} carries {l} > capacity {c}"));
        }
    }
    VerifyDoc {
        feasible: violations.is_empty(),
        primal_value: value,
        violations,
    }
}

pub fn verify_muca<S: Scalar>(inst: &MucaInstance<S>, doc: &SolutionDoc) -> VerifyDoc {
    let mut violations = Vec::new();
    let mut load = vec![0u64; inst.items().len()];
    let mut value = 0.0;
    let mut seen = vec![false; inst.requests().len()];
    for a in &doc.allocated {
        let Some(r) = inst.request_index(&a.request) else {
            violations.push(format!("unknown request {}", a.request));
            continue;
        };
        if std::mem::replace(&mut seen[r], true) {
            violations.push(format!("request {} allocated twice", a.request));
        }
        if a.bundle.as_ref() != Some(&inst.requests()[r].bundle) {
            violations.push(format!("bundle of request {} differs from its bid", a.request));
        }
        for &u in inst.bundle(r) {
            load[u] += 1;
        }
        value += inst.requests()[r].value.as_f64();
    }
    for (l, item) in load.iter().zip(inst.items()) {
        if *l > item.multiplicity {
            violations.push(format!("item {} allocated {} times > multiplicity {}", item.id, l, item.multiplicity));
        }
    }
    VerifyDoc {
        feasible: violations.is_empty(),
        primal_value: value,
        violations,
    }
}
