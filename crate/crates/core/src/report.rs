//! JSON and CSV renderings of results.
//!
//! Reports round every float to 12 significant digits and rely on sorted
//! object keys, so identical inputs give identical bytes.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::abstraction::{
    Abstraction, AbstractionFamily, ValidationReport, Verdict, ViolationKind,
};
use crate::config::ProblemConfig;
use crate::controller::{Infeasible, Solution, SolveOutcome, SolveReport};
use crate::graph::{Beta, EdgeJson, TransitionGraph};
use crate::oracle::{ComparisonReport, OracleResult};
use crate::system::{HybridControlSequence, Sparsity, Trajectory};
use crate::walk::Walk;

pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(round12(v))
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("+inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|v| num(*v)).collect())
}

pub fn to_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn beta_json(beta: &Beta) -> Value {
    match beta {
        Beta::Zero => json!({ "kind": "zero" }),
        Beta::FreeNonzero => json!({ "kind": "free_nonzero" }),
        Beta::Feedback { c, e } => json!({ "kind": "feedback", "c": nums(c), "e": num(*e) }),
    }
}

pub fn walk_json(graph: &TransitionGraph, walk: &Walk) -> Value {
    let edges: Vec<Value> = walk
        .edges
        .iter()
        .map(|id| {
            let e = graph.edge(*id);
            let j = EdgeJson::from(e);
            json!({ "src": j.src, "dst": j.dst, "alpha": j.alpha, "beta": beta_json(e.beta()) })
        })
        .collect();
    json!({ "start": walk.start, "length": walk.len(), "edges": edges })
}

pub fn sparsity_json(s: &Sparsity) -> Value {
    json!({ "switches": s.switches, "controls": s.controls, "total": s.total })
}

pub fn sequence_json(seq: &HybridControlSequence) -> Value {
    json!({
        "nu": seq.nu.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "mu": nums(&seq.mu),
    })
}

pub fn trajectory_json(traj: &Trajectory) -> Value {
    Value::Array(traj.states.iter().map(|x| nums(x.as_slice())).collect())
}

/// Columns `t, x_1..x_d, nu, mu`; the final row has no control.
pub fn trajectory_csv(traj: &Trajectory, seq: &HybridControlSequence) -> String {
    let d = traj.states.first().map_or(0, |x| x.len());
    let mut out = String::from("t");
    for k in 1..=d {
        let _ = write!(out, ",x_{k}");
    }
    out.push_str(",nu,mu\n");
    for (t, x) in traj.states.iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in x.iter() {
            let _ = write!(out, ",{}", round12(*v));
        }
        match (seq.nu.get(t), seq.mu.get(t)) {
            (Some(i), Some(m)) => {
                let _ = writeln!(out, ",{},{}", i + 1, round12(*m));
            }
            _ => out.push_str(",,\n"),
        }
    }
    out
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::ValidStructural => "VALID_STRUCTURAL",
        Verdict::ValidSampled => "VALID_SAMPLED",
        Verdict::Invalid => "INVALID",
    }
}

fn violation_name(k: ViolationKind) -> &'static str {
    match k {
        ViolationKind::Overlap => "OVERLAP",
        ViolationKind::Uncovered => "UNCOVERED",
        ViolationKind::NonConstantTarget => "NON_CONSTANT_TARGET",
        ViolationKind::LeavesDomain => "LEAVES_DOMAIN",
    }
}

pub fn validation_json(r: &ValidationReport) -> Value {
    let violations: Vec<Value> = r
        .violations
        .iter()
        .map(|v| {
            let witnesses: Vec<Value> = v
                .witnesses
                .iter()
                .map(|w| json!({ "state": nums(&w.state), "image": nums(&w.image), "target": w.target }))
                .collect();
            json!({
                "kind": violation_name(v.kind),
                "region": v.region,
                "subsystem": v.subsystem.map(|i| i + 1),
                "observed": v.observed,
                "witnesses": witnesses,
            })
        })
        .collect();
    json!({
        "verdict": verdict_name(r.verdict),
        "structural_pairs": r.structural_pairs,
        "sampled_pairs": r.sampled_pairs,
        "violations": violations,
    })
}

fn family_name(f: AbstractionFamily) -> &'static str {
    match f {
        AbstractionFamily::Support => "support",
        AbstractionFamily::Lattice => "lattice",
        AbstractionFamily::Explicit => "explicit",
    }
}

pub fn abstraction_json(abs: &Abstraction) -> Value {
    let regions: Vec<Value> = abs
        .regions()
        .iter()
        .map(|r| serde_json::to_value(crate::graph::RegionJson::from(r)).expect("region serializes"))
        .collect();
    json!({ "family": family_name(abs.family()), "regions": regions })
}

pub fn solve_report_json(graph: &TransitionGraph, r: &SolveReport) -> Value {
    json!({
        "walk": walk_json(graph, &r.walk),
        "walk_weight": r.walk_weight,
        "sequence": sequence_json(&r.sequence),
        "trajectory": trajectory_json(&r.trajectory),
        "sparsity": sparsity_json(&r.sparsity),
        "reached_origin": r.reached_origin,
    })
}

/// Notes comparing a computed optimum with the configured reference value.
pub fn reference_notes(config: &ProblemConfig, total: Option<usize>) -> Vec<String> {
    match (config.reference_total, total) {
        (Some(reference), Some(total)) if reference != total => vec![format!(
            "erratum: reference total {reference} differs from the computed total {total}; \
             the computed value counts nonzero entries of the switch differences and of the \
             continuous sequence exactly"
        )],
        (Some(reference), None) => vec![format!(
            "reference total {reference} given but no solution was found"
        )],
        _ => Vec::new(),
    }
}

pub fn solution_json(config: &ProblemConfig, sol: &Solution) -> Value {
    let mut out = json!({
        "abstraction": abstraction_json(&sol.abstraction),
        "validation": validation_json(&sol.validation),
        "horizon": config.horizon,
        "xi": nums(config.xi.as_slice()),
        "notes": reference_notes(config, sol.total()),
    });
    let obj = out.as_object_mut().expect("object literal");
    if let Some(g) = &sol.graph {
        obj.insert(
            "graph".into(),
            json!({ "vertices": g.n_vertices(), "edges": g.edges().len() }),
        );
    }
    match &sol.outcome {
        SolveOutcome::Solved(r) => {
            obj.insert("status".into(), json!("SOLVED"));
            let graph = sol.graph.as_ref().expect("solved outcomes carry a graph");
            obj.insert("solution".into(), solve_report_json(graph, r));
        }
        SolveOutcome::Infeasible(why) => {
            obj.insert("status".into(), json!("INFEASIBLE"));
            let reason = match why {
                Infeasible::NoWalk { start_region } => {
                    json!({ "kind": "NO_WALK", "start_region": start_region })
                }
                Infeasible::AbstractionInvalid(_) => json!({ "kind": "ABSTRACTION_INVALID" }),
            };
            obj.insert("reason".into(), reason);
        }
    }
    out
}

pub fn oracle_json(result: Option<&OracleResult>) -> Value {
    match result {
        None => json!({ "status": "INFEASIBLE" }),
        Some(r) => json!({
            "status": "SOLVED",
            "total": r.total,
            "sparsity": sparsity_json(&r.sparsity),
            "witness": sequence_json(&r.witness),
            "sequences_examined": r.sequences_examined,
        }),
    }
}

pub fn comparison_json(c: &ComparisonReport) -> Value {
    json!({
        "verdict": c.verdict.name(),
        "graph_total": c.graph_total,
        "oracle_total": c.oracle_total,
        "difference": c.difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(-20.000000000000004), -20.0);
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(-0.0), 0.0);
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            states: vec![DVector::from_vec(vec![0.0, 10.0]), DVector::from_vec(vec![0.0, 0.0])],
        };
        let seq = HybridControlSequence::new(vec![0], vec![-20.0]).unwrap();
        assert_eq!(trajectory_csv(&traj, &seq), "t,x_1,x_2,nu,mu\n0,0,10,1,-20\n1,0,0,,\n");
    }

    #[test]
    fn keys_are_sorted() {
        let s = to_text(&json!({ "b": 1, "a": 2 }));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }
}
