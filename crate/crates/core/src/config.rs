//! Problem configuration files.
//!
//! Indices are 1-based in files (subsystems, coordinates, switch pairs) and
//! 0-based in memory. Every schema violation names the offending field as a
//! path such as `$.subsystems[1].b`.

use nalgebra::DVector;
use serde_json::{json, Map, Value};

use crate::abstraction::{Region, RegionKind};
use crate::controller::AbstractionChoice;
use crate::error::{Error, Result};
use crate::graph::{parse_sign, Edge, EdgeJson};
use crate::system::{
    ControlSet, OrthantSign, StateDomain, SubsystemDynamics, SwitchedSystem, EPS_ZERO,
};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub system: SwitchedSystem,
    pub xi: DVector<f64>,
    pub horizon: usize,
    pub epsilon: f64,
    pub abstraction: AbstractionChoice,
    pub extra_edges: Vec<Edge>,
    pub free_nonzero_default: Option<f64>,
    /// A published optimum to compare against; reports note any disagreement.
    pub reference_total: Option<usize>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy)]
struct Node<'a> {
    value: &'a Value,
    path: &'a str,
}

impl<'a> Node<'a> {
    fn object(&self) -> Result<&'a Map<String, Value>> {
        self.value
            .as_object()
            .ok_or_else(|| schema(self.path, "expected an object"))
    }

    fn get(&self, key: &str) -> Result<Option<(&'a Value, String)>> {
        Ok(self
            .object()?
            .get(key)
            .map(|v| (v, format!("{}.{key}", self.path))))
    }

    fn require(&self, key: &str) -> Result<(&'a Value, String)> {
        self.get(key)?
            .ok_or_else(|| schema(&format!("{}.{key}", self.path), "missing field"))
    }
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(path, "expected a finite number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected a nonnegative integer"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn f64_array(v: &Value, path: &str, len: usize) -> Result<Vec<f64>> {
    let items = as_array(v, path)?;
    if items.len() != len {
        return Err(schema(path, format!("expected {len} entries, found {}", items.len())));
    }
    items
        .iter()
        .enumerate()
        .map(|(k, x)| as_f64(x, &format!("{path}[{k}]")))
        .collect()
}

fn extended_bound(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Value::String(s) if s == "+inf" || s == "inf" => Ok(f64::INFINITY),
        _ => as_f64(v, path).map_err(|_| schema(path, "expected a number, \"-inf\" or \"+inf\"")),
    }
}

fn parse_domain(v: &Value, path: &str, d: usize) -> Result<StateDomain> {
    let node = Node { value: v, path };
    let (kind, kind_path) = node.require("type")?;
    match as_str(kind, &kind_path)? {
        "reals" => Ok(StateDomain::All),
        "box" => {
            let (lo, lo_path) = node.require("lower")?;
            let (hi, hi_path) = node.require("upper")?;
            let lower = f64_array(lo, &lo_path, d)?;
            let upper = f64_array(hi, &hi_path, d)?;
            let dom = StateDomain::Box { lower, upper };
            dom.validate(d).map_err(|e| schema(path, e.to_string()))?;
            Ok(dom)
        }
        "orthant" => {
            let (signs, signs_path) = node.require("signs")?;
            let items = as_array(signs, &signs_path)?;
            if items.len() != d {
                return Err(schema(&signs_path, format!("expected {d} entries")));
            }
            let signs = items
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let p = format!("{signs_path}[{k}]");
                    match as_str(s, &p)? {
                        "nonneg" => Ok(OrthantSign::NonNegative),
                        "nonpos" => Ok(OrthantSign::NonPositive),
                        _ => Err(schema(&p, "expected \"nonneg\" or \"nonpos\"")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StateDomain::Orthant { signs })
        }
        other => Err(schema(&kind_path, format!("unknown domain type {other:?}"))),
    }
}

fn parse_region(v: &Value, path: &str, d: usize) -> Result<Region> {
    let node = Node { value: v, path };
    let (id, id_path) = node.require("id")?;
    let id = as_usize(id, &id_path)?;
    let (kind, kind_path) = node.require("kind")?;
    let kind = match as_str(kind, &kind_path)? {
        "origin" => RegionKind::Origin,
        "other" => RegionKind::Other,
        "pattern" => {
            let (free, free_path) = node.require("free_coords")?;
            let free = as_array(free, &free_path)?
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let p = format!("{free_path}[{k}]");
                    match as_usize(c, &p)? {
                        c @ 1.. if c <= d => Ok(c - 1),
                        _ => Err(schema(&p, format!("coordinate must lie in 1..{d}"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let (signs, signs_path) = node.require("signs")?;
            let signs = as_array(signs, &signs_path)?
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let p = format!("{signs_path}[{k}]");
                    parse_sign(as_str(s, &p)?)
                        .ok_or_else(|| schema(&p, "expected \"pos\", \"neg\" or \"any\""))
                })
                .collect::<Result<Vec<_>>>()?;
            if signs.len() != free.len() {
                return Err(schema(&signs_path, "needs one sign per free coordinate"));
            }
            RegionKind::Pattern { free, signs }
        }
        other => return Err(schema(&kind_path, format!("unknown region kind {other:?}"))),
    };
    Ok(Region { id, kind })
}

fn parse_abstraction(v: &Value, path: &str, d: usize) -> Result<AbstractionChoice> {
    match v {
        Value::String(s) if s == "support" => Ok(AbstractionChoice::Support),
        Value::String(s) if s == "lattice" => Ok(AbstractionChoice::Lattice),
        Value::Object(_) => {
            let (regions, rpath) = Node { value: v, path }.require("regions")?;
            let regions = as_array(regions, &rpath)?
                .iter()
                .enumerate()
                .map(|(k, r)| parse_region(r, &format!("{rpath}[{k}]"), d))
                .collect::<Result<Vec<_>>>()?;
            Ok(AbstractionChoice::Explicit(regions))
        }
        _ => Err(schema(path, "expected \"support\", \"lattice\" or {\"regions\": [...]}")),
    }
}

pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let node = Node {
        value: &root,
        path: "$",
    };
    node.object()?;

    let (version, vpath) = node.require("schema")?;
    if version.as_u64() != Some(SCHEMA_VERSION) {
        return Err(schema(&vpath, format!("unsupported schema version, expected {SCHEMA_VERSION}")));
    }
    let (d, dpath) = node.require("d")?;
    let d = as_usize(d, &dpath)?;
    if d == 0 {
        return Err(schema(&dpath, "dimension must be at least 1"));
    }
    let (n, npath) = node.require("N")?;
    let n = as_usize(n, &npath)?;

    let (subs, spath) = node.require("subsystems")?;
    let subs = as_array(subs, &spath)?;
    if subs.len() != n || n == 0 {
        return Err(schema(&spath, format!("expected N = {n} >= 1 subsystems, found {}", subs.len())));
    }
    let subsystems = subs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let path = format!("{spath}[{k}]");
            let sn = Node { value: s, path: &path };
            let (a, apath) = sn.require("A")?;
            let (b, bpath) = sn.require("b")?;
            let a = f64_array(a, &apath, d * d)?;
            let b = f64_array(b, &bpath, d)?;
            SubsystemDynamics::from_rows(d, &a, &b).map_err(|e| schema(&path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let (pairs, ppath) = node.require("switch_set")?;
    let switch_set = as_array(pairs, &ppath)?
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let path = format!("{ppath}[{k}]");
            let pair = as_array(p, &path)?;
            let [i, j] = pair.as_slice() else {
                return Err(schema(&path, "expected a pair [i, j]"));
            };
            let i = as_usize(i, &format!("{path}[0]"))?;
            let j = as_usize(j, &format!("{path}[1]"))?;
            if !(1..=n).contains(&i) || !(1..=n).contains(&j) {
                return Err(schema(&path, format!("subsystem indices must lie in 1..{n}")));
            }
            Ok((i - 1, j - 1))
        })
        .collect::<Result<Vec<_>>>()?;

    let (cs, cpath) = node.require("control_set")?;
    let cnode = Node { value: cs, path: &cpath };
    let (lo, lopath) = cnode.require("lo")?;
    let (hi, hipath) = cnode.require("hi")?;
    let control_set = ControlSet::new(extended_bound(lo, &lopath)?, extended_bound(hi, &hipath)?)
        .map_err(|e| schema(&cpath, e.to_string()))?;

    let domain = match node.get("domain")? {
        None => StateDomain::All,
        Some((v, p)) => parse_domain(v, &p, d)?,
    };

    let system = SwitchedSystem::new(subsystems, switch_set, control_set, domain)
        .map_err(|e| schema("$", e.to_string()))?;

    let (xi, xpath) = node.require("xi")?;
    let xi = DVector::from_vec(f64_array(xi, &xpath, d)?);
    if !system.domain().contains(&xi, 0.0) {
        return Err(schema(&xpath, "initial state lies outside the state domain"));
    }

    let (t, tpath) = node.require("T")?;
    let horizon = as_usize(t, &tpath)?;
    if horizon == 0 {
        return Err(schema(&tpath, "horizon must be at least 1"));
    }

    let epsilon = match node.get("epsilon")? {
        None => EPS_ZERO,
        Some((v, p)) => {
            let e = as_f64(v, &p)?;
            if e <= 0.0 {
                return Err(schema(&p, "must be positive"));
            }
            e
        }
    };

    let abstraction = match node.get("abstraction")? {
        None => AbstractionChoice::Support,
        Some((v, p)) => parse_abstraction(v, &p, d)?,
    };

    let extra_edges = match node.get("extra_edges")? {
        None => Vec::new(),
        Some((v, p)) => as_array(v, &p)?
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let path = format!("{p}[{k}]");
                let parsed: EdgeJson = serde_json::from_value(e.clone()).map_err(|err| schema(&path, err.to_string()))?;
                if parsed.alpha == 0 || parsed.alpha > n {
                    return Err(schema(&format!("{path}.alpha"), format!("must lie in 1..{n}")));
                }
                parsed.to_edge().map_err(|err| schema(&path, err.to_string()))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let free_nonzero_default = match node.get("free_nonzero_default")? {
        None => None,
        Some((v, p)) => {
            let u = as_f64(v, &p)?;
            if u == 0.0 || !system.control_set().contains(u) {
                return Err(schema(&p, "must be a nonzero admissible control"));
            }
            Some(u)
        }
    };

    let reference_total = match node.get("reference_total")? {
        None => None,
        Some((v, p)) => Some(as_usize(v, &p)?),
    };

    Ok(ProblemConfig {
        system,
        xi,
        horizon,
        epsilon,
        abstraction,
        extra_edges,
        free_nonzero_default,
        reference_total,
    })
}

fn bound_json(v: f64) -> Value {
    if v == f64::NEG_INFINITY {
        json!("-inf")
    } else if v == f64::INFINITY {
        json!("+inf")
    } else {
        json!(v)
    }
}

fn region_json(r: &Region) -> Value {
    serde_json::to_value(crate::graph::RegionJson::from(r)).expect("region serializes")
}

impl ProblemConfig {
    pub fn to_value(&self) -> Value {
        let sys = &self.system;
        let d = sys.dim();
        let subsystems: Vec<Value> = sys
            .subsystems()
            .iter()
            .map(|s| {
                let a: Vec<f64> = (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|rc| s.a[rc]).collect();
                json!({ "A": a, "b": s.b.as_slice() })
            })
            .collect();
        let switch_set: Vec<[usize; 2]> = sys.switch_set().iter().map(|(i, j)| [i + 1, j + 1]).collect();
        let domain = match sys.domain() {
            StateDomain::All => json!({ "type": "reals" }),
            StateDomain::Box { lower, upper } => json!({ "type": "box", "lower": lower, "upper": upper }),
            StateDomain::Orthant { signs } => {
                let s: Vec<&str> = signs
                    .iter()
                    .map(|s| match s {
                        OrthantSign::NonNegative => "nonneg",
                        OrthantSign::NonPositive => "nonpos",
                    })
                    .collect();
                json!({ "type": "orthant", "signs": s })
            }
        };
        let abstraction = match &self.abstraction {
            AbstractionChoice::Support => json!("support"),
            AbstractionChoice::Lattice => json!("lattice"),
            AbstractionChoice::Explicit(regions) => {
                json!({ "regions": regions.iter().map(region_json).collect::<Vec<_>>() })
            }
        };
        let mut root = json!({
            "schema": SCHEMA_VERSION,
            "d": d,
            "N": sys.n_subsystems(),
            "subsystems": subsystems,
            "switch_set": switch_set,
            "control_set": { "lo": bound_json(sys.control_set().lo()), "hi": bound_json(sys.control_set().hi()) },
            "domain": domain,
            "xi": self.xi.as_slice(),
            "T": self.horizon,
            "epsilon": self.epsilon,
            "abstraction": abstraction,
        });
        let obj = root.as_object_mut().expect("object literal");
        if !self.extra_edges.is_empty() {
            let edges: Vec<Value> = self
                .extra_edges
                .iter()
                .map(|e| serde_json::to_value(EdgeJson::from(e)).expect("edge serializes"))
                .collect();
            obj.insert("extra_edges".into(), Value::Array(edges));
        }
        if let Some(u) = self.free_nonzero_default {
            obj.insert("free_nonzero_default".into(), json!(u));
        }
        if let Some(t) = self.reference_total {
            obj.insert("reference_total".into(), json!(t));
        }
        root
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = include_str!("../configs/example1.json");
    const EXAMPLE2: &str = include_str!("../configs/example2.json");

    fn without(text: &str, key: &str) -> String {
        let mut v: Value = serde_json::from_str(text).unwrap();
        v.as_object_mut().unwrap().remove(key);
        v.to_string()
    }

    fn schema_path(r: Result<ProblemConfig>) -> String {
        match r {
            Err(Error::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn bundled_examples_parse() {
        let c = parse_config(EXAMPLE1).unwrap();
        assert_eq!((c.system.dim(), c.system.n_subsystems(), c.horizon), (2, 2, 5));
        assert_eq!((c.system.control_set().lo(), c.system.control_set().hi()), (-10.0, 10.0));
        assert_eq!(c.system, crate::fixtures::example1_system());
        let c2 = parse_config(EXAMPLE2).unwrap();
        assert_eq!(c2.system, crate::fixtures::example2_system());
        assert_eq!(c2.reference_total, Some(2));
    }

    #[test]
    fn missing_horizon_is_reported_at_its_path() {
        assert_eq!(schema_path(parse_config(&without(EXAMPLE1, "T"))), "$.T");
    }

    #[test]
    fn wrong_b_length_is_reported_at_its_path() {
        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["subsystems"][1]["b"] = json!([1.0, 2.0, 3.0]);
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.subsystems[1].b");
    }

    #[test]
    fn other_schema_errors() {
        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["switch_set"][0] = json!([1, 3]);
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.switch_set[0]");

        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["xi"] = json!([0.0, 11.0]);
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.xi");

        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["control_set"]["lo"] = json!("minus infinity");
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.control_set.lo");

        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["T"] = json!(0);
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.T");

        assert!(matches!(parse_config("{ not json"), Err(Error::Parse(_))));
        assert_eq!(schema_path(parse_config("[]")), "$");
    }

    #[test]
    fn explicit_regions_and_edges_parse() {
        let mut v: Value = serde_json::from_str(EXAMPLE1).unwrap();
        v["abstraction"] = json!({ "regions": [
            { "id": 0, "kind": "origin" },
            { "id": 1, "kind": "pattern", "free_coords": [1], "signs": ["any"] },
            { "id": 2, "kind": "pattern", "free_coords": [2], "signs": ["pos"] },
            { "id": 3, "kind": "other" }
        ]});
        v["extra_edges"] = json!([{ "src": 3, "dst": 3, "alpha": 1, "beta": { "kind": "zero" } }]);
        let c = parse_config(&v.to_string()).unwrap();
        assert!(matches!(&c.abstraction, AbstractionChoice::Explicit(r) if r.len() == 4));
        assert_eq!(c.extra_edges, vec![Edge::new(3, 3, 0, crate::graph::Beta::Zero)]);
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);

        v["extra_edges"][0]["alpha"] = json!(3);
        assert_eq!(schema_path(parse_config(&v.to_string())), "$.extra_edges[0].alpha");
    }

    #[test]
    fn emitted_configs_reparse_identically() {
        for text in [EXAMPLE1, EXAMPLE2] {
            let c = parse_config(text).unwrap();
            let again = parse_config(&c.to_json()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_json(), c.to_json());
        }
    }
}
