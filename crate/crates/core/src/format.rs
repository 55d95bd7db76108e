//! Text formats for instances and networks.
//!
//! Instance files are line oriented; `#` starts a comment.
//!
//! ```text
//! gamma 1/3
//! var x1 2 1/2 1/2
//! var x2 2 1/2 1/2
//! event a vbl x1 x2 forbid 1,1
//! ```
//!
//! Names are the ids and must be unique. A variable line gives the domain size and one
//! positive weight per value. An event lists its variables and forbidden tuples. Network files hold
//! `nodes N` followed by `edge U V` lines, and the same lines may annotate an instance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::instance::{BadEvent, Distribution, LLLInstance, Variable};
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub instance: LLLInstance,
    pub gamma: Option<Rational>,
    pub network: Option<Graph>,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

#[derive(Default)]
struct NetworkLines {
    nodes: Option<(usize, usize)>,
    edges: Vec<(usize, u32, u32)>,
}

impl NetworkLines {
    fn accept(&mut self, line: usize, words: &[&str]) -> Result<bool> {
        match words[0] {
            "nodes" => {
                if self.nodes.is_some() {
                    return Err(err(line, "duplicate `nodes` line"));
                }
                let [_, n] = words else { return Err(err(line, "expected `nodes N`")) };
                let n = n.parse().map_err(|_| err(line, format!("bad node count `{n}`")))?;
                self.nodes = Some((line, n));
                Ok(true)
            }
            "edge" => {
                let [_, u, v] = words else { return Err(err(line, "expected `edge U V`")) };
                let p = |s: &str| s.parse::<u32>().map_err(|_| err(line, format!("bad node `{s}`")));
                self.edges.push((line, p(u)?, p(v)?));
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finish(self) -> Result<Option<Graph>> {
        let Some((_, n)) = self.nodes else {
            return match self.edges.first() {
                Some((line, _, _)) => Err(err(*line, "`edge` before any `nodes` line")),
                None => Ok(None),
            };
        };
        let mut seen = BTreeSet::new();
        for (line, u, v) in &self.edges {
            if *u as usize >= n || *v as usize >= n {
                return Err(err(*line, format!("edge {u} {v} leaves the node range 0..{n}")));
            }
            if u == v {
                return Err(err(*line, format!("self loop at {u}")));
            }
            if !seen.insert((*u.min(v), *u.max(v))) {
                return Err(err(*line, format!("duplicate edge {u} {v}")));
            }
        }
        let edges: Vec<(u32, u32)> = self.edges.iter().map(|(_, u, v)| (*u, *v)).collect();
        Ok(Some(Graph::from_edges(n, &edges)))
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let words: Vec<&str> = l.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    let mut vars: Vec<Variable> = Vec::new();
    let mut var_ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut events: Vec<BadEvent> = Vec::new();
    let mut event_names = BTreeSet::new();
    let mut gamma = None;
    let mut net = NetworkLines::default();
    for (line, words) in lines(text) {
        match words[0] {
            "gamma" => {
                if gamma.is_some() {
                    return Err(err(line, "duplicate `gamma` line"));
                }
                let [_, g] = words[..] else { return Err(err(line, "expected `gamma Q`")) };
                let g = rational::parse(g).map_err(|e| err(line, e.to_string()))?;
                if !g.is_positive() || g > Rational::one() {
                    return Err(err(line, "gamma must lie in (0, 1]"));
                }
                gamma = Some(g);
            }
            "var" => {
                if words.len() < 3 {
                    return Err(err(line, "expected `var NAME K W0 .. W(K-1)`"));
                }
                let name = words[1];
                if !valid_name(name) {
                    return Err(err(line, format!("invalid name `{name}`")));
                }
                if var_ids.contains_key(name) {
                    return Err(err(line, format!("duplicate variable `{name}`")));
                }
                let k: usize = words[2].parse().ok().filter(|k| *k >= 1).ok_or_else(|| err(line, format!("bad domain size `{}`", words[2])))?;
                if words.len() != 3 + k {
                    return Err(err(line, format!("variable `{name}` has domain {k} but {} weights", words.len() - 3)));
                }
                let weights = words[3..]
                    .iter()
                    .map(|w| rational::parse(w).map_err(|e| err(line, e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(i) = weights.iter().position(|w| !w.is_positive()) {
                    return Err(err(line, format!("weight {} of `{name}` is not positive; weights must be strictly positive", words[3 + i])));
                }
                let dist = Distribution::new(weights).map_err(|e| err(line, e.to_string()))?;
                var_ids.insert(name.to_string(), vars.len() as u32);
                vars.push(Variable::new(name, dist));
            }
            "event" => {
                let name = *words.get(1).ok_or_else(|| err(line, "expected `event NAME vbl ... forbid ...`"))?;
                if !valid_name(name) {
                    return Err(err(line, format!("invalid name `{name}`")));
                }
                if !event_names.insert(name.to_string()) {
                    return Err(err(line, format!("duplicate event `{name}`")));
                }
                if words.get(2) != Some(&"vbl") {
                    return Err(err(line, "expected `vbl` after the event name"));
                }
                let f = words.iter().position(|w| *w == "forbid").ok_or_else(|| err(line, "missing `forbid`"))?;
                let mut vbl = Vec::new();
                for w in &words[3..f] {
                    let x = *var_ids.get(*w).ok_or_else(|| err(line, format!("unknown variable `{w}`")))?;
                    if vbl.contains(&x) {
                        return Err(err(line, format!("variable `{w}` repeated in vbl")));
                    }
                    vbl.push(x);
                }
                let dims: Vec<u32> = vbl.iter().map(|x| vars[*x as usize].domain()).collect();
                let mut tuples = Vec::new();
                let mut seen = BTreeSet::new();
                for t in &words[f + 1..] {
                    let tuple: Vec<u32> =
                        t.split(',').map(|v| v.parse().map_err(|_| err(line, format!("bad tuple `{t}`")))).collect::<Result<_>>()?;
                    if tuple.len() != vbl.len() {
                        return Err(err(line, format!("tuple `{t}` has {} values for {} variables", tuple.len(), vbl.len())));
                    }
                    if let Some(i) = (0..tuple.len()).find(|i| tuple[*i] >= dims[*i]) {
                        return Err(err(line, format!("tuple `{t}`: value {} is outside the domain of `{}`", tuple[i], words[3 + i])));
                    }
                    if !seen.insert(tuple.clone()) {
                        return Err(err(line, format!("duplicate tuple `{t}`")));
                    }
                    tuples.push(tuple);
                }
                events.push(BadEvent::new(name, vbl, dims, tuples).map_err(|e| err(line, e.to_string()))?);
            }
            _ => {
                if !net.accept(line, &words)? {
                    return Err(err(line, format!("unknown directive `{}`", words[0])));
                }
            }
        }
    }
    let instance = LLLInstance::new(vars, events).map_err(|e| err(0, e.to_string()))?;
    Ok(InstanceFile { instance, gamma, network: net.finish()? })
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut net = NetworkLines::default();
    for (line, words) in lines(text) {
        if !net.accept(line, &words)? {
            return Err(err(line, format!("unknown directive `{}`", words[0])));
        }
    }
    net.finish()?.ok_or_else(|| err(0, "missing `nodes` line"))
}

fn write_network(out: &mut String, g: &Graph) {
    writeln!(out, "nodes {}", g.capacity()).unwrap();
    for (u, v) in g.edges() {
        writeln!(out, "edge {u} {v}").unwrap();
    }
}

pub fn serialize_graph(g: &Graph) -> String {
    let mut out = String::new();
    write_network(&mut out, g);
    out
}

/// Canonical text. Ids are renumbered densely; names must be valid and unique.
pub fn serialize_instance(file: &InstanceFile) -> Result<String> {
    let inst = &file.instance;
    let mut out = String::new();
    if let Some(g) = &file.gamma {
        writeln!(out, "gamma {}", rational::format(g)).unwrap();
    }
    let mut names = BTreeSet::new();
    for x in inst.var_ids() {
        let v = inst.var(x).unwrap();
        if !valid_name(&v.name) || !names.insert(v.name.clone()) {
            return Err(Error::Argument(format!("variable name `{}` is invalid or repeated", v.name)));
        }
        let weights: Vec<String> = v.dist.weights().iter().map(rational::format).collect();
        writeln!(out, "var {} {} {}", v.name, v.domain(), weights.join(" ")).unwrap();
    }
    let mut enames = BTreeSet::new();
    for (_, e) in inst.events() {
        if !valid_name(e.name()) || !enames.insert(e.name().to_string()) {
            return Err(Error::Argument(format!("event name `{}` is invalid or repeated", e.name())));
        }
        write!(out, "event {} vbl", e.name()).unwrap();
        for x in e.vbl() {
            write!(out, " {}", inst.var(*x).unwrap().name).unwrap();
        }
        out.push_str(" forbid");
        for t in e.forbidden_tuples() {
            let vals: Vec<String> = t.iter().map(u32::to_string).collect();
            write!(out, " {}", vals.join(",")).unwrap();
        }
        out.push('\n');
    }
    if let Some(g) = &file.network {
        write_network(&mut out, g);
    }
    Ok(out)
}
