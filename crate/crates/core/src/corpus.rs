//! Bundled instances.

use crate::instance::{Distribution, InstanceBuilder, LLLInstance};
use crate::rational;

fn no_two_ones(t: &[u32]) -> bool {
    t[0] == 1 && t[1] == 1
}

/// Bits x1, x2; event a forbids 11.
pub fn pair() -> LLLInstance {
    let mut b = InstanceBuilder::new();
    let x1 = b.bit("x1");
    let x2 = b.bit("x2");
    b.event("a", &[x1, x2], vec![vec![1, 1]]).unwrap();
    b.build().unwrap()
}

/// Bits x1..x3; events a:{x1,x2} and b:{x2,x3}, each forbidding 11.
pub fn path3() -> LLLInstance {
    chain(2)
}

/// Bits x1..x(k+1); event e_i forbids 11 on (x_i, x_{i+1}).
pub fn chain(k: usize) -> LLLInstance {
    let mut b = InstanceBuilder::new();
    let xs: Vec<_> = (1..=k + 1).map(|i| b.bit(format!("x{i}"))).collect();
    for i in 0..k {
        let name = if k == 2 { ["a", "b"][i].to_string() } else { format!("e{}", i + 1) };
        b.predicate(name, &[xs[i], xs[i + 1]], no_two_ones).unwrap();
    }
    b.build().unwrap()
}

/// Bits x1..xn around a cycle, no two adjacent ones.
pub fn cycle(n: usize) -> LLLInstance {
    let mut b = InstanceBuilder::new();
    let xs: Vec<_> = (1..=n).map(|i| b.bit(format!("x{i}"))).collect();
    for i in 0..n {
        b.predicate(format!("e{}", i + 1), &[xs[i], xs[(i + 1) % n]], no_two_ones).unwrap();
    }
    b.build().unwrap()
}

/// Two disjoint copies of [`pair`].
pub fn two_pairs() -> LLLInstance {
    let mut b = InstanceBuilder::new();
    let x1 = b.bit("x1");
    let x2 = b.bit("x2");
    let y1 = b.bit("y1");
    let y2 = b.bit("y2");
    b.event("a", &[x1, x2], vec![vec![1, 1]]).unwrap();
    b.event("b", &[y1, y2], vec![vec![1, 1]]).unwrap();
    b.build().unwrap()
}

/// Forced propagation along rings: y0 is the centre, and y_{i-1} = 1 forces y_i = 1.
/// The value 1 has weight 1/8, so the forcing assignments are rare.
pub fn chain_counterexample(k: usize) -> LLLInstance {
    let rare = || Distribution::new(vec![rational::ratio(7, 8), rational::ratio(1, 8)]).unwrap();
    let mut b = InstanceBuilder::new();
    let ys: Vec<_> = (0..=k).map(|i| b.var(format!("y{i}"), rare())).collect();
    b.event("c", &[ys[0]], vec![vec![1]]).unwrap();
    for i in 1..=k {
        b.event(format!("v{i}"), &[ys[i - 1], ys[i]], vec![vec![1, 0]]).unwrap();
    }
    b.build().unwrap()
}

/// Instance whose events never occur.
pub fn trivial(n: usize) -> LLLInstance {
    let mut b = InstanceBuilder::new();
    for i in 0..n {
        let x = b.bit(format!("x{i}"));
        b.event(format!("e{i}"), &[x], vec![]).unwrap();
    }
    b.build().unwrap()
}

/// Named bundled instances.
pub fn by_name(name: &str) -> Option<LLLInstance> {
    if let Some(k) = name.strip_prefix("chain-counterexample-") {
        return k.parse().ok().filter(|k| *k >= 1).map(chain_counterexample);
    }
    if let Some(k) = name.strip_prefix("chain-") {
        return k.parse().ok().filter(|k| *k >= 1).map(chain);
    }
    if let Some(k) = name.strip_prefix("cycle-") {
        return k.parse().ok().filter(|k| *k >= 3).map(cycle);
    }
    match name {
        "pair" => Some(pair()),
        "path3" => Some(path3()),
        "two-pairs" => Some(two_pairs()),
        _ => None,
    }
}

/// The names used by the end-to-end suites.
pub const END_TO_END: [&str; 5] = ["pair", "path3", "cycle-5", "chain-4", "two-pairs"];
