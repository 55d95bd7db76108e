use locallll::augmentation::augment;
use locallll::format::{parse_instance, serialize_instance, InstanceFile};
use locallll::pipeline::{sample_lll, PipelineConfig};
use locallll::rational::{self, ratio};
use locallll::sampler::LazyUniform;
use locallll::verify::exact_distribution;
use locallll::{Assignment, Distribution, ExactOracle, Geometry, InstanceBuilder, LLLInstance, Rational, Region};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Shape {
    weights: Vec<Vec<u32>>,
    events: Vec<(Vec<usize>, Vec<bool>)>,
}

fn shape() -> impl Strategy<Value = Shape> {
    let vars = prop::collection::vec(prop::collection::vec(1u32..5, 2..=3), 2..=5);
    vars.prop_flat_map(|weights| {
        let n = weights.len();
        let event = prop::collection::btree_set(0..n, 1..=2).prop_flat_map(move |vs| {
            let vs: Vec<usize> = vs.into_iter().collect();
            let size = 9;
            (Just(vs), prop::collection::vec(prop::bool::weighted(0.3), size))
        });
        (Just(weights), prop::collection::vec(event, 1..=4))
    })
    .prop_map(|(weights, events)| Shape { weights, events })
}

fn build(s: &Shape) -> LLLInstance {
    let mut b = InstanceBuilder::new();
    let ids: Vec<u32> = s
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let total: u32 = w.iter().sum();
            let d = Distribution::new(w.iter().map(|x| ratio(*x as i64, total as i64)).collect()).unwrap();
            b.var(format!("x{i}"), d)
        })
        .collect();
    for (k, (vs, mask)) in s.events.iter().enumerate() {
        let vbl: Vec<u32> = vs.iter().map(|v| ids[*v]).collect();
        let dims: Vec<u32> = vs.iter().map(|v| s.weights[*v].len() as u32).collect();
        let total: usize = dims.iter().map(|d| *d as usize).product();
        let tuples: Vec<Vec<u32>> =
            (0..total).filter(|i| mask[*i]).map(|i| locallll::oracle::decode(&dims, i)).collect();
        b.event(format!("e{k}"), &vbl, tuples).unwrap();
    }
    b.build().unwrap()
}

/// ν(Ω) by walking every full assignment.
fn brute_satisfiability(inst: &LLLInstance) -> Rational {
    let dims: Vec<u32> = inst.var_ids().map(|x| inst.domain(x)).collect();
    let total: usize = dims.iter().map(|d| *d as usize).product();
    let mut sum = Rational::zero();
    for i in 0..total {
        let vals = locallll::oracle::decode(&dims, i);
        let y = Assignment::full(vals.clone());
        if inst.violated(&y).unwrap().is_empty() {
            let mut w = Rational::one();
            for (x, v) in inst.var_ids().zip(&vals) {
                w *= inst.var(x).unwrap().dist.weight(*v).clone();
            }
            sum += w;
        }
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rational_text_round_trips(n in -10_000i64..10_000, d in 1i64..10_000) {
        let q = ratio(n, d);
        prop_assert_eq!(rational::parse(&rational::format(&q)).unwrap(), q);
    }

    #[test]
    fn satisfiability_matches_brute_force(s in shape()) {
        let inst = build(&s);
        let o = ExactOracle::default();
        prop_assert_eq!(o.satisfiability(&inst).unwrap(), brute_satisfiability(&inst));
    }

    #[test]
    fn exact_table_is_a_distribution_over_satisfying_assignments(s in shape()) {
        let inst = build(&s);
        let o = ExactOracle::default();
        prop_assume!(!o.satisfiability(&inst).unwrap().is_zero());
        let t = exact_distribution(&o, &inst).unwrap();
        let total: Rational = t.probs.iter().sum();
        prop_assert!(total.is_one());
        for v in &t.outcomes {
            prop_assert!(inst.violated(&Assignment::full(v.clone())).unwrap().is_empty());
        }
        // a one-variable marginal equals the column sum of the full table
        let m = o.marginal(&inst, &Assignment::new(), &[0]).unwrap();
        for (vals, p) in m.entries() {
            let col: Rational = t.outcomes.iter().zip(&t.probs).filter(|(o, _)| o[0] == vals[0]).map(|(_, p)| p.clone()).sum();
            prop_assert_eq!(p.clone(), col);
        }
    }

    #[test]
    fn correlation_is_monotone_in_eps(s in shape()) {
        let inst = build(&s);
        prop_assume!(inst.num_vars() >= 3);
        let o = ExactOracle::default();
        let n = inst.num_vars() as u32;
        let (a, b) = (vec![0], vec![n - 1]);
        let small = o.is_eps_correlated(&inst, &a, &b, &ratio(1, 4)).unwrap();
        let large = o.is_eps_correlated(&inst, &a, &b, &ratio(4, 1)).unwrap();
        prop_assert!(!small || large);
    }

    #[test]
    fn instance_text_is_a_fixpoint(s in shape(), g in prop::option::of(1i64..8)) {
        let file = InstanceFile { instance: build(&s), gamma: g.map(|g| ratio(1, g)), network: None };
        let text = serialize_instance(&file).unwrap();
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(serialize_instance(&back).unwrap(), text);
    }

    #[test]
    fn augmenting_events_are_rare(s in shape(), ell in 1u64..3, k in 1i64..4) {
        let inst = build(&s);
        let o = ExactOracle::default();
        let gamma = o.satisfiability(&inst).unwrap();
        prop_assume!(!gamma.is_zero());
        let delta = &gamma / rational::int(4);
        let eps = ratio(1, 1 << k);
        let a = augment(&o, &inst, &Region::from([0]), &eps, &gamma, &delta, ell, &ratio(1, 8)).unwrap();
        prop_assert!(a.rarity(&o, &inst).unwrap() <= delta);
    }

    #[test]
    fn rings_partition_the_reachable_variables(s in shape()) {
        let inst = build(&s);
        let geo = Geometry::new(&inst, &Region::from([0])).unwrap();
        let reachable = geo.ring(0, Some(geo.max_layer()));
        prop_assert!(geo.ring(0, None).iter().all(|x| reachable.contains(x) || geo.layer(*x).is_none()));
        let mut seen = 0;
        for r in 0..=geo.max_layer() {
            let ring = geo.ring_at(r);
            prop_assert!(ring.iter().all(|x| geo.layer(*x) == Some(r)));
            seen += ring.len();
        }
        prop_assert_eq!(seen, reachable.len());
    }

    #[test]
    fn lazy_comparison_agrees_with_its_interval(num in 0i64..=64, seed in any::<u64>()) {
        let t = ratio(num, 64);
        let mut u = LazyUniform::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let below = u.below(&t, &mut rng);
        let (lo, hi) = u.interval();
        if below { prop_assert!(hi <= t) } else { prop_assert!(lo >= t) }
    }

    #[test]
    fn pipeline_outputs_satisfy_and_repeat(s in shape(), seed in any::<u64>()) {
        let inst = build(&s);
        let o = ExactOracle::default();
        prop_assume!(!o.satisfiability(&inst).unwrap().is_zero());
        let cfg = PipelineConfig::default();
        let (y, _) = sample_lll(&inst, seed, &cfg).unwrap();
        prop_assert!(inst.violated(&y).unwrap().is_empty());
        let (z, _) = sample_lll(&inst, seed, &cfg).unwrap();
        prop_assert_eq!(y, z);
    }
}
