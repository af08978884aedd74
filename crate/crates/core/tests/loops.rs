use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randloop::graph::Graph;
use randloop::loopconfig::{
    classify_event, sample_poisson, trace_loops, EventClass, Kind, LoopConfig, ModelParams, Transition,
};

fn graphs() -> Vec<Arc<Graph>> {
    vec![
        Arc::new(Graph::from_edges(2, &[(0, 1)]).unwrap()),
        Arc::new(Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()),
        Arc::new(Graph::periodic_cubic(2, 2).unwrap()),
        Arc::new(Graph::periodic_cubic(3, 2).unwrap()),
        Arc::new(Graph::periodic_cubic(4, 1).unwrap()),
    ]
}

/// Random insertions and removals, each checked against a fresh trace.
fn fuzz(graph: Arc<Graph>, u: f64, beta: f64, moves: usize, seed: u64) {
    let params = ModelParams::new(beta, u, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = LoopConfig::new(params, graph.clone()).unwrap();
    let mut ls = trace_loops(&cfg);
    for step in 0..moves {
        let before = ls.loop_count() as i32;
        let grow = cfg.total_count() == 0 || rng.random_bool(0.55);
        let delta = if grow {
            let kind = if rng.random_bool(u) { Kind::Cross } else { Kind::DoubleBar };
            let tr = Transition {
                edge: rng.random_range(0..graph.edge_count()),
                time: rng.random::<f64>() * beta,
                kind,
            };
            let predicted = match ls.delta_insert(&cfg, &tr) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let (_, delta) = ls.insert(&mut cfg, tr).unwrap();
            assert_eq!(predicted, delta);
            delta
        } else {
            let kind = if cfg.count(Kind::Cross) > 0 && (cfg.count(Kind::DoubleBar) == 0 || rng.random_bool(0.5)) {
                Kind::Cross
            } else {
                Kind::DoubleBar
            };
            let id = cfg.nth_of_kind(kind, rng.random_range(0..cfg.count(kind))).unwrap();
            let predicted = ls.delta_remove(&cfg, id).unwrap();
            let (_, delta) = ls.remove(&mut cfg, id).unwrap();
            assert_eq!(predicted, delta);
            delta
        };
        let fresh = trace_loops(&cfg);
        assert_eq!(fresh.loop_count() as i32 - before, delta, "step {step}");
        assert_eq!(ls.check(&cfg), Ok(()), "step {step}");
        assert_eq!(ls.canonical_form(&cfg), fresh.canonical_form(&cfg), "step {step}");
        let total: f64 = ls.lengths(&cfg).iter().sum();
        let expect = beta * graph.vertex_count() as f64;
        assert!((total - expect).abs() <= 1e-9 * expect, "step {step}: {total} vs {expect}");
        assert!(ls.loop_count() <= graph.vertex_count() + cfg.total_count());
    }
}

#[test]
fn incremental_repair_matches_retrace() {
    for (i, g) in graphs().into_iter().enumerate() {
        for (j, u) in [1.0, 0.5, 0.0, 0.3].into_iter().enumerate() {
            fuzz(g.clone(), u, 1.5, 2_500, (i * 10 + j) as u64);
        }
    }
}

#[test]
fn single_transition_removal_restores_columns() {
    let g = Arc::new(Graph::from_edges(2, &[(0, 1)]).unwrap());
    let mut cfg = LoopConfig::new(ModelParams::new(1.0, 1.0, 2.0).unwrap(), g).unwrap();
    let mut ls = trace_loops(&cfg);
    let (id, d) = ls.insert(&mut cfg, Transition { edge: 0, time: 0.5, kind: Kind::Cross }).unwrap();
    assert_eq!(d, -1);
    let (_, d) = ls.remove(&mut cfg, id).unwrap();
    assert_eq!(d, 1);
    assert_eq!(ls.loop_count(), 2);
    assert_eq!(ls.lengths(&cfg).iter().filter(|&&l| l == 1.0).count(), 2);
}

fn params_strategy() -> impl Strategy<Value = (f64, f64, u64, usize)> {
    (0.1f64..4.0, prop_oneof![Just(0.0), Just(1.0), 0.0f64..1.0], any::<u64>(), 0usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_configurations_satisfy_invariants((beta, u, seed, gi) in params_strategy()) {
        let g = graphs()[gi].clone();
        let p = ModelParams::new(beta, u, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_poisson(&p, g.clone(), &mut rng).unwrap();
        let ls = trace_loops(&cfg);
        let total: f64 = ls.lengths(&cfg).iter().sum();
        let expect = beta * g.vertex_count() as f64;
        prop_assert!((total - expect).abs() <= 1e-9 * expect);
        prop_assert!(ls.loop_count() <= g.vertex_count() + cfg.total_count());
        prop_assert_eq!(ls.check(&cfg), Ok(()));
        prop_assert_eq!(ls.canonical_form(&cfg), trace_loops(&cfg).canonical_form(&cfg));

        let coloring = g.bipartition();
        for x in 0..g.vertex_count() {
            for y in 0..g.vertex_count() {
                let t = rng.random::<f64>() * beta;
                let Ok(ev) = classify_event(&cfg, &ls, x, y, t) else { continue };
                if u == 1.0 {
                    prop_assert_ne!(ev, EventClass::Minus);
                }
                if u == 0.0 {
                    if let Some(c) = &coloring {
                        let same: bool = c[x] == c[y];
                        let forbidden = if same { EventClass::Minus } else { EventClass::Plus };
                        prop_assert_ne!(ev, forbidden, "x={} y={}", x, y);
                    }
                }
            }
        }
    }

    #[test]
    fn classification_ignores_orientation((beta, u, seed, gi) in params_strategy()) {
        let g = graphs()[gi].clone();
        let p = ModelParams::new(beta, u, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_poisson(&p, g.clone(), &mut rng).unwrap();
        let traced = trace_loops(&cfg);
        // Rebuild the same loops by inserting transitions one at a time; the
        // resulting ids and orientations differ from the fresh trace.
        let mut built = LoopConfig::new(p, g.clone()).unwrap();
        let mut ls = trace_loops(&built);
        let mut trs: Vec<Transition> = cfg.transitions().map(|(_, t)| *t).collect();
        trs.reverse();
        for tr in trs {
            ls.insert(&mut built, tr).unwrap();
        }
        for x in 0..g.vertex_count() {
            for y in 0..g.vertex_count() {
                let t = rng.random::<f64>() * beta;
                let a = classify_event(&cfg, &traced, x, y, t);
                let b = classify_event(&built, &ls, x, y, t);
                if let (Ok(a), Ok(b)) = (a, b) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
