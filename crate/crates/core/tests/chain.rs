use std::f64::consts::PI;
use std::sync::Arc;

use randloop::graph::Graph;
use randloop::loopconfig::{trace_loops, Kind, LoopConfig, ModelParams, Transition};
use randloop::mcmc::{run_chain, ChainState, RunPlan, Snapshot};
use randloop::observables::{Accumulator, LoopObserver, MeasureSettings, Obs, Series};

fn edge() -> Arc<Graph> {
    Arc::new(Graph::from_edges(2, &[(0, 1)]).unwrap())
}

/// Number of loops for `crosses` crosses and `bars` double bars on a single
/// edge, read off a traced configuration.
fn loops_on_edge(params: ModelParams, crosses: usize, bars: usize) -> usize {
    let mut trs = Vec::new();
    let mut t = 0.1;
    for kind in std::iter::repeat_n(Kind::Cross, crosses).chain(std::iter::repeat_n(Kind::DoubleBar, bars)) {
        trs.push(Transition { edge: 0, time: t * params.beta, kind });
        t += 0.3;
    }
    let cfg = LoopConfig::from_transitions(params, edge(), &trs).unwrap();
    trace_loops(&cfg).loop_count()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// With at most two transitions the target law on `(#crosses, #bars)` is
/// `μ_c^a/a! μ_b^b/b! θ^{|L|}` up to normalization.
#[test]
fn capped_chain_matches_stratum_weights() {
    for (u, theta) in [(0.5, 2.0), (0.3, 0.5), (0.7, 3.0)] {
        let params = ModelParams::new(1.3, u, theta).unwrap();
        let strata: Vec<(usize, usize)> = vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        let mc = u * params.beta;
        let mb = (1.0 - u) * params.beta;
        let weights: Vec<f64> = strata
            .iter()
            .map(|&(a, b)| {
                mc.powi(a as i32) / factorial(a) * mb.powi(b as i32) / factorial(b)
                    * theta.powi(loops_on_edge(params, a, b) as i32)
            })
            .collect();
        let total: f64 = weights.iter().sum();

        let mut st = ChainState::new(params, edge(), 17).unwrap();
        st.set_max_transitions(Some(2));
        st.run_steps(1_000).unwrap();
        let samples = 400_000u64;
        let mut series: Vec<Series> = strata.iter().map(|_| Series::new(Accumulator::batch_size_for(samples))).collect();
        for _ in 0..samples {
            st.run_steps(3).unwrap();
            let key = (st.config().count(Kind::Cross), st.config().count(Kind::DoubleBar));
            for (k, s) in strata.iter().zip(series.iter_mut()) {
                s.push(f64::from(u8::from(*k == key)));
            }
        }
        for ((k, w), s) in strata.iter().zip(&weights).zip(&series) {
            let e = s.estimate();
            let expect = w / total;
            assert!(e.z_score(expect) <= 3.0, "u={u} θ={theta} stratum {k:?}: {} ± {} vs {expect}", e.mean, e.stderr);
        }
    }
}

#[test]
fn unit_fugacity_gives_poisson_counts() {
    let g = Arc::new(Graph::periodic_cubic(4, 1).unwrap());
    let params = ModelParams::new(2.0, 0.3, 1.0).unwrap();
    let lambda = params.beta * g.edge_count() as f64;
    let plan = RunPlan::new(200, 60_000, 5);
    let batch = Accumulator::batch_size_for(plan.observations());
    let (mut mean, mut var, mut crosses) = (Series::new(batch), Series::new(batch), Series::new(batch));
    let mut obs = |s: &Snapshot<'_>| {
        let n = s.state.config().total_count() as f64;
        mean.push(n);
        var.push((n - lambda).powi(2));
        crosses.push(s.state.config().count(Kind::Cross) as f64);
        Ok(())
    };
    run_chain(params, g, plan, 0, &mut obs).unwrap();
    let (m, v, c) = (mean.estimate(), var.estimate(), crosses.estimate());
    assert!(m.z_score(lambda) <= 3.0, "mean {m:?}");
    assert!(v.z_score(lambda) <= 3.0, "variance {v:?}");
    assert!(c.z_score(0.3 * lambda) <= 3.0, "crosses {c:?}");
}

fn torus_observer(side: usize, beta: f64, u: f64, sweeps: u64, seed: u64) -> LoopObserver {
    let g = Arc::new(Graph::periodic_cubic(side, 2).unwrap());
    let params = ModelParams::new(beta, u, 2.0).unwrap();
    let plan = RunPlan::new(500, sweeps, seed);
    let settings = MeasureSettings { time_points: 6, ..MeasureSettings::default() };
    let mut obs =
        LoopObserver::new(g.clone(), beta, settings, Accumulator::batch_size_for(plan.observations()), seed).unwrap();
    run_chain(params, g, plan, 0, &mut obs).unwrap();
    obs
}

#[test]
fn kappa_is_symmetric_under_reflection_and_time_reversal() {
    let obs = torus_observer(3, 1.5, 0.6, 40_000, 21);
    let g = obs.graph().clone();
    let table = obs.table();
    let n = obs.times().len();
    for x in 0..g.vertex_count() {
        let mx = g.negate(x).unwrap();
        for j in 0..n {
            let a = table.get(x, j).unwrap();
            let b = table.get(mx, (n - j) % n).unwrap();
            for (p, q) in [(a.kappa, b.kappa), (a.plus, b.plus), (a.minus, b.minus)] {
                let se = p.stderr.hypot(q.stderr);
                assert!((p.mean - q.mean).abs() <= 3.0 * se + 1e-12, "x={x} j={j}: {p:?} vs {q:?}");
            }
        }
    }
    assert_eq!(table.get(0, 0).unwrap().kappa.mean, 1.0);
    assert_eq!(table.get(0, 0).unwrap().minus.mean, 0.0);
}

#[test]
fn fourier_transform_is_real() {
    let obs = torus_observer(4, 1.0, 0.4, 20_000, 22);
    let table = obs.table();
    for m1 in 0..4 {
        for m2 in 0..4 {
            let k = [2.0 * PI * m1 as f64 / 4.0, 2.0 * PI * m2 as f64 / 4.0];
            let v = table.fourier_kappa(&k).unwrap();
            assert!(v >= -1e-9, "k={k:?}: {v}");
        }
    }
    assert!(table.fourier(&[0.3, 0.0]).is_err());
}

#[test]
fn kappa_tilde_matches_mean_loop_length() {
    let obs = torus_observer(3, 2.0, 0.5, 30_000, 23);
    let tilde = obs.estimate(Obs::KappaTilde).unwrap();
    let sum = obs.estimate(Obs::LoopLengthSum).unwrap().scale(1.0 / 9.0);
    let se = tilde.stderr.hypot(sum.stderr);
    assert!((tilde.mean - sum.mean).abs() <= 3.0 * se, "{tilde:?} vs {sum:?}");
    // Both lie between one strand-free column and the full mass.
    assert!(tilde.mean > 0.0 && tilde.mean <= 2.0 * 9.0);
}

#[test]
fn extreme_u_event_exclusions_hold_on_every_sample() {
    // u = 1: crosses only, so no loop ever reverses direction.
    let g = Arc::new(Graph::periodic_cubic(4, 2).unwrap());
    let obs = |u: f64, seed: u64| {
        let params = ModelParams::new(1.5, u, 2.0).unwrap();
        let plan = RunPlan::new(50, 2_000, seed);
        let mut o = LoopObserver::new(g.clone(), 1.5, MeasureSettings::default(), 20, seed).unwrap();
        run_chain(params, g.clone(), plan, 0, &mut o).unwrap();
        o
    };
    let ferro = obs(1.0, 31).table();
    assert!(ferro.entries.iter().all(|e| e.minus.mean == 0.0 && e.minus.stderr == 0.0));
    // u = 0 on a bipartite graph: equal directions only within a sublattice.
    let anti = obs(0.0, 32).table();
    let sub = g.bipartition().unwrap();
    for e in &anti.entries {
        if sub[e.x] == sub[0] {
            assert_eq!(e.minus.mean, 0.0, "x={}", e.x);
        } else {
            assert_eq!(e.plus.mean, 0.0, "x={}", e.x);
        }
    }
}
