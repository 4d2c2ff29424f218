use gossip_rate::analysis::RateModel;
use gossip_rate::graph::{er_probability_for_mean_degree, generate, Family, Graph, GraphSpec};
use gossip_rate::rng::{derive_seed, rng_from};
use gossip_rate::sim::{
    gossip_interact, init_states, predict_time, run, Mode, NodeState, SimConfig, ValueDistribution, GAMMA_MIN,
};
use gossip_rate::spectral::{expected_weight_matrix, uniform_neighbor_probabilities};
use proptest::prelude::*;
use rand::Rng;

fn states(g: &Graph, values: &[f64]) -> Vec<NodeState> {
    init_states(g, values, &vec![3.0; g.n()]).unwrap()
}

fn er(n: usize, k: f64, seed: u64) -> Graph {
    generate(&GraphSpec::new(
        n,
        Family::ErdosRenyi {
            p: er_probability_for_mean_degree(n, k),
        },
        seed,
    ))
    .unwrap()
}

fn constant_model(gamma: f64) -> RateModel {
    RateModel {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: gamma,
        r2: 1.0,
        corpus_size: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn async_runs_conserve_every_field(n in 10usize..80, seed in any::<u64>()) {
        let g = er(n, 6.0, seed);
        let values = ValueDistribution::Normal { mean: 3.0, std: 2.0 }.sample(n, seed).unwrap();
        let mut st = states(&g, &values);
        let mut cfg = SimConfig::new(Mode::Async, 10.0, seed);
        cfg.sample_interval = 0.5;
        let trace = run(&g, &uniform_neighbor_probabilities(&g).unwrap(), &mut st, &cfg).unwrap();
        for s in &trace.samples {
            for f in 0..4 {
                let target = trace.initial_means[f];
                prop_assert!((s.field_means[f] - target).abs() <= 1e-12 * target.abs().max(1.0));
            }
        }
    }

    #[test]
    fn runs_are_reproducible(n in 10usize..60, seed in any::<u64>(), sync in any::<bool>()) {
        let g = er(n, 6.0, seed);
        let values = ValueDistribution::standard_normal().sample(n, seed).unwrap();
        let mode = if sync { Mode::Sync } else { Mode::Async };
        let mut cfg = SimConfig::new(mode, 8.0, seed);
        cfg.record_nodes = true;
        cfg.model = Some(constant_model(0.1));
        let p = uniform_neighbor_probabilities(&g).unwrap();
        let mut a = states(&g, &values);
        let mut b = states(&g, &values);
        prop_assert_eq!(run(&g, &p, &mut a, &cfg).unwrap(), run(&g, &p, &mut b, &cfg).unwrap());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn synchronous_disagreement_never_grows() {
    for seed in 0..5 {
        let g = er(120, 8.0, seed);
        let values = ValueDistribution::Gamma { shape: 1.0, scale: 1.0 }
            .sample(g.n(), seed)
            .unwrap();
        let mut st = states(&g, &values);
        let mut cfg = SimConfig::new(Mode::Sync, 60.0, seed);
        cfg.sample_interval = 0.1;
        let trace = run(&g, &uniform_neighbor_probabilities(&g).unwrap(), &mut st, &cfg).unwrap();
        for w in trace.samples.windows(2) {
            assert!(w[1].delta_hat <= w[0].delta_hat * (1.0 + 1e-12));
        }
        assert!(trace.final_accuracy() > 1.0);
    }
}

#[test]
fn standard_normal_start_has_unit_spread() {
    let g = er(1000, 10.0, 3);
    let values = ValueDistribution::standard_normal().sample(g.n(), 4).unwrap();
    let mut st = states(&g, &values);
    let trace = run(
        &g,
        &uniform_neighbor_probabilities(&g).unwrap(),
        &mut st,
        &SimConfig::new(Mode::Async, 0.0, 5),
    )
    .unwrap();
    assert_eq!(trace.samples.len(), 1);
    assert!((trace.samples[0].sigma - 1.0).abs() < 0.1);
    assert_eq!(trace.samples[0].delta_hat, 1.0);
}

#[test]
fn time_prediction_examples() {
    let model = constant_model(0.018);
    let mut s = states(&Graph::complete(3), &[1.0, 2.0, 3.0])[0].clone();
    let p = predict_time(&s, &model);
    assert!((p.time - 3.0 / 0.018).abs() < 1e-9);
    assert!((p.time - 166.666_666_666_7).abs() < 1e-6);
    assert!(!p.clamped);
    s.r = 6.0;
    assert!((predict_time(&s, &model).time - 2.0 * p.time).abs() < 1e-9);

    let slow = predict_time(&s, &constant_model(-0.2));
    assert!(slow.clamped);
    assert_eq!(slow.gamma, GAMMA_MIN);
    assert_eq!(slow.time, 6.0 / GAMMA_MIN);
}

#[test]
fn live_predictions_converge_to_the_network_prediction() {
    let g = er(150, 10.0, 8);
    let values = ValueDistribution::standard_normal().sample(g.n(), 9).unwrap();
    let model = RateModel {
        a: 0.01,
        b: -0.3,
        c: 0.2,
        d: 0.05,
        r2: 1.0,
        corpus_size: 0,
    };
    let avg = gossip_rate::metrics::graph_averages(&g);
    let target = 3.0 / model.predict(avg.mean_degree, avg.mean_clustering, avg.mean_efficiency);
    let mut st = states(&g, &values);
    let mut cfg = SimConfig::new(Mode::Async, 200.0, 10);
    cfg.model = Some(model);
    cfg.record_nodes = true;
    let trace = run(&g, &uniform_neighbor_probabilities(&g).unwrap(), &mut st, &cfg).unwrap();
    let last = trace.node_snapshots.unwrap().pop().unwrap();
    for t in last.t_pred {
        assert!((t.unwrap() - target).abs() <= 1e-6 * target);
    }
}

/// Mean of squared per-component z-scores of Monte-Carlo means.
fn mean_square_z(runs: &[Vec<f64>], expected: &[f64]) -> f64 {
    let r = runs.len() as f64;
    let mut acc = 0.0;
    for (c, &e) in expected.iter().enumerate() {
        let mean = runs.iter().map(|x| x[c]).sum::<f64>() / r;
        let var = runs.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / (r - 1.0);
        acc += (mean - e).powi(2) / (var / r);
    }
    acc / expected.len() as f64
}

#[test]
fn interaction_average_follows_expected_matrix() {
    let n = 30;
    let g = er(n, 6.0, 21);
    let values = ValueDistribution::standard_normal().sample(n, 22).unwrap();
    let w = expected_weight_matrix(&uniform_neighbor_probabilities(&g).unwrap());
    let mut expected = values.clone();
    for _ in 0..5 {
        expected = w.matrix().mul_vec(&expected);
    }
    let mut rng = rng_from(derive_seed(23, 0));
    let runs: Vec<Vec<f64>> = (0..4000)
        .map(|_| {
            let mut st = states(&g, &values);
            for _ in 0..5 {
                let i = rng.random_range(0..n);
                let nb = g.neighbors(i);
                gossip_interact(&g, &mut st, i, nb[rng.random_range(0..nb.len())]).unwrap();
            }
            st.iter().map(|s| s.x).collect()
        })
        .collect();
    // Calibrated z-scores have unit mean square; a wrong matrix inflates it.
    let msz = mean_square_z(&runs, &expected);
    assert!((0.4..1.8).contains(&msz), "mean square z {msz}");
}
