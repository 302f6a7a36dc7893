use urn_barriers::decomposition::compute_series;
use urn_barriers::distributions::{BarrierSpec, ReinforcementSpec};
use urn_barriers::oracle::{enumerate_exact, exact_mean_z};
use urn_barriers::rng::StreamKey;
use urn_barriers::urn::{simulate_path, UrnModel, UrnRun};

fn model(b: f64, r: f64, lower: f64, upper: f64, spec: ReinforcementSpec) -> UrnModel {
    UrnModel::new(b, r, BarrierSpec::fixed(lower, upper).unwrap(), spec).unwrap()
}

#[test]
fn monte_carlo_matches_exact_enumeration() {
    let cases = [
        model(1.0, 1.0, 0.0, 1.0, ReinforcementSpec::point_mass(1.0).unwrap()),
        model(1.0, 2.0, 0.3, 0.6, ReinforcementSpec::point_mass(1.0).unwrap()),
        model(2.0, 1.0, 0.4, 0.7, ReinforcementSpec::discrete(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap()),
    ];
    let paths = 40_000;
    for (c, m) in cases.iter().enumerate() {
        let barriers = m.barriers.as_fixed().unwrap();
        let exact = enumerate_exact(m.b, m.r, barriers, &m.reinforcement, 6).unwrap();
        assert!((exact.total_probability() - 1.0).abs() < 1e-12);
        let samples: Vec<f64> = (0..paths)
            .map(|i| {
                let mut run = UrnRun::start(m, StreamKey::path_seed(100 + c as u64, i)).unwrap();
                run.run_to(6);
                run.state().z
            })
            .collect();
        let tv = exact.total_variation_to(&samples);
        // E[TV] <= sum_k sqrt(p_k / n) / 2, small for a handful of atoms
        let atoms = exact.z_marginal().len() as f64;
        let bound = 0.5 * (atoms / paths as f64).sqrt() * 3.0;
        assert!(tv < bound, "case {c}: tv = {tv}, bound = {bound}");
        let mc_mean = samples.iter().sum::<f64>() / paths as f64;
        assert!((mc_mean - exact_mean_z(&exact)).abs() < 4.0 * 0.5 / (paths as f64).sqrt());
    }
}

/// E(Delta_{n+1} | F_n) = 0 from a frozen state.
#[test]
fn martingale_increment_has_zero_conditional_mean() {
    let specs = [
        ReinforcementSpec::point_mass(1.0).unwrap(),
        ReinforcementSpec::uniform(0.0, 3.0).unwrap(),
        ReinforcementSpec::discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap(),
    ];
    for (k, spec) in specs.into_iter().enumerate() {
        // L = 0.55 sits just above Z_0: only the black side is open at first
        let m = model(1.0, 1.0, 0.55, 0.7, spec);
        let mut prefix = UrnRun::start(&m, 7 + k as u64).unwrap();
        prefix.run_to(5);
        let state = *prefix.state();
        let n = 200_000;
        let deltas: Vec<f64> = (0..n)
            .map(|j| {
                let mut run = prefix.fork(j);
                let d = run.step();
                let frac = d.amount / (state.total + d.amount);
                let x = if d.x { 1.0 } else { 0.0 };
                let bo = if state.barriers.black_open(state.z) { 1.0 } else { 0.0 };
                let ro = if state.barriers.red_open(state.z) { 1.0 } else { 0.0 };
                frac * (x - state.z) * ((1.0 - state.z) * bo + state.z * ro)
            })
            .collect();
        let mean = deltas.iter().sum::<f64>() / n as f64;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se + 1e-15, "spec {k}: mean {mean}, se {se}");
    }
}

/// With the limit strictly inside (L, U), H_n is eventually zero.
#[test]
fn barrier_drift_is_summable() {
    let m = model(5.0, 5.0, 0.2, 0.8, ReinforcementSpec::point_mass(1.0).unwrap());
    let paths = 200;
    let horizon = 20_000;
    let mut quiet_tail = 0;
    for i in 0..paths {
        let path = simulate_path(&m, StreamKey::path_seed(3, i), horizon).unwrap();
        let s = compute_series(&path).unwrap();
        let sums = s.abs_h_partial_sums();
        let total = *sums.last().unwrap();
        assert!(total.is_finite());
        let half = sums[horizon as usize / 2 - 1];
        if total == half {
            quiet_tail += 1;
        }
        // T stays positive and finite
        assert!(s.t_product.iter().all(|t| *t > 0.0 && t.is_finite()));
    }
    assert!(quiet_tail as f64 >= 0.9 * paths as f64, "quiet tails: {quiet_tail}/{paths}");
}
