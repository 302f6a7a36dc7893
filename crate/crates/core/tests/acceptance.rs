//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Every tolerance, size and seed is fixed below and was chosen before the
//! run. `cargo test -p urn-barriers --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use urn_barriers::decomposition::{compute_series, verify_identity};
use urn_barriers::distributions::{BarrierSpec, ReinforcementSpec};
use urn_barriers::experiments::{
    barrier_strictness_suite, conditional_clt_suite, conjecture_suite, convergence_suite,
    nonatomicity_suite, polya_limit_suite, sn_ratio_suite, ExperimentConfig, SuiteOutcome,
};
use urn_barriers::oracle::enumerate_exact;
use urn_barriers::rng::StreamKey;
use urn_barriers::stats::{ks_pvalue, standard_normal_cdf};
use urn_barriers::urn::{simulate_path, UrnModel, UrnRun};

const SEED: u64 = 20261014;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn fixed(lower: f64, upper: f64) -> BarrierSpec {
    BarrierSpec::fixed(lower, upper).unwrap()
}

fn pm(v: f64) -> ReinforcementSpec {
    ReinforcementSpec::point_mass(v).unwrap()
}

fn zero_two() -> ReinforcementSpec {
    ReinforcementSpec::discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap()
}

fn config(model: UrnModel, horizon: u64, paths: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(model, horizon, SEED);
    c.paths = paths;
    c
}

fn report_value(o: &SuiteOutcome, name: &str) -> (f64, Option<bool>) {
    let r = o.report(name).unwrap_or_else(|| panic!("missing report {name}"));
    (r.statistic, r.pass)
}

fn random_model(rng: &mut StdRng) -> UrnModel {
    let b = rng.random_range(0.2..20.0);
    let r = rng.random_range(0.2..20.0);
    let spec = match rng.random_range(0..4) {
        0 => pm(rng.random_range(0.1..5.0)),
        1 => ReinforcementSpec::uniform(0.0, rng.random_range(0.5..4.0)).unwrap(),
        2 => ReinforcementSpec::discrete(vec![0.0, rng.random_range(0.5..3.0), 4.0], vec![0.2, 0.5, 0.3]).unwrap(),
        _ => ReinforcementSpec::scaled_beta(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.5..5.0)).unwrap(),
    };
    let barriers = match rng.random_range(0..3) {
        0 => BarrierSpec::IndependentUniformPair,
        1 => fixed(0.0, rng.random_range(0.3..1.0)),
        _ => {
            let l = rng.random_range(0.0..0.5);
            fixed(l, rng.random_range(l + 0.05..1.0))
        }
    };
    UrnModel::new(b, r, barriers, spec).unwrap()
}

/// Exact identity `Z_n = T_n (Z_1 + sum Delta / T)` on random configs.
fn c1_identity() -> Line {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut all_pass = true;
    for c in 0..100u64 {
        let model = random_model(&mut rng);
        for s in 0..10u64 {
            let path = simulate_path(&model, StreamKey::path_seed(SEED ^ c, s), 10_000).unwrap();
            let series = compute_series(&path).unwrap();
            let rep = verify_identity(&path, &series, 1e-12);
            worst = worst.max(rep.max_rel_residual);
            all_pass &= rep.pass;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "C1 decomposition identity",
        all_pass && worst <= 1e-12 && secs < 30.0,
        format!("1000 paths x 1e4 steps, max rel residual {worst:.2e} <= 1e-12, {secs:.1}s < 30s"),
    )
}

/// Simulated law of `Z_h` against exhaustive enumeration.
fn c2_oracle() -> Line {
    let cases = [
        (UrnModel::new(1.0, 1.0, BarrierSpec::none(), pm(1.0)).unwrap(), 10usize),
        (UrnModel::new(1.0, 1.0, fixed(0.3, 0.7), pm(1.0)).unwrap(), 10),
        (UrnModel::new(1.0, 1.0, fixed(0.5, 1.0), pm(1.0)).unwrap(), 10),
        (UrnModel::new(2.0, 1.0, fixed(0.4, 0.8), pm(2.0)).unwrap(), 8),
        (
            UrnModel::new(
                1.0,
                2.0,
                fixed(0.25, 0.75),
                ReinforcementSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap(),
            )
            .unwrap(),
            4,
        ),
    ];
    let paths = 100_000u64;
    let mut worst: f64 = 0.0;
    let mut atoms = Vec::new();
    for (i, (m, h)) in cases.iter().enumerate() {
        let exact = enumerate_exact(m.b, m.r, m.barriers.as_fixed().unwrap(), &m.reinforcement, *h).unwrap();
        let samples: Vec<f64> = (0..paths)
            .map(|p| {
                let mut run = UrnRun::start(m, StreamKey::path_seed(SEED + i as u64, p)).unwrap();
                run.run_to(*h as u64);
                run.state().z
            })
            .collect();
        worst = worst.max(exact.total_variation_to(&samples));
        atoms.push(exact.z_marginal().len());
    }
    line(
        "C2 oracle equivalence",
        worst < 0.01,
        format!("5 configs, 1e5 paths, atoms {atoms:?}, max TV {worst:.4} < 0.01"),
    )
}

fn c3_polya() -> Line {
    let model = UrnModel::new(1.0, 1.0, BarrierSpec::none(), pm(1.0)).unwrap();
    let o = polya_limit_suite(&config(model, 2000, 10_000)).unwrap();
    let r = o.report("limit_law_ks").unwrap();
    line(
        "C3 classical limit law",
        r.pass == Some(true),
        format!("KS vs Beta(1,1), 1e4 paths, N=2000, D={:.4}, p={:.3} > 0.01", r.statistic, r.p_value.unwrap()),
    )
}

fn c4_convergence() -> Line {
    let model = UrnModel::new(1.0, 1.0, fixed(0.2, 0.8), pm(1.0)).unwrap();
    let o = convergence_suite(&config(model, 100_000, 2000)).unwrap();
    let (cauchy, _) = report_value(&o, "cauchy_fraction");
    let (range, _) = report_value(&o, "range_fraction");
    line(
        "C4 almost-sure convergence",
        o.passed(),
        format!(
            "b=r=1, (0.2,0.8), 2000 paths, N=1e5: Cauchy fraction {cauchy:.4} <= 0.01, out-of-range fraction {range:.4} <= 0"
        ),
    )
}

/// Criteria 5 and 6 share the same continuation runs.
fn c5_c6_clt() -> (Line, Line) {
    let mut pass_ok = true;
    let mut control_ok = true;
    let mut pass_detail = Vec::new();
    let mut control_detail = Vec::new();
    for (label, spec) in [("B=1", pm(1.0)), ("B~{0,2}", zero_two())] {
        let model = UrnModel::new(10.0, 10.0, fixed(0.2, 0.8), spec).unwrap();
        let mut c = config(model, 50_000, 50);
        c.prefix_n = 500;
        c.continuations = 2000;
        let o = conditional_clt_suite(&c).unwrap().outcome;
        let main = o.report("prefix_pass_count").unwrap();
        let ctl = o.report("wrong_variance_reject_count").unwrap();
        pass_ok &= main.pass == Some(true);
        control_ok &= ctl.pass == Some(true);
        pass_detail.push(format!(
            "{label}: {}/50 (variance ratio {:.3})",
            main.statistic, main.details["mean_variance_ratio"]
        ));
        control_detail.push(format!("{label}: {}/50", ctl.statistic));
    }
    (
        line(
            "C5 conditional CLT",
            pass_ok,
            format!("b=r=10, n=500, N=5e4, 2000 continuations, KS p > 0.05 in >= 40/50: {}", pass_detail.join(", ")),
        ),
        line(
            "C6 wrong-variance control",
            control_ok,
            format!("variance x2, p < 0.001 in >= 45/50: {}", control_detail.join(", ")),
        ),
    )
}

fn c7_barrier() -> Line {
    let model = UrnModel::new(10.0, 10.0, fixed(0.2, 0.8), pm(1.0)).unwrap();
    let o = barrier_strictness_suite(&config(model, 10_000, 2000)).unwrap();
    let (frac, _) = report_value(&o, "near_barrier_fraction");
    let (change, _) = report_value(&o, "near_barrier_change");
    line(
        "C7 limit avoids the barriers",
        o.passed(),
        format!("b=r=10, 2000 paths, N=1e4 vs 4e4, delta 0.01: fraction {frac:.4} < 0.02, change {change:+.4} <= 0"),
    )
}

fn c8_atoms() -> (Line, Line) {
    let model = UrnModel::new(10.0, 10.0, fixed(0.2, 0.8), pm(1.0)).unwrap();
    let o = nonatomicity_suite(&config(model, 100_000, 10_000)).unwrap();
    let (mass, _) = report_value(&o, "max_atom_mass");
    let (shrink, _) = report_value(&o, "atom_mass_refinement");
    let main = line(
        "C8 no atoms in the limit",
        o.passed(),
        format!("b=r=10, 1e4 paths, N=1e5: max mass in 0.01 bins {mass:.4} < 0.05, fine minus coarse {shrink:+.4} < 0"),
    );
    let degenerate = UrnModel::new(10.0, 10.0, fixed(0.2, 0.8), pm(0.0)).unwrap();
    let o = nonatomicity_suite(&config(degenerate, 1000, 1000)).unwrap();
    let (mass, pass) = report_value(&o, "max_atom_mass");
    let control = line(
        "C8 control B=0 is flagged",
        mass == 1.0 && pass == Some(false),
        format!("m=0: max atom mass {mass} = 1, gate reports FAIL"),
    );
    (main, control)
}

fn c9_sn() -> Line {
    let mut ok = true;
    let mut det = Vec::new();
    for (label, spec) in [("B=1", pm(1.0)), ("B~{0,2}", zero_two())] {
        let model = UrnModel::new(1.0, 1.0, fixed(0.2, 0.8), spec).unwrap();
        let o = sn_ratio_suite(&config(model, 100_000, 200)).unwrap();
        let (f, _) = report_value(&o, "sn_over_n_close_fraction");
        ok &= o.passed();
        det.push(format!("{label}: {f:.3}"));
    }
    line(
        "C9 S_n/n -> m",
        ok,
        format!("200 paths, N=1e5, |S_N/N - 1| < 0.02 in >= 99%: {}", det.join(", ")),
    )
}

fn c10_drift() -> Line {
    let mut ok = true;
    let mut det = Vec::new();
    for (black, red, expect) in [(1.0, 2.0, "concentration_at_lower"), (2.0, 1.0, "concentration_at_upper")] {
        let model = UrnModel::new(1.0, 1.0, fixed(0.2, 0.8), pm(black))
            .unwrap()
            .with_red_reinforcement(pm(red));
        let outcomes = conjecture_suite(&config(model, 100_000, 1000)).unwrap();
        let (f, pass) = report_value(&outcomes[0], expect);
        ok &= pass == Some(true);
        det.push(format!("B={black},R={red} {expect}: {f:.3}"));
    }
    line(
        "C10 unequal-mean drift",
        ok,
        format!("1000 paths, N=1e5, within 0.01 of barrier in >= 99%: {}", det.join(", ")),
    )
}

/// Composite Simpson on the standard normal density, cumulative from 0.
fn phi_oracle_grid(step: f64, half_width: f64) -> Vec<(f64, f64)> {
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let simpson = |a: f64, b: f64| {
        let m = 20;
        let h = (b - a) / m as f64;
        let mut s = density(a) + density(b);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * density(a + k as f64 * h);
        }
        s * h / 3.0
    };
    let n = (half_width / step).round() as i64;
    let mut out = Vec::with_capacity(2 * n as usize + 1);
    let mut acc = 0.0;
    out.push((0.0, 0.5));
    for k in 1..=n {
        let (a, b) = ((k - 1) as f64 * step, k as f64 * step);
        acc += simpson(a, b);
        out.push((b, 0.5 + acc));
        out.push((-b, 0.5 - acc));
    }
    out
}

fn c11_numerics() -> Line {
    let grid = phi_oracle_grid(1e-3, 8.0);
    let worst = grid
        .iter()
        .map(|&(x, exact)| (standard_normal_cdf(x) - exact).abs())
        .fold(0.0, f64::max);
    let n = 1_000_000;
    let p = ks_pvalue(1.36 / (n as f64).sqrt(), n);
    line(
        "C11 numerical primitives",
        worst <= 1e-6 && (p - 0.049).abs() <= 0.002,
        format!("Phi vs Simpson on [-8,8] step 1e-3: max err {worst:.1e} <= 1e-6; Q_KS(1.36) = {p:.4} in 0.049 +- 0.002"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut emit = |l: Line| {
        println!("[{}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
        lines.push(l.pass);
    };
    emit(c11_numerics());
    emit(c1_identity());
    emit(c2_oracle());
    emit(c3_polya());
    emit(c4_convergence());
    let (c5, c6) = c5_c6_clt();
    emit(c5);
    emit(c6);
    emit(c7_barrier());
    let (c8, c8_control) = c8_atoms();
    emit(c8);
    emit(c8_control);
    emit(c9_sn());
    emit(c10_drift());
    let failed = lines.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.0}s)",
        lines.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
