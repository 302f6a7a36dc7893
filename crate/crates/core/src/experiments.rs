//! Monte Carlo suites.
//!
//! Every path `i` of an ensemble is driven by the stream
//! `StreamKey::path_seed(master_seed, i)`; continuation `j` of a frozen
//! prefix forks the prefix stream with child index `j`. Results are collected
//! in index order, so they do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::LimitMoments;
use crate::error::{Result, UrnError};
use crate::provenance::{fingerprint, Provenance};
use crate::rng::StreamKey;
use crate::stats::{
    ks_test, max_atom_mass, sigma2, standard_normal_cdf, Gate, LimitMethod, TestReport,
};
use crate::urn::{Barriers, UrnModel, UrnRun, UrnState};

/// Named tolerances used by the suites' gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub cauchy_epsilon: f64,
    pub cauchy_max_fraction: f64,
    pub range_epsilon: f64,
    pub range_max_fraction: f64,
    /// Level for KS tests against a law known in closed form.
    pub ks_level: f64,
    /// Level for KS tests standardised with the estimated limit.
    pub plugin_ks_level: f64,
    /// Per-prefix KS level of the conditional CLT.
    pub clt_level: f64,
    pub clt_min_pass_fraction: f64,
    /// Multiplies `sigma^2` in the main CLT test; values other than 1 turn
    /// the test into a wrong-variance control.
    pub clt_variance_multiplier: f64,
    pub control_variance_multiplier: f64,
    pub control_p_value: f64,
    pub control_min_reject_fraction: f64,
    pub barrier_delta: f64,
    pub barrier_horizon_factor: u64,
    pub barrier_max_fraction: f64,
    pub atom_bin_coarse: f64,
    pub atom_bin_fine: f64,
    pub atom_max_mass: f64,
    pub sn_tolerance: f64,
    pub sn_min_fraction: f64,
    pub cn_degenerate_bound: f64,
    pub cn_min_fraction: f64,
    pub drift_delta: f64,
    pub drift_min_fraction: f64,
    /// `q/m^2 - 1` at or below this is treated as deterministic reinforcement.
    pub degenerate_dispersion_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            cauchy_epsilon: 0.02,
            cauchy_max_fraction: 0.01,
            range_epsilon: 0.01,
            range_max_fraction: 0.0,
            ks_level: 0.01,
            plugin_ks_level: 0.005,
            clt_level: 0.05,
            clt_min_pass_fraction: 0.8,
            clt_variance_multiplier: 1.0,
            control_variance_multiplier: 2.0,
            control_p_value: 0.001,
            control_min_reject_fraction: 0.9,
            barrier_delta: 0.01,
            barrier_horizon_factor: 4,
            barrier_max_fraction: 0.02,
            atom_bin_coarse: 1e-2,
            atom_bin_fine: 1e-3,
            atom_max_mass: 0.05,
            sn_tolerance: 0.02,
            sn_min_fraction: 0.99,
            cn_degenerate_bound: 0.05,
            cn_min_fraction: 0.99,
            drift_delta: 0.01,
            drift_min_fraction: 0.99,
            degenerate_dispersion_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: UrnModel,
    /// `N`.
    pub horizon: u64,
    /// The time `n` at which the conditional CLT freezes the past.
    pub prefix_n: u64,
    pub continuations: usize,
    pub paths: usize,
    pub master_seed: u64,
    pub limit_estimator: LimitMethod,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Config with suite sizes left at small defaults.
    pub fn new(model: UrnModel, horizon: u64, master_seed: u64) -> Self {
        ExperimentConfig {
            model,
            horizon,
            prefix_n: (horizon / 100).max(1).min(horizon.saturating_sub(1)),
            continuations: 500,
            paths: 1000,
            master_seed,
            limit_estimator: LimitMethod::Terminal,
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.horizon < 1 {
            return Err(UrnError::validation("horizon", "must be >= 1"));
        }
        if self.prefix_n >= self.horizon {
            return Err(UrnError::validation("prefix_n", "must be < horizon"));
        }
        if self.paths < 1 {
            return Err(UrnError::validation("paths", "must be >= 1"));
        }
        if self.continuations < 1 {
            return Err(UrnError::validation("continuations", "must be >= 1"));
        }
        if let LimitMethod::TailAverage { window } = self.limit_estimator {
            if window == 0 || window as u64 > self.horizon {
                return Err(UrnError::validation(
                    "limit_estimator.window",
                    "must lie in 1..=horizon",
                ));
            }
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        fingerprint(self)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config_hash(),
            master_seed: self.master_seed,
        }
    }

    pub fn path_seed(&self, index: usize) -> u64 {
        StreamKey::path_seed(self.master_seed, index as u64)
    }
}

/// Per-path aggregates kept by the ensemble runner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub index: usize,
    pub seed: u64,
    pub barriers: Barriers,
    /// `Z` at each requested checkpoint.
    pub checkpoints: Vec<f64>,
    pub z_terminal: f64,
    pub z_hat: f64,
    pub s_terminal: f64,
    pub s_over_n: f64,
    /// `sum X_i`.
    pub black_draws: u64,
    /// `sqrt(N) (mean(X) - Z_N)`.
    pub c_n: f64,
}

/// Running tail-average tracker for `Z_n`.
struct LimitTracker {
    method: LimitMethod,
    horizon: u64,
    tail_sum: f64,
}

impl LimitTracker {
    fn new(method: LimitMethod, horizon: u64) -> Self {
        LimitTracker {
            method,
            horizon,
            tail_sum: 0.0,
        }
    }

    #[inline]
    fn observe(&mut self, state: &UrnState) {
        if let LimitMethod::TailAverage { window } = self.method {
            if state.step_index + window as u64 > self.horizon {
                self.tail_sum += state.z;
            }
        }
    }

    fn estimate(&self, terminal: f64) -> f64 {
        match self.method {
            LimitMethod::Terminal => terminal,
            LimitMethod::TailAverage { window } => self.tail_sum / window as f64,
        }
    }
}

/// Advance `run` to `horizon`, returning the limit estimate.
fn finish(run: &mut UrnRun<'_>, horizon: u64, method: LimitMethod) -> f64 {
    let mut tracker = LimitTracker::new(method, horizon);
    tracker.observe(run.state());
    while run.state().step_index < horizon {
        run.step();
        tracker.observe(run.state());
    }
    tracker.estimate(run.state().z)
}

fn summarize_path(
    model: &UrnModel,
    index: usize,
    seed: u64,
    horizon: u64,
    checkpoints: &[u64],
    method: LimitMethod,
) -> Result<PathSummary> {
    let mut run = UrnRun::start(model, seed)?;
    let mut tracker = LimitTracker::new(method, horizon);
    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut black_draws = 0u64;
    tracker.observe(run.state());
    let mut next_cp = checkpoints.iter().peekable();
    while next_cp.peek().is_some_and(|&&c| c == 0) {
        recorded.push(run.state().z);
        next_cp.next();
    }
    while run.state().step_index < horizon {
        let draw = run.step();
        black_draws += draw.x as u64;
        tracker.observe(run.state());
        while next_cp.peek().is_some_and(|&&c| c == run.state().step_index) {
            recorded.push(run.state().z);
            next_cp.next();
        }
    }
    let state = *run.state();
    let n = horizon as f64;
    Ok(PathSummary {
        index,
        seed,
        barriers: state.barriers,
        checkpoints: recorded,
        z_terminal: state.z,
        z_hat: tracker.estimate(state.z),
        s_terminal: state.total,
        s_over_n: state.total / n,
        black_draws,
        c_n: n.sqrt() * (black_draws as f64 / n - state.z),
    })
}

fn ensemble_with(config: &ExperimentConfig, horizon: u64, checkpoints: &[u64]) -> Result<Vec<PathSummary>> {
    config.validate()?;
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    if cps.last().is_some_and(|&c| c > horizon) {
        return Err(UrnError::validation("checkpoints", "must not exceed the horizon"));
    }
    (0..config.paths)
        .into_par_iter()
        .map(|i| {
            summarize_path(
                &config.model,
                i,
                config.path_seed(i),
                horizon,
                &cps,
                config.limit_estimator,
            )
        })
        .collect()
}

/// `paths` independent paths to `horizon`, with `Z_{N/2}` as the only checkpoint.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<Vec<PathSummary>> {
    ensemble_with(config, config.horizon, &[config.horizon / 2])
}

/// Rows for a per-suite CSV file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn paths(summaries: &[PathSummary]) -> Self {
        let mut t = Table::new(&[
            "path", "seed", "lower", "upper", "z_half", "z_terminal", "z_hat", "s_over_n", "c_n",
        ]);
        for s in summaries {
            t.push(vec![
                s.index.to_string(),
                s.seed.to_string(),
                s.barriers.lower.to_string(),
                s.barriers.upper.to_string(),
                s.checkpoints.first().map(|z| z.to_string()).unwrap_or_default(),
                s.z_terminal.to_string(),
                s.z_hat.to_string(),
                s.s_over_n.to_string(),
                s.c_n.to_string(),
            ]);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub reports: Vec<TestReport>,
    pub table: Table,
}

impl SuiteOutcome {
    /// True when no gated report failed.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| !r.failed())
    }

    pub fn report(&self, name: &str) -> Option<&TestReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

fn gate_or_explore(gate: Gate, exploratory: bool) -> Gate {
    if exploratory {
        Gate::Exploratory
    } else {
        gate
    }
}

fn require_clt_moments(config: &ExperimentConfig) -> Result<LimitMoments> {
    let lim = config.model.reinforcement.limit_moments();
    if !lim.clt_hypothesis_holds() {
        return Err(UrnError::Hypothesis(format!(
            "m = lim E(B_n) = {} must be > 0",
            lim.m
        )));
    }
    Ok(lim)
}

/// Almost-sure convergence: Cauchy, range and interior checks.
pub fn convergence_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    convergence_reports(config, !config.model.is_symmetric(), "convergence")
}

fn convergence_reports(config: &ExperimentConfig, exploratory: bool, suite: &str) -> Result<SuiteOutcome> {
    if config.model.reinforcement.limit_moments().m <= 0.0 {
        return Err(UrnError::Hypothesis(
            "liminf E(B_n) must be > 0 for almost-sure convergence".into(),
        ));
    }
    let th = &config.thresholds;
    let summaries = run_ensemble(config)?;
    let n = summaries.len();
    let prov = config.provenance();

    let cauchy = summaries
        .iter()
        .filter(|s| (s.z_terminal - s.checkpoints[0]).abs() > th.cauchy_epsilon)
        .count();
    let cauchy_report = TestReport::new(
        suite,
        "cauchy_fraction",
        fraction(cauchy, n),
        None,
        gate_or_explore(Gate::StatisticBelow(th.cauchy_max_fraction), exploratory),
        n,
        prov.clone(),
    )
    .with_detail("epsilon", th.cauchy_epsilon)
    .with_detail("failures", cauchy as f64);

    let outside = summaries
        .iter()
        .filter(|s| {
            s.z_hat < s.barriers.lower - th.range_epsilon || s.z_hat > s.barriers.upper + th.range_epsilon
        })
        .count();
    let mut range_report = TestReport::new(
        suite,
        "range_fraction",
        fraction(outside, n),
        None,
        gate_or_explore(Gate::StatisticAtMost(th.range_max_fraction), exploratory),
        n,
        prov.clone(),
    )
    .with_detail("epsilon", th.range_epsilon)
    .with_detail("outside", outside as f64);
    if summaries.iter().all(|s| s.barriers.is_classical()) {
        range_report = range_report.with_note("vacuous: no barriers");
    }

    let interior = summaries
        .iter()
        .map(|s| s.z_hat.min(1.0 - s.z_hat))
        .fold(f64::INFINITY, f64::min);
    let interior_report = TestReport::new(
        suite,
        "interior_margin",
        interior,
        None,
        gate_or_explore(Gate::StatisticAbove(0.0), exploratory),
        n,
        prov,
    );

    Ok(SuiteOutcome {
        suite: suite.to_string(),
        reports: vec![cauchy_report, range_report, interior_report],
        table: Table::paths(&summaries),
    })
}

/// `S_N / N` close to `m`.
pub fn sn_ratio_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    let th = &config.thresholds;
    let m = config.model.reinforcement.limit_moments().m;
    let summaries = run_ensemble(config)?;
    let n = summaries.len();
    let close = summaries
        .iter()
        .filter(|s| (s.s_over_n - m).abs() < th.sn_tolerance)
        .count();
    let worst = summaries
        .iter()
        .map(|s| (s.s_over_n - m).abs())
        .fold(0.0, f64::max);
    let mut report = TestReport::new(
        "sn",
        "sn_over_n_close_fraction",
        fraction(close, n),
        None,
        gate_or_explore(Gate::StatisticAtLeast(th.sn_min_fraction), !config.model.is_symmetric()),
        n,
        config.provenance(),
    )
    .with_detail("m", m)
    .with_detail("tolerance", th.sn_tolerance)
    .with_detail("max_abs_deviation", worst);
    if m <= 0.0 {
        report = report.with_note("m = 0 violates the CLT hypothesis");
    }
    Ok(SuiteOutcome {
        suite: "sn".into(),
        reports: vec![report],
        table: Table::paths(&summaries),
    })
}

/// CDF of `Beta(a, b)` for positive integers, as a binomial tail.
fn beta_cdf_integer(a: u32, b: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let n = a + b - 1;
    let ln_choose = |k: u32| -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
    };
    (a..=n)
        .map(|j| (ln_choose(j) + j as f64 * x.ln() + (n - j) as f64 * (1.0 - x).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Classical Pólya control: with `L = 0, U = 1` and `B_n = v` the limit is
/// `Beta(b/v, r/v)`; requires `b/v` and `r/v` to be integers.
pub fn polya_limit_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    let model = &config.model;
    let classical = model.barriers.as_fixed().is_some_and(|b| b.is_classical());
    let value = match model.reinforcement.family() {
        crate::distributions::ReinforcementFamily::PointMass { value } if *value > 0.0 => *value,
        _ => {
            return Err(UrnError::validation(
                "reinforcement",
                "the Pólya control needs a positive point-mass reinforcement",
            ))
        }
    };
    if !classical || !model.is_symmetric() {
        return Err(UrnError::validation("barriers", "the Pólya control needs L = 0, U = 1"));
    }
    let (a, b) = (model.b / value, model.r / value);
    if a.fract() != 0.0 || b.fract() != 0.0 || a + b > 2000.0 {
        return Err(UrnError::validation(
            "b, r",
            "b/v and r/v must be integers (sum at most 2000)",
        ));
    }
    let summaries = run_ensemble(config)?;
    let zs: Vec<f64> = summaries.iter().map(|s| s.z_hat).collect();
    let (a, b) = (a as u32, b as u32);
    let ks = ks_test(&zs, |x| beta_cdf_integer(a, b, x))?;
    let report = TestReport::new(
        "polya",
        "limit_law_ks",
        ks.statistic,
        Some(ks.p_value),
        Gate::PValueAbove(config.thresholds.ks_level),
        ks.n,
        config.provenance(),
    )
    .with_detail("beta_a", a as f64)
    .with_detail("beta_b", b as f64);
    Ok(SuiteOutcome {
        suite: "polya".into(),
        reports: vec![report],
        table: Table::paths(&summaries),
    })
}

/// One continuation's contribution to the conditional CLT.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    /// `sqrt(n) (Z_n - z_hat)`.
    pub d_n: f64,
    pub sigma_hat: f64,
    /// `d_n / sigma_hat`, defined only when `sigma_hat > 0`.
    pub standardized: Option<f64>,
}

/// Freeze the past of prefix `index` at `prefix_n` and run every continuation.
pub fn continuation_samples(
    config: &ExperimentConfig,
    index: usize,
    variance_multiplier: f64,
) -> Result<(UrnState, Vec<CltSample>)> {
    config.validate()?;
    let lim = require_clt_moments(config)?;
    let mut prefix = UrnRun::start(&config.model, config.path_seed(index))?;
    prefix.run_to(config.prefix_n);
    let frozen = *prefix.state();
    let sigma_hat = (variance_multiplier * sigma2(lim.m, lim.q, frozen.z)?).sqrt();
    if !(sigma_hat > 0.0) {
        return Err(UrnError::Integrity(format!(
            "degenerate prefix {index}: Z = {} gives zero variance",
            frozen.z
        )));
    }
    let root_n = (config.prefix_n as f64).sqrt();
    let samples = (0..config.continuations)
        .into_par_iter()
        .map(|j| {
            let mut run = prefix.fork(j as u64);
            let z_hat = finish(&mut run, config.horizon, config.limit_estimator);
            let d_n = root_n * (frozen.z - z_hat);
            CltSample {
                d_n,
                sigma_hat,
                standardized: Some(d_n / sigma_hat),
            }
        })
        .collect();
    Ok((frozen, samples))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixResult {
    pub index: usize,
    pub z_prefix: f64,
    pub s_prefix: f64,
    pub sigma2: f64,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub control_ks_statistic: f64,
    pub control_p_value: f64,
    /// Sample variance of `d_n` divided by `sigma^2`.
    pub variance_ratio: f64,
}

fn clt_prefix(config: &ExperimentConfig, index: usize) -> Result<PrefixResult> {
    let th = &config.thresholds;
    let (frozen, samples) = continuation_samples(config, index, th.clt_variance_multiplier)?;
    let z: Vec<f64> = samples.iter().filter_map(|s| s.standardized).collect();
    let ks = ks_test(&z, standard_normal_cdf)?;
    let shrink = th.control_variance_multiplier.sqrt();
    let control: Vec<f64> = z.iter().map(|v| v / shrink).collect();
    let control_ks = ks_test(&control, standard_normal_cdf)?;
    let sigma_hat = samples[0].sigma_hat;
    let mean_d = samples.iter().map(|s| s.d_n).sum::<f64>() / samples.len() as f64;
    let var_d = samples.iter().map(|s| (s.d_n - mean_d).powi(2)).sum::<f64>()
        / (samples.len().max(2) - 1) as f64;
    let base_sigma2 = sigma_hat * sigma_hat / th.clt_variance_multiplier;
    Ok(PrefixResult {
        index,
        z_prefix: frozen.z,
        s_prefix: frozen.total,
        sigma2: base_sigma2,
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
        control_ks_statistic: control_ks.statistic,
        control_p_value: control_ks.p_value,
        variance_ratio: var_d / base_sigma2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltOutcome {
    pub prefixes: Vec<PrefixResult>,
    pub outcome: SuiteOutcome,
}

/// Conditional CLT over `paths` frozen prefixes of length `prefix_n`, each
/// with `continuations` independent futures to `horizon`.
pub fn conditional_clt_suite(config: &ExperimentConfig) -> Result<CltOutcome> {
    clt_reports(config, !config.model.is_symmetric(), "clt")
}

fn clt_reports(config: &ExperimentConfig, exploratory: bool, suite: &str) -> Result<CltOutcome> {
    config.validate()?;
    require_clt_moments(config)?;
    let th = &config.thresholds;
    let prefixes = (0..config.paths)
        .into_par_iter()
        .map(|i| clt_prefix(config, i))
        .collect::<Result<Vec<_>>>()?;
    let k = prefixes.len();
    let prov = config.provenance();

    let passing = prefixes.iter().filter(|p| p.p_value > th.clt_level).count();
    let expected = k as f64 * (1.0 - th.clt_level);
    let sd = (k as f64 * th.clt_level * (1.0 - th.clt_level)).sqrt();
    let min_pass = (th.clt_min_pass_fraction * k as f64).ceil();
    let main = TestReport::new(
        suite,
        "prefix_pass_count",
        passing as f64,
        None,
        gate_or_explore(Gate::StatisticAtLeast(min_pass), exploratory),
        k,
        prov.clone(),
    )
    .with_detail("level", th.clt_level)
    .with_detail("expected", expected)
    .with_detail("band_3sd_low", expected - 3.0 * sd)
    .with_detail("band_3sd_high", (expected + 3.0 * sd).min(k as f64))
    .with_detail("variance_multiplier", th.clt_variance_multiplier)
    .with_detail("continuations", config.continuations as f64)
    .with_detail(
        "mean_variance_ratio",
        prefixes.iter().map(|p| p.variance_ratio).sum::<f64>() / k as f64,
    );

    let rejecting = prefixes
        .iter()
        .filter(|p| p.control_p_value < th.control_p_value)
        .count();
    let control = TestReport::new(
        suite,
        "wrong_variance_reject_count",
        rejecting as f64,
        None,
        gate_or_explore(
            Gate::StatisticAtLeast((th.control_min_reject_fraction * k as f64).ceil()),
            exploratory,
        ),
        k,
        prov,
    )
    .with_detail(
        "variance_multiplier",
        th.control_variance_multiplier * th.clt_variance_multiplier,
    )
    .with_detail("p_value_threshold", th.control_p_value);

    let mut table = Table::new(&[
        "prefix",
        "z_prefix",
        "s_prefix",
        "sigma2",
        "ks_statistic",
        "p_value",
        "control_ks_statistic",
        "control_p_value",
        "variance_ratio",
    ]);
    for p in &prefixes {
        table.push(vec![
            p.index.to_string(),
            p.z_prefix.to_string(),
            p.s_prefix.to_string(),
            p.sigma2.to_string(),
            p.ks_statistic.to_string(),
            p.p_value.to_string(),
            p.control_ks_statistic.to_string(),
            p.control_p_value.to_string(),
            p.variance_ratio.to_string(),
        ]);
    }
    Ok(CltOutcome {
        prefixes,
        outcome: SuiteOutcome {
            suite: suite.to_string(),
            reports: vec![main, control],
            table,
        },
    })
}

fn near_barrier(z: f64, barriers: &Barriers, delta: f64) -> bool {
    (z - barriers.lower).abs() < delta || (z - barriers.upper).abs() < delta
}

/// The limit avoids the barriers: mass within `delta` of `L` or `U` at `N`
/// and at `factor * N`.
pub fn barrier_strictness_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    config.validate()?;
    let th = &config.thresholds;
    let prov = config.provenance();
    let barriers = match config.model.barriers.as_fixed() {
        Some(b) if b.lower > 0.0 && b.upper < 1.0 => b,
        _ => {
            return Ok(SuiteOutcome {
                suite: "barrier".into(),
                reports: vec![TestReport::skipped(
                    "barrier",
                    "near_barrier_fraction",
                    "needs fixed barriers with 0 < L < U < 1",
                    prov,
                )],
                table: Table::default(),
            })
        }
    };
    let delta = th.barrier_delta;
    if !(delta > 0.0) || delta >= (barriers.upper - barriers.lower) / 2.0 {
        return Err(UrnError::validation(
            "thresholds.barrier_delta",
            "must lie in (0, (U - L)/2)",
        ));
    }
    let long = config.horizon * th.barrier_horizon_factor.max(1);
    let summaries = ensemble_with(config, long, &[config.horizon])?;
    let n = summaries.len();
    let near_short = summaries
        .iter()
        .filter(|s| near_barrier(s.checkpoints[0], &barriers, delta))
        .count();
    let near_long = summaries
        .iter()
        .filter(|s| near_barrier(s.z_terminal, &barriers, delta))
        .count();
    let (f_short, f_long) = (fraction(near_short, n), fraction(near_long, n));
    let final_report = TestReport::new(
        "barrier",
        "near_barrier_fraction",
        f_long,
        None,
        Gate::StatisticBelow(th.barrier_max_fraction),
        n,
        prov.clone(),
    )
    .with_detail("delta", delta)
    .with_detail("horizon", long as f64);
    let trend_report = TestReport::new(
        "barrier",
        "near_barrier_change",
        f_long - f_short,
        None,
        Gate::StatisticAtMost(0.0),
        n,
        prov,
    )
    .with_detail("fraction_short", f_short)
    .with_detail("fraction_long", f_long)
    .with_detail("horizon_short", config.horizon as f64)
    .with_detail("horizon_long", long as f64);
    let mut table = Table::new(&["path", "seed", "z_short", "z_long"]);
    for s in &summaries {
        table.push(vec![
            s.index.to_string(),
            s.seed.to_string(),
            s.checkpoints[0].to_string(),
            s.z_terminal.to_string(),
        ]);
    }
    Ok(SuiteOutcome {
        suite: "barrier".into(),
        reports: vec![final_report, trend_report],
        table,
    })
}

/// Largest bin mass of the limit estimates at a coarse and a fine resolution.
pub fn nonatomicity_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    let th = &config.thresholds;
    let summaries = run_ensemble(config)?;
    let zs: Vec<f64> = summaries.iter().map(|s| s.z_hat).collect();
    let coarse = max_atom_mass(&zs, th.atom_bin_coarse)?;
    let fine = max_atom_mass(&zs, th.atom_bin_fine)?;
    let prov = config.provenance();
    let mut mass = TestReport::new(
        "atom",
        "max_atom_mass",
        coarse,
        None,
        Gate::StatisticBelow(th.atom_max_mass),
        zs.len(),
        prov.clone(),
    )
    .with_detail("bin_width", th.atom_bin_coarse);
    if !config.model.reinforcement.limit_moments().clt_hypothesis_holds() {
        mass = mass.with_note("m = 0: hypotheses violated, expected to fail");
    }
    let shrink = TestReport::new(
        "atom",
        "atom_mass_refinement",
        fine - coarse,
        None,
        Gate::StatisticBelow(0.0),
        zs.len(),
        prov,
    )
    .with_detail("mass_coarse", coarse)
    .with_detail("mass_fine", fine)
    .with_detail("bin_width_fine", th.atom_bin_fine);
    Ok(SuiteOutcome {
        suite: "atom".into(),
        reports: vec![mass, shrink],
        table: Table::paths(&summaries),
    })
}

/// `C_N = sqrt(N) (mean(X) - Z_N)` in the barrier-free urn, whose limit
/// variance is `sigma^2 - Z (1 - Z)`.
pub fn cn_suite(config: &ExperimentConfig) -> Result<SuiteOutcome> {
    let th = &config.thresholds;
    if !config.model.barriers.as_fixed().is_some_and(|b| b.is_classical()) {
        return Err(UrnError::validation("barriers", "the C_n statistic needs L = 0, U = 1"));
    }
    let lim = require_clt_moments(config)?;
    let summaries = run_ensemble(config)?;
    let n = summaries.len();
    let prov = config.provenance();
    let excess = lim.dispersion_ratio() - 1.0;
    let report = if excess <= th.degenerate_dispersion_tol {
        let small = summaries
            .iter()
            .filter(|s| s.c_n.abs() < th.cn_degenerate_bound)
            .count();
        TestReport::new(
            "cn",
            "cn_degenerate_fraction",
            fraction(small, n),
            None,
            Gate::StatisticAtLeast(th.cn_min_fraction),
            n,
            prov,
        )
        .with_detail("bound", th.cn_degenerate_bound)
        .with_note("q = m^2: limit variance is zero")
    } else {
        let mut standardized = Vec::with_capacity(n);
        let mut negative = 0usize;
        for s in &summaries {
            let target = sigma2(lim.m, lim.q, s.z_hat)? - s.z_hat * (1.0 - s.z_hat);
            if target < -th.degenerate_dispersion_tol {
                negative += 1;
            } else if target > 0.0 {
                standardized.push(s.c_n / target.sqrt());
            }
        }
        let ks = ks_test(&standardized, standard_normal_cdf)?;
        let mut r = TestReport::new(
            "cn",
            "cn_ks",
            ks.statistic,
            Some(ks.p_value),
            Gate::PValueAbove(th.plugin_ks_level),
            ks.n,
            prov,
        )
        .with_detail("excess_dispersion", excess);
        if negative > 0 {
            r = r.with_detail("negative_variance_paths", negative as f64);
            r.pass = Some(false);
        }
        r
    };
    Ok(SuiteOutcome {
        suite: "cn".into(),
        reports: vec![report],
        table: Table::paths(&summaries),
    })
}

/// Generalised urn with a separate red law. Equal means: convergence and CLT
/// run as exploratory reports. Unequal means with fixed barriers: the
/// limit should sit at `L` when `E(B) < E(R)` and at `U` when `E(B) > E(R)`.
pub fn conjecture_suite(config: &ExperimentConfig) -> Result<Vec<SuiteOutcome>> {
    config.validate()?;
    let Some(red) = &config.model.red_reinforcement else {
        return Err(UrnError::validation(
            "red_reinforcement",
            "the conjecture suite needs a separate red law",
        ));
    };
    let th = &config.thresholds;
    let mean_b = config.model.reinforcement.limit_moments().m;
    let mean_r = red.limit_moments().m;
    let scale = mean_b.abs().max(mean_r.abs()).max(f64::MIN_POSITIVE);
    if (mean_b - mean_r).abs() <= 1e-12 * scale {
        let conv = convergence_reports(config, true, "conjecture_convergence")?;
        let clt = clt_reports(config, true, "conjecture_clt")?.outcome;
        return Ok(vec![conv, clt]);
    }
    let barriers = config.model.barriers.as_fixed().ok_or_else(|| {
        UrnError::validation("barriers", "drift checks need fixed barriers")
    })?;
    let (target, side) = if mean_b < mean_r {
        (barriers.lower, "lower")
    } else {
        (barriers.upper, "upper")
    };
    let summaries = run_ensemble(config)?;
    let n = summaries.len();
    let close = summaries
        .iter()
        .filter(|s| (s.z_hat - target).abs() < th.drift_delta)
        .count();
    let report = TestReport::new(
        "conjecture_drift",
        &format!("concentration_at_{side}"),
        fraction(close, n),
        None,
        Gate::StatisticAtLeast(th.drift_min_fraction),
        n,
        config.provenance(),
    )
    .with_detail("target", target)
    .with_detail("mean_black", mean_b)
    .with_detail("mean_red", mean_r)
    .with_note("unequal mean laws: outside the theorems, reported for comparison");
    Ok(vec![SuiteOutcome {
        suite: "conjecture_drift".into(),
        reports: vec![report],
        table: Table::paths(&summaries),
    }])
}
