//! Two-colour randomly reinforced urn with barriers.
//!
//! At each time a ball is drawn. A black draw adds `B_n` black weight only if
//! the current proportion is strictly below the upper barrier; a red draw
//! adds red weight only if the proportion is strictly above the lower
//! barrier. Otherwise the composition is unchanged. The red amount equals
//! `B_n` unless the model carries a separate red law (the generalised urn
//! used by the exploratory experiments).
//!
//! Weights are real-valued and the state is always advanced from
//! `(black, total)`; `z` is recomputed as their ratio after every step.

use serde::{Deserialize, Serialize};

use crate::distributions::{BarrierSpec, ReinforcementSpec};
use crate::error::{Result, UrnError};
use crate::provenance::fingerprint;
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barriers {
    pub lower: f64,
    pub upper: f64,
}

impl Barriers {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(UrnError::validation("barriers", "must be finite"));
        }
        if !(0.0..1.0).contains(&lower) {
            return Err(UrnError::validation("barriers.lower", "must lie in [0, 1)"));
        }
        if !(upper > 0.0 && upper <= 1.0) {
            return Err(UrnError::validation("barriers.upper", "must lie in (0, 1]"));
        }
        if lower >= upper {
            return Err(UrnError::validation("barriers", "lower must be < upper"));
        }
        Ok(Barriers { lower, upper })
    }

    /// `L = 0, U = 1`: neither indicator can ever switch off.
    pub fn is_classical(&self) -> bool {
        self.lower == 0.0 && self.upper == 1.0
    }

    /// `I{z < U}`.
    #[inline]
    pub fn black_open(&self, z: f64) -> bool {
        z < self.upper
    }

    /// `I{z > L}`.
    #[inline]
    pub fn red_open(&self, z: f64) -> bool {
        z > self.lower
    }
}

/// Randomness consumed by one transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDraw {
    /// `X_n`: true when a black ball is drawn.
    pub x: bool,
    /// `B_n`.
    pub amount: f64,
    /// `R_n` when it is drawn separately from `B_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub red_amount: Option<f64>,
}

impl StepDraw {
    pub fn new(x: bool, amount: f64) -> Result<Self> {
        if !(amount.is_finite() && amount >= 0.0) {
            return Err(UrnError::validation("draw.amount", "must be finite and >= 0"));
        }
        Ok(StepDraw {
            x,
            amount,
            red_amount: None,
        })
    }

    pub fn with_red(x: bool, amount: f64, red_amount: f64) -> Result<Self> {
        let mut draw = Self::new(x, amount)?;
        if !(red_amount.is_finite() && red_amount >= 0.0) {
            return Err(UrnError::validation("draw.red_amount", "must be finite and >= 0"));
        }
        draw.red_amount = Some(red_amount);
        Ok(draw)
    }

    #[inline]
    pub fn red(&self) -> f64 {
        self.red_amount.unwrap_or(self.amount)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrnState {
    pub black: f64,
    pub total: f64,
    pub z: f64,
    pub step_index: u64,
    pub barriers: Barriers,
}

impl UrnState {
    pub fn init(b: f64, r: f64, barriers: Barriers) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(UrnError::validation("b", "initial black weight must be > 0"));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(UrnError::validation("r", "initial red weight must be > 0"));
        }
        let barriers = Barriers::new(barriers.lower, barriers.upper)?;
        let total = b + r;
        Ok(UrnState {
            black: b,
            total,
            z: b / total,
            step_index: 0,
            barriers,
        })
    }

    /// Apply one draw in place; returns whether the composition changed.
    #[inline]
    pub fn advance(&mut self, draw: &StepDraw) -> bool {
        let changed = if draw.x {
            if self.barriers.black_open(self.z) {
                self.black += draw.amount;
                self.total += draw.amount;
                true
            } else {
                false
            }
        } else if self.barriers.red_open(self.z) {
            self.total += draw.red();
            true
        } else {
            false
        };
        self.step_index += 1;
        self.z = self.black / self.total;
        changed
    }

    pub fn step(&self, draw: &StepDraw) -> UrnState {
        let mut next = *self;
        next.advance(draw);
        next
    }

    pub fn red(&self) -> f64 {
        self.total - self.black
    }
}

/// Static description of an urn: initial composition and the laws of the
/// barriers and reinforcements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UrnModel {
    pub b: f64,
    pub r: f64,
    pub barriers: BarrierSpec,
    pub reinforcement: ReinforcementSpec,
    /// Separate law of `R_n`. `None` is the `R_n = B_n` urn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub red_reinforcement: Option<ReinforcementSpec>,
}

impl UrnModel {
    pub fn new(b: f64, r: f64, barriers: BarrierSpec, reinforcement: ReinforcementSpec) -> Result<Self> {
        let model = UrnModel {
            b,
            r,
            barriers,
            reinforcement,
            red_reinforcement: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_red_reinforcement(mut self, red: ReinforcementSpec) -> Self {
        self.red_reinforcement = Some(red);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.barriers.validate()?;
        UrnState::init(self.b, self.r, Barriers { lower: 0.0, upper: 1.0 })?;
        Ok(())
    }

    /// True when `R_n = B_n`.
    pub fn is_symmetric(&self) -> bool {
        self.red_reinforcement.is_none()
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    pub fn z0(&self) -> f64 {
        self.b / (self.b + self.r)
    }
}

/// A running path: current state plus the stream its future draws come from.
#[derive(Clone, Debug)]
pub struct UrnRun<'m> {
    model: &'m UrnModel,
    key: StreamKey,
    state: UrnState,
}

impl<'m> UrnRun<'m> {
    /// Barriers are drawn from step 0 of the stream seeded by `seed`.
    pub fn start(model: &'m UrnModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let key = StreamKey::new(seed);
        let barriers = model.barriers.sample(&mut key.at_step(0));
        let state = UrnState::init(model.b, model.r, barriers)?;
        Ok(UrnRun { model, key, state })
    }

    /// Continue from the current state with an independent future keyed by
    /// `(this stream, index)`.
    pub fn fork(&self, index: u64) -> UrnRun<'m> {
        UrnRun {
            model: self.model,
            key: self.key.child(index),
            state: self.state,
        }
    }

    pub fn state(&self) -> &UrnState {
        &self.state
    }

    /// Draw for the transition to time `n + 1`, where `n` is the current step.
    #[inline]
    pub fn next_draw(&self) -> StepDraw {
        let n = self.state.step_index + 1;
        let mut rng = self.key.at_step(n);
        let x = rng.uniform() < self.state.z;
        let amount = self.model.reinforcement.sample(n, &mut rng);
        let red_amount = self
            .model
            .red_reinforcement
            .as_ref()
            .map(|spec| spec.sample(n, &mut rng));
        StepDraw {
            x,
            amount,
            red_amount,
        }
    }

    #[inline]
    pub fn step(&mut self) -> StepDraw {
        let draw = self.next_draw();
        self.state.advance(&draw);
        draw
    }

    /// Advance until the step index reaches `horizon`.
    pub fn run_to(&mut self, horizon: u64) {
        while self.state.step_index < horizon {
            self.step();
        }
    }
}

/// Complete trajectory of one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub config_hash: String,
    pub seed: u64,
    pub initial_black: f64,
    pub initial_red: f64,
    pub barriers: Barriers,
    pub draws: Vec<StepDraw>,
    /// `Z_0 .. Z_N`.
    pub z_series: Vec<f64>,
    /// `S_0 .. S_N`.
    pub s_series: Vec<f64>,
}

impl PathRecord {
    pub fn horizon(&self) -> usize {
        self.draws.len()
    }

    /// Replays the draws from the initial state and returns the visited
    /// states, failing unless they reproduce the recorded series bit for bit.
    pub fn replay(&self) -> Result<Vec<UrnState>> {
        let n = self.draws.len();
        if self.z_series.len() != n + 1 || self.s_series.len() != n + 1 {
            return Err(UrnError::Integrity(format!(
                "series lengths {}/{} do not match {} draws",
                self.z_series.len(),
                self.s_series.len(),
                n
            )));
        }
        let mut state = UrnState::init(self.initial_black, self.initial_red, self.barriers)?;
        let mut states = Vec::with_capacity(n + 1);
        states.push(state);
        for draw in &self.draws {
            state.advance(draw);
            states.push(state);
        }
        for (i, st) in states.iter().enumerate() {
            if st.z.to_bits() != self.z_series[i].to_bits()
                || st.total.to_bits() != self.s_series[i].to_bits()
            {
                return Err(UrnError::Integrity(format!(
                    "replay diverges from the record at n = {i}"
                )));
            }
        }
        Ok(states)
    }
}

/// Simulate one full path of `horizon` steps.
pub fn simulate_path(model: &UrnModel, seed: u64, horizon: u64) -> Result<PathRecord> {
    if horizon < 1 {
        return Err(UrnError::validation("horizon", "must be >= 1"));
    }
    let mut run = UrnRun::start(model, seed)?;
    let len = horizon as usize;
    let mut draws = Vec::with_capacity(len);
    let mut z_series = Vec::with_capacity(len + 1);
    let mut s_series = Vec::with_capacity(len + 1);
    z_series.push(run.state().z);
    s_series.push(run.state().total);
    for _ in 0..horizon {
        draws.push(run.step());
        z_series.push(run.state().z);
        s_series.push(run.state().total);
    }
    Ok(PathRecord {
        config_hash: model.fingerprint(),
        seed,
        initial_black: model.b,
        initial_red: model.r,
        barriers: run.state().barriers,
        draws,
        z_series,
        s_series,
    })
}
