//! The annealing teammate that owns the right dial in team tasks.
//!
//! Each turn the helper takes the participant's new left-dial position,
//! proposes a new position for its own dial, and compares the two
//! combinations. Improvements are always kept; worse candidates are kept with
//! Metropolis probability `exp(-Δ/T)`. The temperature cools geometrically per
//! turn and also scales the proposal step, so early turns take long, risky
//! leaps and later turns make small, conservative ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::HelperError;
use crate::grid::DialSetting;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HelperConfig {
    pub initial_temperature: f64,
    /// Per-turn multiplier on the temperature, in `(0, 1)`.
    pub cooling_rate: f64,
    pub max_step: usize,
    pub min_step: usize,
    pub seed: u64,
}

impl Default for HelperConfig {
    fn default() -> Self {
        Self {
            initial_temperature: 8.0,
            cooling_rate: 0.9,
            max_step: 12,
            min_step: 1,
            seed: 0,
        }
    }
}

impl HelperConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Checks the config against a dial with `size` positions.
    pub fn check(&self, size: usize) -> Result<(), HelperError> {
        let bad = |m: &str| Err(HelperError::InvalidConfig(m.to_string()));
        if self.initial_temperature.is_nan() || self.initial_temperature <= 0.0 {
            return bad("initial_temperature must be positive");
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad("cooling_rate must lie in (0, 1)");
        }
        if !(1 <= self.min_step && self.min_step <= self.max_step && self.max_step <= size / 2) {
            return bad("need 1 <= min_step <= max_step <= size / 2");
        }
        Ok(())
    }

    pub fn temperature_at(&self, turn_index: u64) -> f64 {
        self.initial_temperature * self.cooling_rate.powi(turn_index as i32)
    }
}

/// Probability of accepting a candidate that is `delta` worse.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta / temperature).exp()
    }
}

/// Metropolis acceptance draw for a candidate `delta` worse than the incumbent.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    delta <= 0.0 || rng.gen::<f64>() < acceptance_probability(delta, temperature)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HelperState {
    pub config: HelperConfig,
    /// Number of positions on the dial.
    pub size: usize,
    pub own_dial: usize,
    pub temperature: f64,
    pub turn_index: u64,
    pub rng: ChaCha8Rng,
}

/// What happened in one helper turn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelperTurn {
    pub previous_dial: usize,
    pub candidate_dial: usize,
    pub value_previous: f64,
    pub value_candidate: f64,
    pub chosen_dial: usize,
    pub accepted_worse: bool,
    /// Temperature used for this turn's decision.
    pub temperature: f64,
}

impl HelperTurn {
    pub fn chosen_value(&self) -> f64 {
        if self.chosen_dial == self.candidate_dial {
            self.value_candidate
        } else {
            self.value_previous
        }
    }
}

impl HelperState {
    pub fn new(config: HelperConfig, size: usize, start: usize) -> Result<Self, HelperError> {
        config.check(size)?;
        if start >= size {
            return Err(HelperError::OutOfBounds {
                position: start,
                size,
            });
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            temperature: config.initial_temperature,
            config,
            size,
            own_dial: start,
            turn_index: 0,
        })
    }

    /// Draws a candidate position for the helper's dial.
    pub fn propose(&mut self) -> usize {
        let u = 1.0 - self.rng.gen::<f64>();
        let step = ((self.temperature * u).round() as usize)
            .clamp(self.config.min_step, self.config.max_step);
        let step = step as isize;
        let delta = if self.rng.gen_bool(0.5) { step } else { -step };
        (self.own_dial as isize + delta).rem_euclid(self.size as isize) as usize
    }

    /// Runs one turn. `oracle` maps a full setting to its raw elevation and is
    /// called exactly twice: incumbent first, then candidate.
    pub fn turn<E, F>(&mut self, human_dial: usize, mut oracle: F) -> Result<HelperTurn, E>
    where
        E: From<HelperError>,
        F: FnMut(DialSetting) -> Result<f64, E>,
    {
        if human_dial >= self.size {
            return Err(HelperError::OutOfBounds {
                position: human_dial,
                size: self.size,
            }
            .into());
        }
        let candidate = self.propose();
        let value_previous = oracle(DialSetting::new(human_dial, self.own_dial))?;
        let value_candidate = oracle(DialSetting::new(human_dial, candidate))?;
        let delta = value_previous - value_candidate;
        let temperature = self.temperature;
        let accept = metropolis_accept(delta, temperature, &mut self.rng);

        let previous_dial = self.own_dial;
        if accept {
            self.own_dial = candidate;
        }
        self.turn_index += 1;
        self.temperature = self.config.temperature_at(self.turn_index);
        Ok(HelperTurn {
            previous_dial,
            candidate_dial: candidate,
            value_previous,
            value_candidate,
            chosen_dial: self.own_dial,
            accepted_worse: accept && delta > 0.0,
            temperature,
        })
    }
}
