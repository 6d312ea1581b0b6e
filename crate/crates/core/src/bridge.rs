//! Single-mode harmonic-oscillator bridge.
//!
//! The bridge surface peaks at a fixed height and oscillates vertically about
//! the equilibrium `peak - A`. The robot does not load the oscillator.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::simcore::GRAVITY;

/// Surface height at the top of the oscillation, m.
pub const PEAK_HEIGHT: f64 = 1.05;
pub const BRIDGE_LENGTH: f64 = 13.24;
pub const BRIDGE_WIDTH: f64 = 2.5;
pub const DEFAULT_MODAL_MASS: f64 = 10_000.0;

/// Whether the oscillating surface is an infinite plane (training) or a
/// finite span with rigid surroundings (evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeExtent {
    Infinite,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeParams {
    pub mass_mb: f64,
    pub stiffness_k: f64,
    pub peak_height: f64,
    /// Half peak-to-peak amplitude, m.
    pub amplitude: f64,
    pub frequency: f64,
    pub length: f64,
    pub width: f64,
    pub rigid: bool,
    pub extent: BridgeExtent,
}

impl BridgeParams {
    pub fn rigid() -> Self {
        Self {
            mass_mb: DEFAULT_MODAL_MASS,
            stiffness_k: stiffness_for_frequency(DEFAULT_MODAL_MASS, 2.0),
            peak_height: PEAK_HEIGHT,
            amplitude: 0.0,
            frequency: 2.0,
            length: BRIDGE_LENGTH,
            width: BRIDGE_WIDTH,
            rigid: true,
            extent: BridgeExtent::Infinite,
        }
    }

    pub fn oscillating(frequency: f64, amplitude: f64) -> Self {
        Self {
            stiffness_k: stiffness_for_frequency(DEFAULT_MODAL_MASS, frequency),
            amplitude,
            frequency,
            rigid: amplitude == 0.0,
            ..Self::rigid()
        }
    }

    pub fn with_extent(mut self, extent: BridgeExtent) -> Self {
        self.extent = extent;
        self
    }

    /// Equilibrium surface height `b0`.
    pub fn equilibrium_height(&self) -> f64 {
        self.peak_height - self.amplitude
    }

    pub fn angular_frequency(&self) -> f64 {
        (self.stiffness_k / self.mass_mb).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeState {
    pub displacement_zb: f64,
    pub velocity: f64,
    pub params: BridgeParams,
}

impl BridgeState {
    pub fn rigid() -> Self {
        Self {
            displacement_zb: 0.0,
            velocity: 0.0,
            params: BridgeParams::rigid(),
        }
    }

    /// Oscillator started at phase `phase` of `A cos(ωt + phase)`.
    pub fn with_phase(params: BridgeParams, phase: f64) -> Self {
        if params.rigid || params.amplitude == 0.0 {
            return Self {
                displacement_zb: 0.0,
                velocity: 0.0,
                params,
            };
        }
        let w = params.angular_frequency();
        Self {
            displacement_zb: params.amplitude * phase.cos(),
            velocity: -params.amplitude * w * phase.sin(),
            params,
        }
    }

    pub fn acceleration(&self) -> f64 {
        if self.params.rigid {
            0.0
        } else {
            -self.params.stiffness_k / self.params.mass_mb * self.displacement_zb
        }
    }

    pub fn oscillating_surface(&self) -> f64 {
        self.params.equilibrium_height() + self.displacement_zb
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.params.mass_mb * self.velocity * self.velocity
            + 0.5 * self.params.stiffness_k * self.displacement_zb * self.displacement_zb
    }

    /// Whether `x` lies on the oscillating span.
    pub fn on_span(&self, x: f64) -> bool {
        match self.params.extent {
            BridgeExtent::Infinite => true,
            BridgeExtent::Finite => (0.0..=self.params.length).contains(&x),
        }
    }
}

/// k = m (2πf)²
pub fn stiffness_for_frequency(mass: f64, f: f64) -> f64 {
    let w = 2.0 * PI * f;
    mass * w * w
}

pub fn frequency_for_stiffness(stiffness: f64, mass: f64) -> f64 {
    (stiffness / mass).sqrt() / (2.0 * PI)
}

/// Largest amplitude whose peak acceleration A(2πf)² stays at or below g.
pub fn max_amplitude(f: f64) -> f64 {
    let w = 2.0 * PI * f;
    GRAVITY / (w * w)
}

/// Advances the undamped oscillator by `dt` along its exact flow.
pub fn step_bridge(state: &BridgeState, dt: f64) -> BridgeState {
    if state.params.rigid {
        return *state;
    }
    let w = state.params.angular_frequency();
    let (s, c) = (w * dt).sin_cos();
    let z = state.displacement_zb;
    let v = state.velocity;
    BridgeState {
        displacement_zb: z * c + v / w * s,
        velocity: -z * w * s + v * c,
        params: state.params,
    }
}

/// Surface height and vertical velocity under world x-coordinate `x`.
pub fn surface_height_at(state: &BridgeState, x: f64) -> (f64, f64) {
    if state.params.rigid || !state.on_span(x) {
        (state.params.peak_height, 0.0)
    } else {
        (state.oscillating_surface(), state.velocity)
    }
}

/// Sampling ranges used when randomizing the bridge per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeRanges {
    pub frequency_min: f64,
    pub frequency_max: f64,
    /// Amplitude drawn as `U[min, max] * max_amplitude(f)`.
    pub amplitude_fraction_min: f64,
    pub amplitude_fraction_max: f64,
    pub modal_mass: f64,
}

impl Default for BridgeRanges {
    fn default() -> Self {
        Self {
            frequency_min: 0.75,
            frequency_max: 7.5,
            amplitude_fraction_min: 0.0,
            amplitude_fraction_max: 1.0,
            modal_mass: DEFAULT_MODAL_MASS,
        }
    }
}

impl BridgeRanges {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.frequency_min > 0.0 && self.frequency_min <= self.frequency_max) {
            return Err(format!(
                "bridge frequency range [{}, {}] invalid",
                self.frequency_min, self.frequency_max
            ));
        }
        if !(0.0..=1.0).contains(&self.amplitude_fraction_min)
            || !(0.0..=1.0).contains(&self.amplitude_fraction_max)
            || self.amplitude_fraction_min > self.amplitude_fraction_max
        {
            return Err("bridge amplitude fractions must satisfy 0 <= min <= max <= 1".into());
        }
        if self.modal_mass <= 0.0 {
            return Err("bridge modal mass must be positive".into());
        }
        Ok(())
    }

    /// Samples frequency, amplitude and phase. `oscillating = false` gives the rigid bridge.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, oscillating: bool) -> BridgeState {
        if !oscillating {
            return BridgeState::rigid();
        }
        let f = uniform(rng, self.frequency_min, self.frequency_max);
        let frac = uniform(rng, self.amplitude_fraction_min, self.amplitude_fraction_max);
        let amplitude = frac * max_amplitude(f);
        let phase = rng.random_range(0.0..2.0 * PI);
        let params = BridgeParams {
            mass_mb: self.modal_mass,
            stiffness_k: stiffness_for_frequency(self.modal_mass, f),
            amplitude,
            frequency: f,
            rigid: false,
            ..BridgeParams::rigid()
        };
        BridgeState::with_phase(params, phase)
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}
