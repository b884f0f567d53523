//! Imperfect single-pulse propagators.
//!
//! Two models are provided:
//!
//! * a closed form, `exp[-i/2 θ(1+ε)(σ_φ + δZ)]`, with fractional pulse-area
//!   error `ε` and a Z tilt `δ` (detuning divided by Rabi frequency);
//! * a physical drive with two off-resonant comb pairs,
//!   `H(t) = Ω/2 [σ_φ + δZ + a₁ σ(δ′t + φ₁) + a₂ σ(2δ′t + φ₂)]` where
//!   `σ(x) = X cos x + Y sin x`, propagated with a second-order Magnus
//!   expansion whose integrals are evaluated in closed form.
//!
//! A midpoint time-ordered product integrator is kept as the reference for
//! the Magnus result.
//!
//! Random draws (δ, φ₁, φ₂) are made by the caller and passed in as a
//! [`NoiseDraw`], so everything here is deterministic.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{Pulse, PulseKind};
use crate::su2::{pauli_axis_unitary, z_rotation, Unitary2};

pub const DEFAULT_RABI_HZ: f64 = 50.0e3;
pub const DEFAULT_DELTA_PRIME_HZ: f64 = 4.5e6;
pub const DEFAULT_DELTA_MAX_HZ: f64 = 3.0e3;

/// How the Z tilt is chosen for each sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum DeltaSpec {
    Fixed { value: f64 },
    /// Uniform on `[0, max]`.
    Uniform { max: f64 },
}

/// How an off-resonant relative phase is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PhaseSpec {
    Fixed { value: f64 },
    /// Uniform on `[0, 2π)`, once per sequence.
    PerSequence,
    /// Uniform on `[0, 2π)`, independently for every physical pulse.
    PerPulse,
}

impl PhaseSpec {
    pub fn is_per_pulse(&self) -> bool {
        matches!(self, PhaseSpec::PerPulse)
    }
}

/// Off-resonant comb-pair terms at `δ′` and `2δ′`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffResonant {
    pub amp1: f64,
    pub amp2: f64,
    /// `δ′ / Ω`.
    pub delta_prime_ratio: f64,
    pub phi1: PhaseSpec,
    pub phi2: PhaseSpec,
}

impl Default for OffResonant {
    fn default() -> Self {
        Self {
            amp1: 2.0,
            amp2: 1.0,
            delta_prime_ratio: DEFAULT_DELTA_PRIME_HZ / DEFAULT_RABI_HZ,
            phi1: PhaseSpec::PerSequence,
            phi2: PhaseSpec::PerSequence,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Fractional pulse-area error, identical for every pulse.
    pub epsilon: f64,
    /// Z tilt, as detuning over Rabi frequency.
    pub delta: DeltaSpec,
    pub offres: Option<OffResonant>,
    /// Rabi frequency `Ω/2π` in Hz; only used to set time scales.
    pub rabi_hz: f64,
}

impl Default for NoiseModel {
    /// Per-sequence δ uniform over the band equivalent to 0–3 kHz at
    /// `Ω/2π = 50 kHz`; no pulse-area error.
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            delta: DeltaSpec::Uniform { max: DEFAULT_DELTA_MAX_HZ / DEFAULT_RABI_HZ },
            offres: None,
            rabi_hz: DEFAULT_RABI_HZ,
        }
    }
}

impl NoiseModel {
    /// No errors at all.
    pub fn ideal() -> Self {
        Self {
            epsilon: 0.0,
            delta: DeltaSpec::Fixed { value: 0.0 },
            offres: None,
            rabi_hz: DEFAULT_RABI_HZ,
        }
    }

    /// Pure pulse-area error.
    pub fn amplitude_only(epsilon: f64) -> Self {
        Self { epsilon, ..Self::ideal() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= -1.0 {
            return Err(Error::Domain(format!("epsilon must be > -1, got {}", self.epsilon)));
        }
        match self.delta {
            DeltaSpec::Fixed { value } if !value.is_finite() => {
                return Err(Error::Domain("delta must be finite".into()));
            }
            DeltaSpec::Uniform { max } if !(max.is_finite() && max >= 0.0) => {
                return Err(Error::Domain(format!("delta max must be >= 0, got {max}")));
            }
            _ => {}
        }
        if !(self.rabi_hz.is_finite() && self.rabi_hz > 0.0) {
            return Err(Error::Domain(format!("rabi frequency must be > 0, got {}", self.rabi_hz)));
        }
        if let Some(off) = &self.offres {
            if ![off.amp1, off.amp2, off.delta_prime_ratio].iter().all(|v| v.is_finite()) {
                return Err(Error::Domain("off-resonant parameters must be finite".into()));
            }
            if off.delta_prime_ratio == 0.0 {
                return Err(Error::Domain("off-resonant detuning must be nonzero".into()));
            }
            for spec in [off.phi1, off.phi2] {
                if let PhaseSpec::Fixed { value } = spec {
                    if !value.is_finite() {
                        return Err(Error::Domain("off-resonant phase must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        TAU * self.rabi_hz
    }

    /// True when some parameter must be redrawn for every pulse.
    pub fn resamples_per_pulse(&self) -> bool {
        self.offres
            .map(|o| o.phi1.is_per_pulse() || o.phi2.is_per_pulse())
            .unwrap_or(false)
    }
}

/// Realized random parameters for one sequence (or one pulse).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub delta: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// Realized off-resonant terms with `delta_prime` in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffResonantTerms {
    pub amp1: f64,
    pub amp2: f64,
    pub delta_prime: f64,
    pub phi1: f64,
    pub phi2: f64,
}

/// `H(t) = Ω/2 h(t)·σ` over `[0, duration]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveHamiltonian {
    /// Rabi frequency in rad/s.
    pub omega: f64,
    pub phi: f64,
    /// Static Z tilt relative to Ω.
    pub delta: f64,
    pub offres: Option<OffResonantTerms>,
    /// Seconds.
    pub duration: f64,
}

impl DriveHamiltonian {
    /// The drive realizing a physical pulse: duration `θ(1+ε)/Ω`.
    pub fn for_pulse(pulse: &Pulse, model: &NoiseModel, draw: &NoiseDraw) -> Self {
        let omega = model.omega();
        let offres = model.offres.map(|o| OffResonantTerms {
            amp1: o.amp1,
            amp2: o.amp2,
            delta_prime: o.delta_prime_ratio * omega,
            phi1: draw.phi1,
            phi2: draw.phi2,
        });
        Self {
            omega,
            phi: pulse.phi,
            delta: draw.delta,
            offres,
            duration: pulse.theta * (1.0 + model.epsilon) / omega,
        }
    }

    /// The real vector `h(t)` with `H(t) = Ω/2 h(t)·σ`.
    pub fn field(&self, t: f64) -> [f64; 3] {
        let mut h = [self.phi.cos(), self.phi.sin(), self.delta];
        if let Some(o) = &self.offres {
            let a1 = o.delta_prime * t + o.phi1;
            let a2 = 2.0 * o.delta_prime * t + o.phi2;
            h[0] += o.amp1 * a1.cos() + o.amp2 * a2.cos();
            h[1] += o.amp1 * a1.sin() + o.amp2 * a2.sin();
        }
        h
    }

    fn validate(&self) -> Result<()> {
        let mut vals = vec![self.omega, self.phi, self.delta, self.duration];
        if let Some(o) = &self.offres {
            vals.extend([o.amp1, o.amp2, o.delta_prime, o.phi1, o.phi2]);
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("drive parameters must be finite".into()));
        }
        if self.duration < 0.0 {
            return Err(Error::Domain(format!("negative duration {}", self.duration)));
        }
        if let Some(o) = &self.offres {
            if o.delta_prime == 0.0 && (o.amp1 != 0.0 || o.amp2 != 0.0) {
                return Err(Error::Domain("off-resonant detuning must be nonzero".into()));
            }
        }
        Ok(())
    }

    /// Fourier modes of `h(t)`: `h(t) = Σ c_k e^{i k δ′ t}`.
    fn modes(&self) -> Vec<Mode> {
        let mut modes = vec![Mode {
            k: 0,
            c: [
                C64::new(self.phi.cos(), 0.0),
                C64::new(self.phi.sin(), 0.0),
                C64::new(self.delta, 0.0),
            ],
        }];
        if let Some(o) = &self.offres {
            for (k, amp, phase) in [(1, o.amp1, o.phi1), (2, o.amp2, o.phi2)] {
                if amp == 0.0 {
                    continue;
                }
                // a cos(x) = a/2 (e^{ix} + e^{-ix}), a sin(x) = a/2i (e^{ix} - e^{-ix})
                let pos = C64::from_polar(0.5 * amp, phase);
                let neg = pos.conj();
                let i = C64::new(0.0, 1.0);
                modes.push(Mode { k, c: [pos, -i * pos, C64::new(0.0, 0.0)] });
                modes.push(Mode { k: -k, c: [neg, i * neg, C64::new(0.0, 0.0)] });
            }
        }
        modes
    }
}

#[derive(Clone, Copy, Debug)]
struct Mode {
    k: i32,
    c: [C64; 3],
}

/// `∫₀^T e^{iγt} dt`.
fn exp_integral(gamma: f64, t: f64) -> C64 {
    if gamma == 0.0 {
        C64::new(t, 0.0)
    } else {
        (C64::new(0.0, gamma * t).exp() - 1.0) / C64::new(0.0, gamma)
    }
}

/// `∫₀^T e^{iαt₁} ∫₀^{t₁} e^{iβt₂} dt₂ dt₁`, with `α = kδ′` and `β = lδ′`.
fn nested_exp_integral(k: i32, l: i32, delta_prime: f64, t: f64) -> C64 {
    let alpha = f64::from(k) * delta_prime;
    let beta = f64::from(l) * delta_prime;
    if l == 0 {
        if k == 0 {
            return C64::new(0.5 * t * t, 0.0);
        }
        let e = C64::new(0.0, alpha * t).exp();
        return e * t / C64::new(0.0, alpha) + (e - 1.0) / (alpha * alpha);
    }
    let sum = if k + l == 0 { 0.0 } else { alpha + beta };
    (exp_integral(sum, t) - exp_integral(alpha, t)) / C64::new(0.0, beta)
}

fn cross(a: &[C64; 3], b: &[C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rotation vector `r` of the second-order Magnus exponent, `U ≈ exp(-i r·σ/2)`.
///
/// With `H = Ω/2 h·σ` the first term is `Ω ∫h`, and since
/// `[a·σ, b·σ] = 2i (a×b)·σ` the second is `Ω²/2 ∫∫_{t₂<t₁} h(t₁)×h(t₂)`.
fn magnus2_rotation_vector(h: &DriveHamiltonian) -> [f64; 3] {
    let t = h.duration;
    let dp = h.offres.map(|o| o.delta_prime).unwrap_or(0.0);
    let modes = h.modes();

    let mut first = [0.0; 3];
    for m in &modes {
        let e = exp_integral(f64::from(m.k) * dp, t);
        for (acc, c) in first.iter_mut().zip(&m.c) {
            *acc += (c * e).re;
        }
    }

    let mut second = [0.0; 3];
    for a in &modes {
        for b in &modes {
            if a.k == 0 && b.k == 0 {
                continue;
            }
            let j = nested_exp_integral(a.k, b.k, dp, t);
            for (acc, c) in second.iter_mut().zip(cross(&a.c, &b.c)) {
                *acc += (c * j).re;
            }
        }
    }

    let w = h.omega;
    [
        w * first[0] + 0.5 * w * w * second[0],
        w * first[1] + 0.5 * w * w * second[1],
        w * first[2] + 0.5 * w * w * second[2],
    ]
}

/// `exp(Ω₁ + Ω₂)` for the drive over its duration.
pub fn magnus2_propagator(h: &DriveHamiltonian) -> Result<Unitary2> {
    h.validate()?;
    if h.duration == 0.0 {
        return Ok(Unitary2::identity());
    }
    pauli_axis_unitary(1.0, magnus2_rotation_vector(h))
}

/// Time-ordered product of `exp(-i H(t_k) Δt)` at step midpoints.
pub fn integrator_propagator(h: &DriveHamiltonian, steps: usize) -> Result<Unitary2> {
    h.validate()?;
    if steps == 0 {
        return Err(Error::Domain("integrator needs at least one step".into()));
    }
    let dt = h.duration / steps as f64;
    let mut u = Unitary2::identity();
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let step = pauli_axis_unitary(h.omega * dt, h.field(t))?;
        u = step.mul_raw(&u);
    }
    Ok(u.reunitarize())
}

/// Z tilt of the effective rotation axis of the Magnus propagator, measured
/// in the frame of the drive phase: `n_z / |n_xy|`, with the axis oriented
/// along `+σ_φ`.
pub fn effective_delta(h: &DriveHamiltonian) -> Result<f64> {
    let tol = 1e-12;
    let u = magnus2_propagator(h)?;
    let (_, n) = u.rotation_axis_angle(tol).ok_or(Error::UndefinedAxis { tol })?;
    let (s, c) = h.phi.sin_cos();
    let mut par = n[0] * c + n[1] * s;
    let perp = -n[0] * s + n[1] * c;
    let mut z = n[2];
    if par < 0.0 {
        par = -par;
        z = -z;
    }
    let inplane = par.hypot(perp);
    if inplane <= tol {
        return Err(Error::UndefinedAxis { tol });
    }
    Ok(z / inplane)
}

/// `exp[-i/2 θ(1+ε)(σ_φ + δZ)]` for drive pulses; frame updates are exact Z
/// rotations with no error applied.
pub fn propagator_closed_form(pulse: &Pulse, model: &NoiseModel, delta: f64) -> Result<Unitary2> {
    match pulse.kind {
        PulseKind::FrameUpdate => Ok(z_rotation(pulse.theta)),
        PulseKind::PhysicalDrive => pauli_axis_unitary(
            pulse.theta * (1.0 + model.epsilon),
            [pulse.phi.cos(), pulse.phi.sin(), delta],
        ),
    }
}

/// Noisy propagator under the configured model: closed form without
/// off-resonant terms, second-order Magnus with them.
pub fn noisy_propagator(pulse: &Pulse, model: &NoiseModel, draw: &NoiseDraw) -> Result<Unitary2> {
    match (pulse.kind, &model.offres) {
        (PulseKind::FrameUpdate, _) | (_, None) => propagator_closed_form(pulse, model, draw.delta),
        (PulseKind::PhysicalDrive, Some(_)) => {
            magnus2_propagator(&DriveHamiltonian::for_pulse(pulse, model, draw))
        }
    }
}

/// Phase draw helper: maps a uniform `[0, 1)` variate to `[0, 2π)` unless fixed.
pub fn resolve_phase(spec: PhaseSpec, unit: f64) -> f64 {
    match spec {
        PhaseSpec::Fixed { value } => value,
        PhaseSpec::PerSequence | PhaseSpec::PerPulse => unit * 2.0 * PI,
    }
}
