//! Randomized-benchmarking experiments.
//!
//! A sequence of length `L` is `L` uniformly drawn Cliffords followed by the
//! inversion gate that ideally maps `|0⟩` to a randomly chosen target basis
//! state. Every driven pulse of every Clifford, inversion gate included, is
//! expanded through the compensation scheme and replaced by its noisy
//! propagator. The survival probability is `|⟨target|U|0⟩|²`, optionally
//! sampled with binomial shot noise.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{clifford_table, sample_sequence, CliffordGate, Target, GROUP_SIZE};
use crate::error::{Error, Result};
use crate::fit::{aggregate, fit_decay, DecayFit, SpamInit, SurvivalSample};
use crate::noise::{noisy_propagator, resolve_phase, DeltaSpec, NoiseDraw, NoiseModel};
use crate::pulses::{expand, CompensationScheme, Pulse, PulseKind, SchemeKind};
use crate::rng::{repeat_seed, sequence_stream, Purpose};
use crate::su2::{apply, BlochState, Unitary2};

pub const DEFAULT_LENGTHS: [usize; 11] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000];
pub const DEFAULT_SEQUENCES_PER_LENGTH: usize = 20;
pub const DEFAULT_SHOTS: u32 = 800;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// Survival is `Binomial(shots, P) / shots`.
    #[default]
    Sampled,
    /// Survival is `P` itself.
    Exact,
}

/// Treatment of the identity Clifford under B2/PD6.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityPolicy {
    /// Expand as a zero-angle target where the scheme defines one.
    #[default]
    Expand,
    /// The identity is a no-op.
    Skip,
}

/// Realization of the Z tokens in the Clifford table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZGateMode {
    /// Error-free frame updates.
    #[default]
    Frame,
    /// `Rz(θ) = R(π/2, 0) R(θ, π/2) R(π/2, π)`, three driven pulses.
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RBExperiment {
    pub lengths: Vec<usize>,
    pub sequences_per_length: usize,
    pub shots: u32,
    pub scheme: SchemeKind,
    pub noise: NoiseModel,
    pub seed: u64,
    pub measurement: MeasurementMode,
    pub identity: IdentityPolicy,
    pub z_gates: ZGateMode,
}

impl Default for RBExperiment {
    fn default() -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            sequences_per_length: DEFAULT_SEQUENCES_PER_LENGTH,
            shots: DEFAULT_SHOTS,
            scheme: SchemeKind::B2,
            noise: NoiseModel::default(),
            seed: 0,
            measurement: MeasurementMode::Sampled,
            identity: IdentityPolicy::Expand,
            z_gates: ZGateMode::Frame,
        }
    }
}

impl RBExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::InvalidExperiment("no sequence lengths".into()));
        }
        if self.lengths[0] < 1 {
            return Err(Error::InvalidExperiment("lengths must be >= 1".into()));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidExperiment("lengths must be strictly increasing".into()));
        }
        if self.lengths.iter().any(|&l| l > u32::MAX as usize) {
            return Err(Error::InvalidExperiment("length too large".into()));
        }
        if self.sequences_per_length < 2 {
            return Err(Error::InvalidExperiment("need at least 2 sequences per length".into()));
        }
        if self.shots == 0 {
            return Err(Error::InvalidExperiment("shots must be >= 1".into()));
        }
        self.noise.validate()
    }

    /// Identifies one sequence of the experiment.
    pub fn specs(&self) -> Vec<SequenceSpec> {
        self.lengths
            .iter()
            .flat_map(|&length| {
                (0..self.sequences_per_length).map(move |sequence_id| SequenceSpec { length, sequence_id })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceSpec {
    pub length: usize,
    pub sequence_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub length: usize,
    pub sequence_id: usize,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub delta_draw: f64,
    pub target: Target,
    pub survival: f64,
    pub shots: u32,
    /// The noisy `|⟨target|U|0⟩|²` before shot sampling.
    pub probability: f64,
    pub clifford_indices: Vec<usize>,
    pub inversion_index: usize,
}

impl SurvivalSample for SequenceRecord {
    fn length(&self) -> usize {
        self.length
    }
    fn survival(&self) -> f64 {
        self.survival
    }
    fn shots(&self) -> u32 {
        self.shots
    }
}

/// Flat CSV row: `L, sequence_id, scheme, epsilon, delta_draw, target, survival, shots`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    #[serde(rename = "L")]
    pub length: usize,
    pub sequence_id: usize,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub delta_draw: f64,
    pub target: u8,
    pub survival: f64,
    pub shots: u32,
}

impl From<&SequenceRecord> for RecordRow {
    fn from(r: &SequenceRecord) -> Self {
        Self {
            length: r.length,
            sequence_id: r.sequence_id,
            scheme: r.scheme,
            epsilon: r.epsilon,
            delta_draw: r.delta_draw,
            target: r.target.bit(),
            survival: r.survival,
            shots: r.shots,
        }
    }
}

impl SurvivalSample for RecordRow {
    fn length(&self) -> usize {
        self.length
    }
    fn survival(&self) -> f64 {
        self.survival
    }
    fn shots(&self) -> u32 {
        self.shots
    }
}

pub fn write_records_csv<W: Write>(records: &[SequenceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<RecordRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Per-gate pulse lists after scheme expansion, in temporal order.
#[derive(Clone, Debug)]
pub struct CompiledGates {
    pulses: Vec<Vec<Pulse>>,
}

impl CompiledGates {
    pub fn new(scheme: SchemeKind, identity: IdentityPolicy, z_gates: ZGateMode) -> Result<Self> {
        let scheme = CompensationScheme::from(scheme);
        let pulses = clifford_table()
            .gates
            .iter()
            .map(|g| compile_gate(g, &scheme, identity, z_gates))
            .collect::<Result<_>>()?;
        Ok(Self { pulses })
    }

    pub fn for_experiment(exp: &RBExperiment) -> Result<Self> {
        Self::new(exp.scheme, exp.identity, exp.z_gates)
    }

    /// Expanded pulses for a 1-based gate index.
    pub fn gate(&self, index: usize) -> &[Pulse] {
        &self.pulses[index - 1]
    }
}

fn compile_gate(
    gate: &CliffordGate,
    scheme: &CompensationScheme,
    identity: IdentityPolicy,
    z_gates: ZGateMode,
) -> Result<Vec<Pulse>> {
    if gate.decomposition.is_empty() {
        return Ok(match (identity, scheme) {
            // B2 with θ_t = 0 is a 4π correction block.
            (IdentityPolicy::Expand, CompensationScheme::B2) => {
                expand(Pulse::drive(0.0, 0.0), scheme)?.pulses
            }
            // No palindromic table exists for θ_t = 0.
            _ => Vec::new(),
        });
    }
    let mut out = Vec::new();
    for pulse in &gate.decomposition {
        match (pulse.kind, z_gates) {
            (PulseKind::FrameUpdate, ZGateMode::Frame) => out.push(*pulse),
            (PulseKind::FrameUpdate, ZGateMode::Physical) => {
                for p in physical_z(pulse.theta) {
                    out.extend(expand(p, scheme)?.pulses);
                }
            }
            (PulseKind::PhysicalDrive, _) => out.extend(expand(*pulse, scheme)?.pulses),
        }
    }
    Ok(out)
}

/// `Rz(θ)` as driven pulses in temporal order.
pub fn physical_z(theta: f64) -> [Pulse; 3] {
    use std::f64::consts::{FRAC_PI_2, PI};
    [
        Pulse::drive(FRAC_PI_2, PI),
        Pulse::drive(theta, FRAC_PI_2),
        Pulse::drive(FRAC_PI_2, 0.0),
    ]
}

fn draw_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> NoiseDraw {
    // Always consume three variates so the stream layout is fixed.
    let (u_delta, u1, u2): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let delta = match model.delta {
        DeltaSpec::Fixed { value } => value,
        DeltaSpec::Uniform { max } => u_delta * max,
    };
    let (phi1, phi2) = match &model.offres {
        Some(o) => (resolve_phase(o.phi1, u1), resolve_phase(o.phi2, u2)),
        None => (0.0, 0.0),
    };
    NoiseDraw { delta, phi1, phi2 }
}

/// Noisy propagator of a gate-index sequence (first applied first) with one
/// noise realization shared by every pulse.
pub fn noisy_sequence_unitary(
    gates: &[usize],
    noise: &NoiseModel,
    compiled: &CompiledGates,
    draw: &NoiseDraw,
) -> Result<Unitary2> {
    let mut cache: [Option<Unitary2>; GROUP_SIZE] = [None; GROUP_SIZE];
    let mut u = Unitary2::identity();
    for &g in gates {
        let gate_u = match cache[g - 1] {
            Some(gu) => gu,
            None => {
                let mut gu = Unitary2::identity();
                for pulse in compiled.gate(g) {
                    gu = noisy_propagator(pulse, noise, draw)? * gu;
                }
                cache[g - 1] = Some(gu);
                gu
            }
        };
        u = gate_u * u;
    }
    Ok(u)
}

/// Noiseless-measurement survival `|⟨target|U|0⟩|²` for explicit gates.
pub fn survival_probability(
    gates: &[usize],
    target: Target,
    noise: &NoiseModel,
    compiled: &CompiledGates,
    draw: &NoiseDraw,
) -> Result<f64> {
    let u = noisy_sequence_unitary(gates, noise, compiled, draw)?;
    Ok(target.probability(&apply(&u, &BlochState::ZERO)).clamp(0.0, 1.0))
}

/// Runs one sequence with shot stream 0.
pub fn run_sequence(spec: SequenceSpec, exp: &RBExperiment, compiled: &CompiledGates) -> Result<SequenceRecord> {
    run_sequence_with_shot_stream(spec, exp, compiled, 0)
}

/// Runs one sequence; `shot_stream` selects an independent shot-noise stream
/// while leaving the gates and noise draws unchanged.
pub fn run_sequence_with_shot_stream(
    spec: SequenceSpec,
    exp: &RBExperiment,
    compiled: &CompiledGates,
    shot_stream: u64,
) -> Result<SequenceRecord> {
    let SequenceSpec { length, sequence_id } = spec;
    let table = clifford_table();

    let mut gate_rng = sequence_stream(exp.seed, Purpose::Gates, 0, length, sequence_id);
    let indices = sample_sequence(length, &mut gate_rng);
    let target = if gate_rng.random_bool(0.5) { Target::One } else { Target::Zero };
    let inversion = table.inversion_gate(&indices, target).index;

    let mut noise_rng = sequence_stream(exp.seed, Purpose::Noise, 0, length, sequence_id);
    let draw = draw_noise(&exp.noise, &mut noise_rng);

    let gates: Vec<usize> = indices.iter().copied().chain(std::iter::once(inversion)).collect();
    let total = if exp.noise.resamples_per_pulse() {
        let offres = exp.noise.offres.expect("per-pulse resampling needs off-resonant terms");
        let mut u = Unitary2::identity();
        for &g in &gates {
            for pulse in compiled.gate(g) {
                let mut pulse_draw = draw;
                if pulse.is_physical() {
                    let (u1, u2): (f64, f64) = (noise_rng.random(), noise_rng.random());
                    if offres.phi1.is_per_pulse() {
                        pulse_draw.phi1 = resolve_phase(offres.phi1, u1);
                    }
                    if offres.phi2.is_per_pulse() {
                        pulse_draw.phi2 = resolve_phase(offres.phi2, u2);
                    }
                }
                u = noisy_propagator(pulse, &exp.noise, &pulse_draw)? * u;
            }
        }
        u
    } else {
        noisy_sequence_unitary(&gates, &exp.noise, compiled, &draw)?
    };

    let probability = target
        .probability(&apply(&total, &BlochState::ZERO))
        .clamp(0.0, 1.0);
    let survival = match exp.measurement {
        MeasurementMode::Exact => probability,
        MeasurementMode::Sampled => {
            let mut shot_rng = sequence_stream(exp.seed, Purpose::Shots, shot_stream, length, sequence_id);
            let binom = Binomial::new(u64::from(exp.shots), probability)
                .map_err(|e| Error::Domain(format!("binomial: {e}")))?;
            binom.sample(&mut shot_rng) as f64 / f64::from(exp.shots)
        }
    };

    Ok(SequenceRecord {
        length,
        sequence_id,
        scheme: exp.scheme,
        epsilon: exp.noise.epsilon,
        delta_draw: draw.delta,
        target,
        survival,
        shots: exp.shots,
        probability,
        clifford_indices: indices,
        inversion_index: inversion,
    })
}

/// All `|lengths| × sequences_per_length` records, ordered by length then id.
pub fn run_experiment(exp: &RBExperiment) -> Result<Vec<SequenceRecord>> {
    exp.validate()?;
    let compiled = CompiledGates::for_experiment(exp)?;
    exp.specs()
        .into_par_iter()
        .map(|spec| run_sequence(spec, exp, &compiled))
        .collect()
}

/// One row of an amplitude-error sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub scheme: SchemeKind,
    pub repeat: u64,
    pub avg_error: Option<f64>,
    pub stderr: Option<f64>,
    /// `ok`, or the reason the row is flagged.
    pub status: String,
    #[serde(skip)]
    pub fit: Option<DecayFit>,
}

/// Runs and fits every `(ε, scheme, repeat)` combination. Fit problems are
/// reported in the row status rather than aborting the sweep.
pub fn epsilon_sweep(
    base: &RBExperiment,
    epsilons: &[f64],
    schemes: &[SchemeKind],
    repeats: u64,
    spam: SpamInit,
) -> Result<Vec<SweepRow>> {
    for &eps in epsilons {
        if !eps.is_finite() || eps <= -1.0 {
            return Err(Error::Domain(format!("epsilon must be > -1, got {eps}")));
        }
    }
    let mut rows = Vec::with_capacity(epsilons.len() * schemes.len() * repeats as usize);
    for repeat in 0..repeats {
        for &epsilon in epsilons {
            for &scheme in schemes {
                let exp = RBExperiment {
                    scheme,
                    seed: repeat_seed(base.seed, repeat),
                    noise: NoiseModel { epsilon, ..base.noise },
                    ..base.clone()
                };
                let records = run_experiment(&exp)?;
                let fitted = aggregate(&records).and_then(|aggs| fit_decay(&aggs, spam));
                let row = match fitted {
                    Ok(fit) => SweepRow {
                        epsilon,
                        scheme,
                        repeat,
                        avg_error: Some(fit.avg_error),
                        stderr: Some(fit.stderr_avg_error),
                        status: fit.flag.clone().unwrap_or_else(|| "ok".into()),
                        fit: Some(fit),
                    },
                    Err(e) => SweepRow {
                        epsilon,
                        scheme,
                        repeat,
                        avg_error: None,
                        stderr: None,
                        status: format!("fit-failure: {e}"),
                        fit: None,
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
