//! Versioned TOML experiment configuration.
//!
//! Physical quantities carry their unit in the key name (`rabi_hz`,
//! `max_hz`, `delta_prime_hz`, `value_rad`). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use rbsim::fit::SpamInit;
use rbsim::noise::{DeltaSpec, NoiseModel, OffResonant, PhaseSpec, DEFAULT_DELTA_MAX_HZ, DEFAULT_DELTA_PRIME_HZ, DEFAULT_RABI_HZ};
use rbsim::rb::{IdentityPolicy, MeasurementMode, ZGateMode, DEFAULT_LENGTHS, DEFAULT_SEQUENCES_PER_LENGTH, DEFAULT_SHOTS};
use rbsim::{RBExperiment, SchemeKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub scheme: SchemeKind,
    pub lengths: Vec<usize>,
    pub sequences_per_length: usize,
    pub shots: u32,
    pub measurement: MeasurementMode,
    pub identity: IdentityPolicy,
    pub z_gates: ZGateMode,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::B2,
            lengths: DEFAULT_LENGTHS.to_vec(),
            sequences_per_length: DEFAULT_SEQUENCES_PER_LENGTH,
            shots: DEFAULT_SHOTS,
            measurement: MeasurementMode::Sampled,
            identity: IdentityPolicy::Expand,
            z_gates: ZGateMode::Frame,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Fractional pulse-area error.
    pub epsilon: f64,
    pub rabi_hz: f64,
    pub detuning: Detuning,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offres: Option<OffResonantSection>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            rabi_hz: DEFAULT_RABI_HZ,
            detuning: Detuning::Uniform { max_hz: DEFAULT_DELTA_MAX_HZ },
            offres: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Detuning {
    Fixed { value_hz: f64 },
    /// Drawn once per sequence, uniform on `[0, max_hz]`.
    Uniform { max_hz: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffResonantSection {
    pub amp1: f64,
    pub amp2: f64,
    pub delta_prime_hz: f64,
    pub phi1: Phase,
    pub phi2: Phase,
}

impl Default for OffResonantSection {
    fn default() -> Self {
        Self {
            amp1: 2.0,
            amp2: 1.0,
            delta_prime_hz: DEFAULT_DELTA_PRIME_HZ,
            phi1: Phase::PerSequence,
            phi2: Phase::PerSequence,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Phase {
    Fixed { value_rad: f64 },
    PerSequence,
    PerPulse,
}

impl From<Phase> for PhaseSpec {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Fixed { value_rad } => PhaseSpec::Fixed { value: value_rad },
            Phase::PerSequence => PhaseSpec::PerSequence,
            Phase::PerPulse => PhaseSpec::PerPulse,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub spam_a0: f64,
    pub spam_b0: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let s = SpamInit::default();
        Self { spam_a0: s.a0, spam_b0: s.b0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub repeats: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: (-6..=6).map(|k| f64::from(k) / 10.0).collect(),
            schemes: SchemeKind::ALL.to_vec(),
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            experiment: ExperimentSection::default(),
            noise: NoiseSection::default(),
            fit: FitSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Schema {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema {
                path: "schema_version".into(),
                message: format!("unsupported schema version {}; expected {SCHEMA_VERSION}", cfg.schema_version),
            });
        }
        cfg.check_units()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check_units(&self) -> Result<(), CliError> {
        let bad = |path: &str, message: &str| CliError::Schema { path: path.into(), message: message.into() };
        if !(self.noise.rabi_hz.is_finite() && self.noise.rabi_hz > 0.0) {
            return Err(bad("noise.rabi_hz", "must be a positive frequency"));
        }
        if let Some(o) = &self.noise.offres {
            if !(o.delta_prime_hz.is_finite() && o.delta_prime_hz > 0.0) {
                return Err(bad("noise.offres.delta_prime_hz", "must be a positive frequency"));
            }
        }
        if self.sweep.repeats == 0 {
            return Err(bad("sweep.repeats", "must be >= 1"));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        let n = &self.noise;
        let delta = match n.detuning {
            Detuning::Fixed { value_hz } => DeltaSpec::Fixed { value: value_hz / n.rabi_hz },
            Detuning::Uniform { max_hz } => DeltaSpec::Uniform { max: max_hz / n.rabi_hz },
        };
        let offres = n.offres.map(|o| OffResonant {
            amp1: o.amp1,
            amp2: o.amp2,
            delta_prime_ratio: o.delta_prime_hz / n.rabi_hz,
            phi1: o.phi1.into(),
            phi2: o.phi2.into(),
        });
        NoiseModel { epsilon: n.epsilon, delta, offres, rabi_hz: n.rabi_hz }
    }

    pub fn experiment(&self) -> RBExperiment {
        let e = &self.experiment;
        RBExperiment {
            lengths: e.lengths.clone(),
            sequences_per_length: e.sequences_per_length,
            shots: e.shots,
            scheme: e.scheme,
            noise: self.noise_model(),
            seed: self.seed,
            measurement: e.measurement,
            identity: e.identity,
            z_gates: e.z_gates,
        }
    }

    pub fn spam(&self) -> SpamInit {
        SpamInit { a0: self.fit.spam_a0, b0: self.fit.spam_b0 }
    }
}
