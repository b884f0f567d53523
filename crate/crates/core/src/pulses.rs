//! Target rotations and their composite-pulse expansions.
//!
//! Sequences are stored in temporal order: element 0 is applied first. The
//! operator products of the compensation formulas are read with the rightmost
//! factor acting first, so the correction block precedes the target pulse.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::su2::{pauli_axis_unitary, z_rotation, Unitary2};

/// Angles closer than this are treated as the same table key.
const TABLE_KEY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseKind {
    /// A driven rotation about an axis in the X-Y plane.
    PhysicalDrive,
    /// A zero-duration Z rotation realized by advancing the phase reference.
    FrameUpdate,
}

/// One rotation `R(θ, φ) = exp(-i θ/2 (cos φ X + sin φ Y))`, or for a frame
/// update a Z rotation by `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub theta: f64,
    pub phi: f64,
    pub kind: PulseKind,
}

impl Pulse {
    /// A physical drive pulse. Negative angles become `(|θ|, φ + π)`.
    pub fn drive(theta: f64, phi: f64) -> Self {
        if theta < 0.0 {
            Self { theta: -theta, phi: phi + PI, kind: PulseKind::PhysicalDrive }
        } else {
            Self { theta, phi, kind: PulseKind::PhysicalDrive }
        }
    }

    pub fn frame(theta: f64) -> Self {
        Self { theta, phi: 0.0, kind: PulseKind::FrameUpdate }
    }

    pub fn is_physical(&self) -> bool {
        self.kind == PulseKind::PhysicalDrive
    }

    /// Error-free propagator.
    pub fn ideal(&self) -> Unitary2 {
        match self.kind {
            PulseKind::FrameUpdate => z_rotation(self.theta),
            PulseKind::PhysicalDrive => {
                pauli_axis_unitary(self.theta, [self.phi.cos(), self.phi.sin(), 0.0])
                    .expect("pulse angles are finite")
            }
        }
    }
}

/// Phase tables for palindromic sequences, keyed by target angle.
///
/// Each entry lists `n` phases; the expanded sequence uses `2n` correction
/// π-pulses with phases `k = 1..n` followed by `k = n..1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalindromicTable {
    pub order: usize,
    pub entries: Vec<(f64, Vec<f64>)>,
}

impl PalindromicTable {
    /// Six-phase table for targets π and π/2.
    pub fn pd6() -> Self {
        Self {
            order: 6,
            entries: vec![
                (PI, vec![0.38266, -2.51430, -1.75192, 0.05941, 2.67572, 0.39344]),
                (PI / 2.0, vec![0.34769, -3.06979, 1.55852, -0.70890, 3.09692, -0.62174]),
            ],
        }
    }

    pub fn phases(&self, theta_t: f64) -> Result<&[f64]> {
        self.entries
            .iter()
            .find(|(key, _)| (key - theta_t).abs() < TABLE_KEY_TOL)
            .map(|(_, phases)| phases.as_slice())
            .ok_or(Error::UnsupportedTarget { theta: theta_t })
    }

    /// Adds or replaces the phases for one target angle.
    pub fn insert(&mut self, theta_t: f64, phases: Vec<f64>) -> Result<()> {
        if phases.len() != self.order {
            return Err(Error::Domain(format!(
                "expected {} phases, got {}",
                self.order,
                phases.len()
            )));
        }
        self.entries.retain(|(key, _)| (key - theta_t).abs() >= TABLE_KEY_TOL);
        self.entries.push((theta_t, phases));
        Ok(())
    }
}

/// The six PD6 phases for target angle π or π/2.
pub fn pd6_table(theta_t: f64) -> Result<[f64; 6]> {
    let table = PalindromicTable::pd6();
    let phases = table.phases(theta_t)?;
    let mut out = [0.0; 6];
    out.copy_from_slice(phases);
    Ok(out)
}

/// `arccos(-θ_t / 4π)`.
pub fn b2_phase(theta_t: f64) -> Result<f64> {
    let arg = -theta_t / (4.0 * PI);
    if !arg.is_finite() || arg.abs() > 1.0 {
        return Err(Error::Domain(format!("b2 phase needs |theta| <= 4π, got {theta_t}")));
    }
    Ok(arg.acos())
}

/// Name-only view of a scheme, used in configs and record files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Primitive,
    B2,
    Pd6,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Primitive, SchemeKind::B2, SchemeKind::Pd6];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Primitive => "primitive",
            SchemeKind::B2 => "b2",
            SchemeKind::Pd6 => "pd6",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "primitive" => Ok(SchemeKind::Primitive),
            "b2" | "bb1" => Ok(SchemeKind::B2),
            "pd6" => Ok(SchemeKind::Pd6),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompensationScheme {
    Primitive,
    B2,
    Palindromic(PalindromicTable),
}

impl CompensationScheme {
    pub fn pd6() -> Self {
        CompensationScheme::Palindromic(PalindromicTable::pd6())
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            CompensationScheme::Primitive => SchemeKind::Primitive,
            CompensationScheme::B2 => SchemeKind::B2,
            CompensationScheme::Palindromic(_) => SchemeKind::Pd6,
        }
    }
}

impl From<SchemeKind> for CompensationScheme {
    fn from(kind: SchemeKind) -> Self {
        match kind {
            SchemeKind::Primitive => CompensationScheme::Primitive,
            SchemeKind::B2 => CompensationScheme::B2,
            SchemeKind::Pd6 => CompensationScheme::pd6(),
        }
    }
}

/// Pulses in temporal order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Sum of physical rotation angles.
    pub fn total_angle(&self) -> f64 {
        self.pulses.iter().filter(|p| p.is_physical()).map(|p| p.theta).sum()
    }

    /// Error-free product, later pulses on the left.
    pub fn ideal_product(&self) -> Unitary2 {
        self.pulses
            .iter()
            .fold(Unitary2::identity(), |acc, p| p.ideal() * acc)
    }
}

/// Expands one target pulse under a compensation scheme.
pub fn expand(target: Pulse, scheme: &CompensationScheme) -> Result<PulseSequence> {
    if target.kind == PulseKind::FrameUpdate {
        return Ok(PulseSequence { pulses: vec![target] });
    }
    let target = Pulse::drive(target.theta, target.phi);
    let (theta_t, phi_t) = (target.theta, target.phi);
    let pulses = match scheme {
        CompensationScheme::Primitive => vec![target],
        CompensationScheme::B2 => {
            let phi_b2 = b2_phase(theta_t)?;
            vec![
                Pulse::drive(PI, phi_t + phi_b2),
                Pulse::drive(2.0 * PI, phi_t + 3.0 * phi_b2),
                Pulse::drive(PI, phi_t + phi_b2),
                target,
            ]
        }
        CompensationScheme::Palindromic(table) => {
            let phases = table.phases(theta_t)?;
            phases
                .iter()
                .chain(phases.iter().rev())
                .map(|&phase| Pulse::drive(PI, phi_t + phase))
                .chain(std::iter::once(target))
                .collect()
        }
    };
    Ok(PulseSequence { pulses })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::su2::fidelity;

    #[test]
    fn b2_phase_values() {
        assert!((b2_phase(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((b2_phase(PI).unwrap() - 1.823476582).abs() < 1e-9);
        assert!((b2_phase(FRAC_PI_2).unwrap() - 1.696124158).abs() < 1e-9);
        assert!(b2_phase(4.0 * PI + 0.1).is_err());
        assert!(b2_phase(-4.0 * PI - 0.1).is_err());
    }

    #[test]
    fn pd6_table_entries() {
        assert_eq!(pd6_table(PI).unwrap()[0], 0.38266);
        assert_eq!(pd6_table(FRAC_PI_2).unwrap()[5], -0.62174);
        assert_eq!(pd6_table(PI).unwrap().len(), 6);
        assert!(matches!(pd6_table(1.0), Err(Error::UnsupportedTarget { .. })));
    }

    #[test]
    fn b2_expansion_shape() {
        let seq = expand(Pulse::drive(PI, 0.0), &CompensationScheme::B2).unwrap();
        assert_eq!(seq.len(), 4);
        assert!((seq.total_angle() - 5.0 * PI).abs() < 1e-12);
        let phi_b2 = b2_phase(PI).unwrap();
        let thetas: Vec<f64> = seq.pulses.iter().map(|p| p.theta).collect();
        assert_eq!(thetas, vec![PI, 2.0 * PI, PI, PI]);
        assert_eq!(seq.pulses[1].phi, 3.0 * phi_b2);
        assert_eq!(seq.pulses[3].phi, 0.0);
    }

    #[test]
    fn pd6_expansion_shape() {
        let seq = expand(Pulse::drive(FRAC_PI_2, 0.0), &CompensationScheme::pd6()).unwrap();
        assert_eq!(seq.len(), 13);
        assert!((seq.total_angle() - (12.0 * PI + FRAC_PI_2)).abs() < 1e-12);
        for k in 0..6 {
            assert_eq!(seq.pulses[k].phi, seq.pulses[11 - k].phi);
        }
        assert_eq!(seq.pulses[12].theta, FRAC_PI_2);
    }

    #[test]
    fn pd6_rejects_unsupported_target() {
        let err = expand(Pulse::drive(1.0, 0.0), &CompensationScheme::pd6()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedTarget { .. }));
    }

    #[test]
    fn extended_table_allows_new_target() {
        let mut table = PalindromicTable::pd6();
        table.insert(1.0, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let seq = expand(Pulse::drive(1.0, 0.0), &CompensationScheme::Palindromic(table)).unwrap();
        assert_eq!(seq.len(), 13);
    }

    #[test]
    fn primitive_and_frame_pass_through() {
        let p = Pulse::drive(PI, 1.3);
        let seq = expand(p, &CompensationScheme::Primitive).unwrap();
        assert_eq!(seq.pulses, vec![p]);
        let z = Pulse::frame(FRAC_PI_2);
        assert_eq!(expand(z, &CompensationScheme::B2).unwrap().pulses, vec![z]);
    }

    #[test]
    fn negative_angles_normalized() {
        let p = Pulse::drive(-FRAC_PI_2, 0.2);
        assert_eq!(p.theta, FRAC_PI_2);
        assert!((p.phi - (0.2 + PI)).abs() < 1e-15);
        let direct = pauli_axis_unitary(-FRAC_PI_2, [0.2f64.cos(), 0.2f64.sin(), 0.0]).unwrap();
        assert!(fidelity(&p.ideal(), &direct) > 1.0 - 1e-15);
    }

    #[test]
    fn identity_target_under_b2_is_pure_correction_block() {
        let seq = expand(Pulse::drive(0.0, 0.0), &CompensationScheme::B2).unwrap();
        assert!((seq.total_angle() - 4.0 * PI).abs() < 1e-12);
        assert!(fidelity(&seq.ideal_product(), &Unitary2::identity()) > 1.0 - 1e-14);
    }

    #[test]
    fn scheme_names_round_trip() {
        for kind in SchemeKind::ALL {
            assert_eq!(kind.as_str().parse::<SchemeKind>().unwrap(), kind);
        }
        assert!("corpse".parse::<SchemeKind>().is_err());
    }
}
