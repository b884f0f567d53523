//! The 24-element single-qubit Clifford group as physical pulses.
//!
//! Each gate is defined by a label such as `"Z/2 & X"`. Tokens are applied
//! left to right in time. `X/2` is `R(π/2, 0)`, `Y/2` is `R(π/2, π/2)`, a
//! leading minus adds π to the phase, and the Z tokens are frame updates.
//!
//! The ideal unitary of each gate is built from textbook matrices for the
//! label tokens, independently of the pulse decomposition, so the audit in
//! [`CliffordTable::audit`] compares two separate routes.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::su2::{apply, fidelity, BlochState, Complex2x2, Unitary2, C64};
use crate::pulses::{Pulse, PulseSequence};

pub const GROUP_SIZE: usize = 24;

/// Fidelity tolerance used for "equal up to global phase".
const PHASE_EQ_TOL: f64 = 1e-10;

/// Gate labels in table order; index `k` is gate `k + 1`.
pub const LABELS: [&str; GROUP_SIZE] = [
    "I",
    "X",
    "Y",
    "Z",
    "X/2",
    "Y/2",
    "Z/2",
    "-X/2",
    "-Y/2",
    "-Z/2",
    "Z & X/2",
    "X/2 & Z",
    "Z/2 & X",
    "X & Z/2",
    "Z/2 & X/2",
    "Y/2 & Z/2",
    "X/2 & -Z/2",
    "Y/2 & Z",
    "-X/2 & Z/2",
    "-Z/2 & Y/2",
    "Z & Y/2",
    "-Z/2 & X/2",
    "X/2 & Z/2",
    "-Y/2 & -Z/2",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Zero,
    One,
}

impl Target {
    pub fn state(&self) -> BlochState {
        match self {
            Target::Zero => BlochState::ZERO,
            Target::One => BlochState::ONE,
        }
    }

    pub fn bit(&self) -> u8 {
        match self {
            Target::Zero => 0,
            Target::One => 1,
        }
    }

    /// `|⟨target|ψ⟩|²`.
    pub fn probability(&self, s: &BlochState) -> f64 {
        match self {
            Target::Zero => s.prob_zero(),
            Target::One => s.prob_one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffordGate {
    /// 1-based table index.
    pub index: usize,
    pub label: &'static str,
    /// Pulses in temporal order. Empty for the identity.
    pub decomposition: Vec<Pulse>,
    /// Canonical unitary from the label, defined up to global phase.
    pub ideal: Unitary2,
}

impl CliffordGate {
    /// Ideal product of the decomposition pulses.
    pub fn decomposition_product(&self) -> Unitary2 {
        PulseSequence { pulses: self.decomposition.clone() }.ideal_product()
    }

    /// Number of driven pulses.
    pub fn physical_pulses(&self) -> usize {
        self.decomposition.iter().filter(|p| p.is_physical()).count()
    }
}

fn token_pulse(token: &str) -> Option<Pulse> {
    Some(match token {
        "X" => Pulse::drive(PI, 0.0),
        "Y" => Pulse::drive(PI, FRAC_PI_2),
        "X/2" => Pulse::drive(FRAC_PI_2, 0.0),
        "Y/2" => Pulse::drive(FRAC_PI_2, FRAC_PI_2),
        "-X/2" => Pulse::drive(FRAC_PI_2, PI),
        "-Y/2" => Pulse::drive(FRAC_PI_2, -FRAC_PI_2),
        "Z" => Pulse::frame(PI),
        "Z/2" => Pulse::frame(FRAC_PI_2),
        "-Z/2" => Pulse::frame(-FRAC_PI_2),
        _ => return None,
    })
}

/// Textbook matrix for a label token: Paulis, `(I ∓ iP)/√2` for the half
/// turns, and `S = diag(1, i)` / `S†` for `±Z/2`.
fn token_matrix(token: &str) -> Option<Complex2x2> {
    let r = |x: f64| C64::new(x, 0.0);
    let half_turn = |p: Complex2x2, sign: f64| {
        Complex2x2::identity()
            .add(&p.scale(C64::new(0.0, -sign)))
            .scale(r(FRAC_1_SQRT_2))
    };
    Some(match token {
        "I" => Complex2x2::identity(),
        "X" => Complex2x2::pauli_x(),
        "Y" => Complex2x2::pauli_y(),
        "Z" => Complex2x2::pauli_z(),
        "X/2" => half_turn(Complex2x2::pauli_x(), 1.0),
        "-X/2" => half_turn(Complex2x2::pauli_x(), -1.0),
        "Y/2" => half_turn(Complex2x2::pauli_y(), 1.0),
        "-Y/2" => half_turn(Complex2x2::pauli_y(), -1.0),
        "Z/2" => Complex2x2::new(r(1.0), r(0.0), r(0.0), C64::new(0.0, 1.0)),
        "-Z/2" => Complex2x2::new(r(1.0), r(0.0), r(0.0), C64::new(0.0, -1.0)),
        _ => return None,
    })
}

fn tokens(label: &str) -> impl Iterator<Item = &str> {
    label.split('&').map(str::trim)
}

fn build_gate(index: usize, label: &'static str) -> CliffordGate {
    let decomposition = tokens(label)
        .filter(|t| *t != "I")
        .map(|t| token_pulse(t).unwrap_or_else(|| panic!("bad token {t} in {label}")))
        .collect();
    let ideal = tokens(label).fold(Complex2x2::identity(), |acc, t| {
        token_matrix(t).unwrap_or_else(|| panic!("bad token {t} in {label}")) * acc
    });
    CliffordGate {
        index,
        label,
        decomposition,
        ideal: Unitary2::new(ideal).expect("label matrices are unitary"),
    }
}

/// The 24 gates in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordTable {
    pub gates: Vec<CliffordGate>,
}

impl CliffordTable {
    pub fn standard() -> Self {
        Self {
            gates: LABELS
                .iter()
                .enumerate()
                .map(|(k, label)| build_gate(k + 1, label))
                .collect(),
        }
    }

    /// Gate by 1-based index.
    pub fn gate(&self, index: usize) -> &CliffordGate {
        &self.gates[index - 1]
    }

    /// Lowest-index gate `G` with `|⟨target| G U |0⟩|² = 1`, where `U` is
    /// the ideal product of `seq` (first element applied first).
    pub fn inversion_gate(&self, seq: &[usize], target: Target) -> &CliffordGate {
        let total = self.ideal_product(seq);
        let state = apply(&total, &BlochState::ZERO);
        self.gates
            .iter()
            .find(|g| target.probability(&apply(&g.ideal, &state)) > 1.0 - PHASE_EQ_TOL)
            .expect("the Clifford group is transitive on Pauli eigenstates")
    }

    /// Ideal product of a gate-index sequence.
    pub fn ideal_product(&self, seq: &[usize]) -> Unitary2 {
        seq.iter()
            .fold(Unitary2::identity(), |acc, &i| self.gate(i).ideal * acc)
    }

    /// Index of the gate equal to `u` up to global phase.
    pub fn find(&self, u: &Unitary2) -> Option<usize> {
        self.gates
            .iter()
            .find(|g| fidelity(&g.ideal, u) > 1.0 - PHASE_EQ_TOL)
            .map(|g| g.index)
    }

    /// Runs the closure, distinctness, Pauli-permutation and decomposition
    /// checks.
    pub fn audit(&self) -> AuditReport {
        let n = self.gates.len();
        let mut entries: Vec<GateAudit> = self
            .gates
            .iter()
            .map(|g| {
                let decomposition_fidelity = fidelity(&g.ideal, &g.decomposition_product());
                GateAudit {
                    index: g.index,
                    label: g.label.to_string(),
                    decomposition_fidelity,
                    permutes_paulis: pauli_action(&g.ideal).is_some(),
                    distinct: true,
                    has_inverse: false,
                    failures: Vec::new(),
                }
            })
            .collect();

        let mut closure_failures = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && fidelity(&self.gates[a].ideal, &self.gates[b].ideal) > 1.0 - PHASE_EQ_TOL {
                    entries[a].distinct = false;
                }
                let prod = self.gates[b].ideal * self.gates[a].ideal;
                match self.find(&prod) {
                    Some(1) => entries[a].has_inverse = true,
                    Some(_) => {}
                    None => closure_failures.push((self.gates[a].index, self.gates[b].index)),
                }
            }
        }

        for e in &mut entries {
            if n != GROUP_SIZE {
                e.failures.push(format!("table has {n} gates"));
            }
            if 1.0 - e.decomposition_fidelity > PHASE_EQ_TOL {
                e.failures.push(format!(
                    "decomposition infidelity {:e}",
                    1.0 - e.decomposition_fidelity
                ));
            }
            if !e.permutes_paulis {
                e.failures.push("does not permute signed Paulis".into());
            }
            if !e.distinct {
                e.failures.push("duplicate of another gate".into());
            }
            if !e.has_inverse {
                e.failures.push("no inverse in table".into());
            }
            let bad: Vec<usize> = closure_failures
                .iter()
                .filter(|(a, _)| *a == e.index)
                .map(|(_, b)| *b)
                .collect();
            if !bad.is_empty() {
                e.failures.push(format!("products with gates {bad:?} leave the table"));
            }
        }
        AuditReport { gates: entries }
    }
}

/// The shared standard table.
pub fn clifford_table() -> &'static CliffordTable {
    static TABLE: OnceLock<CliffordTable> = OnceLock::new();
    TABLE.get_or_init(CliffordTable::standard)
}

/// `L` independent uniform gate indices (1-based).
pub fn sample_sequence<R: Rng + ?Sized>(length: usize, rng: &mut R) -> Vec<usize> {
    (0..length).map(|_| rng.random_range(1..=GROUP_SIZE)).collect()
}

/// Image of `(X, Y, Z)` under `P ↦ U P U†` as signed axis indices
/// `(axis, sign)`, or `None` if some image is not a signed Pauli.
pub fn pauli_action(u: &Unitary2) -> Option<[(usize, i8); 3]> {
    let paulis = [Complex2x2::pauli_x(), Complex2x2::pauli_y(), Complex2x2::pauli_z()];
    let m = u.matrix();
    let mut out = [(0, 1); 3];
    for (slot, p) in out.iter_mut().zip(&paulis) {
        let image = *m * *p * m.adjoint();
        *slot = paulis.iter().enumerate().find_map(|(axis, q)| {
            if image.max_abs_diff(q) < 1e-10 {
                Some((axis, 1))
            } else if image.max_abs_diff(&q.scale(C64::new(-1.0, 0.0))) < 1e-10 {
                Some((axis, -1))
            } else {
                None
            }
        })?;
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateAudit {
    pub index: usize,
    pub label: String,
    pub decomposition_fidelity: f64,
    pub permutes_paulis: bool,
    pub distinct: bool,
    pub has_inverse: bool,
    pub failures: Vec<String>,
}

impl GateAudit {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub gates: Vec<GateAudit>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(GateAudit::passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &GateAudit> {
        self.gates.iter().filter(|g| !g.passed())
    }
}
