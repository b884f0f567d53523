//! Exact 2×2 complex linear algebra for a single qubit.
//!
//! Propagators are carried as [`Unitary2`]. Rotations about arbitrary real
//! axes use the closed-form Pauli exponential
//! `exp(-i a/2 n·σ) = cos(a/2) I - i sin(a/2) n·σ`, so no general matrix
//! exponential is needed anywhere in the library.

use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Unitarity defect above which products are re-orthonormalized.
pub const REUNITARIZE_THRESHOLD: f64 = 1e-10;

/// A general complex 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex2x2 {
    pub m: [[C64; 2]; 2],
}

impl Complex2x2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn pauli_x() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Self::new(ZERO, C64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Self::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    /// `x X + y Y + z Z` for real coefficients.
    pub fn pauli_combination(v: [f64; 3]) -> Self {
        let [x, y, z] = v;
        Self::new(
            C64::new(z, 0.0),
            C64::new(x, -y),
            C64::new(x, y),
            C64::new(-z, 0.0),
        )
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.m;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (&self.m, &other.m);
        Self::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max-entry norm of `M M† - I`.
    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.adjoint()).max_abs_diff(&Self::identity())
    }

    /// Real coefficients `(c0, c1, c2, c3)` with `M = c0 I + i (c1 X + c2 Y + c3 Z)`
    /// when `M` is in `ℝ·SU(2)`; the imaginary residue is discarded.
    fn su2_coefficients(&self) -> [f64; 4] {
        let m = &self.m;
        let c0 = 0.5 * (m[0][0] + m[1][1]).re;
        let c3 = 0.5 * (m[0][0] - m[1][1]).im;
        let c1 = 0.5 * (m[0][1] + m[1][0]).im;
        let c2 = 0.5 * (m[0][1] - m[1][0]).re;
        [c0, c1, c2, c3]
    }
}

impl Mul for Complex2x2 {
    type Output = Complex2x2;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.m, &rhs.m);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// A 2×2 unitary propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2(Complex2x2);

impl Unitary2 {
    pub const fn identity() -> Self {
        Self(Complex2x2::identity())
    }

    /// Wraps a matrix after checking that it is finite and unitary to `1e-10`.
    pub fn new(m: Complex2x2) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let defect = m.unitarity_defect();
        if defect > REUNITARIZE_THRESHOLD {
            return Err(Error::Domain(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be unitary by construction.
    pub(crate) fn from_matrix_unchecked(m: Complex2x2) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Complex2x2 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Multiplies by a global phase `e^{iα}`.
    pub fn with_phase(&self, alpha: f64) -> Self {
        Self(self.0.scale(C64::from_polar(1.0, alpha)))
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.0.unitarity_defect()
    }

    /// Gram-Schmidt on the columns. Equivalent to the polar-decomposition
    /// correction to first order in the defect.
    pub fn reunitarize(&self) -> Self {
        let m = &self.0.m;
        let mut c0 = [m[0][0], m[1][0]];
        let mut c1 = [m[0][1], m[1][1]];
        let n0 = (c0[0].norm_sqr() + c0[1].norm_sqr()).sqrt();
        c0 = [c0[0] / n0, c0[1] / n0];
        let proj = c0[0].conj() * c1[0] + c0[1].conj() * c1[1];
        c1 = [c1[0] - proj * c0[0], c1[1] - proj * c0[1]];
        let n1 = (c1[0].norm_sqr() + c1[1].norm_sqr()).sqrt();
        c1 = [c1[0] / n1, c1[1] / n1];
        Self(Complex2x2::new(c0[0], c1[0], c0[1], c1[1]))
    }

    /// Product `self · rhs` without the re-unitarization policy.
    pub fn mul_raw(&self, rhs: &Self) -> Self {
        Self(self.0 * rhs.0)
    }

    /// Rotation angle `a ∈ [0, π]` and unit axis `n` with
    /// `U = e^{iγ} exp(-i a/2 n·σ)` (an SU(2) logarithm modulo global phase).
    /// Callers that need a particular axis orientation may use the equivalent
    /// pair `(2π - a, -n)`.
    ///
    /// Returns `None` when `U` is within `tol` of a multiple of the identity.
    pub fn rotation_axis_angle(&self, tol: f64) -> Option<(f64, [f64; 3])> {
        let det = self.0.det();
        let gamma = 0.5 * det.arg();
        let su = self.0.scale(C64::from_polar(1.0, -gamma));
        // su = cos(a/2) I - i sin(a/2) n·σ
        let [c, s1, s2, s3] = su.su2_coefficients();
        let (mut c, mut v) = (c, [-s1, -s2, -s3]);
        if c < 0.0 {
            c = -c;
            v = [-v[0], -v[1], -v[2]];
        }
        let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if s <= tol {
            return None;
        }
        let angle = 2.0 * s.atan2(c);
        Some((angle, [v[0] / s, v[1] / s, v[2] / s]))
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    /// Matrix product with re-unitarization when the defect exceeds
    /// [`REUNITARIZE_THRESHOLD`].
    fn mul(self, rhs: Self) -> Self {
        let out = self.mul_raw(&rhs);
        if out.unitarity_defect() > REUNITARIZE_THRESHOLD {
            out.reunitarize()
        } else {
            out
        }
    }
}

/// `exp(-i θ/2 axis·σ)`, i.e. `cos(a/2) I - i sin(a/2) n̂·σ` with
/// `a = θ‖axis‖` and `n̂ = axis/‖axis‖`. A zero axis gives the identity.
pub fn pauli_axis_unitary(theta: f64, axis: [f64; 3]) -> Result<Unitary2> {
    if !theta.is_finite() || axis.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite rotation: theta={theta}, axis={axis:?}"
        )));
    }
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm == 0.0 {
        return Ok(Unitary2::identity());
    }
    let half = 0.5 * theta * norm;
    let (s, c) = half.sin_cos();
    let n = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
    let m = Complex2x2::new(
        C64::new(c, -s * n[2]),
        C64::new(-s * n[1], -s * n[0]),
        C64::new(s * n[1], -s * n[0]),
        C64::new(c, s * n[2]),
    );
    Ok(Unitary2::from_matrix_unchecked(m))
}

/// Z rotation `diag(e^{-iθ/2}, e^{iθ/2})`.
pub fn z_rotation(theta: f64) -> Unitary2 {
    Unitary2::from_matrix_unchecked(Complex2x2::new(
        C64::from_polar(1.0, -0.5 * theta),
        ZERO,
        ZERO,
        C64::from_polar(1.0, 0.5 * theta),
    ))
}

/// `|Tr(U†V)|² / 4`.
pub fn fidelity(u: &Unitary2, v: &Unitary2) -> f64 {
    let t = (u.0.adjoint() * v.0).trace();
    (t.norm_sqr() / 4.0).clamp(0.0, 1.0)
}

/// `1 - fidelity(u, v)` evaluated as `sin²(a/2)` of the relative rotation
/// `U†V`, which keeps full relative precision for tiny errors.
pub fn infidelity(u: &Unitary2, v: &Unitary2) -> f64 {
    match u.adjoint().mul_raw(v).rotation_axis_angle(0.0) {
        Some((angle, _)) => (0.5 * angle).sin().powi(2),
        None => 0.0,
    }
}

/// A pure qubit state `c0|0⟩ + c1|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochState {
    pub c0: C64,
    pub c1: C64,
}

impl BlochState {
    pub const ZERO: BlochState = BlochState { c0: ONE, c1: ZERO };
    pub const ONE: BlochState = BlochState { c0: ZERO, c1: ONE };

    pub fn new(c0: C64, c1: C64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Domain("state has zero or non-finite norm".into()));
        }
        Ok(Self { c0: c0 / n, c1: c1 / n })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    pub fn prob_zero(&self) -> f64 {
        self.c0.norm_sqr()
    }

    pub fn prob_one(&self) -> f64 {
        self.c1.norm_sqr()
    }
}

/// `U|s⟩`, renormalized if the norm drifted by more than `1e-12`.
pub fn apply(u: &Unitary2, s: &BlochState) -> BlochState {
    let m = &u.0.m;
    let c0 = m[0][0] * s.c0 + m[0][1] * s.c1;
    let c1 = m[1][0] * s.c0 + m[1][1] * s.c1;
    let out = BlochState { c0, c1 };
    let n2 = out.norm_sqr();
    if (n2 - 1.0).abs() > 1e-12 {
        let n = n2.sqrt();
        BlochState { c0: c0 / n, c1: c1 / n }
    } else {
        out
    }
}
