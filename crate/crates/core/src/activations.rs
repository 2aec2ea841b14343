//! Complex activation functions and their Wirtinger derivative pairs.
//!
//! Every derivative routine returns `(∂f/∂z, ∂f/∂z̄)`, the ℝ-derivative and
//! the conjugate ℝ-derivative. A first-order perturbation then satisfies
//! `df = (∂f/∂z)·dz + (∂f/∂z̄)·conj(dz)`.
//!
//! `phase(0)` is taken as 0 so every function here is total.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complex::Complex;
use crate::error::Error;
use crate::linalg::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    Cardioid,
    Siglog,
    SeparableSigmoid,
    /// Only legal inside a real-valued network.
    RealRelu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Cardioid,
        ActivationKind::Siglog,
        ActivationKind::SeparableSigmoid,
        ActivationKind::RealRelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Cardioid => "cardioid",
            ActivationKind::Siglog => "siglog",
            ActivationKind::SeparableSigmoid => "separable-sigmoid",
            ActivationKind::RealRelu => "relu",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ActivationKind::Cardioid => 0,
            ActivationKind::Siglog => 1,
            ActivationKind::SeparableSigmoid => 2,
            ActivationKind::RealRelu => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "cardioid" => Ok(ActivationKind::Cardioid),
            "siglog" => Ok(ActivationKind::Siglog),
            "separable-sigmoid" | "sepsig" => Ok(ActivationKind::SeparableSigmoid),
            "relu" => Ok(ActivationKind::RealRelu),
            other => Err(Error::InvalidConfig(format!("unknown activation '{other}'"))),
        }
    }
}

/// `(cos ∠z, sin ∠z)` with the zero-phase convention at the origin.
#[inline]
fn unit_phase(z: Complex) -> (f64, f64) {
    let r = z.magnitude();
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (z.re / r, z.im / r)
    }
}

/// `½(1 + cos∠z)·z`: keeps the phase, gates the magnitude by the phase.
#[inline]
pub fn cardioid(z: Complex) -> Complex {
    let (c, _) = unit_phase(z);
    z.scale(0.5 * (1.0 + c))
}

/// `∂f/∂z = ½ + ½cos∠z + (i/4)sin∠z`, `∂f/∂z̄ = −(i/4)sin∠z · e^{2i∠z}`.
///
/// At `z = 0` the pair is `(1, 0)`, the limit along the positive real axis.
#[inline]
pub fn cardioid_derivatives(z: Complex) -> (Complex, Complex) {
    if z == Complex::ZERO {
        return (Complex::ONE, Complex::ZERO);
    }
    let (c, s) = unit_phase(z);
    let dz = Complex::new(0.5 + 0.5 * c, 0.25 * s);
    // e^{2iθ} stands in for z/z̄.
    let rot = Complex::new(c * c - s * s, 2.0 * s * c);
    let dzbar = Complex::new(0.0, -0.25 * s) * rot;
    (dz, dzbar)
}

/// `z / (1 + |z|)`.
#[inline]
pub fn siglog(z: Complex) -> Complex {
    z.scale(1.0 / (1.0 + z.magnitude()))
}

/// Quotient rule on `z/(1+√(z z̄))`:
/// `∂f/∂z = (2 + |z|) / (2(1+|z|)²)`, `∂f/∂z̄ = −z² / (2|z|(1+|z|)²)`.
#[inline]
pub fn siglog_derivatives(z: Complex) -> (Complex, Complex) {
    let r = z.magnitude();
    let d = (1.0 + r) * (1.0 + r);
    let dz = Complex::from((2.0 + r) / (2.0 * d));
    if r == 0.0 {
        return (dz, Complex::ZERO);
    }
    let dzbar = -(z * z).scale(1.0 / (2.0 * r * d));
    (dz, dzbar)
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn sigmoid_slope(t: f64) -> f64 {
    let s = sigmoid(t);
    s * (1.0 - s)
}

/// `g(re z) + i·g(im z)` with the logistic sigmoid `g`.
#[inline]
pub fn separable_sigmoid(z: Complex) -> Complex {
    Complex::new(sigmoid(z.re), sigmoid(z.im))
}

/// `∂f/∂z = ½(g'(x) + g'(y))`, `∂f/∂z̄ = ½(g'(x) − g'(y))`.
#[inline]
pub fn separable_sigmoid_derivatives(z: Complex) -> (Complex, Complex) {
    let gx = sigmoid_slope(z.re);
    let gy = sigmoid_slope(z.im);
    (Complex::from(0.5 * (gx + gy)), Complex::from(0.5 * (gx - gy)))
}

#[inline]
pub fn real_relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Subgradient 1 at the origin, matching the cardioid convention.
#[inline]
pub fn real_relu_derivative(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Activations a scalar type can host inside a network layer.
pub trait Activation: Scalar {
    fn supports(kind: ActivationKind) -> bool;

    /// Returns `(f(x), ∂f/∂z, ∂f/∂z̄)`.
    fn activate(kind: ActivationKind, x: Self) -> (Self, Self, Self);
}

impl Activation for Complex {
    fn supports(kind: ActivationKind) -> bool {
        kind != ActivationKind::RealRelu
    }

    #[inline]
    fn activate(kind: ActivationKind, z: Complex) -> (Complex, Complex, Complex) {
        match kind {
            ActivationKind::Cardioid => {
                let (dz, dzbar) = cardioid_derivatives(z);
                (cardioid(z), dz, dzbar)
            }
            ActivationKind::Siglog => {
                let (dz, dzbar) = siglog_derivatives(z);
                (siglog(z), dz, dzbar)
            }
            ActivationKind::SeparableSigmoid => {
                let (dz, dzbar) = separable_sigmoid_derivatives(z);
                (separable_sigmoid(z), dz, dzbar)
            }
            ActivationKind::RealRelu => unreachable!("ReLU is rejected for complex networks"),
        }
    }
}

impl Activation for f64 {
    fn supports(kind: ActivationKind) -> bool {
        kind == ActivationKind::RealRelu
    }

    #[inline]
    fn activate(kind: ActivationKind, t: f64) -> (f64, f64, f64) {
        debug_assert_eq!(kind, ActivationKind::RealRelu);
        (real_relu(t), real_relu_derivative(t), 0.0)
    }
}
