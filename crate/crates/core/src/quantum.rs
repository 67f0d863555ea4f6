//! Classical simulation of the single-qubit layer.
//!
//! Trent prepares each qubit in one of the four states `|0>, |1>, |->, |+>`,
//! recorded classically as a pair of bits `(C_b, C_s)`. Clients measure with
//! the Accept observable (computational basis), the Reject observable
//! (Hadamard basis) or an arbitrary rotated observable `K(theta, phi)`.
//! Every preparation is pure, so a 2-component complex amplitude vector is
//! all the state we need.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("cannot prepare an empty qubit sequence")]
    EmptySequence,
    #[error("invalid observable angles theta={theta}, phi={phi}")]
    InvalidAngles { theta: f64, phi: f64 },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
}

/// One of the two mutually unbiased measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// `{|0>, |1>}`, encoded as `C_b = 1`.
    Accept,
    /// `{|->, |+>}`, encoded as `C_b = 0`.
    Reject,
}

impl Basis {
    pub fn from_bit(bit: u8) -> Basis {
        if bit & 1 == 1 {
            Basis::Accept
        } else {
            Basis::Reject
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Basis::Accept => 1,
            Basis::Reject => 0,
        }
    }

    pub fn other(self) -> Basis {
        match self {
            Basis::Accept => Basis::Reject,
            Basis::Reject => Basis::Accept,
        }
    }
}

/// Trent's classical record `(C_b, C_s)` of one prepared qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitDescriptor {
    pub basis: Basis,
    /// `C_s`: 1 for `|1>` or `|+>`, 0 for `|0>` or `|->`.
    pub state_bit: u8,
}

impl QubitDescriptor {
    pub fn new(basis: Basis, state_bit: u8) -> Self {
        QubitDescriptor {
            basis,
            state_bit: state_bit & 1,
        }
    }

    pub fn from_bits(basis_bit: u8, state_bit: u8) -> Self {
        QubitDescriptor::new(Basis::from_bit(basis_bit), state_bit)
    }

    pub fn basis_bit(&self) -> u8 {
        self.basis.bit()
    }

    /// All four descriptors, in `(C_b, C_s)` lexicographic order.
    pub fn all() -> [QubitDescriptor; 4] {
        [
            QubitDescriptor::from_bits(0, 0),
            QubitDescriptor::from_bits(0, 1),
            QubitDescriptor::from_bits(1, 0),
            QubitDescriptor::from_bits(1, 1),
        ]
    }

    /// State vector in the `{|0>, |1>}` basis, with `|+-> = (|1> +- |0>)/sqrt 2`.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let h = FRAC_1_SQRT_2;
        match (self.basis, self.state_bit) {
            (Basis::Accept, 0) => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            (Basis::Accept, _) => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            (Basis::Reject, 0) => [Complex64::new(-h, 0.0), Complex64::new(h, 0.0)],
            (Basis::Reject, _) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        }
    }
}

/// Measurement applied by a client to one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    /// `A = 1|1><1| + 0|0><0|`.
    Accept,
    /// `R = 1|+><+| + 0|-><-|`.
    Reject,
    /// `K = 0|m><m| + 1|m_perp><m_perp|` with
    /// `|m> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    Rotated { theta: f64, phi: f64 },
}

impl Observable {
    pub fn rotated(theta: f64, phi: f64) -> Result<Observable, QuantumError> {
        if !(0.0..=PI).contains(&theta) || !(0.0..2.0 * PI).contains(&phi) {
            return Err(QuantumError::InvalidAngles { theta, phi });
        }
        Ok(Observable::Rotated { theta, phi })
    }

    pub fn for_basis(basis: Basis) -> Observable {
        match basis {
            Basis::Accept => Observable::Accept,
            Basis::Reject => Observable::Reject,
        }
    }

    /// The eigenbasis this observable shares with a preparation, if any.
    pub fn basis(&self) -> Option<Basis> {
        match self {
            Observable::Accept => Some(Basis::Accept),
            Observable::Reject => Some(Basis::Reject),
            Observable::Rotated { .. } => None,
        }
    }

    /// Accept-equivalent frequency `q_a = cos theta` of a rotated observable.
    pub fn accept_equivalence(&self) -> f64 {
        match self {
            Observable::Accept => 1.0,
            Observable::Reject => 0.0,
            Observable::Rotated { theta, .. } => theta.cos(),
        }
    }

    /// `(theta', phi')` of the outcome-0 eigenvector expressed in the
    /// `{|->, |+>}` basis.
    pub fn reject_frame_angles(&self) -> (f64, f64) {
        let (theta, phi) = match *self {
            Observable::Accept => (0.0, 0.0),
            Observable::Reject => return (0.0, 0.0),
            Observable::Rotated { theta, phi } => (theta, phi),
        };
        let m = [
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ];
        let minus = QubitDescriptor::from_bits(0, 0).amplitudes();
        let plus = QubitDescriptor::from_bits(0, 1).amplitudes();
        let c_minus = inner(&minus, &m);
        let c_plus = inner(&plus, &m);
        // Remove the global phase so the |-> coefficient is real and non-negative.
        let theta_p = 2.0 * c_minus.norm().clamp(0.0, 1.0).acos();
        let phi_p = if c_plus.norm() < 1e-15 || c_minus.norm() < 1e-15 {
            0.0
        } else {
            (c_plus.arg() - c_minus.arg()).rem_euclid(2.0 * PI)
        };
        (theta_p, phi_p)
    }
}

/// `<a|b>`.
fn inner(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Born-rule outcome probabilities of a two-outcome measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p0: f64,
    pub p1: f64,
}

impl OutcomeDistribution {
    pub fn point(outcome: u8) -> Self {
        if outcome & 1 == 0 {
            OutcomeDistribution { p0: 1.0, p1: 0.0 }
        } else {
            OutcomeDistribution { p0: 0.0, p1: 1.0 }
        }
    }

    pub fn uniform() -> Self {
        OutcomeDistribution { p0: 0.5, p1: 0.5 }
    }

    pub fn prob(&self, outcome: u8) -> f64 {
        if outcome & 1 == 0 {
            self.p0
        } else {
            self.p1
        }
    }
}

/// Combined channel and detector error, modelled as an outcome flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub flip_prob: f64,
    /// Error tolerance `eta = M_w / M` used by the honest parties.
    pub tolerance: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::ideal()
    }
}

impl NoiseModel {
    pub fn ideal() -> Self {
        NoiseModel {
            flip_prob: 0.0,
            tolerance: 0.0,
        }
    }

    pub fn new(flip_prob: f64, tolerance: f64) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(QuantumError::InvalidNoise(format!(
                "flip probability {flip_prob} outside [0, 1]"
            )));
        }
        if !(0.0..1.0).contains(&tolerance) {
            return Err(QuantumError::InvalidNoise(format!(
                "tolerance {tolerance} outside [0, 1)"
            )));
        }
        Ok(NoiseModel {
            flip_prob,
            tolerance,
        })
    }

    /// Fairness experiments need the tolerance strictly below `1 - alpha`.
    pub fn is_fair_for(&self, alpha: f64) -> bool {
        self.tolerance < 1.0 - alpha
    }
}

/// Draws `n` descriptors i.i.d. uniformly over the four `(C_b, C_s)` pairs.
pub fn prepare_sequence<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<Vec<QubitDescriptor>, QuantumError> {
    if n == 0 {
        return Err(QuantumError::EmptySequence);
    }
    Ok((0..n).map(|_| prepare_one(rng)).collect())
}

pub fn prepare_one<R: Rng + ?Sized>(rng: &mut R) -> QubitDescriptor {
    let bits: u8 = rng.random_range(0..4);
    QubitDescriptor::from_bits(bits >> 1, bits & 1)
}

/// Born-rule distribution of measuring `obs` on the prepared `state`.
pub fn outcome_distribution(state: QubitDescriptor, obs: Observable) -> OutcomeDistribution {
    match obs.basis() {
        // Shared eigenbasis: the outcome is C_s with certainty.
        Some(b) if b == state.basis => OutcomeDistribution::point(state.state_bit),
        // Mutually unbiased bases: every overlap is exactly 1/2.
        Some(_) => OutcomeDistribution::uniform(),
        None => {
            let Observable::Rotated { theta, phi } = obs else {
                unreachable!()
            };
            rotated_distribution(&state.amplitudes(), theta, phi)
        }
    }
}

fn rotated_distribution(psi: &[Complex64; 2], theta: f64, phi: f64) -> OutcomeDistribution {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let m = [Complex64::new(c, 0.0), Complex64::from_polar(s, phi)];
    let m_perp = [-Complex64::from_polar(s, -phi), Complex64::new(c, 0.0)];
    OutcomeDistribution {
        p0: inner(&m, psi).norm_sqr(),
        p1: inner(&m_perp, psi).norm_sqr(),
    }
}

/// Samples a measurement outcome and applies the outcome-flip noise channel.
pub fn measure<R: Rng + ?Sized>(
    state: QubitDescriptor,
    obs: Observable,
    noise: &NoiseModel,
    rng: &mut R,
) -> u8 {
    let dist = outcome_distribution(state, obs);
    let raw = sample(&dist, rng);
    if noise.flip_prob > 0.0 && (noise.flip_prob >= 1.0 || rng.random_bool(noise.flip_prob)) {
        raw ^ 1
    } else {
        raw
    }
}

fn sample<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> u8 {
    if dist.p1 <= 0.0 {
        0
    } else if dist.p0 <= 0.0 {
        1
    } else if dist.p0 == 0.5 {
        rng.random::<bool>() as u8
    } else {
        (rng.random::<f64>() >= dist.p0) as u8
    }
}
