use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, QuantumState, StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelKind {
    IdealUnitary,
    /// `(1-p) U rho U^dag + p 1/2^n`
    Depolarizing { p: f64 },
}

/// A quantum channel on `n` qubits built around a target unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    unitary: DMatrix<Complex64>,
    num_qubits: usize,
}

impl Channel {
    pub fn ideal(unitary: DMatrix<Complex64>) -> Result<Self> {
        Self::new(ChannelKind::IdealUnitary, unitary)
    }

    pub fn depolarizing(unitary: DMatrix<Complex64>, p: f64) -> Result<Self> {
        Self::new(ChannelKind::Depolarizing { p }, unitary)
    }

    pub fn new(kind: ChannelKind, unitary: DMatrix<Complex64>) -> Result<Self> {
        let num_qubits = check_unitary(&unitary)?;
        if let ChannelKind::Depolarizing { p } = kind {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("depolarizing p={p} outside [0, 1]")));
            }
        }
        Ok(Self {
            kind,
            unitary,
            num_qubits,
        })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn unitary(&self) -> &DMatrix<Complex64> {
        &self.unitary
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// The channel's linear extension to arbitrary operators, e.g. `|i><j|`.
    pub fn apply_operator(&self, op: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let dim = self.unitary.nrows();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: op.nrows().trailing_zeros() as usize,
            });
        }
        let rotated = &self.unitary * op * self.unitary.adjoint();
        Ok(match self.kind {
            ChannelKind::IdealUnitary => rotated,
            ChannelKind::Depolarizing { p } => {
                let mixed = DMatrix::identity(dim, dim) * (op.trace() / dim as f64);
                rotated * Complex64::new(1.0 - p, 0.0) + mixed * Complex64::new(p, 0.0)
            }
        })
    }

    pub fn apply(&self, input: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_operator(input.matrix())?;
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    /// Output state for a pure input, kept pure when the channel is unitary.
    pub fn apply_to_pure(&self, input: &StateVector) -> Result<QuantumState> {
        match self.kind {
            ChannelKind::IdealUnitary => Ok(QuantumState::Pure(input.evolve(&self.unitary)?)),
            _ => Ok(QuantumState::Mixed(self.apply(&DensityMatrix::from_pure(input))?)),
        }
    }
}

/// Returns the qubit count of a validated unitary.
pub fn check_unitary(u: &DMatrix<Complex64>) -> Result<usize> {
    let dim = u.nrows();
    if dim != u.ncols() || dim < 2 || !dim.is_power_of_two() {
        return Err(Error::BadLength(dim, "unitary dimension"));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::UnsupportedQubits(n, "1..=7"));
    }
    let dev = (u.adjoint() * u - DMatrix::identity(dim, dim))
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if !(dev <= UNITARY_TOL) {
        return Err(Error::NotUnitary(dev));
    }
    Ok(n)
}

/// Built-in gates.
pub mod gates {
    use super::*;

    fn permutation(num_qubits: usize, map: impl Fn(usize) -> usize) -> DMatrix<Complex64> {
        let dim = 1usize << num_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            m[(map(b), b)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn identity(num_qubits: usize) -> DMatrix<Complex64> {
        permutation(num_qubits, |b| b)
    }

    /// Control on qubit 0, target qubit 1: `|10> -> |11>`.
    pub fn cnot() -> DMatrix<Complex64> {
        permutation(2, |b| if b & 0b10 != 0 { b ^ 0b01 } else { b })
    }

    /// Controls on qubits 0 and 1, target qubit 2: `|110> -> |111>`.
    pub fn toffoli() -> DMatrix<Complex64> {
        permutation(3, |b| if b & 0b110 == 0b110 { b ^ 0b001 } else { b })
    }

    /// Looks up `cnot`, `toffoli` or `identity` (single qubit).
    pub fn named(name: &str) -> Option<DMatrix<Complex64>> {
        match name.to_ascii_lowercase().as_str() {
            "cnot" => Some(cnot()),
            "toffoli" => Some(toffoli()),
            "identity" => Some(identity(1)),
            _ => None,
        }
    }

    /// Parses a row-major JSON array of `[re, im]` pairs.
    pub fn from_json(text: &str) -> Result<DMatrix<Complex64>> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(text)?;
        let len = pairs.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim * dim != len {
            return Err(Error::BadLength(len, "square matrix"));
        }
        let entries: Vec<Complex64> = pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let m = DMatrix::from_row_slice(dim, dim, &entries);
        check_unitary(&m)?;
        Ok(m)
    }
}
