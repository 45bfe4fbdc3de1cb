//! Pauli strings in symplectic (x, z) bitmask form.
//!
//! Qubit 0 is the leftmost letter and the most significant bit of a
//! computational-basis index, so `"XZ"` acts with X on the high bit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::MAX_QUBITS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of single-qubit Pauli operators on up to seven qubits.
///
/// Every non-identity string has eigenvalues `+1` and `-1` only, which is
/// what makes its measurement dichotomic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    num_qubits: u8,
    x: u32,
    z: u32,
}

impl PauliString {
    pub fn identity(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        Ok(Self {
            num_qubits: num_qubits as u8,
            x: 0,
            z: 0,
        })
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        check_qubits(letters.len())?;
        let n = letters.len();
        let (mut x, mut z) = (0u32, 0u32);
        for (q, letter) in letters.iter().enumerate() {
            let (xb, zb) = letter.bits();
            let bit = 1u32 << (n - 1 - q);
            if xb {
                x |= bit;
            }
            if zb {
                z |= bit;
            }
        }
        Ok(Self {
            num_qubits: n as u8,
            x,
            z,
        })
    }

    /// Builds a string directly from index-space masks.
    pub fn from_masks(num_qubits: usize, x: u32, z: u32) -> Result<Self> {
        check_qubits(num_qubits)?;
        let full = (1u32 << num_qubits) - 1;
        if x & !full != 0 || z & !full != 0 {
            return Err(Error::InvalidParameter(format!(
                "masks {x:#b}/{z:#b} exceed {num_qubits} qubits"
            )));
        }
        Ok(Self {
            num_qubits: num_qubits as u8,
            x,
            z,
        })
    }

    /// All `4^n` strings, ordered by `(x << n) | z`.
    pub fn all(num_qubits: usize) -> Result<Vec<Self>> {
        check_qubits(num_qubits)?;
        let dim = 1u32 << num_qubits;
        let mut out = Vec::with_capacity((dim * dim) as usize);
        for x in 0..dim {
            for z in 0..dim {
                out.push(Self {
                    num_qubits: num_qubits as u8,
                    x,
                    z,
                });
            }
        }
        Ok(out)
    }

    /// All `3^n` strings without identity letters, in lexicographic X < Y < Z order.
    pub fn full_weight(num_qubits: usize) -> Result<Vec<Self>> {
        check_qubits(num_qubits)?;
        let count = 3usize.pow(num_qubits as u32);
        let mut out = Vec::with_capacity(count);
        let mut letters = vec![Pauli::X; num_qubits];
        for mut code in 0..count {
            for q in (0..num_qubits).rev() {
                letters[q] = Pauli::NON_IDENTITY[code % 3];
                code /= 3;
            }
            out.push(Self::from_letters(&letters)?);
        }
        Ok(out)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits as usize
    }

    pub fn x_mask(&self) -> u32 {
        self.x
    }

    pub fn z_mask(&self) -> u32 {
        self.z
    }

    /// Index-space mask of the non-identity positions.
    pub fn support_mask(&self) -> u32 {
        self.x | self.z
    }

    /// Dense index in `0..4^n`, matching the order of [`PauliString::all`].
    pub fn index(&self) -> usize {
        ((self.x as usize) << self.num_qubits) | self.z as usize
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        let bit = 1u32 << (self.num_qubits as usize - 1 - qubit);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.num_qubits()).map(|q| self.letter(q))
    }

    pub fn weight(&self) -> u32 {
        self.support_mask().count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    pub fn is_full_weight(&self) -> bool {
        self.weight() as usize == self.num_qubits()
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// True when every non-identity letter of `self` matches `group` at the
    /// same position, i.e. one shot of `group` also yields a sample of `self`.
    pub fn is_substring_of(&self, group: &Self) -> bool {
        let s = self.support_mask();
        self.num_qubits == group.num_qubits && group.x & s == self.x && group.z & s == self.z
    }

    /// The string obtained by keeping only the positions in `mask`.
    pub fn restrict(&self, mask: u32) -> Self {
        Self {
            num_qubits: self.num_qubits,
            x: self.x & mask,
            z: self.z & mask,
        }
    }

    /// `P|b> = phase(b) |b ^ x>`; returns the phase for basis index `b`.
    #[inline]
    pub(crate) fn phase(&self, b: usize) -> Complex64 {
        let y_count = (self.x & self.z).count_ones();
        let sign = if (b as u32 & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let i_pow = match y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        i_pow * sign
    }

    /// `tr(P M)` for a `2^n x 2^n` matrix, without forming `P`.
    pub fn trace_product(&self, m: &DMatrix<Complex64>) -> Complex64 {
        let x = self.x as usize;
        (0..m.nrows()).map(|b| self.phase(b) * m[(b, b ^ x)]).sum()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.num_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            m[(b ^ self.x as usize, b)] = self.phase(b);
        }
        m
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::UnsupportedQubits(n, "1..=7"));
    }
    Ok(())
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::InvalidPauli(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        Self::from_letters(&letters)
    }
}
