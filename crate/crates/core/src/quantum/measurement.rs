//! Simulated projective measurement of a full-weight Pauli group.
//!
//! Each qubit is rotated so that the group's letter becomes Z and the
//! computational basis is read out. Per-qubit rotations:
//!
//! | letter | rotation `V`           | `V P V^dag` |
//! |--------|------------------------|-------------|
//! | X      | `H`                    | Z           |
//! | Y      | `H S^dag`              | Z           |
//! | Z      | identity               | Z           |
//!
//! Bit `0` on a qubit is the `+1` eigenvalue, bit `1` is `-1`.

use num_complex::Complex64;
use rand::Rng;

use super::{DensityMatrix, Pauli, PauliString, QuantumState, StateVector};
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

type Gate2 = [[Complex64; 2]; 2];

pub(crate) fn basis_rotation(letter: Pauli) -> Option<Gate2> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match letter {
        Pauli::X => Some([[c(h, 0.), c(h, 0.)], [c(h, 0.), c(-h, 0.)]]),
        Pauli::Y => Some([[c(h, 0.), c(0., -h)], [c(h, 0.), c(0., h)]]),
        Pauli::Z | Pauli::I => None,
    }
}

/// Applies `gate` to qubit `q` of each length-`2^n` vector stored with `stride`
/// between consecutive entries.
fn apply_1q(data: &mut [Complex64], num_qubits: usize, q: usize, gate: &Gate2, offset: usize, stride: usize) {
    let bit = 1usize << (num_qubits - 1 - q);
    let dim = 1usize << num_qubits;
    for b in 0..dim {
        if b & bit == 0 {
            let i0 = offset + b * stride;
            let i1 = offset + (b | bit) * stride;
            let (a0, a1) = (data[i0], data[i1]);
            data[i0] = gate[0][0] * a0 + gate[0][1] * a1;
            data[i1] = gate[1][0] * a0 + gate[1][1] * a1;
        }
    }
}

/// Probabilities of the `2^n` outcome bitstrings for one group, plus a
/// cumulative table for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    num_qubits: usize,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(num_qubits: usize, mut probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != 1usize << num_qubits {
            return Err(Error::BadLength(probabilities.len(), "outcome distribution"));
        }
        for p in probabilities.iter_mut() {
            // Round-off from the basis rotation can leave -1e-17.
            if *p < 0.0 && *p > -SUM_TOL {
                *p = 0.0;
            }
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("negative outcome probability".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidParameter(format!("outcome probabilities sum to {total}")));
        }
        let mut cumulative: Vec<f64> = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_positive = probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        cumulative[last_positive..].iter_mut().for_each(|c| *c = 1.0);
        Ok(Self {
            num_qubits,
            probabilities,
            cumulative,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `sum_b p(b) (-1)^{parity(b & mask)}`: the exact mean of the
    /// sub-observable with support `mask`.
    pub fn parity_expectation(&self, mask: u32) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(b, p)| if (b as u32 & mask).count_ones() % 2 == 0 { *p } else { -p })
            .sum()
    }
}

/// One measurement record: bit `b` on qubit `q` means outcome `(-1)^b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outcome {
    bits: u32,
    num_qubits: u8,
}

impl Outcome {
    pub fn new(num_qubits: usize, bits: u32) -> Self {
        Self {
            bits,
            num_qubits: num_qubits as u8,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits as usize
    }

    pub fn bit(&self, qubit: usize) -> u8 {
        ((self.bits >> (self.num_qubits as usize - 1 - qubit)) & 1) as u8
    }

    /// Product of per-qubit outcomes over `mask`.
    #[inline]
    pub fn parity(&self, mask: u32) -> i8 {
        if (self.bits & mask).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Outcome probabilities of measuring the full-weight `group` on `state`.
pub fn group_outcome_distribution(state: &QuantumState, group: &PauliString) -> Result<OutcomeDistribution> {
    let n = group.num_qubits();
    if state.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: state.num_qubits(),
            found: n,
        });
    }
    if !group.is_full_weight() {
        return Err(Error::NotFullWeight(group.to_string()));
    }
    let rotations: Vec<(usize, Gate2)> = (0..n)
        .filter_map(|q| basis_rotation(group.letter(q)).map(|g| (q, g)))
        .collect();
    let dim = 1usize << n;
    let probabilities = match state {
        QuantumState::Pure(s) => rotated_pure(s, &rotations),
        QuantumState::Mixed(r) => rotated_mixed(r, &rotations, dim),
    };
    OutcomeDistribution::new(n, probabilities)
}

fn rotated_pure(state: &StateVector, rotations: &[(usize, Gate2)]) -> Vec<f64> {
    let mut s = state.clone();
    let n = s.num_qubits();
    for (q, g) in rotations {
        apply_1q(s.amplitudes_mut(), n, *q, g, 0, 1);
    }
    s.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}

fn rotated_mixed(rho: &DensityMatrix, rotations: &[(usize, Gate2)], dim: usize) -> Vec<f64> {
    let n = rho.num_qubits();
    // Column-major storage: column c occupies data[c*dim .. (c+1)*dim].
    let mut data: Vec<Complex64> = rho.matrix().as_slice().to_vec();
    for (q, g) in rotations {
        // V rho: rotate every column.
        for col in 0..dim {
            apply_1q(&mut data, n, *q, g, col * dim, 1);
        }
        // (V rho) V^dag: rotate every row with conj(V).
        let gc = [[g[0][0].conj(), g[0][1].conj()], [g[1][0].conj(), g[1][1].conj()]];
        for row in 0..dim {
            apply_1q(&mut data, n, *q, &gc, row, dim);
        }
    }
    (0..dim).map(|b| data[b * dim + b].re).collect()
}

/// Draws one outcome bitstring from `distribution`.
pub fn sample_group_shot<R: Rng + ?Sized>(distribution: &OutcomeDistribution, rng: &mut R) -> Outcome {
    let u: f64 = rng.random();
    let idx = distribution.cumulative.partition_point(|c| *c <= u);
    let idx = idx.min(distribution.cumulative.len() - 1);
    Outcome::new(distribution.num_qubits, idx as u32)
}

/// The `+1`/`-1` sample of `member` carried by a shot of `group`.
pub fn sub_observable_sample(outcome: &Outcome, member: &PauliString, group: &PauliString) -> Result<i8> {
    if outcome.num_qubits() != member.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: outcome.num_qubits(),
            found: member.num_qubits(),
        });
    }
    if !member.is_substring_of(group) {
        return Err(Error::IncompatibleMember {
            member: member.to_string(),
            group: group.to_string(),
        });
    }
    Ok(outcome.parity(member.support_mask()))
}
