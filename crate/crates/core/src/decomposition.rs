//! Linear expansions of fidelities into Pauli expectation values.
//!
//! A [`Decomposition`] is `Q = constant + sum_t a_t <S_t>_{probe(t)}` where
//! each term is measured on the state prepared for its probe index, together
//! with the list of measurement settings (probe, full-weight group) that
//! resolve the terms.
//!
//! State fidelity uses a single probe (index 0): `F = <psi|rho|psi>` with
//! `a_S = <psi|S|psi> / 2^n`. Gate fidelity expands every `|i><j|` over the
//! five single-qubit probe states, giving `5^n` probes whose measured states
//! are `channel(|Phi_k><Phi_k|)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{check_unitary, exact_expectation, Channel, PauliString, QuantumState, StateVector};

/// Coefficients below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObservableKey {
    pub probe: usize,
    pub pauli: PauliString,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub key: ObservableKey,
    pub coefficient: f64,
}

/// One experimental configuration: prepare probe `probe`, measure `group`.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub probe: usize,
    pub group: PauliString,
    /// Indices into [`Decomposition::terms`] resolved by one shot.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    num_qubits: usize,
    num_probes: usize,
    terms: Vec<Term>,
    settings: Vec<Setting>,
    constant: f64,
    exact_value: f64,
}

impl Decomposition {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_probes(&self) -> usize {
        self.num_probes
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Reference value of `Q`; estimation code never reads it.
    pub fn exact_value(&self) -> f64 {
        self.exact_value
    }

    /// Shots spent by two passes over every setting.
    pub fn init_cost(&self) -> u64 {
        2 * self.settings.len() as u64
    }

    /// `constant + sum a <S>` using exact expectations on `prepared[probe]`.
    pub fn reconstruct(&self, prepared: &[QuantumState]) -> Result<f64> {
        if prepared.len() != self.num_probes {
            return Err(Error::InvalidParameter(format!(
                "expected {} prepared states, got {}",
                self.num_probes,
                prepared.len()
            )));
        }
        let mut total = self.constant;
        for t in &self.terms {
            total += t.coefficient * exact_expectation(&prepared[t.key.probe], &t.key.pauli)?;
        }
        Ok(total)
    }

    /// Scales every coefficient (and the constant) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coefficient *= factor);
        out.constant *= factor;
        out.exact_value *= factor;
        out
    }

    /// Groups per-probe coefficient tables (indexed by [`PauliString::index`])
    /// into pruned terms and settings.
    fn assemble(num_qubits: usize, tables: Vec<Vec<f64>>, exact_value: f64) -> Result<Self> {
        let all = PauliString::all(num_qubits)?;
        let groups = PauliString::full_weight(num_qubits)?;
        let full_mask = (1u32 << num_qubits) - 1;
        let num_probes = tables.len();
        let mut terms = Vec::new();
        let mut settings = Vec::new();
        let mut constant = 0.0;
        for (probe, table) in tables.into_iter().enumerate() {
            let mut lookup = vec![None; table.len()];
            for (pauli, a) in all.iter().zip(&table) {
                if pauli.is_identity() {
                    constant += a;
                } else if a.abs() >= PRUNE_TOL {
                    lookup[pauli.index()] = Some(terms.len());
                    terms.push(Term {
                        key: ObservableKey { probe, pauli: *pauli },
                        coefficient: *a,
                    });
                }
            }
            for group in &groups {
                let members: Vec<usize> = (1..=full_mask)
                    .filter_map(|mask| lookup[group.restrict(mask).index()])
                    .collect();
                if !members.is_empty() {
                    settings.push(Setting {
                        probe,
                        group: *group,
                        members,
                    });
                }
            }
        }
        Ok(Self {
            num_qubits,
            num_probes,
            terms,
            settings,
            constant,
            exact_value,
        })
    }
}

/// Fidelity of `experimental` with the pure `target`, expanded in Pauli strings.
///
/// Coefficients come from the target; expectations are taken on the
/// experimental state.
pub fn state_fidelity_decomposition(target: &StateVector, experimental: &QuantumState) -> Result<Decomposition> {
    let n = target.num_qubits();
    if experimental.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: experimental.num_qubits(),
        });
    }
    let target_state = QuantumState::Pure(target.clone());
    let scale = 1.0 / (1u64 << n) as f64;
    let table = PauliString::all(n)?
        .iter()
        .map(|p| Ok(exact_expectation(&target_state, p)? * scale))
        .collect::<Result<Vec<f64>>>()?;
    Decomposition::assemble(n, vec![table], experimental.fidelity_with(target)?)
}

/// `|phi_0> = |0>`, `|phi_1> = |1>`, `|phi_k> = (|0> + e^{2 pi i (k-2)/3}|1>)/sqrt 2`.
pub fn single_qubit_probes() -> [StateVector; 5] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phase = |k: usize| Complex64::from_polar(1.0, 2.0 * PI * (k as f64 - 2.0) / 3.0);
    let mk = |a: Complex64, b: Complex64| StateVector::new(vec![a, b]).expect("probe is normalized");
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [
        mk(one, zero),
        mk(zero, one),
        mk(one * h, phase(2) * h),
        mk(one * h, phase(3) * h),
        mk(one * h, phase(4) * h),
    ]
}

/// `c[i][j][k]` such that `sum_k c_ijk |phi_k><phi_k| = |i><j|`.
pub fn probe_coefficients() -> [[[Complex64; 5]; 2]; 2] {
    let mut c = [[[Complex64::new(0.0, 0.0); 5]; 2]; 2];
    c[0][0][0] = Complex64::new(1.0, 0.0);
    c[1][1][1] = Complex64::new(1.0, 0.0);
    for k in 2..5 {
        let angle = 2.0 * PI * (k as f64 - 2.0) / 3.0;
        c[0][1][k] = Complex64::from_polar(2.0 / 3.0, angle);
        c[1][0][k] = Complex64::from_polar(2.0 / 3.0, -angle);
    }
    c
}

/// Per-qubit digits of a probe index, qubit 0 most significant.
pub fn probe_digits(num_qubits: usize, mut probe: usize) -> Vec<usize> {
    let mut digits = vec![0; num_qubits];
    for q in (0..num_qubits).rev() {
        digits[q] = probe % 5;
        probe /= 5;
    }
    digits
}

/// `|Phi_k>`: tensor product of single-qubit probes.
pub fn probe_state(num_qubits: usize, probe: usize) -> Result<StateVector> {
    let singles = single_qubit_probes();
    let digits = probe_digits(num_qubits, probe);
    let mut state = singles[digits[0]].clone();
    for d in &digits[1..] {
        state = state.tensor(&singles[*d])?;
    }
    Ok(state)
}

fn check_gate_qubits(unitary: &DMatrix<Complex64>, channel: &Channel) -> Result<usize> {
    let n = check_unitary(unitary)?;
    if !(1..=3).contains(&n) {
        return Err(Error::UnsupportedQubits(n, "1..=3 for gate fidelity"));
    }
    if channel.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: channel.num_qubits(),
        });
    }
    Ok(n)
}

/// `F(channel, U) = 4^-n sum_ij <i|U^dag channel(|i><j|) U|j>`, evaluated directly.
pub fn gate_fidelity_exact(unitary: &DMatrix<Complex64>, channel: &Channel) -> Result<f64> {
    let n = check_gate_qubits(unitary, channel)?;
    let dim = 1usize << n;
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            let mut op = DMatrix::zeros(dim, dim);
            op[(i, j)] = Complex64::new(1.0, 0.0);
            let out = unitary.adjoint() * channel.apply_operator(&op)? * unitary;
            total += out[(i, j)];
        }
    }
    Ok(total.re / (dim * dim) as f64)
}

/// Gate fidelity of `channel` with respect to `unitary`, expanded over the
/// `5^n` probe states and all Pauli measurements.
pub fn gate_fidelity_decomposition(unitary: &DMatrix<Complex64>, channel: &Channel) -> Result<Decomposition> {
    let n = check_gate_qubits(unitary, channel)?;
    let dim = 1usize << n;
    let c = probe_coefficients();
    // m_k = sum_ij c_ijk |j><i| for each single-qubit probe.
    let single: Vec<DMatrix<Complex64>> = (0..5)
        .map(|k| {
            let mut m = DMatrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    m[(j, i)] = c[i][j][k];
                }
            }
            m
        })
        .collect();
    let paulis = PauliString::all(n)?;
    let fold = 1.0 / (dim * dim) as f64;
    let mut tables = Vec::with_capacity(5usize.pow(n as u32));
    for probe in 0..5usize.pow(n as u32) {
        let digits = probe_digits(n, probe);
        let mut m = single[digits[0]].clone();
        for d in &digits[1..] {
            m = m.kronecker(&single[*d]);
        }
        let rotated = unitary * m * unitary.adjoint();
        let mut table = Vec::with_capacity(paulis.len());
        for p in &paulis {
            let a = p.trace_product(&rotated) / dim as f64;
            if a.im.abs() > IMAG_TOL {
                return Err(Error::ComplexCoefficient(a.im));
            }
            table.push(a.re * fold);
        }
        tables.push(table);
    }
    Decomposition::assemble(n, tables, gate_fidelity_exact(unitary, channel)?)
}

/// A decomposition together with the state measured for each probe.
#[derive(Debug, Clone)]
pub struct FidelityTask {
    pub decomposition: Decomposition,
    pub prepared: Vec<QuantumState>,
}

impl FidelityTask {
    pub fn state_fidelity(target: &StateVector, experimental: QuantumState) -> Result<Self> {
        let decomposition = state_fidelity_decomposition(target, &experimental)?;
        Ok(Self {
            decomposition,
            prepared: vec![experimental],
        })
    }

    pub fn gate_fidelity(unitary: &DMatrix<Complex64>, channel: &Channel) -> Result<Self> {
        let decomposition = gate_fidelity_decomposition(unitary, channel)?;
        let n = decomposition.num_qubits();
        let prepared = (0..decomposition.num_probes())
            .map(|k| channel.apply_to_pure(&probe_state(n, k)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            decomposition,
            prepared,
        })
    }

    pub fn reconstruct(&self) -> Result<f64> {
        self.decomposition.reconstruct(&self.prepared)
    }
}
