use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{PauliString, MAX_QUBITS};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = -1e-10;
const FILE_NORM_TOL: f64 = 1e-6;

fn parse_pairs(text: &str) -> Result<Vec<Complex64>> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text)?;
    Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
}

fn qubits_for_dim(dim: usize, what: &'static str) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::BadLength(dim, what));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::UnsupportedQubits(n, "1..=7"));
    }
    Ok(n)
}

/// A normalized pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized to within `1e-12`.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_dim(amplitudes.len(), "state vector")?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_dim(amplitudes.len(), "state vector")?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm * norm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Parses a JSON array of `[re, im]` amplitude pairs. Norms within
    /// `1e-6` of one are accepted and rescaled.
    pub fn from_json(text: &str) -> Result<Self> {
        let amplitudes = parse_pairs(text)?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > FILE_NORM_TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Self::normalized(amplitudes)
    }

    /// The computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedQubits(num_qubits, "1..=7"));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_dims(self.num_qubits, other.num_qubits)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(Error::UnsupportedQubits(n, "1..=7"));
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self {
            num_qubits: n,
            amplitudes,
        })
    }

    /// `U|psi>` for a `2^n x 2^n` unitary. Unitarity is the caller's concern.
    pub fn evolve(&self, unitary: &DMatrix<Complex64>) -> Result<Self> {
        let dim = self.amplitudes.len();
        if unitary.nrows() != dim || unitary.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: unitary.nrows().trailing_zeros() as usize,
            });
        }
        let amplitudes = (0..dim)
            .map(|r| (0..dim).map(|c| unitary[(r, c)] * self.amplitudes[c]).sum())
            .collect();
        Ok(Self {
            num_qubits: self.num_qubits,
            amplitudes,
        })
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }
}

/// Draws a Haar-random pure state: i.i.d. standard complex Gaussian
/// amplitudes, normalized.
pub fn haar_random_state<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<StateVector> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::UnsupportedQubits(num_qubits, "1..=7"));
    }
    let amplitudes = (0..1usize << num_qubits)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    StateVector::normalized(amplitudes)
}

/// A mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotDensityMatrix("matrix is not square".into()));
        }
        let num_qubits = qubits_for_dim(entries.nrows(), "density matrix")?;
        let herm_dev = (&entries - entries.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm_dev > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("not Hermitian (deviation {herm_dev:e})")));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace is {trace}")));
        }
        let min_eig = entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < EIGEN_TOL {
            return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self {
            num_qubits,
            entries,
        })
    }

    /// Parses a row-major JSON array of `[re, im]` pairs.
    pub fn from_json(text: &str) -> Result<Self> {
        let entries = parse_pairs(text)?;
        let len = entries.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim * dim != len {
            return Err(Error::BadLength(len, "square matrix"));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, &entries))
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            num_qubits: state.num_qubits(),
            entries: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedQubits(num_qubits, "1..=7"));
        }
        let dim = 1usize << num_qubits;
        Ok(Self {
            num_qubits,
            entries: DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        })
    }

    /// Skips validation; only for maps known to preserve the invariants.
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<Complex64>) -> Self {
        Self {
            num_qubits: entries.nrows().trailing_zeros() as usize,
            entries,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `<psi|rho|psi>`.
    pub fn overlap(&self, psi: &StateVector) -> Result<f64> {
        check_dims(self.num_qubits, psi.num_qubits())?;
        let a = psi.amplitudes();
        let dim = a.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            let row: Complex64 = (0..dim).map(|c| self.entries[(r, c)] * a[c]).sum();
            acc += a[r].conj() * row;
        }
        Ok(acc.re)
    }
}

/// A prepared state in whichever representation is cheapest.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn num_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.num_qubits(),
            QuantumState::Mixed(r) => r.num_qubits(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => DensityMatrix::from_pure(s),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    /// Fidelity `<psi|rho|psi>` of this state with a pure target.
    pub fn fidelity_with(&self, target: &StateVector) -> Result<f64> {
        match self {
            QuantumState::Pure(s) => Ok(target.inner(s)?.norm_sqr()),
            QuantumState::Mixed(r) => r.overlap(target),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `tr(rho S)`, exactly 1 for the identity string.
pub fn exact_expectation(state: &QuantumState, obs: &PauliString) -> Result<f64> {
    check_dims(state.num_qubits(), obs.num_qubits())?;
    if obs.is_identity() {
        return Ok(1.0);
    }
    let x = obs.x_mask() as usize;
    let value = match state {
        QuantumState::Pure(s) => {
            let a = s.amplitudes();
            (0..a.len())
                .map(|b| obs.phase(b) * a[b ^ x].conj() * a[b])
                .sum::<Complex64>()
                .re
        }
        QuantumState::Mixed(r) => obs.trace_product(r.matrix()).re,
    };
    Ok(value.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn haar_state_is_normalized_and_reproducible() {
        for n in 1..=5 {
            let a = haar_random_state(n, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            let b = haar_random_state(n, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
            assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn haar_marginal_z_averages_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z: PauliString = "Z".parse().unwrap();
        let draws = 100_000;
        let mean: f64 = (0..draws)
            .map(|_| exact_expectation(&haar_random_state(1, &mut rng).unwrap().into(), &z).unwrap())
            .sum::<f64>()
            / draws as f64;
        assert!(mean.abs() < 0.01, "mean <Z> = {mean}");
    }

    #[test]
    fn expectations_of_simple_states() {
        let zero: QuantumState = StateVector::basis(1, 0).unwrap().into();
        let z: PauliString = "Z".parse().unwrap();
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(exact_expectation(&zero, &z).unwrap(), 1.0);
        assert_eq!(exact_expectation(&zero, &x).unwrap(), 0.0);
        assert_eq!(exact_expectation(&zero, &"I".parse().unwrap()).unwrap(), 1.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(vec![c(h, 0.), c(0., 0.), c(0., 0.), c(h, 0.)]).unwrap();
        let xx: PauliString = "XX".parse().unwrap();
        // Direct matrix evaluation as the reference.
        let v = nalgebra::DVector::from_column_slice(bell.amplitudes());
        let direct = (v.adjoint() * xx.to_matrix() * &v)[(0, 0)].re;
        assert!((direct - 1.0).abs() < 1e-12);
        let pure: QuantumState = bell.clone().into();
        assert!((exact_expectation(&pure, &xx).unwrap() - 1.0).abs() < 1e-12);
        let mixed: QuantumState = DensityMatrix::from_pure(&bell).into();
        assert!((exact_expectation(&mixed, &xx).unwrap() - 1.0).abs() < 1e-12);
        assert!(exact_expectation(&mixed, &"X".parse().unwrap()).is_err());
    }

    #[test]
    fn pure_and_mixed_expectations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = haar_random_state(3, &mut rng).unwrap();
            let mixed: QuantumState = DensityMatrix::from_pure(&s).into();
            let pure: QuantumState = s.into();
            for p in PauliString::all(3).unwrap() {
                let a = exact_expectation(&pure, &p).unwrap();
                let b = exact_expectation(&mixed, &p).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::maximally_mixed(2).is_ok());
        let bad_trace = DMatrix::<Complex64>::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let not_psd = DMatrix::from_row_slice(2, 2, &[c(1.5, 0.), c(0., 0.), c(0., 0.), c(-0.5, 0.)]);
        assert!(DensityMatrix::new(not_psd).is_err());
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0., 0.), c(0.5, 0.)]);
        assert!(DensityMatrix::new(not_herm).is_err());
    }

    #[test]
    fn file_formats() {
        let s = StateVector::from_json("[[0.70710678, 0], [0, 0.70710678]]").unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(StateVector::from_json("[[1, 0], [1, 0]]").is_err());
        assert!(StateVector::from_json("[[1, 0]]").is_err());
        let r = DensityMatrix::from_json("[[0.5, 0], [0, 0], [0, 0], [0.5, 0]]").unwrap();
        assert_eq!(r, DensityMatrix::maximally_mixed(1).unwrap());
        assert!(DensityMatrix::from_json("[[1, 0], [0, 0], [0, 0]]").is_err());
        assert!(DensityMatrix::from_json("{}").is_err());
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::new(vec![c(1., 0.), c(1., 0.)]).is_err());
        assert!(StateVector::new(vec![c(1., 0.), c(0., 0.), c(0., 0.)]).is_err());
        assert!(StateVector::normalized(vec![c(0., 0.), c(0., 0.)]).is_err());
        let s = StateVector::normalized(vec![c(3., 0.), c(0., 4.)]).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }
}
