//! Reference computations written directly from the defining formulas,
//! sharing no code with the library's linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn gaussian<R: Rng>(rng: &mut R) -> C {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector<R: Rng>(dim: usize, rng: &mut R) -> DVector<C> {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// `G G^dagger / tr`, full rank with probability one.
pub fn random_density<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace();
    let mut m = m / tr;
    // exact Hermiticity
    for i in 0..dim {
        for j in 0..i {
            m[(i, j)] = m[(j, i)].conj();
        }
        m[(i, i)] = c(m[(i, i)].re, 0.0);
    }
    m
}

/// Haar-distributed unitary via QR with the phase correction on `R`'s diagonal.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        d / c(d.norm(), 0.0)
    }));
    q * phases
}

pub fn pauli_matrix(letters: &str) -> DMatrix<C> {
    let one = |ch: char| -> DMatrix<C> {
        let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
        match ch {
            'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            'Y' => DMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
            'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
            _ => panic!("bad letter {ch}"),
        }
    };
    letters
        .chars()
        .fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, ch| acc.kronecker(&one(ch)))
}

pub fn expectation(rho: &DMatrix<C>, op: &DMatrix<C>) -> f64 {
    (rho * op).trace().re
}

/// `<psi| rho |psi>`.
pub fn state_fidelity(psi: &DVector<C>, rho: &DMatrix<C>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

/// `(1 - p) U X U^dagger + p tr(X) I / d` on an arbitrary operator.
pub fn depolarized(u: &DMatrix<C>, p: f64, x: &DMatrix<C>) -> DMatrix<C> {
    let d = u.nrows();
    u * x * u.adjoint() * c(1.0 - p, 0.0) + DMatrix::identity(d, d) * (x.trace() * c(p / d as f64, 0.0))
}

/// `4^-N sum_ij <i| U^dagger L(|i><j|) U |j>` with `L` depolarizing around `lambda`.
pub fn gate_fidelity(u: &DMatrix<C>, lambda: &DMatrix<C>, p: f64) -> f64 {
    let d = u.nrows();
    let mut total = c(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = c(1.0, 0.0);
            let out = u.adjoint() * depolarized(lambda, p, &e) * u;
            total += out[(i, j)];
        }
    }
    assert!(total.im.abs() < 1e-10);
    total.re / (d * d) as f64
}

/// Two-pass sample variance with the `n - 1` denominator.
pub fn two_pass_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

pub fn amplitudes(v: &DVector<C>) -> Vec<C> {
    v.iter().copied().collect()
}
