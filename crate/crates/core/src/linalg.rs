//! Complex linear-algebra helpers shared by the optimization modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Conjugate-transpose inner product `a^H b`.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// `|a^H b|^2`.
#[inline]
pub fn gain(a: &CVector, b: &CVector) -> f64 {
    inner(a, b).norm_sqr()
}

/// One circularly-symmetric complex Gaussian sample with unit variance.
///
/// Uses the Marsaglia polar method so the sample stream depends only on the
/// uniform draws of the supplied generator.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    loop {
        let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            // Each real component gets variance 1/2.
            let f = (-s.ln() / s).sqrt();
            return C64::new(u * f, v * f);
        }
    }
}

/// One standard normal sample (polar method).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    complex_gaussian(rng).re * std::f64::consts::SQRT_2
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Each eigenvector is phase-normalized so its first component with modulus
/// above `1e-12` is real and positive. Equal eigenvalues keep the order the
/// underlying solver produced, which is deterministic for identical input.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize to absorb round-off before handing to the solver.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: CVector = eig.eigenvectors.column(src).into_owned();
        normalize_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Rotate `v` so its first non-negligible component is real and positive.
pub fn normalize_phase(v: &mut CVector) {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12) {
        let rot = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Largest eigenvalue of a Hermitian matrix (its spectral norm when PSD).
pub fn spectral_norm_psd(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// `Re Tr(A^H B)`, the real inner product on complex matrices.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}
