//! Real-valued encodings of complex and logarithmic constraints.

use nalgebra::DMatrix;

use super::{Cone, ConeConstraint, LinExpr};
use crate::linalg::{CMatrix, C64};

/// Real symmetric embedding of an order-`n` Hermitian matrix `V = A + jB`
/// as the order-`2n` matrix `[[A, -B], [B, A]]`.
///
/// The embedding preserves positive semidefiniteness (each eigenvalue of
/// `V` appears twice), doubles the trace, and maps the diagonal entry
/// `V_rr` to the paired real diagonal entries `(r, r)` and `(n + r, n + r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianEmbedding {
    pub order: usize,
}

pub fn embed_hermitian(order: usize) -> HermitianEmbedding {
    HermitianEmbedding { order }
}

impl HermitianEmbedding {
    pub fn embedded_order(&self) -> usize {
        2 * self.order
    }

    pub fn embed(&self, v: &CMatrix) -> DMatrix<f64> {
        let n = self.order;
        let mut x = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = v[(i, j)];
                x[(i, j)] = z.re;
                x[(n + i, n + j)] = z.re;
                x[(i, n + j)] = -z.im;
                x[(n + i, j)] = z.im;
            }
        }
        x
    }

    /// Inverse of [`embed`](Self::embed), reading the top-left and
    /// bottom-left blocks.
    pub fn extract(&self, x: &DMatrix<f64>) -> CMatrix {
        let n = self.order;
        CMatrix::from_fn(n, n, |i, j| C64::new(x[(i, j)], x[(n + i, j)]))
    }

    /// Variable layout for a Hermitian matrix decision variable whose real
    /// parts (upper triangle) and imaginary parts (strict upper triangle)
    /// start at `offset`.
    pub fn vars(&self, offset: usize) -> HermitianVars {
        HermitianVars { offset, order: self.order }
    }
}

/// Index map from a Hermitian matrix variable to its `n^2` real scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVars {
    pub offset: usize,
    pub order: usize,
}

impl HermitianVars {
    pub fn n_scalars(&self) -> usize {
        self.order * self.order
    }

    fn tri(i: usize, j: usize) -> usize {
        // Upper triangle, column-major, i <= j.
        j * (j + 1) / 2 + i
    }

    fn re_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.offset + Self::tri(a, b)
    }

    fn im_index(&self, i: usize, j: usize) -> usize {
        // Strict upper triangle, column-major, i < j.
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.offset + self.order * (self.order + 1) / 2 + b * (b - 1) / 2 + a
    }

    /// `Re V_ij` as an affine expression.
    pub fn re(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::var(self.re_index(i, j))
    }

    /// `Im V_ij` as an affine expression (zero on the diagonal).
    pub fn im(&self, i: usize, j: usize) -> LinExpr {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => LinExpr::zero(),
            std::cmp::Ordering::Less => LinExpr::var(self.im_index(i, j)),
            std::cmp::Ordering::Greater => LinExpr::term(self.im_index(i, j), -1.0),
        }
    }

    /// `Re Tr(M V)`, which is the exact value of `Tr(M V)` for Hermitian `M`.
    pub fn trace_product(&self, m: &CMatrix) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.order {
            for j in 0..self.order {
                let z = m[(i, j)];
                // Re(M_ij V_ji) = Re M_ij Re V_ji - Im M_ij Im V_ji
                e.add_scaled(&self.re(j, i), z.re);
                e.add_scaled(&self.im(j, i), -z.im);
            }
        }
        e
    }

    /// `V_rr = 1` for every `r`.
    pub fn unit_diagonal(&self) -> ConeConstraint {
        let rows = (0..self.order).map(|r| self.re(r, r).plus(&LinExpr::constant(-1.0))).collect();
        ConeConstraint::new(Cone::Zero(self.order), rows)
    }

    /// PSD constraint on the order-`2n` real embedding.
    pub fn psd(&self) -> ConeConstraint {
        let n = self.order;
        let entry = |p: usize, q: usize| -> LinExpr {
            match (p < n, q < n) {
                (true, true) => self.re(p, q),
                (false, false) => self.re(p - n, q - n),
                (true, false) => self.im(p, q - n).scaled(-1.0),
                (false, true) => self.im(p - n, q),
            }
        };
        let mut rows = Vec::with_capacity(n * (2 * n + 1));
        for q in 0..2 * n {
            for p in 0..=q {
                rows.push(entry(p, q));
            }
        }
        ConeConstraint::new(Cone::Psd(2 * n), rows)
    }

    /// Assemble the Hermitian matrix from a primal vector.
    pub fn value(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.order, self.order, |i, j| C64::new(self.re(i, j).eval(x), self.im(i, j).eval(x)))
    }

    /// Write `v` into a primal vector.
    pub fn write(&self, v: &CMatrix, x: &mut [f64]) {
        for j in 0..self.order {
            for i in 0..=j {
                x[self.re_index(i, j)] = v[(i, j)].re;
                if i < j {
                    x[self.im_index(i, j)] = v[(i, j)].im;
                }
            }
        }
    }
}

/// `rate <= bandwidth * log2(1 + sinr)` as one exponential-cone membership
/// `(ln2 * rate / bandwidth, 1, 1 + sinr)`. Together with the cone's domain
/// this also forces `1 + sinr > 0`; callers add `sinr >= 0` separately.
pub fn rate_log_constraint(rate_var: usize, sinr_var: usize, bandwidth: f64) -> ConeConstraint {
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    ConeConstraint::new(
        Cone::Exponential,
        vec![
            LinExpr::term(rate_var, std::f64::consts::LN_2 / bandwidth),
            LinExpr::constant(1.0),
            LinExpr { terms: vec![(sinr_var, 1.0)], constant: 1.0 },
        ],
    )
}

/// `||u||^2 <= bound` as the second-order cone `(bound + 1, 2u, bound - 1)`.
pub fn quadratic_epigraph(u: Vec<LinExpr>, bound: &LinExpr) -> ConeConstraint {
    let mut rows = Vec::with_capacity(u.len() + 2);
    rows.push(bound.clone().plus(&LinExpr::constant(1.0)));
    rows.extend(u.into_iter().map(|e| e.scaled(2.0)));
    rows.push(bound.clone().plus(&LinExpr::constant(-1.0)));
    let d = rows.len();
    ConeConstraint::new(Cone::SecondOrder(d), rows)
}
