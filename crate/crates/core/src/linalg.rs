//! Small dense complex kernels: the (regularized) Gram inverse of a subset of
//! channel columns and its downdate when one device leaves the subset.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{CoordError, Result};
use crate::model::{CoordinationProblem, DeviceSubset};

/// Minimum reciprocal 1-norm condition number accepted for an unregularized
/// Gram matrix.
pub const CONDITION_THRESHOLD: f64 = 1e-12;

/// Minimum downdate pivot, relative to the largest diagonal entry of the
/// inverse being downdated.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Dense complex matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a real-valued matrix from row-major rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let l = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == l), "ragged rows");
        Self::from_fn(n, l, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let r = rhs[(k, j)];
                if r == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..self.rows {
                    out[(i, j)] += self[(i, k)] * r;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for (j, vj) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.column(j)) {
                *o += a * vj;
            }
        }
        out
    }

    pub fn conj_transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|A - A^H|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `‖self - other‖_F / ‖other‖_F`.
    pub fn relative_distance(&self, other: &CMatrix) -> f64 {
        self.sub(other).frobenius_norm() / other.frobenius_norm().max(f64::MIN_POSITIVE)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Inverse of `H_S^T H_S^* + λ I` for a device subset `S`, rows and columns
/// ordered by ascending device index.
#[derive(Debug, Clone, PartialEq)]
pub struct GramInverseState {
    subset: DeviceSubset,
    members: Vec<usize>,
    inverse: CMatrix,
    regularizer: f64,
}

impl GramInverseState {
    pub fn subset(&self) -> DeviceSubset {
        self.subset
    }

    /// Devices of the subset (0-based, ascending); row `i` of the inverse
    /// belongs to `members()[i]`.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn inverse(&self) -> &CMatrix {
        &self.inverse
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    /// `(H_S^T H_S^* + λI)^{-1} φ_S`.
    pub fn solve_weights(&self, problem: &CoordinationProblem) -> Vec<Complex64> {
        let phi: Vec<Complex64> = self
            .members
            .iter()
            .map(|&l| Complex64::new(problem.weights()[l], 0.0))
            .collect();
        self.inverse.mul_vec(&phi)
    }

    /// The receiver `(1/√P) H_S^* (H_S^T H_S^* + λI)^{-1} φ_S`.
    pub fn receiver(&self, problem: &CoordinationProblem) -> Vec<Complex64> {
        let w = self.solve_weights(problem);
        let scale = 1.0 / problem.power().sqrt();
        let mut m = vec![Complex64::new(0.0, 0.0); problem.antennas()];
        for (&l, wl) in self.members.iter().zip(&w) {
            for (mi, h) in m.iter_mut().zip(problem.channel().column(l)) {
                *mi += h.conj() * wl;
            }
        }
        m.iter_mut().for_each(|z| *z *= scale);
        m
    }
}

/// The regularized conjugate Gram matrix `H_S^T H_S^* + λ I`.
pub fn gram_matrix(problem: &CoordinationProblem, members: &[usize], regularizer: f64) -> CMatrix {
    let h = problem.channel();
    let mut g = CMatrix::zeros(members.len(), members.len());
    for (i, &a) in members.iter().enumerate() {
        for (j, &b) in members.iter().enumerate().skip(i) {
            let v: Complex64 = h
                .column(a)
                .iter()
                .zip(h.column(b))
                .map(|(x, y)| x * y.conj())
                .sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(i, i)] = Complex64::new(g[(i, i)].re + regularizer, 0.0);
    }
    g
}

/// Inverts a Hermitian positive-definite matrix through its Cholesky factor.
/// Returns `None` when a pivot is not strictly positive.
fn hermitian_pd_inverse(g: &CMatrix) -> Option<CMatrix> {
    let n = g.rows();
    let mut c = CMatrix::zeros(n, n);
    for j in 0..n {
        let d = g[(j, j)].re - (0..j).map(|k| c[(j, k)].norm_sqr()).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        let cjj = d.sqrt();
        c[(j, j)] = Complex64::new(cjj, 0.0);
        for i in j + 1..n {
            let s: Complex64 = (0..j).map(|k| c[(i, k)] * c[(j, k)].conj()).sum();
            c[(i, j)] = (g[(i, j)] - s) / cjj;
        }
    }
    // x = c^{-1}, lower triangular
    let mut x = CMatrix::zeros(n, n);
    for j in 0..n {
        x[(j, j)] = Complex64::new(1.0 / c[(j, j)].re, 0.0);
        for i in j + 1..n {
            let s: Complex64 = (j..i).map(|k| c[(i, k)] * x[(k, j)]).sum();
            x[(i, j)] = -s / c[(i, i)].re;
        }
    }
    // g^{-1} = x^H x
    let mut inv = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: Complex64 = (j..n).map(|k| x[(k, i)].conj() * x[(k, j)]).sum();
            inv[(i, j)] = v;
            inv[(j, i)] = v.conj();
        }
        inv[(i, i)].im = 0.0;
    }
    Some(inv)
}

/// Computes `(H_S^T H_S^* + λ I)^{-1}` from scratch.
pub fn gram_inverse(
    problem: &CoordinationProblem,
    subset: DeviceSubset,
    regularizer: f64,
) -> Result<GramInverseState> {
    if !(regularizer >= 0.0) || !regularizer.is_finite() {
        return Err(CoordError::InvalidProblem(format!(
            "regularizer must be finite and non-negative, got {regularizer}"
        )));
    }
    subset.validate(problem.devices())?;
    let members: Vec<usize> = subset.iter().collect();
    if members.is_empty() {
        return Err(CoordError::InvalidSubset("empty subset".into()));
    }
    let g = gram_matrix(problem, &members, regularizer);
    let inverse = hermitian_pd_inverse(&g).ok_or(CoordError::SingularGram { rcond: 0.0 })?;
    if regularizer == 0.0 {
        let rcond = 1.0 / (g.norm_one() * inverse.norm_one());
        if !(rcond >= CONDITION_THRESHOLD) {
            return Err(CoordError::SingularGram { rcond });
        }
    }
    Ok(GramInverseState {
        subset,
        members,
        inverse,
        regularizer,
    })
}

/// Removes one device from a Gram inverse by a Schur-complement downdate.
///
/// With `B = A^{-1}` partitioned around the removed index `p`, the inverse of
/// `A` without row and column `p` is `B₁₁ - c cᴴ / β` where `c` is column `p`
/// of `B` (minus its pivot) and `β = B_pp`.
pub fn downdate_remove_device(
    state: &GramInverseState,
    problem: &CoordinationProblem,
    device: usize,
) -> Result<GramInverseState> {
    if device >= problem.devices() {
        return Err(CoordError::InvalidSubset(format!(
            "device {} outside 1..={}",
            device + 1,
            problem.devices()
        )));
    }
    let p = state
        .members
        .iter()
        .position(|&l| l == device)
        .ok_or_else(|| {
            CoordError::InvalidSubset(format!("device {} not in {}", device + 1, state.subset))
        })?;
    let n = state.members.len();
    if n < 2 {
        return Err(CoordError::InvalidSubset(
            "cannot remove the last device of a subset".into(),
        ));
    }
    let b = &state.inverse;
    let beta = b[(p, p)].re;
    let scale = (0..n).map(|i| b[(i, i)].re.abs()).fold(0.0, f64::max);
    if !(beta > PIVOT_THRESHOLD * scale) {
        return Err(CoordError::NumericalInstability { pivot: beta });
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != p).collect();
    let mut inverse = CMatrix::zeros(n - 1, n - 1);
    for (ni, &i) in keep.iter().enumerate() {
        for (nj, &j) in keep.iter().enumerate().skip(ni) {
            let v = b[(i, j)] - b[(i, p)] * b[(p, j)] / beta;
            inverse[(ni, nj)] = v;
            inverse[(nj, ni)] = v.conj();
        }
        inverse[(ni, ni)].im = 0.0;
    }
    Ok(GramInverseState {
        subset: state.subset.without(device),
        members: keep.iter().map(|&i| state.members[i]).collect(),
        inverse,
        regularizer: state.regularizer,
    })
}

/// Downdate with silent fallback to a fresh inversion; `fallbacks` counts the
/// recomputations.
pub fn downdate_or_recompute(
    state: &GramInverseState,
    problem: &CoordinationProblem,
    device: usize,
    fallbacks: &mut usize,
) -> Result<GramInverseState> {
    match downdate_remove_device(state, problem, device) {
        Ok(s) => Ok(s),
        Err(CoordError::NumericalInstability { .. }) => {
            *fallbacks += 1;
            gram_inverse(problem, state.subset.without(device), state.regularizer)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example_network;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn problem_from_columns(cols: &[&[f64]]) -> CoordinationProblem {
        let n = cols[0].len();
        let h = CMatrix::from_fn(n, cols.len(), |i, j| c(cols[j][i]));
        CoordinationProblem::new(h, vec![1.0; cols.len()], 1.0, 0.0).unwrap()
    }

    #[test]
    fn single_device_unit_channel() {
        let p = problem_from_columns(&[&[1.0, 0.0]]);
        let s = gram_inverse(&p, DeviceSubset::full(1), 0.0).unwrap();
        assert!((s.inverse()[(0, 0)] - c(1.0)).norm() < 1e-15);
        let s = gram_inverse(&p, DeviceSubset::full(1), 1.0).unwrap();
        assert!((s.inverse()[(0, 0)] - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_downdate_decouples() {
        let p = problem_from_columns(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = gram_inverse(&p, DeviceSubset::full(2), 0.0).unwrap();
        let d = downdate_remove_device(&s, &p, 1).unwrap();
        assert_eq!(d.members(), &[0]);
        assert!((d.inverse()[(0, 0)] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let p = problem_from_columns(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let err = gram_inverse(&p, DeviceSubset::full(2), 0.0).unwrap_err();
        assert!(matches!(err, CoordError::SingularGram { .. }));
        // regularization restores invertibility
        assert!(gram_inverse(&p, DeviceSubset::full(2), 0.1).is_ok());
    }

    #[test]
    fn more_devices_than_antennas_is_singular() {
        let p = problem_from_columns(&[&[1.0], &[0.5]]);
        assert!(gram_inverse(&p, DeviceSubset::full(2), 0.0).is_err());
    }

    #[test]
    fn example_network_inverse_is_hermitian_and_inverts() {
        let p = example_network(0.1);
        let s = gram_inverse(&p, DeviceSubset::full(4), 0.0).unwrap();
        assert!(s.inverse().hermitian_defect() < 1e-10);
        let g = gram_matrix(&p, s.members(), 0.0);
        let prod = s.inverse().mul(&g);
        assert!(prod.relative_distance(&CMatrix::identity(4)) < 1e-8);
    }

    #[test]
    fn removing_absent_device_is_rejected() {
        let p = example_network(0.1);
        let s = gram_inverse(&p, DeviceSubset::from_indices(&[0, 1]), 0.0).unwrap();
        assert!(downdate_remove_device(&s, &p, 3).is_err());
        let single = gram_inverse(&p, DeviceSubset::singleton(0), 0.0).unwrap();
        assert!(downdate_remove_device(&single, &p, 0).is_err());
    }

    #[test]
    fn negative_regularizer_rejected() {
        let p = example_network(0.1);
        assert!(gram_inverse(&p, DeviceSubset::full(4), -1.0).is_err());
    }
}
