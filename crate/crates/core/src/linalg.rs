//! Small dense complex matrices.
//!
//! Sizes in this crate are tiny (a few hundred entries at most), so storage is
//! a plain row-major `Vec` and products are straightforward triple loops.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("CMatrix::from_vec"));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "CMatrix::from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from its entries.
    pub fn column(entries: Vec<Complex>) -> Result<Self> {
        let n = entries.len();
        Self::from_vec(n, 1, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn col(&self, c: usize) -> CMatrix {
        CMatrix::from_fn(self.rows, 1, |r, _| self[(r, c)])
    }

    pub fn set_col(&mut self, c: usize, v: &CMatrix) {
        debug_assert_eq!(v.shape(), (self.rows, 1));
        for r in 0..self.rows {
            self[(r, c)] = v.data[r];
        }
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: Complex) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex;

    fn index(&self, (r, c): (usize, usize)) -> &Complex {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex {
        &mut self.data[r * self.cols + c]
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = CMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose.
pub fn hermitian(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols, a.rows, |r, c| a[(c, r)].conj())
}

/// Sum of squared entry moduli.
///
/// Terms are summed in ascending order so the result depends only on the
/// multiset of entries; in particular it is bit-identical for `a` and its
/// conjugate transpose.
pub fn frobenius_norm_sq(a: &CMatrix) -> f64 {
    let mut terms: Vec<f64> = a.data.iter().map(|z| z.norm_sqr()).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Diagonal phase-shift matrix `diag(e^{jθ_1}, …, e^{jθ_N})`.
pub fn diag_from_phases(theta: &[f64]) -> Result<CMatrix> {
    if theta.is_empty() {
        return Err(Error::Empty("diag_from_phases"));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("diag_from_phases"));
    }
    let n = theta.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &t) in theta.iter().enumerate() {
        let w = wrap_phase(t);
        m[(i, i)] = Complex::new(w.cos(), w.sin());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn identity_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random(2, 2, &mut rng);
        assert_eq!(matmul(&CMatrix::identity(2), &b).unwrap(), b);
        assert_eq!(matmul(&b, &CMatrix::identity(2)).unwrap(), b);
    }

    #[test]
    fn imaginary_unit_squared() {
        let i = CMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
        let p = matmul(&i, &i).unwrap();
        assert_eq!(p[(0, 0)], c(-1.0, 0.0));
    }

    #[test]
    fn matmul_matches_scalar_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(3, 2, &mut rng);
        let b = random(2, 4, &mut rng);
        let p = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let (mut re, mut im) = (0.0, 0.0);
                for k in 0..2 {
                    let (ar, ai) = (a[(i, k)].re, a[(i, k)].im);
                    let (br, bi) = (b[(k, j)].re, b[(k, j)].im);
                    re += ar * br - ai * bi;
                    im += ar * bi + ai * br;
                }
                assert!((p[(i, j)].re - re).abs() < 1e-12);
                assert!((p[(i, j)].im - im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let err = matmul(&CMatrix::zeros(2, 3), &CMatrix::zeros(2, 3)).unwrap_err();
        match err {
            Error::Shape { left, right, .. } => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hermitian_cases() {
        let s = CMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(5.0, 0.0)],
        )
        .unwrap();
        assert_eq!(hermitian(&s), s);
        let i = CMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(hermitian(&i)[(0, 0)], c(0.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(4, 3, &mut rng);
        assert_eq!(hermitian(&a).shape(), (3, 4));
        assert_eq!(hermitian(&hermitian(&a)), a);
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_norm_sq(&CMatrix::zeros(3, 2)), 0.0);
        let a = CMatrix::from_vec(1, 1, vec![c(3.0, 4.0)]).unwrap();
        assert_eq!(frobenius_norm_sq(&a), 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(3, 3, &mut rng);
        let tr = matmul(&a, &hermitian(&a)).unwrap().trace();
        assert!((frobenius_norm_sq(&a) - tr.re).abs() < 1e-12);
        assert!(tr.im.abs() < 1e-12);
        assert_eq!(frobenius_norm_sq(&a), frobenius_norm_sq(&hermitian(&a)));
    }

    #[test]
    fn diag_from_phases_cases() {
        assert_eq!(diag_from_phases(&[0.0, 0.0]).unwrap(), CMatrix::identity(2));
        let m = diag_from_phases(&[PI]).unwrap();
        assert!((m[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-12);
        let m = diag_from_phases(&[PI / 2.0, 3.0 * PI / 2.0]).unwrap();
        assert!((m[(0, 0)] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((m[(1, 1)] - c(0.0, -1.0)).norm() < 1e-12);
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
        assert_eq!(m[(1, 0)], c(0.0, 0.0));
        assert!(matches!(diag_from_phases(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn diag_unit_modulus_over_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(1..12);
            let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let m = diag_from_phases(&theta).unwrap();
            for i in 0..n {
                assert!((m[(i, i)].norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrap_phase_range() {
        for t in [-1e-300, -TAU, 0.0, TAU, 3.0 * TAU + 0.5, -0.25] {
            let w = wrap_phase(t);
            assert!((0.0..TAU).contains(&w), "{t} -> {w}");
        }
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), rows * cols).prop_map(
                move |v| {
                    CMatrix::from_vec(rows, cols, v.into_iter().map(|(r, i)| c(r, i)).collect())
                        .unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn associativity(a in arb_matrix(3, 2), b in arb_matrix(2, 4), cm in arb_matrix(4, 2)) {
                let left = matmul(&matmul(&a, &b).unwrap(), &cm).unwrap();
                let right = matmul(&a, &matmul(&b, &cm).unwrap()).unwrap();
                let scale = left.data().iter().map(|z| z.norm()).fold(1.0, f64::max);
                prop_assert!(left.max_abs_diff(&right) <= 1e-10 * scale);
            }

            #[test]
            fn identity_exact(a in arb_matrix(3, 4)) {
                prop_assert_eq!(matmul(&CMatrix::identity(3), &a).unwrap(), a.clone());
                prop_assert_eq!(matmul(&a, &CMatrix::identity(4)).unwrap(), a);
            }

            #[test]
            fn norm_of_hermitian_exact(a in arb_matrix(2, 5)) {
                prop_assert_eq!(frobenius_norm_sq(&a), frobenius_norm_sq(&hermitian(&a)));
            }
        }
    }
}
