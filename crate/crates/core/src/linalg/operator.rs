use crate::linalg::{dot, DenseMatrix, Factorization};

/// Matrix-free linear map `R^{ncols} -> R^{nrows}` with its transpose.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `y = A x`; `y` has length `nrows` and is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// `y = Aᵀ x`; `y` has length `ncols` and is overwritten.
    fn apply_t(&self, x: &[f64], y: &mut [f64]);

    /// `A X` column by column.
    fn apply_block(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.nrows(), x.ncols());
        for k in 0..x.ncols() {
            self.apply(x.col(k), out.col_mut(k));
        }
        out
    }

    /// `Aᵀ X` column by column.
    fn apply_t_block(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.ncols(), x.ncols());
        for k in 0..x.ncols() {
            self.apply_t(x.col(k), out.col_mut(k));
        }
        out
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        DenseMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        DenseMatrix::ncols(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                    *yi += a * xj;
                }
            }
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(self.col(j), x);
        }
    }
}

impl LinearOperator for Factorization {
    fn nrows(&self) -> usize {
        self.u.nrows()
    }

    fn ncols(&self) -> usize {
        self.v.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t: Vec<f64> = (0..self.rank()).map(|k| dot(self.v.col(k), x)).collect();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (k, &tk) in t.iter().enumerate() {
            for (yi, &u) in y.iter_mut().zip(self.u.col(k)) {
                *yi += u * tk;
            }
        }
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        self.transpose_view_apply(x, y)
    }
}

impl Factorization {
    fn transpose_view_apply(&self, x: &[f64], y: &mut [f64]) {
        let t: Vec<f64> = (0..self.rank()).map(|k| dot(self.u.col(k), x)).collect();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (k, &tk) in t.iter().enumerate() {
            for (yi, &v) in y.iter_mut().zip(self.v.col(k)) {
                *yi += v * tk;
            }
        }
    }
}

/// `A - B` applied implicitly.
pub struct Residual<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<'a, A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> Residual<'a, A, B> {
    pub fn new(a: &'a A, b: &'a B) -> Self {
        assert_eq!(a.nrows(), b.nrows(), "residual row mismatch");
        assert_eq!(a.ncols(), b.ncols(), "residual column mismatch");
        Self { a, b }
    }
}

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator for Residual<'_, A, B> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        y.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= b);
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; y.len()];
        self.a.apply_t(x, y);
        self.b.apply_t(x, &mut tmp);
        y.iter_mut().zip(&tmp).for_each(|(a, b)| *a -= b);
    }
}

/// The product `A·B` applied right to left, never formed.
pub struct Product<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<'a, A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> Product<'a, A, B> {
    pub fn new(a: &'a A, b: &'a B) -> Self {
        assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
        Self { a, b }
    }
}

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator for Product<'_, A, B> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }

    fn ncols(&self) -> usize {
        self.b.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.b.nrows()];
        self.b.apply(x, &mut t);
        self.a.apply(&t, y);
    }

    fn apply_t(&self, x: &[f64], y: &mut [f64]) {
        let mut t = vec![0.0; self.a.ncols()];
        self.a.apply_t(x, &mut t);
        self.b.apply_t(&t, y);
    }
}
