use super::{BoxError, FixedPointProblem};
use crate::linalg::{dist, norm, Mat};

/// Affine map `x ↦ A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFixedPointProblem {
    a: Mat,
    b: Vec<f64>,
    eigenvalues: Option<Vec<f64>>,
    fixed_point: Option<Vec<f64>>,
}

impl LinearFixedPointProblem {
    pub fn new(a: Mat, b: Vec<f64>) -> Self {
        assert_eq!(a.rows(), a.cols(), "A must be square");
        assert_eq!(a.rows(), b.len(), "b must match A");
        Self {
            a,
            b,
            eigenvalues: None,
            fixed_point: None,
        }
    }

    /// `A = diag(d)`; eigenvalues and `x* = b / (1 - d)` are filled in.
    pub fn diagonal(d: &[f64], b: Vec<f64>) -> Self {
        let x_star = d.iter().zip(&b).map(|(di, bi)| bi / (1.0 - di)).collect();
        Self::new(Mat::from_diag(d), b)
            .with_eigenvalues(d.to_vec())
            .with_fixed_point(x_star)
    }

    /// Picks `b = (I - A) x*` so that `x*` is the fixed point.
    pub fn from_fixed_point(a: Mat, x_star: Vec<f64>) -> Self {
        let ax = a.matvec(&x_star);
        let b = x_star.iter().zip(&ax).map(|(x, y)| x - y).collect();
        Self::new(a, b).with_fixed_point(x_star)
    }

    /// Eigenvalues are stored sorted by decreasing modulus.
    pub fn with_eigenvalues(mut self, mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|p, q| q.abs().total_cmp(&p.abs()));
        self.eigenvalues = Some(eigenvalues);
        self
    }

    pub fn with_fixed_point(mut self, x_star: Vec<f64>) -> Self {
        assert_eq!(x_star.len(), self.b.len(), "fixed point must match b");
        self.fixed_point = Some(x_star);
        self
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    pub fn fixed_point(&self) -> Option<&[f64]> {
        self.fixed_point.as_deref()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.a.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        y
    }

    /// `‖x* - F(x*)‖ / ‖x*‖`, if a fixed point is stored.
    pub fn fixed_point_residual(&self) -> Option<f64> {
        let x = self.fixed_point.as_deref()?;
        let n = norm(x);
        let r = dist(x, &self.apply(x));
        Some(if n > 0.0 { r / n } else { r })
    }

    /// `‖x - x*‖ / ‖x*‖`, if a fixed point is stored.
    pub fn relative_error(&self, x: &[f64]) -> Option<f64> {
        let x_star = self.fixed_point.as_deref()?;
        let n = norm(x_star);
        let e = dist(x, x_star);
        Some(if n > 0.0 { e / n } else { e })
    }
}

impl FixedPointProblem for LinearFixedPointProblem {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>, BoxError> {
        Ok(self.apply(x))
    }
}
