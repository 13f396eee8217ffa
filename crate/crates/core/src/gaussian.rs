//! Weighted Gaussian components and the mixtures built from them.
//!
//! A [`GaussianComponent`] validates its covariance once, at construction,
//! and keeps the Cholesky factor around so densities and Mahalanobis
//! distances are a triangular solve away.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector2};

use crate::error::{Error, Result};

/// Symmetry tolerance before a covariance is averaged with its transpose.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianComponent {
    /// Builds a component, checking `weight >= 0`, a finite mean and a
    /// positive-definite covariance. An asymmetric or numerically drifted
    /// covariance is averaged with its transpose once before rejection.
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidComponent(format!(
                "weight must be finite and nonnegative, got {weight}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidComponent(
                "mean has non-finite entries".into(),
            ));
        }
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidComponent("zero-dimensional mean".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean has dimension {d} but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidComponent(
                "covariance has non-finite entries".into(),
            ));
        }

        let scale = cov.amax().max(1.0);
        let asym = (&cov - cov.transpose()).amax();
        if asym <= SYMMETRY_TOL * scale {
            if let Some(chol) = Cholesky::new(cov.clone()) {
                return Ok(Self::assemble(weight, mean, cov, chol));
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        match Cholesky::new(sym.clone()) {
            Some(chol) => Ok(Self::assemble(weight, mean, sym, chol)),
            None => Err(Error::InvalidComponent(
                "covariance is not positive definite".into(),
            )),
        }
    }

    /// Convenience constructor for the 2-D position case.
    pub fn new_2d(weight: f64, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(
            weight,
            DVector::from_column_slice(&mean),
            DMatrix::from_row_slice(2, 2, &[cov[0][0], cov[0][1], cov[1][0], cov[1][1]]),
        )
    }

    fn assemble(
        weight: f64,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    ) -> Self {
        Self {
            weight,
            mean,
            cov,
            chol,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// First two coordinates of the mean, i.e. the position.
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidComponent(format!(
                "weight must be finite and nonnegative, got {weight}"
            )));
        }
        let mut out = self.clone();
        out.weight = weight;
        Ok(out)
    }

    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "replacement mean has dimension {}, expected {}",
                mean.len(),
                self.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidComponent(
                "mean has non-finite entries".into(),
            ));
        }
        let mut out = self.clone();
        out.mean = mean;
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    pub fn determinant(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..self.dim()).map(|i| l[(i, i)]).product::<f64>().powi(2)
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, component has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn mahalanobis_sq_unchecked(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    pub(crate) fn density_unchecked(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let l = self.chol.l_dirty();
        let sqrt_det: f64 = (0..self.dim()).map(|i| l[(i, i)]).product();
        let norm = (2.0 * PI).powf(0.5 * d) * sqrt_det;
        (-0.5 * self.mahalanobis_sq_unchecked(x)).exp() / norm
    }
}

/// Multivariate normal density of `c` at `x`, ignoring the weight.
pub fn gaussian_density(x: &DVector<f64>, c: &GaussianComponent) -> Result<f64> {
    c.check_point(x)?;
    Ok(c.density_unchecked(x))
}

/// `(x - m)^T P^-1 (x - m)`.
pub fn mahalanobis_sq(x: &DVector<f64>, c: &GaussianComponent) -> Result<f64> {
    c.check_point(x)?;
    Ok(c.mahalanobis_sq_unchecked(x))
}

/// Moment-matched merge: total weight, weight-averaged mean, and the
/// weight-averaged covariance including the spread of the means.
///
/// If every weight is zero the merge falls back to equal weights.
pub fn merge_moment(cs: &[GaussianComponent]) -> Result<GaussianComponent> {
    let first = cs.first().ok_or(Error::EmptyMerge)?;
    if cs.len() == 1 {
        return Ok(first.clone());
    }
    let d = first.dim();
    if cs.iter().any(|c| c.dim() != d) {
        return Err(Error::DimensionMismatch("merge of mixed dimensions".into()));
    }
    let total: f64 = cs.iter().map(|c| c.weight).sum();
    let fractions: Vec<f64> = if total > 0.0 {
        cs.iter().map(|c| c.weight / total).collect()
    } else {
        vec![1.0 / cs.len() as f64; cs.len()]
    };

    let mut mean = DVector::zeros(d);
    for (c, f) in cs.iter().zip(&fractions) {
        mean += &c.mean * *f;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (c, f) in cs.iter().zip(&fractions) {
        let dm = &c.mean - &mean;
        cov += (&c.cov + &dm * dm.transpose()) * *f;
    }
    GaussianComponent::new(total, mean, cov)
}

/// Plain-average merge: total weight, arithmetic mean of the means and of
/// the covariances.
pub fn merge_plain_average(cs: &[GaussianComponent]) -> Result<GaussianComponent> {
    let first = cs.first().ok_or(Error::EmptyMerge)?;
    if cs.len() == 1 {
        return Ok(first.clone());
    }
    let d = first.dim();
    if cs.iter().any(|c| c.dim() != d) {
        return Err(Error::DimensionMismatch("merge of mixed dimensions".into()));
    }
    let n = cs.len() as f64;
    let total: f64 = cs.iter().map(|c| c.weight).sum();
    let mean = cs.iter().fold(DVector::zeros(d), |acc, c| acc + &c.mean) / n;
    let cov = cs.iter().fold(DMatrix::zeros(d, d), |acc, c| acc + &c.cov) / n;
    GaussianComponent::new(total, mean, cov)
}

/// Gaussian-mixture approximation of the PHD. The sum of the weights is
/// the expected number of targets.
#[derive(Debug, Clone, Default)]
pub struct Intensity {
    components: Vec<GaussianComponent>,
}

impl Intensity {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push(&mut self, c: GaussianComponent) {
        self.components.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = GaussianComponent>) {
        self.components.extend(cs);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent> {
        self.components.iter()
    }

    /// Expected target count.
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

impl FromIterator<GaussianComponent> for Intensity {
    fn from_iter<I: IntoIterator<Item = GaussianComponent>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl IntoIterator for Intensity {
    type Item = GaussianComponent;
    type IntoIter = std::vec::IntoIter<GaussianComponent>;

    fn into_iter(self) -> Self::IntoIter {
        self.components.into_iter()
    }
}

impl<'a> IntoIterator for &'a Intensity {
    type Item = &'a GaussianComponent;
    type IntoIter = std::slice::Iter<'a, GaussianComponent>;

    fn into_iter(self) -> Self::IntoIter {
        self.components.iter()
    }
}

/// Circular sensor footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovDisk {
    center: Vector2<f64>,
    radius: f64,
}

impl FovDisk {
    pub fn new(center: Vector2<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidComponent(format!(
                "fov radius must be positive, got {radius}"
            )));
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidComponent("fov center is not finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> Vector2<f64> {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (p - self.center).norm() <= self.radius
    }

    pub fn moved_to(&self, center: Vector2<f64>) -> Self {
        Self {
            center,
            radius: self.radius,
        }
    }
}
