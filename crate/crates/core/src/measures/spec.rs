//! Declarative measure specifications and their JSON schema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of a log-concave probability measure. The
/// variant set is closed under product, affine image and exponential
/// tilt, which is what guarantees log-concavity of everything that can
/// be written down here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Centered Gaussian; identity covariance when `covariance` is absent.
    Gaussian {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    UniformBall {
        dim: usize,
        radius: f64,
    },
    UniformCube {
        dim: usize,
        halfwidth: f64,
    },
    /// Uniform measure on conv{0, e_1, ..., e_n}.
    UniformSimplex {
        dim: usize,
    },
    UniformPolytopeV {
        vertices: Vec<Vec<f64>>,
    },
    Product {
        parts: Vec<MeasureSpec>,
    },
    #[serde(rename = "affine")]
    AffineImage {
        base: Box<MeasureSpec>,
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    /// Exponential tilt of `base` by `xi`, recentered at its barycenter.
    Tilt {
        base: Box<MeasureSpec>,
        xi: Vec<f64>,
    },
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points_file: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl MeasureSpec {
    pub fn gaussian(dim: usize) -> Self {
        MeasureSpec::Gaussian { dim, covariance: None }
    }

    pub fn cube(dim: usize, halfwidth: f64) -> Self {
        MeasureSpec::UniformCube { dim, halfwidth }
    }

    /// Isotropic cube: covariance identity (halfwidth √3).
    pub fn isotropic_cube(dim: usize) -> Self {
        MeasureSpec::UniformCube { dim, halfwidth: 3f64.sqrt() }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        MeasureSpec::UniformBall { dim, radius }
    }

    /// Isotropic ball D_m = √(m+2)·B_m.
    pub fn isotropic_ball(dim: usize) -> Self {
        MeasureSpec::UniformBall { dim, radius: ((dim + 2) as f64).sqrt() }
    }

    pub fn simplex(dim: usize) -> Self {
        MeasureSpec::UniformSimplex { dim }
    }

    pub fn product(parts: Vec<MeasureSpec>) -> Self {
        MeasureSpec::Product { parts }
    }

    pub fn affine(base: MeasureSpec, matrix: Vec<Vec<f64>>, shift: Vec<f64>) -> Self {
        MeasureSpec::AffineImage { base: Box::new(base), matrix, shift }
    }

    pub fn tilt(base: MeasureSpec, xi: Vec<f64>) -> Self {
        MeasureSpec::Tilt { base: Box::new(base), xi }
    }

    pub fn empirical(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Self {
        MeasureSpec::Empirical { points_file: None, points: Some(points), weights }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Gaussian { dim, .. }
            | MeasureSpec::UniformBall { dim, .. }
            | MeasureSpec::UniformCube { dim, .. }
            | MeasureSpec::UniformSimplex { dim } => *dim,
            MeasureSpec::UniformPolytopeV { vertices } => {
                vertices.first().map(|v| v.len()).unwrap_or(0)
            }
            MeasureSpec::Product { parts } => parts.iter().map(|p| p.dim()).sum(),
            MeasureSpec::AffineImage { matrix, .. } => matrix.len(),
            MeasureSpec::Tilt { base, .. } => base.dim(),
            MeasureSpec::Empirical { points, .. } => {
                points.as_ref().and_then(|p| p.first()).map(|v| v.len()).unwrap_or(0)
            }
        }
    }

    /// Compact human-readable label used in reports.
    pub fn descriptor(&self) -> String {
        match self {
            MeasureSpec::Gaussian { dim, covariance: None } => format!("gaussian(dim={dim})"),
            MeasureSpec::Gaussian { dim, .. } => format!("gaussian(dim={dim},cov)"),
            MeasureSpec::UniformBall { dim, radius } => {
                format!("ball(dim={dim},r={radius:.4})")
            }
            MeasureSpec::UniformCube { dim, halfwidth } => {
                format!("cube(dim={dim},hw={halfwidth:.4})")
            }
            MeasureSpec::UniformSimplex { dim } => format!("simplex(dim={dim})"),
            MeasureSpec::UniformPolytopeV { vertices } => {
                format!("polytope(dim={},verts={})", self.dim(), vertices.len())
            }
            MeasureSpec::Product { parts } => {
                let inner: Vec<String> = parts.iter().map(|p| p.descriptor()).collect();
                format!("product[{}]", inner.join("x"))
            }
            MeasureSpec::AffineImage { base, .. } => format!("affine({})", base.descriptor()),
            MeasureSpec::Tilt { base, .. } => format!("tilt({})", base.descriptor()),
            MeasureSpec::Empirical { points, .. } => {
                format!(
                    "empirical(dim={},n={})",
                    self.dim(),
                    points.as_ref().map(|p| p.len()).unwrap_or(0)
                )
            }
        }
    }

    /// Structural validation of the declared invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Gaussian { dim, covariance } => {
                if *dim == 0 {
                    return Err(Error::InvalidSpec("gaussian dim must be ≥ 1".into()));
                }
                if let Some(c) = covariance {
                    if c.len() != *dim || c.iter().any(|row| row.len() != *dim) {
                        return Err(Error::InvalidSpec("covariance shape mismatch".into()));
                    }
                }
                Ok(())
            }
            MeasureSpec::UniformBall { dim, radius } => {
                if *dim == 0 || *radius <= 0.0 {
                    return Err(Error::InvalidSpec("ball needs dim ≥ 1 and radius > 0".into()));
                }
                Ok(())
            }
            MeasureSpec::UniformCube { dim, halfwidth } => {
                if *dim == 0 || *halfwidth <= 0.0 {
                    return Err(Error::InvalidSpec("cube needs dim ≥ 1 and halfwidth > 0".into()));
                }
                Ok(())
            }
            MeasureSpec::UniformSimplex { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidSpec("simplex dim must be ≥ 1".into()));
                }
                Ok(())
            }
            MeasureSpec::UniformPolytopeV { vertices } => {
                let d = self.dim();
                if d == 0 || vertices.len() < d + 1 {
                    return Err(Error::DegenerateSpec(
                        "polytope needs ≥ dim+1 vertices".into(),
                    ));
                }
                if vertices.iter().any(|v| v.len() != d) {
                    return Err(Error::InvalidSpec("ragged vertex list".into()));
                }
                Ok(())
            }
            MeasureSpec::Product { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidSpec("empty product".into()));
                }
                parts.iter().try_for_each(|p| p.validate())
            }
            MeasureSpec::AffineImage { base, matrix, shift } => {
                base.validate()?;
                let n = base.dim();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidSpec("affine matrix must be dim×dim".into()));
                }
                if shift.len() != n {
                    return Err(Error::InvalidSpec("affine shift length mismatch".into()));
                }
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                // full-rank requirement
                let svd = m.svd(false, false);
                let smax = svd.singular_values.max();
                let smin = svd.singular_values.min();
                if smin <= 1e-12 * smax.max(1.0) {
                    return Err(Error::DegenerateSpec("affine matrix is rank-deficient".into()));
                }
                Ok(())
            }
            MeasureSpec::Tilt { base, xi } => {
                base.validate()?;
                if xi.len() != base.dim() {
                    return Err(Error::InvalidSpec("tilt xi length mismatch".into()));
                }
                Ok(())
            }
            MeasureSpec::Empirical { points, weights, points_file } => {
                let pts = match points {
                    Some(p) => p,
                    None => {
                        return Err(Error::InvalidSpec(format!(
                            "empirical spec not resolved (points_file = {points_file:?})"
                        )))
                    }
                };
                if pts.is_empty() {
                    return Err(Error::InvalidSpec("empirical needs points".into()));
                }
                let d = pts[0].len();
                if d == 0 || pts.iter().any(|p| p.len() != d) {
                    return Err(Error::InvalidSpec("ragged empirical points".into()));
                }
                if let Some(w) = weights {
                    if w.len() != pts.len() {
                        return Err(Error::InvalidSpec("weights length mismatch".into()));
                    }
                    if w.iter().any(|x| *x <= 0.0) {
                        return Err(Error::InvalidSpec("weights must be strictly positive".into()));
                    }
                    let s: f64 = w.iter().sum();
                    if (s - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "weights must sum to 1 (got {s})"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Parses a spec from JSON, resolving any `points_file` references
    /// relative to `base_dir`.
    pub fn from_json_str(s: &str, base_dir: &std::path::Path) -> Result<MeasureSpec> {
        let mut spec: MeasureSpec = serde_json::from_str(s)
            .map_err(|e| Error::InvalidSpec(format!("measure json: {e}")))?;
        spec.resolve_files(base_dir)?;
        spec.validate()?;
        Ok(spec)
    }

    fn resolve_files(&mut self, base_dir: &std::path::Path) -> Result<()> {
        match self {
            MeasureSpec::Empirical { points_file: Some(f), points, .. } if points.is_none() => {
                let path = base_dir.join(&*f);
                let text = std::fs::read_to_string(&path)?;
                let mut pts = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let row: std::result::Result<Vec<f64>, _> =
                        line.split(',').map(|t| t.trim().parse::<f64>()).collect();
                    match row {
                        Ok(r) => pts.push(r),
                        Err(e) => {
                            return Err(Error::InvalidSpec(format!(
                                "{}:{}: {e}",
                                path.display(),
                                lineno + 1
                            )))
                        }
                    }
                }
                *points = Some(pts);
                Ok(())
            }
            MeasureSpec::Product { parts } => {
                parts.iter_mut().try_for_each(|p| p.resolve_files(base_dir))
            }
            MeasureSpec::AffineImage { base, .. } | MeasureSpec::Tilt { base, .. } => {
                base.resolve_files(base_dir)
            }
            _ => Ok(()),
        }
    }
}
