//! Log-concave probability measures: representation, sampling,
//! transformation and moments.

mod marginal;
mod node;
mod spec;

pub use marginal::{DensityFn, Law, Marginal1D};
pub use node::{Computed, Ctx, EvalMode};
pub use spec::MeasureSpec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimate::{batch_ranges, Estimate};
use crate::rng::derive_seed;
use node::Node;
use std::sync::{Arc, OnceLock};

/// A seeded point cloud with weights; `data` is row-major (point-major),
/// `weights` of `None` means uniform 1/n.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub dim: usize,
    pub data: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub ess: f64,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn dot(&self, i: usize, v: &DVector<f64>) -> f64 {
        let p = self.point(i);
        let mut acc = 0.0;
        for (a, b) in p.iter().zip(v.iter()) {
            acc += a * b;
        }
        acc
    }

    /// Weighted mean.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for i in 0..self.len() {
            let w = self.weight(i);
            let p = self.point(i);
            for j in 0..self.dim {
                m[j] += w * p[j];
            }
        }
        m
    }

    /// Flags importance-sampling degradation per the ESS < n/4 rule.
    pub fn low_ess(&self) -> bool {
        self.ess < self.len() as f64 / 4.0
    }
}

/// Barycenter / covariance results: exact or Monte Carlo with spread.
pub type VectorResult = Computed<DVector<f64>>;
pub type MatrixResult = Computed<DMatrix<f64>>;

/// A compiled measure: the validated spec plus its canonical evaluation
/// tree and the shared Monte Carlo context. Immutable after construction;
/// all operations are pure functions of `(self, arguments, seed)`.
pub struct Measure {
    spec: MeasureSpec,
    ctx: Ctx,
    root: Node,
    common: OnceLock<Arc<WeightedSample>>,
}

impl Measure {
    pub fn new(spec: MeasureSpec) -> Result<Measure> {
        Measure::with_ctx(spec, Ctx::default())
    }

    pub fn with_ctx(spec: MeasureSpec, ctx: Ctx) -> Result<Measure> {
        spec.validate()?;
        let root = node::build(&spec, &ctx)?;
        Ok(Measure { spec, ctx, root, common: OnceLock::new() })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn descriptor(&self) -> String {
        self.spec.descriptor()
    }

    pub fn is_symmetric(&self) -> bool {
        self.root.is_symmetric()
    }

    /// The shared sample backing every Monte Carlo evaluation of this
    /// measure (common random numbers).
    pub fn common_sample(&self) -> Arc<WeightedSample> {
        self.common
            .get_or_init(|| {
                Arc::new(self.root.sample(
                    self.ctx.samples,
                    derive_seed(self.ctx.seed, "common"),
                    &self.ctx,
                ))
            })
            .clone()
    }

    /// I.i.d. (or importance-reweighted, for tilts of empirical bases)
    /// sample of `count` points; bit-reproducible in `(spec, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<WeightedSample> {
        if count < 1 {
            return Err(Error::InvalidSpec("sample count must be ≥ 1".into()));
        }
        Ok(self.root.sample(count, seed, &self.ctx))
    }

    pub fn barycenter(&self) -> VectorResult {
        self.root.barycenter(&self.ctx)
    }

    pub fn covariance(&self) -> MatrixResult {
        self.root.covariance(&self.ctx)
    }

    /// det Cov(μ)^{1/2n}, the scale entering nearly every check.
    pub fn det_cov_power(&self) -> f64 {
        let cov = self.covariance().into_value();
        let n = self.dim() as f64;
        cov.determinant().max(0.0).powf(1.0 / (2.0 * n))
    }

    pub fn density_sup(&self) -> Result<f64> {
        self.root.density_sup()
    }

    /// Spec for the recentered measure (identity when already centered).
    pub fn recentered_spec(&self) -> MeasureSpec {
        let b = self.barycenter().into_value();
        if b.norm() == 0.0 {
            return self.spec.clone();
        }
        let n = self.dim();
        let eye: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        MeasureSpec::affine(self.spec.clone(), eye, (-b).iter().copied().collect())
    }

    /// Whitening transform: returns an affine-image spec with barycenter 0
    /// and identity covariance.
    pub fn whiten(&self) -> Result<MeasureSpec> {
        let cov = self.covariance().into_value();
        let n = self.dim();
        let eig = nalgebra::SymmetricEigen::new(cov);
        let max_l = eig.eigenvalues.max();
        if eig.eigenvalues.min() <= 1e-12 * max_l.max(1.0) {
            return Err(Error::SingularCovariance);
        }
        let mut w = DMatrix::zeros(n, n);
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            let v = eig.eigenvectors.column(k);
            w += v * v.transpose() / lam.sqrt();
        }
        let b = self.barycenter().into_value();
        let shift = -(&w * b);
        Ok(MeasureSpec::affine(
            self.spec.clone(),
            (0..n).map(|i| (0..n).map(|j| w[(i, j)]).collect()).collect(),
            shift.iter().copied().collect(),
        ))
    }

    /// Push-forward under orthogonal projection onto `basis` (k×n rows).
    /// Gaussians project analytically; products project exactly when the
    /// basis selects whole coordinate blocks; everything else becomes an
    /// empirical measure built from the common sample.
    pub fn project(&self, basis: &crate::bodies::Subspace) -> Result<MeasureSpec> {
        basis.check()?;
        if basis.ambient_dim() != self.dim() {
            return Err(Error::InvalidSpec("subspace ambient dim mismatch".into()));
        }
        let k = basis.dim();

        if let MeasureSpec::Gaussian { .. } = &self.spec {
            let cov = self.covariance().into_value();
            let e = basis.matrix();
            let proj = e * cov * e.transpose();
            return Ok(MeasureSpec::Gaussian {
                dim: k,
                covariance: Some(
                    (0..k).map(|i| (0..k).map(|j| proj[(i, j)]).collect()).collect(),
                ),
            });
        }

        // axis-aligned selection: every row of the basis is ±e_i
        if let Some(cols) = basis.axis_columns() {
            if let Some(spec) = project_axis(&self.spec, &cols) {
                return Ok(spec);
            }
        }

        let s = self.common_sample();
        let e = basis.matrix();
        let mut pts = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let p = DVector::from_row_slice(s.point(i));
            let q = e * p;
            pts.push(q.iter().copied().collect::<Vec<f64>>());
        }
        Ok(MeasureSpec::empirical(pts, s.weights.clone()))
    }

    /// Law of ⟨v, X⟩ when analytic; `None` means Monte Carlo mode.
    pub fn marginal(&self, v: &DVector<f64>) -> Option<Marginal1D> {
        self.root.marginal(v)
    }

    /// E |⟨X, θ⟩|^p (the p-th moment *before* the 1/p power).
    pub fn directional_moment(&self, theta: &DVector<f64>, p: f64) -> Estimate {
        assert!(p >= 1.0, "directional moment needs p ≥ 1");
        if let Some(m) = self.marginal(theta) {
            return Estimate::exact(m.abs_moment(p));
        }
        let s = self.common_sample();
        let means = weighted_batch_means(&s, self.ctx.batches, |i| {
            s.dot(i, theta).abs().powf(p)
        });
        Estimate::from_batch_means(&means, s.len() as u64, s.seed).with_low_ess(s.low_ess())
    }

    /// P(⟨X, θ⟩ ≥ t).
    pub fn halfspace_mass(&self, theta: &DVector<f64>, t: f64) -> Estimate {
        if let Some(m) = self.marginal(theta) {
            return Estimate::exact(m.tail(t));
        }
        let s = self.common_sample();
        let means = weighted_batch_means(&s, self.ctx.batches, |i| {
            if s.dot(i, theta) >= t {
                1.0
            } else {
                0.0
            }
        });
        Estimate::from_batch_means(&means, s.len() as u64, s.seed).with_low_ess(s.low_ess())
    }

    /// log-Laplace transform Λ_μ(ξ) with its evaluation mode.
    pub fn log_laplace(&self, xi: &DVector<f64>) -> f64 {
        self.root.log_laplace(xi, &self.ctx)
    }

    pub fn laplace_mode(&self) -> EvalMode {
        self.root.laplace_mode()
    }

    pub fn lambda_grad(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.root.lambda_grad(xi, &self.ctx)
    }

    pub fn lambda_hess(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        self.root.lambda_hess(xi, &self.ctx)
    }

    /// Support function of supp(μ), None when unbounded.
    pub fn supp_h(&self, theta: &DVector<f64>) -> Option<f64> {
        self.root.supp_h(theta)
    }

    pub fn has_compact_support(&self) -> bool {
        let e1 = DVector::from_fn(self.dim(), |i, _| if i == 0 { 1.0 } else { 0.0 });
        self.root.supp_h(&e1).is_some()
    }

    /// Tilt as a spec (recentered by construction).
    pub fn tilt_spec(&self, xi: &DVector<f64>) -> MeasureSpec {
        MeasureSpec::tilt(self.spec.clone(), xi.iter().copied().collect())
    }
}

fn project_axis(spec: &MeasureSpec, cols: &[usize]) -> Option<MeasureSpec> {
    match spec {
        MeasureSpec::UniformCube { halfwidth, .. } => Some(MeasureSpec::UniformCube {
            dim: cols.len(),
            halfwidth: *halfwidth,
        }),
        MeasureSpec::Product { parts } => {
            // selected columns must cover whole parts
            let mut offsets = Vec::new();
            let mut acc = 0usize;
            for p in parts {
                offsets.push((acc, p.dim()));
                acc += p.dim();
            }
            let mut chosen: Vec<MeasureSpec> = Vec::new();
            let colset: std::collections::BTreeSet<usize> = cols.iter().copied().collect();
            for (p, (off, d)) in parts.iter().zip(offsets) {
                let inside = (off..off + d).filter(|c| colset.contains(c)).count();
                if inside == d {
                    chosen.push(p.clone());
                } else if inside > 0 {
                    // partial selection of a part: only cubes split cleanly
                    if let MeasureSpec::UniformCube { halfwidth, .. } = p {
                        chosen.push(MeasureSpec::UniformCube { dim: inside, halfwidth: *halfwidth });
                    } else {
                        return None;
                    }
                }
            }
            match chosen.len() {
                0 => None,
                1 => Some(chosen.pop().unwrap()),
                _ => Some(MeasureSpec::Product { parts: chosen }),
            }
        }
        _ => None,
    }
}

/// Weighted batch means over the sample's index chunks.
pub(crate) fn weighted_batch_means(
    s: &WeightedSample,
    batches: usize,
    mut f: impl FnMut(usize) -> f64,
) -> Vec<f64> {
    batch_ranges(s.len(), batches)
        .into_iter()
        .map(|(a, b)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in a..b {
                let w = s.weight(i);
                num += w * f(i);
                den += w;
            }
            num / den
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Subspace;

    fn unit(dim: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(dim, |j, _| if j == i { 1.0 } else { 0.0 })
    }

    fn small_ctx(seed: u64) -> Ctx {
        Ctx { samples: 1 << 14, batches: 16, seed }
    }

    #[test]
    fn gaussian_sample_has_uniform_weights() {
        let m = Measure::new(MeasureSpec::gaussian(2)).unwrap();
        let s = m.sample(4, 42).unwrap();
        assert_eq!(s.dim, 2);
        assert_eq!(s.len(), 4);
        assert!(s.weights.is_none());
        assert_eq!(s.weight(2), 0.25);
        assert_eq!(s.ess, 4.0);
    }

    #[test]
    fn cube_sample_mean_within_stderr() {
        let m = Measure::new(MeasureSpec::cube(1, 1.0)).unwrap();
        let s = m.sample(100_000, 7).unwrap();
        let mean = s.mean()[0];
        let sd = (1.0f64 / 3.0 / s.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd, "mean {mean}, 4sd {}", 4.0 * sd);
    }

    #[test]
    fn tilted_gaussian_samples_directly() {
        let spec = MeasureSpec::tilt(MeasureSpec::gaussian(2), vec![1.0, 0.0]);
        let m = Measure::new(spec).unwrap();
        let s = m.sample(10_000, 3).unwrap();
        assert_eq!(s.ess, 10_000.0, "gaussian tilt should sample analytically");
        assert!(s.weights.is_none());
    }

    #[test]
    fn sample_determinism_bit_identical() {
        let spec = MeasureSpec::tilt(MeasureSpec::ball(3, 2.0), vec![0.5, 0.0, 0.2]);
        let a = Measure::new(spec.clone()).unwrap().sample(2048, 9).unwrap();
        let b = Measure::new(spec).unwrap().sample(2048, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn barycenters() {
        let g = Measure::new(MeasureSpec::gaussian(3)).unwrap();
        assert_eq!(g.barycenter().into_value(), DVector::zeros(3));

        // exact simplex moment: barycenter of conv{0,e1,e2} is (1/3, 1/3)
        let s = Measure::new(MeasureSpec::simplex(2)).unwrap();
        let b = s.barycenter().into_value();
        assert!((b - DVector::from_element(2, 1.0 / 3.0)).norm() < 1e-14);

        // tilts are recentered by construction
        let t = Measure::new(MeasureSpec::tilt(MeasureSpec::cube(1, 1.0), vec![1.0])).unwrap();
        assert_eq!(t.barycenter().into_value(), DVector::zeros(1));
    }

    #[test]
    fn covariances() {
        let g = Measure::new(MeasureSpec::gaussian(4)).unwrap();
        assert_eq!(g.covariance().into_value(), DMatrix::identity(4, 4));

        let c = Measure::new(MeasureSpec::cube(2, 1.0)).unwrap();
        let cov = c.covariance().into_value();
        assert!((cov - DMatrix::identity(2, 2) / 3.0).norm() < 1e-14);

        // D_m = √(m+2)·B_m is isotropic
        for m in 2..=5 {
            let b = Measure::new(MeasureSpec::isotropic_ball(m)).unwrap();
            let cov = b.covariance().into_value();
            assert!((cov - DMatrix::identity(m, m)).norm() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn whiten_basics() {
        // standard gaussian: identity transform
        let g = Measure::new(MeasureSpec::gaussian(3)).unwrap();
        match g.whiten().unwrap() {
            MeasureSpec::AffineImage { matrix, shift, .. } => {
                for (i, row) in matrix.iter().enumerate() {
                    for (j, x) in row.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((x - want).abs() < 1e-12);
                    }
                }
                assert!(shift.iter().all(|x| x.abs() < 1e-12));
            }
            other => panic!("expected affine, got {other:?}"),
        }

        // cube scales by √3 per axis
        let c = Measure::new(MeasureSpec::cube(2, 1.0)).unwrap();
        if let MeasureSpec::AffineImage { matrix, .. } = c.whiten().unwrap() {
            assert!((matrix[0][0] - 3f64.sqrt()).abs() < 1e-12);
            assert!((matrix[1][1] - 3f64.sqrt()).abs() < 1e-12);
        } else {
            panic!("expected affine");
        }

        // unit ball in R⁴ scales by √6; whitened covariance is identity
        let b = Measure::new(MeasureSpec::ball(4, 1.0)).unwrap();
        let w = Measure::new(b.whiten().unwrap()).unwrap();
        let cov = w.covariance().into_value();
        assert!((cov - DMatrix::identity(4, 4)).norm() < 1e-10);
        if let MeasureSpec::AffineImage { matrix, .. } = w.spec() {
            assert!((matrix[0][0] - 6f64.sqrt()).abs() < 1e-10);
        }

        // whiten of a simplex (exact covariance): identity out
        let s = Measure::new(MeasureSpec::simplex(3)).unwrap();
        let ws = Measure::new(s.whiten().unwrap()).unwrap();
        let cov = ws.covariance().into_value();
        assert!((cov - DMatrix::identity(3, 3)).norm() < 1e-9);
        assert!(ws.barycenter().into_value().norm() < 1e-12);
    }

    #[test]
    fn projections() {
        let g = Measure::new(MeasureSpec::gaussian(5)).unwrap();
        let e = Subspace::axes(5, &[0, 1]);
        match g.project(&e).unwrap() {
            MeasureSpec::Gaussian { dim: 2, covariance: Some(c) } => {
                assert!((c[0][0] - 1.0).abs() < 1e-14);
                assert!(c[0][1].abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }

        // product of uniforms along e1: covariance 1/3
        let p = Measure::new(MeasureSpec::product(vec![
            MeasureSpec::cube(1, 1.0),
            MeasureSpec::cube(1, 1.0),
        ]))
        .unwrap();
        let proj = p.project(&Subspace::axes(2, &[0])).unwrap();
        let pm = Measure::new(proj).unwrap();
        let cov = pm.covariance().into_value();
        assert!((cov[(0, 0)] - 1.0 / 3.0).abs() < 1e-13);

        // full space: unchanged covariance
        let full = Subspace::axes(5, &[0, 1, 2, 3, 4]);
        let back = g.project(&full).unwrap();
        let bm = Measure::new(back).unwrap();
        assert!((bm.covariance().into_value() - DMatrix::identity(5, 5)).norm() < 1e-12);

        // non-orthonormal basis rejected
        let bad = DMatrix::from_row_slice(2, 5, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(Subspace::new(bad).is_err());
    }

    #[test]
    fn density_sups() {
        let c = Measure::new(MeasureSpec::cube(2, 1.0)).unwrap();
        assert!((c.density_sup().unwrap() - 0.25).abs() < 1e-14);

        let g = Measure::new(MeasureSpec::gaussian(2)).unwrap();
        assert!((g.density_sup().unwrap() - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-14);

        // jacobian scaling
        let a = Measure::new(MeasureSpec::affine(
            MeasureSpec::cube(1, 1.0),
            vec![vec![2.0]],
            vec![0.0],
        ))
        .unwrap();
        assert!((a.density_sup().unwrap() - 0.25).abs() < 1e-14);

        let e = Measure::new(MeasureSpec::empirical(vec![vec![0.0], vec![1.0]], None)).unwrap();
        assert!(matches!(e.density_sup(), Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn directional_moments_quadrature() {
        let g = Measure::new(MeasureSpec::gaussian(2)).unwrap();
        let m2 = g.directional_moment(&unit(2, 0), 2.0);
        assert!((m2.value - 1.0).abs() < 1e-12);
        assert_eq!(m2.stderr, 0.0);

        let c = Measure::new(MeasureSpec::cube(1, 1.0)).unwrap();
        let m1 = c.directional_moment(&unit(1, 0), 1.0);
        assert!((m1.value - 0.5).abs() < 1e-12);

        // E|g| = √(2/π) ≈ 0.797885 via quadrature
        let g3 = Measure::new(MeasureSpec::gaussian(3)).unwrap();
        let m = g3.directional_moment(&unit(3, 1), 1.0);
        assert!((m.value - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cube_diagonal_moment_spline_vs_mc() {
        let m = Measure::with_ctx(MeasureSpec::cube(3, 1.0), small_ctx(5)).unwrap();
        let th = DVector::from_element(3, 1.0 / 3f64.sqrt());
        let exact = m.directional_moment(&th, 3.0);
        assert_eq!(exact.stderr, 0.0, "cube marginal should be analytic");
        // Monte Carlo oracle
        let s = m.sample(1 << 16, 11).unwrap();
        let mut acc = 0.0;
        for i in 0..s.len() {
            acc += s.dot(i, &th).abs().powi(3);
        }
        let mc = acc / s.len() as f64;
        assert!(
            (exact.value - mc).abs() < 5.0 * mc / (s.len() as f64).sqrt() * 3.0,
            "exact {} vs mc {mc}",
            exact.value
        );
    }

    #[test]
    fn halfspace_masses() {
        let g = Measure::new(MeasureSpec::gaussian(2)).unwrap();
        assert!((g.halfspace_mass(&unit(2, 0), 0.0).value - 0.5).abs() < 1e-12);

        let c = Measure::new(MeasureSpec::cube(1, 1.0)).unwrap();
        assert!((c.halfspace_mass(&unit(1, 0), 0.5).value - 0.25).abs() < 1e-12);

        // Grünbaum for the recentered simplex: φ(0) ∈ [1/e, 1−1/e]
        let s = Measure::with_ctx(MeasureSpec::simplex(2), small_ctx(3)).unwrap();
        let rec = Measure::with_ctx(
            Measure::new(s.recentered_spec()).unwrap().spec().clone(),
            small_ctx(3),
        )
        .unwrap();
        let th = DVector::from_row_slice(&[0.6, 0.8]);
        let phi = rec.halfspace_mass(&th, 0.0);
        let lo = 1.0 / std::f64::consts::E - 4.0 * phi.stderr - 1e-9;
        let hi = 1.0 - 1.0 / std::f64::consts::E + 4.0 * phi.stderr + 1e-9;
        assert!(phi.value >= lo && phi.value <= hi, "phi = {}", phi.value);
    }

    #[test]
    fn halfspace_log_concavity_on_grid() {
        // t ↦ log P(⟨X,θ⟩ ≥ t) is concave for analytic variants
        for spec in [MeasureSpec::gaussian(2), MeasureSpec::cube(2, 1.0), MeasureSpec::ball(2, 1.5)]
        {
            let m = Measure::new(spec).unwrap();
            let th = DVector::from_row_slice(&[0.8, 0.6]);
            let upper = match m.supp_h(&th) {
                Some(h) => 0.9 * h,
                None => 3.0,
            };
            let ts: Vec<f64> = (0..9).map(|i| -upper + 2.0 * upper * i as f64 / 8.0).collect();
            let ls: Vec<f64> = ts
                .iter()
                .map(|t| m.halfspace_mass(&th, *t).value.max(1e-300).ln())
                .collect();
            for w in ls.windows(3) {
                assert!(w[0] + w[2] - 2.0 * w[1] <= 1e-8, "not concave: {ls:?}");
            }
        }
    }

    #[test]
    fn lyapunov_monotone_in_p() {
        let m = Measure::new(MeasureSpec::ball(3, 2.0)).unwrap();
        let th = DVector::from_row_slice(&[0.0, 1.0, 0.0]);
        let mut last = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0, 4.5, 8.0] {
            let v = m.directional_moment(&th, p).value.powf(1.0 / p);
            assert!(v >= last - 1e-12, "p={p}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn tilt_of_empirical_keeps_points_and_reweights() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        let spec = MeasureSpec::tilt(MeasureSpec::empirical(pts, None), vec![2.0, 0.0]);
        let m = Measure::new(spec).unwrap();
        let s = m.sample(999, 1).unwrap();
        assert_eq!(s.len(), 4, "tilt of empirical returns the base points");
        let w = s.weights.as_ref().unwrap();
        // the x = 1 point carries weight ∝ e²
        assert!(w[1] > w[0] && w[0] == w[2] && w[3] < w[0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.ess < 4.0);
    }

    #[test]
    fn low_ess_flagged_for_strong_tilts() {
        let spec = MeasureSpec::tilt(MeasureSpec::simplex(2), vec![25.0, 0.0]);
        let m = Measure::with_ctx(spec, small_ctx(2)).unwrap();
        let s = m.sample(4096, 17).unwrap();
        assert!(s.low_ess(), "ess = {} of {}", s.ess, s.len());
        let est = m.directional_moment(&unit(2, 0), 2.0);
        assert!(est.low_ess);
    }

    #[test]
    fn affine_marginal_and_mgf() {
        // X = A·U + b for U uniform cube: marginal along θ must match MGF
        let spec = MeasureSpec::affine(
            MeasureSpec::cube(2, 1.0),
            vec![vec![1.0, 0.5], vec![0.0, 2.0]],
            vec![0.3, -0.1],
        );
        let m = Measure::new(spec).unwrap();
        let th = DVector::from_row_slice(&[0.6, 0.8]);
        let marg = m.marginal(&th).expect("affine of cube stays analytic");
        // Λ along tθ computed two ways
        for t in [0.3, 1.0, 2.5] {
            let viamarg = marg.mgf_log(t);
            let vialambda = m.log_laplace(&(&th * t));
            assert!((viamarg - vialambda).abs() < 1e-10, "{viamarg} vs {vialambda}");
        }
    }
}
