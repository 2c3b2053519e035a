//! Compiled evaluation tree for measure specs.
//!
//! Specs are canonicalized at build time: tilts of Gaussians disappear,
//! tilts of products become products of tilts, tilts of affine images
//! move inside, and repeated tilts merge. What remains is a tree whose
//! leaves know their own closed forms (or fall back to a cached,
//! seed-deterministic leaf sample), so every downstream quantity is
//! evaluated in the best available mode.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::marginal::{uniform_sum, DensityFn, Law, Marginal1D, QUAD_TOL};
use super::WeightedSample;
use crate::error::{Error, Result};
use crate::hull::{convex_hull, Hull};
use crate::quad::integrate_with_breaks;
use crate::rng::{derive_seed, stream_rng};
use crate::special::{
    ball_marginal_density, ln_unit_ball_volume, log_sinhc, log_sinhc_d1, log_sinhc_d2,
};

/// Evaluation context: one per `Measure`, fixes the Monte Carlo budget
/// and the master seed for every derived stream.
#[derive(Clone, Copy, Debug)]
pub struct Ctx {
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx { samples: 1 << 16, batches: 16, seed: 0 }
    }
}

/// How a quantity was obtained; ordered from most to least exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvalMode {
    Closed,
    Quadrature,
    ExactData,
    MonteCarlo,
}

/// An exact value or a Monte Carlo value with per-entry spread.
#[derive(Clone, Debug)]
pub enum Computed<T> {
    Exact(T),
    Mc { value: T, stderr: T },
}

impl<T> Computed<T> {
    pub fn value(&self) -> &T {
        match self {
            Computed::Exact(v) => v,
            Computed::Mc { value, .. } => value,
        }
    }
    pub fn into_value(self) -> T {
        match self {
            Computed::Exact(v) => v,
            Computed::Mc { value, .. } => value,
        }
    }
    pub fn is_exact(&self) -> bool {
        matches!(self, Computed::Exact(_))
    }
}

const CHUNK: usize = 4096;

pub(crate) enum Node {
    Gaussian(GaussianN),
    Uniform1(Uniform1N),
    TiltedUniform1(TiltedUniform1N),
    Ball(BallN),
    TiltedBall(TiltedBallN),
    Simplex(SimplexN),
    Polytope(PolytopeN),
    Empirical(EmpiricalN),
    Product(ProductN),
    Affine(AffineN),
    TiltedGeneric(TiltedGenericN),
}

pub(crate) struct GaussianN {
    pub dim: usize,
    pub cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    ln_det: f64,
}

pub(crate) struct Uniform1N {
    pub half: f64,
}

pub(crate) struct TiltedUniform1N {
    pub half: f64,
    pub tau: f64,
    /// mean of the *uncentered* tilted uniform; subtracted on sampling
    pub center: f64,
}

pub(crate) struct BallN {
    pub dim: usize,
    pub radius: f64,
}

pub(crate) struct TiltedBallN {
    pub dim: usize,
    pub radius: f64,
    pub xi: DVector<f64>,
    pub center: DVector<f64>,
    lz: f64,
}

pub(crate) struct SimplexN {
    pub dim: usize,
    key: u64,
    cache: OnceLock<Arc<WeightedSample>>,
}

pub(crate) struct PolytopeN {
    pub dim: usize,
    pub vertices: Vec<DVector<f64>>,
    hull: Hull,
    /// cumulative fan-simplex volume fractions, for sampling
    cum: Vec<f64>,
    bary: DVector<f64>,
    cov: DMatrix<f64>,
    key: u64,
    cache: OnceLock<Arc<WeightedSample>>,
}

pub(crate) struct EmpiricalN {
    pub dim: usize,
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    cum: Vec<f64>,
}

pub(crate) struct ProductN {
    pub parts: Vec<Node>,
    pub offsets: Vec<usize>,
    pub dim: usize,
}

pub(crate) struct AffineN {
    pub base: Box<Node>,
    pub a: DMatrix<f64>,
    pub at: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub abs_det: f64,
}

pub(crate) struct TiltedGenericN {
    pub base: Box<Node>,
    pub xi: DVector<f64>,
    pub center: DVector<f64>,
    lz: f64,
}

/// Tilted-moment helpers for the ball marginal: log ∫ f e^{st},
/// the tilted mean and tilted variance, all endpoint-stable.
fn ball_lambda(m: usize, radius: f64, s: f64) -> (f64, f64, f64) {
    let r = radius;
    if s.abs() < 1e-9 {
        let v = r * r / (m as f64 + 2.0);
        return (0.5 * s * s * v, s * v, v);
    }
    let anchor = if s > 0.0 { r } else { -r };
    let w = |t: f64| ball_marginal_density(m, r, t) * (s * (t - anchor)).exp();
    let z0 = integrate_with_breaks(&w, -r, r, &[0.0], QUAD_TOL);
    let z1 = integrate_with_breaks(|t| t * w(t), -r, r, &[0.0], QUAD_TOL);
    let mean = z1 / z0;
    let z2 = integrate_with_breaks(|t| (t - mean) * (t - mean) * w(t), -r, r, &[0.0], QUAD_TOL);
    (s * anchor + z0.ln(), mean, z2 / z0)
}

fn rotation_invariant_hess(dim: usize, xi: &DVector<f64>, d1: f64, d2: f64, var0: f64) -> DMatrix<f64> {
    let s = xi.norm();
    if s < 1e-9 {
        return DMatrix::identity(dim, dim) * var0;
    }
    let u = xi / s;
    let tangential = d1 / s;
    DMatrix::from_fn(dim, dim, |i, j| {
        let uu = u[i] * u[j];
        d2 * uu + tangential * (if i == j { 1.0 } else { 0.0 } - uu)
    })
}

impl Node {
    pub fn dim(&self) -> usize {
        match self {
            Node::Gaussian(n) => n.dim,
            Node::Uniform1(_) | Node::TiltedUniform1(_) => 1,
            Node::Ball(n) => n.dim,
            Node::TiltedBall(n) => n.dim,
            Node::Simplex(n) => n.dim,
            Node::Polytope(n) => n.dim,
            Node::Empirical(n) => n.dim,
            Node::Product(n) => n.dim,
            Node::Affine(n) => n.shift.len(),
            Node::TiltedGeneric(n) => n.base.dim(),
        }
    }

    pub fn laplace_mode(&self) -> EvalMode {
        match self {
            Node::Gaussian(_) | Node::Uniform1(_) | Node::TiltedUniform1(_) => EvalMode::Closed,
            Node::Ball(_) | Node::TiltedBall(_) => EvalMode::Quadrature,
            Node::Empirical(_) => EvalMode::ExactData,
            Node::Simplex(_) | Node::Polytope(_) => EvalMode::MonteCarlo,
            Node::Product(n) => n
                .parts
                .iter()
                .map(|p| p.laplace_mode())
                .max()
                .unwrap_or(EvalMode::Closed),
            Node::Affine(n) => n.base.laplace_mode(),
            Node::TiltedGeneric(n) => n.base.laplace_mode(),
        }
    }

    /// log ∫ e^{⟨ξ,x⟩} dμ(x)
    pub fn log_laplace(&self, xi: &DVector<f64>, ctx: &Ctx) -> f64 {
        match self {
            Node::Gaussian(n) => 0.5 * xi.dot(&(&n.cov * xi)),
            Node::Uniform1(n) => log_sinhc(n.half * xi[0]),
            Node::TiltedUniform1(n) => {
                log_sinhc(n.half * (xi[0] + n.tau)) - log_sinhc(n.half * n.tau)
                    - xi[0] * n.center
            }
            Node::Ball(n) => ball_lambda(n.dim, n.radius, xi.norm()).0,
            Node::TiltedBall(n) => {
                let z = xi + &n.xi;
                ball_lambda(n.dim, n.radius, z.norm()).0 - n.lz - xi.dot(&n.center)
            }
            Node::Simplex(_) | Node::Polytope(_) => {
                let s = self.leaf_sample(ctx);
                log_sum_exp_sample(&s, xi)
            }
            Node::Empirical(n) => {
                let mut mx = f64::NEG_INFINITY;
                for p in &n.points {
                    mx = mx.max(xi.dot(p));
                }
                let mut acc = 0.0;
                for (p, w) in n.points.iter().zip(&n.weights) {
                    acc += w * (xi.dot(p) - mx).exp();
                }
                mx + acc.ln()
            }
            Node::Product(n) => {
                let mut acc = 0.0;
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let sub = xi.rows(*off, part.dim()).into_owned();
                    acc += part.log_laplace(&sub, ctx);
                }
                acc
            }
            Node::Affine(n) => xi.dot(&n.shift) + n.base.log_laplace(&(&n.at * xi), ctx),
            Node::TiltedGeneric(n) => {
                n.base.log_laplace(&(xi + &n.xi), ctx) - n.lz - xi.dot(&n.center)
            }
        }
    }

    pub fn lambda_grad(&self, xi: &DVector<f64>, ctx: &Ctx) -> DVector<f64> {
        match self {
            Node::Gaussian(n) => &n.cov * xi,
            Node::Uniform1(n) => DVector::from_element(1, n.half * log_sinhc_d1(n.half * xi[0])),
            Node::TiltedUniform1(n) => DVector::from_element(
                1,
                n.half * log_sinhc_d1(n.half * (xi[0] + n.tau)) - n.center,
            ),
            Node::Ball(n) => {
                let s = xi.norm();
                let (_, d1, _) = ball_lambda(n.dim, n.radius, s);
                if s < 1e-9 {
                    xi * (n.radius * n.radius / (n.dim as f64 + 2.0))
                } else {
                    xi * (d1 / s)
                }
            }
            Node::TiltedBall(n) => {
                let z = xi + &n.xi;
                let s = z.norm();
                let (_, d1, _) = ball_lambda(n.dim, n.radius, s);
                let g = if s < 1e-9 {
                    &z * (n.radius * n.radius / (n.dim as f64 + 2.0))
                } else {
                    &z * (d1 / s)
                };
                g - &n.center
            }
            Node::Simplex(_) | Node::Polytope(_) => {
                let s = self.leaf_sample(ctx);
                tilted_mean_sample(&s, xi)
            }
            Node::Empirical(n) => {
                let (mean, _) = tilted_moments_points(&n.points, &n.weights, xi);
                mean
            }
            Node::Product(n) => {
                let mut g = DVector::zeros(n.dim);
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let sub = xi.rows(*off, part.dim()).into_owned();
                    g.rows_mut(*off, part.dim()).copy_from(&part.lambda_grad(&sub, ctx));
                }
                g
            }
            Node::Affine(n) => &n.shift + &n.a * n.base.lambda_grad(&(&n.at * xi), ctx),
            Node::TiltedGeneric(n) => n.base.lambda_grad(&(xi + &n.xi), ctx) - &n.center,
        }
    }

    pub fn lambda_hess(&self, xi: &DVector<f64>, ctx: &Ctx) -> DMatrix<f64> {
        match self {
            Node::Gaussian(n) => n.cov.clone(),
            Node::Uniform1(n) => {
                DMatrix::from_element(1, 1, n.half * n.half * log_sinhc_d2(n.half * xi[0]))
            }
            Node::TiltedUniform1(n) => DMatrix::from_element(
                1,
                1,
                n.half * n.half * log_sinhc_d2(n.half * (xi[0] + n.tau)),
            ),
            Node::Ball(n) => {
                let s = xi.norm();
                let (_, d1, d2) = ball_lambda(n.dim, n.radius, s);
                rotation_invariant_hess(n.dim, xi, d1, d2, n.radius * n.radius / (n.dim as f64 + 2.0))
            }
            Node::TiltedBall(n) => {
                let z = xi + &n.xi;
                let s = z.norm();
                let (_, d1, d2) = ball_lambda(n.dim, n.radius, s);
                rotation_invariant_hess(n.dim, &z, d1, d2, n.radius * n.radius / (n.dim as f64 + 2.0))
            }
            Node::Simplex(_) | Node::Polytope(_) => {
                let s = self.leaf_sample(ctx);
                tilted_cov_sample(&s, xi)
            }
            Node::Empirical(n) => {
                let (_, cov) = tilted_moments_points(&n.points, &n.weights, xi);
                cov
            }
            Node::Product(n) => {
                let mut h = DMatrix::zeros(n.dim, n.dim);
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let d = part.dim();
                    let sub = xi.rows(*off, d).into_owned();
                    h.view_mut((*off, *off), (d, d)).copy_from(&part.lambda_hess(&sub, ctx));
                }
                h
            }
            Node::Affine(n) => {
                let hb = n.base.lambda_hess(&(&n.at * xi), ctx);
                &n.a * hb * &n.at
            }
            Node::TiltedGeneric(n) => n.base.lambda_hess(&(xi + &n.xi), ctx),
        }
    }

    pub fn barycenter(&self, ctx: &Ctx) -> Computed<DVector<f64>> {
        match self {
            Node::Gaussian(n) => Computed::Exact(DVector::zeros(n.dim)),
            Node::Uniform1(_) => Computed::Exact(DVector::zeros(1)),
            Node::TiltedUniform1(_) => Computed::Exact(DVector::zeros(1)),
            Node::Ball(n) => Computed::Exact(DVector::zeros(n.dim)),
            Node::TiltedBall(n) => Computed::Exact(DVector::zeros(n.dim)),
            Node::Simplex(n) => Computed::Exact(DVector::from_element(
                n.dim,
                1.0 / (n.dim as f64 + 1.0),
            )),
            Node::Polytope(n) => Computed::Exact(n.bary.clone()),
            Node::Empirical(n) => {
                let mut m = DVector::zeros(n.dim);
                for (p, w) in n.points.iter().zip(&n.weights) {
                    m += p * *w;
                }
                Computed::Exact(m)
            }
            Node::Product(n) => {
                let mut v = DVector::zeros(n.dim);
                let mut se = DVector::zeros(n.dim);
                let mut exact = true;
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    match part.barycenter(ctx) {
                        Computed::Exact(b) => v.rows_mut(*off, part.dim()).copy_from(&b),
                        Computed::Mc { value, stderr } => {
                            exact = false;
                            v.rows_mut(*off, part.dim()).copy_from(&value);
                            se.rows_mut(*off, part.dim()).copy_from(&stderr);
                        }
                    }
                }
                if exact {
                    Computed::Exact(v)
                } else {
                    Computed::Mc { value: v, stderr: se }
                }
            }
            Node::Affine(n) => match n.base.barycenter(ctx) {
                Computed::Exact(b) => Computed::Exact(&n.a * b + &n.shift),
                Computed::Mc { value, stderr } => Computed::Mc {
                    value: &n.a * value + &n.shift,
                    stderr: (&n.a * stderr).abs(),
                },
            },
            // recentered at construction
            Node::TiltedGeneric(n) => Computed::Exact(DVector::zeros(n.base.dim())),
        }
    }

    pub fn covariance(&self, ctx: &Ctx) -> Computed<DMatrix<f64>> {
        match self {
            Node::Gaussian(n) => Computed::Exact(n.cov.clone()),
            Node::Uniform1(n) => Computed::Exact(DMatrix::from_element(1, 1, n.half * n.half / 3.0)),
            Node::TiltedUniform1(n) => Computed::Exact(DMatrix::from_element(
                1,
                1,
                n.half * n.half * log_sinhc_d2(n.half * n.tau),
            )),
            Node::Ball(n) => Computed::Exact(
                DMatrix::identity(n.dim, n.dim) * (n.radius * n.radius / (n.dim as f64 + 2.0)),
            ),
            Node::TiltedBall(n) => {
                let s = n.xi.norm();
                let (_, d1, d2) = ball_lambda(n.dim, n.radius, s);
                Computed::Exact(rotation_invariant_hess(
                    n.dim,
                    &n.xi,
                    d1,
                    d2,
                    n.radius * n.radius / (n.dim as f64 + 2.0),
                ))
            }
            Node::Simplex(n) => {
                let d = n.dim as f64;
                let a0 = d + 1.0;
                let denom = a0 * a0 * (a0 + 1.0);
                Computed::Exact(DMatrix::from_fn(n.dim, n.dim, |i, j| {
                    if i == j {
                        d / denom
                    } else {
                        -1.0 / denom
                    }
                }))
            }
            Node::Polytope(n) => Computed::Exact(n.cov.clone()),
            Node::Empirical(n) => {
                let (mean, cov) =
                    tilted_moments_points(&n.points, &n.weights, &DVector::zeros(n.dim));
                let _ = mean;
                Computed::Exact(cov)
            }
            Node::Product(n) => {
                let mut m = DMatrix::zeros(n.dim, n.dim);
                let mut se = DMatrix::zeros(n.dim, n.dim);
                let mut exact = true;
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let d = part.dim();
                    match part.covariance(ctx) {
                        Computed::Exact(c) => m.view_mut((*off, *off), (d, d)).copy_from(&c),
                        Computed::Mc { value, stderr } => {
                            exact = false;
                            m.view_mut((*off, *off), (d, d)).copy_from(&value);
                            se.view_mut((*off, *off), (d, d)).copy_from(&stderr);
                        }
                    }
                }
                if exact {
                    Computed::Exact(m)
                } else {
                    Computed::Mc { value: m, stderr: se }
                }
            }
            Node::Affine(n) => match n.base.covariance(ctx) {
                Computed::Exact(c) => Computed::Exact(&n.a * c * &n.at),
                Computed::Mc { value, stderr } => Computed::Mc {
                    value: &n.a * value * &n.at,
                    stderr: (&n.a * stderr * &n.at).abs(),
                },
            },
            Node::TiltedGeneric(n) => {
                // covariance of the tilt = Hess Λ_base(ξ), batched for spread
                let s = n.base.leaf_sample_or(ctx);
                let d = self.dim();
                let ranges = crate::estimate::batch_ranges(s.len(), ctx.batches);
                let mut batch_covs = Vec::with_capacity(ranges.len());
                for (a, b) in &ranges {
                    batch_covs.push(tilted_cov_range(&s, &n.xi, *a, *b));
                }
                let k = batch_covs.len() as f64;
                let mut mean = DMatrix::zeros(d, d);
                for c in &batch_covs {
                    mean += c / k;
                }
                let mut var = DMatrix::zeros(d, d);
                for c in &batch_covs {
                    let diff = c - &mean;
                    var += diff.component_mul(&diff) / (k - 1.0).max(1.0);
                }
                let stderr = (var / k).map(f64::sqrt);
                // the full-sample value, not the batch average
                let value = tilted_cov_sample(&s, &n.xi);
                Computed::Mc { value, stderr }
            }
        }
    }

    pub fn density_sup(&self) -> Result<f64> {
        match self {
            Node::Gaussian(n) => Ok((-0.5
                * (n.dim as f64 * (2.0 * std::f64::consts::PI).ln() + n.ln_det))
                .exp()),
            Node::Uniform1(n) => Ok(0.5 / n.half),
            Node::TiltedUniform1(n) => {
                let th = n.tau * n.half;
                // sup of e^{τu}/Z over u ∈ [−h,h]; Z = 2h·sinhc(τh)
                Ok((th.abs() - log_sinhc(th)).exp() / (2.0 * n.half))
            }
            Node::Ball(n) => {
                Ok((-ln_unit_ball_volume(n.dim) - n.dim as f64 * n.radius.ln()).exp())
            }
            Node::TiltedBall(n) => {
                let s = n.xi.norm();
                let (lz, _, _) = ball_lambda(n.dim, n.radius, s);
                Ok((n.radius * s - lz - ln_unit_ball_volume(n.dim)
                    - n.dim as f64 * n.radius.ln())
                .exp())
            }
            Node::Simplex(n) => Ok(ln_gamma(n.dim as f64 + 1.0).exp()),
            Node::Polytope(n) => Ok(1.0 / n.hull.volume),
            Node::Empirical(_) => Err(Error::UnsupportedVariant("empirical has no density")),
            Node::Product(n) => {
                let mut acc = 1.0;
                for part in &n.parts {
                    acc *= part.density_sup()?;
                }
                Ok(acc)
            }
            Node::Affine(n) => Ok(n.base.density_sup()? / n.abs_det),
            Node::TiltedGeneric(n) => {
                // base is uniform on its support here (simplex / polytope)
                let h = n
                    .base
                    .supp_h(&n.xi)
                    .ok_or(Error::UnsupportedVariant("tilt of unbounded MC base"))?;
                Ok(n.base.density_sup()? * (h - n.lz).exp())
            }
        }
    }

    /// Support function of supp(μ); None when unbounded.
    pub fn supp_h(&self, theta: &DVector<f64>) -> Option<f64> {
        match self {
            Node::Gaussian(_) => None,
            Node::Uniform1(n) => Some(n.half * theta[0].abs()),
            Node::TiltedUniform1(n) => Some(n.half * theta[0].abs() - theta[0] * n.center),
            Node::Ball(n) => Some(n.radius * theta.norm()),
            Node::TiltedBall(n) => Some(n.radius * theta.norm() - theta.dot(&n.center)),
            Node::Simplex(_) => {
                let mx = theta.iter().fold(0.0f64, |a, b| a.max(*b));
                Some(mx)
            }
            Node::Polytope(n) => Some(
                n.vertices
                    .iter()
                    .map(|v| v.dot(theta))
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            Node::Empirical(n) => Some(
                n.points
                    .iter()
                    .map(|v| v.dot(theta))
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            Node::Product(n) => {
                let mut acc = 0.0;
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let sub = theta.rows(*off, part.dim()).into_owned();
                    acc += part.supp_h(&sub)?;
                }
                Some(acc)
            }
            Node::Affine(n) => {
                Some(n.base.supp_h(&(&n.at * theta))? + theta.dot(&n.shift))
            }
            Node::TiltedGeneric(n) => Some(n.base.supp_h(theta)? - theta.dot(&n.center)),
        }
    }

    /// Law of ⟨v, X⟩ when analytically available.
    pub fn marginal(&self, v: &DVector<f64>) -> Option<Marginal1D> {
        let norm = v.norm();
        if norm == 0.0 {
            return Some(Marginal1D::point_mass());
        }
        match self {
            Node::Gaussian(n) => {
                let sigma2 = v.dot(&(&n.cov * v));
                Some(Marginal1D::gaussian(sigma2.max(0.0).sqrt()))
            }
            Node::Uniform1(n) => Some(Marginal1D::uniform(n.half * v[0].abs())),
            Node::TiltedUniform1(n) => {
                let (h, tau, c, s) = (n.half, n.tau, n.center, v[0]);
                let ln_z = (2.0 * h).ln() + log_sinhc(tau * h);
                let ln_density = move |t: f64| -> f64 {
                    // density of s·(U_τ − c) at t
                    let u = t / s + c;
                    if u.abs() > h {
                        f64::NEG_INFINITY
                    } else {
                        tau * u - ln_z - s.abs().ln()
                    }
                };
                let (lo, hi) = if s > 0.0 {
                    (s * (-h - c), s * (h - c))
                } else {
                    (s * (h - c), s * (-h - c))
                };
                Some(Marginal1D::density(DensityFn {
                    support: (lo, hi),
                    breaks: vec![],
                    ln_density: Arc::new(ln_density),
                }))
            }
            Node::Ball(n) => Some(ball_density_marginal(n.dim, n.radius * norm, 0.0)),
            Node::TiltedBall(n) => {
                // exact only along ±ξ (the tilt factor depends on that
                // projection alone)
                let s0 = n.xi.norm();
                if s0 < 1e-14 {
                    return Some(ball_density_marginal(n.dim, n.radius * norm, 0.0));
                }
                let u = &n.xi / s0;
                let cosang = (v.dot(&u) / norm).abs();
                if (cosang - 1.0).abs() > 1e-12 {
                    return None;
                }
                let sgn = if v.dot(&u) >= 0.0 { 1.0 } else { -1.0 };
                let shift = -v.dot(&n.center);
                let (m, r) = (n.dim, n.radius);
                let (lz, _, _) = ball_lambda(m, r, s0);
                let scale = norm * sgn;
                let ln_density = move |t: f64| -> f64 {
                    let tt = t / scale;
                    let f = ball_marginal_density(m, r, tt);
                    if f <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f.ln() + s0 * tt - lz - norm.ln()
                    }
                };
                let (lo, hi) = (-r * norm, r * norm);
                Some(
                    Marginal1D::density(DensityFn {
                        support: (lo, hi),
                        breaks: vec![],
                        ln_density: Arc::new(ln_density),
                    })
                    .shifted(shift),
                )
            }
            Node::Simplex(_) | Node::Polytope(_) => None,
            Node::Empirical(n) => {
                let values: Vec<f64> = n.points.iter().map(|p| p.dot(v)).collect();
                Some(Marginal1D {
                    shift: 0.0,
                    law: Law::Discrete { values, weights: n.weights.clone() },
                })
            }
            Node::Product(n) => {
                let mut shift = 0.0;
                let mut gauss_var = 0.0;
                let mut uniform_halves: Vec<f64> = Vec::new();
                let mut others: Vec<Law> = Vec::new();
                for (part, off) in n.parts.iter().zip(&n.offsets) {
                    let sub = part_vec(v, *off, part.dim());
                    if sub.norm() == 0.0 {
                        continue;
                    }
                    let m = part.marginal(&sub)?;
                    shift += m.shift;
                    match m.law {
                        Law::PointMass => {}
                        Law::Gaussian { sigma } => gauss_var += sigma * sigma,
                        Law::Uniform { half } => uniform_halves.push(half),
                        Law::Density(d) => others.push(Law::Density(d)),
                        // discrete or nested sums in products: fall back
                        _ => return None,
                    }
                }
                let mut compos: Vec<Law> = Vec::new();
                if gauss_var > 0.0 {
                    compos.push(Law::Gaussian { sigma: gauss_var.sqrt() });
                }
                if !uniform_halves.is_empty() {
                    compos.push(uniform_sum(&uniform_halves).law);
                }
                compos.extend(others);
                let law = match compos.len() {
                    0 => Law::PointMass,
                    1 => compos.pop().unwrap(),
                    2 => {
                        let b = compos.pop().unwrap();
                        let a = compos.pop().unwrap();
                        Law::Conv2(Box::new(a), Box::new(b))
                    }
                    _ => return None,
                };
                Some(Marginal1D { shift, law })
            }
            Node::Affine(n) => {
                let w = &n.at * v;
                Some(n.base.marginal(&w)?.shifted(v.dot(&n.shift)))
            }
            Node::TiltedGeneric(_) => None,
        }
    }

    /// Leaf Monte Carlo cache (only simplex/polytope nodes carry one).
    fn leaf_sample(&self, ctx: &Ctx) -> Arc<WeightedSample> {
        match self {
            Node::Simplex(n) => n
                .cache
                .get_or_init(|| {
                    Arc::new(self.sample(ctx.samples, derive_seed(ctx.seed, "leaf"), ctx))
                })
                .clone(),
            Node::Polytope(n) => n
                .cache
                .get_or_init(|| {
                    Arc::new(self.sample(ctx.samples, derive_seed(ctx.seed, "leaf"), ctx))
                })
                .clone(),
            _ => unreachable!("leaf_sample on closed-form node"),
        }
    }

    /// For TiltedGeneric covariance: sample of the base leaf.
    fn leaf_sample_or(&self, ctx: &Ctx) -> Arc<WeightedSample> {
        match self {
            Node::Simplex(_) | Node::Polytope(_) => self.leaf_sample(ctx),
            Node::Empirical(n) => {
                let mut data = Vec::with_capacity(n.points.len() * n.dim);
                for p in &n.points {
                    data.extend(p.iter());
                }
                Arc::new(WeightedSample {
                    dim: n.dim,
                    data,
                    weights: Some(n.weights.clone()),
                    seed: 0,
                    ess: 1.0 / n.weights.iter().map(|w| w * w).sum::<f64>(),
                })
            }
            _ => unreachable!("leaf_sample_or on closed-form node"),
        }
    }

    /// Draws `n` points; IS-weighted nodes return weighted base points.
    pub fn sample(&self, n: usize, seed: u64, ctx: &Ctx) -> WeightedSample {
        // Tilt of an empirical base keeps the data points and reweights.
        if let Node::TiltedGeneric(t) = self {
            if let Node::Empirical(e) = t.base.as_ref() {
                let mut data = Vec::with_capacity(e.points.len() * e.dim);
                let mut logw: Vec<f64> = Vec::with_capacity(e.points.len());
                for (p, w) in e.points.iter().zip(&e.weights) {
                    let q = p - &t.center;
                    data.extend(q.iter());
                    logw.push(w.ln() + t.xi.dot(p));
                }
                let weights = normalize_log_weights(&logw);
                let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
                return WeightedSample { dim: e.dim, data, weights: Some(weights), seed, ess };
            }
        }

        let dim = self.dim();
        let mut data = vec![0.0; n * dim];
        let mut logw: Vec<f64> = Vec::new();
        self.fill(&mut data, n, dim, 0, seed, 1, ctx, &mut logw);
        let (weights, ess) = if logw.is_empty() {
            (None, n as f64)
        } else {
            let w = normalize_log_weights(&logw);
            let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
            (Some(w), ess)
        };
        WeightedSample { dim, data, weights, seed, ess }
    }

    /// Writes coordinates for `n` points into `data` (row-major with
    /// total width `total`), columns starting at `col0`. Randomness is
    /// chunked by sample index with a per-(seed, node-key, chunk) stream.
    #[allow(clippy::too_many_arguments)]
    fn fill(
        &self,
        data: &mut [f64],
        n: usize,
        total: usize,
        col0: usize,
        seed: u64,
        key: u64,
        ctx: &Ctx,
        logw: &mut Vec<f64>,
    ) {
        match self {
            Node::Product(p) => {
                for (idx, (part, off)) in p.parts.iter().zip(&p.offsets).enumerate() {
                    part.fill(
                        data,
                        n,
                        total,
                        col0 + off,
                        seed,
                        key.wrapping_mul(31).wrapping_add(idx as u64 + 1),
                        ctx,
                        logw,
                    );
                }
            }
            Node::Affine(a) => {
                a.base.fill(data, n, total, col0, seed, key.wrapping_mul(31), ctx, logw);
                let d = self.dim();
                let mut x = DVector::zeros(d);
                for i in 0..n {
                    let row = &mut data[i * total + col0..i * total + col0 + d];
                    for (j, xr) in x.iter_mut().enumerate() {
                        *xr = row[j];
                    }
                    let y = &a.a * &x + &a.shift;
                    row.copy_from_slice(y.as_slice());
                }
            }
            Node::TiltedGeneric(t) => {
                let start = logw.len();
                t.base.fill(data, n, total, col0, seed, key.wrapping_mul(31), ctx, logw);
                if logw.is_empty() {
                    logw.resize(n, 0.0);
                } else {
                    debug_assert!(logw.len() == n || logw.len() == start.max(n));
                }
                let d = self.dim();
                for i in 0..n {
                    let row = &mut data[i * total + col0..i * total + col0 + d];
                    let mut dot = 0.0;
                    for (j, r) in row.iter_mut().enumerate() {
                        dot += t.xi[j] * *r;
                        *r -= t.center[j];
                    }
                    logw[i] += dot;
                }
            }
            Node::TiltedBall(t) => {
                // importance-weight a plain ball sample
                let base = Node::Ball(BallN { dim: t.dim, radius: t.radius });
                base.fill(data, n, total, col0, seed, key.wrapping_mul(31), ctx, logw);
                if logw.is_empty() {
                    logw.resize(n, 0.0);
                }
                let d = t.dim;
                for i in 0..n {
                    let row = &mut data[i * total + col0..i * total + col0 + d];
                    let mut dot = 0.0;
                    for (j, r) in row.iter_mut().enumerate() {
                        dot += t.xi[j] * *r;
                        *r -= t.center[j];
                    }
                    logw[i] += dot;
                }
            }
            _ => {
                // chunked leaf sampling
                let d = self.dim();
                let mut i = 0;
                let mut chunk = 0u64;
                while i < n {
                    let hi = (i + CHUNK).min(n);
                    let mut rng = stream_rng(seed, "fill", key ^ chunk.wrapping_mul(0x9e37));
                    for row_idx in i..hi {
                        let row = &mut data[row_idx * total + col0..row_idx * total + col0 + d];
                        self.draw_one(&mut rng, row);
                    }
                    i = hi;
                    chunk += 1;
                }
            }
        }
    }

    /// One i.i.d. draw for leaf nodes (fixed number of RNG consumptions
    /// per point, so chunk boundaries stay deterministic).
    fn draw_one<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Node::Gaussian(g) => {
                let z = DVector::from_fn(g.dim, |_, _| {
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
                });
                let x = &g.chol * z;
                out.copy_from_slice(x.as_slice());
            }
            Node::Uniform1(u) => {
                out[0] = (rng.gen::<f64>() * 2.0 - 1.0) * u.half;
            }
            Node::TiltedUniform1(t) => {
                let u: f64 = rng.gen();
                let th = t.tau * t.half;
                let x = if th.abs() < 1e-9 {
                    (2.0 * u - 1.0) * t.half
                } else {
                    // inverse CDF for density ∝ e^{τx} on [−h, h]
                    let a = th.abs();
                    let y = t.half + ((-2.0 * a).exp() * (1.0 - u) + u).ln() * t.half / a;
                    if t.tau >= 0.0 {
                        y
                    } else {
                        -y
                    }
                };
                out[0] = x - t.center;
            }
            Node::Ball(b) => {
                let mut z = DVector::from_fn(b.dim, |_, _| {
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
                });
                let nz = z.norm();
                let u: f64 = rng.gen();
                let r = b.radius * u.powf(1.0 / b.dim as f64);
                if nz > 0.0 {
                    z *= r / nz;
                }
                out.copy_from_slice(z.as_slice());
            }
            Node::Simplex(s) => {
                // exponential spacings: uniform on {x ≥ 0, Σx ≤ 1}
                let mut es = Vec::with_capacity(s.dim + 1);
                let mut tot = 0.0;
                for _ in 0..=s.dim {
                    let e = -rng.gen::<f64>().max(1e-300).ln();
                    es.push(e);
                    tot += e;
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o = es[j] / tot;
                }
            }
            Node::Polytope(p) => {
                let u: f64 = rng.gen();
                let fi = match p.cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i,
                }
                .min(p.cum.len() - 1);
                // Dirichlet over the fan simplex (apex + facet vertices)
                let k = p.dim + 1;
                let mut es = Vec::with_capacity(k);
                let mut tot = 0.0;
                for _ in 0..k {
                    let e = -rng.gen::<f64>().max(1e-300).ln();
                    es.push(e);
                    tot += e;
                }
                let lam: Vec<f64> = es.iter().map(|e| e / tot).collect();
                let ids = &p.hull.facets[fi];
                for o in out.iter_mut() {
                    *o = 0.0;
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o += lam[0] * p.hull.interior[j];
                    for (t, id) in ids.iter().enumerate() {
                        *o += lam[t + 1] * p.vertices[*id][j];
                    }
                }
            }
            Node::Empirical(e) => {
                let u: f64 = rng.gen();
                let idx = match e.cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i,
                }
                .min(e.cum.len() - 1);
                out.copy_from_slice(e.points[idx].as_slice());
            }
            _ => unreachable!("draw_one on composite node"),
        }
    }

    /// True when μ(A) = μ(−A) structurally.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Node::Gaussian(_) | Node::Uniform1(_) | Node::Ball(_) => true,
            Node::Product(n) => n.parts.iter().all(|p| p.is_symmetric()),
            Node::Affine(n) => n.shift.norm() == 0.0 && n.base.is_symmetric(),
            _ => false,
        }
    }
}

fn part_vec(v: &DVector<f64>, off: usize, d: usize) -> DVector<f64> {
    v.rows(off, d).into_owned()
}

fn ball_density_marginal(m: usize, scale_radius: f64, shift: f64) -> Marginal1D {
    let r = scale_radius;
    let ln_density = move |t: f64| -> f64 {
        let f = ball_marginal_density(m, r, t);
        if f <= 0.0 {
            f64::NEG_INFINITY
        } else {
            f.ln()
        }
    };
    Marginal1D::density(DensityFn {
        support: (-r, r),
        breaks: vec![],
        ln_density: Arc::new(ln_density),
    })
    .shifted(shift)
}

fn normalize_log_weights(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let mut w: Vec<f64> = logw.iter().map(|l| (l - mx).exp()).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

fn log_sum_exp_sample(s: &WeightedSample, xi: &DVector<f64>) -> f64 {
    let n = s.len();
    let mut mx = f64::NEG_INFINITY;
    let mut dots = Vec::with_capacity(n);
    for i in 0..n {
        let d = s.dot(i, xi);
        mx = mx.max(d);
        dots.push(d);
    }
    let mut acc = 0.0;
    for (i, d) in dots.iter().enumerate() {
        acc += s.weight(i) * (d - mx).exp();
    }
    mx + acc.ln()
}

fn tilted_mean_sample(s: &WeightedSample, xi: &DVector<f64>) -> DVector<f64> {
    tilted_mean_range(s, xi, 0, s.len())
}

fn tilted_mean_range(s: &WeightedSample, xi: &DVector<f64>, a: usize, b: usize) -> DVector<f64> {
    let dim = s.dim;
    let mut mx = f64::NEG_INFINITY;
    for i in a..b {
        mx = mx.max(s.dot(i, xi));
    }
    let mut z = 0.0;
    let mut mean = DVector::zeros(dim);
    for i in a..b {
        let w = s.weight(i) * (s.dot(i, xi) - mx).exp();
        z += w;
        let p = s.point(i);
        for j in 0..dim {
            mean[j] += w * p[j];
        }
    }
    mean / z
}

fn tilted_cov_sample(s: &WeightedSample, xi: &DVector<f64>) -> DMatrix<f64> {
    tilted_cov_range(s, xi, 0, s.len())
}

fn tilted_cov_range(s: &WeightedSample, xi: &DVector<f64>, a: usize, b: usize) -> DMatrix<f64> {
    let dim = s.dim;
    let mean = tilted_mean_range(s, xi, a, b);
    let mut mx = f64::NEG_INFINITY;
    for i in a..b {
        mx = mx.max(s.dot(i, xi));
    }
    let mut z = 0.0;
    let mut cov = DMatrix::zeros(dim, dim);
    for i in a..b {
        let w = s.weight(i) * (s.dot(i, xi) - mx).exp();
        z += w;
        let p = s.point(i);
        for r in 0..dim {
            let dr = p[r] - mean[r];
            for c in 0..=r {
                cov[(r, c)] += w * dr * (p[c] - mean[c]);
            }
        }
    }
    for r in 0..dim {
        for c in 0..r {
            cov[(r, c)] /= z;
            cov[(c, r)] = cov[(r, c)];
        }
        cov[(r, r)] /= z;
    }
    cov
}

fn tilted_moments_points(
    points: &[DVector<f64>],
    weights: &[f64],
    xi: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let dim = points[0].len();
    let mut mx = f64::NEG_INFINITY;
    for p in points {
        mx = mx.max(xi.dot(p));
    }
    let mut z = 0.0;
    let mut mean = DVector::zeros(dim);
    for (p, w) in points.iter().zip(weights) {
        let ww = w * (xi.dot(p) - mx).exp();
        z += ww;
        mean += p * ww;
    }
    mean /= z;
    let mut cov = DMatrix::zeros(dim, dim);
    for (p, w) in points.iter().zip(weights) {
        let ww = w * (xi.dot(p) - mx).exp() / z;
        let d = p - &mean;
        cov += (&d * d.transpose()) * ww;
    }
    (mean, cov)
}

/// Builds the canonical node tree for a validated spec.
pub(crate) fn build(spec: &super::MeasureSpec, ctx: &Ctx) -> Result<Node> {
    use super::MeasureSpec as S;
    match spec {
        S::Gaussian { dim, covariance } => {
            let cov = match covariance {
                None => DMatrix::identity(*dim, *dim),
                Some(c) => DMatrix::from_fn(*dim, *dim, |i, j| c[i][j]),
            };
            gaussian_node(cov)
        }
        S::UniformCube { dim, halfwidth } => {
            let parts: Vec<Node> =
                (0..*dim).map(|_| Node::Uniform1(Uniform1N { half: *halfwidth })).collect();
            Ok(product_node(parts))
        }
        S::UniformBall { dim, radius } => Ok(Node::Ball(BallN { dim: *dim, radius: *radius })),
        S::UniformSimplex { dim } => Ok(Node::Simplex(SimplexN {
            dim: *dim,
            key: 1,
            cache: OnceLock::new(),
        })),
        S::UniformPolytopeV { vertices } => {
            let verts: Vec<DVector<f64>> =
                vertices.iter().map(|v| DVector::from_row_slice(v)).collect();
            polytope_node(verts)
        }
        S::Product { parts } => {
            let nodes: Result<Vec<Node>> = parts.iter().map(|p| build(p, ctx)).collect();
            Ok(product_node(nodes?))
        }
        S::AffineImage { base, matrix, shift } => {
            let b = build(base, ctx)?;
            let n = b.dim();
            let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            let s = DVector::from_row_slice(shift);
            affine_node(b, a, s)
        }
        S::Tilt { base, xi } => {
            let b = build(base, ctx)?;
            tilt_node(b, DVector::from_row_slice(xi), ctx)
        }
        S::Empirical { points, weights, .. } => {
            let pts = points
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("unresolved empirical".into()))?;
            let n = pts.len();
            let w = match weights {
                Some(w) => w.clone(),
                None => vec![1.0 / n as f64; n],
            };
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0.0;
            for x in &w {
                acc += x;
                cum.push(acc);
            }
            Ok(Node::Empirical(EmpiricalN {
                dim: pts[0].len(),
                points: pts.iter().map(|p| DVector::from_row_slice(p)).collect(),
                weights: w,
                cum,
            }))
        }
    }
}

fn gaussian_node(cov: DMatrix<f64>) -> Result<Node> {
    let dim = cov.nrows();
    let sym = (&cov + cov.transpose()) * 0.5;
    let chol = sym.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(Node::Gaussian(GaussianN { dim, cov: sym, chol: chol.l(), ln_det }))
}

fn product_node(parts: Vec<Node>) -> Node {
    let mut offsets = Vec::with_capacity(parts.len());
    let mut acc = 0;
    for p in &parts {
        offsets.push(acc);
        acc += p.dim();
    }
    Node::Product(ProductN { parts, offsets, dim: acc })
}

fn polytope_node(vertices: Vec<DVector<f64>>) -> Result<Node> {
    let hull = convex_hull(&vertices)?;
    let fan = hull.fan_volumes(&vertices);
    let total: f64 = fan.iter().sum();
    let mut cum = Vec::with_capacity(fan.len());
    let mut acc = 0.0;
    for v in &fan {
        acc += v / total;
        cum.push(acc);
    }
    let dim = hull.dim;
    // exact moments: mixture over fan simplices (apex = interior point)
    let mut bary = DVector::zeros(dim);
    let mut second = DMatrix::zeros(dim, dim);
    for (ids, v) in hull.facets.iter().zip(&fan) {
        let frac = v / total;
        let mut vs: Vec<&DVector<f64>> = Vec::with_capacity(dim + 1);
        vs.push(&hull.interior);
        for id in ids {
            vs.push(&vertices[*id]);
        }
        let k = vs.len() as f64;
        let mut sum = DVector::zeros(dim);
        let mut sq = DMatrix::zeros(dim, dim);
        for v in &vs {
            sum += *v;
            sq += *v * v.transpose();
        }
        bary += &sum * (frac / k);
        // E[xxᵀ] over a simplex: (Σ v vᵀ + (Σv)(Σv)ᵀ) / ((k)(k+1))
        second += (sq + &sum * sum.transpose()) * (frac / (k * (k + 1.0)));
    }
    let cov = second - &bary * bary.transpose();
    Ok(Node::Polytope(PolytopeN {
        dim,
        vertices,
        hull,
        cum,
        bary,
        cov,
        key: 2,
        cache: OnceLock::new(),
    }))
}

fn affine_node(base: Node, a: DMatrix<f64>, shift: DVector<f64>) -> Result<Node> {
    let det = a.determinant();
    if det.abs() <= 1e-300 {
        return Err(Error::DegenerateSpec("affine matrix is singular".into()));
    }
    // affine of gaussian stays gaussian
    if let Node::Gaussian(g) = &base {
        if shift.norm() == 0.0 {
            return gaussian_node(&a * &g.cov * a.transpose());
        }
    }
    let at = a.transpose();
    Ok(Node::Affine(AffineN { base: Box::new(base), a, at, shift, abs_det: det.abs() }))
}

/// Exponential tilt of a built node, recentered; canonicalizes by variant.
pub(crate) fn tilt_node(node: Node, xi: DVector<f64>, ctx: &Ctx) -> Result<Node> {
    if xi.len() != node.dim() {
        return Err(Error::InvalidSpec("tilt xi length mismatch".into()));
    }
    match node {
        // tilt of a Gaussian is the same Gaussian after recentering
        Node::Gaussian(g) => Ok(Node::Gaussian(g)),
        Node::Uniform1(u) => {
            let tau = xi[0];
            let center = u.half * log_sinhc_d1(u.half * tau);
            Ok(Node::TiltedUniform1(TiltedUniform1N { half: u.half, tau, center }))
        }
        Node::TiltedUniform1(t) => {
            let tau = t.tau + xi[0];
            let center = t.half * log_sinhc_d1(t.half * tau);
            Ok(Node::TiltedUniform1(TiltedUniform1N { half: t.half, tau, center }))
        }
        Node::Ball(b) => {
            let s = xi.norm();
            let (lz, d1, _) = ball_lambda(b.dim, b.radius, s);
            let center = if s < 1e-14 { DVector::zeros(b.dim) } else { &xi * (d1 / s) };
            Ok(Node::TiltedBall(TiltedBallN { dim: b.dim, radius: b.radius, xi, center, lz }))
        }
        Node::TiltedBall(t) => {
            let combined = &t.xi + &xi;
            let s = combined.norm();
            let (lz, d1, _) = ball_lambda(t.dim, t.radius, s);
            let center = if s < 1e-14 { DVector::zeros(t.dim) } else { &combined * (d1 / s) };
            Ok(Node::TiltedBall(TiltedBallN {
                dim: t.dim,
                radius: t.radius,
                xi: combined,
                center,
                lz,
            }))
        }
        Node::Product(p) => {
            let mut parts = Vec::with_capacity(p.parts.len());
            for (part, off) in p.parts.into_iter().zip(p.offsets.iter()) {
                let d = part.dim();
                let sub = xi.rows(*off, d).into_owned();
                parts.push(tilt_node(part, sub, ctx)?);
            }
            Ok(product_node(parts))
        }
        Node::Affine(a) => {
            let txi = &a.at * &xi;
            let tilted = tilt_node(*a.base, txi, ctx)?;
            affine_node(tilted, a.a, DVector::zeros(xi.len()))
        }
        Node::TiltedGeneric(t) => {
            let combined = &t.xi + &xi;
            let base = *t.base;
            let lz = base.log_laplace(&combined, ctx);
            let center = base.lambda_grad(&combined, ctx);
            Ok(Node::TiltedGeneric(TiltedGenericN { base: Box::new(base), xi: combined, center, lz }))
        }
        other => {
            let lz = other.log_laplace(&xi, ctx);
            if !lz.is_finite() {
                return Err(Error::TiltOutsideDomain);
            }
            let center = other.lambda_grad(&xi, ctx);
            Ok(Node::TiltedGeneric(TiltedGenericN {
                base: Box::new(other),
                xi,
                center,
                lz,
            }))
        }
    }
}
