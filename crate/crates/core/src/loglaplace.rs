//! Logarithmic Laplace transform Λ_μ, its derivatives, tilted measures,
//! Λ_p level-set bodies and the Ψ_p functional.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::estimate::{batched_mean, Estimate};
use crate::measures::{EvalMode, Measure, WeightedSample};
use crate::rng::stream_rng;

/// Λ_μ(ξ) = log ∫ e^{⟨ξ,x⟩} dμ. Exact (stderr 0) in closed-form,
/// quadrature and exact-data modes; Monte Carlo mode reports a batch
/// stderr computed over the measure's common sample.
pub fn lambda_eval(mu: &Measure, xi: &DVector<f64>) -> Result<Estimate> {
    let v = mu.log_laplace(xi);
    if !v.is_finite() {
        return Err(Error::OutsideDomain);
    }
    match mu.laplace_mode() {
        EvalMode::MonteCarlo => {
            let s = mu.common_sample();
            let means = lambda_batches(&s, xi, mu.ctx().batches);
            let est = Estimate::from_batch_means(&means, s.len() as u64, s.seed);
            Ok(Estimate { value: v, ..est })
        }
        _ => Ok(Estimate::exact(v)),
    }
}

fn lambda_batches(s: &WeightedSample, xi: &DVector<f64>, batches: usize) -> Vec<f64> {
    crate::estimate::batch_ranges(s.len(), batches)
        .into_iter()
        .map(|(a, b)| {
            let mut mx = f64::NEG_INFINITY;
            for i in a..b {
                mx = mx.max(s.dot(i, xi));
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for i in a..b {
                let w = s.weight(i);
                num += w * (s.dot(i, xi) - mx).exp();
                den += w;
            }
            mx + (num / den).ln()
        })
        .collect()
}

/// (∇Λ_μ(ξ), Hess Λ_μ(ξ)): the barycenter (before recentering) and
/// covariance of the tilted measure μ_ξ.
pub fn lambda_derivatives(mu: &Measure, xi: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !mu.log_laplace(xi).is_finite() {
        return Err(Error::OutsideDomain);
    }
    Ok((mu.lambda_grad(xi), mu.lambda_hess(xi)))
}

/// The tilt μ_ξ as a spec (recentered at construction).
pub fn tilt(mu: &Measure, xi: &DVector<f64>) -> Result<crate::measures::MeasureSpec> {
    if !mu.log_laplace(xi).is_finite() {
        return Err(Error::OutsideDomain);
    }
    Ok(mu.tilt_spec(xi))
}

/// Relative root tolerance per evaluation mode.
fn root_tol(mode: EvalMode) -> f64 {
    match mode {
        EvalMode::MonteCarlo => 1e-6,
        _ => 1e-10,
    }
}

/// Distance to the level set along a ray: sup { t : f(t) ≤ p } for a
/// nondecreasing f with f(0) = 0 < p, by doubling bracket + bisection.
fn ray_root(f: impl Fn(f64) -> f64, p: f64, rel_tol: f64) -> Result<f64> {
    debug_assert!(p > 0.0);
    let mut hi = 1.0f64;
    let mut lo = 0.0f64;
    let mut budget = 64;
    while f(hi) <= p {
        lo = hi;
        hi *= 2.0;
        budget -= 1;
        if budget == 0 {
            return Err(Error::RootBracketFailure { level: p, reached: hi });
        }
    }
    for _ in 0..200 {
        if (hi - lo) <= rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) <= p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The symmetrized level-set body Λ_p(μ) = {Λ_μ ≤ p} ∩ −{Λ_μ ≤ p},
/// exposed through its radial oracle. Valid because t ↦ Λ(tθ) is
/// nondecreasing for t ≥ 0 when μ is centered.
pub fn lambda_p_body(mu: &Arc<Measure>, p: f64) -> Result<Body> {
    if p <= 0.0 {
        return Err(Error::InvalidSpec("lambda_p needs p > 0".into()));
    }
    let tol = root_tol(mu.laplace_mode());
    let dim = mu.dim();
    let m = mu.clone();
    let radial = move |theta: &DVector<f64>| -> Result<Estimate> {
        let f = |t: f64| {
            let a = m.log_laplace(&(theta * t));
            let b = m.log_laplace(&(theta * (-t)));
            a.max(b)
        };
        let r = ray_root(f, p, tol)?;
        Ok(Estimate { value: r, stderr: tol * r, ..Estimate::exact(r) })
    };
    Ok(Body::from_oracles(
        dim,
        true,
        None,
        Some(Arc::new(radial)),
        None,
        true,
    ))
}

/// Uniform points in the scaled body s·Λ_p(μ) via the radial
/// representation (direction uniform on the sphere, radius r·U^{1/n}).
pub fn sample_in_lambda_p(
    mu: &Arc<Measure>,
    p: f64,
    scale: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let body = lambda_p_body(mu, p)?;
    let n = mu.dim();
    let mut rng = stream_rng(seed, "lambda-p-interior", 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let nv = v.norm();
        if nv < 1e-12 {
            continue;
        }
        v /= nv;
        let u: f64 = rand::Rng::gen(&mut rng);
        let r = body.radial(&v)?.value * scale * u.powf(1.0 / n as f64);
        out.push(v * r);
    }
    Ok(out)
}

/// Ψ_p = ( average of det Hess Λ_μ over uniform points of ½Λ_p(μ) )^{1/n},
/// the volume-growth functional controlling V.Rad.(Λ_p).
pub fn psi_p_estimate(mu: &Arc<Measure>, p: f64, n_points: usize, seed: u64) -> Result<Estimate> {
    let pts = sample_in_lambda_p(mu, p, 0.5, n_points, seed)?;
    let n = mu.dim() as f64;
    let dets: Vec<f64> = pts
        .iter()
        .map(|x| {
            let h = mu.lambda_hess(x);
            psd_det(&h)
        })
        .collect();
    let means = batched_mean(dets.len(), mu.ctx().batches.min(dets.len()), |i| dets[i]);
    let est = Estimate::from_batch_means(&means, dets.len() as u64, seed);
    Ok(est.map(|m| m.powf(1.0 / n), |m| m.powf(1.0 / n - 1.0) / n))
}

/// Determinant through a symmetric eigendecomposition with PSD clipping:
/// Monte Carlo Hessians can carry tiny negative eigenvalues.
pub fn psd_det(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    eig.eigenvalues.iter().map(|l| l.max(1e-12)).product()
}
