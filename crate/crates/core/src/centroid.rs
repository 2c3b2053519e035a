//! L_p centroid bodies Z_p(μ): support functions, diameters, volume
//! radii, ψ_α constants and I_q norms.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bodies::{self, Body, DirectionNet, NetCfg};
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::measures::{Computed, Measure, MeasureSpec, WeightedSample};
use crate::special::{gaussian_gamma, gaussian_norm_moment};

/// A centroid body reference: the measure, the order p (∞ allowed for
/// compactly supported measures) and the backing oracle body.
#[derive(Clone)]
pub struct CentroidBody {
    pub measure: Arc<Measure>,
    pub p: f64,
    pub body: Body,
}

/// h_{Z_p(μ)}(θ) = (E|⟨X,θ⟩|^p)^{1/p}; Z_∞(K) = conv(K, −K).
pub fn zp_body(mu: &Arc<Measure>, p: f64) -> Result<CentroidBody> {
    if p < 1.0 {
        return Err(Error::InvalidSpec("Z_p needs p ≥ 1".into()));
    }
    let dim = mu.dim();
    let body = if p.is_infinite() {
        if !mu.has_compact_support() {
            return Err(Error::InfiniteMoment);
        }
        let m = mu.clone();
        let support = move |theta: &DVector<f64>| -> Result<Estimate> {
            let a = m.supp_h(theta).ok_or(Error::InfiniteMoment)?;
            let b = m.supp_h(&(-theta)).ok_or(Error::InfiniteMoment)?;
            Ok(Estimate::exact(a.max(b)))
        };
        Body::from_oracles(dim, true, Some(Arc::new(support)), None, None, true)
    } else if let MeasureSpec::Gaussian { .. } = mu.spec() {
        // h = γ_p √(θᵀΣθ): the ellipsoid γ_p Σ^{1/2} B_n
        let cov = mu.covariance().into_value();
        let g = gaussian_gamma(p);
        Body::ellipsoid(cov * (g * g))?
    } else if p == 2.0 {
        match mu.covariance() {
            Computed::Exact(cov) => Body::ellipsoid(cov)?,
            Computed::Mc { .. } => generic_zp_body(mu, p),
        }
    } else if let MeasureSpec::UniformBall { dim: m, radius } = mu.spec() {
        let marg = crate::measures::Marginal1D::density(ball_density(*m, *radius));
        let c = marg.abs_moment(p).powf(1.0 / p);
        Body::ball(dim, c)
    } else {
        generic_zp_body(mu, p)
    };
    Ok(CentroidBody { measure: mu.clone(), p, body })
}

fn ball_density(m: usize, radius: f64) -> crate::measures::DensityFn {
    let r = radius;
    crate::measures::DensityFn {
        support: (-r, r),
        breaks: vec![],
        ln_density: Arc::new(move |t: f64| {
            let f = crate::special::ball_marginal_density(m, r, t);
            if f <= 0.0 {
                f64::NEG_INFINITY
            } else {
                f.ln()
            }
        }),
    }
}

/// Quadrature-marginal or common-sample support oracle, with the
/// moment-gradient boundary oracle used by inner hull volumes.
fn generic_zp_body(mu: &Arc<Measure>, p: f64) -> Body {
    let dim = mu.dim();
    let m = mu.clone();
    let support = move |theta: &DVector<f64>| -> Result<Estimate> {
        let est = m.directional_moment(theta, p);
        Ok(est.map(|v| v.powf(1.0 / p), |v| v.powf(1.0 / p - 1.0) / p))
    };
    let mb = mu.clone();
    let boundary = move |theta: &DVector<f64>| -> Result<DVector<f64>> {
        if mb.marginal(theta).is_some() {
            // h is analytic here; central differences on the (1-homogeneous)
            // support function give the touching point
            let h0 = 1e-5;
            let hval = |v: &DVector<f64>| -> f64 {
                mb.directional_moment(&v.normalize(), p).value.powf(1.0 / p) * v.norm()
            };
            let mut g = DVector::zeros(theta.len());
            for j in 0..theta.len() {
                let mut e = DVector::zeros(theta.len());
                e[j] = h0;
                g[j] = (hval(&(theta + &e)) - hval(&(theta - &e))) / (2.0 * h0);
            }
            Ok(g)
        } else {
            // exact gradient of the empirical moment norm
            let s = mb.common_sample();
            let mp = s_weighted_moment(&s, theta, p);
            let h = mp.powf(1.0 / p);
            let mut g = DVector::zeros(theta.len());
            for i in 0..s.len() {
                let t = s.dot(i, theta);
                let w = s.weight(i) * t.abs().powf(p - 1.0) * t.signum();
                let pt = s.point(i);
                for j in 0..theta.len() {
                    g[j] += w * pt[j];
                }
            }
            Ok(g * h.powf(1.0 - p))
        }
    };
    let symmetric = true; // |⟨x,θ⟩|^p is even in θ
    Body::from_oracles(
        dim,
        symmetric,
        Some(Arc::new(support)),
        None,
        Some(Arc::new(boundary)),
        true,
    )
}

fn s_weighted_moment(s: &WeightedSample, theta: &DVector<f64>, p: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..s.len() {
        acc += s.weight(i) * s.dot(i, theta).abs().powf(p);
    }
    acc
}

/// Δ_μ(p) = diam(Z_p(μ)); exact for Gaussian and ball families,
/// net-plus-ascent otherwise (a certified lower bound).
pub fn zp_diam(mu: &Arc<Measure>, p: f64, cfg: NetCfg) -> Result<Estimate> {
    match mu.spec() {
        MeasureSpec::Gaussian { .. } => {
            let cov = mu.covariance().into_value();
            let eig = nalgebra::SymmetricEigen::new(cov);
            let lmax = eig.eigenvalues.max();
            Ok(Estimate::exact(2.0 * gaussian_gamma(p) * lmax.sqrt()))
        }
        MeasureSpec::UniformBall { dim, radius } => {
            let marg = crate::measures::Marginal1D::density(ball_density(*dim, *radius));
            Ok(Estimate::exact(2.0 * marg.abs_moment(p).powf(1.0 / p)))
        }
        _ => {
            let zb = zp_body(mu, p)?;
            let rep = bodies::diameter(&zb.body, cfg)?;
            Ok(rep.value)
        }
    }
}

/// Dual-route V.Rad.(Z_p(μ)): the Santaló-inverted polar estimate is the
/// primary value; the inner hull of boundary points (dim ≤ 6) is the
/// certified lower cross-check. When the hull route is unavailable the
/// stderr is doubled.
#[derive(Clone, Debug)]
pub struct ZpVrad {
    pub value: Estimate,
    pub inner_hull: Option<f64>,
}

pub fn zp_vrad(mu: &Arc<Measure>, p: f64, cfg: NetCfg) -> Result<ZpVrad> {
    let zb = zp_body(mu, p)?;
    let rep = bodies::vrad_support(&zb.body, cfg)?;
    let mut value = rep.santalo.clone();
    if rep.inner_hull.is_none() {
        value.stderr *= 2.0;
    }
    Ok(ZpVrad { value, inner_hull: rep.inner_hull })
}

/// ψ_α constant report: the attaining grid point and direction come with
/// the estimate, which makes grid under-estimation auditable.
#[derive(Clone, Debug)]
pub struct PsiAlphaReport {
    pub value: Estimate,
    pub attained_p: f64,
    pub attained_dir: DVector<f64>,
}

/// b̂_α = max over the p-grid and a direction net of
/// h_{Z_p}(θ) / (p^{1/α} h_{Z_2}(θ)).
pub fn psi_alpha_constant(
    mu: &Arc<Measure>,
    alpha: f64,
    p_grid: &[f64],
    cfg: NetCfg,
) -> Result<PsiAlphaReport> {
    assert!((1.0..=2.0).contains(&alpha));
    let z2 = zp_body(mu, 2.0)?;
    let net = DirectionNet::new(mu.dim(), cfg.count, cfg.seed);
    let mut best = f64::NEG_INFINITY;
    let mut attained = (p_grid[0], net.dirs[0].clone());
    let mut worst_stderr: f64 = 0.0;
    for &p in p_grid {
        let zp = zp_body(mu, p)?;
        for th in &net.dirs {
            let hp = zp.body.support(th)?;
            let h2 = z2.body.support(th)?;
            let ratio = hp.value / (p.powf(1.0 / alpha) * h2.value);
            worst_stderr = worst_stderr.max(hp.stderr / (p.powf(1.0 / alpha) * h2.value));
            if ratio > best {
                best = ratio;
                attained = (p, th.clone());
            }
        }
    }
    Ok(PsiAlphaReport {
        value: Estimate { value: best, stderr: worst_stderr, ..Estimate::exact(best) },
        attained_p: attained.0,
        attained_dir: attained.1,
    })
}

/// I_q(μ) = (E|X|^q)^{1/q}.
pub fn iq_norm(mu: &Arc<Measure>, q: f64) -> Result<Estimate> {
    assert!(q >= 1.0);
    match mu.spec() {
        MeasureSpec::Gaussian { covariance: None, dim } => {
            Ok(Estimate::exact(gaussian_norm_moment(*dim, q).powf(1.0 / q)))
        }
        MeasureSpec::UniformBall { dim, radius } => {
            // E r^q = n R^q / (n + q)
            let n = *dim as f64;
            Ok(Estimate::exact((n * radius.powf(q) / (n + q)).powf(1.0 / q)))
        }
        _ => {
            let s = mu.common_sample();
            let means = crate::measures::weighted_batch_means(&s, mu.ctx().batches, |i| {
                let pt = s.point(i);
                pt.iter().map(|x| x * x).sum::<f64>().powf(0.5 * q)
            });
            let est = Estimate::from_batch_means(&means, s.len() as u64, s.seed)
                .with_low_ess(s.low_ess());
            Ok(est.map(|m| m.powf(1.0 / q), |m| m.powf(1.0 / q - 1.0) / q))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Ctx;

    fn arc(spec: MeasureSpec) -> Arc<Measure> {
        Arc::new(Measure::new(spec).unwrap())
    }

    fn arc_ctx(spec: MeasureSpec, seed: u64) -> Arc<Measure> {
        Arc::new(Measure::with_ctx(spec, Ctx { samples: 1 << 15, batches: 16, seed }).unwrap())
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn z2_of_gaussian_is_unit_ball() {
        let g = arc(MeasureSpec::gaussian(3));
        let z2 = zp_body(&g, 2.0).unwrap();
        let net = DirectionNet::new(3, 64, 0);
        for th in &net.dirs {
            assert!((z2.body.support(th).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z1_of_cube1_is_half_segment() {
        let c = arc(MeasureSpec::cube(1, 1.0));
        let z1 = zp_body(&c, 1.0).unwrap();
        assert!((z1.body.support(&v(&[1.0])).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn z1_of_gaussian2_radius() {
        let g = arc(MeasureSpec::gaussian(2));
        let z1 = zp_body(&g, 1.0).unwrap();
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((z1.body.support(&v(&[0.6, 0.8])).unwrap().value - want).abs() < 1e-12);
    }

    #[test]
    fn zp_diameters() {
        // gaussian p = 4: 2·3^{1/4}
        let g = arc(MeasureSpec::gaussian(3));
        let d = zp_diam(&g, 4.0, NetCfg::default()).unwrap();
        assert!((d.value - 2.0 * 3f64.powf(0.25)).abs() < 1e-12);

        // 1-D cube p = 1: diam = 2·(1/2) = 1
        let c = arc(MeasureSpec::cube(1, 1.0));
        let d = zp_diam(&c, 1.0, NetCfg::default()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-10, "{}", d.value);

        // any isotropic spec at p = 2: diam Z_2 = 2
        for spec in [MeasureSpec::isotropic_cube(3), MeasureSpec::isotropic_ball(3)] {
            let m = arc(spec);
            let d = zp_diam(&m, 2.0, NetCfg { count: 128, seed: 1 }).unwrap();
            assert!((d.value - 2.0).abs() < 1e-9, "{}", d.value);
        }
    }

    #[test]
    fn zp_monotone_in_p_pointwise() {
        let m = arc(MeasureSpec::cube(2, 1.0));
        let net = DirectionNet::new(2, 32, 2);
        let ps = [1.0, 2.0, 3.0, 5.0, 8.0];
        for th in &net.dirs {
            let mut last = 0.0;
            for &p in &ps {
                let h = zp_body(&m, p).unwrap().body.support(th).unwrap().value;
                assert!(h >= last - 1e-12);
                last = h;
            }
        }
    }

    #[test]
    fn zp_reverse_inclusion_constant() {
        // h_{Z_q} ≤ C (q/p) h_{Z_p}: report the empirical C on a net and
        // require it below the Berwald-type bound scale
        let m = arc(MeasureSpec::simplexish());
        let net = DirectionNet::new(2, 32, 3);
        let (p, q) = (2.0, 6.0);
        let zp = zp_body(&m, p).unwrap();
        let zq = zp_body(&m, q).unwrap();
        let mut worst: f64 = 0.0;
        for th in &net.dirs {
            let a = zq.body.support(th).unwrap().value;
            let b = zp.body.support(th).unwrap().value;
            worst = worst.max(a / ((q / p) * b));
        }
        assert!(worst <= 1.0 + 1e-9, "C = {worst}");
    }

    #[test]
    fn z_infinity_of_cube_is_cube() {
        let m = arc(MeasureSpec::cube(2, 1.0));
        let zi = zp_body(&m, f64::INFINITY).unwrap();
        let th = v(&[0.6, 0.8]);
        // conv(K,−K) = K for the symmetric cube: h = Σ|θ_i|
        assert!((zi.body.support(&th).unwrap().value - 1.4).abs() < 1e-12);
        // Z_n ⊆ Z_∞ with moments below the max
        let zn = zp_body(&m, 2.0).unwrap();
        assert!(zn.body.support(&th).unwrap().value <= zi.body.support(&th).unwrap().value);
        // unbounded support refuses Z_∞
        assert!(zp_body(&arc(MeasureSpec::gaussian(2)), f64::INFINITY).is_err());
    }

    #[test]
    fn zp_vrad_gaussian_and_isotropic() {
        let g = arc(MeasureSpec::gaussian(3));
        let r = zp_vrad(&g, 4.0, NetCfg { count: 512, seed: 4 }).unwrap();
        let want = 3f64.powf(0.25);
        assert!((r.value.value - want).abs() < 1e-9, "{} vs {want}", r.value.value);

        // isotropic specs at p = 2 have V.Rad.(Z_2) = 1
        for spec in [MeasureSpec::isotropic_cube(2), MeasureSpec::isotropic_ball(3)] {
            let m = arc(spec.clone());
            let r = zp_vrad(&m, 2.0, NetCfg { count: 2048, seed: 5 }).unwrap();
            assert!(
                (r.value.value - 1.0).abs() < 0.03,
                "{}: {}",
                spec.descriptor(),
                r.value.value
            );
            if let Some(hull) = r.inner_hull {
                assert!(hull <= 1.0 + 1e-9);
                assert!(hull > 0.9);
            }
        }
    }

    #[test]
    fn vr_z2_identity_small_dims() {
        // V.Rad.(Z_2(K)) = det Cov^{1/2n} within 3%
        for spec in [
            MeasureSpec::cube(2, 1.0),
            MeasureSpec::ball(3, 1.3),
            MeasureSpec::simplexish(),
        ] {
            let m = arc_ctx(spec.clone(), 6);
            let want = m.det_cov_power();
            let got = zp_vrad(&m, 2.0, NetCfg { count: 4096, seed: 6 }).unwrap();
            assert!(
                (got.value.value - want).abs() / want < 0.03,
                "{}: {} vs {want}",
                spec.descriptor(),
                got.value.value
            );
        }
    }

    #[test]
    fn rotation_equivariance_of_support() {
        // Z_p(Rμ) support at Rθ equals Z_p(μ) support at θ
        let angle = 0.83f64;
        let (s, c) = angle.sin_cos();
        let rot = vec![vec![c, -s], vec![s, c]];
        let base = MeasureSpec::cube(2, 1.0);
        let m = arc(base.clone());
        let mrot = arc(MeasureSpec::affine(base, rot, vec![0.0, 0.0]));
        let th = v(&[0.3, 0.9539392014169456]);
        let thn = th.normalize();
        let rth = v(&[c * thn[0] - s * thn[1], s * thn[0] + c * thn[1]]);
        for p in [1.5, 3.0] {
            let a = zp_body(&m, p).unwrap().body.support(&thn).unwrap().value;
            let b = zp_body(&mrot, p).unwrap().body.support(&rth).unwrap().value;
            assert!((a - b).abs() < 1e-10, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn psi_alpha_gaussian() {
        let g = arc(MeasureSpec::gaussian(2));
        let grid: Vec<f64> = (2..=16).map(|k| k as f64).collect();
        let rep = psi_alpha_constant(&g, 2.0, &grid, NetCfg { count: 64, seed: 7 }).unwrap();
        // γ_p/√p is maximized at p = 2 with value 1/√2
        assert!((rep.value.value - 0.5f64.sqrt()).abs() < 1e-9, "{}", rep.value.value);
        assert_eq!(rep.attained_p, 2.0);
    }

    #[test]
    fn psi_alpha_single_point_grid_identity() {
        let m = arc(MeasureSpec::cube(2, 1.0));
        for alpha in [1.0, 1.5, 2.0] {
            let rep =
                psi_alpha_constant(&m, alpha, &[2.0], NetCfg { count: 32, seed: 8 }).unwrap();
            let want = 2f64.powf(-1.0 / alpha);
            assert!((rep.value.value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn psi1_of_cube_bounded() {
        let m = arc(MeasureSpec::cube(2, 1.0));
        let grid: Vec<f64> = (2..=8).map(|k| k as f64).collect();
        let rep = psi_alpha_constant(&m, 1.0, &grid, NetCfg { count: 64, seed: 9 }).unwrap();
        // dense-grid brute force oracle over axis direction: for U[-1,1],
        // h_{Z_p}/p = (h^p/(p+1))^{1/p}/p ≤ 1/2 at p = 2, decreasing after
        assert!(rep.value.value > 0.0 && rep.value.value < 1.0, "{}", rep.value.value);
    }

    #[test]
    fn iq_norms() {
        // I_2 of an isotropic measure in R^n is √n
        let m = arc(MeasureSpec::isotropic_ball(4));
        assert!((iq_norm(&m, 2.0).unwrap().value - 2.0).abs() < 1e-12);

        let g = arc(MeasureSpec::gaussian(2));
        assert!((iq_norm(&g, 2.0).unwrap().value - 2f64.sqrt()).abs() < 1e-12);
        // I_4(gaussian_2) = (E|X|⁴)^{1/4} = 8^{1/4}
        assert!((iq_norm(&g, 4.0).unwrap().value - 8f64.powf(0.25)).abs() < 1e-12);

        // Monte Carlo route agrees for the isotropic cube
        let c = arc_ctx(MeasureSpec::isotropic_cube(3), 10);
        let i2 = iq_norm(&c, 2.0).unwrap();
        assert!((i2.value - 3f64.sqrt()).abs() < 4.0 * i2.stderr + 0.02, "{}", i2.value);
    }
}

impl MeasureSpec {
    /// Recentered 2-D simplex used in several tests.
    #[doc(hidden)]
    pub fn simplexish() -> MeasureSpec {
        let b = 1.0 / 3.0;
        MeasureSpec::affine(
            MeasureSpec::simplex(2),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![-b, -b],
        )
    }
}
