//! Scalar functionals: isotropic constants, the Dvoretzky ratio k*, the
//! P-properties, and the q♯ / q♯_H / q♯_GH parameter family.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bodies::{self, Body, NetCfg};
use crate::centroid::{zp_body, zp_diam};
use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::measures::Measure;

/// Configuration of the q♯ bisection. The paper's c♯ is "small enough"
/// and unknowable; checks sweep it over {0.25, 0.5, 1.0} and report
/// trends instead of fixing it.
#[derive(Clone, Copy, Debug)]
pub struct QSharpConfig {
    pub c_sharp: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// relative bisection tolerance on q
    pub rel_tol: f64,
    pub net: NetCfg,
}

impl QSharpConfig {
    pub fn new(dim: usize) -> QSharpConfig {
        QSharpConfig {
            c_sharp: 1.0,
            q_min: 1.0,
            q_max: dim as f64,
            rel_tol: 1e-3,
            net: NetCfg::default(),
        }
    }

    pub fn with_c_sharp(mut self, c: f64) -> Self {
        assert!(c > 0.0);
        self.c_sharp = c;
        self
    }
}

/// L_μ = ‖μ‖_∞^{1/n} · det Cov(μ)^{1/2n}.
pub fn isotropic_constant(mu: &Measure) -> Result<Estimate> {
    let sup = mu.density_sup()?;
    let n = mu.dim() as f64;
    Ok(Estimate::exact(sup.powf(1.0 / n) * mu.det_cov_power()))
}

/// k*(K) = n · (W(K)/diam(K))², the constants of the ≃ absorbed into
/// the convention.
pub fn kstar(body: &Body, cfg: NetCfg) -> Result<Estimate> {
    if !body.symmetric {
        return Err(Error::InvalidSpec("kstar needs a symmetric body".into()));
    }
    let w = bodies::mean_width(body, None, cfg)?;
    let d = bodies::diameter(body, cfg)?.value;
    let n = body.dim as f64;
    let ratio = w.value / d.value;
    let value = n * ratio * ratio;
    let rel = 2.0 * ((w.stderr / w.value).abs() + (d.stderr / d.value).abs());
    Ok(Estimate { value, stderr: value * rel, ..w })
}

/// Memoized Δ_μ(q) = diam(Z_q(μ)) evaluator for the bisections.
pub struct DiamFn {
    mu: Arc<Measure>,
    cfg: NetCfg,
    cache: RefCell<BTreeMap<u64, Estimate>>,
}

impl DiamFn {
    pub fn new(mu: Arc<Measure>, cfg: NetCfg) -> DiamFn {
        DiamFn { mu, cfg, cache: RefCell::new(BTreeMap::new()) }
    }

    pub fn eval(&self, q: f64) -> Result<Estimate> {
        let key = q.to_bits();
        if let Some(e) = self.cache.borrow().get(&key) {
            return Ok(e.clone());
        }
        let e = zp_diam(&self.mu, q, self.cfg)?;
        self.cache.borrow_mut().insert(key, e.clone());
        Ok(e)
    }

    /// Largest q in [q_min, q_max] with Δ(q) ≤ level, using that Δ is
    /// nondecreasing. Returns (root, clamped_high).
    pub fn inverse(&self, level: f64, q_min: f64, q_max: f64, rel_tol: f64) -> Result<(f64, bool)> {
        if self.eval(q_min)?.value > level {
            return Ok((q_min, false));
        }
        if self.eval(q_max)?.value <= level {
            return Ok((q_max, true));
        }
        let (mut lo, mut hi) = (q_min, q_max);
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)?.value <= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), false))
    }
}

/// The four P-properties of a (measure, q, δ) triple, with the measured
/// quantities they were decided from.
#[derive(Clone, Debug)]
pub struct Properties {
    pub p1: bool,
    pub p1_prime: bool,
    pub p2: bool,
    pub pw: bool,
    pub kstar_zq: f64,
    pub diam_zq: f64,
    pub width_zq: f64,
    pub det_cov_pow: f64,
}

/// Evaluates P1(δ), P1'(δ), P2(δ) and P_W. The universal constant in
/// P_W is a configuration value (`pw_c`, default 0.1 in the suites).
pub fn check_properties(
    mu: &Arc<Measure>,
    q: f64,
    delta: f64,
    pw_c: f64,
    cfg: NetCfg,
) -> Result<Properties> {
    let n = mu.dim() as f64;
    let zq = zp_body(mu, q)?;
    let ks = kstar(&zq.body, cfg)?.value;
    let diam = zp_diam(mu, q, cfg)?.value;
    let width = bodies::mean_width(&zq.body, None, cfg)?.value;
    let dcp = mu.det_cov_power();
    Ok(Properties {
        p1: ks >= q / (delta * delta),
        p1_prime: diam <= delta * n.sqrt() * width / q.sqrt(),
        p2: diam <= delta * n.sqrt() * dcp,
        pw: width >= pw_c * q.sqrt() * dcp,
        kstar_zq: ks,
        diam_zq: diam,
        width_zq: width,
        det_cov_pow: dcp,
    })
}

/// q♯ bisection result.
#[derive(Clone, Debug)]
pub struct QSharp {
    pub value: Estimate,
    /// true when Δ(q_max) never exceeded the threshold (root clamped)
    pub clamped: bool,
}

/// q♯(μ) = sup { q ≥ 1 : diam(Z_q(μ)) ≤ c♯ √n det Cov^{1/2n} }, with the
/// convention q♯ = 1 when even Δ(1) exceeds the threshold.
pub fn q_sharp(mu: &Arc<Measure>, cfg: &QSharpConfig) -> Result<QSharp> {
    let n = mu.dim() as f64;
    let level = cfg.c_sharp * n.sqrt() * mu.det_cov_power();
    let diam = DiamFn::new(mu.clone(), cfg.net);
    let (root, clamped) = diam.inverse(level, cfg.q_min, cfg.q_max, cfg.rel_tol)?;
    let est = Estimate {
        value: root,
        stderr: cfg.rel_tol * root,
        ..Estimate::exact(root)
    };
    Ok(QSharp { value: est, clamped })
}

fn require_isotropic(mu: &Measure) -> Result<()> {
    let cov = mu.covariance();
    let n = mu.dim();
    let dev = (cov.value() - nalgebra::DMatrix::identity(n, n)).norm();
    let tol = if cov.is_exact() { 1e-6 } else { 0.05 };
    if dev > tol {
        return Err(Error::NotIsotropic(dev));
    }
    let b = mu.barycenter();
    if b.value().norm() > tol {
        return Err(Error::NotIsotropic(b.value().norm()));
    }
    Ok(())
}

/// Hereditary q♯ for isotropic μ:
/// q♯_H = n · inf_{1 ≤ q ≤ q♯} q / diam(Z_q(μ))², the infimum taken over
/// a geometric grid of ratio 1.25.
pub fn q_sharp_hereditary(mu: &Arc<Measure>, cfg: &QSharpConfig) -> Result<Estimate> {
    require_isotropic(mu)?;
    let n = mu.dim() as f64;
    let qs = q_sharp(mu, cfg)?;
    let diam = DiamFn::new(mu.clone(), cfg.net);
    let mut inf = f64::INFINITY;
    let mut q = cfg.q_min;
    let qmax = qs.value.value;
    loop {
        let d = diam.eval(q.min(qmax))?.value;
        inf = inf.min(q.min(qmax) / (d * d));
        if q >= qmax {
            break;
        }
        q = (q * 1.25).min(qmax);
    }
    Ok(Estimate::exact(n * inf))
}

/// Per-k root detail of the geometric variant.
#[derive(Clone, Debug)]
pub struct QSharpGeometric {
    pub value: Estimate,
    /// Δ_μ^{-1}(c♯√k) for k = 1..n, clamped into [1, q_max]
    pub roots: Vec<f64>,
    pub any_clamped: bool,
}

/// Geometric-mean hereditary variant for isotropic μ:
/// q♯_GH = n · (∏_{k=1}^n Δ_μ^{-1}(c♯√k)/k)^{1/n}. The normalization by k
/// inside the product keeps the geometric mean ≥ the infimum in q♯_H.
pub fn q_sharp_geometric(mu: &Arc<Measure>, cfg: &QSharpConfig) -> Result<QSharpGeometric> {
    require_isotropic(mu)?;
    let n = mu.dim();
    let diam = DiamFn::new(mu.clone(), cfg.net);
    let mut roots = Vec::with_capacity(n);
    let mut any_clamped = false;
    let mut ln_acc = 0.0;
    for k in 1..=n {
        let level = cfg.c_sharp * (k as f64).sqrt();
        let (root, clamped) = diam.inverse(level, cfg.q_min, cfg.q_max, cfg.rel_tol)?;
        any_clamped |= clamped;
        roots.push(root);
        ln_acc += (root / k as f64).ln();
    }
    let value = n as f64 * (ln_acc / n as f64).exp();
    Ok(QSharpGeometric {
        value: Estimate { value, stderr: cfg.rel_tol * value, ..Estimate::exact(value) },
        roots,
        any_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::DirectionNet;
    use crate::measures::{Ctx, MeasureSpec};
    use crate::special::gaussian_gamma;
    use nalgebra::DVector;

    fn arc(spec: MeasureSpec) -> Arc<Measure> {
        Arc::new(Measure::new(spec).unwrap())
    }

    #[test]
    fn isotropic_constants_closed_forms() {
        // cube [-1,1]²: vol 4, cov I/3 → L = (1/4)^{1/2} (1/3)^{1/2} = 1/(2√3)
        let c = arc(MeasureSpec::cube(2, 1.0));
        let l = isotropic_constant(&c).unwrap().value;
        assert!((l - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-14);

        // gaussian: (2π)^{-1/2} for every n
        for n in [2, 4, 7] {
            let g = arc(MeasureSpec::gaussian(n));
            let l = isotropic_constant(&g).unwrap().value;
            assert!((l - (2.0 * std::f64::consts::PI).sqrt().recip()).abs() < 1e-13);
        }
    }

    #[test]
    fn isotropic_constant_affine_invariance() {
        let base = MeasureSpec::cube(2, 1.0);
        let l0 = isotropic_constant(&arc(base.clone())).unwrap().value;
        let a = MeasureSpec::affine(
            base,
            vec![vec![2.0, 0.7], vec![-0.4, 1.1]],
            vec![3.0, -1.0],
        );
        let l1 = isotropic_constant(&arc(a)).unwrap().value;
        assert!((l0 - l1).abs() < 1e-12, "{l0} vs {l1}");
    }

    #[test]
    fn kstar_of_ball_and_scaling() {
        let b = Body::ball(5, 1.0);
        let cfg = NetCfg { count: 128, seed: 1 };
        let k = kstar(&b, cfg).unwrap().value;
        assert!((k - 5.0 / 4.0).abs() < 1e-9, "{k}");

        let k2 = kstar(&Body::ball(5, 2.0), cfg).unwrap().value;
        assert!((k - k2).abs() < 1e-9);
    }

    #[test]
    fn kstar_of_segment() {
        // segment [-1,1]×{0}: W = 2/π, diam = 2, k* = 2/π² ≈ 0.2026
        let seg = Body::polytope_v(vec![
            DVector::from_row_slice(&[-1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0]),
        ])
        .unwrap();
        let k = kstar(&seg, NetCfg { count: 20000, seed: 2 }).unwrap();
        let want = 2.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((k.value - want).abs() < 0.01, "{} vs {want}", k.value);
    }

    #[test]
    fn gaussian4_q_sharp_is_two() {
        let g = arc(MeasureSpec::gaussian(4));
        let cfg = QSharpConfig::new(4);
        let qs = q_sharp(&g, &cfg).unwrap();
        assert!((qs.value.value - 2.0).abs() < 1e-2, "{}", qs.value.value);
        assert!(!qs.clamped);
    }

    #[test]
    fn tiny_c_sharp_gives_one() {
        let g = arc(MeasureSpec::gaussian(4));
        let cfg = QSharpConfig::new(4).with_c_sharp(1e-6);
        let qs = q_sharp(&g, &cfg).unwrap();
        assert_eq!(qs.value.value, 1.0);
    }

    #[test]
    fn ball_q_sharp_matches_dense_grid_oracle() {
        let m = arc(MeasureSpec::isotropic_ball(4));
        let cfg = QSharpConfig::new(4);
        let qs = q_sharp(&m, &cfg).unwrap();
        // dense grid oracle on the closed-form Δ(q) of the ball measure
        let diam = DiamFn::new(m.clone(), cfg.net);
        let level = 2.0; // c♯ √4 · 1
        let mut best = 1.0f64;
        let mut q = 1.0f64;
        while q <= 4.0 {
            if diam.eval(q).unwrap().value <= level {
                best = q;
            }
            q += 1e-3;
        }
        assert!(
            (qs.value.value - best).abs() < 5e-3,
            "bisection {} vs grid {best}",
            qs.value.value
        );
    }

    #[test]
    fn diam_is_monotone_on_grid() {
        let m = arc(MeasureSpec::isotropic_cube(3));
        let diam = DiamFn::new(m, NetCfg { count: 64, seed: 3 });
        let mut last = 0.0;
        for q in [1.0, 1.5, 2.0, 3.0, 4.5, 7.0] {
            let d = diam.eval(q).unwrap().value;
            assert!(d >= last - 1e-9, "q={q}");
            last = d;
        }
    }

    #[test]
    fn gaussian_hereditary_vs_dense_grid() {
        let g = arc(MeasureSpec::gaussian(4));
        let cfg = QSharpConfig::new(4);
        let qh = q_sharp_hereditary(&g, &cfg).unwrap().value;
        // oracle: n inf over dense grid in [1, 2] of q/(2γ_q)²
        let mut inf = f64::INFINITY;
        let mut q = 1.0f64;
        while q <= 2.0 {
            let d = 2.0 * gaussian_gamma(q);
            inf = inf.min(q / (d * d));
            q += 1e-4;
        }
        let want = 4.0 * inf;
        assert!((qh - want).abs() < 0.02 * want, "{qh} vs {want}");
    }

    #[test]
    fn geometric_variant_dominates_hereditary() {
        for spec in [
            MeasureSpec::gaussian(4),
            MeasureSpec::isotropic_cube(4),
            MeasureSpec::isotropic_ball(5),
        ] {
            let m = arc(spec.clone());
            let cfg = QSharpConfig::new(m.dim());
            let qh = q_sharp_hereditary(&m, &cfg).unwrap().value;
            let qg = q_sharp_geometric(&m, &cfg).unwrap();
            assert!(
                qg.value.value >= qh - 0.02 * qh,
                "{}: GH {} < H {qh}",
                spec.descriptor(),
                qg.value.value
            );
        }
    }

    #[test]
    fn gaussian4_geometric_roots() {
        let g = arc(MeasureSpec::gaussian(4));
        let cfg = QSharpConfig::new(4);
        let qg = q_sharp_geometric(&g, &cfg).unwrap();
        // k = 4 root solves 2γ_q = 2, i.e. q = 2
        assert!((qg.roots[3] - 2.0).abs() < 1e-2, "{:?}", qg.roots);
        // oracle product over dense per-k grids
        let mut ln_acc = 0.0;
        for k in 1..=4u32 {
            let level = (k as f64).sqrt();
            let mut best = 1.0f64;
            let mut q = 1.0f64;
            while q <= 4.0 {
                if 2.0 * gaussian_gamma(q) <= level {
                    best = q;
                }
                q += 1e-3;
            }
            ln_acc += (best / k as f64).ln();
        }
        let want = 4.0 * (ln_acc / 4.0).exp();
        assert!((qg.value.value - want).abs() < 0.02 * want, "{} vs {want}", qg.value.value);
    }

    #[test]
    fn not_isotropic_rejected() {
        let c = arc(MeasureSpec::cube(3, 1.0)); // covariance I/3
        let cfg = QSharpConfig::new(3);
        assert!(matches!(q_sharp_hereditary(&c, &cfg), Err(Error::NotIsotropic(_))));
    }

    #[test]
    fn properties_gaussian_boundary() {
        let g = arc(MeasureSpec::gaussian(4));
        let cfg = NetCfg { count: 256, seed: 4 };
        // q = 2, δ = 1: diam Z_2 = 2 = 1·√4·1 exactly (boundary case)
        let p = check_properties(&g, 2.0, 1.0, 0.1, cfg).unwrap();
        assert!(p.p2, "diam {} vs {}", p.diam_zq, 2.0);
        // δ = 10 trivially true for any isotropic measure
        let p = check_properties(&g, 2.0, 10.0, 0.1, cfg).unwrap();
        assert!(p.p2);
        assert!(p.pw);
    }

    #[test]
    fn p1_implies_p1_prime_with_calibrated_constant() {
        // sweep: whenever P1(δ) holds, diam ≤ Ĉ₁ δ √n W/√q with Ĉ₁ from
        // the k* definition; report and bound the empirical constant
        let specs = [MeasureSpec::gaussian(3), MeasureSpec::isotropic_cube(3)];
        let cfg = NetCfg { count: 128, seed: 5 };
        let mut c1_hat: f64 = 0.0;
        for spec in specs {
            let m = arc(spec);
            for q in [1.0, 2.0, 3.0] {
                for delta in [0.5, 1.0] {
                    let p = check_properties(&m, q, delta, 0.1, cfg).unwrap();
                    if p.p1 {
                        // measured Ĉ₁ making P1'(Ĉ₁δ) hold
                        let n = m.dim() as f64;
                        let c1 = p.diam_zq / (delta * n.sqrt() * p.width_zq / q.sqrt());
                        c1_hat = c1_hat.max(c1);
                    }
                }
            }
        }
        assert!(c1_hat > 0.0 && c1_hat < 4.0, "calibrated C1 = {c1_hat}");
    }

    #[test]
    fn hereditary_scaling_across_dims() {
        // ψ₂ family: q♯_H/n stays within 10% across n (gaussian)
        let mut ratios = Vec::new();
        for n in [2usize, 4, 6, 8] {
            let g = Arc::new(
                Measure::with_ctx(
                    MeasureSpec::gaussian(n),
                    Ctx { samples: 1 << 12, batches: 16, seed: 0 },
                )
                .unwrap(),
            );
            let cfg = QSharpConfig::new(n);
            let qh = q_sharp_hereditary(&g, &cfg).unwrap().value;
            ratios.push(qh / n as f64);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for r in &ratios {
            assert!((r - mean).abs() < 0.10 * mean, "{ratios:?}");
        }
    }

    #[test]
    fn qsharp_inequality_consistency() {
        // q♯_H ≤ n·q♯/Δ(q♯)²: the inf is at most the evaluated point
        let m = arc(MeasureSpec::isotropic_ball(4));
        let cfg = QSharpConfig::new(4);
        let qs = q_sharp(&m, &cfg).unwrap().value.value;
        let qh = q_sharp_hereditary(&m, &cfg).unwrap().value;
        let diam = DiamFn::new(m.clone(), cfg.net);
        let d = diam.eval(qs).unwrap().value;
        assert!(qh <= 4.0 * qs / (d * d) + 1e-6);
    }

    #[test]
    fn width_lower_bound_for_admissible_q() {
        // Lemma 4.2(2) surrogate: for q ≤ q♯ (small c♯), W(Z_q) ≥ ĉ√q·detCov^{1/2n}
        let m = arc(MeasureSpec::gaussian(4));
        let cfg = QSharpConfig::new(4).with_c_sharp(0.5);
        let qs = q_sharp(&m, &cfg).unwrap().value.value;
        let net = NetCfg { count: 512, seed: 6 };
        let mut chat = f64::INFINITY;
        let mut q = 1.0;
        while q <= qs {
            let z = zp_body(&m, q).unwrap();
            let w = bodies::mean_width(&z.body, None, net).unwrap().value;
            chat = chat.min(w / (q.sqrt() * m.det_cov_power()));
            q *= 1.25;
        }
        assert!(chat > 0.5, "empirical c = {chat}");
    }

    #[test]
    fn projection_stability() {
        // Cor 4.3: k ≥ (c♯)^{-2} diam²(Z_q) ⇒ q♯(π_E μ) ≥ q
        let n = 7;
        let g = arc(MeasureSpec::gaussian(n));
        let cfg = QSharpConfig::new(n);
        let q = 2.0;
        let d = zp_diam(&g, q, cfg.net).unwrap().value;
        let k_needed = (d * d / (cfg.c_sharp * cfg.c_sharp)).ceil() as usize;
        assert!(k_needed <= n, "test setup: k = {k_needed}");
        for seed in 0..5 {
            let e = bodies::sample_grassmann(n, k_needed, seed).unwrap();
            let proj = g.project(&e).unwrap();
            let pm = arc(proj);
            let pcfg = QSharpConfig::new(pm.dim());
            let qs = q_sharp(&pm, &pcfg).unwrap();
            assert!(qs.value.value >= q - 0.05, "seed {seed}: {}", qs.value.value);
        }
        let _ = DirectionNet::new(2, 8, 0);
    }
}
