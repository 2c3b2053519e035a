//! Convex-body primitives: support/radial oracles, polarity, diameters,
//! widths, volume radii, Grassmannian subspaces.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimate::{batched_mean, Estimate};
use crate::hull;
use crate::rng::stream_rng;

/// A k-dimensional subspace of R^n with orthonormal basis rows.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>, // k × n
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Subspace> {
        let s = Subspace { basis };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        let k = self.basis.nrows();
        let gram = &self.basis * self.basis.transpose();
        let dev = (&gram - DMatrix::identity(k, k)).norm();
        if dev > 1e-10 {
            return Err(Error::NonOrthonormalBasis(dev));
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Coordinates of the projection of `v` in the subspace basis.
    pub fn project_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * v
    }

    /// Embeds subspace coordinates back into R^n.
    pub fn embed(&self, w: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * w
    }

    /// When every basis row is ±e_i, the selected coordinate indices.
    pub fn axis_columns(&self) -> Option<Vec<usize>> {
        let mut cols = Vec::with_capacity(self.dim());
        for r in 0..self.basis.nrows() {
            let row = self.basis.row(r);
            let mut found = None;
            for (c, x) in row.iter().enumerate() {
                if x.abs() > 1e-14 {
                    if found.is_some() || (x.abs() - 1.0).abs() > 1e-14 {
                        return None;
                    }
                    found = Some(c);
                }
            }
            cols.push(found?);
        }
        Some(cols)
    }

    /// Span of the first `k` coordinate axes.
    pub fn axes(n: usize, cols: &[usize]) -> Subspace {
        let mut b = DMatrix::zeros(cols.len(), n);
        for (r, c) in cols.iter().enumerate() {
            b[(r, *c)] = 1.0;
        }
        Subspace { basis: b }
    }
}

/// Haar-distributed subspace: orthonormalized Gaussian matrix.
pub fn sample_grassmann(n: usize, k: usize, seed: u64) -> Result<Subspace> {
    if k < 1 || k > n {
        return Err(Error::InvalidSpec(format!("grassmann needs 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let mut rng = stream_rng(seed, "grassmann", 0);
    let g = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let q = qr.q(); // n × k, orthonormal columns
    Ok(Subspace { basis: q.transpose() })
}

/// Deterministic unit-direction net. In the plane an exhaustive angular
/// grid; in higher dimension seeded Gaussian directions in antithetic
/// pairs (which halve the variance of symmetric integrands).
#[derive(Clone, Debug)]
pub struct DirectionNet {
    pub dim: usize,
    pub dirs: Vec<DVector<f64>>,
    pub rule: &'static str,
}

impl DirectionNet {
    pub fn new(dim: usize, count: usize, seed: u64) -> DirectionNet {
        assert!(dim >= 1 && count >= 2);
        if dim == 1 {
            return DirectionNet {
                dim,
                dirs: vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
                rule: "pair",
            };
        }
        if dim == 2 {
            let dirs = (0..count)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    DVector::from_row_slice(&[a.cos(), a.sin()])
                })
                .collect();
            return DirectionNet { dim, dirs, rule: "grid" };
        }
        let pairs = count.div_ceil(2);
        let mut dirs = Vec::with_capacity(2 * pairs);
        let mut chunk = 0u64;
        'outer: loop {
            let mut rng = stream_rng(seed, "net", chunk);
            for _ in 0..512 {
                let mut v = DVector::from_fn(dim, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                });
                let n = v.norm();
                if n < 1e-12 {
                    continue;
                }
                v /= n;
                dirs.push(-&v);
                dirs.push(v);
                if dirs.len() >= 2 * pairs {
                    break 'outer;
                }
            }
            chunk += 1;
        }
        DirectionNet { dim, dirs, rule: "antithetic" }
    }
}

type ScalarOracle = Arc<dyn Fn(&DVector<f64>) -> Result<Estimate> + Send + Sync>;
type PointOracle = Arc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync>;

/// A convex (or star-shaped) body exposed through oracles. Oracles are
/// pure and cheap to clone; bodies are immutable.
#[derive(Clone)]
pub struct Body {
    pub dim: usize,
    pub symmetric: bool,
    support: Option<ScalarOracle>,
    radial: Option<ScalarOracle>,
    boundary: Option<PointOracle>,
    origin_interior: bool,
}

impl Body {
    pub fn from_oracles(
        dim: usize,
        symmetric: bool,
        support: Option<ScalarOracle>,
        radial: Option<ScalarOracle>,
        boundary: Option<PointOracle>,
        origin_interior: bool,
    ) -> Body {
        Body { dim, symmetric, support, radial, boundary, origin_interior }
    }

    pub fn ball(dim: usize, radius: f64) -> Body {
        let r = radius;
        Body {
            dim,
            symmetric: true,
            support: Some(Arc::new(move |_| Ok(Estimate::exact(r)))),
            radial: Some(Arc::new(move |_| Ok(Estimate::exact(r)))),
            boundary: Some(Arc::new(move |theta: &DVector<f64>| Ok(theta * r))),
            origin_interior: true,
        }
    }

    /// Ellipsoid { x : xᵀ A⁻¹ x ≤ 1 } given the PSD shape matrix A = M Mᵀ;
    /// support h(θ) = √(θᵀAθ).
    pub fn ellipsoid(a: DMatrix<f64>) -> Result<Body> {
        let dim = a.nrows();
        let a_inv = a.clone().try_inverse().ok_or(Error::SingularCovariance)?;
        let a1 = Arc::new(a);
        let a3 = a1.clone();
        let a_inv = Arc::new(a_inv);
        Ok(Body {
            dim,
            symmetric: true,
            support: Some(Arc::new(move |t: &DVector<f64>| {
                Ok(Estimate::exact(t.dot(&(&*a1 * t)).max(0.0).sqrt()))
            })),
            radial: Some(Arc::new(move |t: &DVector<f64>| {
                let q = t.dot(&(&*a_inv * t));
                Ok(Estimate::exact(1.0 / q.max(1e-300).sqrt()))
            })),
            boundary: Some(Arc::new(move |t: &DVector<f64>| {
                let at = &*a3 * t;
                let h = t.dot(&at).max(1e-300).sqrt();
                Ok(at / h)
            })),
            origin_interior: true,
        })
    }

    /// Convex hull of a finite vertex set: exact support, vertex-valued
    /// boundary points; radial oracle through exact facets when the
    /// origin is interior.
    pub fn polytope_v(vertices: Vec<DVector<f64>>) -> Result<Body> {
        if vertices.is_empty() {
            return Err(Error::DegenerateHull);
        }
        let dim = vertices[0].len();
        let symmetric = {
            // vertex set closed under negation (within tolerance)
            vertices.iter().all(|v| {
                vertices.iter().any(|w| (v + w).norm() < 1e-9 * (1.0 + v.norm()))
            })
        };
        let vs = Arc::new(vertices);
        let vs2 = vs.clone();
        let hull_res = hull::convex_hull(&vs);
        let (radial, origin_interior): (Option<ScalarOracle>, bool) = match hull_res {
            Ok(h) => {
                let inside = h.planes.iter().all(|(_, b)| *b > 0.0);
                if inside {
                    let h = Arc::new(h);
                    (
                        Some(Arc::new(move |t: &DVector<f64>| {
                            h.radial_at_origin(t).map(Estimate::exact)
                        }) as ScalarOracle),
                        true,
                    )
                } else {
                    (None, false)
                }
            }
            // lower-dimensional vertex sets (segments etc.) still support
            Err(_) => (None, false),
        };
        let support = {
            let vs = vs.clone();
            Arc::new(move |t: &DVector<f64>| {
                Ok(Estimate::exact(
                    vs.iter().map(|v| v.dot(t)).fold(f64::NEG_INFINITY, f64::max),
                ))
            })
        };
        let boundary = Arc::new(move |t: &DVector<f64>| {
            let mut best = 0usize;
            let mut bestv = f64::NEG_INFINITY;
            for (i, v) in vs2.iter().enumerate() {
                let d = v.dot(t);
                if d > bestv {
                    bestv = d;
                    best = i;
                }
            }
            Ok(vs2[best].clone())
        });
        Ok(Body {
            dim,
            symmetric,
            support: Some(support),
            radial,
            boundary: Some(boundary),
            origin_interior,
        })
    }

    pub fn scaled(&self, factor: f64) -> Body {
        assert!(factor > 0.0);
        let s = self.support.clone().map(|f| {
            Arc::new(move |t: &DVector<f64>| f(t).map(|e| e.map(|x| factor * x, |_| factor)))
                as ScalarOracle
        });
        let r = self.radial.clone().map(|f| {
            Arc::new(move |t: &DVector<f64>| f(t).map(|e| e.map(|x| factor * x, |_| factor)))
                as ScalarOracle
        });
        let b = self.boundary.clone().map(|f| {
            Arc::new(move |t: &DVector<f64>| f(t).map(|p| p * factor)) as PointOracle
        });
        Body {
            dim: self.dim,
            symmetric: self.symmetric,
            support: s,
            radial: r,
            boundary: b,
            origin_interior: self.origin_interior,
        }
    }

    pub fn has_support(&self) -> bool {
        self.support.is_some()
    }

    pub fn has_radial(&self) -> bool {
        self.radial.is_some()
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary.is_some()
    }

    /// h(θ) = sup_{x∈K} ⟨x, θ⟩.
    pub fn support(&self, theta: &DVector<f64>) -> Result<Estimate> {
        match &self.support {
            Some(f) => f(theta),
            None => Err(Error::NoSupportOracle),
        }
    }

    /// r(θ) = sup { t ≥ 0 : tθ ∈ K }.
    pub fn radial(&self, theta: &DVector<f64>) -> Result<Estimate> {
        match &self.radial {
            Some(f) => f(theta),
            None => Err(Error::NoRadialOracle),
        }
    }

    /// A point of K attaining ⟨x, θ⟩ = h(θ).
    pub fn boundary_point(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.boundary {
            Some(f) => f(theta),
            None => Err(Error::NonSmoothAtDirection),
        }
    }

    /// Polar body: radial and support oracles swap and invert.
    pub fn polar(&self) -> Result<Body> {
        if !self.origin_interior {
            return Err(Error::OriginNotInterior);
        }
        let support = self.radial.clone().map(|f| {
            Arc::new(move |t: &DVector<f64>| {
                f(t).map(|e| e.map(|x| 1.0 / x, |x| 1.0 / (x * x)))
            }) as ScalarOracle
        });
        let radial = self.support.clone().map(|f| {
            Arc::new(move |t: &DVector<f64>| {
                f(t).map(|e| e.map(|x| 1.0 / x, |x| 1.0 / (x * x)))
            }) as ScalarOracle
        });
        Ok(Body {
            dim: self.dim,
            symmetric: self.symmetric,
            support,
            radial,
            boundary: None,
            origin_interior: true,
        })
    }

    /// Orthogonal shadow: support of the projection is the restriction of
    /// the support function.
    pub fn project(&self, e: &Subspace) -> Result<Body> {
        if e.ambient_dim() != self.dim {
            return Err(Error::InvalidSpec("projection ambient dim mismatch".into()));
        }
        let sup = self.support.clone().ok_or(Error::NoSupportOracle)?;
        let e1 = e.clone();
        let support = Arc::new(move |t: &DVector<f64>| sup(&e1.embed(t))) as ScalarOracle;
        let boundary = self.boundary.clone().map(|f| {
            let e2 = e.clone();
            Arc::new(move |t: &DVector<f64>| {
                let x = f(&e2.embed(t))?;
                Ok(e2.project_vec(&x))
            }) as PointOracle
        });
        Ok(Body {
            dim: e.dim(),
            symmetric: self.symmetric,
            support: Some(support),
            radial: None,
            boundary,
            origin_interior: self.origin_interior,
        })
    }
}

/// Diameter search report: the value is a certified lower bound (max of
/// all evaluated widths); `net_gap` records the coarse-net resolution so
/// callers needing an upper bound can pad by the appropriate correction.
#[derive(Clone, Debug)]
pub struct DiameterReport {
    pub value: Estimate,
    pub net_size: usize,
    pub ascent_gain: f64,
    pub converged: bool,
}

/// Configuration for net-based body estimates.
#[derive(Clone, Copy, Debug)]
pub struct NetCfg {
    pub count: usize,
    pub seed: u64,
}

impl Default for NetCfg {
    fn default() -> Self {
        NetCfg { count: 256, seed: 0 }
    }
}

/// Width in direction θ: h(θ) + h(−θ).
fn width(body: &Body, theta: &DVector<f64>) -> Result<Estimate> {
    let a = body.support(theta)?;
    let b = body.support(&(-theta))?;
    Ok(Estimate {
        value: a.value + b.value,
        stderr: (a.stderr * a.stderr + b.stderr * b.stderr).sqrt(),
        n_samples: a.n_samples.max(b.n_samples),
        n_batches: a.n_batches.max(b.n_batches),
        seed: a.seed,
        low_ess: a.low_ess || b.low_ess,
    })
}

/// diam(K) = sup_θ h(θ) + h(−θ), by coarse-net seeding plus multi-start
/// iterated-support ascent (the Frank–Wolfe step θ ← normalize(x(θ) −
/// x(−θ)) is monotone for support maximization). The returned value is a
/// net-certified lower bound.
pub fn diameter(body: &Body, cfg: NetCfg) -> Result<DiameterReport> {
    let net = DirectionNet::new(body.dim, cfg.count.max(16), cfg.seed);
    let mut best: Option<(f64, usize)> = None;
    let mut values = Vec::with_capacity(net.dirs.len());
    for (i, th) in net.dirs.iter().enumerate() {
        let w = width(body, th)?;
        values.push(w.clone());
        if best.map(|(v, _)| w.value > v).unwrap_or(true) {
            best = Some((w.value, i));
        }
    }
    let (net_best, _) = best.unwrap();

    // rank directions, take the best 64 as ascent starts
    let mut order: Vec<usize> = (0..net.dirs.len()).collect();
    order.sort_by(|a, b| values[*b].value.partial_cmp(&values[*a].value).unwrap());
    let starts = order.into_iter().take(64);

    let mut overall = net_best;
    let mut overall_est = values
        .iter()
        .cloned()
        .max_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .unwrap();
    let mut converged = false;
    if body.has_boundary() {
        for s in starts {
            let mut th = net.dirs[s].clone();
            let mut last = values[s].value;
            for _ in 0..60 {
                let xp = body.boundary_point(&th)?;
                let xm = body.boundary_point(&(-&th))?;
                let g = &xp - &xm;
                let n = g.norm();
                if n < 1e-14 {
                    break;
                }
                let th_new = g / n;
                let w = width(body, &th_new)?;
                if w.value > overall {
                    overall = w.value;
                    overall_est = w.clone();
                }
                if (th_new.clone() - &th).norm() < 1e-12 || (w.value - last).abs() < 1e-13 * (1.0 + w.value)
                {
                    converged = true;
                    th = th_new;
                    break;
                }
                last = w.value;
                th = th_new;
            }
            let _ = th;
        }
    }
    overall_est.value = overall;
    Ok(DiameterReport {
        value: overall_est,
        net_size: net.dirs.len(),
        ascent_gain: overall - net_best,
        converged,
    })
}

/// W_q(K) = (∫ h^q dσ)^{1/q}; `q = None` gives the mean width W(K).
pub fn mean_width(body: &Body, q: Option<f64>, cfg: NetCfg) -> Result<Estimate> {
    let net = DirectionNet::new(body.dim, cfg.count, cfg.seed);
    let mut hs = Vec::with_capacity(net.dirs.len());
    let mut max_stderr: f64 = 0.0;
    for th in &net.dirs {
        let h = body.support(th)?;
        max_stderr = max_stderr.max(h.stderr);
        hs.push(h.value);
    }
    let qq = q.unwrap_or(1.0);
    let means = batched_mean(hs.len(), 16, |i| hs[i].max(0.0).powf(qq));
    let mut est = Estimate::from_batch_means(&means, hs.len() as u64, cfg.seed);
    if qq != 1.0 {
        est = est.map(|m| m.powf(1.0 / qq), |m| m.powf(1.0 / qq - 1.0) / qq);
    }
    // oracle noise adds to the direction-sampling noise
    est.stderr = (est.stderr * est.stderr + max_stderr * max_stderr).sqrt();
    Ok(est)
}

/// V.Rad.(K) = (E_σ[r(θ)^n])^{1/n} for radial-oracle bodies, with the
/// stderr propagated through the 1/n power.
pub fn vrad_radial(body: &Body, cfg: NetCfg) -> Result<Estimate> {
    let net = DirectionNet::new(body.dim, cfg.count, cfg.seed);
    let n = body.dim as f64;
    let mut rs = Vec::with_capacity(net.dirs.len());
    for th in &net.dirs {
        rs.push(body.radial(th)?.value);
    }
    let means = batched_mean(rs.len(), 16, |i| rs[i].max(0.0).powf(n));
    let est = Estimate::from_batch_means(&means, rs.len() as u64, cfg.seed);
    Ok(est.map(|m| m.powf(1.0 / n), |m| m.powf(1.0 / n - 1.0) / n))
}

/// Exact V.Rad. of the convex hull of a point cloud (dim ≤ 8).
pub fn vrad_hull(points: &[DVector<f64>]) -> Result<f64> {
    hull::hull_vrad(points)
}

/// Dual-route volume-radius estimate for support-oracle bodies.
///
/// `santalo` comes from the exact polar-radial Monte Carlo estimate of
/// V.Rad.(K°) inverted through the Blaschke–Santaló equality case (exact
/// for ellipsoids, an upper-biased estimate in general, within the
/// Bourgain–Milman factor always). `inner_hull` is the exact volume
/// radius of the hull of boundary points: a certified lower bound.
#[derive(Clone, Debug)]
pub struct VradReport {
    pub santalo: Estimate,
    pub inner_hull: Option<f64>,
}

impl VradReport {
    pub fn value(&self) -> f64 {
        self.santalo.value
    }
}

pub const VRAD_HULL_DIM_CAP: usize = 6;

pub fn vrad_support(body: &Body, cfg: NetCfg) -> Result<VradReport> {
    let n = body.dim as f64;
    let net = DirectionNet::new(body.dim, cfg.count, cfg.seed);
    let mut inv = Vec::with_capacity(net.dirs.len());
    for th in &net.dirs {
        let h = body.support(th)?;
        inv.push(1.0 / h.value.max(1e-300));
    }
    let means = batched_mean(inv.len(), 16, |i| inv[i].powf(n));
    let polar = Estimate::from_batch_means(&means, inv.len() as u64, cfg.seed)
        .map(|m| m.powf(1.0 / n), |m| m.powf(1.0 / n - 1.0) / n);
    let santalo = polar.map(|v| 1.0 / v, |v| 1.0 / (v * v));

    let inner_hull = if body.dim <= VRAD_HULL_DIM_CAP && body.has_boundary() {
        let mut pts = Vec::with_capacity(net.dirs.len());
        for th in &net.dirs {
            if let Ok(p) = body.boundary_point(th) {
                pts.push(p);
            }
        }
        hull::hull_vrad(&pts).ok()
    } else {
        None
    };

    Ok(VradReport { santalo, inner_hull })
}
