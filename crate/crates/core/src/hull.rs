//! Exact convex-hull volume, triangulation and facet structure in low
//! dimension, backed by qhull. Dimension is capped at 8: exact
//! decomposition cost grows super-exponentially beyond desk scale.

use nalgebra::DVector;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::special::unit_ball_volume;

pub const HULL_DIM_CAP: usize = 8;

/// Computed hull of a full-dimensional point set.
#[derive(Debug, Clone)]
pub struct Hull {
    pub dim: usize,
    pub volume: f64,
    /// Simplicial facets as indices into the input points.
    pub facets: Vec<Vec<usize>>,
    /// Outward facet halfspaces (a, b): hull = { x : ⟨a, x⟩ ≤ b }.
    pub planes: Vec<(DVector<f64>, f64)>,
    /// A point strictly inside (mean of the input points).
    pub interior: DVector<f64>,
}

// qhull is called behind a process-global lock: the underlying build path
// writes a stray line to stdout, which we silence by a scoped fd redirect,
// and that redirect must not race with other threads.
static QHULL_LOCK: Mutex<()> = Mutex::new(());

struct StdoutGag {
    saved: i32,
}

impl StdoutGag {
    fn new() -> Option<StdoutGag> {
        unsafe {
            let saved = libc::dup(1);
            if saved < 0 {
                return None;
            }
            let devnull = libc::open(b"/dev/null\0".as_ptr() as *const libc::c_char, libc::O_WRONLY);
            if devnull < 0 {
                libc::close(saved);
                return None;
            }
            libc::dup2(devnull, 1);
            libc::close(devnull);
            Some(StdoutGag { saved })
        }
    }
}

impl Drop for StdoutGag {
    fn drop(&mut self) {
        unsafe {
            libc::dup2(self.saved, 1);
            libc::close(self.saved);
        }
    }
}

/// Convex hull of `points` (each of the same dimension ≤ 8). Requires a
/// full-dimensional set; returns `DegenerateHull` otherwise.
pub fn convex_hull(points: &[DVector<f64>]) -> Result<Hull> {
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    if dim == 0 || points.len() < dim + 1 {
        return Err(Error::DegenerateHull);
    }
    if dim > HULL_DIM_CAP {
        return Err(Error::DimTooLarge(dim, HULL_DIM_CAP));
    }

    let n = points.len() as f64;
    let mut interior = DVector::zeros(dim);
    for p in points {
        interior += p / n;
    }

    let _lock = QHULL_LOCK.lock().unwrap();
    let qh = {
        use std::io::Write;
        std::io::stdout().flush().ok();
        let _gag = StdoutGag::new();
        qhull::Qh::builder()
            .compute(true)
            .triangulate(true)
            .build_from_iter(points.iter().map(|p| p.iter().copied().collect::<Vec<f64>>()))
            .map_err(|_| Error::DegenerateHull)?
    };

    let mut facets = Vec::new();
    let mut planes = Vec::new();
    let mut volume = 0.0;
    let ln_fact: f64 = (1..=dim).map(|k| (k as f64).ln()).sum();
    let fact = ln_fact.exp().round();

    for f in qh.facets() {
        if f.upper_delaunay() {
            continue;
        }
        let verts = match f.vertices() {
            Some(v) => v,
            None => continue,
        };
        let ids: Vec<usize> = verts
            .iter()
            .filter_map(|v| v.index(&qh))
            .collect();
        if ids.len() != dim {
            continue;
        }
        let mat = nalgebra::DMatrix::from_fn(dim, dim, |r, c| points[ids[c]][r] - interior[r]);
        volume += mat.determinant().abs() / fact;
        if let Some(nrm) = f.normal() {
            let a = DVector::from_iterator(dim, nrm.iter().copied());
            // qhull convention: ⟨normal, x⟩ + offset ≤ 0 inside
            planes.push((a, -f.offset()));
        }
        facets.push(ids);
    }

    if volume <= 0.0 || !volume.is_finite() {
        return Err(Error::DegenerateHull);
    }

    Ok(Hull { dim, volume, facets, planes, interior })
}

impl Hull {
    /// Volume radius: radius of the Euclidean ball of equal volume.
    pub fn vrad(&self) -> f64 {
        (self.volume / unit_ball_volume(self.dim)).powf(1.0 / self.dim as f64)
    }

    /// Radial function about the origin (requires 0 strictly inside):
    /// r(θ) = min over facets of b / ⟨a, θ⟩ over facets with ⟨a, θ⟩ > 0.
    pub fn radial_at_origin(&self, theta: &DVector<f64>) -> Result<f64> {
        let mut r = f64::INFINITY;
        for (a, b) in &self.planes {
            if *b <= 0.0 {
                return Err(Error::OriginNotInterior);
            }
            let d = a.dot(theta);
            if d > 0.0 {
                r = r.min(b / d);
            }
        }
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::DegenerateHull)
        }
    }

    /// Triangulation into full-dimensional simplices (apex = interior
    /// point, base = facet); returns (facet index, volume) pairs whose
    /// volumes sum to the hull volume.
    pub fn fan_volumes(&self, points: &[DVector<f64>]) -> Vec<f64> {
        let dim = self.dim;
        let fact: f64 = (1..=dim).map(|k| k as f64).product();
        self.facets
            .iter()
            .map(|ids| {
                let mat =
                    nalgebra::DMatrix::from_fn(dim, dim, |r, c| points[ids[c]][r] - self.interior[r]);
                mat.determinant().abs() / fact
            })
            .collect()
    }
}

/// Exact volume of conv(points).
pub fn hull_volume(points: &[DVector<f64>]) -> Result<f64> {
    convex_hull(points).map(|h| h.volume)
}

/// V.Rad.(conv(points)).
pub fn hull_vrad(points: &[DVector<f64>]) -> Result<f64> {
    convex_hull(points).map(|h| h.vrad())
}
