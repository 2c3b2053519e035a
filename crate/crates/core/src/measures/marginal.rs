//! Exact one-dimensional marginal laws.
//!
//! A `Marginal1D` is the law of ⟨v, X⟩ for some direction v, when that law
//! has a usable analytic form. Moments, tails and the log moment
//! generating function are evaluated in closed form where available and
//! by adaptive quadrature otherwise; either way the result is exact to
//! quadrature tolerance, which is what the spec calls "analytic" mode.

use std::sync::Arc;

use crate::quad::integrate_with_breaks;
#[cfg(test)]
use crate::quad::integrate;
use crate::special::{gaussian_abs_moment, log_sinhc, normal_cdf};

pub const QUAD_TOL: f64 = 1e-12;

/// Range (in standard deviations) beyond which Gaussian mass is ignored.
const GAUSS_CUT: f64 = 42.0;

#[derive(Clone)]
pub struct DensityFn {
    pub support: (f64, f64),
    pub breaks: Vec<f64>,
    /// Normalized log-density on the support.
    pub ln_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DensityFn(support={:?})", self.support)
    }
}

#[derive(Clone, Debug)]
pub enum Law {
    /// Point mass at 0.
    PointMass,
    Gaussian { sigma: f64 },
    /// Centered uniform on [-half, half].
    Uniform { half: f64 },
    Density(DensityFn),
    Discrete { values: Vec<f64>, weights: Vec<f64> },
    /// Sum of two independent laws (each continuous).
    Conv2(Box<Law>, Box<Law>),
}

/// Law of shift + S where S follows `law`.
#[derive(Clone, Debug)]
pub struct Marginal1D {
    pub shift: f64,
    pub law: Law,
}

impl Marginal1D {
    pub fn point_mass() -> Self {
        Marginal1D { shift: 0.0, law: Law::PointMass }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Marginal1D { shift: 0.0, law: Law::Gaussian { sigma } }
    }

    pub fn uniform(half: f64) -> Self {
        Marginal1D { shift: 0.0, law: Law::Uniform { half } }
    }

    pub fn density(d: DensityFn) -> Self {
        Marginal1D { shift: 0.0, law: Law::Density(d) }
    }

    pub fn shifted(mut self, c: f64) -> Self {
        self.shift += c;
        self
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.law.mean()
    }

    pub fn variance(&self) -> f64 {
        self.law.variance()
    }

    /// E |T|^p.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.law.abs_moment_shifted(self.shift, p)
    }

    /// P(T ≥ t).
    pub fn tail(&self, t: f64) -> f64 {
        self.law.tail(t - self.shift)
    }

    /// log E e^{sT}.
    pub fn mgf_log(&self, s: f64) -> f64 {
        s * self.shift + self.law.mgf_log(s)
    }
}

/// Quadrature window and kinks for a continuous law.
fn quad_range(law: &Law) -> Option<(f64, f64, Vec<f64>)> {
    match law {
        Law::Gaussian { sigma } => Some((-GAUSS_CUT * sigma, GAUSS_CUT * sigma, vec![])),
        Law::Uniform { half } => Some((-half, *half, vec![])),
        Law::Density(d) => Some((d.support.0, d.support.1, d.breaks.clone())),
        Law::Conv2(a, b) => {
            let (a0, a1, _) = quad_range(a)?;
            let (b0, b1, _) = quad_range(b)?;
            Some((a0 + b0, a1 + b1, vec![]))
        }
        _ => None,
    }
}

fn density_at(law: &Law, t: f64) -> f64 {
    match law {
        Law::Gaussian { sigma } => {
            let z = t / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
        Law::Uniform { half } => {
            if t.abs() <= *half {
                0.5 / half
            } else {
                0.0
            }
        }
        Law::Density(d) => {
            if t < d.support.0 || t > d.support.1 {
                0.0
            } else {
                (d.ln_density)(t).exp()
            }
        }
        _ => unreachable!("density_at on non-density law"),
    }
}

/// E_g[f] for a continuous single law (not Conv2).
fn expect<F: FnMut(f64) -> f64>(law: &Law, mut f: F, extra_breaks: &[f64]) -> f64 {
    let (lo, hi, mut breaks) = quad_range(law).expect("continuous law");
    breaks.extend_from_slice(extra_breaks);
    integrate_with_breaks(|t| density_at(law, t) * f(t), lo, hi, &breaks, QUAD_TOL)
}

impl Law {
    pub fn mean(&self) -> f64 {
        match self {
            Law::PointMass | Law::Gaussian { .. } | Law::Uniform { .. } => 0.0,
            Law::Density(_) => expect(self, |t| t, &[]),
            Law::Discrete { values, weights } => {
                values.iter().zip(weights).map(|(v, w)| v * w).sum()
            }
            Law::Conv2(a, b) => a.mean() + b.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Law::PointMass => 0.0,
            Law::Gaussian { sigma } => sigma * sigma,
            Law::Uniform { half } => half * half / 3.0,
            Law::Density(_) => {
                let m = self.mean();
                expect(self, |t| (t - m) * (t - m), &[])
            }
            Law::Discrete { values, weights } => {
                let m = self.mean();
                values.iter().zip(weights).map(|(v, w)| w * (v - m) * (v - m)).sum()
            }
            Law::Conv2(a, b) => a.variance() + b.variance(),
        }
    }

    /// E |shift + S|^p.
    pub fn abs_moment_shifted(&self, shift: f64, p: f64) -> f64 {
        match self {
            Law::PointMass => shift.abs().powf(p),
            Law::Gaussian { sigma } if shift == 0.0 => {
                sigma.powf(p) * gaussian_abs_moment(p)
            }
            Law::Uniform { half } if shift == 0.0 => half.powf(p) / (p + 1.0),
            Law::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .map(|(v, w)| w * (shift + v).abs().powf(p))
                .sum(),
            Law::Conv2(a, b) => {
                // E over A of (E over B of |shift + a + b|^p)
                let inner_law = b.as_ref();
                expect(a, |t| inner_law.abs_moment_shifted(shift + t, p), &[])
            }
            _ => expect(self, |t| (shift + t).abs().powf(p), &[-shift]),
        }
    }

    /// P(S ≥ t).
    pub fn tail(&self, t: f64) -> f64 {
        match self {
            Law::PointMass => {
                if t <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Gaussian { sigma } => normal_cdf(-t / sigma),
            Law::Uniform { half } => {
                if t <= -half {
                    1.0
                } else if t >= *half {
                    0.0
                } else {
                    (half - t) / (2.0 * half)
                }
            }
            Law::Density(d) => {
                if t <= d.support.0 {
                    1.0
                } else if t >= d.support.1 {
                    0.0
                } else {
                    integrate_with_breaks(
                        |x| density_at(self, x),
                        t,
                        d.support.1,
                        &d.breaks,
                        QUAD_TOL,
                    )
                }
            }
            Law::Discrete { values, weights } => values
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v >= t)
                .map(|(_, w)| w)
                .sum(),
            Law::Conv2(a, b) => {
                let inner = b.as_ref();
                expect(a, |x| inner.tail(t - x), &[])
            }
        }
    }

    /// log E e^{sS}, stable for large |s| on compact supports.
    pub fn mgf_log(&self, s: f64) -> f64 {
        match self {
            Law::PointMass => 0.0,
            Law::Gaussian { sigma } => 0.5 * (sigma * s) * (sigma * s),
            Law::Uniform { half } => log_sinhc(s * half),
            Law::Density(d) => {
                if s == 0.0 {
                    return 0.0;
                }
                // factor out the max of s·t on the support
                let m = if s > 0.0 { d.support.1 } else { d.support.0 };
                let val = integrate_with_breaks(
                    |t| density_at(self, t) * (s * (t - m)).exp(),
                    d.support.0,
                    d.support.1,
                    &d.breaks,
                    QUAD_TOL,
                );
                s * m + val.max(1e-300).ln()
            }
            Law::Discrete { values, weights } => {
                let m = values
                    .iter()
                    .map(|v| s * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = values
                    .iter()
                    .zip(weights)
                    .map(|(v, w)| w * (s * v - m).exp())
                    .sum();
                m + sum.ln()
            }
            Law::Conv2(a, b) => a.mgf_log(s) + b.mgf_log(s),
        }
    }
}

/// Density of Σ c_i U_i with U_i i.i.d. uniform on [-1, 1] and all
/// c_i > 0: the box-spline formula, exact for m ≤ 8.
///
/// Coefficients below ~4e-9 of the largest are dropped: their moment
/// contribution is smaller than the alternating-sum conditioning error
/// they would otherwise induce.
pub fn uniform_sum(coeffs: &[f64]) -> Marginal1D {
    let mx = coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let c: Vec<f64> =
        coeffs.iter().map(|x| x.abs()).filter(|x| *x > 4e-9 * mx).collect();
    let m = c.len();
    assert!(m >= 1 && m <= 12, "uniform_sum arity {m}");
    if m == 1 {
        return Marginal1D::uniform(c[0]);
    }
    let total: f64 = c.iter().sum();
    // subset sums; knots of the spline are at 2·c_A − total
    let mut subset_sums = vec![0.0f64; 1 << m];
    for a in 1usize..(1 << m) {
        let i = a.trailing_zeros() as usize;
        subset_sums[a] = subset_sums[a & (a - 1)] + c[i];
    }
    // the spline is C^{m-2}; knots only matter for the kinky low arities
    let mut breaks: Vec<f64> = if m <= 3 {
        subset_sums.iter().map(|s| 2.0 * s - total).collect()
    } else {
        vec![0.0]
    };
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let parity: Vec<f64> = (0..(1usize << m))
        .map(|a| if (a.count_ones() & 1) == 1 { -1.0 } else { 1.0 })
        .collect();
    let ln_prod_c: f64 = c.iter().map(|x| x.ln()).sum();
    let ln_fact: f64 = (1..m).map(|k| (k as f64).ln()).sum();
    // f_{S'}(x) = Σ_A (−1)^{|A|}(x−c_A)_+^{m−1} / ((m−1)! Πc_i) for
    // S' = Σ c_i V_i, V_i ~ U[0,1]; the U = 2V−1 rescale contributes the
    // single 1/2 applied in the closure via f_S(t) = f_{S'}((t+C)/2)/2
    let ln_norm = -ln_fact - ln_prod_c;
    let norm = ln_norm.exp();
    let power = (m - 1) as i32;
    let sums = subset_sums.clone();

    let ln_density = move |t: f64| -> f64 {
        let x = 0.5 * (t + total);
        let mut acc = 0.0;
        for (a, ca) in sums.iter().enumerate() {
            let d = x - ca;
            if d > 0.0 {
                acc += parity[a] * d.powi(power);
            }
        }
        let v = acc * norm * 0.5;
        if v <= 0.0 {
            f64::NEG_INFINITY
        } else {
            v.ln()
        }
    };

    Marginal1D::density(DensityFn {
        support: (-total, total),
        breaks,
        ln_density: Arc::new(ln_density),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_closed_forms() {
        let m = Marginal1D::uniform(1.0);
        assert!((m.abs_moment(1.0) - 0.5).abs() < 1e-14);
        assert!((m.abs_moment(2.0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((m.tail(0.5) - 0.25).abs() < 1e-14);
        assert!((m.mgf_log(1.0) - (1f64.sinh()).ln()).abs() < 1e-13);
    }

    #[test]
    fn gaussian_closed_forms() {
        let m = Marginal1D::gaussian(2.0);
        assert!((m.abs_moment(2.0) - 4.0).abs() < 1e-13);
        assert!((m.tail(0.0) - 0.5).abs() < 1e-13);
        assert!((m.mgf_log(0.5) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn uniform_sum_matches_direct_convolution() {
        // two uniforms with coefficients 1 and 0.5: triangle-ish density
        let m = uniform_sum(&[1.0, 0.5]);
        // total mass
        if let Law::Density(d) = &m.law {
            let mass = integrate_with_breaks(
                |t| (d.ln_density)(t).exp(),
                d.support.0,
                d.support.1,
                &d.breaks,
                1e-13,
            );
            assert!((mass - 1.0).abs() < 1e-11, "mass {mass}");
        } else {
            panic!("expected density law");
        }
        // variance = (1 + 0.25)/3
        assert!((m.variance() - 1.25 / 3.0).abs() < 1e-10);
        // second moment oracle by 2-D brute-force quadrature
        let oracle = integrate(
            |u: f64| {
                0.25 * integrate(|v: f64| (u + 0.5 * v).abs().powf(3.0), -1.0, 1.0, 1e-12)
            },
            -1.0,
            1.0,
            1e-11,
        );
        assert!((m.abs_moment(3.0) - oracle).abs() < 1e-9);
    }

    #[test]
    fn uniform_sum_high_arity_mass() {
        let m = uniform_sum(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]);
        if let Law::Density(d) = &m.law {
            let mass = integrate_with_breaks(
                |t| (d.ln_density)(t).exp(),
                d.support.0,
                d.support.1,
                &d.breaks,
                1e-13,
            );
            assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
        }
        let var_expected: f64 = [1.0f64, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]
            .iter()
            .map(|c| c * c / 3.0)
            .sum();
        assert!((m.variance() - var_expected).abs() < 1e-9);
    }

    #[test]
    fn conv2_moments_and_tail() {
        // uniform + gaussian
        let law = Law::Conv2(
            Box::new(Law::Uniform { half: 1.0 }),
            Box::new(Law::Gaussian { sigma: 0.5 }),
        );
        let m = Marginal1D { shift: 0.0, law };
        assert!((m.variance() - (1.0 / 3.0 + 0.25)).abs() < 1e-10);
        assert!((m.tail(0.0) - 0.5).abs() < 1e-10);
        // MGF is the sum of the parts
        assert!((m.mgf_log(1.3) - (log_sinhc(1.3) + 0.5 * (0.65f64).powi(2))).abs() < 1e-10);
    }

    #[test]
    fn shifted_marginal() {
        let m = Marginal1D::uniform(1.0).shifted(2.0);
        assert!((m.mean() - 2.0).abs() < 1e-14);
        // E|2+U| = 2 since 2+U > 0 always
        assert!((m.abs_moment(1.0) - 2.0).abs() < 1e-11);
        assert!((m.tail(2.0) - 0.5).abs() < 1e-12);
    }
}
