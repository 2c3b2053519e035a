//! Closed-form special functions shared across modules: the cumulant
//! function of a centered uniform, absolute Gaussian moments, ball
//! geometry and marginal densities.

use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

/// log(sinh(u)/u), the log-Laplace transform of U[-1,1] at u. Even in u,
/// stable for all magnitudes (series near zero, log form for large |u|).
pub fn log_sinhc(u: f64) -> f64 {
    let a = u.abs();
    if a < 0.25 {
        let s = u * u;
        // log(sinh u / u) = u²/6 − u⁴/180 + u⁶/2835 − u⁸/37800 + u¹⁰/467775 − ...
        s * (1.0 / 6.0
            + s * (-1.0 / 180.0 + s * (1.0 / 2835.0 + s * (-1.0 / 37800.0 + s / 467775.0))))
    } else {
        a + (-(-2.0 * a).exp_m1()).ln() - (2.0 * a).ln()
    }
}

/// d/du log(sinh(u)/u) = coth(u) − 1/u. Odd in u.
pub fn log_sinhc_d1(u: f64) -> f64 {
    let a = u.abs();
    let v = if a < 0.25 {
        let s = a * a;
        a * (1.0 / 3.0 + s * (-1.0 / 45.0 + s * (2.0 / 945.0 + s * (-1.0 / 4725.0 + s * 2.0 / 93555.0))))
    } else if a > 20.0 {
        1.0 - 1.0 / a
    } else {
        // coth a = 1 + 2/(e^{2a} − 1)
        1.0 + 2.0 / (2.0 * a).exp_m1() - 1.0 / a
    };
    if u < 0.0 {
        -v
    } else {
        v
    }
}

/// d²/du² log(sinh(u)/u) = 1/u² − 1/sinh(u)². Even in u; this is the
/// variance of the exponentially tilted U[-1,1] at tilt u.
pub fn log_sinhc_d2(u: f64) -> f64 {
    let a = u.abs();
    if a < 0.25 {
        let s = a * a;
        1.0 / 3.0 + s * (-1.0 / 15.0 + s * (2.0 / 189.0 + s * (-1.0 / 675.0 + s * 2.0 / 10395.0)))
    } else if a > 350.0 {
        1.0 / (a * a)
    } else {
        1.0 / (a * a) - 1.0 / a.sinh().powi(2)
    }
}

/// E|g|^p for g standard normal: 2^{p/2} Γ((p+1)/2) / √π.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    assert!(p > -1.0);
    (0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0)) - ln_gamma(0.5)).exp()
}

/// γ_p = (E|g|^p)^{1/p}, the support of Z_p of the standard Gaussian.
pub fn gaussian_gamma(p: f64) -> f64 {
    assert!(p >= 1.0);
    ((0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0)) - ln_gamma(0.5)) / p).exp()
}

/// E |X|_2^q for X standard normal in R^n (chi distribution moment).
pub fn gaussian_norm_moment(n: usize, q: f64) -> f64 {
    (0.5 * q * std::f64::consts::LN_2 + ln_gamma(0.5 * (n as f64 + q)) - ln_gamma(0.5 * n as f64))
        .exp()
}

/// log Vol_n(B_n) = (n/2) log π − log Γ(n/2 + 1).
pub fn ln_unit_ball_volume(n: usize) -> f64 {
    0.5 * n as f64 * std::f64::consts::PI.ln() - ln_gamma(0.5 * n as f64 + 1.0)
}

pub fn unit_ball_volume(n: usize) -> f64 {
    ln_unit_ball_volume(n).exp()
}

/// Density at t of ⟨θ, X⟩ for X uniform on R·B_m and any unit θ:
/// c_m/R · (1 − (t/R)²)^{(m−1)/2} on [−R, R].
pub fn ball_marginal_density(m: usize, radius: f64, t: f64) -> f64 {
    let u = t / radius;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let ln_c = ln_gamma(0.5 * m as f64 + 1.0)
        - ln_gamma(0.5 * (m as f64 + 1.0))
        - 0.5 * std::f64::consts::PI.ln();
    (ln_c + 0.5 * (m as f64 - 1.0) * (1.0 - u * u).ln()).exp() / radius
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_with_breaks};

    #[test]
    fn log_sinhc_matches_quadrature_oracle() {
        // oracle: log( ∫_{-1}^{1} e^{ux} dx / 2 ) by quadrature
        for &u in &[1e-3, 0.1, 0.24, 0.26, 1.0, 3.0, 10.0, 50.0] {
            let oracle = if u < 30.0 {
                (integrate(|x: f64| (u * x).exp(), -1.0, 1.0, 1e-14) / 2.0).ln()
            } else {
                // shift by the max to avoid overflow in the oracle
                u + (integrate(|x: f64| (u * (x - 1.0)).exp(), -1.0, 1.0, 1e-14) / 2.0).ln()
            };
            assert!(
                (log_sinhc(u) - oracle).abs() < 1e-11,
                "u={u}: {} vs {}",
                log_sinhc(u),
                oracle
            );
            assert_eq!(log_sinhc(u), log_sinhc(-u));
        }
        assert_eq!(log_sinhc(0.0), 0.0);
    }

    #[test]
    fn log_sinhc_derivatives_match_finite_differences() {
        for &u in &[0.05, 0.2, 0.3, 1.0, 5.0, 25.0] {
            let h = 1e-5;
            let d1 = (log_sinhc(u + h) - log_sinhc(u - h)) / (2.0 * h);
            assert!((log_sinhc_d1(u) - d1).abs() < 1e-8, "d1 at {u}");
            let d2 = (log_sinhc_d1(u + h) - log_sinhc_d1(u - h)) / (2.0 * h);
            assert!((log_sinhc_d2(u) - d2).abs() < 1e-8, "d2 at {u}");
        }
        // value fixed by the tilted-variance oracle: 1/u² − csch²(u) at u = 1
        assert!((log_sinhc_d2(1.0) - 0.2759383390336895).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        assert!((gaussian_abs_moment(2.0) - 1.0).abs() < 1e-14);
        assert!((gaussian_abs_moment(4.0) - 3.0).abs() < 1e-13);
        // E|g| = sqrt(2/π)
        assert!((gaussian_abs_moment(1.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((gaussian_gamma(2.0) - 1.0).abs() < 1e-14);
        // quadrature oracle for a fractional power
        let p = 3.7;
        let c = (2.0 * std::f64::consts::PI).sqrt().recip();
        let oracle =
            integrate_with_breaks(|x: f64| c * x.abs().powf(p) * (-0.5 * x * x).exp(), -42.0, 42.0, &[0.0], 1e-14);
        assert!((gaussian_abs_moment(p) - oracle).abs() < 1e-12);
    }

    #[test]
    fn gaussian_norm_moments() {
        // E|X|² = n ; E|X|⁴ = n² + 2n (chi-square)
        assert!((gaussian_norm_moment(3, 2.0) - 3.0).abs() < 1e-12);
        assert!((gaussian_norm_moment(2, 4.0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ball_volume_and_marginal() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
        for m in 1..=6 {
            let mass = integrate(|t| ball_marginal_density(m, 2.0, t), -2.0, 2.0, 1e-12);
            assert!((mass - 1.0).abs() < 1e-9, "m={m} mass={mass}");
        }
        // variance of the unit-ball marginal is 1/(m+2)
        let m = 4;
        let var = integrate(|t| t * t * ball_marginal_density(m, 1.0, t), -1.0, 1.0, 1e-13);
        assert!((var - 1.0 / (m as f64 + 2.0)).abs() < 1e-10);
    }

    #[test]
    fn normal_cdf_basics() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-9);
    }
}
