//! Probability that a bivariate Gaussian lies inside a circular field of
//! view, and the resulting detection probability.
//!
//! For a fixed abscissa `x` the ordinate is conditionally Gaussian, so the
//! inner integral across the chord is a difference of normal CDFs. The
//! outer integral runs over the disk's horizontal extent, parameterized as
//! `x = cx + r sin(theta)` so the chord length `2 r cos(theta)` is smooth at
//! the tangent points, and is evaluated with adaptive Gauss-Legendre
//! quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::gaussian::{FovDisk, GaussianComponent};

/// Absolute tolerance of the outer quadrature. Well below the 1e-6
/// accuracy the callers need, so nested radii stay monotone.
const QUAD_TOL: f64 = 1e-11;
const MAX_DEPTH: u32 = 48;
/// Beyond this many standard deviations the chi-squared tail is < 1e-21.
const TAIL_SIGMAS: f64 = 10.0;
const GL_ORDER: usize = 16;

/// `p(F)`: mass of the component's position marginal inside the disk.
pub fn prob_in_fov(c: &GaussianComponent, fov: &FovDisk) -> Result<f64> {
    if c.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            got: c.dim(),
        });
    }
    let m = c.mean();
    let p = c.cov();
    Ok(disk_probability(
        [m[0], m[1]],
        [p[(0, 0)], p[(0, 1)], p[(1, 1)]],
        fov,
    ))
}

/// `p_D = p(D|F) p(F)`.
pub fn prob_detection(c: &GaussianComponent, fov: &FovDisk, p_detect_given_in: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_detect_given_in) {
        return Err(Error::InvalidArgument(format!(
            "p_detect_given_in must lie in [0, 1], got {p_detect_given_in}"
        )));
    }
    if p_detect_given_in == 0.0 {
        // Geometry still has to be valid.
        prob_in_fov(c, fov)?;
        return Ok(0.0);
    }
    Ok(p_detect_given_in * prob_in_fov(c, fov)?)
}

/// Core evaluation on raw moments: mean `(mx, my)`, covariance entries
/// `(sxx, sxy, syy)`.
pub(crate) fn disk_probability(mean: [f64; 2], cov: [f64; 3], fov: &FovDisk) -> f64 {
    let [mx, my] = mean;
    let [sxx, sxy, syy] = cov;
    let center = fov.center();
    let (cx, cy, r) = (center.x, center.y, fov.radius());

    let half_tr = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let lambda_max = half_tr + disc;
    let s_max = lambda_max.sqrt();
    let dist = ((mx - cx).powi(2) + (my - cy).powi(2)).sqrt();
    if dist - r > TAIL_SIGMAS * s_max {
        return 0.0;
    }
    if dist + TAIL_SIGMAS * s_max < r {
        return 1.0;
    }

    let sx = sxx.sqrt();
    let slope = sxy / sxx;
    let cond_sd = (syy - sxy * slope).max(0.0).sqrt();

    let integrand = |theta: f64| -> f64 {
        let (sin_t, cos_t) = theta.sin_cos();
        let x = cx + r * sin_t;
        let half = r * cos_t;
        let zx = (x - mx) / sx;
        let px = (-0.5 * zx * zx).exp() / (sx * (2.0 * PI).sqrt());
        if px == 0.0 {
            return 0.0;
        }
        let mu = my + slope * (x - mx);
        let inner = if cond_sd > 0.0 {
            normal_interval((cy - half - mu) / cond_sd, (cy + half - mu) / cond_sd)
        } else if (cy - half..=cy + half).contains(&mu) {
            1.0
        } else {
            0.0
        };
        px * inner * half
    };

    // Break the range where the x-marginal has its mass so narrow
    // components are never stepped over by the first panel.
    let mut breaks = vec![-FRAC_PI_2, FRAC_PI_2];
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        let u = (mx + k * sx - cx) / r;
        if u > -1.0 && u < 1.0 {
            breaks.push(u.asin());
        }
    }
    for i in 1..8 {
        breaks.push(-FRAC_PI_2 + PI * i as f64 / 8.0);
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let panels = (breaks.len() - 1) as f64;
    let total: f64 = breaks
        .windows(2)
        .map(|w| adaptive(&integrand, w[0], w[1], QUAD_TOL / panels))
        .sum();
    total.clamp(0.0, 1.0)
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated on whichever tail keeps the
/// subtraction well conditioned.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b < 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    }
}

/// `1 - Phi(z)`.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gauss_legendre(f, a, b);
    refine(f, a, b, whole, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let split = left + right;
    if (split - whole).abs() <= tol || depth >= MAX_DEPTH {
        return split;
    }
    refine(f, a, mid, left, 0.5 * tol, depth + 1) + refine(f, mid, b, right, 0.5 * tol, depth + 1)
}

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Nodes and weights on [-1, 1], from Newton iteration on the Legendre
/// polynomial.
fn gl_rule() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    });
    (n, w)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DVector, Vector2};

    fn disk(cx: f64, cy: f64, r: f64) -> FovDisk {
        FovDisk::new(Vector2::new(cx, cy), r).unwrap()
    }

    #[test]
    fn gl_rule_integrates_polynomials() {
        // Order-16 rule is exact through degree 31.
        let v = gauss_legendre(&|x: f64| x.powi(30), -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        let (_, w) = gl_rule();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn isotropic_centered_matches_rayleigh() {
        for (r, s) in [(25.0, 5.0), (25.0, 12.0), (3.0, 2.0), (1.0, 4.0)] {
            let c =
                GaussianComponent::new_2d(1.0, [0.0, 0.0], [[s * s, 0.0], [0.0, s * s]]).unwrap();
            let p = prob_in_fov(&c, &disk(0.0, 0.0, r)).unwrap();
            let exact = 1.0 - (-(r * r) / (2.0 * s * s)).exp();
            assert!((p - exact).abs() < 1e-9, "r={r} s={s}: {p} vs {exact}");
        }
    }

    #[test]
    fn far_component_is_negligible() {
        let c = GaussianComponent::new_2d(1.0, [250.0, 0.0], [[25.0, 10.0], [10.0, 25.0]]).unwrap();
        assert!(prob_in_fov(&c, &disk(0.0, 0.0, 25.0)).unwrap() < 1e-12);
        assert!(prob_detection(&c, &disk(0.0, 0.0, 25.0), 0.98).unwrap() < 1e-12);
    }

    #[test]
    fn detection_scales_by_sensor_reliability() {
        let c = GaussianComponent::new_2d(1.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = disk(0.0, 0.0, 25.0);
        assert!((prob_detection(&c, &f, 0.98).unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(prob_detection(&c, &f, 0.0).unwrap(), 0.0);
        assert!(prob_detection(&c, &f, 1.5).is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let c = GaussianComponent::new(1.0, DVector::zeros(3), nalgebra::DMatrix::identity(3, 3))
            .unwrap();
        assert!(matches!(
            prob_in_fov(&c, &disk(0.0, 0.0, 1.0)),
            Err(Error::UnsupportedDimension {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn narrow_component_near_edge() {
        // Mean exactly on the boundary: half the mass is inside, up to the
        // curvature of the circle over a 0.1 m spread.
        let c = GaussianComponent::new_2d(1.0, [25.0, 0.0], [[0.01, 0.0], [0.0, 0.01]]).unwrap();
        let p = prob_in_fov(&c, &disk(0.0, 0.0, 25.0)).unwrap();
        assert!((p - 0.5).abs() < 1e-3, "{p}");
    }

    #[test]
    fn degenerate_conditional_spread() {
        // Perfectly correlated up to rounding: still a valid number.
        let c = GaussianComponent::new_2d(1.0, [0.0, 0.0], [[4.0, 3.999_999], [3.999_999, 4.0]])
            .unwrap();
        let p = prob_in_fov(&c, &disk(0.0, 0.0, 2.0)).unwrap();
        // Mass along the diagonal line: P(|t| <= 2 / sqrt(8)) with t ~ N(0,1) scaled.
        let exact = 1.0 - 2.0 * upper_tail(2.0 / (8.0f64).sqrt());
        assert!((p - exact).abs() < 1e-3, "{p} vs {exact}");
    }
}
