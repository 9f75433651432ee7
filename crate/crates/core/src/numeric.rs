//! Scalar special functions, Gauss–Legendre rules and compensated sums.

use std::f64::consts::PI;

/// Below this angle the trigonometric ratios switch to their Maclaurin series.
/// The first omitted term is O(θ⁶) ≈ 1e-24, far below f64 resolution.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// `sin θ / θ`, equal to 1 at θ = 0.
pub fn sinc(theta: f64) -> f64 {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

/// `θ / tan θ`, equal to 1 at θ = 0.
pub fn theta_over_tan(theta: f64) -> f64 {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 - t2 / 3.0 - t2 * t2 / 45.0
    } else {
        theta / theta.tan()
    }
}

/// `log(θ / sin θ)`, equal to 0 at θ = 0.
pub fn log_theta_over_sin(theta: f64) -> f64 {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        t2 / 6.0 + t2 * t2 / 180.0
    } else {
        (theta / theta.sin()).ln()
    }
}

/// `x − log(1 + x)` for x > −1, computed without cancellation near 0.
pub fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // alternating tail; 12 terms leave an error below 1e-26
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..14 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / k as f64;
            term *= x;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

/// Riemann zeta function for real `s > 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta is only implemented for s > 1");
    const N: usize = 12;
    // B_{2j} / (2j)!
    const BERNOULLI_OVER_FACT: [f64; 6] = [
        1.0 / 6.0 / 2.0,
        -1.0 / 30.0 / 24.0,
        1.0 / 42.0 / 720.0,
        -1.0 / 30.0 / 40320.0,
        5.0 / 66.0 / 3628800.0,
        -691.0 / 2730.0 / 479001600.0,
    ];
    let mut sum = NeumaierSum::default();
    for k in (1..N).rev() {
        sum.add((k as f64).powf(-s));
    }
    let n = N as f64;
    sum.add(n.powf(1.0 - s) / (s - 1.0));
    sum.add(0.5 * n.powf(-s));
    // rising factorial s (s+1) ... (s+2j-2)
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (j, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        if j > 0 {
            let a = s + (2 * j - 1) as f64;
            rising *= a * (a + 1.0);
            power /= n * n;
        }
        sum.add(c * rising * power);
    }
    sum.value()
}

/// Gauss–Legendre nodes and weights on [−1, 1], nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [0, 1]; weights sum to 1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|w| 0.5 * w).collect(),
    )
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let d = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Ordered compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Ordered compensated dot product.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 12 monomial: ∫ x^12 = 2/13
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((v - 2.0 / 13.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn large_gauss_legendre_rule_is_accurate() {
        let (x, w) = gauss_legendre(512);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((v - 2.0 * 3f64.sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn zeta_matches_closed_forms() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(6.0) - PI.powi(6) / 945.0).abs() < 1e-14);
        assert!((zeta(40.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn series_branches_are_continuous() {
        for f in [sinc, theta_over_tan, log_theta_over_sin] {
            let below = f(SERIES_THRESHOLD * (1.0 - 1e-9));
            let above = f(SERIES_THRESHOLD * (1.0 + 1e-9));
            assert!((below - above).abs() < 1e-15);
        }
        assert_eq!(sinc(0.0), 1.0);
        assert_eq!(log_theta_over_sin(0.0), 0.0);
    }

    #[test]
    fn x_minus_log1p_is_nonnegative_and_continuous() {
        for &x in &[-0.5, -1e-3, -1e-9, 0.0, 1e-12, 1e-3, 0.00999, 0.01001, 3.0] {
            assert!(x_minus_log1p(x) >= 0.0);
        }
        let x = 0.01 - 1e-12;
        let direct = x - f64::ln_1p(x);
        assert!((x_minus_log1p(x) - direct).abs() < 1e-12 * direct);
        assert!((x_minus_log1p(1e-6) - 0.5e-12).abs() < 1e-18);
    }
}
