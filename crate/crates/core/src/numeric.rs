//! Small numerical toolkit: quadrature, RK4, dense matrix exponentials and
//! brute-force series used as independent oracles.

use std::sync::OnceLock;

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::liegroup::{skew, Mat3, Vec3};

/// `Σ_{n=0}^{terms} (φ×)ⁿ / (n+m)!` by direct matrix powers.
pub fn gamma_series(m: usize, phi: &Vec3, terms: usize) -> Mat3 {
    let w = skew(phi);
    let mut fact: f64 = (1..=m).map(|i| i as f64).product();
    let mut power = Mat3::identity();
    let mut sum = power / fact;
    for n in 1..=terms {
        power *= w;
        fact *= (n + m) as f64;
        sum += power / fact;
    }
    sum
}

/// Dense matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm_series<const N: usize>(a: &SMatrix<f64, N, N>, terms: usize) -> SMatrix<f64, N, N> {
    let norm = a.norm();
    let mut squarings = 0;
    while norm / f64::from(1u32 << squarings.min(30)) > 0.5 && squarings < 30 {
        squarings += 1;
    }
    let scaled = a / f64::from(1u32 << squarings);
    let mut term = SMatrix::<f64, N, N>::identity();
    let mut sum = term;
    for k in 1..=terms {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// 5×5 shorthand for [`expm_series`].
pub fn expm_series5(a: &SMatrix<f64, 5, 5>, terms: usize) -> SMatrix<f64, 5, 5> {
    expm_series(a, terms)
}

/// Classical fourth-order Runge–Kutta with `steps` equal steps from `t0` to `t1`.
pub fn rk4<const R: usize, const C: usize, F>(f: F, t0: f64, y0: SMatrix<f64, R, C>, t1: f64, steps: usize) -> SMatrix<f64, R, C>
where
    F: Fn(f64, &SMatrix<f64, R, C>) -> SMatrix<f64, R, C>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let t = t0 + h * i as f64;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)));
        let k4 = f(t + h, &(y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<const R: usize, const C: usize, F>(f: F, a: f64, b: f64, n: usize) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += f(a + h * i as f64) * w;
    }
    sum * (h / 3.0)
}

const GL_ORDER: usize = 10;

/// Gauss–Legendre nodes and weights on [-1, 1], found by Newton iteration.
fn gauss_legendre_rule() -> &'static [(f64, f64); GL_ORDER] {
    static RULE: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut rule = [(0.0, 0.0); GL_ORDER];
        for (i, slot) in rule.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

fn gl_panel<const R: usize, const C: usize, F>(f: &F, a: f64, b: f64) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = SMatrix::<f64, R, C>::zeros();
    for &(x, w) in gauss_legendre_rule() {
        sum += f(mid + half * x) * w;
    }
    sum * half
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<const R: usize, const C: usize, F>(f: F, a: f64, b: f64) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    gl_panel(&f, a, b)
}

/// Adaptive Gauss–Legendre quadrature by interval bisection.
///
/// Returns the integral and the accumulated error estimate (Frobenius norm of
/// the difference between a panel and its two halves, summed over accepted
/// panels).
pub fn integrate_adaptive<const R: usize, const C: usize, F>(f: F, a: f64, b: f64, tol: f64) -> Result<(SMatrix<f64, R, C>, f64)>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    const MAX_DEPTH: u32 = 30;
    let mut total = SMatrix::<f64, R, C>::zeros();
    let mut err_total = 0.0;
    let mut stack = vec![(a, b, gl_panel(&f, a, b), 0u32)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl_panel(&f, lo, mid);
        let right = gl_panel(&f, mid, hi);
        let refined = left + right;
        let err = (refined - whole).norm();
        let share = tol * (hi - lo) / (b - a);
        if err <= share || depth >= MAX_DEPTH {
            if err > share {
                return Err(Error::QuadratureNotConverged { estimate: err, tol: share });
            }
            total += refined;
            err_total += err;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok((total, err_total))
}

/// Outcome of a randomized property check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Residual {
    pub max_residual: f64,
    pub samples: usize,
}

impl Residual {
    pub fn new(max_residual: f64, samples: usize) -> Self {
        Residual { max_residual, samples }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}
