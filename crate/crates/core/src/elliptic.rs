//! Contour quadrature for `S^{1/p}` with `S` symmetric positive definite and
//! `p` a negative integer.
//!
//! The Cauchy integral of `z^{1/p}` around `[m, M]` is pulled back through
//! `z = w²` and a conformal map from a rectangle built on Jacobi elliptic
//! functions, then sampled with the midpoint rule. Each node costs one shifted
//! solve `(z_j² − S)^{-1} y`; the result is
//!
//! ```text
//! S^{1/p} y ≈ c · S · Im Σ_j w_j (z_j² − S)^{-1} y,   c = −8 K (mM)^{1/4} / (π N k)
//! ```
//!
//! Error decays like `exp(−2π² N / (ln(M/m) + 6))`, but the constant in front
//! depends on `p`. [`num_contour_points`] is the bare rate formula;
//! [`select_contour_points`] raises it until the scalar error on `[m, M]` is
//! actually below the requested tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complete elliptic integrals `K(k)` and `K'(k) = K(√(1−k²))` by the
/// arithmetic-geometric mean. `K'(0)` is infinite.
pub fn ellipkkp(k: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("elliptic modulus must lie in [0, 1), got {k}")));
    }
    // (1−k)(1+k) keeps the complementary modulus accurate near k = 1
    let kc = ((1.0 - k) * (1.0 + k)).sqrt();
    let big_k = PI / (2.0 * agm(1.0, kc));
    // AGM on k directly, no cancellation for tiny k
    let g = agm(1.0, k);
    let big_kp = if g == 0.0 { f64::INFINITY } else { PI / (2.0 * g) };
    Ok((big_k, big_kp))
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    a
}

/// Jacobi elliptic functions `(sn, cn, dn)` at complex `u` for modulus `k`.
///
/// Descending Landen transformation down to a trigonometric base case. Points
/// above `Im u = K'/2` are reflected through `u ↦ iK' − u` first, since the
/// Landen recursion loses accuracy near the pole at `iK'`.
pub fn ellipjc(u: Complex64, k: f64) -> Result<(Complex64, Complex64, Complex64)> {
    if !u.is_finite() {
        return Err(Error::Domain(format!("elliptic argument must be finite, got {u}")));
    }
    let (_, kp) = ellipkkp(k)?;
    let m = k * k;
    let high = u.im > kp / 2.0;
    let v = if high { Complex64::new(0.0, kp) - u } else { u };
    let (sn, cn, dn) = landen(v, m);
    if high {
        let i = Complex64::new(0.0, 1.0);
        let ks = sn * k;
        Ok((-1.0 / ks, i * dn / ks, i * cn / sn))
    } else {
        Ok((sn, cn, dn))
    }
}

/// `m` is the parameter `k²`.
fn landen(u: Complex64, m: f64) -> (Complex64, Complex64, Complex64) {
    if m < 4.0 * f64::EPSILON {
        let (s, c) = (u.sin(), u.cos());
        let q = m / 4.0;
        return (
            s + (s * c - u) * c * q,
            c + (u - s * c) * s * q,
            Complex64::new(1.0, 0.0) + (c * c - s * s - 1.0) * q,
        );
    }
    let kappa = if m > 1e-3 {
        let r = (1.0 - m).sqrt();
        (1.0 - r) / (1.0 + r)
    } else {
        // series of the expression above, free of cancellation for small m
        let x = m / 4.0;
        [132.0, 42.0, 14.0, 5.0, 2.0, 1.0, 0.0]
            .iter()
            .fold(0.0, |acc, &c| acc * x + c)
    };
    let (s1, c1, d1) = landen(u / (1.0 + kappa), kappa * kappa);
    let s1sq = s1 * s1;
    let denom = s1sq * kappa + 1.0;
    (
        s1 * (1.0 + kappa) / denom,
        c1 * d1 / denom,
        (Complex64::new(1.0, 0.0) - s1sq * kappa) / denom,
    )
}

/// Node count from the convergence rate alone:
/// `ceil((ln(M/m) + 6)·|ln τ| / (2π²))`, at least 1.
pub fn num_contour_points(m: f64, big_m: f64, tau: f64) -> Result<usize> {
    check_bounds(m, big_m)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("quadrature tolerance must lie in (0, 1), got {tau}")));
    }
    let n = ((big_m / m).ln() + 6.0) * tau.ln().abs() / (2.0 * PI * PI);
    Ok((n.ceil() as usize).max(1))
}

/// Smallest `N` at or above [`num_contour_points`] whose scalar relative error
/// `max_s |q_N(s) − s^{1/p}| / s^{1/p}` over a dense geometric grid of
/// `[m, M]` is at most `tau`.
///
/// Because the quadrature acts on each eigenvalue separately, this scalar
/// error bounds the relative error of `S^{1/p} y` for every `y` when the
/// spectrum of `S` lies in `[m, M]`.
pub fn select_contour_points(m: f64, big_m: f64, p: i32, tau: f64) -> Result<usize> {
    let start = num_contour_points(m, big_m, tau)?;
    let limit = 4 * start + 64;
    for n in start..=limit {
        let q = contour_coefficients(m, big_m, n, p)?;
        if q.max_scalar_error() <= tau {
            return Ok(n);
        }
    }
    Err(Error::Numerical(format!(
        "no contour size up to {limit} reaches relative error {tau:e} on [{m:e}, {big_m:e}]"
    )))
}

fn check_bounds(m: f64, big_m: f64) -> Result<()> {
    if !(m > 0.0 && big_m > m && big_m.is_finite()) {
        return Err(Error::Domain(format!(
            "spectral bounds need 0 < m < M < ∞, got m = {m}, M = {big_m}"
        )));
    }
    Ok(())
}

/// Nodes, weights and prefactor of an `N`-point quadrature for `s ↦ s^{1/p}`
/// on `[m, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourQuadrature {
    n: usize,
    p: i32,
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
    prefactor: f64,
    m: f64,
    big_m: f64,
    k_modulus: f64,
    big_k: f64,
    big_kp: f64,
}

/// Build the quadrature. Nodes sit at the midpoints
/// `t_j = −K + (j − ½)·2K/N + iK'/2` of the upper half of the rectangle.
pub fn contour_coefficients(m: f64, big_m: f64, n: usize, p: i32) -> Result<ContourQuadrature> {
    check_bounds(m, big_m)?;
    if n == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    if p >= 0 {
        return Err(Error::Domain(format!("contour quadrature supports negative p only, got {p}")));
    }
    let r = (big_m / m).powf(0.25);
    let k = (r - 1.0) / (r + 1.0);
    let (big_k, big_kp) = ellipkkp(k)?;
    let scale = (m * big_m).powf(0.25);
    let inv_k = 1.0 / k;
    let inv_p = 1.0 / p as f64;

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for j in 0..n {
        let t = Complex64::new(-big_k + (j as f64 + 0.5) * 2.0 * big_k / n as f64, big_kp / 2.0);
        let (s, c, d) = ellipjc(t, k)?;
        let z = (s + inv_k) / (inv_k - s) * scale;
        let z2 = z * z;
        let phi = (z2.ln() * inv_p).exp();
        let gap = inv_k - s;
        let w = phi * c * d / (z * gap * gap);
        if !(z.is_finite() && w.is_finite()) || z.norm() == 0.0 {
            return Err(Error::Numerical(format!(
                "contour node {j} is degenerate (z = {z}, w = {w})"
            )));
        }
        nodes.push(z);
        weights.push(w);
    }
    let prefactor = -8.0 * big_k * scale / (PI * n as f64 * k);
    Ok(ContourQuadrature {
        n,
        p,
        nodes,
        weights,
        prefactor,
        m,
        big_m,
        k_modulus: k,
        big_k,
        big_kp,
    })
}

impl ContourQuadrature {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn p(&self) -> i32 {
        self.p
    }

    /// Contour nodes `z_j`; the shifts of the linear systems are `z_j²`.
    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.m, self.big_m)
    }

    pub fn k_modulus(&self) -> f64 {
        self.k_modulus
    }

    /// `(K, K')` at the modulus of the map.
    pub fn complete_integrals(&self) -> (f64, f64) {
        (self.big_k, self.big_kp)
    }

    /// Quadrature value at a scalar `s`, approximating `s^{1/p}`.
    pub fn apply_scalar(&self, s: f64) -> f64 {
        let sum: Complex64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w / (z * z - s))
            .sum();
        self.prefactor * s * sum.im
    }

    /// Largest relative error of [`Self::apply_scalar`] against `s^{1/p}` on
    /// a geometric grid of `[m, M]` fine enough to resolve the error ripple.
    pub fn max_scalar_error(&self) -> f64 {
        let points = 64 * self.n + 256;
        let ratio = (self.big_m / self.m).ln();
        let inv_p = 1.0 / self.p as f64;
        (0..=points)
            .map(|i| {
                let s = self.m * (ratio * i as f64 / points as f64).exp();
                let exact = s.powf(inv_p);
                ((self.apply_scalar(s) - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}
