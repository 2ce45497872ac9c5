//! Orthonormal Legendre bases on intervals and the Gauss rules that go with them.
//!
//! Every cell-local polynomial in the crate is stored as coefficients in the
//! basis `phi_n(x) = sqrt((2n+1)/h) P_n(xi)`, `xi = (2x - a - b)/h`, which is
//! orthonormal in `L2(a, b)`.

use std::sync::OnceLock;

const MAX_RULE: usize = 96;

/// Values `P_0(xi) .. P_deg(xi)` of the classical Legendre polynomials.
pub fn legendre_values(deg: usize, xi: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(deg + 1);
    p.push(1.0);
    if deg >= 1 {
        p.push(xi);
    }
    for n in 1..deg {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * xi * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p
}

/// `(P_n(xi), P_n'(xi))` for a single degree.
fn legendre_with_derivative(n: usize, xi: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, xi);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * xi * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// A quadrature rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&xi, &w)| (mid + half * xi, half * w))
    }
}

fn compute_gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn compute_gauss_lobatto(n: usize) -> Rule {
    assert!(n >= 2, "Gauss-Lobatto needs at least two points");
    let m = n - 1;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[m] = 1.0;
    let end_w = 2.0 / (m as f64 * n as f64);
    weights[0] = end_w;
    weights[m] = end_w;
    // interior nodes are the roots of P_m'
    for i in 1..m {
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            // (1 - x^2) P_m'' = 2x P_m' - m(m+1) P_m
            let dd = (2.0 * x * d - (m * n) as f64 * p) / (1.0 - x * x);
            let dx = d / dd;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, _) = legendre_with_derivative(m, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((m * n) as f64 * p * p);
    }
    if n % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss-Legendre rule with `n` points, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> &'static Rule {
    static TABLE: OnceLock<Vec<OnceLock<Rule>>> = OnceLock::new();
    assert!((1..MAX_RULE).contains(&n), "unsupported rule size {n}");
    let table = TABLE.get_or_init(|| (0..MAX_RULE).map(|_| OnceLock::new()).collect());
    table[n].get_or_init(|| compute_gauss_legendre(n))
}

/// Gauss-Lobatto rule with `n >= 2` points (endpoints included).
pub fn gauss_lobatto(n: usize) -> &'static Rule {
    static TABLE: OnceLock<Vec<OnceLock<Rule>>> = OnceLock::new();
    assert!((2..MAX_RULE).contains(&n), "unsupported rule size {n}");
    let table = TABLE.get_or_init(|| (0..MAX_RULE).map(|_| OnceLock::new()).collect());
    table[n].get_or_init(|| compute_gauss_lobatto(n))
}

/// Smallest Gauss rule integrating a polynomial of degree `deg` exactly.
pub fn rule_for_degree(deg: usize) -> &'static Rule {
    gauss_legendre(deg / 2 + 1)
}

/// Normalisation `sqrt((2n+1)/h)` of the orthonormal basis.
#[inline]
pub fn scale(n: usize, h: f64) -> f64 {
    ((2 * n + 1) as f64 / h).sqrt()
}

/// Values of `phi_0 .. phi_deg` on `[a, b]` at `x`.
pub fn ortho_values(deg: usize, a: f64, b: f64, x: f64) -> Vec<f64> {
    let h = b - a;
    let xi = (2.0 * x - a - b) / h;
    let mut p = legendre_values(deg, xi);
    for (n, v) in p.iter_mut().enumerate() {
        *v *= scale(n, h);
    }
    p
}

/// Values of the orthonormal basis at the reference coordinate `xi`.
pub fn ortho_values_ref(deg: usize, h: f64, xi: f64) -> Vec<f64> {
    let mut p = legendre_values(deg, xi);
    for (n, v) in p.iter_mut().enumerate() {
        *v *= scale(n, h);
    }
    p
}

/// Evaluate `sum_n c_n phi_n` at reference coordinate `xi` on a cell of length `h`.
pub fn eval_ref(coeffs: &[f64], h: f64, xi: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let p = legendre_values(coeffs.len() - 1, xi);
    coeffs
        .iter()
        .zip(&p)
        .enumerate()
        .map(|(n, (c, pv))| c * pv * scale(n, h))
        .sum()
}

/// Value of `sum c_n phi_n` at the right end (`xi = 1`).
pub fn eval_right_end(coeffs: &[f64], h: f64) -> f64 {
    coeffs.iter().enumerate().map(|(n, c)| c * scale(n, h)).sum()
}

/// Value of `sum c_n phi_n` at the left end (`xi = -1`).
pub fn eval_left_end(coeffs: &[f64], h: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c * scale(n, h) } else { -c * scale(n, h) })
        .sum()
}

/// Orthonormal coefficients of the derivative (degree drops by one; a
/// degree-0 input yields a single zero coefficient).
pub fn derivative(coeffs: &[f64], h: f64) -> Vec<f64> {
    let deg = coeffs.len().saturating_sub(1);
    let out_len = deg.max(1);
    let mut out = vec![0.0; out_len];
    for n in 1..coeffs.len() {
        let cn = coeffs[n];
        if cn == 0.0 {
            continue;
        }
        let mut m = n as isize - 1;
        while m >= 0 {
            let mu = m as usize;
            out[mu] += cn * (2.0 / h) * (((2 * n + 1) * (2 * mu + 1)) as f64).sqrt();
            m -= 2;
        }
    }
    out
}

/// Orthonormal coefficients (degree + 1) of the antiderivative vanishing at the left end.
pub fn antiderivative(coeffs: &[f64], h: f64) -> Vec<f64> {
    let deg = coeffs.len();
    // work in classical Legendre coefficients d_n
    let mut d_out = vec![0.0; deg + 1];
    for (n, &c) in coeffs.iter().enumerate() {
        let d = c * scale(n, h) * 0.5 * h;
        if n == 0 {
            d_out[0] += d;
            d_out[1] += d;
        } else {
            let f = d / (2 * n + 1) as f64;
            d_out[n + 1] += f;
            d_out[n - 1] -= f;
        }
    }
    d_out
        .iter()
        .enumerate()
        .map(|(n, d)| d / scale(n, h))
        .collect()
}

/// Nodal-to-modal matrix for `n = deg + 1` Gauss-Lobatto nodes on a cell of
/// length `h`: row `m` gives coefficient `m` as a combination of nodal values.
pub fn lobatto_nodal_to_modal(deg: usize, h: f64) -> nalgebra::DMatrix<f64> {
    let rule = gauss_lobatto(deg.max(1) + 1);
    let n = deg + 1;
    let mut v = nalgebra::DMatrix::zeros(n, n);
    if deg == 0 {
        v[(0, 0)] = scale(0, h);
    } else {
        for (i, &xi) in rule.nodes.iter().enumerate() {
            let vals = ortho_values_ref(deg, h, xi);
            for m in 0..n {
                v[(i, m)] = vals[m];
            }
        }
    }
    v.try_inverse().expect("Lobatto Vandermonde is invertible")
}

/// Reference Gauss-Lobatto nodes for degree `deg` (`deg + 1` points, `deg >= 1`).
pub fn lobatto_nodes(deg: usize) -> &'static [f64] {
    &gauss_lobatto(deg + 1).nodes
}

/// Coefficients of the degree-`p` polynomial on a cell of length `h` with
/// end values `fa`, `fb` and orthonormal moments `mom[m]`, `m = 0..p-1`
/// (only the first `p - 1` entries are used). Requires `p >= 1`.
pub fn endpoint_moment_coeffs(p: usize, h: f64, fa: f64, fb: f64, mom: &[f64]) -> Vec<f64> {
    assert!(p >= 1, "endpoint/moment dofs need degree >= 1");
    let mut c = vec![0.0; p + 1];
    let mut r_right = fb;
    let mut r_left = fa;
    for n in 0..p - 1 {
        c[n] = mom[n];
        let s = scale(n, h);
        r_right -= mom[n] * s;
        r_left -= if n % 2 == 0 { mom[n] * s } else { -mom[n] * s };
    }
    let plus = 0.5 * (r_right + r_left);
    let minus = 0.5 * (r_right - r_left);
    let (u, v) = if p % 2 == 0 { (minus, plus) } else { (plus, minus) };
    c[p - 1] = u / scale(p - 1, h);
    c[p] = v / scale(p, h);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rules_integrate_monomials() {
        for n in 1..12 {
            let rule = gauss_legendre(n);
            for p in 0..2 * n {
                let q: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(p as i32))
                    .sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn lobatto_rules_integrate_monomials() {
        for n in 2..12 {
            let rule = gauss_lobatto(n);
            for p in 0..(2 * n - 2) {
                let q: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(p as i32))
                    .sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn orthonormal_gram_is_identity() {
        let (a, b) = (0.3, 1.7);
        let deg = 10;
        let rule = gauss_legendre(deg + 1);
        for i in 0..=deg {
            for j in 0..=deg {
                let g: f64 = rule
                    .mapped(a, b)
                    .map(|(x, w)| {
                        let v = ortho_values(deg, a, b, x);
                        w * v[i] * v[j]
                    })
                    .sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_and_antiderivative_are_inverse() {
        let h = 0.37;
        let c = [0.4, -1.2, 0.7, 0.05, -0.3];
        let a = antiderivative(&c, h);
        assert_relative_eq!(eval_left_end(&a, h), 0.0, epsilon = 1e-14);
        let d = derivative(&a, h);
        for (x, y) in c.iter().zip(&d) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn endpoint_moment_coeffs_reproduce_polynomials() {
        let h = 0.8;
        for p in 1..7 {
            let c: Vec<f64> = (0..=p).map(|n| 0.3 + 0.1 * n as f64 - 0.05 * (n * n) as f64).collect();
            let fa = eval_left_end(&c, h);
            let fb = eval_right_end(&c, h);
            let back = endpoint_moment_coeffs(p, h, fa, fb, &c);
            for (x, y) in c.iter().zip(&back) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn endpoint_values_match_pointwise_evaluation() {
        let h = 2.5;
        let c = [1.0, 2.0, -0.5, 0.25];
        assert_relative_eq!(eval_right_end(&c, h), eval_ref(&c, h, 1.0), epsilon = 1e-14);
        assert_relative_eq!(eval_left_end(&c, h), eval_ref(&c, h, -1.0), epsilon = 1e-14);
    }
}
