//! Piecewise polynomials in one variable.
//!
//! Used for x-slices (one time-Legendre mode of a space-time field) and
//! t-columns (one space-Legendre mode). Breakpoints are owned by the value.

use crate::legendre::{self, rule_for_degree};
use crate::{Error, Result};

/// Tolerance (relative to the interval length) below which two breakpoints coincide.
pub(crate) const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    degree: usize,
    coeffs: Vec<f64>,
}

impl PiecewisePoly {
    pub fn zeros(breaks: Vec<f64>, degree: usize) -> Self {
        let n = breaks.len() - 1;
        Self {
            breaks,
            degree,
            coeffs: vec![0.0; n * (degree + 1)],
        }
    }

    pub fn from_coeffs(breaks: Vec<f64>, degree: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), (breaks.len() - 1) * (degree + 1));
        Self {
            breaks,
            degree,
            coeffs,
        }
    }

    /// Cellwise L2 projection of `f` (Gauss rule with `degree + 6` points).
    pub fn project<F: Fn(f64) -> f64>(breaks: Vec<f64>, degree: usize, f: F) -> Self {
        let rule = legendre::gauss_legendre(degree + 6);
        let n = breaks.len() - 1;
        let mut coeffs = vec![0.0; n * (degree + 1)];
        for c in 0..n {
            let (a, b) = (breaks[c], breaks[c + 1]);
            for (x, w) in rule.mapped(a, b) {
                let fx = f(x);
                let vals = legendre::ortho_values(degree, a, b, x);
                for m in 0..=degree {
                    coeffs[c * (degree + 1) + m] += w * fx * vals[m];
                }
            }
        }
        Self {
            breaks,
            degree,
            coeffs,
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_cells(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let s = self.degree + 1;
        &self.coeffs[c * s..(c + 1) * s]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let s = self.degree + 1;
        &mut self.coeffs[c * s..(c + 1) * s]
    }

    pub fn cell_len(&self, c: usize) -> f64 {
        self.breaks[c + 1] - self.breaks[c]
    }

    pub fn span(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    /// Index of the cell containing `x` (right-closed on the last cell).
    pub fn locate(&self, x: f64) -> usize {
        locate(&self.breaks, x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = self.locate(x);
        let (a, b) = (self.breaks[c], self.breaks[c + 1]);
        legendre::eval_ref(self.cell(c), b - a, (2.0 * x - a - b) / (b - a))
    }

    /// One-sided limit at breakpoint `i` from the cell on its left.
    pub fn left_limit(&self, i: usize) -> f64 {
        legendre::eval_right_end(self.cell(i - 1), self.cell_len(i - 1))
    }

    /// One-sided limit at breakpoint `i` from the cell on its right.
    pub fn right_limit(&self, i: usize) -> f64 {
        legendre::eval_left_end(self.cell(i), self.cell_len(i))
    }

    /// Largest jump across interior breakpoints, with its location.
    pub fn max_jump(&self) -> (f64, f64) {
        let mut worst = (0.0, self.breaks[0]);
        for i in 1..self.n_cells() {
            let j = (self.left_limit(i) - self.right_limit(i)).abs();
            if j > worst.0 {
                worst = (j, self.breaks[i]);
            }
        }
        worst
    }

    pub fn derivative(&self) -> Self {
        let out_deg = self.degree.saturating_sub(1);
        let mut out = Vec::with_capacity(self.n_cells() * (out_deg + 1));
        for c in 0..self.n_cells() {
            out.extend(legendre::derivative(self.cell(c), self.cell_len(c)));
        }
        Self::from_coeffs(self.breaks.clone(), out_deg, out)
    }

    /// Continuous antiderivative vanishing at the left end of the span.
    pub fn antiderivative(&self) -> Self {
        let deg = self.degree + 1;
        let mut out = Vec::with_capacity(self.n_cells() * (deg + 1));
        let mut acc = 0.0;
        for c in 0..self.n_cells() {
            let h = self.cell_len(c);
            let mut a = legendre::antiderivative(self.cell(c), h);
            a[0] += acc / legendre::scale(0, h);
            acc = legendre::eval_right_end(&a, h);
            out.extend(a);
        }
        Self::from_coeffs(self.breaks.clone(), deg, out)
    }

    pub fn integral(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell(c)[0] * self.cell_len(c).sqrt())
            .sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// L2 inner product; both operands must share breakpoints.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.breaks.len(), other.breaks.len());
        let s1 = self.degree + 1;
        let s2 = other.degree + 1;
        let m = s1.min(s2);
        (0..self.n_cells())
            .map(|c| {
                let a = &self.coeffs[c * s1..c * s1 + m];
                let b = &other.coeffs[c * s2..c * s2 + m];
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum()
    }

    /// Same function written with a larger degree.
    pub fn with_degree(&self, degree: usize) -> Self {
        assert!(degree >= self.degree);
        let mut out = Self::zeros(self.breaks.clone(), degree);
        for c in 0..self.n_cells() {
            out.cell_mut(c)[..=self.degree].copy_from_slice(self.cell(c));
        }
        out
    }

    /// Cellwise truncation to degree `r` (the cellwise L2 projection onto P_r).
    pub fn truncate(&self, r: usize) -> Self {
        let mut out = Self::zeros(self.breaks.clone(), r);
        let m = r.min(self.degree);
        for c in 0..self.n_cells() {
            out.cell_mut(c)[..=m].copy_from_slice(&self.cell(c)[..=m]);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self + s * other` with matching breakpoints (degrees may differ).
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let deg = self.degree.max(other.degree);
        let mut out = self.with_degree(deg);
        let so = other.degree + 1;
        for c in 0..self.n_cells() {
            let dst = out.cell_mut(c);
            for m in 0..so {
                dst[m] += s * other.coeffs[c * so + m];
            }
        }
        out
    }

    /// Restriction to the cells `first..last` (exclusive end).
    pub fn restrict_cells(&self, first: usize, last: usize) -> Self {
        let s = self.degree + 1;
        Self::from_coeffs(
            self.breaks[first..=last].to_vec(),
            self.degree,
            self.coeffs[first * s..last * s].to_vec(),
        )
    }

    /// Moments `int_a^b f phi_m` for `m = 0..=deg`, where `phi_m` is the
    /// orthonormal basis of `[a, b]`. Exact for any breakpoint layout.
    pub fn moments_on(&self, a: f64, b: f64, deg: usize) -> Vec<f64> {
        let mut out = vec![0.0; deg + 1];
        let rule = rule_for_degree(self.degree + deg);
        let tol = GEOM_TOL * (b - a).abs().max(1.0);
        let first = self.locate(a + tol).min(self.n_cells() - 1);
        for c in first..self.n_cells() {
            let (ca, cb) = (self.breaks[c], self.breaks[c + 1]);
            if ca >= b - tol {
                break;
            }
            let lo = ca.max(a);
            let hi = cb.min(b);
            if hi - lo <= tol {
                continue;
            }
            let h = cb - ca;
            let cell = self.cell(c);
            for (x, w) in rule.mapped(lo, hi) {
                let fx = legendre::eval_ref(cell, h, (2.0 * x - ca - cb) / h);
                let vals = legendre::ortho_values(deg, a, b, x);
                for m in 0..=deg {
                    out[m] += w * fx * vals[m];
                }
            }
        }
        out
    }

    /// L2 projection onto cellwise `P_deg` over `target` breakpoints, which
    /// must lie within the span of `self`.
    pub fn project_onto(&self, target: &[f64], deg: usize) -> Self {
        let mut coeffs = Vec::with_capacity((target.len() - 1) * (deg + 1));
        for w in target.windows(2) {
            coeffs.extend(self.moments_on(w[0], w[1], deg));
        }
        Self::from_coeffs(target.to_vec(), deg, coeffs)
    }

    /// Exact re-expansion on a refinement of the breakpoints (every target
    /// cell inside one source cell).
    pub fn prolong(&self, target: &[f64]) -> Result<Self> {
        check_refines(target, &self.breaks)?;
        Ok(self.project_onto(target, self.degree))
    }
}

/// Cell index of `x` in strictly increasing `breaks` (last cell right-closed).
pub fn locate(breaks: &[f64], x: f64) -> usize {
    let n = breaks.len() - 1;
    match breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 1),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 1),
    }
}

/// Checks that every cell of `fine` lies inside a cell of `coarse`.
pub fn check_refines(fine: &[f64], coarse: &[f64]) -> Result<()> {
    let scale = (coarse[coarse.len() - 1] - coarse[0]).abs().max(1.0);
    let tol = GEOM_TOL * scale;
    if (fine[0] - coarse[0]).abs() > tol
        || (fine[fine.len() - 1] - coarse[coarse.len() - 1]).abs() > tol
    {
        return Err(Error::IncompatibleMesh("spans differ".into()));
    }
    for &c in coarse {
        let i = locate(fine, c);
        let hit = (fine[i] - c).abs() <= tol || (fine[i + 1] - c).abs() <= tol;
        if !hit {
            return Err(Error::IncompatibleMesh(format!(
                "breakpoint {c} of the coarse mesh is missing in the fine mesh"
            )));
        }
    }
    Ok(())
}

/// Exact `H^{-1}` representative on the span of `g`: returns `w'` where
/// `-w'' = g` with `w = 0` at both ends. `||g||_{H^{-1}} = ||w'||_{L2}`.
pub fn hminus1_profile(g: &PiecewisePoly) -> Result<PiecewisePoly> {
    let (a, b) = g.span();
    if !(b - a > 0.0) {
        return Err(Error::InvalidArgument("degenerate interval".into()));
    }
    let big_g = g.antiderivative();
    let c = big_g.integral() / (b - a);
    let mut w = big_g.scaled(-1.0);
    for cell in 0..w.n_cells() {
        let h = w.cell_len(cell);
        w.cell_mut(cell)[0] += c * h.sqrt();
    }
    Ok(w)
}

/// `||g||_{H^{-1}(a,b)}` with zero boundary values on the span of `g`.
pub fn hminus1_norm(g: &PiecewisePoly) -> Result<f64> {
    Ok(hminus1_profile(g)?.l2_norm())
}

/// `H^{-1}` inner product of two profiles on the same breakpoints.
pub fn hminus1_inner(f: &PiecewisePoly, g: &PiecewisePoly) -> Result<f64> {
    Ok(hminus1_profile(f)?.dot(&hminus1_profile(g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let f = |x: f64| 1.0 + 2.0 * x - 3.0 * x * x + x * x * x;
        let p = PiecewisePoly::project(uniform(0.0, 2.0, 3), 3, f);
        for &x in &[0.0, 0.3, 0.77, 1.5, 2.0] {
            assert_relative_eq!(p.eval(x), f(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn antiderivative_is_continuous_and_exact() {
        let g = PiecewisePoly::project(uniform(0.0, 1.0, 4), 2, |x| x * x);
        let big = g.antiderivative();
        assert!(big.max_jump().0 < 1e-14);
        assert_relative_eq!(big.eval(1.0), 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(big.eval(0.5), 1.0 / 24.0, epsilon = 1e-14);
    }

    #[test]
    fn hminus1_of_constant_one() {
        let g = PiecewisePoly::project(vec![0.0, 1.0], 0, |_| 1.0);
        let w = hminus1_profile(&g).unwrap();
        // w' = (1 - 2x) / 2
        for &x in &[0.0, 0.25, 0.8] {
            assert_relative_eq!(w.eval(x), (1.0 - 2.0 * x) / 2.0, epsilon = 1e-14);
        }
        assert_relative_eq!(w.l2_norm(), 1.0 / 12f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn hminus1_scaling_with_interval_length() {
        for &h in &[1.0, 0.5, 0.125] {
            let g = PiecewisePoly::project(vec![0.0, h], 0, |_| 1.0);
            let n = hminus1_norm(&g).unwrap();
            assert_relative_eq!(n, h.powf(1.5) / 12f64.sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn degenerate_interval_rejected() {
        let g = PiecewisePoly::zeros(vec![0.0, 0.0], 1);
        assert!(hminus1_profile(&g).is_err());
    }

    #[test]
    fn prolongation_is_exact() {
        let g = PiecewisePoly::project(uniform(0.0, 1.0, 2), 3, |x| x.powi(3) - x);
        let fine = uniform(0.0, 1.0, 8);
        let p = g.prolong(&fine).unwrap();
        for &x in &[0.1, 0.33, 0.5, 0.91] {
            assert_relative_eq!(p.eval(x), g.eval(x), epsilon = 1e-13);
        }
        assert!(g.prolong(&uniform(0.0, 1.0, 3)).is_err());
    }
}
