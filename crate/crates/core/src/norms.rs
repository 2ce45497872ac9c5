//! Exact Bochner norms of piecewise polynomial fields.
//!
//! `H^{-1}` norms use the zero-boundary inverse Laplacian of each interval
//! or patch. In time, orthonormality of the Legendre modes turns the
//! `L2(K_t; H^{-1})` integral into a sum over modes, which is exact.

use crate::field::{Direction, Partition, TensorPolyField};
use crate::pw1d::{hminus1_norm, PiecewisePoly};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `||v||_{L2(Q)}`
    L2Q,
    /// `||d_x v||_{L2(Q)}`
    L2H1semi,
    /// `||v||_{L2(J; H^{-1})}`
    L2Hminus1,
    /// `(||d_x v||^2 + ||d_t v||^2_{L2(J;H^{-1})})^{1/2}`
    Xnorm,
    /// `||d_t v + d_x tau||_{L2(Q)}` (pairs only)
    LambdaDiv,
    /// `(||d_x v||^2 + ||tau||^2 + ||d_t v + d_x tau||^2)^{1/2}` (pairs only)
    LambdaFull,
    /// `||v(t)||_{L2}` at a time point
    TraceL2(f64),
}

/// Part of the space-time cylinder a norm is taken over. Ranges are
/// half-open cell index ranges of a tensor mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    All,
    Cell(usize),
    Cells {
        t: (usize, usize),
        x: (usize, usize),
    },
}

fn ranges(field: &TensorPolyField, dom: Domain) -> Result<((usize, usize), (usize, usize))> {
    let m = field.tensor_mesh()?;
    let (mt, nx) = (m.time.n_cells(), m.space.n_cells());
    let r = match dom {
        Domain::All => ((0, mt), (0, nx)),
        Domain::Cell(c) => {
            if c >= m.n_cells() {
                return Err(Error::UnknownCell(c));
            }
            let (it, ix) = m.split(c);
            ((it, it + 1), (ix, ix + 1))
        }
        Domain::Cells { t, x } => {
            if t.0 >= t.1 || x.0 >= x.1 || t.1 > mt || x.1 > nx {
                return Err(Error::IncompatibleMesh(format!(
                    "cell range {t:?} x {x:?} outside a {mt} x {nx} mesh"
                )));
            }
            (t, x)
        }
    };
    Ok(r)
}

fn cells_of(field: &TensorPolyField, dom: Domain) -> Result<Vec<usize>> {
    match field.partition() {
        Partition::Irregular(m) => match dom {
            Domain::All => Ok((0..m.n_cells()).collect()),
            Domain::Cell(c) if c < m.n_cells() => Ok(vec![c]),
            Domain::Cell(c) => Err(Error::UnknownCell(c)),
            Domain::Cells { .. } => Err(Error::IncompatibleMesh(
                "cell ranges need a tensor mesh".into(),
            )),
        },
        Partition::Tensor(m) => {
            let ((t0, t1), (x0, x1)) = ranges(field, dom)?;
            let n = m.space.n_cells();
            Ok((t0..t1).flat_map(|it| (x0..x1).map(move |ix| it * n + ix)).collect())
        }
    }
}

pub fn l2_sq(field: &TensorPolyField, dom: Domain) -> Result<f64> {
    Ok(cells_of(field, dom)?
        .into_iter()
        .map(|c| field.block(c).iter().map(|v| v * v).sum::<f64>())
        .sum())
}

pub fn h1semi_sq(field: &TensorPolyField, dom: Domain) -> Result<f64> {
    l2_sq(&field.differentiate(Direction::X), dom)
}

/// `||g||^2_{L2(K_t; H^{-1}(x-range))}` summed over the time cells of the domain.
pub fn hminus1_sq(field: &TensorPolyField, dom: Domain) -> Result<f64> {
    let ((t0, t1), (x0, x1)) = ranges(field, dom)?;
    let (pt, _) = field.degrees();
    let mut s = 0.0;
    for it in t0..t1 {
        for a in 0..=pt {
            let slice = field.x_slice(it, a)?.restrict_cells(x0, x1);
            let n = hminus1_norm(&slice)?;
            s += n * n;
        }
    }
    Ok(s)
}

pub fn trace_l2_sq(field: &TensorPolyField, t: f64, dom: Domain) -> Result<f64> {
    let m = field.tensor_mesh()?;
    if !(0.0..=m.t_end()).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, T]")));
    }
    let (_, (x0, x1)) = ranges(field, dom)?;
    Ok(field.slice_at_time(t)?.restrict_cells(x0, x1).l2_norm_sq())
}

/// Norm of a single field over `dom`.
pub fn norm_on(field: &TensorPolyField, kind: NormKind, dom: Domain) -> Result<f64> {
    let sq = match kind {
        NormKind::L2Q => l2_sq(field, dom)?,
        NormKind::L2H1semi => h1semi_sq(field, dom)?,
        NormKind::L2Hminus1 => hminus1_sq(field, dom)?,
        NormKind::Xnorm => h1semi_sq(field, dom)? + hminus1_sq(&field.differentiate(Direction::T), dom)?,
        NormKind::TraceL2(t) => trace_l2_sq(field, t, dom)?,
        NormKind::LambdaDiv | NormKind::LambdaFull => {
            return Err(Error::InvalidArgument(
                "Lambda norms are defined for (v, tau) pairs; use norm_pair".into(),
            ))
        }
    };
    Ok(sq.max(0.0).sqrt())
}

pub fn norm(field: &TensorPolyField, kind: NormKind) -> Result<f64> {
    norm_on(field, kind, Domain::All)
}

/// `div(v, tau) = d_t v + d_x tau`.
pub fn div(v: &TensorPolyField, tau: &TensorPolyField) -> Result<TensorPolyField> {
    v.differentiate(Direction::T)
        .add(&tau.differentiate(Direction::X))
}

/// Norms of a pair `(v, tau)`.
pub fn norm_pair(v: &TensorPolyField, tau: &TensorPolyField, kind: NormKind, dom: Domain) -> Result<f64> {
    let d = l2_sq(&div(v, tau)?, dom)?;
    let sq = match kind {
        NormKind::LambdaDiv => d,
        NormKind::LambdaFull => h1semi_sq(v, dom)? + l2_sq(tau, dom)? + d,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} is not a pair norm"
            )))
        }
    };
    Ok(sq.sqrt())
}

/// Both sides of `||v(t)||^2 <= T^{-1}||v||^2 + ||d_x v||^2 + ||d_t v||^2_{L2(J;H^{-1})}`.
pub fn embedding_gap(v: &TensorPolyField, t: f64) -> Result<(f64, f64)> {
    let m = v.tensor_mesh()?;
    if !(0.0..=m.t_end()).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, T]")));
    }
    let scale = v.max_abs_coeff();
    let trace = v.max_trace()?;
    if trace > 1e-10 * scale.max(1e-300) {
        return Err(Error::NonZeroTrace(trace));
    }
    let jump = v.relative_jump(Direction::T)?;
    if jump > 1e-9 {
        return Err(Error::Discontinuous {
            direction: "t",
            at: f64::NAN,
            jump,
        });
    }
    let lhs = trace_l2_sq(v, t, Domain::All)?;
    let rhs = l2_sq(v, Domain::All)? / m.t_end()
        + h1semi_sq(v, Domain::All)?
        + hminus1_sq(&v.differentiate(Direction::T), Domain::All)?;
    Ok((lhs, rhs))
}

/// `sup_{w in V_n} (g, w) / ||w'||` over continuous piecewise linears with
/// `n` uniform elements on the span of `g`, vanishing at both ends.
pub fn hminus1_discrete_sup(g: &PiecewisePoly, n: usize) -> f64 {
    let (a, b) = g.span();
    let h = (b - a) / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
    // load vector: int g phi_j, split into the two halves of each hat
    let mut load = vec![0.0; n + 1];
    for e in 0..n {
        let mom = g.moments_on(nodes[e], nodes[e + 1], 1);
        let mean_part = 0.5 * mom[0] * h.sqrt();
        let slope_part = 0.5 * mom[1] * (h / 3.0).sqrt();
        load[e] += mean_part - slope_part;
        load[e + 1] += mean_part + slope_part;
    }
    let rhs: Vec<f64> = load[1..n].to_vec();
    let m = rhs.len();
    if m == 0 {
        return 0.0;
    }
    // Thomas algorithm for the tridiagonal stiffness (2, -1) / h
    let diag = 2.0 / h;
    let off = -1.0 / h;
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off / diag;
    d[0] = rhs[0] / diag;
    for i in 1..m {
        let den = diag - off * c[i - 1];
        c[i] = off / den;
        d[i] = (rhs[i] - off * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    rhs.iter().zip(&x).map(|(r, u)| r * u).sum::<f64>().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{oracle_project, project_analytic, AnalyticField, Smoothness};
    use crate::mesh::build_uniform_tensor;
    use crate::pw1d::hminus1_profile;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_has_zero_norms() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 3).unwrap();
        let z = TensorPolyField::constant(&m, 0.0);
        for k in [
            NormKind::L2Q,
            NormKind::L2H1semi,
            NormKind::L2Hminus1,
            NormKind::Xnorm,
            NormKind::TraceL2(0.5),
        ] {
            assert_eq!(norm(&z, k).unwrap(), 0.0);
        }
        assert_eq!(norm_pair(&z, &z, NormKind::LambdaFull, Domain::All).unwrap(), 0.0);
        assert!(norm(&z, NormKind::LambdaDiv).is_err());
    }

    #[test]
    fn sine_gradient_norm() {
        let m = build_uniform_tensor(1.0, 1.0, 1, 8).unwrap();
        let f = AnalyticField::new("", Smoothness::Smooth, |_, x| (PI * x).sin());
        let v = oracle_project(&f, &m, 1, 8).unwrap();
        assert_relative_eq!(norm(&v, NormKind::L2H1semi).unwrap(), PI / 2f64.sqrt(), epsilon = 1e-7);
    }

    #[test]
    fn dual_norm_of_parabola() {
        let m = build_uniform_tensor(1.0, 1.0, 1, 1).unwrap();
        let f = AnalyticField::new("", Smoothness::Polynomial, |t, x| t * x * (1.0 - x));
        let v = project_analytic(&f, &m, 1, 2).unwrap();
        let dt = v.differentiate(Direction::T);
        // w' = 1/12 - x^2/2 + x^3/3, ||w'||^2 = 17/5040
        let exact = (17.0f64 / 5040.0).sqrt();
        assert_relative_eq!(norm(&dt, NormKind::L2Hminus1).unwrap(), exact, epsilon = 1e-14);
        let brute = hminus1_discrete_sup(&dt.x_slice(0, 0).unwrap(), 400);
        assert!((exact - brute) / exact < 1e-4);
    }

    #[test]
    fn embedding_examples() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 8).unwrap();
        let f = AnalyticField::new("", Smoothness::Smooth, |_, x| (PI * x).sin());
        let v = oracle_project(&f, &m, 1, 9).unwrap();
        let (lhs, rhs) = embedding_gap(&v, 0.3).unwrap();
        assert_relative_eq!(lhs, 0.5, epsilon = 1e-8);
        assert_relative_eq!(rhs, 0.5 + PI * PI / 2.0, epsilon = 1e-7);
        let z = TensorPolyField::constant(&m, 0.0);
        assert_eq!(embedding_gap(&z, 1.0).unwrap(), (0.0, 0.0));
        let t = oracle_project(&AnalyticField::new("", Smoothness::Polynomial, |t, _| t), &m, 1, 1).unwrap();
        assert!(matches!(embedding_gap(&t, 0.5), Err(Error::NonZeroTrace(_))));
        assert!(embedding_gap(&v, 1.5).is_err());
    }

    #[test]
    fn discrete_sup_approaches_closed_form() {
        let g = PiecewisePoly::project(vec![0.0, 0.4, 1.0], 3, |x| (3.0 * x).cos() + x);
        let exact = hminus1_profile(&g).unwrap().l2_norm();
        let brute = hminus1_discrete_sup(&g, 400);
        assert!(brute <= exact * (1.0 + 1e-12));
        assert!((exact - brute) / exact < 1e-3);
    }

    #[test]
    fn restricted_domains() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 2).unwrap();
        let c = TensorPolyField::constant(&m, 1.0);
        assert_relative_eq!(norm_on(&c, NormKind::L2Q, Domain::Cell(3)).unwrap(), 0.5, epsilon = 1e-14);
        let per_cell = 0.5f64.powf(1.5) / 12f64.sqrt();
        let h = norm_on(&c, NormKind::L2Hminus1, Domain::Cell(0)).unwrap();
        assert_relative_eq!(h, per_cell * 0.5f64.sqrt(), epsilon = 1e-14);
        assert!(norm_on(&c, NormKind::L2Q, Domain::Cell(4)).is_err());
        assert!(norm_on(&c, NormKind::L2Q, Domain::Cells { t: (0, 3), x: (0, 1) }).is_err());
    }
}
