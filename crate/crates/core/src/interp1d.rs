//! One-dimensional interpolants applied column- or slice-wise to fields:
//! L2 projections in time, the bubble-corrected time interpolant, the
//! nodal local-projection operators in space and time, and the
//! Raviart-Thomas interpolant of continuous piecewise `P_{l+1}`.

use nalgebra::DMatrix;

use crate::field::{Continuity, Direction, TensorPolyField};
use crate::legendre::{self, gauss_legendre, lobatto_nodal_to_modal, lobatto_nodes, scale};
use crate::mesh::{Mesh1d, SpaceMesh, TimeMesh};
use crate::pw1d::{check_refines, PiecewisePoly};
use crate::{Error, Result};

/// Relative jump above which an input counts as discontinuous.
pub const CONTINUITY_TOL: f64 = 1e-9;

fn require_continuous(v: &TensorPolyField, dir: Direction) -> Result<()> {
    let jump = v.relative_jump(dir)?;
    if jump > CONTINUITY_TOL {
        return Err(Error::Discontinuous {
            direction: match dir {
                Direction::T => "t",
                Direction::X => "x",
            },
            at: f64::NAN,
            jump,
        });
    }
    Ok(())
}

/// Cellwise truncation to `P_r` in time on the field's own time mesh.
pub fn l2_project_time(v: &TensorPolyField, r: usize) -> TensorPolyField {
    let (_, px) = v.degrees();
    let f = v.flags();
    v.resized(r, px).with_flags(Continuity {
        in_t: false,
        in_x: f.in_x,
        zero_trace: f.zero_trace,
    })
}

/// L2 projection onto `P_r` per cell of a (coarser or equal) time mesh.
pub fn project_time_onto(v: &TensorPolyField, target: &TimeMesh, r: usize) -> Result<TensorPolyField> {
    let m = v.tensor_mesh()?;
    check_refines(m.time.breakpoints(), target.breakpoints())?;
    let tb = target.breakpoints().to_vec();
    let f = v.flags();
    Ok(v
        .map_time(target, r, |c| Ok(c.project_onto(&tb, r)))?
        .with_flags(Continuity {
            in_t: false,
            in_x: f.in_x,
            zero_trace: f.zero_trace,
        }))
}

/// L2 projection onto `P_r` per cell of a (coarser or equal) space mesh.
pub fn project_space_onto(v: &TensorPolyField, target: &SpaceMesh, r: usize) -> Result<TensorPolyField> {
    let m = v.tensor_mesh()?;
    check_refines(m.space.breakpoints(), target.breakpoints())?;
    let xb = target.breakpoints().to_vec();
    let f = v.flags();
    Ok(v
        .map_space(target, r, |s| Ok(s.project_onto(&xb, r)))?
        .with_flags(Continuity {
            in_t: f.in_t,
            in_x: false,
            zero_trace: false,
        }))
}

fn linear_coeffs(va: f64, vb: f64, h: f64) -> [f64; 2] {
    let mean = 0.5 * (va + vb);
    let slope = 0.5 * (vb - va);
    [mean * h.sqrt(), slope * (h / 3.0).sqrt()]
}

fn same_span(a: &[f64], b: &[f64]) -> Result<()> {
    let scale = (b[b.len() - 1] - b[0]).abs().max(1.0);
    let tol = 1e-12 * scale;
    if (a[0] - b[0]).abs() > tol || (a[a.len() - 1] - b[b.len() - 1]).abs() > tol {
        return Err(Error::IncompatibleMesh("input and target meshes span different intervals".into()));
    }
    Ok(())
}

fn breakpoint_values(col: &PiecewisePoly, breaks: &[f64]) -> Vec<f64> {
    breaks.iter().map(|&p| col.eval(p)).collect()
}

/// Bubble-corrected interpolant `I v = I^1 v + b I^2 v` on each cell of a time mesh.
#[derive(Debug, Clone)]
pub struct TimeInterpolant {
    mesh: TimeMesh,
    k: usize,
    // per cell: maps the residual moments (m <= k-2) to coefficients of b * I^2 v
    correction: Vec<DMatrix<f64>>,
}

impl TimeInterpolant {
    pub fn new(mesh: &TimeMesh, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::UnsupportedDegree("time interpolation needs k >= 1".into()));
        }
        let mut correction = Vec::with_capacity(mesh.n_cells());
        for i in 0..mesh.n_cells() {
            let (a, b) = mesh.cell(i);
            if k < 2 {
                correction.push(DMatrix::zeros(k + 1, 0));
                continue;
            }
            // e[m][n] = int b phi_m phi_n, m <= k, n <= k - 2
            let mut e = DMatrix::<f64>::zeros(k + 1, k - 1);
            for (t, w) in gauss_legendre(k + 1).mapped(a, b) {
                let vals = legendre::ortho_values(k, a, b, t);
                let bub = bubble_value(a, b, t);
                for m in 0..=k {
                    for n in 0..k - 1 {
                        e[(m, n)] += w * bub * vals[m] * vals[n];
                    }
                }
            }
            let gram = e.rows(0, k - 1).into_owned();
            let inv = gram
                .try_inverse()
                .ok_or_else(|| Error::Assertion("singular bubble Gram matrix".into()))?;
            correction.push(e * inv);
        }
        Ok(Self {
            mesh: mesh.clone(),
            k,
            correction,
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    /// The bubble of cell `i` as a piecewise polynomial on the whole time mesh.
    pub fn bubble(&self, i: usize) -> PiecewisePoly {
        let mut p = PiecewisePoly::zeros(self.mesh.breakpoints().to_vec(), 2);
        let h = self.mesh.h(i);
        // b = 3/(2h) (1 - xi^2) = 1/h - (1/h) P_2(xi)
        p.cell_mut(i)[0] = h.sqrt() / h;
        p.cell_mut(i)[2] = -(1.0 / h) / scale(2, h);
        p
    }

    pub fn apply_column(&self, col: &PiecewisePoly) -> Result<PiecewisePoly> {
        let breaks = self.mesh.breakpoints();
        same_span(col.breaks(), breaks)?;
        let k = self.k;
        let vals = breakpoint_values(col, breaks);
        let mut out = PiecewisePoly::zeros(breaks.to_vec(), k);
        for i in 0..self.mesh.n_cells() {
            let (a, b) = self.mesh.cell(i);
            let h = b - a;
            let lin = linear_coeffs(vals[i], vals[i + 1], h);
            let cell = out.cell_mut(i);
            cell[0] = lin[0];
            cell[1] = lin[1];
            if k >= 2 {
                let mut res = col.moments_on(a, b, k - 2);
                res[0] -= lin[0];
                if k >= 3 {
                    res[1] -= lin[1];
                }
                let r = nalgebra::DVector::from_vec(res);
                let add = &self.correction[i] * r;
                for m in 0..=k {
                    cell[m] += add[m];
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &TensorPolyField) -> Result<TensorPolyField> {
        require_continuous(v, Direction::T)?;
        let f = v.flags();
        Ok(v
            .map_time(&self.mesh, self.k, |c| self.apply_column(c))?
            .with_flags(Continuity {
                in_t: true,
                in_x: f.in_x,
                zero_trace: f.zero_trace,
            }))
    }
}

/// `b(t) = 6 s (1 - s) / h` with `s = (t - a) / h`.
pub fn bubble_value(a: f64, b: f64, t: f64) -> f64 {
    let h = b - a;
    let s = (t - a) / h;
    6.0 * s * (1.0 - s) / h
}

/// Node value = local L2 projection evaluated at the node. Interior
/// Gauss-Lobatto nodes use their own cell, a shared vertex uses the cell
/// on its left, the first vertex uses the first cell.
#[derive(Debug, Clone)]
pub struct NodalLocalProjection {
    breaks: Vec<f64>,
    deg: usize,
    zero_bc: bool,
    nodal_to_modal: Vec<DMatrix<f64>>,
}

impl NodalLocalProjection {
    pub fn new(mesh: &Mesh1d, deg: usize, zero_bc: bool) -> Result<Self> {
        if deg < 1 {
            return Err(Error::UnsupportedDegree("nodal interpolation needs degree >= 1".into()));
        }
        Ok(Self {
            breaks: mesh.breakpoints().to_vec(),
            deg,
            zero_bc,
            nodal_to_modal: (0..mesh.n_cells())
                .map(|i| lobatto_nodal_to_modal(deg, mesh.h(i)))
                .collect(),
        })
    }

    pub fn apply_column(&self, col: &PiecewisePoly) -> Result<PiecewisePoly> {
        same_span(col.breaks(), &self.breaks)?;
        let deg = self.deg;
        let n = self.breaks.len() - 1;
        let nodes = lobatto_nodes(deg);
        let mut out = PiecewisePoly::zeros(self.breaks.clone(), deg);
        let mut carry = 0.0;
        for i in 0..n {
            let (a, b) = (self.breaks[i], self.breaks[i + 1]);
            let h = b - a;
            let proj = col.moments_on(a, b, deg);
            let mut nodal: Vec<f64> = nodes.iter().map(|&xi| legendre::eval_ref(&proj, h, xi)).collect();
            nodal[deg] = legendre::eval_right_end(&proj, h);
            if i == 0 {
                nodal[0] = if self.zero_bc {
                    0.0
                } else {
                    legendre::eval_left_end(&proj, h)
                };
            } else {
                nodal[0] = carry;
            }
            if self.zero_bc && i == n - 1 {
                nodal[deg] = 0.0;
            }
            carry = nodal[deg];
            let modal = &self.nodal_to_modal[i] * nalgebra::DVector::from_vec(nodal);
            out.cell_mut(i).copy_from_slice(modal.as_slice());
        }
        Ok(out)
    }
}

/// Scott-Zhang type time interpolant onto continuous piecewise `P_k`.
#[derive(Debug, Clone)]
pub struct TimeInterpolantSz {
    mesh: TimeMesh,
    inner: NodalLocalProjection,
}

impl TimeInterpolantSz {
    pub fn new(mesh: &TimeMesh, k: usize) -> Result<Self> {
        let ratio = mesh.max_neighbour_ratio();
        if ratio > 2.0 * (1.0 + 1e-12) {
            return Err(Error::Grading(ratio));
        }
        Ok(Self {
            mesh: mesh.clone(),
            inner: NodalLocalProjection::new(mesh, k, false)?,
        })
    }

    pub fn apply_column(&self, col: &PiecewisePoly) -> Result<PiecewisePoly> {
        self.inner.apply_column(col)
    }

    pub fn apply(&self, v: &TensorPolyField) -> Result<TensorPolyField> {
        let f = v.flags();
        Ok(v
            .map_time(&self.mesh, self.inner.deg, |c| self.apply_column(c))?
            .with_flags(Continuity {
                in_t: true,
                in_x: f.in_x,
                zero_trace: f.zero_trace,
            }))
    }
}

/// Quasi-interpolant onto `L^1_{l,0}(T_x)`, applied to every time mode.
#[derive(Debug, Clone)]
pub struct SpaceInterpolant {
    mesh: SpaceMesh,
    inner: NodalLocalProjection,
}

impl SpaceInterpolant {
    pub fn new(mesh: &SpaceMesh, l: usize) -> Result<Self> {
        Ok(Self {
            mesh: mesh.clone(),
            inner: NodalLocalProjection::new(mesh, l, true)?,
        })
    }

    pub fn degree(&self) -> usize {
        self.inner.deg
    }

    pub fn apply_slice(&self, g: &PiecewisePoly) -> Result<PiecewisePoly> {
        self.inner.apply_column(g)
    }

    pub fn apply(&self, g: &TensorPolyField) -> Result<TensorPolyField> {
        let f = g.flags();
        Ok(g
            .map_space(&self.mesh, self.inner.deg, |s| self.apply_slice(s))?
            .with_flags(Continuity {
                in_t: f.in_t,
                in_x: true,
                zero_trace: true,
            }))
    }
}

/// Interpolant onto continuous piecewise `P_{l+1}` (the 1D `RT_l`) with end
/// values and moments against `P_{l-1}` as degrees of freedom.
#[derive(Debug, Clone)]
pub struct RtInterpolant {
    mesh: SpaceMesh,
    l: usize,
}

impl RtInterpolant {
    pub fn new(mesh: &SpaceMesh, l: usize) -> Self {
        Self {
            mesh: mesh.clone(),
            l,
        }
    }

    pub fn apply_slice(&self, tau: &PiecewisePoly) -> Result<PiecewisePoly> {
        let breaks = self.mesh.breakpoints();
        same_span(tau.breaks(), breaks)?;
        let p = self.l + 1;
        let vals = breakpoint_values(tau, breaks);
        let mut out = PiecewisePoly::zeros(breaks.to_vec(), p);
        for i in 0..self.mesh.n_cells() {
            let (a, b) = self.mesh.cell(i);
            let mom = if self.l >= 1 {
                tau.moments_on(a, b, self.l - 1)
            } else {
                Vec::new()
            };
            let c = legendre::endpoint_moment_coeffs(p, b - a, vals[i], vals[i + 1], &mom);
            out.cell_mut(i).copy_from_slice(&c);
        }
        Ok(out)
    }

    pub fn apply(&self, tau: &TensorPolyField) -> Result<TensorPolyField> {
        require_continuous(tau, Direction::X)?;
        let f = tau.flags();
        Ok(tau
            .map_space(&self.mesh, self.l + 1, |s| self.apply_slice(s))?
            .with_flags(Continuity {
                in_t: f.in_t,
                in_x: true,
                zero_trace: false,
            }))
    }
}

/// `I_t` onto `L^1_k(target)`; the input must be continuous in time.
pub fn interp_time(v: &TensorPolyField, target: &TimeMesh, k: usize) -> Result<TensorPolyField> {
    TimeInterpolant::new(target, k)?.apply(v)
}

/// L2-stable time interpolant (local projections, left-cell rule at vertices).
pub fn interp_time_sz(v: &TensorPolyField, target: &TimeMesh, k: usize) -> Result<TensorPolyField> {
    TimeInterpolantSz::new(target, k)?.apply(v)
}

/// `I_x` onto `L^1_{l,0}(target)` for every time mode.
pub fn interp_space(g: &TensorPolyField, target: &SpaceMesh, l: usize) -> Result<TensorPolyField> {
    SpaceInterpolant::new(target, l)?.apply(g)
}

/// `I_RT` onto continuous piecewise `P_{l+1}(target)`; the input must be continuous in space.
pub fn interp_rt(tau: &TensorPolyField, target: &SpaceMesh, l: usize) -> Result<TensorPolyField> {
    RtInterpolant::new(target, l).apply(tau)
}
