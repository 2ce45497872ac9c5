//! Piecewise tensor-product polynomials on space-time meshes.
//!
//! Each cell carries a `(pt + 1) x (px + 1)` block of coefficients in the
//! product of the orthonormal Legendre bases of `K_t` and `K_x`; entry
//! `(a, b)` sits at `a * (px + 1) + b`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::legendre::{self, gauss_legendre, ortho_values};
use crate::mesh::{IrregularMesh, Rect, SpaceMesh, TensorMesh, TimeMesh};
use crate::pw1d::{locate, PiecewisePoly, GEOM_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    T,
    X,
}

/// The mesh a field lives on.
#[derive(Debug, Clone)]
pub enum Partition {
    Tensor(TensorMesh),
    Irregular(Arc<IrregularMesh>),
}

impl Partition {
    pub fn n_cells(&self) -> usize {
        match self {
            Partition::Tensor(m) => m.n_cells(),
            Partition::Irregular(m) => m.n_cells(),
        }
    }

    pub fn rect(&self, c: usize) -> Rect {
        match self {
            Partition::Tensor(m) => m.rect(c),
            Partition::Irregular(m) => m.cells()[c].rect,
        }
    }

    pub fn locate(&self, t: f64, x: f64) -> usize {
        match self {
            Partition::Tensor(m) => m.index(m.time.locate(t), m.space.locate(x)),
            Partition::Irregular(m) => m.locate(t, x),
        }
    }

    pub fn extents(&self) -> (f64, f64) {
        match self {
            Partition::Tensor(m) => (m.t_end(), m.length()),
            Partition::Irregular(m) => (m.base().t_end(), m.base().length()),
        }
    }

    pub fn as_tensor(&self) -> Result<&TensorMesh> {
        match self {
            Partition::Tensor(m) => Ok(m),
            Partition::Irregular(_) => Err(Error::IncompatibleMesh(
                "operation needs a tensor-product mesh".into(),
            )),
        }
    }

    fn same_as(&self, other: &Partition) -> bool {
        match (self, other) {
            (Partition::Tensor(a), Partition::Tensor(b)) => a == b,
            (Partition::Irregular(a), Partition::Irregular(b)) => {
                Arc::ptr_eq(a, b)
                    || (a.base() == b.base() && a.refined_slabs() == b.refined_slabs())
            }
            _ => false,
        }
    }
}

/// Continuity information carried along with a field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Continuity {
    pub in_t: bool,
    pub in_x: bool,
    pub zero_trace: bool,
}

#[derive(Debug, Clone)]
pub struct TensorPolyField {
    partition: Partition,
    pt: usize,
    px: usize,
    coeffs: Vec<f64>,
    flags: Continuity,
}

impl TensorPolyField {
    pub fn zeros(partition: Partition, pt: usize, px: usize) -> Self {
        let n = partition.n_cells() * (pt + 1) * (px + 1);
        Self {
            partition,
            pt,
            px,
            coeffs: vec![0.0; n],
            flags: Continuity {
                in_t: true,
                in_x: true,
                zero_trace: true,
            },
        }
    }

    pub fn from_blocks(partition: Partition, pt: usize, px: usize, coeffs: Vec<f64>) -> Result<Self> {
        let n = partition.n_cells() * (pt + 1) * (px + 1);
        if coeffs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            partition,
            pt,
            px,
            coeffs,
            flags: Continuity::default(),
        })
    }

    pub fn constant(mesh: &TensorMesh, value: f64) -> Self {
        let mut f = Self::zeros(Partition::Tensor(mesh.clone()), 0, 0);
        for c in 0..mesh.n_cells() {
            f.coeffs[c] = value * mesh.rect(c).area().sqrt();
        }
        f.flags.zero_trace = value == 0.0;
        f
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn tensor_mesh(&self) -> Result<&TensorMesh> {
        self.partition.as_tensor()
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.pt, self.px)
    }

    pub fn n_cells(&self) -> usize {
        self.partition.n_cells()
    }

    pub fn block_len(&self) -> usize {
        (self.pt + 1) * (self.px + 1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn block(&self, c: usize) -> &[f64] {
        let s = self.block_len();
        &self.coeffs[c * s..(c + 1) * s]
    }

    pub fn block_mut(&mut self, c: usize) -> &mut [f64] {
        let s = self.block_len();
        &mut self.coeffs[c * s..(c + 1) * s]
    }

    pub fn flags(&self) -> Continuity {
        self.flags
    }

    pub fn with_flags(mut self, flags: Continuity) -> Self {
        self.flags = flags;
        self
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval_in_cell(&self, c: usize, t: f64, x: f64) -> f64 {
        let r = self.partition.rect(c);
        let vt = ortho_values(self.pt, r.t0, r.t1, t);
        let vx = ortho_values(self.px, r.x0, r.x1, x);
        let block = self.block(c);
        let mut s = 0.0;
        for a in 0..=self.pt {
            let row = &block[a * (self.px + 1)..(a + 1) * (self.px + 1)];
            let inner: f64 = row.iter().zip(&vx).map(|(c, v)| c * v).sum();
            s += vt[a] * inner;
        }
        s
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.eval_in_cell(self.partition.locate(t, x), t, x)
    }

    /// Integral mean over cell `c`.
    pub fn cell_mean(&self, c: usize) -> Result<f64> {
        if c >= self.n_cells() {
            return Err(Error::UnknownCell(c));
        }
        Ok(self.block(c)[0] / self.partition.rect(c).area().sqrt())
    }

    pub fn integral(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.block(c)[0] * self.partition.rect(c).area().sqrt())
            .sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Same function with degrees `(pt, px)`; lowering a degree truncates.
    pub fn resized(&self, pt: usize, px: usize) -> Self {
        let mut out = Self::zeros(self.partition.clone(), pt, px);
        out.flags = self.flags;
        let (mt, mx) = (pt.min(self.pt), px.min(self.px));
        for c in 0..self.n_cells() {
            let src = self.block(c).to_vec();
            let dst = out.block_mut(c);
            for a in 0..=mt {
                for b in 0..=mx {
                    dst[a * (px + 1) + b] = src[a * (self.px + 1) + b];
                }
            }
        }
        out
    }

    /// `self + s * other` on the same partition.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        if !self.partition.same_as(&other.partition) {
            return Err(Error::IncompatibleMesh("fields live on different meshes".into()));
        }
        let pt = self.pt.max(other.pt);
        let px = self.px.max(other.px);
        let mut out = self.resized(pt, px);
        for c in 0..self.n_cells() {
            let src = other.block(c);
            let dst = out.block_mut(c);
            for a in 0..=other.pt {
                for b in 0..=other.px {
                    dst[a * (px + 1) + b] += s * src[a * (other.px + 1) + b];
                }
            }
        }
        out.flags = Continuity {
            in_t: self.flags.in_t && other.flags.in_t,
            in_x: self.flags.in_x && other.flags.in_x,
            zero_trace: self.flags.zero_trace && other.flags.zero_trace,
        };
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    /// Exact cellwise derivative; the degree drops by one in `dir`.
    pub fn differentiate(&self, dir: Direction) -> Self {
        let (pt, px) = match dir {
            Direction::T => (self.pt.saturating_sub(1), self.px),
            Direction::X => (self.pt, self.px.saturating_sub(1)),
        };
        let mut out = Self::zeros(self.partition.clone(), pt, px);
        out.flags = Continuity::default();
        for c in 0..self.n_cells() {
            let r = self.partition.rect(c);
            let src = self.block(c);
            let mut dst = vec![0.0; (pt + 1) * (px + 1)];
            match dir {
                Direction::T => {
                    for b in 0..=self.px {
                        let col: Vec<f64> = (0..=self.pt).map(|a| src[a * (self.px + 1) + b]).collect();
                        let d = legendre::derivative(&col, r.ht());
                        for (a, v) in d.iter().enumerate().take(pt + 1) {
                            dst[a * (px + 1) + b] = *v;
                        }
                    }
                }
                Direction::X => {
                    for a in 0..=self.pt {
                        let row = &src[a * (self.px + 1)..(a + 1) * (self.px + 1)];
                        let d = legendre::derivative(row, r.hx());
                        for (b, v) in d.iter().enumerate().take(px + 1) {
                            dst[a * (px + 1) + b] = *v;
                        }
                    }
                }
            }
            out.block_mut(c).copy_from_slice(&dst);
        }
        out
    }

    /// Time column of x-mode `b` over space cell `ix` (tensor meshes).
    pub fn t_column(&self, ix: usize, b: usize) -> Result<PiecewisePoly> {
        let m = self.tensor_mesh()?;
        let n = m.space.n_cells();
        let mut coeffs = Vec::with_capacity(m.time.n_cells() * (self.pt + 1));
        for it in 0..m.time.n_cells() {
            let blk = self.block(it * n + ix);
            for a in 0..=self.pt {
                coeffs.push(blk[a * (self.px + 1) + b]);
            }
        }
        Ok(PiecewisePoly::from_coeffs(
            m.time.breakpoints().to_vec(),
            self.pt,
            coeffs,
        ))
    }

    /// Space slice of t-mode `a` over time cell `it` (tensor meshes).
    pub fn x_slice(&self, it: usize, a: usize) -> Result<PiecewisePoly> {
        let m = self.tensor_mesh()?;
        let n = m.space.n_cells();
        let mut coeffs = Vec::with_capacity(n * (self.px + 1));
        for ix in 0..n {
            let blk = self.block(it * n + ix);
            coeffs.extend_from_slice(&blk[a * (self.px + 1)..(a + 1) * (self.px + 1)]);
        }
        Ok(PiecewisePoly::from_coeffs(
            m.space.breakpoints().to_vec(),
            self.px,
            coeffs,
        ))
    }

    /// The field on the cells `t.0..t.1` x `x.0..x.1`, translated so the
    /// sub-mesh starts at the origin.
    pub fn restrict(&self, t: (usize, usize), x: (usize, usize)) -> Result<Self> {
        let m = self.tensor_mesh()?;
        let (mt, n) = (m.time.n_cells(), m.space.n_cells());
        if t.0 >= t.1 || x.0 >= x.1 || t.1 > mt || x.1 > n {
            return Err(Error::IncompatibleMesh(format!(
                "cell range {t:?} x {x:?} outside a {mt} x {n} mesh"
            )));
        }
        let shift = |b: &[f64]| -> Vec<f64> {
            let mut out: Vec<f64> = b.iter().map(|v| v - b[0]).collect();
            out[0] = 0.0;
            out
        };
        let sub = TensorMesh::new(
            TimeMesh::new(shift(&m.time.breakpoints()[t.0..=t.1]))?,
            SpaceMesh::new(shift(&m.space.breakpoints()[x.0..=x.1]))?,
        );
        let mut coeffs = Vec::with_capacity((t.1 - t.0) * (x.1 - x.0) * self.block_len());
        for it in t.0..t.1 {
            for ix in x.0..x.1 {
                coeffs.extend_from_slice(self.block(it * n + ix));
            }
        }
        let flags = Continuity {
            zero_trace: self.flags.zero_trace && x == (0, n),
            ..self.flags
        };
        Ok(Self::from_blocks(Partition::Tensor(sub), self.pt, self.px, coeffs)?.with_flags(flags))
    }

    /// `x -> v(t, x)` (right-continuous in `t` at breakpoints).
    pub fn slice_at_time(&self, t: f64) -> Result<PiecewisePoly> {
        let m = self.tensor_mesh()?;
        let it = m.time.locate(t);
        let (t0, t1) = m.time.cell(it);
        let vt = ortho_values(self.pt, t0, t1, t);
        let n = m.space.n_cells();
        let mut coeffs = vec![0.0; n * (self.px + 1)];
        for ix in 0..n {
            let blk = self.block(it * n + ix);
            for a in 0..=self.pt {
                for b in 0..=self.px {
                    coeffs[ix * (self.px + 1) + b] += vt[a] * blk[a * (self.px + 1) + b];
                }
            }
        }
        Ok(PiecewisePoly::from_coeffs(
            m.space.breakpoints().to_vec(),
            self.px,
            coeffs,
        ))
    }

    /// Applies `f` to every time column; results must live on `target` with degree `out_deg`.
    pub fn map_time<F>(&self, target: &TimeMesh, out_deg: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&PiecewisePoly) -> Result<PiecewisePoly>,
    {
        let m = self.tensor_mesh()?;
        let n = m.space.n_cells();
        let mt = target.n_cells();
        let new_mesh = TensorMesh::new(target.clone(), m.space.clone());
        let mut out = Self::zeros(Partition::Tensor(new_mesh), out_deg, self.px);
        out.flags = Continuity::default();
        for ix in 0..n {
            for b in 0..=self.px {
                let col = f(&self.t_column(ix, b)?)?;
                if col.n_cells() != mt || col.degree() != out_deg {
                    return Err(Error::Assertion("time map returned a column of the wrong shape".into()));
                }
                for it in 0..mt {
                    let cell = col.cell(it);
                    let blk = out.block_mut(it * n + ix);
                    for a in 0..=out_deg {
                        blk[a * (self.px + 1) + b] = cell[a];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies `f` to every space slice; results must live on `target` with degree `out_deg`.
    pub fn map_space<F>(&self, target: &SpaceMesh, out_deg: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&PiecewisePoly) -> Result<PiecewisePoly>,
    {
        let m = self.tensor_mesh()?;
        let nt = m.time.n_cells();
        let n_new = target.n_cells();
        let new_mesh = TensorMesh::new(m.time.clone(), target.clone());
        let mut out = Self::zeros(Partition::Tensor(new_mesh), self.pt, out_deg);
        out.flags = Continuity::default();
        for it in 0..nt {
            for a in 0..=self.pt {
                let slice = f(&self.x_slice(it, a)?)?;
                if slice.n_cells() != n_new || slice.degree() != out_deg {
                    return Err(Error::Assertion("space map returned a slice of the wrong shape".into()));
                }
                for ix in 0..n_new {
                    let cell = slice.cell(ix);
                    let blk = out.block_mut(it * n_new + ix);
                    blk[a * (out_deg + 1)..(a + 1) * (out_deg + 1)].copy_from_slice(cell);
                }
            }
        }
        Ok(out)
    }

    /// L2 projection onto `target` (which must refine or be refined by the
    /// field's tensor mesh in each direction) with degrees `(pt, px)`.
    pub fn project_to(&self, target: &TensorMesh, pt: usize, px: usize) -> Result<Self> {
        let tb = target.time.breakpoints().to_vec();
        let xb = target.space.breakpoints().to_vec();
        let step = self.map_time(&target.time, pt, |c| Ok(c.project_onto(&tb, pt)))?;
        step.map_space(&target.space, px, |s| Ok(s.project_onto(&xb, px)))
    }

    /// Exact re-expansion on a tensor mesh whose every cell lies in one cell
    /// of the field's partition.
    pub fn prolong_to(&self, target: &TensorMesh) -> Result<Self> {
        let flags = self.flags;
        let out = match &self.partition {
            Partition::Tensor(m) => {
                crate::pw1d::check_refines(target.time.breakpoints(), m.time.breakpoints())?;
                crate::pw1d::check_refines(target.space.breakpoints(), m.space.breakpoints())?;
                self.project_to(target, self.pt, self.px)?
            }
            Partition::Irregular(_) => self.transfer_by_quadrature(target)?,
        };
        Ok(out.with_flags(flags))
    }

    fn transfer_by_quadrature(&self, target: &TensorMesh) -> Result<Self> {
        let (pt, px) = (self.pt, self.px);
        let rt = gauss_legendre(pt + 1);
        let rx = gauss_legendre(px + 1);
        let mut out = Self::zeros(Partition::Tensor(target.clone()), pt, px);
        let (te, le) = self.partition.extents();
        let tol = GEOM_TOL * te.max(le);
        for c in 0..target.n_cells() {
            let r = target.rect(c);
            let (tc, xc) = r.center();
            let src = self.partition.locate(tc, xc);
            if !self.partition.rect(src).contains_rect(&r, tol) {
                return Err(Error::IncompatibleMesh(
                    "target cell straddles several source cells".into(),
                ));
            }
            let mut blk = vec![0.0; (pt + 1) * (px + 1)];
            for (t, wt) in rt.mapped(r.t0, r.t1) {
                let vt = ortho_values(pt, r.t0, r.t1, t);
                for (x, wx) in rx.mapped(r.x0, r.x1) {
                    let vx = ortho_values(px, r.x0, r.x1, x);
                    let f = wt * wx * self.eval_in_cell(src, t, x);
                    for a in 0..=pt {
                        for b in 0..=px {
                            blk[a * (px + 1) + b] += f * vt[a] * vx[b];
                        }
                    }
                }
            }
            out.block_mut(c).copy_from_slice(&blk);
        }
        Ok(out)
    }

    /// Orthonormal moments of the field over `rect` against
    /// `P_qt(rect_t) x P_qx(rect_x)`; the rectangle must be a union of cells.
    pub fn moments_on_rect(&self, rect: &Rect, qt: usize, qx: usize) -> Result<Vec<f64>> {
        let m = self.tensor_mesh()?;
        let tol = GEOM_TOL * m.t_end().max(m.length());
        let tb = m.time.breakpoints();
        let xb = m.space.breakpoints();
        let it0 = locate(tb, rect.t0 + tol);
        let ix0 = locate(xb, rect.x0 + tol);
        let rt = legendre::rule_for_degree(self.pt + qt);
        let rx = legendre::rule_for_degree(self.px + qx);
        let mut out = vec![0.0; (qt + 1) * (qx + 1)];
        let n = m.space.n_cells();
        for it in it0..m.time.n_cells() {
            let (t0, t1) = m.time.cell(it);
            if t0 >= rect.t1 - tol {
                break;
            }
            if t0 < rect.t0 - tol || t1 > rect.t1 + tol {
                return Err(Error::IncompatibleMesh("rectangle not aligned with time cells".into()));
            }
            for ix in ix0..n {
                let (x0, x1) = m.space.cell(ix);
                if x0 >= rect.x1 - tol {
                    break;
                }
                if x0 < rect.x0 - tol || x1 > rect.x1 + tol {
                    return Err(Error::IncompatibleMesh("rectangle not aligned with space cells".into()));
                }
                let c = it * n + ix;
                for (t, wt) in rt.mapped(t0, t1) {
                    let vt = ortho_values(qt, rect.t0, rect.t1, t);
                    for (x, wx) in rx.mapped(x0, x1) {
                        let vx = ortho_values(qx, rect.x0, rect.x1, x);
                        let f = wt * wx * self.eval_in_cell(c, t, x);
                        for a in 0..=qt {
                            for b in 0..=qx {
                                out[a * (qx + 1) + b] += f * vt[a] * vx[b];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest jump across interior time breakpoints, relative to the largest one-sided value.
    pub fn relative_jump(&self, dir: Direction) -> Result<f64> {
        let m = self.tensor_mesh()?;
        let mut jump: f64 = 0.0;
        let mut size: f64 = 0.0;
        match dir {
            Direction::T => {
                for ix in 0..m.space.n_cells() {
                    for b in 0..=self.px {
                        let col = self.t_column(ix, b)?;
                        for i in 1..col.n_cells() {
                            let (l, r) = (col.left_limit(i), col.right_limit(i));
                            jump = jump.max((l - r).abs());
                            size = size.max(l.abs()).max(r.abs());
                        }
                    }
                }
            }
            Direction::X => {
                for it in 0..m.time.n_cells() {
                    for a in 0..=self.pt {
                        let s = self.x_slice(it, a)?;
                        for i in 1..s.n_cells() {
                            let (l, r) = (s.left_limit(i), s.right_limit(i));
                            jump = jump.max((l - r).abs());
                            size = size.max(l.abs()).max(r.abs());
                        }
                    }
                }
            }
        }
        Ok(if size > 0.0 { jump / size } else { jump })
    }

    /// Largest value of the field's trace coefficients at `x = 0` and `x = L`.
    pub fn max_trace(&self) -> Result<f64> {
        let m = self.tensor_mesh()?;
        let n = m.space.n_cells();
        let mut worst: f64 = 0.0;
        for it in 0..m.time.n_cells() {
            for a in 0..=self.pt {
                let s = self.x_slice(it, a)?;
                worst = worst
                    .max(s.right_limit(0).abs())
                    .max(s.left_limit(n).abs());
            }
        }
        Ok(worst)
    }

    /// Re-derives the continuity flags from the coefficients.
    pub fn detect_flags(&self, rel_tol: f64) -> Result<Continuity> {
        let scale = self.max_abs_coeff().max(f64::MIN_POSITIVE);
        Ok(Continuity {
            in_t: self.relative_jump(Direction::T)? <= rel_tol,
            in_x: self.relative_jump(Direction::X)? <= rel_tol,
            zero_trace: self.max_trace()? <= rel_tol * scale,
        })
    }

    /// Samples on a uniform `(nt + 1) x (nx + 1)` grid as `t,x,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, nt: usize, nx: usize) -> std::io::Result<()> {
        let (te, le) = self.partition.extents();
        writeln!(w, "t,x,value")?;
        for i in 0..=nt {
            let t = te * i as f64 / nt.max(1) as f64;
            for j in 0..=nx {
                let x = le * j as f64 / nx.max(1) as f64;
                writeln!(w, "{t},{x},{}", self.eval(t, x))?;
            }
        }
        Ok(())
    }
}

/// Callback type for analytic fields.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Polynomial,
    Smooth,
    Rough,
}

/// A function of `(t, x)` with optional derivative callbacks.
#[derive(Clone)]
pub struct AnalyticField {
    pub name: String,
    pub smoothness: Smoothness,
    f: ScalarFn,
    dt: Option<ScalarFn>,
    dx: Option<ScalarFn>,
    dxx: Option<ScalarFn>,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("name", &self.name)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl AnalyticField {
    pub fn new<F>(name: &str, smoothness: Smoothness, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            smoothness,
            f: Arc::new(f),
            dt: None,
            dx: None,
            dxx: None,
        }
    }

    pub fn with_dt<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.dt = Some(Arc::new(f));
        self
    }

    pub fn with_dx<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.dx = Some(Arc::new(f));
        self
    }

    pub fn with_dxx<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.dxx = Some(Arc::new(f));
        self
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn dt(&self) -> Option<&ScalarFn> {
        self.dt.as_ref()
    }

    pub fn dx(&self) -> Option<&ScalarFn> {
        self.dx.as_ref()
    }

    pub fn dxx(&self) -> Option<&ScalarFn> {
        self.dxx.as_ref()
    }

    /// Largest relative mismatch between the derivative callbacks and
    /// central differences at the given points.
    pub fn fd_check(&self, points: &[(f64, f64)]) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let rel = |exact: f64, approx: f64| (exact - approx).abs() / exact.abs().max(1.0);
        for &(t, x) in points {
            if let Some(d) = &self.dt {
                let fd = (self.eval(t + h, x) - self.eval(t - h, x)) / (2.0 * h);
                worst = worst.max(rel(d(t, x), fd));
            }
            if let Some(d) = &self.dx {
                let fd = (self.eval(t, x + h) - self.eval(t, x - h)) / (2.0 * h);
                worst = worst.max(rel(d(t, x), fd));
            }
            if let Some(d) = &self.dxx {
                let hh = 1e-4;
                let fd = (self.eval(t, x + hh) - 2.0 * self.eval(t, x) + self.eval(t, x - hh)) / (hh * hh);
                worst = worst.max(rel(d(t, x), fd));
            }
        }
        worst
    }
}

fn sample(f: &AnalyticField, t: f64, x: f64) -> Result<f64> {
    let v = f.eval(t, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(t, x))
    }
}

/// Reference matrix (`(p + 1) x samples`) of the cellwise L2 projection
/// with `p + 6` Gauss points; multiply by `sqrt(h)` on a cell of length `h`.
fn l2_sample_matrix(p: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(p + 6);
    let q = rule.len();
    let mut a = vec![0.0; (p + 1) * q];
    for (j, (&xi, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let vals = legendre::ortho_values_ref(p, 1.0, xi);
        for m in 0..=p {
            a[m * q + j] = 0.5 * w * vals[m];
        }
    }
    (rule.nodes.clone(), a)
}

/// Reference matrix of the endpoint/moment projection: samples are the two
/// end points followed by `p + 6` Gauss points.
fn commuting_sample_matrix(p: usize) -> (Vec<f64>, Vec<f64>) {
    let (gauss, l2) = l2_sample_matrix(p);
    let q = gauss.len();
    let ns = q + 2;
    let mut pts = vec![-1.0, 1.0];
    pts.extend_from_slice(&gauss);
    let mut a = vec![0.0; (p + 1) * ns];
    for j in 0..ns {
        let (fa, fb) = match j {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            _ => (0.0, 0.0),
        };
        let mom: Vec<f64> = (0..=p)
            .map(|m| if j >= 2 { l2[m * q + j - 2] } else { 0.0 })
            .collect();
        let c = legendre::endpoint_moment_coeffs(p, 1.0, fa, fb, &mom);
        for m in 0..=p {
            a[m * ns + j] = c[m];
        }
    }
    (pts, a)
}

fn project_with(
    f: &AnalyticField,
    mesh: &TensorMesh,
    pt: usize,
    px: usize,
    (pts_t, at): (Vec<f64>, Vec<f64>),
    (pts_x, ax): (Vec<f64>, Vec<f64>),
) -> Result<TensorPolyField> {
    let (nt, nx) = (pts_t.len(), pts_x.len());
    let mut out = TensorPolyField::zeros(Partition::Tensor(mesh.clone()), pt, px);
    let mut samples = vec![0.0; nt * nx];
    let mut tmp = vec![0.0; (pt + 1) * nx];
    for c in 0..mesh.n_cells() {
        let r = mesh.rect(c);
        for (i, &ti) in pts_t.iter().enumerate() {
            let t = 0.5 * (r.t0 + r.t1) + 0.5 * r.ht() * ti;
            let t = if ti == -1.0 { r.t0 } else if ti == 1.0 { r.t1 } else { t };
            for (j, &xj) in pts_x.iter().enumerate() {
                let x = 0.5 * (r.x0 + r.x1) + 0.5 * r.hx() * xj;
                let x = if xj == -1.0 { r.x0 } else if xj == 1.0 { r.x1 } else { x };
                samples[i * nx + j] = sample(f, t, x)?;
            }
        }
        tmp.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..=pt {
            for i in 0..nt {
                let w = at[a * nt + i];
                if w == 0.0 {
                    continue;
                }
                for j in 0..nx {
                    tmp[a * nx + j] += w * samples[i * nx + j];
                }
            }
        }
        let s = (r.ht() * r.hx()).sqrt();
        let blk = out.block_mut(c);
        for a in 0..=pt {
            for b in 0..=px {
                let v: f64 = (0..nx).map(|j| tmp[a * nx + j] * ax[b * nx + j]).sum();
                blk[a * (px + 1) + b] = s * v;
            }
        }
    }
    Ok(out)
}

/// Cellwise L2 projection of `f` onto `P_pt x P_px`.
pub fn project_analytic(
    f: &AnalyticField,
    mesh: &TensorMesh,
    pt: usize,
    px: usize,
) -> Result<TensorPolyField> {
    let out = project_with(f, mesh, pt, px, l2_sample_matrix(pt), l2_sample_matrix(px))?;
    Ok(out.with_flags(Continuity::default()))
}

/// Tensor endpoint/moment projection of `f` onto `P_pt x P_px` per cell
/// (`pt, px >= 1`). Values at cell vertices and edges are taken pointwise,
/// so the result is continuous in both directions and inherits zero values
/// of `f` on `x = 0` and `x = L`.
pub fn oracle_project(
    f: &AnalyticField,
    mesh: &TensorMesh,
    pt: usize,
    px: usize,
) -> Result<TensorPolyField> {
    if pt == 0 || px == 0 {
        return Err(Error::UnsupportedDegree(
            "oracle representation needs degrees >= 1".into(),
        ));
    }
    let out = project_with(
        f,
        mesh,
        pt,
        px,
        commuting_sample_matrix(pt),
        commuting_sample_matrix(px),
    )?;
    let scale = out.max_abs_coeff().max(f64::MIN_POSITIVE);
    let zero_trace = out.max_trace()? <= 1e-12 * scale;
    Ok(out.with_flags(Continuity {
        in_t: true,
        in_x: true,
        zero_trace,
    }))
}

/// Oracle representation of `f` for working mesh `mesh` and degrees `(k, l)`:
/// degrees `(k + 2, l + 2)` on the mesh refined `r` times in each direction.
pub fn oracle_field(
    f: &AnalyticField,
    mesh: &TensorMesh,
    k: usize,
    l: usize,
    r: usize,
) -> Result<TensorPolyField> {
    oracle_project(f, &mesh.refine(r, r), k + 2, l + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_tensor;
    use approx::assert_relative_eq;

    fn unit() -> TensorMesh {
        build_uniform_tensor(1.0, 1.0, 1, 1).unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        let m = build_uniform_tensor(1.0, 2.0, 3, 2).unwrap();
        let f = AnalyticField::new("one", Smoothness::Polynomial, |_, _| 1.0);
        let p = project_analytic(&f, &m, 1, 1).unwrap();
        for (t, x) in [(0.1, 0.3), (0.5, 1.9), (0.99, 1.0)] {
            assert_relative_eq!(p.eval(t, x), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn bilinear_product_is_exact() {
        let f = AnalyticField::new("tx", Smoothness::Polynomial, |t, x| t * x);
        let p = project_analytic(&f, &unit(), 1, 1).unwrap();
        for (t, x) in [(0.2, 0.7), (0.9, 0.1), (0.5, 0.5)] {
            assert_relative_eq!(p.eval(t, x), t * x, epsilon = 1e-14);
        }
    }

    #[test]
    fn sine_projection_at_midpoint() {
        let f = AnalyticField::new("sin", Smoothness::Smooth, |_, x| (std::f64::consts::PI * x).sin());
        let p = project_analytic(&f, &unit(), 0, 4).unwrap();
        assert!((p.eval(0.3, 0.5) - 1.0).abs() < 1e-4 * 10.0);
    }

    #[test]
    fn derivatives_are_exact() {
        let m = unit();
        let tx = project_analytic(&AnalyticField::new("", Smoothness::Polynomial, |t, x| t * x), &m, 1, 1).unwrap();
        let d = tx.differentiate(Direction::T);
        assert_relative_eq!(d.eval(0.3, 0.8), 0.8, epsilon = 1e-14);
        let x2 = project_analytic(&AnalyticField::new("", Smoothness::Polynomial, |_, x| x * x), &m, 0, 2).unwrap();
        assert_relative_eq!(x2.differentiate(Direction::X).eval(0.5, 0.3), 0.6, epsilon = 1e-13);
        let t2x = project_analytic(&AnalyticField::new("", Smoothness::Polynomial, |t, x| t * t * x), &m, 2, 1).unwrap();
        let a = t2x.differentiate(Direction::T).differentiate(Direction::X);
        let b = t2x.differentiate(Direction::X).differentiate(Direction::T);
        for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
            assert_relative_eq!(p, q, epsilon = 1e-13);
        }
        assert_relative_eq!(a.eval(0.25, 0.6), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn cell_means() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 1).unwrap();
        let c = TensorPolyField::constant(&m, 3.5);
        assert_relative_eq!(c.cell_mean(1).unwrap(), 3.5, epsilon = 1e-14);
        let x = project_analytic(&AnalyticField::new("", Smoothness::Polynomial, |_, x| x), &m, 0, 1).unwrap();
        assert_relative_eq!(x.cell_mean(0).unwrap(), 0.5, epsilon = 1e-14);
        let b = project_analytic(
            &AnalyticField::new("", Smoothness::Polynomial, |t, _| 6.0 * t * (1.0 - t)),
            &unit(),
            2,
            0,
        )
        .unwrap();
        assert_relative_eq!(b.cell_mean(0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(b.cell_mean(7), Err(Error::UnknownCell(7))));
    }

    #[test]
    fn oracle_projection_is_continuous_and_zero_trace() {
        let m = build_uniform_tensor(1.0, 1.0, 3, 4).unwrap();
        let f = AnalyticField::new("", Smoothness::Smooth, |t, x| {
            (std::f64::consts::PI * x).sin() * (1.0 + t).exp()
        });
        let p = oracle_project(&f, &m, 3, 3).unwrap();
        assert!(p.relative_jump(Direction::T).unwrap() < 1e-14);
        assert!(p.relative_jump(Direction::X).unwrap() < 1e-14);
        assert!(p.flags().zero_trace);
        assert!((p.eval(0.4, 0.37) - f.eval(0.4, 0.37)).abs() < 1e-3);
    }

    #[test]
    fn oracle_projection_reproduces_polynomials() {
        let m = build_uniform_tensor(2.0, 1.0, 2, 3).unwrap();
        let f = AnalyticField::new("", Smoothness::Polynomial, |t, x| t * t * t - 2.0 * t * x * x + x);
        let p = oracle_project(&f, &m, 3, 3).unwrap();
        for (t, x) in [(0.1, 0.2), (1.7, 0.9), (1.0, 0.5)] {
            assert_relative_eq!(p.eval(t, x), f.eval(t, x), epsilon = 1e-12);
        }
    }

    #[test]
    fn prolongation_is_exact() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 2).unwrap();
        let f = AnalyticField::new("", Smoothness::Smooth, |t, x| (t + 2.0 * x).cos());
        let p = project_analytic(&f, &m, 2, 3).unwrap();
        let q = p.prolong_to(&m.refine(3, 2)).unwrap();
        for (t, x) in [(0.1, 0.2), (0.7, 0.9), (0.45, 0.55)] {
            assert_relative_eq!(p.eval(t, x), q.eval(t, x), epsilon = 1e-13);
        }
        assert_relative_eq!(p.l2_norm_sq(), q.l2_norm_sq(), epsilon = 1e-12);
    }

    #[test]
    fn failing_callbacks_are_reported() {
        let f = AnalyticField::new("", Smoothness::Rough, |_, x| 1.0 / (x - x));
        assert!(matches!(project_analytic(&f, &unit(), 1, 1), Err(Error::Evaluation(_, _))));
    }

    #[test]
    fn finite_differences_match_derivative_callbacks() {
        let f = AnalyticField::new("", Smoothness::Smooth, |t, x| (t * x).sin())
            .with_dt(|t, x| x * (t * x).cos())
            .with_dx(|t, x| t * (t * x).cos())
            .with_dxx(|t, x| -t * t * (t * x).sin());
        assert!(f.fd_check(&[(0.3, 0.4), (0.8, 0.1), (0.5, 0.9)]) < 1e-6);
    }
}
