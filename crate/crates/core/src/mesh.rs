//! Time meshes, space meshes, their tensor products, and the periodically
//! slab-refined 1-irregular meshes with hanging vertices.

use std::collections::HashMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::pw1d::{locate, GEOM_TOL};
use crate::{Error, Result};

/// Strictly increasing breakpoints `0 = p_0 < ... < p_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1d {
    breakpoints: Vec<f64>,
}

impl Mesh1d {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidMesh("need at least one cell".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidMesh("first breakpoint must be 0".into()));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidMesh("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidMesh(format!("extent must be positive, got {length}")));
        }
        if cells == 0 {
            return Err(Error::InvalidMesh("cell count must be at least 1".into()));
        }
        let mut b: Vec<f64> = (0..=cells).map(|i| length * i as f64 / cells as f64).collect();
        b[cells] = length;
        Self::new(b)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn h(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.h(i)).fold(0.0, f64::max)
    }

    pub fn locate(&self, x: f64) -> usize {
        locate(&self.breakpoints, x)
    }

    pub fn is_uniform(&self) -> bool {
        let h0 = self.h(0);
        (0..self.n_cells()).all(|i| (self.h(i) - h0).abs() <= 1e-10 * h0)
    }

    /// Splits every cell into `r` equal parts; existing breakpoints are kept bit-for-bit.
    pub fn refine(&self, r: usize) -> Self {
        assert!(r >= 1);
        let mut b = Vec::with_capacity(self.n_cells() * r + 1);
        for i in 0..self.n_cells() {
            let (a, c) = self.cell(i);
            b.push(a);
            for s in 1..r {
                b.push(a + (c - a) * s as f64 / r as f64);
            }
        }
        b.push(self.length());
        Self { breakpoints: b }
    }

    /// Largest ratio between lengths of neighbouring cells.
    pub fn max_neighbour_ratio(&self) -> f64 {
        (1..self.n_cells())
            .map(|i| {
                let (p, q) = (self.h(i - 1), self.h(i));
                (p / q).max(q / p)
            })
            .fold(1.0, f64::max)
    }
}

/// Partition of `J = [0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeMesh(Mesh1d);

impl TimeMesh {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        Mesh1d::new(breakpoints).map(Self)
    }

    pub fn uniform(t_end: f64, cells: usize) -> Result<Self> {
        Mesh1d::uniform(t_end, cells).map(Self)
    }

    pub fn refine(&self, r: usize) -> Self {
        Self(self.0.refine(r))
    }

    pub fn t_end(&self) -> f64 {
        self.0.length()
    }
}

impl Deref for TimeMesh {
    type Target = Mesh1d;
    fn deref(&self) -> &Mesh1d {
        &self.0
    }
}

/// Partition of `Omega = (0, L)` with vertex and element patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceMesh(Mesh1d);

impl SpaceMesh {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        Mesh1d::new(breakpoints).map(Self)
    }

    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        Mesh1d::uniform(length, cells).map(Self)
    }

    pub fn refine(&self, r: usize) -> Self {
        Self(self.0.refine(r))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_cells() + 1
    }

    /// Cells `first..last` forming the vertex patch `omega_{x,j}`.
    pub fn vertex_patch(&self, j: usize) -> (usize, usize) {
        let n = self.n_cells();
        (j.saturating_sub(1), (j + 1).min(n))
    }

    /// Union of the vertex patches of all vertices in `omega_{x,j}`.
    pub fn second_vertex_patch(&self, j: usize) -> (usize, usize) {
        let n = self.n_cells();
        (j.saturating_sub(2), (j + 2).min(n))
    }

    /// `omega_{K_x}`: cell `i` and its neighbours.
    pub fn element_patch(&self, i: usize) -> (usize, usize) {
        let n = self.n_cells();
        (i.saturating_sub(1), (i + 2).min(n))
    }

    /// Diameter of `omega_{x,j}`.
    pub fn vertex_patch_size(&self, j: usize) -> f64 {
        let (a, b) = self.vertex_patch(j);
        self.breakpoints()[b] - self.breakpoints()[a]
    }
}

impl Deref for SpaceMesh {
    type Target = Mesh1d;
    fn deref(&self) -> &Mesh1d {
        &self.0
    }
}

/// Axis-aligned time-space rectangle `[t0, t1] x [x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Rect {
    pub fn new(t0: f64, t1: f64, x0: f64, x1: f64) -> Self {
        Self { t0, t1, x0, x1 }
    }

    pub fn ht(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn hx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn area(&self) -> f64 {
        self.ht() * self.hx()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.t0 + self.t1), 0.5 * (self.x0 + self.x1))
    }

    pub fn contains_point(&self, t: f64, x: f64, tol: f64) -> bool {
        t >= self.t0 - tol && t <= self.t1 + tol && x >= self.x0 - tol && x <= self.x1 + tol
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        self.contains_point(other.t0, other.x0, tol) && self.contains_point(other.t1, other.x1, tol)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.t0.min(other.t0),
            self.t1.max(other.t1),
            self.x0.min(other.x0),
            self.x1.max(other.x1),
        )
    }
}

/// `T_t (x) T_x`. Cell `(it, ix)` has index `it * N + ix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMesh {
    pub time: TimeMesh,
    pub space: SpaceMesh,
}

impl TensorMesh {
    pub fn new(time: TimeMesh, space: SpaceMesh) -> Self {
        Self { time, space }
    }

    pub fn n_cells(&self) -> usize {
        self.time.n_cells() * self.space.n_cells()
    }

    pub fn index(&self, it: usize, ix: usize) -> usize {
        it * self.space.n_cells() + ix
    }

    pub fn split(&self, cell: usize) -> (usize, usize) {
        let n = self.space.n_cells();
        (cell / n, cell % n)
    }

    pub fn rect(&self, cell: usize) -> Rect {
        let (it, ix) = self.split(cell);
        let (t0, t1) = self.time.cell(it);
        let (x0, x1) = self.space.cell(ix);
        Rect::new(t0, t1, x0, x1)
    }

    pub fn t_end(&self) -> f64 {
        self.time.t_end()
    }

    pub fn length(&self) -> f64 {
        self.space.length()
    }

    pub fn refine(&self, rt: usize, rx: usize) -> Self {
        Self::new(self.time.refine(rt), self.space.refine(rx))
    }

    /// `omega_{K_x}` of the cell as a rectangle over the same time interval.
    pub fn element_patch_rect(&self, cell: usize) -> Rect {
        let (it, ix) = self.split(cell);
        let (a, b) = self.space.element_patch(ix);
        let (t0, t1) = self.time.cell(it);
        Rect::new(t0, t1, self.space.breakpoints()[a], self.space.breakpoints()[b])
    }
}

/// Uniform `M x N` tensor mesh of `[0, T] x [0, L]`.
pub fn build_uniform_tensor(t_end: f64, length: f64, m: usize, n: usize) -> Result<TensorMesh> {
    Ok(TensorMesh::new(
        TimeMesh::uniform(t_end, m)?,
        SpaceMesh::uniform(length, n)?,
    ))
}

/// A tensor mesh with `h_t` tied to `h_x^alpha` by divisor rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTensor {
    pub mesh: TensorMesh,
    pub nominal_h_t: f64,
    pub h_t: f64,
    pub h_x: f64,
}

/// `T / m` closest to `h` over integers `m >= 1`.
pub fn nearest_divisor_step(t_end: f64, h: f64) -> (usize, f64) {
    let q = t_end / h;
    let lo = (q.floor() as usize).max(1);
    let hi = (q.ceil() as usize).max(1);
    let dl = (t_end / lo as f64 - h).abs();
    let dh = (t_end / hi as f64 - h).abs();
    let m = if dh < dl { hi } else { lo };
    (m, t_end / m as f64)
}

pub fn build_scaled_tensor(t_end: f64, length: f64, h_x: f64, alpha: f64) -> Result<ScaledTensor> {
    if !(length > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidMesh("extents must be positive".into()));
    }
    if !(h_x > 0.0 && h_x <= length) {
        return Err(Error::InvalidArgument(format!("h_x = {h_x} must lie in (0, L]")));
    }
    if !(1.0..=2.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside [1, 2]")));
    }
    let (n, hx) = nearest_divisor_step(length, h_x);
    let nominal = h_x.powf(alpha);
    if nominal > t_end {
        return Err(Error::InvalidArgument(format!(
            "h_x^alpha = {nominal} exceeds T = {t_end}"
        )));
    }
    let (m, ht) = nearest_divisor_step(t_end, nominal);
    Ok(ScaledTensor {
        mesh: build_uniform_tensor(t_end, length, m, n)?,
        nominal_h_t: nominal,
        h_t: ht,
        h_x: hx,
    })
}

/// Role of a vertex of an irregular mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Unconstrained interior vertex carrying the given degree of freedom.
    Free(usize),
    /// Vertex on `x = 0` or `x = L` (value zero).
    Boundary,
    /// Hanging vertex governed by the given constraint.
    Hanging(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub hanging: usize,
    pub parents: [usize; 2],
    pub weights: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrregularCell {
    pub rect: Rect,
    pub level: u8,
    /// Index of the base time slab.
    pub slab: usize,
    /// Position `(t, x)` on the half-step lattice of the base mesh (lower-left corner).
    pub lattice: (usize, usize),
}

/// Slab-refined cylindrical mesh: every `period`-th base time slab is
/// bisected in `t` and `x`. Vertices live on the half-step lattice.
#[derive(Debug, Clone)]
pub struct IrregularMesh {
    base: TensorMesh,
    period: Option<usize>,
    refined: Vec<bool>,
    cells: Vec<IrregularCell>,
    slab_first_cell: Vec<usize>,
    vertices: Vec<(f64, f64)>,
    vertex_lattice: Vec<(usize, usize)>,
    lattice_index: HashMap<(usize, usize), usize>,
    cell_corners: Vec<[usize; 4]>,
    vertex_cells: Vec<Vec<usize>>,
    kinds: Vec<VertexKind>,
    constraints: Vec<Constraint>,
    free: Vec<usize>,
}

impl IrregularMesh {
    /// Conforming fallback: no refined slab.
    pub fn conforming(base: &TensorMesh) -> Self {
        Self::assemble(base.clone(), None, vec![false; base.time.n_cells()])
    }

    fn half_coord(m: &Mesh1d, i: usize) -> f64 {
        if i % 2 == 0 {
            m.breakpoints()[i / 2]
        } else {
            let (a, b) = m.cell(i / 2);
            0.5 * (a + b)
        }
    }

    fn assemble(base: TensorMesh, period: Option<usize>, refined: Vec<bool>) -> Self {
        let nx = base.space.n_cells();
        let mut cells = Vec::new();
        let mut slab_first_cell = Vec::with_capacity(refined.len());
        for (s, &r) in refined.iter().enumerate() {
            slab_first_cell.push(cells.len());
            if r {
                for sub in 0..2 {
                    for jx in 0..2 * nx {
                        cells.push(((2 * s + sub, jx), (1, 1), 1u8, s));
                    }
                }
            } else {
                for ix in 0..nx {
                    cells.push(((2 * s, 2 * ix), (2, 2), 0u8, s));
                }
            }
        }
        let mut vertices = Vec::new();
        let mut vertex_lattice = Vec::new();
        let mut lattice_index = HashMap::new();
        let mut cell_corners = Vec::with_capacity(cells.len());
        let mut out_cells = Vec::with_capacity(cells.len());
        for &((lt, lx), (dt, dx), level, slab) in &cells {
            let mut corners = [0usize; 4];
            for (k, (ot, ox)) in [(0, 0), (0, dx), (dt, 0), (dt, dx)].into_iter().enumerate() {
                let key = (lt + ot, lx + ox);
                let id = *lattice_index.entry(key).or_insert_with(|| {
                    vertices.push((
                        Self::half_coord(&base.time, key.0),
                        Self::half_coord(&base.space, key.1),
                    ));
                    vertex_lattice.push(key);
                    vertices.len() - 1
                });
                corners[k] = id;
            }
            cell_corners.push(corners);
            out_cells.push(IrregularCell {
                rect: Rect::new(
                    Self::half_coord(&base.time, lt),
                    Self::half_coord(&base.time, lt + dt),
                    Self::half_coord(&base.space, lx),
                    Self::half_coord(&base.space, lx + dx),
                ),
                level,
                slab,
                lattice: (lt, lx),
            });
        }
        // hanging vertices: lattice points strictly inside an edge of some cell
        let mut hanging: HashMap<usize, [usize; 2]> = HashMap::new();
        for (c, &((lt, lx), (dt, dx), _, _)) in cells.iter().enumerate() {
            let corners = cell_corners[c];
            let edges = [
                (corners[0], corners[1], (lt, lx), (0, 1), dx),
                (corners[2], corners[3], (lt + dt, lx), (0, 1), dx),
                (corners[0], corners[2], (lt, lx), (1, 0), dt),
                (corners[1], corners[3], (lt, lx + dx), (1, 0), dt),
            ];
            for (a, b, start, dir, len) in edges {
                for s in 1..len {
                    let key = (start.0 + dir.0 * s, start.1 + dir.1 * s);
                    if let Some(&v) = lattice_index.get(&key) {
                        hanging.insert(v, [a, b]);
                    }
                }
            }
        }
        let mut vertex_cells = vec![Vec::new(); vertices.len()];
        for (c, corners) in cell_corners.iter().enumerate() {
            for &v in corners {
                vertex_cells[v].push(c);
            }
        }
        let last_x = 2 * nx;
        let mut kinds = vec![VertexKind::Boundary; vertices.len()];
        let mut constraints = Vec::new();
        let mut free = Vec::new();
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by_key(|&v| vertex_lattice[v]);
        for v in order {
            let (_, lx) = vertex_lattice[v];
            if let Some(&parents) = hanging.get(&v) {
                kinds[v] = VertexKind::Hanging(constraints.len());
                constraints.push(Constraint {
                    hanging: v,
                    parents,
                    weights: [0.5, 0.5],
                });
            } else if lx == 0 || lx == last_x {
                kinds[v] = VertexKind::Boundary;
            } else {
                kinds[v] = VertexKind::Free(free.len());
                free.push(v);
            }
        }
        Self {
            base,
            period,
            refined,
            cells: out_cells,
            slab_first_cell,
            vertices,
            vertex_lattice,
            lattice_index,
            cell_corners,
            vertex_cells,
            kinds,
            constraints,
            free,
        }
    }

    pub fn base(&self) -> &TensorMesh {
        &self.base
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn refined_slabs(&self) -> Vec<usize> {
        (0..self.refined.len()).filter(|&s| self.refined[s]).collect()
    }

    pub fn is_refined(&self, slab: usize) -> bool {
        self.refined[slab]
    }

    pub fn cells(&self) -> &[IrregularCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn vertex_kind(&self, v: usize) -> VertexKind {
        self.kinds[v]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Vertex ids of the free degrees of freedom, in dof order.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    /// Corners ordered `(t0,x0), (t0,x1), (t1,x0), (t1,x1)`.
    pub fn cell_corners(&self, c: usize) -> [usize; 4] {
        self.cell_corners[c]
    }

    pub fn vertex_at_lattice(&self, lt: usize, lx: usize) -> Option<usize> {
        self.lattice_index.get(&(lt, lx)).copied()
    }

    pub fn vertex_lattice(&self, v: usize) -> (usize, usize) {
        self.vertex_lattice[v]
    }

    /// Cell containing `(t, x)`; ties go to the later slab/cell as in `locate`.
    pub fn locate(&self, t: f64, x: f64) -> usize {
        let slab = self.base.time.locate(t);
        let first = self.slab_first_cell[slab];
        let nx = self.base.space.n_cells();
        let ix = self.base.space.locate(x);
        if self.refined[slab] {
            let (t0, t1) = self.base.time.cell(slab);
            let sub = usize::from(t >= 0.5 * (t0 + t1));
            let (x0, x1) = self.base.space.cell(ix);
            let half = usize::from(x >= 0.5 * (x0 + x1));
            first + sub * 2 * nx + 2 * ix + half
        } else {
            first + ix
        }
    }

    /// Cells having vertex `v` as a corner.
    pub fn cells_at_vertex(&self, v: usize) -> Vec<usize> {
        self.vertex_cells[v].clone()
    }

    /// Tensor mesh of the half-step lattice; it refines every cell.
    pub fn lattice_mesh(&self) -> TensorMesh {
        self.base.refine(2, 2)
    }

    /// Support of the constrained basis function of vertex `v`: cells with `v`
    /// as a corner plus cells with a hanging corner whose parent is `v`.
    pub fn basis_support(&self, v: usize) -> Vec<usize> {
        let mut out = self.cells_at_vertex(v);
        for con in &self.constraints {
            if con.parents.contains(&v) {
                out.extend(self.cells_at_vertex(con.hanging));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Dof vertices whose basis function does not vanish on cell `c`.
    pub fn cell_dof_vertices(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &v in &self.cell_corners[c] {
            match self.kinds[v] {
                VertexKind::Free(_) => out.push(v),
                VertexKind::Hanging(k) => {
                    for &p in &self.constraints[k].parents {
                        if matches!(self.kinds[p], VertexKind::Free(_)) {
                            out.push(p);
                        }
                    }
                }
                VertexKind::Boundary => {}
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `omega_K`: smallest cylinder containing the supports of all basis
    /// functions that touch `K` (including boundary-vertex hats).
    pub fn patch(&self, c: usize) -> Rect {
        let mut verts: Vec<usize> = Vec::new();
        for &v in &self.cell_corners[c] {
            match self.kinds[v] {
                VertexKind::Hanging(k) => verts.extend(self.constraints[k].parents),
                _ => verts.push(v),
            }
        }
        let mut r = self.cells[c].rect;
        for v in verts {
            for s in self.basis_support(v) {
                r = r.union(&self.cells[s].rect);
            }
        }
        r
    }

    /// Largest size ratio (in `t` or `x`) between cell `c` and any cell inside its patch.
    pub fn grading_ratio(&self, c: usize) -> f64 {
        let patch = self.patch(c);
        let me = self.cells[c].rect;
        let tol = GEOM_TOL * self.base.t_end().max(self.base.length());
        self.cells
            .iter()
            .filter(|k| patch.contains_rect(&k.rect, tol))
            .map(|k| {
                let rt = k.rect.ht() / me.ht();
                let rx = k.rect.hx() / me.hx();
                rt.max(1.0 / rt).max(rx).max(1.0 / rx)
            })
            .fold(1.0, f64::max)
    }

    /// Largest number of mesh vertices found strictly inside a single cell edge.
    pub fn max_vertices_per_edge(&self) -> usize {
        let mut worst = 0;
        for (c, cell) in self.cells.iter().enumerate() {
            let corners = self.cell_corners[c];
            let (lt, lx) = cell.lattice;
            let (lt1, lx1) = self.vertex_lattice[corners[3]];
            let (dt, dx) = (lt1 - lt, lx1 - lx);
            let edges = [
                ((lt, lx), (0, 1), dx),
                ((lt1, lx), (0, 1), dx),
                ((lt, lx), (1, 0), dt),
                ((lt, lx1), (1, 0), dt),
            ];
            for (start, dir, len) in edges {
                let count = (1..len)
                    .filter(|s| {
                        self.lattice_index
                            .contains_key(&(start.0 + dir.0 * s, start.1 + dir.1 * s))
                    })
                    .count();
                worst = worst.max(count);
            }
        }
        worst
    }

    pub fn to_document(&self) -> MeshDocument {
        MeshDocument::Irregular {
            time_breakpoints: self.base.time.breakpoints().to_vec(),
            space_breakpoints: self.base.space.breakpoints().to_vec(),
            period: self.period,
            rectangles: self
                .cells
                .iter()
                .map(|c| RectangleDoc {
                    t0: c.rect.t0,
                    t1: c.rect.t1,
                    x0: c.rect.x0,
                    x1: c.rect.x1,
                    level: c.level,
                })
                .collect(),
            vertices: self.vertices.iter().map(|&(t, x)| [t, x]).collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| {
                    (
                        c.hanging,
                        c.parents[0],
                        c.parents[1],
                        c.weights[0],
                        c.weights[1],
                    )
                })
                .collect(),
        }
    }
}

/// Refines every `period`-th time slab (slabs `period, 2 period, ...`,
/// counted from one) once in both directions.
pub fn build_figure1_mesh(base: &TensorMesh, period: usize) -> Result<IrregularMesh> {
    if !base.time.is_uniform() || !base.space.is_uniform() {
        return Err(Error::InvalidMesh("base mesh must be uniform".into()));
    }
    if period < 2 {
        return Err(Error::InvalidArgument(format!("period must be >= 2, got {period}")));
    }
    let m = base.time.n_cells();
    if m < period {
        return Err(Error::InvalidArgument(format!(
            "{m} time slabs cannot hold a refined slab with period {period}"
        )));
    }
    let refined = (0..m).map(|s| (s + 1) % period == 0).collect();
    Ok(IrregularMesh::assemble(base.clone(), Some(period), refined))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleDoc {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
    pub level: u8,
}

/// JSON description of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshDocument {
    Tensor {
        time_breakpoints: Vec<f64>,
        space_breakpoints: Vec<f64>,
    },
    Irregular {
        time_breakpoints: Vec<f64>,
        space_breakpoints: Vec<f64>,
        period: Option<usize>,
        rectangles: Vec<RectangleDoc>,
        vertices: Vec<[f64; 2]>,
        /// `(hanging, parent_a, parent_b, weight_a, weight_b)`
        constraints: Vec<(usize, usize, usize, f64, f64)>,
    },
}

impl TensorMesh {
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument::Tensor {
            time_breakpoints: self.time.breakpoints().to_vec(),
            space_breakpoints: self.space.breakpoints().to_vec(),
        }
    }
}

impl MeshDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mesh documents serialise")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_tensor_examples() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.n_cells(), 4);
        for c in 0..4 {
            let r = m.rect(c);
            assert_relative_eq!(r.ht(), 0.5);
            assert_relative_eq!(r.hx(), 0.5);
        }
        let m = build_uniform_tensor(1.0, 1.0, 1, 1).unwrap();
        assert_eq!(m.rect(0), Rect::new(0.0, 1.0, 0.0, 1.0));
        let m = build_uniform_tensor(1.0, 1.0, 4, 2).unwrap();
        assert_eq!(m.n_cells(), 8);
        for c in 0..8 {
            assert_relative_eq!(m.rect(c).ht(), 0.25);
            assert_relative_eq!(m.rect(c).hx(), 0.5);
        }
    }

    #[test]
    fn uniform_tensor_rejects_bad_input() {
        assert!(build_uniform_tensor(0.0, 1.0, 1, 1).is_err());
        assert!(build_uniform_tensor(1.0, -1.0, 1, 1).is_err());
        assert!(build_uniform_tensor(1.0, 1.0, 0, 1).is_err());
        assert!(build_uniform_tensor(1.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn scaled_tensor_examples() {
        let s = build_scaled_tensor(1.0, 1.0, 0.25, 2.0).unwrap();
        assert_relative_eq!(s.h_t, 0.0625);
        assert_eq!(s.mesh.time.n_cells(), 16);
        let s = build_scaled_tensor(1.0, 1.0, 0.25, 1.0).unwrap();
        assert_relative_eq!(s.h_t, 0.25);
        let s = build_scaled_tensor(1.0, 1.0, 0.1, 1.5).unwrap();
        assert_eq!(s.mesh.time.n_cells(), 32);
        assert_relative_eq!(s.h_t, 1.0 / 32.0);
        assert_relative_eq!(s.nominal_h_t, 0.1f64.powf(1.5));
        assert!(build_scaled_tensor(0.01, 1.0, 0.5, 1.0).is_err());
        assert!(build_scaled_tensor(1.0, 1.0, 0.5, 2.5).is_err());
    }

    #[test]
    fn refinement_keeps_breakpoints() {
        let m = Mesh1d::uniform(1.0, 3).unwrap();
        let f = m.refine(4);
        assert_eq!(f.n_cells(), 12);
        for (i, b) in m.breakpoints().iter().enumerate() {
            assert_eq!(*b, f.breakpoints()[4 * i]);
        }
    }

    #[test]
    fn figure1_reference_layout() {
        let base = build_uniform_tensor(2.0, 1.0, 14, 7).unwrap();
        let m = build_figure1_mesh(&base, 4).unwrap();
        assert_eq!(m.refined_slabs(), vec![3, 7, 11]);
        for s in [3, 7, 11] {
            let n = m.cells().iter().filter(|c| c.slab == s).count();
            assert_eq!(n, 2 * 14);
        }
        assert_eq!(m.n_cells(), 11 * 7 + 3 * 28);
        assert_eq!(m.max_vertices_per_edge(), 1);
    }

    #[test]
    fn figure1_small_bases() {
        let base = build_uniform_tensor(1.0, 1.0, 4, 1).unwrap();
        let m = build_figure1_mesh(&base, 4).unwrap();
        assert_eq!(m.refined_slabs(), vec![3]);
        // the refined slab is the last one: only its interface at t_3 has a coarse neighbour
        assert_eq!(m.constraints().len(), 1);
        let m = build_figure1_mesh(&base, 2).unwrap();
        assert_eq!(m.refined_slabs(), vec![1, 3]);
        assert_eq!(m.constraints().len(), 3);
        assert!(build_figure1_mesh(&base, 1).is_err());
        assert!(build_figure1_mesh(&build_uniform_tensor(1.0, 1.0, 3, 1).unwrap(), 4).is_err());
    }

    #[test]
    fn constraint_parents_bracket_the_hanging_vertex() {
        let base = build_uniform_tensor(1.0, 1.0, 8, 3).unwrap();
        let m = build_figure1_mesh(&base, 4).unwrap();
        for c in m.constraints() {
            let (ht, hx) = m.vertices()[c.hanging];
            let (at, ax) = m.vertices()[c.parents[0]];
            let (bt, bx) = m.vertices()[c.parents[1]];
            assert_relative_eq!(ht, 0.5 * (at + bt));
            assert_relative_eq!(hx, 0.5 * (ax + bx));
            assert!(!matches!(m.vertex_kind(c.parents[0]), VertexKind::Hanging(_)));
            assert!(!matches!(m.vertex_kind(c.parents[1]), VertexKind::Hanging(_)));
        }
    }

    #[test]
    fn locate_finds_containing_cell() {
        let base = build_uniform_tensor(1.0, 1.0, 8, 3).unwrap();
        let m = build_figure1_mesh(&base, 4).unwrap();
        for (i, c) in m.cells().iter().enumerate() {
            let (t, x) = c.rect.center();
            assert_eq!(m.locate(t, x), i);
        }
    }

    #[test]
    fn documents_round_trip_through_json() {
        let base = build_uniform_tensor(1.0, 1.0, 4, 2).unwrap();
        let doc = build_figure1_mesh(&base, 2).unwrap().to_document();
        let back: MeshDocument = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let doc = base.to_document();
        let back: MeshDocument = serde_json::from_str(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }
}
