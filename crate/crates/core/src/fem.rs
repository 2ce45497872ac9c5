//! Nodal views of the continuous finite element spaces `X_h^{k,l}`.
//!
//! On tensor meshes the degrees of freedom are tensor Gauss-Lobatto nodes;
//! on slab-refined meshes (bilinear only) they are the free vertices, with
//! hanging values eliminated through the constraint table.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::field::{Continuity, Partition, TensorPolyField};
use crate::legendre::{lobatto_nodal_to_modal, lobatto_nodes};
use crate::mesh::{IrregularMesh, TensorMesh, VertexKind};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum FemMesh {
    Tensor(TensorMesh),
    Irregular(Arc<IrregularMesh>),
}

#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: FemMesh,
    k: usize,
    l: usize,
    zero_bc: bool,
}

impl FemSpace {
    /// `L^1_k(T_t) (x) L^1_l(T_x)`, with zero values at `x = 0, L` when `zero_bc`.
    pub fn tensor(mesh: &TensorMesh, k: usize, l: usize, zero_bc: bool) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::UnsupportedDegree(format!(
                "continuous spaces need k, l >= 1 (got {k}, {l})"
            )));
        }
        Ok(Self {
            mesh: FemMesh::Tensor(mesh.clone()),
            k,
            l,
            zero_bc,
        })
    }

    /// Constrained bilinear space on a slab-refined mesh.
    pub fn irregular(mesh: Arc<IrregularMesh>) -> Self {
        Self {
            mesh: FemMesh::Irregular(mesh),
            k: 1,
            l: 1,
            zero_bc: true,
        }
    }

    pub fn mesh(&self) -> &FemMesh {
        &self.mesh
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.k, self.l)
    }

    pub fn zero_bc(&self) -> bool {
        self.zero_bc
    }

    fn x_nodes(&self, m: &TensorMesh) -> (usize, usize) {
        let total = m.space.n_cells() * self.l + 1;
        if self.zero_bc {
            (1, total - 1)
        } else {
            (0, total)
        }
    }

    pub fn n_time_nodes(&self) -> usize {
        match &self.mesh {
            FemMesh::Tensor(m) => m.time.n_cells() * self.k + 1,
            FemMesh::Irregular(_) => 0,
        }
    }

    pub fn n_dofs(&self) -> usize {
        match &self.mesh {
            FemMesh::Tensor(m) => {
                let (a, b) = self.x_nodes(m);
                self.n_time_nodes() * (b - a)
            }
            FemMesh::Irregular(m) => m.free_vertices().len(),
        }
    }

    fn node_coord(breaks: &[f64], deg: usize, i: usize) -> f64 {
        let n = breaks.len() - 1;
        let c = (i / deg).min(n - 1);
        let local = i - c * deg;
        let xi = lobatto_nodes(deg)[local];
        if local == 0 {
            breaks[c]
        } else if local == deg {
            breaks[c + 1]
        } else {
            0.5 * (breaks[c] + breaks[c + 1]) + 0.5 * (breaks[c + 1] - breaks[c]) * xi
        }
    }

    /// Coordinates `(t, x)` of every degree of freedom, in dof order.
    pub fn dof_coordinates(&self) -> Vec<(f64, f64)> {
        match &self.mesh {
            FemMesh::Tensor(m) => {
                let (a, b) = self.x_nodes(m);
                let mut out = Vec::with_capacity(self.n_dofs());
                for i in 0..self.n_time_nodes() {
                    let t = Self::node_coord(m.time.breakpoints(), self.k, i);
                    for j in a..b {
                        out.push((t, Self::node_coord(m.space.breakpoints(), self.l, j)));
                    }
                }
                out
            }
            FemMesh::Irregular(m) => m.free_vertices().iter().map(|&v| m.vertices()[v]).collect(),
        }
    }

    /// Nodal interpolation of a continuous field.
    pub fn interpolate(self: &Arc<Self>, field: &TensorPolyField) -> FemFunction {
        let coeffs = self
            .dof_coordinates()
            .iter()
            .map(|&(t, x)| field.eval(t, x))
            .collect();
        FemFunction {
            space: self.clone(),
            coeffs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FemFunction {
    space: Arc<FemSpace>,
    coeffs: Vec<f64>,
}

impl FemFunction {
    pub fn new(space: Arc<FemSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                space.n_dofs(),
                coeffs.len()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Values at all vertices of an irregular mesh, hanging ones resolved.
    pub fn vertex_values(&self) -> Result<Vec<f64>> {
        let FemMesh::Irregular(m) = &self.space.mesh else {
            return Err(Error::IncompatibleMesh("vertex values need an irregular mesh".into()));
        };
        let mut vals = vec![0.0; m.vertices().len()];
        for (i, &v) in m.free_vertices().iter().enumerate() {
            vals[v] = self.coeffs[i];
        }
        for c in m.constraints() {
            vals[c.hanging] = c.weights[0] * vals[c.parents[0]] + c.weights[1] * vals[c.parents[1]];
        }
        for (v, val) in vals.iter_mut().enumerate() {
            if m.vertex_kind(v) == VertexKind::Boundary {
                *val = 0.0;
            }
        }
        Ok(vals)
    }

    /// Expansion into the Legendre representation.
    pub fn to_field(&self) -> Result<TensorPolyField> {
        let (k, l) = (self.space.k, self.space.l);
        let mut field = match &self.space.mesh {
            FemMesh::Tensor(m) => {
                let n = m.space.n_cells();
                let (a, b) = self.space.x_nodes(m);
                let width = b - a;
                let total_x = n * l + 1;
                let mut f = TensorPolyField::zeros(Partition::Tensor(m.clone()), k, l);
                for it in 0..m.time.n_cells() {
                    let vt = lobatto_nodal_to_modal(k, m.time.h(it));
                    for ix in 0..n {
                        let vx = lobatto_nodal_to_modal(l, m.space.h(ix));
                        let mut nodal = DMatrix::zeros(k + 1, l + 1);
                        for p in 0..=k {
                            for q in 0..=l {
                                let gj = ix * l + q;
                                if self.space.zero_bc && (gj == 0 || gj == total_x - 1) {
                                    continue;
                                }
                                nodal[(p, q)] = self.coeffs[(it * k + p) * width + gj - a];
                            }
                        }
                        let modal = &vt * nodal * vx.transpose();
                        let blk = f.block_mut(it * n + ix);
                        for p in 0..=k {
                            for q in 0..=l {
                                blk[p * (l + 1) + q] = modal[(p, q)];
                            }
                        }
                    }
                }
                f
            }
            FemMesh::Irregular(m) => {
                let vals = self.vertex_values()?;
                let mut f = TensorPolyField::zeros(Partition::Irregular(m.clone()), 1, 1);
                for (c, cell) in m.cells().iter().enumerate() {
                    let vt = lobatto_nodal_to_modal(1, cell.rect.ht());
                    let vx = lobatto_nodal_to_modal(1, cell.rect.hx());
                    let corners = m.cell_corners(c);
                    let nodal = DMatrix::from_row_slice(
                        2,
                        2,
                        &[
                            vals[corners[0]],
                            vals[corners[1]],
                            vals[corners[2]],
                            vals[corners[3]],
                        ],
                    );
                    let modal = &vt * nodal * vx.transpose();
                    f.block_mut(c)
                        .copy_from_slice(&[modal[(0, 0)], modal[(0, 1)], modal[(1, 0)], modal[(1, 1)]]);
                }
                f
            }
        };
        field = field.with_flags(Continuity {
            in_t: true,
            in_x: true,
            zero_trace: self.space.zero_bc,
        });
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{project_analytic, AnalyticField, Smoothness};
    use crate::mesh::{build_figure1_mesh, build_uniform_tensor};
    use approx::assert_relative_eq;

    #[test]
    fn tensor_round_trip() {
        let m = build_uniform_tensor(1.0, 2.0, 3, 4).unwrap();
        for (k, l) in [(1, 1), (2, 3), (3, 2)] {
            let space = Arc::new(FemSpace::tensor(&m, k, l, true).unwrap());
            let coeffs: Vec<f64> = (0..space.n_dofs()).map(|i| ((i * 7 % 11) as f64).sin()).collect();
            let f = FemFunction::new(space.clone(), coeffs.clone()).unwrap();
            let field = f.to_field().unwrap();
            assert!(field.max_trace().unwrap() < 1e-13);
            let back = space.interpolate(&field);
            for (a, b) in coeffs.iter().zip(back.coeffs()) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn polynomials_in_the_space_are_reproduced() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 2).unwrap();
        let space = Arc::new(FemSpace::tensor(&m, 2, 2, true).unwrap());
        let f = AnalyticField::new("", Smoothness::Polynomial, |t, x| t * t * x * (1.0 - x));
        let p = project_analytic(&f, &m, 2, 2).unwrap();
        let back = space.interpolate(&p).to_field().unwrap();
        for (a, b) in p.coeffs().iter().zip(back.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn hanging_values_follow_constraints() {
        let base = build_uniform_tensor(1.0, 1.0, 4, 2).unwrap();
        let mesh = Arc::new(build_figure1_mesh(&base, 2).unwrap());
        let space = Arc::new(FemSpace::irregular(mesh.clone()));
        let coeffs: Vec<f64> = (0..space.n_dofs()).map(|i| 1.0 + i as f64).collect();
        let f = FemFunction::new(space.clone(), coeffs.clone()).unwrap();
        let vals = f.vertex_values().unwrap();
        for c in mesh.constraints() {
            assert_relative_eq!(vals[c.hanging], 0.5 * (vals[c.parents[0]] + vals[c.parents[1]]));
        }
        let field = f.to_field().unwrap();
        let back = space.interpolate(&field);
        for (a, b) in coeffs.iter().zip(back.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        // conformity across a hanging edge: both sides agree at the hanging vertex
        for c in mesh.constraints() {
            let (t, x) = mesh.vertices()[c.hanging];
            for cell in mesh.cells_at_vertex(c.hanging) {
                assert_relative_eq!(field.eval_in_cell(cell, t, x), vals[c.hanging], epsilon = 1e-13);
            }
        }
    }
}
