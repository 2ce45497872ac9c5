//! Space-time interpolants: the tensor operator `I_X = I_t (x) I_x`, its
//! L2-stable variant, the flux operator `I_Sigma`, the commuting pair
//! operator `I_Lambda`, and the bilinear operator on slab-refined meshes.

use std::sync::Arc;

use crate::fem::{FemFunction, FemSpace};
use crate::field::{Continuity, Direction, Partition, TensorPolyField};
use crate::interp1d::{interp_rt, interp_space, interp_time, interp_time_sz, project_space_onto, project_time_onto};
use crate::legendre::ortho_values;
use crate::mesh::{IrregularMesh, TensorMesh};
use crate::norms::{self, div};
use crate::pw1d::hminus1_profile;
use crate::{Error, Result};

/// Relative tolerance for the agreement of `I_x I_t` and `I_t I_x`.
pub const ORDER_TOL: f64 = 1e-11;
/// Relative tolerance for the commuting identity of `I_Lambda`.
pub const COMMUTING_TOL: f64 = 1e-10;

fn require_order_agreement(a: &TensorPolyField, b: &TensorPolyField) -> Result<()> {
    let scale = a.max_abs_coeff().max(b.max_abs_coeff());
    let diff = a.sub(b)?.max_abs_coeff();
    if diff > ORDER_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Assertion(format!(
            "I_x I_t and I_t I_x differ by {diff:e} (scale {scale:e})"
        )));
    }
    Ok(())
}

fn check_degrees(k: usize, l: usize) -> Result<()> {
    if k == 0 || l == 0 {
        return Err(Error::UnsupportedDegree(format!("need k, l >= 1 (got {k}, {l})")));
    }
    Ok(())
}

fn tensor_with<F>(v: &TensorPolyField, target: &TensorMesh, k: usize, l: usize, time: F) -> Result<TensorPolyField>
where
    F: Fn(&TensorPolyField, &crate::mesh::TimeMesh, usize) -> Result<TensorPolyField>,
{
    check_degrees(k, l)?;
    let a = interp_space(&time(v, &target.time, k)?, &target.space, l)?;
    let b = time(&interp_space(v, &target.space, l)?, &target.time, k)?;
    require_order_agreement(&a, &b)?;
    Ok(a.with_flags(Continuity {
        in_t: true,
        in_x: true,
        zero_trace: true,
    }))
}

/// `I_X v` as a field on `target` with degrees `(k, l)`. Both application
/// orders are evaluated and must agree.
pub fn interp_x_tensor_field(v: &TensorPolyField, target: &TensorMesh, k: usize, l: usize) -> Result<TensorPolyField> {
    tensor_with(v, target, k, l, interp_time)
}

/// `I_X v` as an element of `X_h^{k,l}`.
pub fn interp_x_tensor(v: &TensorPolyField, target: &TensorMesh, k: usize, l: usize) -> Result<FemFunction> {
    let field = interp_x_tensor_field(v, target, k, l)?;
    let space = Arc::new(FemSpace::tensor(target, k, l, true)?);
    Ok(space.interpolate(&field))
}

/// `I'_X v`, with the L2-stable time interpolant in place of `I_t`.
pub fn interp_x_tensor_prime_field(
    v: &TensorPolyField,
    target: &TensorMesh,
    k: usize,
    l: usize,
) -> Result<TensorPolyField> {
    tensor_with(v, target, k, l, interp_time_sz)
}

pub fn interp_x_tensor_prime(v: &TensorPolyField, target: &TensorMesh, k: usize, l: usize) -> Result<FemFunction> {
    let field = interp_x_tensor_prime_field(v, target, k, l)?;
    let space = Arc::new(FemSpace::tensor(target, k, l, true)?);
    Ok(space.interpolate(&field))
}

/// `I_Sigma tau = Pi_t^{k-1} I_RT tau`, degrees `(k - 1, l + 1)` on `target`.
pub fn interp_sigma(tau: &TensorPolyField, target: &TensorMesh, k: usize, l: usize) -> Result<TensorPolyField> {
    if k == 0 {
        return Err(Error::UnsupportedDegree("flux interpolation needs k >= 1".into()));
    }
    let rt = interp_rt(tau, &target.space, l)?;
    project_time_onto(&rt, &target.time, k - 1)
}

/// A pair `(v, tau)` together with its divergence `d_t v + d_x tau`.
#[derive(Debug, Clone)]
pub struct LambdaPair {
    pub v: TensorPolyField,
    pub tau: TensorPolyField,
    div: TensorPolyField,
}

impl LambdaPair {
    pub fn new(v: TensorPolyField, tau: TensorPolyField) -> Result<Self> {
        let d = div(&v, &tau)?;
        Ok(Self { v, tau, div: d })
    }

    pub fn div(&self) -> &TensorPolyField {
        &self.div
    }

    /// Difference between the cached divergence and a fresh one.
    pub fn div_drift(&self) -> Result<f64> {
        Ok(div(&self.v, &self.tau)?.sub(&self.div)?.max_abs_coeff())
    }

    pub fn norm(&self, kind: norms::NormKind) -> Result<f64> {
        norms::norm_pair(&self.v, &self.tau, kind, norms::Domain::All)
    }
}

/// Output of `I_Lambda` with the data needed to audit it.
#[derive(Debug, Clone)]
pub struct LambdaResult {
    pub pair: LambdaPair,
    /// `tau + w'`, the corrected flux on the input mesh.
    pub corrected_tau: TensorPolyField,
    /// `||div(out) - Pi_t Pi_x div(in)||_{L2(Q)}`.
    pub commuting_residual: f64,
    /// `||div(in)||_{L2(Q)}`.
    pub div_norm: f64,
    /// Magnitude of the terms cancelling in the divergence.
    pub scale: f64,
}

/// `w'` with `d_x w' = g` and `w = 0` at both ends of `Omega`, per time mode.
fn flux_correction(g: &TensorPolyField) -> Result<TensorPolyField> {
    let m = g.tensor_mesh()?;
    let (_, px) = g.degrees();
    g.map_space(&m.space, px + 1, |s| Ok(hminus1_profile(s)?.scaled(-1.0)))
}

/// `I_Lambda (v, tau) = (I_X v, I_Sigma(tau + w'))` where `d_x w' = d_t(v - I_X v)`.
/// The input must live on a tensor mesh refining `target`.
pub fn interp_lambda(pair: &LambdaPair, target: &TensorMesh, k: usize, l: usize) -> Result<LambdaResult> {
    let fine = pair.v.tensor_mesh()?.clone();
    if pair.tau.tensor_mesh()? != &fine {
        return Err(Error::IncompatibleMesh("v and tau must share a mesh".into()));
    }
    let vh = interp_x_tensor_field(&pair.v, target, k, l)?;
    let e = pair.v.sub(&vh.prolong_to(&fine)?)?;
    let w = flux_correction(&e.differentiate(Direction::T))?;
    let corrected = pair.tau.add(&w)?;
    let flux = interp_sigma(&corrected, target, k, l)?;
    let out = LambdaPair::new(vh, flux)?;

    let projected = project_time_onto(&project_space_onto(&pair.div, &target.space, l)?, &target.time, k - 1)?;
    let residual = norms::l2_sq(&out.div.sub(&projected)?, norms::Domain::All)?.sqrt();
    let div_norm = norms::l2_sq(&pair.div, norms::Domain::All)?.sqrt();
    let scale = norms::l2_sq(&pair.v.differentiate(Direction::T), norms::Domain::All)?.sqrt()
        + norms::l2_sq(&pair.tau.differentiate(Direction::X), norms::Domain::All)?.sqrt();
    if residual > COMMUTING_TOL * scale.max(div_norm).max(f64::MIN_POSITIVE) {
        return Err(Error::Assertion(format!(
            "commuting identity violated: residual {residual:e}, scale {scale:e}"
        )));
    }
    Ok(LambdaResult {
        pair: out,
        corrected_tau: corrected,
        commuting_residual: residual,
        div_norm,
        scale,
    })
}

/// Flux making `(v, tau)` divergence free:
/// `tau(t, x) = -d_x v(t, 0) - int_0^x d_t v(t, s) ds`.
/// For a solution of the heat equation this is `-d_x v`.
pub fn heat_flux(v: &TensorPolyField) -> Result<TensorPolyField> {
    let m = v.tensor_mesh()?.clone();
    let (pt, px) = v.degrees();
    if pt == 0 {
        return Err(Error::UnsupportedDegree("heat flux needs time degree >= 1".into()));
    }
    let dt = v.differentiate(Direction::T);
    let dx = v.differentiate(Direction::X);
    let big = dt.map_space(&m.space, px + 1, |s| Ok(s.antiderivative()))?;
    let mut tau = big.scaled(-1.0).resized(pt, px + 1);
    let n = m.space.n_cells();
    for it in 0..m.time.n_cells() {
        for a in 0..=pt {
            let c = -dx.x_slice(it, a)?.right_limit(0);
            for ix in 0..n {
                let h = m.space.h(ix);
                tau.block_mut(it * n + ix)[a * (px + 2)] += c * h.sqrt();
            }
        }
    }
    Ok(tau.with_flags(Continuity {
        in_t: true,
        in_x: true,
        zero_trace: false,
    }))
}

/// Cell `K(j)` used for vertex `j`: the lowest-level cell at the vertex,
/// ties broken by lattice time index and then lattice space index.
pub fn vertex_cell(mesh: &IrregularMesh, vertex: usize) -> usize {
    let cells = mesh.cells();
    mesh.cells_at_vertex(vertex)
        .into_iter()
        .min_by_key(|&c| (cells[c].level, cells[c].lattice.0, cells[c].lattice.1))
        .expect("every vertex belongs to a cell")
}

/// `I_X v` on a slab-refined mesh (`k = l = 1`): the free value at vertex
/// `j` is the bilinear L2 projection of `v` on `K(j)` evaluated at `j`.
/// `v` must live on a tensor mesh aligned with the mesh cells.
pub fn interp_x_irregular(v: &TensorPolyField, mesh: &Arc<IrregularMesh>, k: usize, l: usize) -> Result<FemFunction> {
    if k != 1 || l != 1 {
        return Err(Error::UnsupportedDegree(format!(
            "slab-refined meshes support k = l = 1 only (got {k}, {l})"
        )));
    }
    if matches!(v.partition(), Partition::Irregular(_)) {
        return Err(Error::IncompatibleMesh("input must live on a tensor mesh".into()));
    }
    let space = Arc::new(FemSpace::irregular(mesh.clone()));
    let mut values = Vec::with_capacity(space.n_dofs());
    for &j in mesh.free_vertices() {
        let rect = mesh.cells()[vertex_cell(mesh, j)].rect;
        let mom = v.moments_on_rect(&rect, 1, 1)?;
        let (t, x) = mesh.vertices()[j];
        let vt = ortho_values(1, rect.t0, rect.t1, t);
        let vx = ortho_values(1, rect.x0, rect.x1, x);
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += mom[a * 2 + b] * vt[a] * vx[b];
            }
        }
        values.push(s);
    }
    FemFunction::new(space, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{oracle_project, AnalyticField, Smoothness};
    use crate::mesh::{build_figure1_mesh, build_uniform_tensor};
    use crate::norms::{norm, NormKind};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn heat_mode() -> AnalyticField {
        AnalyticField::new("heat", Smoothness::Smooth, |t, x| (-PI * PI * t).exp() * (PI * x).sin())
    }

    #[test]
    fn tensor_reproduces_discrete_functions() {
        let m = build_uniform_tensor(1.0, 1.0, 3, 4).unwrap();
        let f = AnalyticField::new("p", Smoothness::Polynomial, |t, x| (1.0 + t * t) * x * (1.0 - x));
        let v = oracle_project(&f, &m, 2, 2).unwrap();
        let iv = interp_x_tensor_field(&v, &m, 2, 2).unwrap();
        assert!(iv.sub(&v).unwrap().max_abs_coeff() < 1e-12);
        let ivp = interp_x_tensor_prime_field(&v, &m, 2, 2).unwrap();
        assert!(ivp.sub(&v).unwrap().max_abs_coeff() < 1e-12);
        let fem = interp_x_tensor(&v, &m, 2, 2).unwrap();
        assert!(fem.to_field().unwrap().sub(&v).unwrap().max_abs_coeff() < 1e-12);
    }

    #[test]
    fn tensor_is_a_projection_for_rough_input() {
        let m = build_uniform_tensor(1.0, 1.0, 2, 3).unwrap();
        let v = oracle_project(&heat_mode(), &m.refine(2, 2), 3, 3).unwrap();
        let once = interp_x_tensor_field(&v, &m, 1, 1).unwrap();
        let twice = interp_x_tensor_field(&once, &m, 1, 1).unwrap();
        assert!(once.sub(&twice).unwrap().max_abs_coeff() < 1e-12);
        assert!(once.max_trace().unwrap() < 1e-13);
    }

    #[test]
    fn heat_flux_is_divergence_free() {
        let m = build_uniform_tensor(1.0, 1.0, 8, 8).unwrap();
        let v = oracle_project(&heat_mode(), &m, 4, 4).unwrap();
        let tau = heat_flux(&v).unwrap();
        let pair = LambdaPair::new(v.clone(), tau.clone()).unwrap();
        assert!(norm(pair.div(), NormKind::L2Q).unwrap() < 1e-10);
        // close to -d_x v for the heat mode
        let want = -PI * (-PI * PI * 0.3f64).exp() * (PI * 0.4f64).cos();
        assert_relative_eq!(tau.eval(0.3, 0.4), want, max_relative = 1e-3);
    }

    #[test]
    fn lambda_commutes_with_divergence() {
        let coarse = build_uniform_tensor(1.0, 1.0, 2, 3).unwrap();
        let fine = coarse.refine(2, 2);
        let v = oracle_project(&heat_mode(), &fine, 3, 3).unwrap();
        // a flux with non-zero divergence
        let g = AnalyticField::new("g", Smoothness::Smooth, |t, x| (t + 1.0) * (2.0 * x).cos());
        let tau = oracle_project(&g, &fine, 3, 3).unwrap();
        let pair = LambdaPair::new(v, tau).unwrap();
        for (k, l) in [(1, 1), (2, 1), (2, 2)] {
            let out = interp_lambda(&pair, &coarse, k, l).unwrap();
            assert!(out.commuting_residual <= 1e-10 * out.scale, "{k} {l}: {}", out.commuting_residual);
            assert_eq!(out.pair.tau.degrees(), (k - 1, l + 1));
            // the corrected flux keeps the divergence of the input pair after swapping v for I_X v
            let shifted = div(&out.pair.v.prolong_to(&fine).unwrap(), &out.corrected_tau).unwrap();
            assert!(shifted.sub(pair.div()).unwrap().max_abs_coeff() < 1e-10);
        }
    }

    #[test]
    fn irregular_reproduces_bilinears_on_conforming_mesh() {
        let base = build_uniform_tensor(1.0, 1.0, 2, 2).unwrap();
        let mesh = Arc::new(IrregularMesh::conforming(&base));
        let lin = AnalyticField::new("l", Smoothness::Polynomial, |t, x| (1.0 + t) * x.min(1.0 - x));
        let w = oracle_project(&lin, &mesh.lattice_mesh(), 1, 1).unwrap();
        let exact = interp_x_irregular(&w, &mesh, 1, 1).unwrap();
        for (i, &j) in mesh.free_vertices().iter().enumerate() {
            let (t, x) = mesh.vertices()[j];
            // the kink sits on a mesh line, so the cell projection is exact there
            assert_relative_eq!(exact.coeffs()[i], lin.eval(t, x), epsilon = 1e-12);
        }
    }

    #[test]
    fn irregular_handles_hanging_vertices() {
        let base = build_uniform_tensor(1.0, 1.0, 4, 2).unwrap();
        let mesh = Arc::new(build_figure1_mesh(&base, 2).unwrap());
        let f = AnalyticField::new("p", Smoothness::Polynomial, |t, x| (1.0 + t) * x * (1.0 - x));
        let v = oracle_project(&f, &mesh.lattice_mesh(), 1, 1).unwrap();
        let out = interp_x_irregular(&v, &mesh, 1, 1).unwrap();
        let field = out.to_field().unwrap();
        let on_lattice = field.prolong_to(&mesh.lattice_mesh()).unwrap();
        assert!(on_lattice.relative_jump(Direction::X).unwrap() < 1e-12);
        assert!(on_lattice.relative_jump(Direction::T).unwrap() < 1e-12);
        assert!(interp_x_irregular(&v, &mesh, 2, 1).is_err());
    }
}
