//! Brute-force references: Gram-matrix best approximations in the norms of
//! the error bounds, Poincare and localization diagnostics, seeded random
//! fields, rate fitting and experiment reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::field::{oracle_field, AnalyticField, Direction, Partition, Smoothness, TensorPolyField};
use crate::interp1d::project_time_onto;
use crate::legendre::{legendre_values, lobatto_nodal_to_modal, ortho_values};
use crate::mesh::{IrregularMesh, SpaceMesh, TensorMesh, TimeMesh};
use crate::norms::{self, Domain, NormKind};
use crate::pw1d::{hminus1_profile, locate, PiecewisePoly, GEOM_TOL};
use crate::spacetime::{interp_x_tensor_field, interp_x_irregular, LambdaPair, LambdaResult};
use crate::{Error, Result};

/// Gram matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative orthogonality residual every best approximation must meet.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// random fields

/// Global polynomial on `[0, T] x [0, L]` with Legendre coefficients
/// `N(0, 1) * 0.5^(a + b)`; with `zero_trace` it is multiplied by `4x(L - x)/L^2`.
pub fn random_poly<R: rand::Rng>(
    rng: &mut R,
    t_end: f64,
    length: f64,
    deg_t: usize,
    deg_x: usize,
    zero_trace: bool,
) -> AnalyticField {
    let mut coeffs = vec![0.0; (deg_t + 1) * (deg_x + 1)];
    for a in 0..=deg_t {
        for b in 0..=deg_x {
            let z: f64 = StandardNormal.sample(rng);
            coeffs[a * (deg_x + 1) + b] = z * 0.5f64.powi((a + b) as i32);
        }
    }
    AnalyticField::new("random", Smoothness::Polynomial, move |t, x| {
        let pt = legendre_values(deg_t, 2.0 * t / t_end - 1.0);
        let px = legendre_values(deg_x, 2.0 * x / length - 1.0);
        let mut s = 0.0;
        for a in 0..=deg_t {
            for b in 0..=deg_x {
                s += coeffs[a * (deg_x + 1) + b] * pt[a] * px[b];
            }
        }
        if zero_trace {
            s * 4.0 * x * (length - x) / (length * length)
        } else {
            s
        }
    })
}

/// Oracle representation of a random polynomial for working mesh `mesh`
/// and degrees `(k, l)`.
pub fn random_field<R: rand::Rng>(
    rng: &mut R,
    mesh: &TensorMesh,
    k: usize,
    l: usize,
    r: usize,
    zero_trace: bool,
) -> Result<TensorPolyField> {
    let f = random_poly(rng, mesh.t_end(), mesh.length(), 6, 6, zero_trace);
    oracle_field(&f, mesh, k, l, r)
}

/// A random `(v, tau)` pair: `v` with zero trace, `tau` continuous in `x`.
pub fn random_pair<R: rand::Rng>(rng: &mut R, mesh: &TensorMesh, k: usize, l: usize, r: usize) -> Result<LambdaPair> {
    let v = random_field(rng, mesh, k, l, r, true)?;
    let tau = random_field(rng, mesh, k, l, r, false)?;
    LambdaPair::new(v, tau)
}

// ---------------------------------------------------------------------------
// best approximation

/// Inner products available to the one-dimensional Gram solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inner {
    L2,
    H1semi,
    /// Zero-boundary `H^{-1}` on the span of the operands.
    Hminus1,
}

impl Inner {
    fn of_norm(kind: NormKind) -> Result<Self> {
        match kind {
            NormKind::L2Q => Ok(Inner::L2),
            NormKind::L2H1semi => Ok(Inner::H1semi),
            NormKind::L2Hminus1 => Ok(Inner::Hminus1),
            other => Err(Error::InvalidArgument(format!("no best approximation in {other:?}"))),
        }
    }

    /// Maps a function to the representative whose L2 products give this inner product.
    fn representative(self, f: &PiecewisePoly) -> Result<PiecewisePoly> {
        match self {
            Inner::L2 => Ok(f.clone()),
            Inner::H1semi => Ok(f.derivative()),
            Inner::Hminus1 => hminus1_profile(f),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BestApprox1d {
    pub coeffs: Vec<f64>,
    pub minimizer: PiecewisePoly,
    pub value: f64,
    pub condition: f64,
    pub orthogonality: f64,
}

fn max_min_eigen(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// Minimizes `||target - sum c_i basis_i||` in `inner` by the normal equations.
/// All functions share the target's breakpoints.
pub fn best_approx_1d(target: &PiecewisePoly, basis: &[PiecewisePoly], inner: Inner) -> Result<BestApprox1d> {
    let g = inner.representative(target)?;
    let gn = g.l2_norm();
    if basis.is_empty() {
        return Ok(BestApprox1d {
            coeffs: Vec::new(),
            minimizer: PiecewisePoly::zeros(target.breaks().to_vec(), target.degree()),
            value: gn,
            condition: 1.0,
            orthogonality: 0.0,
        });
    }
    let reps = basis.iter().map(|b| inner.representative(b)).collect::<Result<Vec<_>>>()?;
    let n = basis.len();
    let gram = DMatrix::from_fn(n, n, |i, j| reps[i].dot(&reps[j]));
    let rhs = DVector::from_iterator(n, reps.iter().map(|r| r.dot(&g)));
    let (max, min) = max_min_eigen(&gram);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::IllConditioned(condition))?;
    let c = chol.solve(&rhs);
    let mut rep_min = PiecewisePoly::zeros(g.breaks().to_vec(), g.degree());
    let mut minimizer = PiecewisePoly::zeros(target.breaks().to_vec(), target.degree());
    for i in 0..n {
        rep_min = rep_min.axpy(c[i], &reps[i]);
        minimizer = minimizer.axpy(c[i], &basis[i]);
    }
    let resid = g.axpy(-1.0, &rep_min);
    let mut orth: f64 = 0.0;
    for r in &reps {
        let denom = gn * r.l2_norm();
        if denom > 0.0 {
            orth = orth.max(resid.dot(r).abs() / denom);
        }
    }
    if orth > ORTHOGONALITY_TOL {
        return Err(Error::Assertion(format!("best approximation residual not orthogonal: {orth:e}")));
    }
    Ok(BestApprox1d {
        coeffs: c.iter().cloned().collect(),
        minimizer,
        value: resid.l2_norm(),
        condition,
        orthogonality: orth,
    })
}

/// Trial factor in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeTrial {
    /// `L2(K_t)`: no restriction in time.
    Full,
    /// `P_k` on the whole time range.
    Poly(usize),
}

/// Trial factor in space.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceTrial {
    /// No restriction in space.
    Full,
    /// `P_l` on the whole space range.
    Poly(usize),
    /// Continuous piecewise `P_deg` on `breaks` (absolute coordinates
    /// covering the space range), optionally pinned to zero at either end.
    Lagrange {
        breaks: Vec<f64>,
        deg: usize,
        pin_left: bool,
        pin_right: bool,
    },
}

/// `min ||target - w||` over `w` in `time (x) space` on the cell ranges.
#[derive(Debug, Clone)]
pub struct BestApproxProblem<'a> {
    pub target: &'a TensorPolyField,
    pub t_cells: (usize, usize),
    pub x_cells: (usize, usize),
    pub time: TimeTrial,
    pub space: SpaceTrial,
    pub norm: NormKind,
}

#[derive(Debug, Clone)]
pub struct BestApprox {
    /// Minimizer on the restricted mesh (translated to start at the origin).
    pub minimizer: TensorPolyField,
    pub value: f64,
    pub condition: f64,
    pub orthogonality: f64,
    pub dim: usize,
}

/// Basis of the space trial factor on `breaks`. Under the `H^1` seminorm one
/// direction of the constants is dropped so the Gram matrix stays definite.
fn space_basis(trial: &SpaceTrial, breaks: &[f64], offset: f64, inner: Inner) -> Result<Vec<PiecewisePoly>> {
    let (a, b) = (breaks[0], breaks[breaks.len() - 1]);
    let semi = inner == Inner::H1semi;
    match trial {
        SpaceTrial::Full => Ok(Vec::new()),
        SpaceTrial::Poly(l) => Ok((usize::from(semi)..=*l)
            .map(|m| PiecewisePoly::project(breaks.to_vec(), *l, |x| ortho_values(*l, a, b, x)[m]))
            .collect()),
        SpaceTrial::Lagrange {
            breaks: coarse,
            deg,
            pin_left,
            pin_right,
        } => {
            let coarse: Vec<f64> = coarse.iter().map(|x| x - offset).collect();
            let tol = GEOM_TOL * (b - a).max(1.0);
            if (coarse[0] - a).abs() > tol || (coarse[coarse.len() - 1] - b).abs() > tol {
                return Err(Error::IncompatibleMesh("Lagrange breakpoints must span the space range".into()));
            }
            let mut coarse = coarse;
            coarse[0] = a;
            let last = coarse.len() - 1;
            coarse[last] = b;
            let deg = *deg;
            let n = coarse.len() - 1;
            let n_nodes = n * deg + 1;
            let first = usize::from(*pin_left);
            let mut end = n_nodes - usize::from(*pin_right);
            if semi && !*pin_left && !*pin_right {
                end -= 1;
            }
            let mut out = Vec::with_capacity(end.saturating_sub(first));
            for node in first..end {
                let mut p = PiecewisePoly::zeros(coarse.clone(), deg);
                for c in 0..n {
                    let local = node as isize - (c * deg) as isize;
                    if local < 0 || local > deg as isize {
                        continue;
                    }
                    let v = lobatto_nodal_to_modal(deg, coarse[c + 1] - coarse[c]);
                    let col = v.column(local as usize);
                    p.cell_mut(c).copy_from_slice(col.as_slice());
                }
                out.push(p.prolong(breaks)?);
            }
            Ok(out)
        }
    }
}

pub fn best_approx(problem: &BestApproxProblem) -> Result<BestApprox> {
    let inner = Inner::of_norm(problem.norm)?;
    let m = problem.target.tensor_mesh()?;
    let offset = m.space.breakpoints()[problem.x_cells.0];
    let sub = problem.target.restrict(problem.t_cells, problem.x_cells)?;
    let sm = sub.tensor_mesh()?.clone();
    let (time_err_sq, q) = match problem.time {
        TimeTrial::Full => (0.0, sub.clone()),
        TimeTrial::Poly(k) => {
            let single = TimeMesh::new(vec![0.0, sm.t_end()])?;
            let q = project_time_onto(&sub, &single, k)?;
            let diff = sub.sub(&q.prolong_to(&sm)?)?;
            (norms::norm_on(&diff, problem.norm, Domain::All)?.powi(2), q)
        }
    };
    let basis = space_basis(&problem.space, sm.space.breakpoints(), offset, inner)?;
    let (_, px) = q.degrees();
    let out_deg = match &problem.space {
        SpaceTrial::Full => px,
        SpaceTrial::Poly(l) => *l,
        SpaceTrial::Lagrange { deg, .. } => *deg,
    };
    let mut space_err_sq = 0.0;
    let mut condition: f64 = 1.0;
    let mut orth: f64 = 0.0;
    let minimizer = q.map_space(&sm.space, out_deg, |s| {
        if matches!(problem.space, SpaceTrial::Full) {
            return Ok(s.clone());
        }
        let r = best_approx_1d(s, &basis, inner)?;
        space_err_sq += r.value * r.value;
        condition = condition.max(r.condition);
        orth = orth.max(r.orthogonality);
        Ok(r.minimizer.truncate(out_deg))
    })?;
    let nt = q.tensor_mesh()?.time.n_cells();
    let (pt, _) = q.degrees();
    Ok(BestApprox {
        minimizer,
        value: (time_err_sq + space_err_sq).max(0.0).sqrt(),
        condition,
        orthogonality: orth,
        dim: nt * (pt + 1) * basis.len().max(1),
    })
}

// ---------------------------------------------------------------------------
// Poincare

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoincareReport {
    /// `||v - <v>_K||_{L2(K)}`
    pub lhs: f64,
    /// `h_x ||d_x v||_{L2(K)}`
    pub space_term: f64,
    /// `(h_t / h_x) ||d_t v||_{L2(K_t; H^{-1}(K_x))}`
    pub time_term: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `h_x ||d_x v|| + h_t ||d_t v||_{L2(K)}`
    pub classic_rhs: f64,
    /// `min ||v - v_h||` over `P_k (x) P_l`
    pub general_lhs: f64,
    /// Sum of the weighted per-factor minima.
    pub general_rhs: f64,
}

/// Both sides of the parabolic Poincare inequality on cell `cell` of `v`'s
/// mesh, plus the classical variant and the general form for degrees `(k, l)`.
pub fn poincare_report(v: &TensorPolyField, cell: usize, k: usize, l: usize) -> Result<PoincareReport> {
    let m = v.tensor_mesh()?;
    if cell >= m.n_cells() {
        return Err(Error::UnknownCell(cell));
    }
    let (it, ix) = m.split(cell);
    let vk = v.restrict((it, it + 1), (ix, ix + 1))?;
    let rect = m.rect(cell);
    let (ht, hx) = (rect.ht(), rect.hx());
    let blk = vk.block(0);
    let lhs = blk[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
    let dx = norms::norm(&vk, NormKind::L2H1semi)?;
    let dt = vk.differentiate(Direction::T);
    let dt_h = norms::norm(&dt, NormKind::L2Hminus1)?;
    let dt_l2 = norms::norm(&dt, NormKind::L2Q)?;
    let space_term = hx * dx;
    let time_term = ht / hx * dt_h;
    let rhs = space_term + time_term;
    let one = |time, space, norm, target: &TensorPolyField| -> Result<f64> {
        Ok(best_approx(&BestApproxProblem {
            target,
            t_cells: (0, 1),
            x_cells: (0, 1),
            time,
            space,
            norm,
        })?
        .value)
    };
    let general_lhs = one(TimeTrial::Poly(k), SpaceTrial::Poly(l), NormKind::L2Q, &vk)?;
    let gx = one(TimeTrial::Full, SpaceTrial::Poly(l), NormKind::L2H1semi, &vk)?;
    let gt = if k == 0 {
        dt_h
    } else {
        one(TimeTrial::Poly(k - 1), SpaceTrial::Full, NormKind::L2Hminus1, &dt)?
    };
    Ok(PoincareReport {
        lhs,
        space_term,
        time_term,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        classic_rhs: hx * dx + ht * dt_l2,
        general_lhs,
        general_rhs: hx * gx + ht / hx * gt,
    })
}

/// Product `v_t(t) v_x(x)` of random polynomials on a single cell with zero mean.
pub fn random_product_field<R: rand::Rng>(rng: &mut R, ht: f64, hx: f64, k: usize, l: usize) -> Result<TensorPolyField> {
    let mesh = crate::mesh::build_uniform_tensor(ht, hx, 1, 1)?;
    let mut vt: Vec<f64> = (0..=k).map(|_| StandardNormal.sample(rng)).collect();
    let mut vx: Vec<f64> = (0..=l).map(|_| StandardNormal.sample(rng)).collect();
    // zero mean through the space factor, unless only the time factor can carry it
    if l > 0 {
        vx[0] = 0.0;
    } else {
        vt[0] = 0.0;
    }
    let mut coeffs = vec![0.0; (k + 1) * (l + 1)];
    for a in 0..=k {
        for b in 0..=l {
            coeffs[a * (l + 1) + b] = vt[a] * vx[b];
        }
    }
    TensorPolyField::from_blocks(Partition::Tensor(mesh), k, l, coeffs)
}

/// Random polynomial of degrees `(deg, deg)` on the cell `[0, ht] x [0, hx]`.
pub fn random_cell_field<R: rand::Rng>(rng: &mut R, ht: f64, hx: f64, deg: usize) -> Result<TensorPolyField> {
    let mesh = crate::mesh::build_uniform_tensor(ht, hx, 1, 1)?;
    let f = random_poly(rng, ht, hx, deg, deg, false);
    crate::field::project_analytic(&f, &mesh, deg, deg)
}

// ---------------------------------------------------------------------------
// localization

/// `||g||^2_{H^{-1}(a, b)}`; `g`'s breakpoints must include `a` and `b`.
pub fn patch_norm_sq(g: &PiecewisePoly, a: f64, b: f64) -> Result<f64> {
    let br = g.breaks();
    let tol = GEOM_TOL * (br[br.len() - 1] - br[0]).abs().max(1.0);
    let i0 = locate(br, a + tol);
    let i1 = locate(br, b - tol) + 1;
    if (br[i0] - a).abs() > tol || (br[i1] - b).abs() > tol {
        return Err(Error::IncompatibleMesh("patch ends are not breakpoints".into()));
    }
    Ok(hminus1_profile(&g.restrict_cells(i0, i1))?.l2_norm_sq())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// `||g||^2_{H^{-1}(Omega)}`
    pub global: f64,
    /// `sum_j ||g||^2_{H^{-1}(omega_j)}`
    pub patch_sum: f64,
    /// `sum_j h_j^{-2} ||g||^2_{H^{-1}(omega_j)}`
    pub weighted_patch_sum: f64,
}

fn vertex_patch_bounds(mesh: &SpaceMesh, j: usize) -> (f64, f64) {
    let (a, b) = mesh.vertex_patch(j);
    (mesh.breakpoints()[a], mesh.breakpoints()[b])
}

/// `sum_j h_j^{-s} ||g||^2_{H^{-1}(omega_j)}` over vertex patches, `h_j = diam(omega_j)`.
pub fn weighted_patch_sum(g: &PiecewisePoly, mesh: &SpaceMesh, s: f64) -> Result<f64> {
    let mut sum = 0.0;
    for j in 0..mesh.n_vertices() {
        let (a, b) = vertex_patch_bounds(mesh, j);
        sum += (b - a).powf(-s) * patch_norm_sq(g, a, b)?;
    }
    Ok(sum)
}

pub fn localization_report(g: &PiecewisePoly, mesh: &SpaceMesh) -> Result<LocalizationReport> {
    Ok(LocalizationReport {
        global: hminus1_profile(g)?.l2_norm_sq(),
        patch_sum: weighted_patch_sum(g, mesh, 0.0)?,
        weighted_patch_sum: weighted_patch_sum(g, mesh, 2.0)?,
    })
}

/// `sum_{K_x} h_x(K)^{-s} ||g||^2_{H^{-1}(omega_{K_x})}` over element patches.
pub fn element_patch_sum(g: &PiecewisePoly, mesh: &SpaceMesh, s: f64) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..mesh.n_cells() {
        let (a, b) = mesh.element_patch(i);
        let (pa, pb) = (mesh.breakpoints()[a], mesh.breakpoints()[b]);
        sum += mesh.h(i).powf(-s) * patch_norm_sq(g, pa, pb)?;
    }
    Ok(sum)
}

/// Largest `lambda` with `num x = lambda den x`; `den` must be positive definite.
pub fn max_generalized_eigenvalue(num: &DMatrix<f64>, den: &DMatrix<f64>) -> Result<f64> {
    let (dmax, dmin) = max_min_eigen(den);
    let chol = den
        .clone()
        .cholesky()
        .ok_or(Error::IllConditioned(if dmin > 0.0 { dmax / dmin } else { f64::INFINITY }))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let c = &linv * num * linv.transpose();
    let sym = (&c + c.transpose()) * 0.5;
    Ok(max_min_eigen(&sym).0)
}

/// Worst-case constants of the two localization bounds over cellwise `P_deg`
/// functions on `mesh` refined `r` times:
/// `c1 = sup patch_sum / global`, `c2 = sup global / weighted_patch_sum`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConstants {
    pub c1: f64,
    pub c2: f64,
}

/// H^{-1}(a, b) Gram matrix of the unit-coefficient basis functions living on `cells`.
fn local_gram(breaks: &[f64], deg: usize, cells: (usize, usize)) -> Result<DMatrix<f64>> {
    let local: Vec<f64> = breaks[cells.0..=cells.1].to_vec();
    let n = (cells.1 - cells.0) * (deg + 1);
    let reps = (0..n)
        .map(|i| {
            let mut p = PiecewisePoly::zeros(local.clone(), deg);
            p.coeffs_mut()[i] = 1.0;
            hminus1_profile(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| reps[i].dot(&reps[j])))
}

pub fn localization_constants(mesh: &SpaceMesh, r: usize, deg: usize) -> Result<LocalizationConstants> {
    let fine = mesh.refine(r);
    let fb = fine.breakpoints();
    let n = fine.n_cells() * (deg + 1);
    let global = local_gram(fb, deg, (0, fine.n_cells()))?;
    let mut patch = DMatrix::zeros(n, n);
    let mut weighted = DMatrix::zeros(n, n);
    for j in 0..mesh.n_vertices() {
        let (a, b) = mesh.vertex_patch(j);
        let cells = (a * r, b * r);
        let g = local_gram(fb, deg, cells)?;
        let h = mesh.breakpoints()[b] - mesh.breakpoints()[a];
        let off = cells.0 * (deg + 1);
        let len = g.nrows();
        let mut view = patch.view_mut((off, off), (len, len));
        view += &g;
        let mut wview = weighted.view_mut((off, off), (len, len));
        wview += g * h.powi(-2);
    }
    Ok(LocalizationConstants {
        c1: max_generalized_eigenvalue(&patch, &global)?,
        c2: max_generalized_eigenvalue(&global, &weighted)?,
    })
}

/// Discrete `1`: the function of `L^1_{1,0}` equal to one at every interior vertex.
pub fn discrete_one(mesh: &SpaceMesh) -> PiecewisePoly {
    let n = mesh.n_cells();
    let b = mesh.breakpoints();
    PiecewisePoly::project(b.to_vec(), 1, |x| {
        let i = locate(b, x);
        let (a, c) = (b[i], b[i + 1]);
        let s = (x - a) / (c - a);
        let left = if i == 0 { 0.0 } else { 1.0 };
        let right = if i + 1 == n { 0.0 } else { 1.0 };
        left * (1.0 - s) + right * s
    })
}

// ---------------------------------------------------------------------------
// error-bound terms

/// Both sides of the `d_x` error bound for the tensor interpolant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `||d_x (v - I_X v)||^2`
    pub lhs: f64,
    /// Sum of the patchwise `d_x` best-approximation errors.
    pub space_term: f64,
    /// Sum of `h_t^2 / h_x^4` times the patchwise time best-approximation errors.
    pub time_term: f64,
}

impl BoundTerms {
    pub fn rhs(&self) -> f64 {
        self.space_term + self.time_term
    }

    pub fn constant(&self) -> f64 {
        if self.rhs() > 0.0 {
            self.lhs / self.rhs()
        } else {
            0.0
        }
    }
}

fn fine_range(fine: &[f64], a: f64, b: f64) -> (usize, usize) {
    let tol = GEOM_TOL * fine[fine.len() - 1].abs().max(1.0);
    (locate(fine, a + tol), locate(fine, b - tol) + 1)
}

/// Evaluates both sides of the `d_x` bound of `I_X` for `v` on a refinement of `target`.
pub fn tensor_bound_terms(v: &TensorPolyField, target: &TensorMesh, k: usize, l: usize) -> Result<BoundTerms> {
    let fine = v.tensor_mesh()?.clone();
    let iv = interp_x_tensor_field(v, target, k, l)?.prolong_to(&fine)?;
    let lhs = norms::h1semi_sq(&v.sub(&iv)?, Domain::All)?;
    let dt = v.differentiate(Direction::T);
    let (tb, xb) = (target.time.breakpoints(), target.space.breakpoints());
    let n = target.space.n_cells();
    let mut space_term = 0.0;
    let mut time_term = 0.0;
    for ix in 0..n {
        let (a, b) = target.space.element_patch(ix);
        let x_cells = fine_range(fine.space.breakpoints(), xb[a], xb[b]);
        let hx = target.space.h(ix);
        for it in 0..target.time.n_cells() {
            let t_cells = fine_range(fine.time.breakpoints(), tb[it], tb[it + 1]);
            let ht = target.time.h(it);
            let sx = best_approx(&BestApproxProblem {
                target: v,
                t_cells,
                x_cells,
                time: TimeTrial::Full,
                space: SpaceTrial::Lagrange {
                    breaks: xb[a..=b].to_vec(),
                    deg: l,
                    pin_left: a == 0,
                    pin_right: b == n,
                },
                norm: NormKind::L2H1semi,
            })?;
            let st = best_approx(&BestApproxProblem {
                target: &dt,
                t_cells,
                x_cells,
                time: TimeTrial::Poly(k - 1),
                space: SpaceTrial::Full,
                norm: NormKind::L2Hminus1,
            })?;
            space_term += sx.value * sx.value;
            time_term += ht * ht / hx.powi(4) * st.value * st.value;
        }
    }
    Ok(BoundTerms {
        lhs,
        space_term,
        time_term,
    })
}

/// `(||tau - I_2||, ||tau - I_Sigma tau|| + ||d_t(v - I_X v)||_{L2(J;H^{-1})})` for an `I_Lambda` run.
pub fn lambda_transfer(pair: &LambdaPair, result: &LambdaResult, target: &TensorMesh, k: usize, l: usize) -> Result<(f64, f64)> {
    let fine = pair.v.tensor_mesh()?.clone();
    let i2 = result.pair.tau.prolong_to(&fine)?;
    let lhs = norms::norm(&pair.tau.sub(&i2)?, NormKind::L2Q)?;
    let sigma = crate::spacetime::interp_sigma(&pair.tau, target, k, l)?.prolong_to(&fine)?;
    let a = norms::norm(&pair.tau.sub(&sigma)?, NormKind::L2Q)?;
    let e = pair.v.sub(&result.pair.v.prolong_to(&fine)?)?;
    let b = norms::norm(&e.differentiate(Direction::T), NormKind::L2Hminus1)?;
    Ok((lhs, a + b))
}

// ---------------------------------------------------------------------------
// slab-refined counterexample

/// `x`-profile on one coarse cell (`xi` in `[0, 1]`): `2 xi` on the left half,
/// and on the right half `q(s) = (1 - s) + s(1 - s)(10 s - 8)` with `s = 2 xi - 1`,
/// which has zero mean and zero first moment.
pub fn slab_profile(xi: f64) -> f64 {
    if xi <= 0.5 {
        2.0 * xi
    } else {
        let s = 2.0 * xi - 1.0;
        (1.0 - s) + s * (1.0 - s) * (10.0 * s - 8.0)
    }
}

/// Time-independent field whose bilinear interpolant on a slab-refined mesh
/// is one at the interior midline vertices of refined slabs and zero at all
/// coarse vertices. Lives on the half-step lattice with degrees `(0, 3)`.
pub fn slab_oscillation(base: &TensorMesh) -> Result<TensorPolyField> {
    let lattice = base.refine(2, 2);
    let xb = base.space.breakpoints().to_vec();
    let profile = PiecewisePoly::project(lattice.space.breakpoints().to_vec(), 3, |x| {
        let i = locate(&xb, x);
        let (a, b) = (xb[i], xb[i + 1]);
        slab_profile((x - a) / (b - a))
    });
    let n = lattice.space.n_cells();
    let mut coeffs = Vec::with_capacity(lattice.n_cells() * 4);
    for it in 0..lattice.time.n_cells() {
        let s = lattice.time.h(it).sqrt();
        for ix in 0..n {
            coeffs.extend(profile.cell(ix).iter().map(|c| c * s));
        }
    }
    let f = TensorPolyField::from_blocks(Partition::Tensor(lattice), 0, 3, coeffs)?;
    let flags = f.detect_flags(1e-12)?;
    Ok(f.with_flags(flags))
}

/// `||d_t I_X v||_{L2(Q)}` and `||d_x v||_{L2(Q)}` for the slab oscillation on `mesh`.
pub fn counterexample_norms(mesh: &Arc<IrregularMesh>) -> Result<(f64, f64)> {
    let v = slab_oscillation(mesh.base())?;
    let iv = interp_x_irregular(&v, mesh, 1, 1)?.to_field()?;
    let dt = norms::l2_sq(&iv.differentiate(Direction::T), Domain::All)?.sqrt();
    let dx = norms::norm(&v, NormKind::L2H1semi)?;
    Ok((dt, dx))
}

// ---------------------------------------------------------------------------
// reports and rates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub level: usize,
    pub h_t: f64,
    pub h_x: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub rates: BTreeMap<String, f64>,
    pub seed: u64,
    pub config_digest: String,
    pub frozen: BTreeMap<String, f64>,
    pub measured: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            rates: BTreeMap::new(),
            seed: 0,
            config_digest: String::new(),
            frozen: BTreeMap::new(),
            measured: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Adds a row, keeping rows ordered by decreasing `h_x`.
    pub fn push_row(&mut self, level: usize, h_t: f64, h_x: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        let pos = self.rows.iter().position(|r| r.h_x < h_x).unwrap_or(self.rows.len());
        self.rows.insert(pos, ReportRow { level, h_t, h_x, values });
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column {name}")))?;
        Ok(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Fills `rates` for every column whose entries are all positive.
    pub fn fit_rates(&mut self) {
        if self.rows.len() < 3 {
            return;
        }
        for c in self.columns.clone() {
            if let Ok(r) = fit_rate(self, &c) {
                self.rates.insert(c, r);
            }
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["level".to_string(), "h_t".to_string(), "h_x".to_string()];
        header.extend(self.columns.iter().cloned());
        wr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.level.to_string(), format!("{:e}", r.h_t), format!("{:e}", r.h_x)];
            rec.extend(r.values.iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive entries".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Convergence rate of `column` against `h_x` over the last three levels.
pub fn fit_rate(report: &ExperimentReport, column: &str) -> Result<f64> {
    let ys = report.column(column)?;
    if ys.len() < 3 {
        return Err(Error::InvalidArgument("rates need at least three levels".into()));
    }
    let hs: Vec<f64> = report.rows.iter().map(|r| r.h_x).collect();
    let s = ys.len() - 3;
    fit_slope(&hs[s..], &ys[s..])
}
