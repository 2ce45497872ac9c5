use std::sync::Arc;

use anyhow::Result;
use ptinterp_core::field::oracle_field;
use ptinterp_core::mesh::build_scaled_tensor;
use ptinterp_core::norms::{norm, NormKind};
use ptinterp_core::oracles::{fit_rate, tensor_bound_terms, ExperimentReport};
use ptinterp_core::spacetime::{interp_x_irregular, interp_x_tensor_field, interp_x_tensor_prime_field};
use ptinterp_core::{Direction, IrregularMesh, TensorMesh, TensorPolyField};

use super::Tracker;
use crate::config::{Operator, RunConfig, Solution};
use crate::frozen::FrozenConstants;
use crate::solutions::manufactured;

pub const RATE_TOL: f64 = 0.2;
pub const REPRODUCTION_TOL: f64 = 1e-11;
/// Allowed growth of the bound constant between the two finest levels.
pub const BOUND_GROWTH: f64 = 1.2;

pub const COLUMNS: [&str; 8] = [
    "dx_error",
    "dt_hminus1_error",
    "dt_l2_error",
    "max_trace_error",
    "bound_space_term",
    "bound_time_term",
    "bound_constant",
    "reproduction_error",
];

fn apply(op: Operator, u: &TensorPolyField, mesh: &TensorMesh, k: usize, l: usize) -> Result<TensorPolyField> {
    Ok(match op {
        Operator::Tensor => interp_x_tensor_field(u, mesh, k, l)?,
        Operator::Prime => interp_x_tensor_prime_field(u, mesh, k, l)?,
        Operator::Irregular => {
            let m = Arc::new(IrregularMesh::conforming(mesh));
            interp_x_irregular(u, &m, k, l)?.to_field()?.prolong_to(mesh)?
        }
    })
}

/// `||d_x e||`, `||d_t e||_{L2(H^-1)}`, `||d_t e||_{L2(Q)}` and the largest
/// trace norm over the time breakpoints of `mesh`.
fn error_norms(e: &TensorPolyField, mesh: &TensorMesh) -> Result<[f64; 4]> {
    let dt = e.differentiate(Direction::T);
    let mut trace = 0.0f64;
    for &t in mesh.time.breakpoints() {
        trace = trace.max(norm(e, NormKind::TraceL2(t))?);
    }
    Ok([
        norm(e, NormKind::L2H1semi)?,
        norm(&dt, NormKind::L2Hminus1)?,
        norm(&dt, NormKind::L2Q)?,
        trace,
    ])
}

pub fn run(cfg: &RunConfig, _frozen: &mut FrozenConstants, _freeze: bool) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("converge", &COLUMNS);
    let f = manufactured(cfg.solution, cfg.t_end, cfg.length);
    let (k, l, op) = (cfg.k, cfg.l, cfg.operator);
    let mut tr = Tracker::default();
    let mut repro_worst = 0.0f64;
    for level in 0..cfg.levels {
        let n = cfg.base_n << level;
        let scaled = build_scaled_tensor(cfg.t_end, cfg.length, cfg.length / n as f64, cfg.alpha)?;
        let mesh = &scaled.mesh;
        let u = oracle_field(&f, mesh, k, l, cfg.oracle_refine)?;
        let fine = u.tensor_mesh()?.clone();
        let iu = apply(op, &u, mesh, k, l)?;
        let e = u.sub(&iu.prolong_to(&fine)?)?;
        let errs = error_norms(&e, mesh)?;
        let bound = tensor_bound_terms(&u, mesh, k, l)?;

        // discrete input: the interpolant itself must come back unchanged
        let mut again = apply(op, &iu, mesh, k, l)?;
        if cfg.inject_fault {
            again.coeffs_mut()[0] += 1e-6;
        }
        let d = iu.sub(&again)?;
        let scale = norm(&iu, NormKind::L2H1semi)?.max(1.0);
        let repro = error_norms(&d, mesh)?.iter().cloned().fold(0.0, f64::max) / scale;
        repro_worst = repro_worst.max(repro);

        rep.push_row(
            level,
            scaled.h_t,
            scaled.h_x,
            vec![
                errs[0],
                errs[1],
                errs[2],
                errs[3],
                bound.space_term.sqrt(),
                bound.time_term.sqrt(),
                bound.constant(),
                repro,
            ],
        )?;
        tr.lap(&format!("level {level}: {} x {} cells", mesh.time.n_cells(), mesh.space.n_cells()));
    }
    for c in &COLUMNS[..4] {
        if let Ok(r) = fit_rate(&rep, c) {
            rep.rates.insert(c.to_string(), r);
        }
    }
    let rate = rep.rates.get("dx_error").copied().unwrap_or(f64::NAN);
    let expected = k.min(l) as f64;
    if !matches!(cfg.solution, Solution::HeatMode1 | Solution::SeparablePoly) {
        rep.notes.push(format!("{}: dx rate {rate:.3} reported without a check", f.name));
    } else {
        rep.check(
            "dx-rate",
            (rate - expected).abs() <= RATE_TOL,
            format!("fitted rate {rate:.4} over the last three levels, expected {expected} +- {RATE_TOL}"),
        );
    }
    rep.check(
        "discrete-reproduction",
        repro_worst <= REPRODUCTION_TOL,
        format!("max relative error on discrete input {repro_worst:e} (tolerance {REPRODUCTION_TOL:e})"),
    );
    let bounds = rep.column("bound_constant")?;
    let n = bounds.len();
    let growth = bounds[n - 1] / bounds[n - 2];
    rep.check(
        "bound-constant-settles",
        bounds.iter().all(|c| c.is_finite()) && growth <= BOUND_GROWTH,
        format!("d_x bound constant {:.4} on the finest level, growth {growth:.4} from the previous one", bounds[n - 1]),
    );
    rep.measured.insert("dx_rate".into(), rate);
    rep.measured.insert("max_bound_constant".into(), bounds.iter().cloned().fold(0.0, f64::max));
    rep.notes.push(format!("solution {}, operator {:?}, alpha {}", f.name, op, cfg.alpha));
    Ok(rep)
}
