use std::sync::Arc;

use anyhow::Result;
use ptinterp_core::mesh::{build_figure1_mesh, build_scaled_tensor};
use ptinterp_core::oracles::{counterexample_norms, ExperimentReport};
use ptinterp_core::IrregularMesh;

use super::Tracker;
use crate::config::RunConfig;
use crate::frozen::{round_sig, FrozenConstants};

pub const BAND: f64 = 3.0;
pub const CONTROL_TOL: f64 = 1e-12;

pub const COLUMNS: [&str; 5] = ["ratio", "dt_interpolant", "dx_field", "conforming_control", "refined_slabs"];

pub fn run(cfg: &RunConfig, frozen: &mut FrozenConstants, freeze: bool) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("counterexample", &COLUMNS);
    let mut tr = Tracker::default();
    let mut ratios = Vec::new();
    let mut control_worst = 0.0f64;
    let mut first_dt = 0.0;
    for level in 0..cfg.levels {
        let n = cfg.base_n << level;
        let scaled = build_scaled_tensor(cfg.t_end, cfg.length, cfg.length / n as f64, cfg.alpha)?;
        let base = &scaled.mesh;
        let (ht, hx) = (scaled.h_t, scaled.h_x);
        let mesh = Arc::new(build_figure1_mesh(base, cfg.period)?);
        let (dt, dx) = counterexample_norms(&mesh)?;
        let mut r = dt / (hx / ht * dx);
        if cfg.inject_fault && level + 1 == cfg.levels {
            r *= 10.0;
        }
        let conforming = Arc::new(IrregularMesh::conforming(base));
        let (dt_c, dx_c) = counterexample_norms(&conforming)?;
        let control = dt_c / dx_c;
        control_worst = control_worst.max(control);
        if level == 0 {
            first_dt = dt;
        }
        ratios.push(r);
        rep.push_row(level, ht, hx, vec![r, dt, dx, control, mesh.refined_slabs().len() as f64])?;
        tr.lap(&format!("level {level}: {} slabs, {} cells", base.time.n_cells(), mesh.n_cells()));
    }
    let r_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = ratios.iter().cloned().fold(0.0, f64::max);
    rep.measured.insert("counterexample_r_min".into(), r_min);
    rep.measured.insert("counterexample_r_max".into(), r_max);
    if freeze {
        frozen.set("counterexample_r0", round_sig(r_min, false));
    }
    let r0 = frozen.get("counterexample_r0")?;
    rep.frozen.insert("counterexample_r0".into(), r0);
    rep.check(
        "time-derivative-created",
        first_dt > 0.0,
        format!("||d_t I_X v|| = {first_dt:e} on the coarsest mesh although d_t v = 0"),
    );
    rep.check(
        "ratio-band",
        ratios.len() >= 3 && r_min >= r0 && r_max <= BAND * r0,
        format!("ratios in [{r_min:.6}, {r_max:.6}] against [r0, 3 r0] with r0 = {r0}"),
    );
    rep.check(
        "conforming-control",
        control_worst <= CONTROL_TOL,
        format!("max ||d_t I_X v|| / ||d_x v|| on conforming meshes {control_worst:e}"),
    );
    rep.notes.push(
        "v is constant in time; in the local coordinate xi of a coarse x-cell its profile is 2 xi on [0, 1/2] \
         and q(2 xi - 1) on [1/2, 1] with q(s) = (1 - s) + s(1 - s)(10 s - 8), so the bilinear interpolant \
         is 0 at coarse vertices and 1 at non-hanging refined-slab midline vertices"
            .into(),
    );
    rep.notes.push(format!("every {}-th time slab is refined", cfg.period));
    Ok(rep)
}
