use std::sync::Arc;

use anyhow::Result;
use ptinterp_core::interp1d::{interp_rt, interp_space, interp_time, interp_time_sz, project_space_onto, project_time_onto};
use ptinterp_core::mesh::{build_figure1_mesh, build_uniform_tensor};
use ptinterp_core::norms::{self, NormKind};
use ptinterp_core::oracles::{
    best_approx, lambda_transfer, random_field, random_pair, seeded_rng, BestApproxProblem, ExperimentReport, SpaceTrial,
    TimeTrial,
};
use ptinterp_core::spacetime::{
    heat_flux, interp_lambda, interp_sigma, interp_x_irregular, interp_x_tensor_field, interp_x_tensor_prime_field, LambdaPair,
};
use ptinterp_core::{Direction, TensorMesh, TensorPolyField};

use super::{finish_row, Tracker};
use crate::config::RunConfig;
use crate::frozen::FrozenConstants;
use crate::solutions::heat_mode;

pub const DIAGRAM_TOL: f64 = 1e-11;
pub const LAMBDA_TOL: f64 = 1e-10;
pub const IDEMPOTENCY_TOL: f64 = 1e-12;

/// Numeric ids of the `diagram` column in `table.csv`.
pub const DIAGRAMS: [&str; 6] = ["time", "time-best-approximation", "rt", "sigma", "lambda", "idempotency"];

fn rel_diff(a: &TensorPolyField, b: &TensorPolyField) -> Result<f64> {
    let scale = a.max_abs_coeff().max(b.max_abs_coeff()).max(f64::MIN_POSITIVE);
    Ok(a.sub(b)?.max_abs_coeff() / scale)
}

fn l2(f: &TensorPolyField) -> Result<f64> {
    Ok(norms::norm(f, NormKind::L2Q)?)
}

/// `||d_t I_t v - Pi_{k-1} d_t v|| / ||d_t v||`.
fn time_residual(v: &TensorPolyField, mesh: &TensorMesh, k: usize, fault: bool) -> Result<f64> {
    let mut it = interp_time(v, &mesh.time, k)?;
    if fault {
        // first time mode of cell 0, which survives differentiation
        let px = it.degrees().1;
        it.coeffs_mut()[px + 1] += 1e-6 * it.max_abs_coeff().max(1.0);
    }
    let lhs = it.differentiate(Direction::T);
    let dt = v.differentiate(Direction::T);
    let rhs = project_time_onto(&dt, &mesh.time, k - 1)?.prolong_to(lhs.tensor_mesh()?)?;
    Ok(l2(&lhs.sub(&rhs)?)? / l2(&dt)?.max(f64::MIN_POSITIVE))
}

/// Relative gap between `||d_t(v - I_t v)||` and the cellwise minimum over `P_k(K_t)`.
fn best_gap(v: &TensorPolyField, mesh: &TensorMesh, k: usize, r: usize) -> Result<f64> {
    let fine = v.tensor_mesh()?.clone();
    let it = interp_time(v, &mesh.time, k)?.prolong_to(&fine)?;
    let err = l2(&v.sub(&it)?.differentiate(Direction::T))?;
    let dt = v.differentiate(Direction::T);
    let mut min_sq = 0.0;
    for c in 0..mesh.time.n_cells() {
        let b = best_approx(&BestApproxProblem {
            target: &dt,
            t_cells: (c * r, (c + 1) * r),
            x_cells: (0, fine.space.n_cells()),
            time: TimeTrial::Poly(k - 1),
            space: SpaceTrial::Full,
            norm: NormKind::L2Q,
        })?;
        min_sq += b.value * b.value;
    }
    let min = min_sq.sqrt();
    Ok((err - min).abs() / err.max(min).max(f64::MIN_POSITIVE))
}

fn rt_residual(tau: &TensorPolyField, mesh: &TensorMesh, l: usize) -> Result<f64> {
    let lhs = interp_rt(tau, &mesh.space, l)?.differentiate(Direction::X);
    let dx = tau.differentiate(Direction::X);
    let rhs = project_space_onto(&dx, &mesh.space, l)?.prolong_to(lhs.tensor_mesh()?)?;
    Ok(l2(&lhs.sub(&rhs)?)? / l2(&dx)?.max(f64::MIN_POSITIVE))
}

fn sigma_residual(tau: &TensorPolyField, mesh: &TensorMesh, k: usize, l: usize) -> Result<f64> {
    let lhs = interp_sigma(tau, mesh, k, l)?.differentiate(Direction::X);
    let dx = tau.differentiate(Direction::X);
    let rhs = project_time_onto(&project_space_onto(&dx, &mesh.space, l)?, &mesh.time, k - 1)?;
    let rhs = rhs.prolong_to(lhs.tensor_mesh()?)?;
    Ok(l2(&lhs.sub(&rhs)?)? / l2(&dx)?.max(f64::MIN_POSITIVE))
}

/// Largest `|| I(I u) - I u ||_inf / || I u ||_inf` over all operators.
fn idempotency(
    v: &TensorPolyField,
    tau: &TensorPolyField,
    mesh: &TensorMesh,
    k: usize,
    l: usize,
    irregular: &Arc<ptinterp_core::IrregularMesh>,
    v_lattice: &TensorPolyField,
) -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    let a = interp_time(v, &mesh.time, k)?;
    out.push(("I_t", rel_diff(&a, &interp_time(&a, &mesh.time, k)?)?));
    let a = interp_time_sz(v, &mesh.time, k)?;
    out.push(("I_t'", rel_diff(&a, &interp_time_sz(&a, &mesh.time, k)?)?));
    let a = interp_space(v, &mesh.space, l)?;
    out.push(("I_x", rel_diff(&a, &interp_space(&a, &mesh.space, l)?)?));
    let a = interp_x_tensor_field(v, mesh, k, l)?;
    out.push(("I_X", rel_diff(&a, &interp_x_tensor_field(&a, mesh, k, l)?)?));
    let a = interp_x_tensor_prime_field(v, mesh, k, l)?;
    out.push(("I_X'", rel_diff(&a, &interp_x_tensor_prime_field(&a, mesh, k, l)?)?));
    let a = interp_rt(tau, &mesh.space, l)?;
    out.push(("I_RT", rel_diff(&a, &interp_rt(&a, &mesh.space, l)?)?));
    let a = interp_sigma(tau, mesh, k, l)?;
    out.push(("I_Sigma", rel_diff(&a, &interp_sigma(&a, mesh, k, l)?)?));
    let once = interp_lambda(&LambdaPair::new(v.clone(), tau.clone())?, mesh, k, l)?;
    let twice = interp_lambda(&once.pair, mesh, k, l)?;
    let d = rel_diff(&once.pair.v, &twice.pair.v)?.max(rel_diff(&once.pair.tau, &twice.pair.tau)?);
    out.push(("I_Lambda", d));
    if (k, l) == (1, 1) {
        let once = interp_x_irregular(v_lattice, irregular, 1, 1)?;
        let back = once.to_field()?.prolong_to(&irregular.lattice_mesh())?;
        let twice = interp_x_irregular(&back, irregular, 1, 1)?;
        let scale = once.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let d = once
            .coeffs()
            .iter()
            .zip(twice.coeffs())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        out.push(("I_X irregular", d / scale));
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, _frozen: &mut FrozenConstants, _freeze: bool) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("commute", &["diagram", "k", "l", "max_rel_residual"]);
    let mesh = build_uniform_tensor(cfg.t_end, cfg.length, cfg.base_n, cfg.base_n)?;
    let (h_t, h_x) = (mesh.time.h_max(), mesh.space.h_max());
    let r = cfg.oracle_refine;
    let mut rng = seeded_rng(cfg.seed);
    let mut tr = Tracker::default();

    // time diagram and best approximation share one suite
    let mut time = [0.0f64; 3];
    let mut best = [0.0f64; 3];
    let mut failed_time = Vec::new();
    for s in 0..cfg.samples {
        let v = random_field(&mut rng, &mesh, 3, 1, r, true)?;
        for k in 1..=3 {
            let res = time_residual(&v, &mesh, k, cfg.inject_fault && s == 0)?;
            time[k - 1] = time[k - 1].max(res);
            if res > DIAGRAM_TOL {
                failed_time.push((s, k, res));
            }
            best[k - 1] = best[k - 1].max(best_gap(&v, &mesh, k, r)?);
        }
    }
    for k in 1..=3 {
        finish_row(&mut rep, 0, k, 0, time[k - 1], h_t, h_x)?;
        finish_row(&mut rep, 1, k, 0, best[k - 1], h_t, h_x)?;
    }
    let worst = time.iter().cloned().fold(0.0, f64::max);
    rep.check(
        "time",
        failed_time.is_empty(),
        format!("max relative residual {worst:e} over {} fields, k = 1..3 (tolerance {DIAGRAM_TOL:e})", cfg.samples),
    );
    let worst = best.iter().cloned().fold(0.0, f64::max);
    rep.check(
        "time-best-approximation",
        worst <= DIAGRAM_TOL,
        format!("max relative gap {worst:e} (tolerance {DIAGRAM_TOL:e})"),
    );
    tr.lap("time diagram");

    // RT and Sigma diagrams
    let mut rt = [0.0f64; 3];
    let mut sigma = [[0.0f64; 3]; 2];
    for _ in 0..cfg.samples {
        let tau = random_field(&mut rng, &mesh, 2, 2, r, false)?;
        for l in 0..=2 {
            rt[l] = rt[l].max(rt_residual(&tau, &mesh, l)?);
            for k in 1..=2 {
                sigma[k - 1][l] = sigma[k - 1][l].max(sigma_residual(&tau, &mesh, k, l)?);
            }
        }
    }
    for l in 0..=2 {
        finish_row(&mut rep, 2, 0, l, rt[l], h_t, h_x)?;
        for k in 1..=2 {
            finish_row(&mut rep, 3, k, l, sigma[k - 1][l], h_t, h_x)?;
        }
    }
    let worst = rt.iter().cloned().fold(0.0, f64::max);
    rep.check("rt", worst <= DIAGRAM_TOL, format!("max relative residual {worst:e}, l = 0..2"));
    let worst = sigma.iter().flatten().cloned().fold(0.0, f64::max);
    rep.check("sigma", worst <= DIAGRAM_TOL, format!("max relative residual {worst:e}, k = 1..2, l = 0..2"));
    tr.lap("rt and sigma diagrams");

    // Lambda diagram: random pairs, then the divergence-free heat pair
    let (k, l) = (cfg.k, cfg.l);
    let mut worst_lambda = 0.0f64;
    let mut transfer = 0.0f64;
    let mut lambda_errors = Vec::new();
    for s in 0..cfg.pair_samples {
        let pair = random_pair(&mut rng, &mesh, k, l, r)?;
        match interp_lambda(&pair, &mesh, k, l) {
            Ok(out) => {
                worst_lambda = worst_lambda.max(out.commuting_residual / out.div_norm.max(f64::MIN_POSITIVE));
                let (lhs, rhs) = lambda_transfer(&pair, &out, &mesh, k, l)?;
                if rhs > 0.0 {
                    transfer = transfer.max(lhs / rhs);
                }
            }
            Err(e) => lambda_errors.push(format!("pair {s}: {e}")),
        }
    }
    let v = ptinterp_core::field::oracle_field(&heat_mode(1.0, cfg.length), &mesh, k, l, r)?;
    let heat = LambdaPair::new(v.clone(), heat_flux(&v)?)?;
    let heat_rel = match interp_lambda(&heat, &mesh, k, l) {
        Ok(out) => out.commuting_residual / out.scale.max(f64::MIN_POSITIVE),
        Err(e) => {
            lambda_errors.push(format!("heat pair: {e}"));
            f64::INFINITY
        }
    };
    finish_row(&mut rep, 4, k, l, worst_lambda.max(heat_rel), h_t, h_x)?;
    rep.measured.insert("lambda_max_rel_residual".into(), worst_lambda);
    rep.measured.insert("lambda_heat_pair_rel_residual".into(), heat_rel);
    rep.measured.insert("lambda_heat_pair_div_norm".into(), heat.norm(NormKind::LambdaDiv)?);
    rep.measured.insert("lambda_transfer_constant".into(), transfer);
    rep.check(
        "lambda",
        lambda_errors.is_empty() && worst_lambda <= LAMBDA_TOL && heat_rel <= LAMBDA_TOL,
        format!(
            "random pairs: max residual / ||div|| = {worst_lambda:e}; heat pair: residual / (||d_t v|| + ||d_x tau||) = {heat_rel:e}{}",
            if lambda_errors.is_empty() { String::new() } else { format!("; errors: {}", lambda_errors.join(", ")) }
        ),
    );
    tr.lap("lambda diagram");

    // idempotency
    let base = build_uniform_tensor(cfg.t_end, cfg.length, 4, cfg.base_n)?;
    let irregular = Arc::new(build_figure1_mesh(&base, 2)?);
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for _ in 0..cfg.samples {
        let v = random_field(&mut rng, &mesh, k, l, r, true)?;
        let tau = random_field(&mut rng, &mesh, k, l, r, false)?;
        let vl = random_field(&mut rng, &base, 1, 1, 2, true)?;
        for (name, d) in idempotency(&v, &tau, &mesh, k, l, &irregular, &vl)? {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(e) => e.1 = e.1.max(d),
                None => worst.push((name, d)),
            }
        }
    }
    let max = worst.iter().map(|e| e.1).fold(0.0, f64::max);
    finish_row(&mut rep, 5, k, l, max, h_t, h_x)?;
    let bad: Vec<String> = worst
        .iter()
        .filter(|e| e.1 > IDEMPOTENCY_TOL)
        .map(|e| format!("{} ({:e})", e.0, e.1))
        .collect();
    rep.check(
        "idempotency",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} operators, max deviation {max:e}", worst.len())
        } else {
            format!("not idempotent: {}", bad.join(", "))
        },
    );
    for (name, d) in &worst {
        rep.measured.insert(format!("idempotency {name}"), *d);
    }
    tr.lap("idempotency");

    for (i, d) in DIAGRAMS.iter().enumerate() {
        rep.notes.push(format!("diagram {i} = {d}"));
    }
    Ok(rep)
}
