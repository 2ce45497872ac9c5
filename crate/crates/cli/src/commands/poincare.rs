use anyhow::Result;
use ptinterp_core::field::{project_analytic, Smoothness};
use ptinterp_core::mesh::build_uniform_tensor;
use ptinterp_core::oracles::{poincare_report, random_cell_field, random_product_field, seeded_rng, ExperimentReport};
use ptinterp_core::AnalyticField;

use super::Tracker;
use crate::config::RunConfig;
use crate::frozen::{round_sig, FrozenConstants};

/// Exponents of the anisotropy `h_t / h_x^2` on the cell `[0, h_t] x [0, 1]`.
pub const ANISOTROPY_EXPONENTS: [i32; 7] = [-3, -2, -1, 0, 1, 2, 3];
/// Degree of the random test polynomials.
pub const FIELD_DEGREE: usize = 4;
pub const SLACK: f64 = 1.1;

fn closed_form(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<ptinterp_core::oracles::PoincareReport> {
    let mesh = build_uniform_tensor(1.0, 1.0, 1, 1)?;
    let v = project_analytic(&AnalyticField::new("closed form", Smoothness::Polynomial, f), &mesh, 1, 1)?;
    Ok(poincare_report(&v, 0, 1, 1)?)
}

pub fn run(cfg: &RunConfig, frozen: &mut FrozenConstants, freeze: bool) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new(
        "poincare",
        &["anisotropy", "max_ratio", "max_general_ratio", "max_classic_ratio", "sharpness_ratio"],
    );
    let mut rng = seeded_rng(cfg.seed);
    let mut tr = Tracker::default();
    let (k, l) = (cfg.k, cfg.l);
    let mut c_pp = 0.0f64;
    let mut sharp = 0.0f64;
    for (i, &e) in ANISOTROPY_EXPONENTS.iter().enumerate() {
        let ht = 10f64.powi(e);
        let (mut ratio, mut general, mut classic) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..cfg.samples {
            let v = random_cell_field(&mut rng, ht, 1.0, FIELD_DEGREE)?;
            let p = poincare_report(&v, 0, k, l)?;
            ratio = ratio.max(p.ratio);
            if p.general_rhs > 0.0 {
                general = general.max(p.general_lhs / p.general_rhs);
            }
            if p.classic_rhs > 0.0 {
                classic = classic.max(p.lhs / p.classic_rhs);
            }
        }
        let mut reverse = 0.0f64;
        for _ in 0..cfg.samples {
            let v = random_product_field(&mut rng, ht, 1.0, k, l)?;
            let p = poincare_report(&v, 0, k, l)?;
            if p.lhs > 0.0 {
                reverse = reverse.max(p.rhs / p.lhs);
            }
        }
        c_pp = c_pp.max(ratio);
        sharp = sharp.max(reverse);
        rep.push_row(i, ht, 1.0, vec![ht, ratio, general, classic, reverse])?;
    }
    tr.lap("anisotropy sweep");
    if cfg.inject_fault {
        c_pp *= 2.0;
    }
    rep.measured.insert("poincare_c_pp".into(), c_pp);
    rep.measured.insert("poincare_sharpness".into(), sharp);
    if freeze {
        frozen.set("poincare_c_pp", round_sig(c_pp, true));
        frozen.set("poincare_sharpness", round_sig(sharp, true));
    }
    let f_pp = frozen.get("poincare_c_pp")?;
    let f_sharp = frozen.get("poincare_sharpness")?;
    rep.frozen.insert("poincare_c_pp".into(), f_pp);
    rep.frozen.insert("poincare_sharpness".into(), f_sharp);
    rep.check(
        "poincare-constant",
        c_pp.is_finite() && c_pp <= SLACK * f_pp,
        format!("max ratio {c_pp:.6} against frozen {f_pp} (+10%)"),
    );
    rep.check(
        "poincare-sharpness",
        sharp.is_finite() && sharp <= SLACK * f_sharp,
        format!("max reverse ratio {sharp:.6} over product fields against frozen {f_sharp} (+10%)"),
    );

    let c = closed_form(|_, _| 2.5)?;
    rep.check("closed-form-constant", c.lhs.abs() < 1e-14, format!("lhs = {:e}", c.lhs));
    let x = closed_form(|_, x| x)?;
    let want = 1.0 / 12f64.sqrt();
    rep.check(
        "closed-form-x",
        (x.lhs - want).abs() < 1e-13 && (x.rhs - 1.0).abs() < 1e-13,
        format!("lhs {} rhs {} ratio {}", x.lhs, x.rhs, x.ratio),
    );
    let t = closed_form(|t, _| t)?;
    rep.check(
        "closed-form-t",
        (t.lhs - want).abs() < 1e-13 && (t.rhs - want).abs() < 1e-13,
        format!("lhs {} rhs {} ratio {}", t.lhs, t.rhs, t.ratio),
    );
    rep.notes.push(format!(
        "random fields: degree ({FIELD_DEGREE}, {FIELD_DEGREE}); general form and sharpness use degrees ({k}, {l})"
    ));
    Ok(rep)
}
