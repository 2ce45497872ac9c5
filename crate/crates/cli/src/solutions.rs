//! Manufactured solutions for the convergence experiment.

use std::f64::consts::PI;

use ptinterp_core::field::Smoothness;
use ptinterp_core::AnalyticField;

use crate::config::Solution;

/// `sin(m pi x / L) exp(-(m pi / L)^2 t)`, an exact heat solution with `f = 0`.
pub fn heat_mode(m: f64, length: f64) -> AnalyticField {
    let w = m * PI / length;
    AnalyticField::new(&format!("heat-mode-{m}"), Smoothness::Smooth, move |t, x| {
        (w * x).sin() * (-w * w * t).exp()
    })
    .with_dt(move |t, x| -w * w * (w * x).sin() * (-w * w * t).exp())
    .with_dx(move |t, x| w * (w * x).cos() * (-w * w * t).exp())
    .with_dxx(move |t, x| -w * w * (w * x).sin() * (-w * w * t).exp())
}

/// `b(x) (t^2 / T^2 + x / L)` with the bubble `b(x) = 4 x (L - x) / L^2`.
pub fn separable_poly(t_end: f64, length: f64) -> AnalyticField {
    let b = move |x: f64| 4.0 * x * (length - x) / (length * length);
    let db = move |x: f64| 4.0 * (length - 2.0 * x) / (length * length);
    AnalyticField::new("separable-poly", Smoothness::Polynomial, move |t, x| {
        b(x) * (t * t / (t_end * t_end) + x / length)
    })
    .with_dt(move |t, x| b(x) * 2.0 * t / (t_end * t_end))
    .with_dx(move |t, x| db(x) * (t * t / (t_end * t_end) + x / length) + b(x) / length)
}

/// `|t - T/2|^0.6 sin(pi x / L)`.
pub fn rough_in_time(t_end: f64, length: f64) -> AnalyticField {
    AnalyticField::new("rough-in-time", Smoothness::Rough, move |t, x| {
        (t - 0.5 * t_end).abs().powf(0.6) * (PI * x / length).sin()
    })
}

pub fn manufactured(sol: Solution, t_end: f64, length: f64) -> AnalyticField {
    match sol {
        Solution::HeatMode1 => heat_mode(1.0, length),
        Solution::HeatMode3 => heat_mode(3.0, length),
        Solution::SeparablePoly => separable_poly(t_end, length),
        Solution::RoughInTime => rough_in_time(t_end, length),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_callbacks_match_finite_differences() {
        let pts = [(0.1, 0.2), (0.4, 0.7), (0.9, 0.5)];
        for f in [heat_mode(1.0, 1.0), heat_mode(3.0, 2.0), separable_poly(1.0, 2.0)] {
            assert!(f.fd_check(&pts) < 1e-5, "{}", f.name);
        }
    }

    #[test]
    fn solutions_vanish_on_the_boundary() {
        for sol in [Solution::HeatMode1, Solution::HeatMode3, Solution::SeparablePoly, Solution::RoughInTime] {
            let f = manufactured(sol, 1.0, 2.0);
            for t in [0.0, 0.3, 1.0] {
                assert!(f.eval(t, 0.0).abs() < 1e-14);
                assert!(f.eval(t, 2.0).abs() < 1e-14);
            }
        }
    }
}
