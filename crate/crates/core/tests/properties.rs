use std::sync::Arc;

use proptest::prelude::*;
use ptinterp_core::interp1d::{interp_rt, interp_space, interp_time, interp_time_sz, project_time_onto};
use ptinterp_core::mesh::{build_figure1_mesh, build_uniform_tensor};
use ptinterp_core::norms::{hminus1_discrete_sup, norm, NormKind};
use ptinterp_core::oracles::{
    best_approx, random_field, random_pair, seeded_rng, BestApproxProblem, SpaceTrial, TimeTrial,
};
use ptinterp_core::pw1d::{hminus1_norm, PiecewisePoly};
use ptinterp_core::spacetime::{interp_lambda, interp_sigma, interp_x_irregular, interp_x_tensor_field};
use ptinterp_core::{Direction, IrregularMesh, TensorPolyField};

fn rel_diff(a: &TensorPolyField, b: &TensorPolyField) -> f64 {
    a.sub(b).unwrap().max_abs_coeff() / a.max_abs_coeff().max(b.max_abs_coeff()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_interpolant_commutes(seed in any::<u64>(), k in 1usize..=3, m in 1usize..=4) {
        let mesh = build_uniform_tensor(1.0, 1.0, m, 2).unwrap();
        let mut rng = seeded_rng(seed);
        let v = random_field(&mut rng, &mesh, k, 1, 2, true).unwrap();
        let it = interp_time(&v, &mesh.time, k).unwrap();
        let lhs = it.differentiate(Direction::T);
        let rhs = project_time_onto(&v.differentiate(Direction::T), &mesh.time, k - 1).unwrap();
        let rhs = rhs.prolong_to(lhs.tensor_mesh().unwrap()).unwrap();
        let dt = norm(&v.differentiate(Direction::T), NormKind::L2Q).unwrap();
        prop_assert!(norm(&lhs.sub(&rhs).unwrap(), NormKind::L2Q).unwrap() <= 1e-11 * dt);
    }

    #[test]
    fn operators_are_idempotent(seed in any::<u64>(), k in 1usize..=3, l in 1usize..=3) {
        let mesh = build_uniform_tensor(1.0, 2.0, 3, 3).unwrap();
        let mut rng = seeded_rng(seed);
        let v = random_field(&mut rng, &mesh, k, l, 2, true).unwrap();
        let a = interp_time(&v, &mesh.time, k).unwrap();
        prop_assert!(rel_diff(&a, &interp_time(&a, &mesh.time, k).unwrap()) <= 1e-12);
        let a = interp_time_sz(&v, &mesh.time, k).unwrap();
        prop_assert!(rel_diff(&a, &interp_time_sz(&a, &mesh.time, k).unwrap()) <= 1e-12);
        let a = interp_space(&v, &mesh.space, l).unwrap();
        prop_assert!(rel_diff(&a, &interp_space(&a, &mesh.space, l).unwrap()) <= 1e-12);
        let a = interp_x_tensor_field(&v, &mesh, k, l).unwrap();
        prop_assert!(rel_diff(&a, &interp_x_tensor_field(&a, &mesh, k, l).unwrap()) <= 1e-12);
        let tau = random_field(&mut rng, &mesh, k, l, 2, false).unwrap();
        let a = interp_rt(&tau, &mesh.space, l).unwrap();
        prop_assert!(rel_diff(&a, &interp_rt(&a, &mesh.space, l).unwrap()) <= 1e-12);
        let a = interp_sigma(&tau, &mesh, k, l).unwrap();
        prop_assert!(rel_diff(&a, &interp_sigma(&a, &mesh, k, l).unwrap()) <= 1e-12);
    }

    #[test]
    fn space_interpolant_keeps_zero_trace(seed in any::<u64>(), l in 1usize..=3) {
        let mesh = build_uniform_tensor(1.0, 1.0, 2, 5).unwrap();
        let mut rng = seeded_rng(seed);
        let g = random_field(&mut rng, &mesh, 1, l, 1, false).unwrap();
        let a = interp_space(&g, &mesh.space, l).unwrap();
        prop_assert!(a.max_trace().unwrap() <= 1e-13 * a.max_abs_coeff().max(1.0));
    }

    #[test]
    fn lambda_diagram_holds(seed in any::<u64>(), k in 1usize..=2, l in 1usize..=2) {
        let mesh = build_uniform_tensor(1.0, 1.0, 2, 3).unwrap();
        let mut rng = seeded_rng(seed);
        let pair = random_pair(&mut rng, &mesh, k, l, 2).unwrap();
        let out = interp_lambda(&pair, &mesh, k, l).unwrap();
        prop_assert!(out.commuting_residual <= 1e-10 * out.div_norm.max(1e-300));
    }

    #[test]
    fn hminus1_matches_discrete_sup(c in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let g = PiecewisePoly::from_coeffs(vec![0.0, 0.3, 1.0], 2, c);
        let exact = hminus1_norm(&g).unwrap();
        prop_assume!(exact > 1e-3);
        let sup = hminus1_discrete_sup(&g, 600);
        prop_assert!(sup <= exact * (1.0 + 1e-10));
        prop_assert!(sup >= exact * 0.995);
    }

    #[test]
    fn best_approximation_beats_trial_members(seed in any::<u64>(), l in 0usize..=2, shift in -1.0f64..1.0) {
        let mesh = build_uniform_tensor(1.0, 1.0, 1, 1).unwrap();
        let mut rng = seeded_rng(seed);
        let v = random_field(&mut rng, &mesh, 2, 2, 1, false).unwrap();
        let r = best_approx(&BestApproxProblem {
            target: &v,
            t_cells: (0, 1),
            x_cells: (0, 1),
            time: TimeTrial::Poly(1),
            space: SpaceTrial::Poly(l),
            norm: NormKind::L2Q,
        }).unwrap();
        // perturbing the minimizer by a member of the trial space never helps
        let mut other = r.minimizer.clone();
        other.coeffs_mut()[0] += shift;
        let other = other.prolong_to(v.tensor_mesh().unwrap()).unwrap();
        prop_assert!(r.value <= norm(&v.sub(&other).unwrap(), NormKind::L2Q).unwrap() + 1e-12);
    }

    #[test]
    fn figure1_meshes_are_one_irregular(m in 1usize..=4, n in 1usize..=4, period in 2usize..=4) {
        let base = build_uniform_tensor(1.0, 1.0, 4 * m, n).unwrap();
        let mesh = build_figure1_mesh(&base, period).unwrap();
        prop_assert!(mesh.max_vertices_per_edge() <= 1);
        let area: f64 = mesh.cells().iter().map(|c| c.rect.area()).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
    }
}

#[test]
fn irregular_operator_is_a_projection() {
    let base = build_uniform_tensor(1.0, 1.0, 4, 3).unwrap();
    let mesh = Arc::new(build_figure1_mesh(&base, 2).unwrap());
    let mut rng = seeded_rng(5);
    for _ in 0..5 {
        let v = random_field(&mut rng, &base, 1, 1, 2, true).unwrap();
        let once = interp_x_irregular(&v, &mesh, 1, 1).unwrap();
        let on_lattice = once.to_field().unwrap().prolong_to(&mesh.lattice_mesh()).unwrap();
        let twice = interp_x_irregular(&on_lattice, &mesh, 1, 1).unwrap();
        for (a, b) in once.coeffs().iter().zip(twice.coeffs()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

#[test]
fn irregular_on_conforming_mesh_reproduces_bilinears() {
    let base = build_uniform_tensor(1.0, 1.0, 3, 3).unwrap();
    let mesh = Arc::new(IrregularMesh::conforming(&base));
    let mut rng = seeded_rng(9);
    let v = random_field(&mut rng, &base, 1, 1, 1, true).unwrap();
    let vh = interp_x_tensor_field(&v, &base, 1, 1).unwrap();
    let a = interp_x_irregular(&vh.prolong_to(&mesh.lattice_mesh()).unwrap(), &mesh, 1, 1).unwrap();
    let back = a.to_field().unwrap().prolong_to(&base).unwrap();
    assert!(rel_diff(&back, &vh) < 1e-12);
}
