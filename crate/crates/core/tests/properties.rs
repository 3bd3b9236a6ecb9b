use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use berry_core::eigenbundle::{branch_sample, gauge_fix, SpectralTolerances};
use berry_core::gauge::{rotate_to_pole_section, transition_function, winding_number_u1, Pole};
use berry_core::geometry::{make_path, solid_angle, spherical_loop, PathPreset};
use berry_core::linalg::{eig_hermitian, exp_antihermitian, unitarize, ComplexMatrix, C64};
use berry_core::models::{make_lambda_system, make_spin_dipole, HamiltonianFamily, SharedModel, Spin};
use berry_core::random::{random_hermitian, random_unitary, seeded};
use berry_core::reproduce::wrap;
use berry_core::transport::{holonomy, Method, TransportOptions};

fn direction() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -PI..PI).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), n in 1usize..=12) {
        let h = random_hermitian(&mut seeded(seed), n);
        let e = eig_hermitian(&h).unwrap();
        let back = &(&e.vectors * &ComplexMatrix::diag_real(&e.values)) * &e.vectors.adjoint();
        prop_assert!(back.max_abs_diff(h.matrix()) <= 1e-9 * h.matrix().max_norm().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unitarize_is_idempotent(seed in any::<u64>(), n in 1usize..=6) {
        let u = random_unitary(&mut seeded(seed), n);
        prop_assert!(unitarize(u.matrix()).unwrap().matrix().max_abs_diff(u.matrix()) <= 1e-10);
    }

    #[test]
    fn exp_of_scaled_generator_is_a_group(seed in any::<u64>(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let a = berry_core::random::random_antihermitian(&mut seeded(seed), 3);
        let lhs = exp_antihermitian(&a.scale_real(s)).unwrap().matrix() * exp_antihermitian(&a.scale_real(t)).unwrap().matrix();
        prop_assert!(lhs.max_abs_diff(exp_antihermitian(&a.scale_real(s + t)).unwrap().matrix()) <= 1e-10);
    }

    #[test]
    fn gauge_fix_depends_only_on_the_span(seed in any::<u64>(), k in 1usize..=3) {
        let mut rng = seeded(seed);
        let v = random_unitary(&mut rng, 5).matrix().column_block(0, k);
        let g = random_unitary(&mut rng, k);
        prop_assert!(gauge_fix(&(&v * g.matrix())).max_abs_diff(&gauge_fix(&v)) <= 1e-12);
    }

    #[test]
    fn cap_solid_angle_and_reversal(theta in 0.1f64..3.0, axis in direction()) {
        let p = make_path(&PathPreset::SphericalCap { theta, radius: 1.0, axis, turns: 1, nodes: 256 }).unwrap();
        let lp = spherical_loop(&p).unwrap();
        let om = solid_angle(&lp, Some(axis)).unwrap();
        let exact = 2.0 * PI * (1.0 - theta.cos());
        prop_assert!(wrap(om - exact).abs() < 1e-3);
        prop_assert!(wrap(om + solid_angle(&lp.reversed(), Some(axis)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn spin_cocycle_and_projection(twice in 1u32..=4, b in direction(), r in 0.2f64..5.0) {
        let model: SharedModel = Arc::new(make_spin_dipole(Spin::from_twice(twice).unwrap()));
        let tol = SpectralTolerances::default();
        let point = b.map(|x| x * r).into();
        if b[2].abs() > 0.99 {
            return Ok(());
        }
        for br in model.branches().to_vec() {
            let n = rotate_to_pole_section(Arc::clone(&model), &br, Pole::North, &tol).unwrap();
            let s = rotate_to_pole_section(Arc::clone(&model), &br, Pole::South, &tol).unwrap();
            let ns = transition_function(&n, &s, &point).unwrap();
            let sn = transition_function(&s, &n, &point).unwrap();
            prop_assert!((ns.matrix.matrix() * sn.matrix.matrix()).max_abs_diff(&ComplexMatrix::identity(1)) <= 1e-10);
            let fibre = branch_sample(model.as_ref(), &point, &br, &tol).unwrap();
            prop_assert!(n.frame_at(&point).unwrap().fibre_residual(&fibre) <= 1e-9);
        }
    }

    #[test]
    fn winding_of_monomials(k in -6i64..=6, n in 32usize..200) {
        let zs: Vec<C64> = (0..n).map(|j| C64::from_polar(2.0, 2.0 * PI * (k * j as i64) as f64 / n as f64)).collect();
        prop_assert_eq!(winding_number_u1(&zs).unwrap().winding, k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spin_phase_is_minus_m_solid_angle(theta in 0.2f64..2.9, axis in direction(), twice in 1u32..=3) {
        let model = make_spin_dipole(Spin::from_twice(twice).unwrap());
        let p = make_path(&PathPreset::SphericalCap { theta, radius: 1.0, axis, turns: 1, nodes: 64 }).unwrap();
        let om = 2.0 * PI * (1.0 - theta.cos());
        let opts = TransportOptions { steps: 512, ..Default::default() };
        for br in model.branches() {
            let m = br.first_index as f64 - twice as f64 / 2.0;
            let h = holonomy(&model, &p, br, Method::Ode, &opts).unwrap();
            prop_assert!(wrap(h.abelian_phase.unwrap() + m * om).abs() <= 1e-5);
        }
    }

    #[test]
    fn lambda_holonomy_reversal_and_unitarity(c in direction(), a in 0.1f64..0.5) {
        let model = make_lambda_system();
        let br = model.branch("dark").unwrap();
        let p = make_path(&PathPreset::SphericalCap { theta: a, radius: 1.0, axis: c, turns: 1, nodes: 64 }).unwrap();
        let opts = TransportOptions { steps: 256, ..Default::default() };
        let h = holonomy(&model, &p, &br, Method::Ode, &opts).unwrap();
        let r = holonomy(&model, &p.reversed(), &br, Method::Ode, &opts).unwrap();
        prop_assert!((r.unitary.matrix() * h.unitary.matrix()).max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-8);
        prop_assert!(h.diagnostics.unitarity_residual <= 1e-10);
    }
}
