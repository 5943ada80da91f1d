use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plate(nx: usize, ny: usize, lx: f64, ly: f64) -> ElasticModel {
    ElasticModel::new(GridSpec::new(nx, ny, lx, ly).unwrap())
}

fn random_density(grid: GridSpec, seed: u64, lo: f64) -> DensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DensityField::new(
        grid,
        (0..grid.len()).map(|_| rng.gen_range(lo..=1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn patch_test_reproduces_uniform_tension() {
    for (nx, ny, lx, ly) in [(2, 2, 1.0, 1.0), (4, 3, 2.0, 1.5), (7, 11, 1.0, 3.0)] {
        let mut model = plate(nx, ny, lx, ly);
        model.thickness = 0.5;
        model.e0 = 3.0;
        let grid = *model.grid();
        let q = 1.0;
        let bc = LoadCase::patch_tension(q).materialize(&grid).unwrap();
        let full = DensityField::constant(grid, 1.0).unwrap();
        let u = solve_displacement(&model, &full, &bc).unwrap();
        let map = DofMap::new(&grid);
        let (sy, e) = (q / model.thickness, model.e0);
        let scale = sy * ly / e;
        for j in 0..=grid.ny() {
            for i in 0..=grid.nx() {
                let (x, y) = (i as f64 * grid.hx(), j as f64 * grid.hy());
                let ux = -model.nu * sy * x / e;
                let uy = sy * y / e;
                assert!((u[map.dof(i, j, Axis::X)] - ux).abs() < 1e-8 * scale);
                assert!((u[map.dof(i, j, Axis::Y)] - uy).abs() < 1e-8 * scale);
            }
        }
        let sf = von_mises(&model, &full, &u).unwrap();
        for s in sf.values() {
            assert!((s - sy).abs() < 1e-8 * sy, "{s} vs {sy}");
        }
        assert!((max_stress(&sf, &full, 0.5).unwrap() - sy).abs() < 1e-8 * sy);
    }
}

#[test]
fn solve_residual_is_tiny() {
    let model = plate(12, 6, 2.0, 1.0);
    let grid = *model.grid();
    let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
    let rho = random_density(grid, 4, 0.01);
    let u = solve_displacement(&model, &rho, &bc).unwrap();
    // rebuild K u independently from the element matrices
    let map = DofMap::new(&grid);
    let ke = element::stiffness(grid.hx(), grid.hy(), model.nu, model.thickness);
    let mut ku = vec![0.0; map.n_dofs()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let e = model.young(rho.values()[grid.index(i, j)]);
            let d = map.element_dofs(i, j);
            for a in 0..8 {
                for b in 0..8 {
                    ku[d[a]] += e * ke[a][b] * u[d[b]];
                }
            }
        }
    }
    let fixed = bc.fixed_dofs();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (k, (r, f)) in ku.iter().zip(bc.force()).enumerate() {
        if fixed.binary_search(&k).is_ok() {
            assert_eq!(u[k], 0.0);
            continue;
        }
        num += (r - f).powi(2);
        den += f * f;
    }
    assert!((num / den).sqrt() < 1e-10);
}

#[test]
fn zero_load_gives_zero_displacement() {
    let model = plate(5, 4, 1.0, 1.0);
    let grid = *model.grid();
    let bc = LoadCase::patch_tension(0.0).materialize(&grid).unwrap();
    let u = solve_displacement(&model, &random_density(grid, 1, 0.1), &bc).unwrap();
    assert!(u.iter().all(|&x| x == 0.0));
}

#[test]
fn doubling_stiffness_halves_displacement() {
    let mut model = plate(6, 4, 1.5, 1.0);
    let grid = *model.grid();
    let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
    let rho = random_density(grid, 2, 0.2);
    let u1 = solve_displacement(&model, &rho, &bc).unwrap();
    model.e0 *= 2.0;
    model.e_min *= 2.0;
    let u2 = solve_displacement(&model, &rho, &bc).unwrap();
    for (a, b) in u1.iter().zip(&u2) {
        assert!((a - 2.0 * b).abs() <= 1e-10 * a.abs().max(1e-12));
    }
}

#[test]
fn von_mises_closed_forms() {
    assert_eq!(von_mises_of([2.5, 0.0, 0.0]), 2.5);
    assert!((von_mises_of([0.0, 0.0, 1.5]) - 3f64.sqrt() * 1.5).abs() < 1e-15);
}

#[test]
fn pnorm_closed_forms() {
    let g = GridSpec::unit(2, 2).unwrap();
    let sf = StressField {
        grid: g,
        sigma_vm: vec![5.0, 0.0, 0.0, 0.0],
    };
    for p in [1.0, 2.0, 8.0, 64.0] {
        assert!((pnorm_stress(&sf, p) - 5.0).abs() < 1e-12);
    }
    let sf = StressField {
        grid: g,
        sigma_vm: vec![3.0, 4.0, 0.0, 0.0],
    };
    let want = (3f64.powi(64) + 4f64.powi(64)).powf(1.0 / 64.0);
    let got = pnorm_stress(&sf, 64.0);
    assert!((got - want).abs() < 1e-12 * want);
    assert!((got - 4.0).abs() < 0.02 * 4.0);
}

#[test]
fn max_stress_masks_void() {
    let g = GridSpec::unit(2, 2).unwrap();
    let sf = StressField {
        grid: g,
        sigma_vm: vec![1.0, 9.0, 2.0, 7.0],
    };
    let half = DensityField::new(g, vec![1.0, 0.0, 0.5, 0.2]).unwrap();
    assert_eq!(max_stress(&sf, &half, 0.5).unwrap(), 2.0);
    let void = DensityField::constant(g, 0.0).unwrap();
    assert!(matches!(
        max_stress(&sf, &void, 0.5),
        Err(Error::EmptySolidSet)
    ));
}

fn fd_check(model: &ElasticModel, bc: &BoundaryConditions, rho: &DensityField, p: f64, seed: u64) {
    let (_, grad) = pnorm_sensitivity(model, rho, bc, p).unwrap();
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    for _ in 0..10 {
        let e = rng.gen_range(0..rho.len());
        let eval = |d: f64| {
            let mut v = rho.values().to_vec();
            v[e] += d;
            let f = DensityField::new(*rho.grid(), v).unwrap();
            let u = solve_displacement(model, &f, bc).unwrap();
            pnorm_stress(&von_mises(model, &f, &u).unwrap(), p)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let err = (grad[e] - fd).abs() / fd.abs().max(1e-6 * gmax);
        assert!(err < 1e-3, "cell {e}: adjoint {} fd {fd}", grad[e]);
    }
}

#[test]
fn adjoint_matches_finite_differences() {
    let model = plate(6, 3, 2.0, 1.0);
    let grid = *model.grid();
    for (k, lc) in [LoadCase::cracked_plate(), LoadCase::patch_tension(1.0)]
        .iter()
        .enumerate()
    {
        let bc = lc.materialize(&grid).unwrap();
        fd_check(
            &model,
            &bc,
            &random_density(grid, 10 + k as u64, 0.1),
            8.0,
            k as u64,
        );
    }
}

#[test]
fn mirror_symmetric_problem_has_mirror_symmetric_gradient() {
    let model = plate(8, 5, 1.6, 1.0);
    let grid = *model.grid();
    let lc = LoadCase {
        tractions: vec![Traction {
            edge: Edge::Top,
            from: 0.25,
            to: 0.75,
            fx: 0.0,
            fy: 1.0,
        }],
        ..LoadCase::patch_tension(0.0)
    };
    let bc = lc.materialize(&grid).unwrap();
    let rho = DensityField::from_fn(grid, |x, y| {
        if (x - 0.8).abs() < 0.3 && (y - 0.5).abs() < 0.2 {
            0.3
        } else {
            1.0
        }
    })
    .unwrap();
    let (_, grad) = pnorm_sensitivity(&model, &rho, &bc, 8.0).unwrap();
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let a = grad[grid.index(i, j)];
            let b = grad[grid.index(grid.nx() - 1 - i, j)];
            assert!((a - b).abs() < 1e-9 * gmax, "({i}, {j}): {a} vs {b}");
        }
    }
}

#[test]
fn compliance_gradient_matches_finite_differences() {
    let model = plate(5, 4, 1.0, 1.0);
    let grid = *model.grid();
    let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
    let rho = random_density(grid, 3, 0.2);
    let (_, grad) = compliance(&model, &rho, &bc).unwrap();
    for e in [0, 7, 19] {
        let c = |d: f64| {
            let mut v = rho.values().to_vec();
            v[e] += d;
            compliance(&model, &DensityField::new(grid, v).unwrap(), &bc)
                .unwrap()
                .0
        };
        let fd = (c(1e-6) - c(-1e-6)) / 2e-6;
        assert!((grad[e] - fd).abs() < 1e-5 * fd.abs());
    }
}

#[test]
fn bc_validation() {
    let g = GridSpec::unit(2, 2).unwrap();
    assert!(BoundaryConditions::new(&g, vec![], vec![0.0; 18]).is_err());
    assert!(BoundaryConditions::new(&g, vec![0], vec![0.0; 17]).is_err());
    assert!(BoundaryConditions::new(&g, vec![18], vec![0.0; 18]).is_err());
    let model = ElasticModel::new(g);
    let other = LoadCase::cracked_plate()
        .materialize(&GridSpec::unit(3, 2).unwrap())
        .unwrap();
    let rho = DensityField::constant(g, 1.0).unwrap();
    assert!(matches!(
        solve_displacement(&model, &rho, &other),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn unsupported_structure_is_singular() {
    let g = GridSpec::unit(3, 3).unwrap();
    let bc = BoundaryConditions::new(&g, vec![0], vec![0.0; DofMap::new(&g).n_dofs()]).unwrap();
    let rho = DensityField::constant(g, 1.0).unwrap();
    assert!(matches!(
        solve_displacement(&ElasticModel::new(g), &rho, &bc),
        Err(Error::SingularSystem { .. })
    ));
}

#[test]
fn cracked_plate_layout() {
    let g = GridSpec::new(4, 8, 1.0, 2.0).unwrap();
    let lc = LoadCase::cracked_plate();
    let bc = lc.materialize(&g).unwrap();
    // 5 rollers on the lower half of the left edge plus the corner pin
    assert_eq!(bc.fixed_dofs().len(), 6);
    let total_fx: f64 = bc.force().iter().step_by(2).sum();
    assert!((total_fx - 2.0).abs() < 1e-14);
    assert_eq!(lc.support_cells(&g), vec![0, 4, 8, 12]);
    assert_eq!(
        lc.load_cells(&g),
        (0..8).map(|j| 4 * j + 3).collect::<Vec<_>>()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compliance_does_not_rise_when_material_is_added(
        seed in 0u64..1000, cell in 0usize..20, bump in 0.01f64..0.5,
    ) {
        let model = plate(5, 4, 1.0, 1.0);
        let grid = *model.grid();
        let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
        let rho = random_density(grid, seed, 0.05);
        let (c0, _) = compliance(&model, &rho, &bc).unwrap();
        let mut v = rho.values().to_vec();
        v[cell] = (v[cell] + bump).min(1.0);
        let (c1, _) = compliance(&model, &DensityField::new(grid, v).unwrap(), &bc).unwrap();
        prop_assert!(c1 <= c0 * (1.0 + 1e-12));
    }

    #[test]
    fn max_stress_never_exceeds_pnorm_on_the_same_cells(
        seed in 0u64..1000, p in 1.0f64..32.0,
    ) {
        let model = plate(6, 4, 1.5, 1.0);
        let grid = *model.grid();
        let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
        let rho = random_density(grid, seed, 0.0);
        let u = solve_displacement(&model, &rho, &bc).unwrap();
        let sf = von_mises(&model, &rho, &u).unwrap();
        if let Ok(m) = max_stress(&sf, &rho, 0.5) {
            let solid: Vec<f64> = sf.values().iter().zip(rho.values())
                .filter(|(_, g)| **g >= 0.5).map(|(s, _)| *s).collect();
            prop_assert!(m <= pnorm(&solid, p) * (1.0 + 1e-12));
            prop_assert!(pnorm(&solid, p) <= (solid.len() as f64).powf(1.0 / p) * m * (1.0 + 1e-12));
        }
    }
}
