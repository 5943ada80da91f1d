use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wxo_core::grid::{GridSpec, ProbabilityField};
use wxo_core::ot::{
    exact_ot_lp, sinkhorn_distance, sinkhorn_plan, CostMatrix, KernelApplier, KernelMode,
    SinkhornParams,
};

fn random_field(g: GridSpec, rng: &mut ChaCha8Rng) -> ProbabilityField {
    let w = (0..g.len())
        .map(|_| {
            if rng.gen_bool(0.5) {
                rng.gen::<f64>()
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>();
    let w = if w.iter().all(|&x| x == 0.0) {
        vec![1.0; g.len()]
    } else {
        w
    };
    ProbabilityField::normalized(g, w).unwrap()
}

#[test]
fn regularized_cost_tracks_exact_transport() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let g = GridSpec::new(
            rng.gen_range(2..=7),
            rng.gen_range(2..=7),
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..2.0),
        )
        .unwrap();
        let a = random_field(g, &mut rng);
        let b = random_field(g, &mut rng);
        let cost = CostMatrix::for_grid(&g);
        let (exact, plan) = exact_ot_lp(a.masses(), b.masses(), &cost).unwrap();
        assert!((plan.cost(&cost) - exact).abs() <= 1e-12 * exact.max(1.0));
        let params = SinkhornParams::new(1e-3 * cost.max())
            .mode(KernelMode::Dense)
            .max_iter(100_000);
        let r = sinkhorn_distance(&a, &b, &params).unwrap();
        assert!(r.converged);
        assert!(
            (r.value - exact).abs() <= 0.03 * exact,
            "sinkhorn {} vs exact {exact}",
            r.value
        );
    }
}

#[test]
fn dense_and_separable_kernels_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = GridSpec::new(9, 6, 1.0, 0.7).unwrap();
    let x: Vec<f64> = (0..g.len()).map(|_| rng.gen()).collect();
    for eps in [1e-3, 1e-2, 1e-1, 1.0] {
        let d = KernelApplier::new(g, eps, KernelMode::Dense).unwrap();
        let c = KernelApplier::new(g, eps, KernelMode::Convolutional).unwrap();
        let (mut yd, mut yc) = (vec![0.0; g.len()], vec![0.0; g.len()]);
        d.apply(&x, &mut yd);
        c.apply(&x, &mut yc);
        for (p, q) in yd.iter().zip(&yc) {
            assert!((p - q).abs() <= 1e-12 * p.abs().max(1e-300));
        }
        d.apply_cost(&x, &mut yd);
        c.apply_cost(&x, &mut yc);
        for (p, q) in yd.iter().zip(&yc) {
            assert!((p - q).abs() <= 1e-12 * p.abs().max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn converged_plans_meet_the_marginals(
        nx in 2usize..7, ny in 2usize..7, seed in any::<u64>(), scale in 0.02f64..0.5,
    ) {
        let g = GridSpec::new(nx, ny, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_field(g, &mut rng);
        let b = random_field(g, &mut rng);
        let tau = 1e-8;
        let k = KernelApplier::new(g, scale, KernelMode::Convolutional).unwrap();
        let (rep, plan) = sinkhorn_plan(&k, &a, &b, tau, 50_000).unwrap();
        prop_assume!(rep.converged);
        let ra: f64 = plan.row_sums().iter().zip(a.masses()).map(|(r, m)| (r - m).abs()).sum();
        let rb: f64 = plan.col_sums().iter().zip(b.masses()).map(|(r, m)| (r - m).abs()).sum();
        prop_assert!(ra.max(rb) < tau, "residual {} {}", ra, rb);
        prop_assert!(plan.cost(&CostMatrix::for_grid(&g)) >= 0.0);
    }

    #[test]
    fn distance_is_symmetric(seed in any::<u64>()) {
        let g = GridSpec::new(5, 4, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_field(g, &mut rng);
        let b = random_field(g, &mut rng);
        let p = SinkhornParams::new(0.05).max_iter(50_000);
        let ab = sinkhorn_distance(&a, &b, &p).unwrap();
        let ba = sinkhorn_distance(&b, &a, &p).unwrap();
        prop_assert!((ab.value - ba.value).abs() <= 1e-6 * ab.value.max(1e-9));
    }
}
