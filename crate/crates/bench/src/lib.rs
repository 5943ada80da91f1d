//! Deterministic inputs shared by the benchmarks.

use wxo_core::grid::{to_probability, DensityField, GridSpec, ProbabilityField};

pub fn unit_square(n: usize) -> GridSpec {
    GridSpec::new(n, n, 1.0, 1.0).expect("positive size")
}

/// Smooth bump centred at `(cx, cy)` with radius `r`, never exactly zero.
pub fn blob(grid: GridSpec, cx: f64, cy: f64, r: f64) -> ProbabilityField {
    let f = DensityField::from_fn(grid, |x, y| {
        let d2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
        (-d2).exp().max(1e-3)
    })
    .expect("densities in range");
    to_probability(&f, 0.0).expect("positive mass")
}

/// Pseudo-random density in [0.2, 0.9] from a fixed linear congruential stream.
pub fn speckled(grid: GridSpec, seed: u64) -> DensityField {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let values = (0..grid.len())
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            0.2 + 0.7 * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect();
    DensityField::new(grid, values).expect("densities in range")
}

/// `n` points on a noisy anti-diagonal, so several fronts appear.
pub fn objective_cloud(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = seed | 1;
    let mut next = move || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| {
            let t = next();
            vec![t + 0.3 * next(), 1.0 - t + 0.3 * next()]
        })
        .collect()
}
