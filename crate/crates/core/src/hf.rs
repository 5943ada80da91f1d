//! High-fidelity evaluation of a candidate density.
//!
//! The candidate is smoothed by a screened-Poisson filter, resampled onto a
//! refined grid and thresholded into a 0/1 structure, which is then analyzed
//! with an ersatz-material model. The two objectives are the largest von
//! Mises stress in the solid and the solid volume fraction.

use std::collections::VecDeque;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::fem::{
    max_stress, segment_cells, solve_displacement, von_mises, Edge, ElasticModel, LoadCase,
};
use crate::grid::{resample, DensityField, GridSpec};

/// Ratio of the void modulus to the solid modulus in the refined model.
pub const ERSATZ_RATIO: f64 = 1e-6;

/// Cells along an edge segment whose smoothed density is prescribed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletBand {
    pub edge: Edge,
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HfConfig {
    /// Smoothing length of the screened-Poisson filter.
    pub r_h: f64,
    pub refine_factor: usize,
    /// Values at or above this become solid.
    pub threshold: f64,
    pub bands: Vec<DirichletBand>,
}

impl HfConfig {
    pub fn new(r_h: f64) -> Self {
        Self {
            r_h,
            refine_factor: 2,
            threshold: 0.5,
            bands: Vec::new(),
        }
    }

    /// Solid bands over every supported and loaded edge segment.
    pub fn with_bands_from(mut self, lc: &LoadCase) -> Self {
        let segs = lc
            .supports
            .iter()
            .map(|s| (s.edge, s.from, s.to))
            .chain(lc.tractions.iter().map(|t| (t.edge, t.from, t.to)));
        self.bands = segs
            .map(|(edge, from, to)| DirichletBand {
                edge,
                from,
                to,
                value: 1.0,
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_h > 0.0 && self.r_h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_h must be positive, got {}",
                self.r_h
            )));
        }
        if self.refine_factor == 0 {
            return Err(Error::InvalidArgument("refine_factor must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        for b in &self.bands {
            if !(0.0 <= b.from && b.from <= b.to && b.to <= 1.0 && (0.0..=1.0).contains(&b.value)) {
                return Err(Error::InvalidArgument(format!("invalid band {b:?}")));
            }
        }
        Ok(())
    }

    fn prescribed(&self, grid: &GridSpec) -> Vec<Option<f64>> {
        let mut out = vec![None; grid.len()];
        let mut cells = Vec::new();
        for b in &self.bands {
            cells.clear();
            segment_cells(grid, b.edge, b.from, b.to, &mut cells);
            for &c in &cells {
                out[c] = Some(b.value);
            }
        }
        out
    }
}

/// Objective values `j`, constraint values `g` (feasible when all `<= 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Objectives {
    pub j: Vec<f64>,
    pub g: Vec<f64>,
    pub feasible: bool,
}

impl Objectives {
    pub fn feasible(j: Vec<f64>) -> Self {
        Self {
            j,
            g: Vec::new(),
            feasible: true,
        }
    }

    /// Sentinel for structurally invalid candidates.
    pub fn infeasible(n_objectives: usize) -> Self {
        Self {
            j: vec![f64::INFINITY; n_objectives],
            g: vec![f64::INFINITY],
            feasible: false,
        }
    }
}

/// Solves `u - r_h^2 lap(u) = field` with a five-point Laplacian, zero-flux
/// outer boundary and the configured prescribed bands.
pub fn pde_smooth(field: &DensityField, cfg: &HfConfig) -> Result<DensityField> {
    cfg.validate()?;
    let grid = *field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    // number along the shorter axis first for a narrow band
    let x_fast = nx <= ny;
    let order = |i: usize, j: usize| if x_fast { j * nx + i } else { i * ny + j };
    let bw = if x_fast { nx } else { ny };
    let n = grid.len();
    let (cx, cy) = (
        cfg.r_h.powi(2) / grid.hx().powi(2),
        cfg.r_h.powi(2) / grid.hy().powi(2),
    );
    let fixed = cfg.prescribed(&grid);

    let mut a = BandedMatrix::zeros(n, bw);
    let mut rhs = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let r = order(i, j);
            a.add(r, r, 1.0);
            rhs[r] = field.values()[grid.index(i, j)];
            if i + 1 < nx {
                couple(&mut a, r, order(i + 1, j), cx);
            }
            if j + 1 < ny {
                couple(&mut a, r, order(i, j + 1), cy);
            }
        }
    }
    // move prescribed values to the right-hand side before eliminating them
    let mut known = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            if let Some(v) = fixed[grid.index(i, j)] {
                known[order(i, j)] = v;
            }
        }
    }
    let shift = a.mul_vec(&known);
    for j in 0..ny {
        for i in 0..nx {
            let r = order(i, j);
            if let Some(v) = fixed[grid.index(i, j)] {
                a.constrain(r);
                rhs[r] = v;
            } else {
                rhs[r] -= shift[r];
            }
        }
    }
    let sol = a
        .factor()
        .map_err(|e| Error::SolveFailed(format!("smoothing system: {e}")))?
        .solve(&rhs);
    let mut values = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            values[grid.index(i, j)] = sol[order(i, j)];
        }
    }
    DensityField::clamped(grid, values)
}

fn couple(a: &mut BandedMatrix, r: usize, s: usize, c: f64) {
    a.add(r, r, c);
    a.add(s, s, c);
    a.add(r, s, -c);
}

/// Resamples onto the refined grid and thresholds into `{0, 1}`.
pub fn binarize(field: &DensityField, cfg: &HfConfig) -> Result<DensityField> {
    cfg.validate()?;
    let fine = field.grid().refined(cfg.refine_factor)?;
    let r = resample(field, &fine)?;
    let values = r
        .values()
        .iter()
        .map(|&v| if v >= cfg.threshold { 1.0 } else { 0.0 })
        .collect();
    DensityField::new(fine, values)
}

/// Whether some 4-connected solid path joins a `from` cell to a `to` cell.
pub fn solid_path_exists(field: &DensityField, from: &[usize], to: &[usize]) -> bool {
    let grid = field.grid();
    let solid = |e: usize| field.values()[e] > 0.5;
    let mut target = vec![false; grid.len()];
    for &t in to {
        target[t] = true;
    }
    let mut seen = vec![false; grid.len()];
    let mut queue: VecDeque<usize> = from.iter().copied().filter(|&e| solid(e)).collect();
    for &e in &queue {
        seen[e] = true;
    }
    while let Some(e) = queue.pop_front() {
        if target[e] {
            return true;
        }
        let (i, j) = grid.cell(e);
        let mut push = |k: usize| {
            if !seen[k] && solid(k) {
                seen[k] = true;
                queue.push_back(k);
            }
        };
        if i > 0 {
            push(e - 1);
        }
        if i + 1 < grid.nx() {
            push(e + 1);
        }
        if j > 0 {
            push(e - grid.nx());
        }
        if j + 1 < grid.ny() {
            push(e + grid.nx());
        }
    }
    false
}

/// `[max solid stress, solid volume fraction]`, or the infeasible sentinel
/// when the structure is empty or does not connect loads to supports.
///
/// `model` supplies the material; its grid must match the candidate's.
pub fn hf_evaluate(
    candidate: &DensityField,
    model: &ElasticModel,
    lc: &LoadCase,
    cfg: &HfConfig,
) -> Result<Objectives> {
    model.grid().ensure_same(candidate.grid())?;
    let smooth = pde_smooth(candidate, cfg)?;
    let solid = binarize(&smooth, cfg)?;
    let fine = *solid.grid();
    let fraction = solid.mean();
    let loads = lc.load_cells(&fine);
    let supports = lc.support_cells(&fine);
    if fraction == 0.0 || !solid_path_exists(&solid, &loads, &supports) {
        return Ok(Objectives::infeasible(2));
    }
    let mut hf_model = model.with_grid(fine);
    hf_model.e_min = ERSATZ_RATIO * hf_model.e0;
    let bc = lc.materialize(&fine)?;
    let u = match solve_displacement(&hf_model, &solid, &bc) {
        Ok(u) => u,
        Err(Error::SingularSystem { .. }) => return Ok(Objectives::infeasible(2)),
        Err(e) => return Err(e),
    };
    let sf = von_mises(&hf_model, &solid, &u)?;
    match max_stress(&sf, &solid, 0.5) {
        Ok(s) => Ok(Objectives::feasible(vec![s, fraction])),
        Err(Error::EmptySolidSet) => Ok(Objectives::infeasible(2)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in k + 1..n {
                let f = a[r][k] / a[k][k];
                for c in k..n {
                    a[r][c] -= f * a[k][c];
                }
                b[r] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    /// Row-major dense assembly of the same discrete operator.
    fn dense_smooth(field: &DensityField, cfg: &HfConfig) -> Vec<f64> {
        let g = *field.grid();
        let n = g.len();
        let fixed = cfg.prescribed(&g);
        let mut a = vec![vec![0.0; n]; n];
        let mut b = field.values().to_vec();
        for e in 0..n {
            if let Some(v) = fixed[e] {
                a[e][e] = 1.0;
                b[e] = v;
                continue;
            }
            a[e][e] = 1.0;
            let (i, j) = g.cell(e);
            let mut link = |k: usize, h: f64| {
                let c = cfg.r_h * cfg.r_h / (h * h);
                a[e][e] += c;
                a[e][k] -= c;
            };
            if i > 0 {
                link(e - 1, g.hx());
            }
            if i + 1 < g.nx() {
                link(e + 1, g.hx());
            }
            if j > 0 {
                link(e - g.nx(), g.hy());
            }
            if j + 1 < g.ny() {
                link(e + g.nx(), g.hy());
            }
        }
        dense_solve(a, b)
    }

    #[test]
    fn constant_is_a_fixed_point() {
        let g = GridSpec::new(6, 9, 1.0, 1.5).unwrap();
        let f = DensityField::constant(g, 0.35).unwrap();
        for v in pde_smooth(&f, &HfConfig::new(0.3)).unwrap().values() {
            assert!((v - 0.35).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_radius_is_identity() {
        let g = GridSpec::new(7, 5, 1.4, 1.0).unwrap();
        let f = DensityField::from_fn(g, |x, y| (x * 3.0 + y).sin().abs()).unwrap();
        let s = pde_smooth(&f, &HfConfig::new(1e-6 * g.hx())).unwrap();
        for (a, b) in s.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn spike_matches_dense_solve() {
        for (nx, ny) in [(7, 7), (9, 5)] {
            let g = GridSpec::unit(nx, ny).unwrap();
            let mut v = vec![0.0; g.len()];
            v[g.index(nx / 2, ny / 2)] = 1.0;
            let f = DensityField::new(g, v).unwrap();
            let mut cfg = HfConfig::new(2.0);
            let got = pde_smooth(&f, &cfg).unwrap();
            for (a, b) in got.values().iter().zip(dense_smooth(&f, &cfg)) {
                assert!((a - b).abs() < 1e-10);
            }
            cfg = cfg.with_bands_from(&LoadCase::cracked_plate());
            let got = pde_smooth(&f, &cfg).unwrap();
            for (a, b) in got.values().iter().zip(dense_smooth(&f, &cfg)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bands_hold_their_value() {
        let g = GridSpec::new(8, 16, 1.0, 2.0).unwrap();
        let lc = LoadCase::cracked_plate();
        let cfg = HfConfig::new(0.1).with_bands_from(&lc);
        let s = pde_smooth(&DensityField::constant(g, 0.0).unwrap(), &cfg).unwrap();
        for e in lc.boundary_band(&g) {
            assert_eq!(s.values()[e], 1.0);
        }
    }

    #[test]
    fn threshold_rules() {
        let g = GridSpec::unit(4, 4).unwrap();
        let cfg = HfConfig::new(1.0);
        let hi = binarize(&DensityField::constant(g, 0.8).unwrap(), &cfg).unwrap();
        assert_eq!(hi.grid().nx(), 8);
        assert!(hi.values().iter().all(|&v| v == 1.0));
        let tie = binarize(&DensityField::constant(g, 0.5).unwrap(), &cfg).unwrap();
        assert!(tie.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ramp_edge_lands_on_the_level_line() {
        // density x / lx crosses 0.5 at x = lx / 2
        let g = GridSpec::new(12, 6, 3.0, 1.5).unwrap();
        let f = DensityField::from_fn(g, |x, _| x / 3.0).unwrap();
        let b = binarize(&f, &HfConfig::new(1.0)).unwrap();
        let fine = *b.grid();
        for j in 0..fine.ny() {
            let first = (0..fine.nx())
                .find(|&i| b.values()[fine.index(i, j)] == 1.0)
                .unwrap();
            let edge = first as f64 * fine.hx();
            assert!((edge - 1.5).abs() <= fine.hx(), "row {j}: edge at {edge}");
            assert!((first..fine.nx()).all(|i| b.values()[fine.index(i, j)] == 1.0));
        }
    }

    fn plate(nx: usize, ny: usize) -> ElasticModel {
        ElasticModel::new(GridSpec::new(nx, ny, 1.0, 2.0).unwrap())
    }

    #[test]
    fn full_solid_patch_gives_analytic_stress() {
        let model = plate(6, 12);
        let lc = LoadCase::patch_tension(2.0);
        let cfg = HfConfig::new(0.05).with_bands_from(&lc);
        let full = DensityField::constant(*model.grid(), 1.0).unwrap();
        let obj = hf_evaluate(&full, &model, &lc, &cfg).unwrap();
        assert!(obj.feasible);
        assert!((obj.j[0] - 2.0).abs() < 1e-8 * 2.0);
        assert_eq!(obj.j[1], 1.0);
    }

    #[test]
    fn void_candidate_is_infeasible() {
        let model = plate(6, 12);
        let lc = LoadCase::cracked_plate();
        let cfg = HfConfig::new(0.05);
        let void = DensityField::constant(*model.grid(), 0.0).unwrap();
        assert_eq!(
            hf_evaluate(&void, &model, &lc, &cfg).unwrap(),
            Objectives::infeasible(2)
        );
    }

    #[test]
    fn disconnected_structure_is_infeasible() {
        let model = plate(8, 16);
        let lc = LoadCase::cracked_plate();
        // a vertical gap separates the supported left strip from the loaded right strip
        let f = DensityField::from_fn(
            *model.grid(),
            |x, _| if (x - 0.5).abs() < 0.2 { 0.0 } else { 1.0 },
        )
        .unwrap();
        let cfg = HfConfig::new(0.01).with_bands_from(&lc);
        assert!(!hf_evaluate(&f, &model, &lc, &cfg).unwrap().feasible);
    }

    #[test]
    fn half_solid_volume_fraction() {
        let model = plate(8, 16);
        let f =
            DensityField::from_fn(*model.grid(), |_, y| if y < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let mut cfg = HfConfig::new(1e-4);
        cfg.refine_factor = 1;
        let s = binarize(&pde_smooth(&f, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(s.mean(), 0.5);
    }

    #[test]
    fn evaluation_is_repeatable() {
        let model = plate(10, 20);
        let lc = LoadCase::cracked_plate();
        let cfg = HfConfig::new(0.05).with_bands_from(&lc);
        let f = DensityField::from_fn(*model.grid(), |x, y| {
            if (x - 0.3).powi(2) + (y - 1.2).powi(2) < 0.05 {
                0.1
            } else {
                0.9
            }
        })
        .unwrap();
        let a = hf_evaluate(&f, &model, &lc, &cfg).unwrap();
        let b = hf_evaluate(&f, &model, &lc, &cfg).unwrap();
        assert!(a.feasible);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn smoothing_obeys_the_maximum_principle(
            v in prop::collection::vec(0.0f64..=1.0, 30),
            r in 0.01f64..1.0,
            banded in any::<bool>(),
        ) {
            let g = GridSpec::new(5, 6, 1.0, 1.2).unwrap();
            let f = DensityField::new(g, v.clone()).unwrap();
            let mut cfg = HfConfig::new(r);
            if banded {
                cfg = cfg.with_bands_from(&LoadCase::cracked_plate());
            }
            let (mut lo, mut hi) = v.iter().fold((1.0f64, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
            if banded {
                hi = hi.max(1.0);
                lo = lo.min(1.0);
            }
            let s = pde_smooth(&f, &cfg).unwrap();
            for x in s.values() {
                prop_assert!(*x >= lo - 1e-9 && *x <= hi + 1e-9);
            }
        }

        #[test]
        fn binary_fields_keep_their_volume_under_tiny_smoothing(
            bits in prop::collection::vec(any::<bool>(), 24),
        ) {
            let g = GridSpec::new(4, 6, 1.0, 1.5).unwrap();
            let f = DensityField::new(g, bits.iter().map(|&b| b as u8 as f64).collect()).unwrap();
            let mut cfg = HfConfig::new(0.1 * g.hx());
            cfg.refine_factor = 1;
            let s = binarize(&pde_smooth(&f, &cfg).unwrap(), &cfg).unwrap();
            prop_assert_eq!(s.mean(), f.mean());
        }
    }
}
