//! Plane-stress finite elements on the structured grid.
//!
//! Every cell is a bilinear quadrilateral with a SIMP-interpolated Young's
//! modulus `E(g) = e_min + g^penal (e0 - e_min)`. Nodes are numbered along the
//! shorter grid axis first so the stiffness matrix has the narrowest band,
//! and the system is solved by a banded Cholesky factorization.

mod element;
mod load;

use crate::banded::{BandedMatrix, CholeskyFactor};
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

pub(crate) use load::segment_cells;
pub use load::{Axis, Edge, LoadCase, Pin, Support, Traction};

use element::{centroid_b, stiffness};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticModel {
    grid: GridSpec,
    pub e0: f64,
    pub e_min: f64,
    pub nu: f64,
    pub penal: f64,
    pub thickness: f64,
    /// Stress relaxation exponent: element stress is scaled by `g^q_rel`.
    pub q_rel: f64,
}

impl ElasticModel {
    /// Unit solid modulus, `e_min = 1e-9`, `nu = 0.3`, `penal = 3`, `q_rel = 0.5`.
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            e0: 1.0,
            e_min: 1e-9,
            nu: 0.3,
            penal: 3.0,
            thickness: 1.0,
            q_rel: 0.5,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Same material on another grid.
    pub fn with_grid(&self, grid: GridSpec) -> Self {
        Self { grid, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.e0 > 0.0
            && self.e0.is_finite()
            && self.e_min > 0.0
            && self.e_min < self.e0
            && self.nu > 0.0
            && self.nu < 0.5
            && self.penal >= 1.0
            && self.thickness > 0.0
            && self.q_rel > 0.0
            && self.q_rel <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid elastic model {self:?}"
            )))
        }
    }

    pub fn young(&self, g: f64) -> f64 {
        self.e_min + g.powf(self.penal) * (self.e0 - self.e_min)
    }

    fn young_derivative(&self, g: f64) -> f64 {
        if g == 0.0 && self.penal > 1.0 {
            return 0.0;
        }
        self.penal * g.powf(self.penal - 1.0) * (self.e0 - self.e_min)
    }

    /// `D` for unit modulus.
    fn unit_constitutive(&self) -> [[f64; 3]; 3] {
        let c = 1.0 / (1.0 - self.nu * self.nu);
        [
            [c, c * self.nu, 0.0],
            [c * self.nu, c, 0.0],
            [0.0, 0.0, c * 0.5 * (1.0 - self.nu)],
        ]
    }
}

/// Node and degree-of-freedom numbering for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    nx: usize,
    ny: usize,
    x_fastest: bool,
}

impl DofMap {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            x_fastest: grid.nx() <= grid.ny(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    /// Node at lattice point `(i, j)`, `0 <= i <= nx`, `0 <= j <= ny`.
    pub fn node(&self, i: usize, j: usize) -> usize {
        if self.x_fastest {
            j * (self.nx + 1) + i
        } else {
            i * (self.ny + 1) + j
        }
    }

    pub fn dof(&self, i: usize, j: usize, axis: Axis) -> usize {
        2 * self.node(i, j) + axis as usize
    }

    /// DOFs of cell `(i, j)` in counterclockwise node order starting bottom-left.
    pub fn element_dofs(&self, i: usize, j: usize) -> [usize; 8] {
        let n = [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ];
        let mut d = [0; 8];
        for (k, node) in n.iter().enumerate() {
            d[2 * k] = 2 * node;
            d[2 * k + 1] = 2 * node + 1;
        }
        d
    }

    fn bandwidth(&self) -> usize {
        let stride = if self.x_fastest {
            self.nx + 1
        } else {
            self.ny + 1
        };
        2 * (stride + 1) + 1
    }
}

/// Constraints and nodal forces on a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    fixed: Vec<usize>,
    force: Vec<f64>,
}

impl BoundaryConditions {
    pub fn new(grid: &GridSpec, mut fixed: Vec<usize>, force: Vec<f64>) -> Result<Self> {
        let n = DofMap::new(grid).n_dofs();
        if force.len() != n {
            return Err(Error::InvalidArgument(format!(
                "force vector has {} entries, grid has {n} dofs",
                force.len()
            )));
        }
        fixed.sort_unstable();
        fixed.dedup();
        if fixed.is_empty() {
            return Err(Error::InvalidArgument("no fixed dofs".into()));
        }
        if let Some(&k) = fixed.iter().find(|&&k| k >= n) {
            return Err(Error::InvalidArgument(format!(
                "fixed dof {k} out of range"
            )));
        }
        Ok(Self { fixed, force })
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    grid: GridSpec,
    sigma_vm: Vec<f64>,
}

impl StressField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma_vm
    }
}

/// `sqrt(sx^2 + sy^2 - sx sy + 3 txy^2)`.
pub fn von_mises_of(s: [f64; 3]) -> f64 {
    vm_squared(s).max(0.0).sqrt()
}

fn vm_squared([sx, sy, txy]: [f64; 3]) -> f64 {
    sx * sx + sy * sy - sx * sy + 3.0 * txy * txy
}

fn check_inputs(
    model: &ElasticModel,
    density: &DensityField,
    bc: &BoundaryConditions,
) -> Result<()> {
    model.validate()?;
    model.grid.ensure_same(density.grid())?;
    if bc.force.len() != DofMap::new(&model.grid).n_dofs() {
        return Err(Error::GridMismatch(
            "boundary conditions were built for another grid".into(),
        ));
    }
    Ok(())
}

struct Analysis {
    map: DofMap,
    ke: [[f64; 8]; 8],
    factor: CholeskyFactor,
    u: Vec<f64>,
}

fn analyze(
    model: &ElasticModel,
    density: &DensityField,
    bc: &BoundaryConditions,
) -> Result<Analysis> {
    check_inputs(model, density, bc)?;
    let grid = model.grid;
    let map = DofMap::new(&grid);
    let ke = stiffness(grid.hx(), grid.hy(), model.nu, model.thickness);
    let mut k = BandedMatrix::zeros(map.n_dofs(), map.bandwidth());
    let g = density.values();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let e = model.young(g[grid.index(i, j)]);
            let dofs = map.element_dofs(i, j);
            for a in 0..8 {
                for b in 0..=a {
                    k.add(dofs[a], dofs[b], e * ke[a][b]);
                }
            }
        }
    }
    for &d in &bc.fixed {
        k.constrain(d);
    }
    let factor = k.factor()?;
    let u = factor.solve(&constrained(&bc.force, &bc.fixed));
    Ok(Analysis { map, ke, factor, u })
}

fn constrained(v: &[f64], fixed: &[usize]) -> Vec<f64> {
    let mut v = v.to_vec();
    for &d in fixed {
        v[d] = 0.0;
    }
    v
}

/// Solves `K(g) u = f` with the fixed DOFs held at zero.
pub fn solve_displacement(
    model: &ElasticModel,
    density: &DensityField,
    bc: &BoundaryConditions,
) -> Result<Vec<f64>> {
    analyze(model, density, bc).map(|a| a.u)
}

fn gather(u: &[f64], dofs: &[usize; 8]) -> [f64; 8] {
    let mut ue = [0.0; 8];
    for (x, &d) in ue.iter_mut().zip(dofs) {
        *x = u[d];
    }
    ue
}

/// Solid-material stress at each cell centroid, `e0 D B u_e`.
fn centroid_stresses(model: &ElasticModel, u: &[f64]) -> Vec<[f64; 3]> {
    let grid = model.grid;
    let map = DofMap::new(&grid);
    let db = db_matrix(model);
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let ue = gather(u, &map.element_dofs(i, j));
            let mut s = [0.0; 3];
            for (r, row) in db.iter().enumerate() {
                s[r] = row.iter().zip(&ue).map(|(a, b)| a * b).sum();
            }
            out.push(s);
        }
    }
    out
}

/// `e0 D B` at the centroid (3 x 8).
fn db_matrix(model: &ElasticModel) -> [[f64; 8]; 3] {
    let b = centroid_b(model.grid.hx(), model.grid.hy());
    let d = model.unit_constitutive();
    let mut db = [[0.0; 8]; 3];
    for r in 0..3 {
        for c in 0..8 {
            db[r][c] = model.e0 * (0..3).map(|k| d[r][k] * b[k][c]).sum::<f64>();
        }
    }
    db
}

fn relaxation(model: &ElasticModel, g: f64) -> f64 {
    g.powf(model.q_rel)
}

/// Relaxed von Mises stress `g^q_rel * vm(e0 D B u_e)` per cell.
pub fn von_mises(model: &ElasticModel, density: &DensityField, u: &[f64]) -> Result<StressField> {
    model.grid.ensure_same(density.grid())?;
    if u.len() != DofMap::new(&model.grid).n_dofs() {
        return Err(Error::InvalidArgument(format!(
            "displacement has {} entries, expected {}",
            u.len(),
            DofMap::new(&model.grid).n_dofs()
        )));
    }
    let sigma_vm = centroid_stresses(model, u)
        .into_iter()
        .zip(density.values())
        .map(|(s, &g)| relaxation(model, g) * von_mises_of(s))
        .collect();
    Ok(StressField {
        grid: model.grid,
        sigma_vm,
    })
}

/// `(sum sigma^P)^(1/P)`, evaluated with the maximum factored out.
pub fn pnorm_stress(sf: &StressField, p_norm: f64) -> f64 {
    pnorm(&sf.sigma_vm, p_norm)
}

fn pnorm(values: &[f64], p: f64) -> f64 {
    let m = values.iter().fold(0.0f64, |m, &s| m.max(s));
    if m == 0.0 {
        return 0.0;
    }
    m * values
        .iter()
        .map(|s| (s / m).powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Largest stress among cells with density at or above `threshold`.
pub fn max_stress(sf: &StressField, density: &DensityField, threshold: f64) -> Result<f64> {
    sf.grid.ensure_same(density.grid())?;
    sf.sigma_vm
        .iter()
        .zip(density.values())
        .filter(|(_, &g)| g >= threshold)
        .map(|(&s, _)| s)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
        .ok_or(Error::EmptySolidSet)
}

/// P-norm stress and its derivative with respect to every cell density.
///
/// One adjoint solve reuses the stiffness factorization of the primal solve.
pub fn pnorm_sensitivity(
    model: &ElasticModel,
    density: &DensityField,
    bc: &BoundaryConditions,
    p_norm: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(p_norm >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "P-norm exponent must be >= 1, got {p_norm}"
        )));
    }
    let an = analyze(model, density, bc)?;
    let grid = model.grid;
    let g = density.values();
    let stresses = centroid_stresses(model, &an.u);
    let vm: Vec<f64> = stresses.iter().map(|s| von_mises_of(*s)).collect();
    let sigma: Vec<f64> = vm
        .iter()
        .zip(g)
        .map(|(v, &ge)| relaxation(model, ge) * v)
        .collect();
    let j = pnorm(&sigma, p_norm);
    let mut grad = vec![0.0; grid.len()];
    if j == 0.0 {
        return Ok((0.0, grad));
    }

    let db = db_matrix(model);
    let mut rhs = vec![0.0; an.map.n_dofs()];
    for jj in 0..grid.ny() {
        for i in 0..grid.nx() {
            let e = grid.index(i, jj);
            if vm[e] == 0.0 {
                continue;
            }
            let w = (sigma[e] / j).powf(p_norm - 1.0);
            if g[e] > 0.0 {
                grad[e] += w * model.q_rel * g[e].powf(model.q_rel - 1.0) * vm[e];
            }
            // d vm / d s = M s / vm with M = [[1, -1/2, 0], [-1/2, 1, 0], [0, 0, 3]]
            let [sx, sy, txy] = stresses[e];
            let ms = [sx - 0.5 * sy, sy - 0.5 * sx, 3.0 * txy];
            let scale = w * relaxation(model, g[e]) / vm[e];
            let dofs = an.map.element_dofs(i, jj);
            for (c, &d) in dofs.iter().enumerate() {
                let dsc: f64 = (0..3).map(|r| db[r][c] * ms[r]).sum();
                rhs[d] += scale * dsc;
            }
        }
    }
    let lambda = an.factor.solve(&constrained(&rhs, &bc.fixed));
    for jj in 0..grid.ny() {
        for i in 0..grid.nx() {
            let e = grid.index(i, jj);
            let dofs = an.map.element_dofs(i, jj);
            let (ue, le) = (gather(&an.u, &dofs), gather(&lambda, &dofs));
            grad[e] -= model.young_derivative(g[e]) * quad_form(&an.ke, &le, &ue);
        }
    }
    Ok((j, grad))
}

fn quad_form(k: &[[f64; 8]; 8], a: &[f64; 8], b: &[f64; 8]) -> f64 {
    k.iter()
        .zip(a)
        .map(|(row, ai)| ai * row.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

/// Compliance `f . u` and its density derivative `-E'(g) u_e^T K0 u_e`.
pub fn compliance(
    model: &ElasticModel,
    density: &DensityField,
    bc: &BoundaryConditions,
) -> Result<(f64, Vec<f64>)> {
    let an = analyze(model, density, bc)?;
    let grid = model.grid;
    let c = bc.force.iter().zip(&an.u).map(|(f, u)| f * u).sum();
    let g = density.values();
    let mut grad = vec![0.0; grid.len()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let e = grid.index(i, j);
            let ue = gather(&an.u, &an.map.element_dofs(i, j));
            grad[e] = -model.young_derivative(g[e]) * quad_form(&an.ke, &ue, &ue);
        }
    }
    Ok((c, grad))
}

#[cfg(test)]
mod tests;
