use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// How the Gibbs kernel `K = exp(-C / epsilon)` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelMode {
    /// Materialized `n x n` matrix; `O(n^2)` memory and work per product.
    Dense,
    /// Two 1-D Gaussian passes, exploiting separability of the squared cost.
    Convolutional,
}

impl std::str::FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(KernelMode::Dense),
            "conv" | "convolutional" => Ok(KernelMode::Convolutional),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        k: Vec<f64>,
        // cost is recomputed per entry so only one n x n buffer is held
        centers: Vec<(f64, f64)>,
    },
    Separable {
        kx: Vec<f64>,
        ky: Vec<f64>,
        // kx[d] * (d hx)^2, used for the cost-weighted product
        kcx: Vec<f64>,
        kcy: Vec<f64>,
    },
}

/// Gibbs kernel on the cell centers of a grid. `K` is symmetric, so the
/// same product serves for `K v` and `K^T u`.
#[derive(Debug, Clone)]
pub struct KernelApplier {
    grid: GridSpec,
    epsilon: f64,
    mode: KernelMode,
    repr: Repr,
}

impl KernelApplier {
    pub fn new(grid: GridSpec, epsilon: f64, mode: KernelMode) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let repr = match mode {
            KernelMode::Dense => {
                let centers = grid.centers();
                let n = centers.len();
                let mut k = Vec::with_capacity(n * n);
                for &(xi, yi) in &centers {
                    for &(xj, yj) in &centers {
                        let c = (xi - xj).powi(2) + (yi - yj).powi(2);
                        k.push((-c / epsilon).exp());
                    }
                }
                Repr::Dense { k, centers }
            }
            KernelMode::Convolutional => {
                let axis = |n: usize, h: f64| -> (Vec<f64>, Vec<f64>) {
                    let mut k: Vec<f64> = (0..n)
                        .map(|d| (-((d as f64 * h).powi(2)) / epsilon).exp())
                        .collect();
                    // drop the tail that underflowed to exactly zero
                    while k.len() > 1 && *k.last().unwrap() == 0.0 {
                        k.pop();
                    }
                    let kc = k
                        .iter()
                        .enumerate()
                        .map(|(d, w)| w * (d as f64 * h).powi(2))
                        .collect();
                    (k, kc)
                };
                let (kx, kcx) = axis(grid.nx(), grid.hx());
                let (ky, kcy) = axis(grid.ny(), grid.hy());
                Repr::Separable { kx, ky, kcx, kcy }
            }
        };
        Ok(Self {
            grid,
            epsilon,
            mode,
            repr,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    /// Single kernel entry `K_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Dense { k, .. } => k[i * self.grid.len() + j],
            Repr::Separable { kx, ky, .. } => {
                let (ix, iy) = self.grid.cell(i);
                let (jx, jy) = self.grid.cell(j);
                let dx = ix.abs_diff(jx);
                let dy = iy.abs_diff(jy);
                kx.get(dx).copied().unwrap_or(0.0) * ky.get(dy).copied().unwrap_or(0.0)
            }
        }
    }

    /// `out = K x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.grid.len());
        match &self.repr {
            Repr::Dense { k, .. } => dense_matvec(k, x, out),
            Repr::Separable { kx, ky, .. } => {
                let mut tmp = vec![0.0; x.len()];
                separable(&self.grid, kx, ky, x, &mut tmp, out);
            }
        }
    }

    /// `out = (K ∘ C) x`, the cost-weighted kernel used to evaluate `<P, C>`.
    pub fn apply_cost(&self, x: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Dense { k, centers } => {
                let n = x.len();
                for ((o, row), &(xi, yi)) in out.iter_mut().zip(k.chunks_exact(n)).zip(centers) {
                    *o = row
                        .iter()
                        .zip(x)
                        .zip(centers)
                        .map(|((w, v), &(xj, yj))| w * ((xi - xj).powi(2) + (yi - yj).powi(2)) * v)
                        .sum();
                }
            }
            Repr::Separable { kx, ky, kcx, kcy } => {
                // C = dx^2 + dy^2 splits K∘C into two separable kernels
                let mut tmp = vec![0.0; x.len()];
                let mut second = vec![0.0; x.len()];
                separable(&self.grid, kcx, ky, x, &mut tmp, out);
                separable(&self.grid, kx, kcy, x, &mut tmp, &mut second);
                for (o, s) in out.iter_mut().zip(&second) {
                    *o += s;
                }
            }
        }
    }
}

fn dense_matvec(k: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(k.chunks_exact(n)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn separable(grid: &GridSpec, wx: &[f64], wy: &[f64], x: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let rx = wx.len() - 1;
    let ry = wy.len() - 1;
    for (src, dst) in x.chunks_exact(nx).zip(tmp.chunks_exact_mut(nx)) {
        for (i, d) in dst.iter_mut().enumerate() {
            let lo = i.saturating_sub(rx);
            let hi = (i + rx).min(nx - 1);
            let mut s = 0.0;
            for (ip, xv) in src[lo..=hi].iter().enumerate() {
                s += wx[(lo + ip).abs_diff(i)] * xv;
            }
            *d = s;
        }
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..ny {
        let lo = j.saturating_sub(ry);
        let hi = (j + ry).min(ny - 1);
        let dst = &mut out[j * nx..(j + 1) * nx];
        for jp in lo..=hi {
            let w = wy[jp.abs_diff(j)];
            let src = &tmp[jp * nx..(jp + 1) * nx];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
}
