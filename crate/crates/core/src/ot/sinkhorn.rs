use crate::error::{Error, Result};
use crate::grid::ProbabilityField;

use super::kernel::{KernelApplier, KernelMode};
use super::stabilized::sinkhorn_stabilized;
use super::{CostMatrix, TransportPlan};

/// Smallest magnitude a scaling denominator may take.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub mode: KernelMode,
}

impl SinkhornParams {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            tau: 1e-9,
            max_iter: 10_000,
            mode: KernelMode::Convolutional,
        }
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn mode(mut self, mode: KernelMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Outcome of a Sinkhorn run. `converged` is a flag, not an error: callers
/// decide whether an unconverged result is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornReport<T> {
    pub value: T,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl<T> SinkhornReport<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> SinkhornReport<U> {
        SinkhornReport {
            value: f(self.value),
            iterations: self.iterations,
            final_residual: self.final_residual,
            converged: self.converged,
        }
    }

    pub fn csv_header() -> &'static str {
        "iterations,residual,converged"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{}",
            self.iterations, self.final_residual, self.converged
        )
    }
}

fn check_tolerances(tau: f64, max_iter: usize) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    Ok(())
}

struct Scalings {
    u: Vec<f64>,
    v: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn divide_floored(num: &[f64], den: &[f64], out: &mut [f64]) {
    for ((o, n), d) in out.iter_mut().zip(num).zip(den) {
        *o = n / d.max(DENOMINATOR_FLOOR);
    }
}

fn scalings(kernel: &KernelApplier, a: &[f64], b: &[f64], tau: f64, max_iter: usize) -> Scalings {
    let n = a.len();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    let mut kv = vec![0.0; n];
    let mut ktu = vec![0.0; n];
    kernel.apply(&v, &mut kv);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        divide_floored(a, &kv, &mut u);
        kernel.apply(&u, &mut ktu);
        divide_floored(b, &ktu, &mut v);
        kernel.apply(&v, &mut kv);
        let ra: f64 = u
            .iter()
            .zip(&kv)
            .zip(a)
            .map(|((u, k), a)| (u * k - a).abs())
            .sum();
        let rb: f64 = v
            .iter()
            .zip(&ktu)
            .zip(b)
            .map(|((v, k), b)| (v * k - b).abs())
            .sum();
        residual = ra.max(rb);
        if residual < tau {
            converged = true;
            break;
        }
    }
    Scalings {
        u,
        v,
        iterations,
        residual,
        converged,
    }
}

/// `max(C) / epsilon` above which some kernel entries underflow to zero.
pub const UNDERFLOW_RATIO: f64 = 700.0;

/// Entropy-regularized transport cost `sum_ij P_ij C_ij` between two fields.
///
/// In dense mode, when `max(C) / epsilon` exceeds [`UNDERFLOW_RATIO`], the
/// iterations run on absorbed dual potentials ([`sinkhorn_stabilized`])
/// instead of raw scalings, which would lose the long-range kernel entries.
pub fn sinkhorn_distance(
    a: &ProbabilityField,
    b: &ProbabilityField,
    params: &SinkhornParams,
) -> Result<SinkhornReport<f64>> {
    a.grid().ensure_same(b.grid())?;
    if params.mode == KernelMode::Dense {
        let (g, eps) = (a.grid(), params.epsilon);
        let max_cost =
            ((g.nx() - 1) as f64 * g.hx()).powi(2) + ((g.ny() - 1) as f64 * g.hy()).powi(2);
        if eps > 0.0 && max_cost / eps > UNDERFLOW_RATIO {
            check_tolerances(params.tau, params.max_iter)?;
            let cost = CostMatrix::for_grid(g);
            let (report, _) = sinkhorn_stabilized(
                a.masses(),
                b.masses(),
                &cost,
                eps,
                params.tau,
                params.max_iter,
            )?;
            return Ok(report);
        }
    }
    let kernel = KernelApplier::new(*a.grid(), params.epsilon, params.mode)?;
    sinkhorn_distance_with(&kernel, a, b, params.tau, params.max_iter)
}

/// Same as [`sinkhorn_distance`] with a prebuilt kernel.
pub fn sinkhorn_distance_with(
    kernel: &KernelApplier,
    a: &ProbabilityField,
    b: &ProbabilityField,
    tau: f64,
    max_iter: usize,
) -> Result<SinkhornReport<f64>> {
    a.grid().ensure_same(b.grid())?;
    a.grid().ensure_same(kernel.grid())?;
    check_tolerances(tau, max_iter)?;
    let s = scalings(kernel, a.masses(), b.masses(), tau, max_iter);
    let mut kcv = vec![0.0; s.v.len()];
    kernel.apply_cost(&s.v, &mut kcv);
    let value = s.u.iter().zip(&kcv).map(|(u, k)| u * k).sum();
    Ok(SinkhornReport {
        value,
        iterations: s.iterations,
        final_residual: s.residual,
        converged: s.converged,
    })
}

/// Runs Sinkhorn and materializes `P = diag(u) K diag(v)`; small grids only.
pub fn sinkhorn_plan(
    kernel: &KernelApplier,
    a: &ProbabilityField,
    b: &ProbabilityField,
    tau: f64,
    max_iter: usize,
) -> Result<(SinkhornReport<f64>, TransportPlan)> {
    const LIMIT: usize = 4096;
    let n = a.grid().len();
    if n > LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: LIMIT,
        });
    }
    a.grid().ensure_same(b.grid())?;
    a.grid().ensure_same(kernel.grid())?;
    check_tolerances(tau, max_iter)?;
    let s = scalings(kernel, a.masses(), b.masses(), tau, max_iter);
    let centers = a.grid().centers();
    let mut plan = Vec::with_capacity(n * n);
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = s.u[i] * kernel.entry(i, j) * s.v[j];
            let (xi, yi) = centers[i];
            let (xj, yj) = centers[j];
            value += p * ((xi - xj).powi(2) + (yi - yj).powi(2));
            plan.push(p);
        }
    }
    Ok((
        SinkhornReport {
            value,
            iterations: s.iterations,
            final_residual: s.residual,
            converged: s.converged,
        },
        TransportPlan::from_raw(n, plan),
    ))
}

/// Entropic Wasserstein barycenter of several fields on a common grid.
///
/// The returned field is renormalized to unit mass.
pub fn sinkhorn_barycenter(
    inputs: &[&ProbabilityField],
    weights: &[f64],
    params: &SinkhornParams,
) -> Result<SinkhornReport<ProbabilityField>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("barycenter needs inputs".into()))?;
    let kernel = KernelApplier::new(*first.grid(), params.epsilon, params.mode)?;
    sinkhorn_barycenter_with(&kernel, inputs, weights, params.tau, params.max_iter)
}

pub fn sinkhorn_barycenter_with(
    kernel: &KernelApplier,
    inputs: &[&ProbabilityField],
    weights: &[f64],
    tau: f64,
    max_iter: usize,
) -> Result<SinkhornReport<ProbabilityField>> {
    if inputs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "barycenter needs at least 2 inputs, got {}",
            inputs.len()
        )));
    }
    if weights.len() != inputs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} inputs",
            weights.len(),
            inputs.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights(sum));
    }
    let grid = *inputs[0].grid();
    for p in inputs {
        grid.ensure_same(p.grid())?;
    }
    grid.ensure_same(kernel.grid())?;
    check_tolerances(tau, max_iter)?;

    let n = grid.len();
    let m = inputs.len();
    let mut u = vec![vec![1.0; n]; m];
    let mut v = vec![vec![1.0; n]; m];
    let mut ktu = vec![vec![0.0; n]; m];
    let mut log_ktu = vec![vec![0.0; n]; m];
    for k in 0..m {
        kernel.apply(&u[k], &mut ktu[k]);
        log_floored(&ktu[k], &mut log_ktu[k]);
    }
    let mut kv = vec![0.0; n];
    let mut geo = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        for i in 0..m {
            kernel.apply(&v[i], &mut kv);
            divide_floored(inputs[i].masses(), &kv, &mut u[i]);
            kernel.apply(&u[i], &mut ktu[i]);
            log_floored(&ktu[i], &mut log_ktu[i]);
            geometric_mean(&log_ktu, weights, &mut geo);
            divide_floored(&geo, &ktu[i], &mut v[i]);
        }
        residual = marginal_spread(&v, &ktu);
        if residual < tau {
            converged = true;
            break;
        }
    }

    geometric_mean(&log_ktu, weights, &mut geo);
    let total: f64 = geo.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::SolveFailed(format!(
            "barycenter mass degenerated to {total}"
        )));
    }
    geo.iter_mut().for_each(|g| *g /= total);
    let value = ProbabilityField::new(grid, geo)?;
    Ok(SinkhornReport {
        value,
        iterations,
        final_residual: residual,
        converged,
    })
}

fn log_floored(x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o = v.max(DENOMINATOR_FLOOR).ln();
    }
}

fn geometric_mean(logs: &[Vec<f64>], weights: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (l, &w) in logs.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(l) {
            *o += w * x;
        }
    }
    out.iter_mut().for_each(|o| *o = o.exp());
}

/// Sum over cells of the (population) standard deviation across inputs of
/// the second marginals `v_i ∘ K^T u_i`.
fn marginal_spread(v: &[Vec<f64>], ktu: &[Vec<f64>]) -> f64 {
    let m = v.len() as f64;
    let n = v[0].len();
    let mut total = 0.0;
    for e in 0..n {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for (vi, ki) in v.iter().zip(ktu) {
            let x = vi[e] * ki[e];
            s += x;
            s2 += x * x;
        }
        let mean = s / m;
        total += (s2 / m - mean * mean).max(0.0).sqrt();
    }
    total
}
