//! Dense Sinkhorn with absorption of large scalings into dual potentials.
//!
//! The iterations are the same multiplicative updates as the plain solver,
//! but whenever a scaling leaves `[1/BOUND, BOUND]` it is folded into the
//! potentials `f, g` and the kernel is rebuilt as
//! `K_ij = exp((f_i + g_j - C_ij) / eps)`. This keeps small-`eps` problems
//! representable where `exp(-C / eps)` underflows.

use crate::error::{Error, Result};

use super::sinkhorn::{SinkhornReport, DENOMINATOR_FLOOR};
use super::{CostMatrix, TransportPlan};

const BOUND: f64 = 1e50;

pub fn sinkhorn_stabilized(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
    epsilon: f64,
    tau: f64,
    max_iter: usize,
) -> Result<(SinkhornReport<f64>, TransportPlan)> {
    let n = cost.n();
    if a.len() != n || b.len() != n {
        return Err(Error::GridMismatch(format!(
            "marginals of length {} and {} for a {n}-point cost",
            a.len(),
            b.len()
        )));
    }
    if !(epsilon > 0.0) || !(tau > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument(
            "epsilon, tau and max_iter must be positive".into(),
        ));
    }
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut k = vec![0.0; n * n];
    let rebuild = |k: &mut [f64], f: &[f64], g: &[f64]| {
        for i in 0..n {
            let row = cost.row(i);
            for j in 0..n {
                k[i * n + j] = ((f[i] + g[j] - row[j]) / epsilon).exp();
            }
        }
    };
    rebuild(&mut k, &f, &g);

    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    let mut kv = vec![0.0; n];
    let mut ktu = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        matvec(&k, &v, &mut kv);
        for i in 0..n {
            u[i] = a[i] / kv[i].max(DENOMINATOR_FLOOR);
        }
        matvec_t(&k, &u, &mut ktu);
        for j in 0..n {
            v[j] = b[j] / ktu[j].max(DENOMINATOR_FLOOR);
        }
        let out_of_range = |x: &f64| *x > BOUND || (*x > 0.0 && *x < 1.0 / BOUND);
        if u.iter().any(out_of_range) || v.iter().any(out_of_range) {
            for i in 0..n {
                f[i] += epsilon * u[i].ln();
                g[i] += epsilon * v[i].ln();
            }
            u.iter_mut().for_each(|x| *x = 1.0);
            v.iter_mut().for_each(|x| *x = 1.0);
            rebuild(&mut k, &f, &g);
            // zero marginals give f = -inf; those rows stay identically zero
            for i in 0..n {
                if a[i] == 0.0 {
                    u[i] = 0.0;
                }
                if b[i] == 0.0 {
                    v[i] = 0.0;
                }
            }
        }
        matvec(&k, &v, &mut kv);
        matvec_t(&k, &u, &mut ktu);
        let ra: f64 = (0..n).map(|i| (u[i] * kv[i] - a[i]).abs()).sum();
        let rb: f64 = (0..n).map(|j| (v[j] * ktu[j] - b[j]).abs()).sum();
        residual = ra.max(rb);
        if residual < tau {
            converged = true;
            break;
        }
    }

    let mut plan = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            plan[i * n + j] = u[i] * k[i * n + j] * v[j];
        }
    }
    let plan = TransportPlan::from_raw(n, plan);
    let value = plan.cost(cost);
    Ok((
        SinkhornReport {
            value,
            iterations,
            final_residual: residual,
            converged,
        },
        plan,
    ))
}

fn matvec(k: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(k.chunks_exact(n)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn matvec_t(k: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (xi, row) in x.iter().zip(k.chunks_exact(n)) {
        if *xi == 0.0 {
            continue;
        }
        for (o, kij) in out.iter_mut().zip(row) {
            *o += xi * kij;
        }
    }
}
