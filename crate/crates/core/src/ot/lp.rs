//! Exact (unregularized) discrete optimal transport.
//!
//! Solved as a min-cost flow on the complete bipartite graph with successive
//! shortest paths: Dijkstra on reduced costs with node potentials, augmenting
//! along each shortest source-to-sink path. Dense `O(n^2)` Dijkstra per
//! augmentation gives `O(n^3)` overall for typical instances.

use crate::error::{Error, Result};

use super::{CostMatrix, TransportPlan};

pub const LP_SIZE_LIMIT: usize = 256;

const CAP_EPS: f64 = 1e-15;

pub fn exact_ot_lp(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<(f64, TransportPlan)> {
    let n = cost.n();
    if n > LP_SIZE_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: LP_SIZE_LIMIT,
        });
    }
    if a.len() != n || b.len() != n {
        return Err(Error::GridMismatch(format!(
            "marginals of length {} and {} for a {n}-point cost",
            a.len(),
            b.len()
        )));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if a.iter().chain(b).any(|x| !(*x >= 0.0)) || (sa - sb).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "marginals must be nonnegative with equal mass ({sa} vs {sb})"
        )));
    }

    // node layout: 0 = source, 1..=n supply, n+1..=2n demand, 2n+1 = sink
    let nodes = 2 * n + 2;
    let (src, snk) = (0, 2 * n + 1);
    let mut supply_left = a.to_vec();
    let mut demand_left = b.to_vec();
    let mut flow = vec![0.0; n * n];
    let mut pot = vec![0.0; nodes];
    let mut dist = vec![0.0; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let total = sa.min(sb);
    let mut shipped = 0.0;

    while shipped < total - 1e-13 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[src] = 0.0;
        loop {
            let mut x = usize::MAX;
            let mut best = f64::INFINITY;
            for (k, &d) in dist.iter().enumerate() {
                if !done[k] && d < best {
                    best = d;
                    x = k;
                }
            }
            if x == usize::MAX {
                break;
            }
            done[x] = true;
            // settled nodes stay settled, so rounding in the reduced costs
            // cannot create a cycle in `prev`
            let relax = |y: usize, c: f64, dist: &mut [f64], prev: &mut [usize]| {
                let nd = dist[x] + c + pot[x] - pot[y];
                if !done[y] && nd < dist[y] {
                    dist[y] = nd;
                    prev[y] = x;
                }
            };
            if x == src {
                for i in 0..n {
                    if supply_left[i] > CAP_EPS {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if x <= n {
                let i = x - 1;
                for j in 0..n {
                    relax(n + 1 + j, cost.get(i, j), &mut dist, &mut prev);
                }
                if supply_left[i] < a[i] - CAP_EPS {
                    relax(src, 0.0, &mut dist, &mut prev);
                }
            } else if x <= 2 * n {
                let j = x - n - 1;
                for i in 0..n {
                    if flow[i * n + j] > CAP_EPS {
                        relax(1 + i, -cost.get(i, j), &mut dist, &mut prev);
                    }
                }
                if demand_left[j] > CAP_EPS {
                    relax(snk, 0.0, &mut dist, &mut prev);
                }
            } else {
                for j in 0..n {
                    if demand_left[j] < b[j] - CAP_EPS {
                        relax(n + 1 + j, 0.0, &mut dist, &mut prev);
                    }
                }
            }
        }
        if !dist[snk].is_finite() {
            break;
        }
        for k in 0..nodes {
            pot[k] += dist[k].min(dist[snk]);
        }

        // bottleneck along the path
        let mut delta = f64::INFINITY;
        let mut y = snk;
        while y != src {
            let x = prev[y];
            let cap = residual_capacity(x, y, n, a, b, &supply_left, &demand_left, &flow);
            delta = delta.min(cap);
            y = x;
        }
        if !(delta > CAP_EPS) {
            break;
        }
        let mut y = snk;
        while y != src {
            let x = prev[y];
            match (x, y) {
                (s, i) if s == src => supply_left[i - 1] -= delta,
                (i, s) if s == src => supply_left[i - 1] += delta,
                (j, t) if t == snk => demand_left[j - n - 1] -= delta,
                (t, j) if t == snk => demand_left[j - n - 1] += delta,
                (i, j) if i <= n => flow[(i - 1) * n + (j - n - 1)] += delta,
                (j, i) => flow[(i - 1) * n + (j - n - 1)] -= delta,
            }
            y = x;
        }
        shipped += delta;
    }

    flow.iter_mut().for_each(|f| {
        if *f < 0.0 {
            *f = 0.0
        }
    });
    let plan = TransportPlan::from_raw(n, flow);
    Ok((plan.cost(cost), plan))
}

#[allow(clippy::too_many_arguments)]
fn residual_capacity(
    x: usize,
    y: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    supply_left: &[f64],
    demand_left: &[f64],
    flow: &[f64],
) -> f64 {
    let (src, snk) = (0, 2 * n + 1);
    if x == src {
        supply_left[y - 1]
    } else if y == src {
        a[x - 1] - supply_left[x - 1]
    } else if y == snk {
        demand_left[x - n - 1]
    } else if x == snk {
        b[y - n - 1] - demand_left[y - n - 1]
    } else if x <= n {
        f64::INFINITY
    } else {
        flow[(y - 1) * n + (x - n - 1)]
    }
}
