//! Method of moving asymptotes for one inequality constraint.

use crate::error::{Error, Result};

const SHRINK: f64 = 0.7;
const EXPAND: f64 = 1.2;
const INITIAL_SPAN: f64 = 0.5;

/// Asymptotes and the two previous iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaState {
    low: Vec<f64>,
    upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    iteration: usize,
}

impl MmaState {
    pub fn new(n: usize) -> Self {
        Self {
            low: vec![0.0; n],
            upp: vec![1.0; n],
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            iteration: 0,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn update_asymptotes(&mut self, x: &[f64]) {
        for e in 0..x.len() {
            if self.iteration < 2 {
                self.low[e] = x[e] - INITIAL_SPAN;
                self.upp[e] = x[e] + INITIAL_SPAN;
            } else {
                let trend = (x[e] - self.xold1[e]) * (self.xold1[e] - self.xold2[e]);
                let f = if trend < 0.0 {
                    SHRINK
                } else if trend > 0.0 {
                    EXPAND
                } else {
                    1.0
                };
                let low = x[e] - f * (self.xold1[e] - self.low[e]);
                let upp = x[e] + f * (self.upp[e] - self.xold1[e]);
                self.low[e] = low.clamp(x[e] - 10.0, x[e] - 0.01);
                self.upp[e] = upp.clamp(x[e] + 0.01, x[e] + 10.0);
            }
        }
    }
}

/// Convex separable terms `p / (U - x) + q / (x - L)` of one function.
fn split(g: f64, low: f64, upp: f64, x: f64) -> (f64, f64) {
    let (gp, gm) = (g.max(0.0), (-g).max(0.0));
    (
        (upp - x).powi(2) * (1.001 * gp + 0.001 * gm),
        (x - low).powi(2) * (0.001 * gp + 1.001 * gm),
    )
}

/// One design update.
///
/// Minimizes the separable approximation of the objective subject to the
/// approximated constraint `g(x) <= 0`, with every variable kept inside
/// `[x - move_limit, x + move_limit] ∩ [0, 1]`. The scalar dual is found by
/// doubling to bracket and then bisection.
pub fn mma_update(
    x: &[f64],
    grad_obj: &[f64],
    grad_con: &[f64],
    constraint_value: f64,
    move_limit: f64,
    state: &mut MmaState,
) -> Result<Vec<f64>> {
    let n = x.len();
    if grad_obj.len() != n || grad_con.len() != n || state.low.len() != n {
        return Err(Error::InvalidArgument(
            "mma vectors differ in length".into(),
        ));
    }
    if !(move_limit > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "move limit must be positive, got {move_limit}"
        )));
    }
    if grad_obj.iter().chain(grad_con).any(|g| !g.is_finite()) || !constraint_value.is_finite() {
        return Err(Error::InvalidArgument("non-finite gradient".into()));
    }
    state.update_asymptotes(x);

    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    // constant part of the constraint approximation
    let mut r1 = constraint_value;
    for e in 0..n {
        let (l, u) = (state.low[e], state.upp[e]);
        (p0[e], q0[e]) = split(grad_obj[e], l, u, x[e]);
        (p1[e], q1[e]) = split(grad_con[e], l, u, x[e]);
        r1 -= p1[e] / (u - x[e]) + q1[e] / (x[e] - l);
        alpha[e] = 0.0f64.max(x[e] - move_limit).max(l + 0.1 * (x[e] - l));
        beta[e] = 1.0f64.min(x[e] + move_limit).min(u - 0.1 * (u - x[e]));
    }

    let primal = |lambda: f64, out: &mut [f64]| {
        for e in 0..n {
            let p = p0[e] + lambda * p1[e];
            let q = q0[e] + lambda * q1[e];
            let xe = if p + q == 0.0 {
                x[e]
            } else {
                let (sp, sq) = (p.sqrt(), q.sqrt());
                (sq * state.upp[e] + sp * state.low[e]) / (sp + sq)
            };
            out[e] = xe.clamp(alpha[e], beta[e]);
        }
    };
    let con = |y: &[f64]| {
        r1 + (0..n)
            .map(|e| p1[e] / (state.upp[e] - y[e]) + q1[e] / (y[e] - state.low[e]))
            .sum::<f64>()
    };

    let mut y = vec![0.0; n];
    primal(0.0, &mut y);
    if con(&y) > 0.0 {
        let mut lo = 0.0;
        let mut hi = 1e-6;
        loop {
            primal(hi, &mut y);
            if con(&y) <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e60 {
                return Err(Error::DualBisectionFailed);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            primal(mid, &mut y);
            if con(&y) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        primal(hi, &mut y);
    }

    state.xold2 = std::mem::replace(&mut state.xold1, x.to_vec());
    state.iteration += 1;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn descent_without_active_constraint_hits_move_limit() {
        let x = [0.2, 0.5, 0.97];
        let mut st = MmaState::new(3);
        let y = mma_update(&x, &[-1.0, -3.0, -0.5], &[0.0; 3], -1.0, 0.05, &mut st).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((b - a - 0.05f64.min(1.0 - a)).abs() < 1e-15, "{a} -> {b}");
        }
    }

    #[test]
    fn zero_gradients_leave_design_unchanged() {
        let x = [0.1, 0.4, 0.8];
        let mut st = MmaState::new(3);
        assert_eq!(
            mma_update(&x, &[0.0; 3], &[0.0; 3], -0.5, 0.05, &mut st).unwrap(),
            x
        );
    }

    #[test]
    fn active_constraint_is_respected() {
        // minimize -sum x subject to mean(x) <= 0.5 starting at the bound
        let n = 10;
        let mut x = vec![0.5; n];
        let mut st = MmaState::new(n);
        for _ in 0..30 {
            let g = x.iter().sum::<f64>() / (0.5 * n as f64) - 1.0;
            x = mma_update(
                &x,
                &vec![-1.0; n],
                &vec![1.0 / (0.5 * n as f64); n],
                g,
                0.05,
                &mut st,
            )
            .unwrap();
            assert!(x.iter().sum::<f64>() / n as f64 <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn unreachable_constraint_fails_the_dual() {
        let mut st = MmaState::new(1);
        let r = mma_update(&[0.5], &[0.0], &[1.0], 10.0, 0.05, &mut st);
        assert!(matches!(r, Err(Error::DualBisectionFailed)));
    }

    proptest! {
        #[test]
        fn steps_respect_move_limit(
            data in prop::collection::vec((0.0f64..=1.0, -5.0f64..5.0, 0.0f64..2.0), 1..12),
            c in -1.0f64..0.0,
            mv in 0.01f64..0.2,
            steps in 1usize..6,
        ) {
            let mut x: Vec<f64> = data.iter().map(|d| d.0).collect();
            let go: Vec<f64> = data.iter().map(|d| d.1).collect();
            let gc: Vec<f64> = data.iter().map(|d| d.2).collect();
            let mut st = MmaState::new(x.len());
            for _ in 0..steps {
                let y = mma_update(&x, &go, &gc, c, mv, &mut st).unwrap();
                for (a, b) in x.iter().zip(&y) {
                    prop_assert!(*b >= 0.0 && *b <= 1.0);
                    prop_assert!((b - a).abs() <= mv + 1e-12);
                }
                x = y;
            }
        }
    }
}
