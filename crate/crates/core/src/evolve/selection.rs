//! Pareto ranking, crowding-distance truncation and the 2-D hypervolume.
//! All objectives are minimized.

use std::cmp::Ordering;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

/// Front index of every point; rank 0 is the non-dominated set.
pub fn non_dominated_sort(objs: &[Vec<f64>]) -> Vec<usize> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objs[i], &objs[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![0; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance within one front; per-objective extremes get infinity.
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut d = vec![0.0; n];
    if n == 0 {
        return d;
    }
    let m = front[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| front[a][k].total_cmp(&front[b][k]).then(a.cmp(&b)));
        let (lo, hi) = (front[order[0]][k], front[order[n - 1]][k]);
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if !(span > 0.0) {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            d[order[w]] += (front[order[w + 1]][k] - front[order[w - 1]][k]) / span;
        }
    }
    d
}

/// Indices of the `keep` points with the largest crowding distance; equal
/// distances go to the lower id.
pub fn crowding_truncate(front: &[Vec<f64>], ids: &[u64], keep: usize) -> Vec<usize> {
    let d = crowding_distance(front);
    let mut order: Vec<usize> = (0..front.len()).collect();
    order.sort_by(|&a, &b| match d[b].partial_cmp(&d[a]) {
        Some(Ordering::Equal) | None => ids[a].cmp(&ids[b]),
        Some(o) => o,
    });
    order.truncate(keep);
    order.sort_unstable();
    order
}

/// Area dominated by `points` and bounded by `reference`.
///
/// Points not strictly better than the reference in both objectives add
/// nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::tests_support::brute_ranks;

    #[test]
    fn sort_examples() {
        assert_eq!(
            non_dominated_sort(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            vec![0, 0]
        );
        assert_eq!(
            non_dominated_sort(&[vec![1.0, 1.0], vec![2.0, 2.0]]),
            vec![0, 1]
        );
        assert!(non_dominated_sort(&[]).is_empty());
    }

    #[test]
    fn sort_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..50)
                .map(|_| vec![rng.gen_range(0..8) as f64, rng.gen_range(0..8) as f64])
                .collect();
            assert_eq!(non_dominated_sort(&pts), brute_ranks(&pts));
        }
    }

    #[test]
    fn truncation_examples() {
        let f = vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        assert_eq!(crowding_truncate(&f, &[0, 1, 2], 3), vec![0, 1, 2]);
        assert_eq!(crowding_truncate(&f, &[0, 1, 2], 2), vec![0, 2]);
    }

    fn brute_crowding(front: &[Vec<f64>]) -> Vec<f64> {
        let n = front.len();
        (0..n)
            .map(|i| {
                let mut d = 0.0;
                for k in 0..2 {
                    let lo = front.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                    let hi = front.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                    // neighbors in (value, index) order
                    let key = |j: usize| (front[j][k], j);
                    let below = (0..n)
                        .filter(|&j| key(j) < key(i))
                        .max_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap());
                    let above = (0..n)
                        .filter(|&j| key(j) > key(i))
                        .min_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap());
                    match (below, above) {
                        (Some(b), Some(a)) => d += (front[a][k] - front[b][k]) / (hi - lo),
                        _ => return f64::INFINITY,
                    }
                }
                d
            })
            .collect()
    }

    #[test]
    fn truncation_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            // a random non-dominated front: x increasing, y decreasing
            let mut xs: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
            xs.sort_by(f64::total_cmp);
            let mut ys: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
            ys.sort_by(|a, b| b.total_cmp(a));
            let front: Vec<Vec<f64>> = xs.iter().zip(&ys).map(|(x, y)| vec![*x, *y]).collect();
            let ids: Vec<u64> = (0..20).map(|i| (i * 7 % 20) as u64).collect();
            let d = brute_crowding(&front);
            for (a, b) in crowding_distance(&front).iter().zip(&d) {
                assert!(a == b || (a - b).abs() < 1e-12);
            }
            let mut want: Vec<usize> = (0..20).collect();
            want.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap().then(ids[a].cmp(&ids[b])));
            want.truncate(10);
            want.sort_unstable();
            assert_eq!(crowding_truncate(&front, &ids, 10), want);
        }
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume_2d(&[[0.0, 0.0]], [1.0, 1.0]), 1.0);
        assert_eq!(hypervolume_2d(&[[0.0, 0.5], [0.5, 0.0]], [1.0, 1.0]), 0.75);
        assert_eq!(
            hypervolume_2d(&[[0.0, 0.5], [0.5, 0.0], [0.6, 0.6]], [1.0, 1.0]),
            0.75
        );
        assert_eq!(hypervolume_2d(&[[1.0, 0.0], [2.0, -1.0]], [1.0, 1.0]), 0.0);
        assert_eq!(hypervolume_2d(&[], [1.0, 1.0]), 0.0);
    }

    #[test]
    fn hypervolume_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let pts: Vec<[f64; 2]> = (0..20).map(|_| [rng.gen(), rng.gen()]).collect();
            let hv = hypervolume_2d(&pts, [1.0, 1.0]);
            let samples = 1_000_000;
            let hits = (0..samples)
                .filter(|_| {
                    let (x, y): (f64, f64) = (rng.gen(), rng.gen());
                    pts.iter().any(|p| p[0] <= x && p[1] <= y)
                })
                .count();
            let mc = hits as f64 / samples as f64;
            assert!((hv - mc).abs() < 0.005 * hv, "{hv} vs {mc}");
        }
    }

    proptest! {
        #[test]
        fn adding_a_dominated_point_keeps_hypervolume(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..15),
            pick in 0usize..15, dx in 0.0f64..0.5, dy in 0.0f64..0.5,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let base = pts[pick % pts.len()];
            let mut more = pts.clone();
            more.push([base[0] + dx, base[1] + dy]);
            prop_assert_eq!(hypervolume_2d(&pts, [1.0, 1.0]), hypervolume_2d(&more, [1.0, 1.0]));
        }

        #[test]
        fn rank_zero_is_never_dominated(
            pts in prop::collection::vec((0u8..10, 0u8..10), 1..40),
        ) {
            let objs: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect();
            let ranks = non_dominated_sort(&objs);
            prop_assert_eq!(&ranks, &brute_ranks(&objs));
        }
    }
}
