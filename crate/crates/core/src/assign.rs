//! Minimum-cost bipartite assignment (Hungarian method, potentials form).

use alloc::vec;
use alloc::vec::Vec;

/// Assigns rows to distinct columns minimising total cost. With more rows
/// than columns some rows stay unassigned (`None`). `cost[r][c]` must be
/// finite.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve(rows, cols, |r, c| cost[r][c])
    } else {
        let by_col = solve(cols, rows, |c, r| cost[r][c]);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

/// Hungarian algorithm for `n <= m`; every row gets a column.
fn solve(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    // 1-based arrays with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(cost: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(r, c)| c.map(|c| cost[r][c])).sum()
    }

    #[test]
    fn swapped_pair_is_resolved() {
        let cost = vec![vec![5.0, 1.0], vec![1.0, 5.0]];
        assert_eq!(min_cost_assignment(&cost), vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0]];
        let a = min_cost_assignment(&cost);
        assert_eq!(total(&cost, &a), 3.0);
        let t: Vec<Vec<f64>> = (0..3).map(|c| (0..2).map(|r| cost[r][c]).collect()).collect();
        let b = min_cost_assignment(&t);
        assert_eq!(total(&t, &b), 3.0);
        assert_eq!(b.iter().filter(|x| x.is_some()).count(), 2);
    }

    #[test]
    fn matches_permutation_search() {
        let cost = vec![
            vec![7.0, 3.0, 9.0, 2.0],
            vec![4.0, 8.0, 1.0, 6.0],
            vec![3.0, 5.0, 4.0, 9.0],
            vec![6.0, 2.0, 7.0, 3.0],
        ];
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            best = best.min((0..4).map(|r| cost[r][p[r]]).sum());
        });
        assert_eq!(total(&cost, &min_cost_assignment(&cost)), best);
    }

    fn permute(p: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }
}
