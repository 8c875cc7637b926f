//! Exact dense min-cost assignment via successive shortest augmenting paths
//! with dual potentials (the classic O(n^3) Hungarian formulation).

/// Solve the n x n assignment problem for a row-major cost matrix, returning
/// the column assigned to each row. Total cost is minimal.
pub(crate) fn solve_square_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    const INF: f64 = f64::INFINITY;
    // column potentials and matching; column index n is a virtual start column
    let mut u = vec![0.0f64; n + 1]; // row potentials, indexed by row
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![usize::MAX; n + 1]; // matched row per column
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        row_of_col[n] = i;
        let mut j0 = n;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = INF;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 * n + j] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == usize::MAX {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for j in 0..n {
        if row_of_col[j] != usize::MAX {
            col_of_row[row_of_col[j]] = j;
        }
    }
    col_of_row
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn total(cost: &[f64], n: usize, assign: &[usize]) -> f64 {
        assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
    }

    fn brute_force_min(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn known_small_case() {
        // rows pick the off-diagonal for total 3
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let assign = solve_square_assignment(3, &cost);
        assert_eq!(total(&cost, 3, &assign), 5.0);
        assert_eq!(assign, vec![1, 0, 2]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for trial in 0..200 {
            let n = rng.gen_range(1..=7);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let assign = solve_square_assignment(n, &cost);
            // valid permutation
            let mut seen = vec![false; n];
            for &j in &assign {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let got = total(&cost, n, &assign);
            let want = brute_force_min(&cost, n);
            assert!((got - want).abs() < 1e-9, "trial {trial}: got {got}, want {want}");
        }
    }

    #[test]
    fn matches_brute_force_on_tie_heavy_matrices() {
        // degenerate costs stress the augmenting-path tie handling
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for trial in 0..200 {
            let n = rng.gen_range(2..=7);
            let levels = [0.0, 1.0, 1.0, 2.0, 5.0];
            let cost: Vec<f64> =
                (0..n * n).map(|_| levels[rng.gen_range(0..levels.len())]).collect();
            let assign = solve_square_assignment(n, &cost);
            let got = total(&cost, n, &assign);
            let want = brute_force_min(&cost, n);
            assert!((got - want).abs() < 1e-9, "trial {trial}: got {got}, want {want}");
        }
    }

    #[test]
    fn empty_input() {
        assert!(solve_square_assignment(0, &[]).is_empty());
    }
}
