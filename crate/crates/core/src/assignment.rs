//! Minimum-cost assignment on square matrices.
//!
//! Shortest-augmenting-path implementation of the Hungarian method with
//! dual potentials, O(n^3). Costs are arbitrary finite reals.

/// Solves the square assignment problem for the row-major `cost` matrix of
/// side `n`. Returns the minimum total cost and, per row, the column it is
/// assigned to (a permutation of `0..n`).
///
/// Panics if `cost.len() != n * n`, `n == 0`, or any cost is not finite.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert!(n > 0, "assignment needs at least one row");
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    assert!(cost.iter().all(|c| c.is_finite()), "costs must be finite");

    // Dual potentials for rows (u) and columns (v); p[j] is the row matched
    // to column j, with column n acting as the virtual root of each
    // augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![usize::MAX; n + 1];

    for row in 0..n {
        p[n] = row;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut way = vec![n; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let reduced = cost[i0 * n + j] - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == usize::MAX {
                break;
            }
        }
        // augment along the stored path back to the virtual column
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 0..n {
        let i = p[j];
        assignment[i] = j;
        total += cost[i * n + j];
    }
    (total, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // oracle: try every permutation (Heap's algorithm)
    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn permute(perm: &mut Vec<usize>, k: usize, cost: &[f64], n: usize, best: &mut f64) {
            if k == n {
                let total: f64 = (0..n).map(|i| cost[i * n + perm[i]]).sum();
                if total < *best {
                    *best = total;
                }
                return;
            }
            for j in k..n {
                perm.swap(k, j);
                permute(perm, k + 1, cost, n, best);
                perm.swap(k, j);
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, cost, n, &mut best);
        best
    }

    #[test]
    fn identity_is_optimal_for_diagonal_advantage() {
        // strongly diagonal-dominant costs: identity assignment wins
        let cost = vec![
            0.0, 9.0, 9.0, //
            9.0, 0.0, 9.0, //
            9.0, 9.0, 0.0,
        ];
        let (total, assignment) = min_cost_assignment(&cost, 3);
        assert_eq!(total, 0.0);
        assert_eq!(assignment, vec![0, 1, 2]);
    }

    #[test]
    fn known_small_instance() {
        let cost = vec![
            4.0, 1.0, 3.0, //
            2.0, 0.0, 5.0, //
            3.0, 2.0, 2.0,
        ];
        let (total, assignment) = min_cost_assignment(&cost, 3);
        assert_eq!(total, 5.0);
        // rows take columns 1, 0, 2
        assert_eq!(assignment, vec![1, 0, 2]);
    }

    #[test]
    fn single_cell() {
        let (total, assignment) = min_cost_assignment(&[7.5], 1);
        assert_eq!(total, 7.5);
        assert_eq!(assignment, vec![0]);
    }

    #[test]
    fn handles_negative_costs() {
        let cost = vec![-1.0, 4.0, 2.0, -3.0];
        let (total, assignment) = min_cost_assignment(&cost, 2);
        assert_eq!(total, -4.0);
        assert_eq!(assignment, vec![0, 1]);
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=5 {
            for _ in 0..40 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(-10.0..10.0)).collect();
                let (total, assignment) = min_cost_assignment(&cost, n);
                let expected = brute_force(&cost, n);
                assert!(
                    (total - expected).abs() < 1e-9,
                    "n={n}: got {total}, brute force {expected}"
                );
                // assignment must be a permutation and reproduce the total
                let mut seen = vec![false; n];
                let mut recomputed = 0.0;
                for (i, &j) in assignment.iter().enumerate() {
                    assert!(!seen[j]);
                    seen[j] = true;
                    recomputed += cost[i * n + j];
                }
                assert!((recomputed - total).abs() < 1e-12);
            }
        }
    }
}
