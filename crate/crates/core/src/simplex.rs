//! Exhaustive grids on the probability simplex and a derivative-free
//! polish, shared by the brute-force oracles.

/// Number of points `{k ∈ ℕ^m : Σk = n}`; saturates at `u128::MAX`.
pub(crate) fn grid_size(n: u32, m: usize) -> u128 {
    if m == 0 {
        return 0;
    }
    // C(n + m - 1, m - 1)
    let k = (m - 1) as u128;
    let top = n as u128 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Largest resolution `<= cap` whose grid has at most `budget` points.
pub(crate) fn resolution_for_budget(m: usize, cap: u32, budget: u128) -> u32 {
    let mut n = cap.max(1);
    while n > 1 && grid_size(n, m) > budget {
        n -= 1;
    }
    n
}

/// Visits every point of the simplex grid `{x = k/n : Σk = n}` in
/// lexicographic order of `k`.
pub(crate) fn for_each_point(n: u32, m: usize, mut visit: impl FnMut(&[f64])) {
    if m == 0 {
        return;
    }
    let mut k = vec![0u32; m];
    k[m - 1] = n;
    let mut x = vec![0.0; m];
    loop {
        for (xi, &ki) in x.iter_mut().zip(&k) {
            *xi = ki as f64 / n as f64;
        }
        visit(&x);
        // next composition: find the last nonzero entry before the tail
        let Some(pivot) = (0..m - 1)
            .rev()
            .find(|&i| k[i + 1..].iter().any(|&v| v > 0))
        else {
            return;
        };
        let tail: u32 = k[pivot + 1..].iter().sum();
        k[pivot] += 1;
        for v in &mut k[pivot + 1..] {
            *v = 0;
        }
        k[m - 1] = tail - 1;
    }
}

/// Pairwise mass-transfer pattern search maximizing `objective` on the
/// simplex, starting from `start` with transfer size `step`.
pub(crate) fn polish(
    start: &[f64],
    mut step: f64,
    min_step: f64,
    max_evals: usize,
    objective: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let m = start.len();
    let mut x = start.to_vec();
    let mut best = objective(&x);
    let mut evals = 1;
    let mut trial = x.clone();
    while step >= min_step && evals < max_evals {
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j || x[i] <= 0.0 {
                    continue;
                }
                let delta = step.min(x[i]);
                trial.copy_from_slice(&x);
                trial[i] -= delta;
                trial[j] += delta;
                let value = objective(&trial);
                evals += 1;
                if value > best {
                    best = value;
                    x.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_all_compositions() {
        for (n, m) in [(4u32, 3usize), (3, 1), (0, 2), (5, 4)] {
            let mut seen = Vec::new();
            for_each_point(n, m, |x| {
                assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12 || n == 0);
                seen.push(x.to_vec());
            });
            if n > 0 {
                assert_eq!(seen.len() as u128, grid_size(n, m));
            }
            let mut dedup = seen.clone();
            dedup.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dedup.dedup();
            assert_eq!(dedup.len(), seen.len());
        }
        assert_eq!(grid_size(64, 3), 2145);
    }

    #[test]
    fn budgeted_resolution() {
        let n = resolution_for_budget(15, 64, 50_000);
        assert!(grid_size(n, 15) <= 50_000);
        assert!(grid_size(n + 1, 15) > 50_000);
    }

    #[test]
    fn polish_finds_vertex_of_convex_function() {
        let f = |x: &[f64]| x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2];
        let (x, v) = polish(&[0.3, 0.3, 0.4], 0.25, 1e-12, 100_000, f);
        assert!((v - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }
}
