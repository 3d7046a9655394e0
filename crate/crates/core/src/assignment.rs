//! Rectangular minimum-cost assignment (Hungarian method, shortest
//! augmenting paths with potentials).

/// Minimum-cost matching of rows to columns. Entries that are `None` are
/// forbidden. Returns `(row, column)` pairs; every row that can be matched
/// without a forbidden entry is matched as long as that keeps the total
/// minimal among maximum matchings.
pub fn min_cost_matching(cost: &[Vec<Option<f64>>], n_cols: usize) -> Vec<(usize, usize)> {
    let n_rows = cost.len();
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    // Forbidden entries get a penalty larger than any feasible total, and
    // are dropped from the result.
    let finite_span: f64 = cost.iter().flatten().flatten().map(|c| c.abs()).fold(0.0, f64::max);
    let big = (finite_span + 1.0) * (n_rows.max(n_cols) as f64 + 1.0) * 4.0;

    // Pad to a square matrix: dummy rows/columns cost `big` too, so real
    // pairs are always preferred over dummy ones.
    let size = n_rows.max(n_cols);
    let entry = |r: usize, c: usize| -> f64 {
        if r < n_rows && c < n_cols {
            cost[r][c].unwrap_or(big)
        } else {
            big
        }
    };

    // 1-indexed arrays, column 0 is the virtual start.
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut owner = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for row in 1..=size {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for c in 1..=size {
                if used[c] {
                    continue;
                }
                let reduced = entry(r0 - 1, c - 1) - u[r0] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=size {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=size)
        .filter_map(|c| {
            let r = owner[c];
            (r >= 1 && r <= n_rows && c <= n_cols && cost[r - 1][c - 1].is_some()).then_some((r - 1, c - 1))
        })
        .collect();
    pairs.sort_unstable();
    pairs
}
