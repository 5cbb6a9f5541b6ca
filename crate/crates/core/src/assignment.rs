//! Exact minimum-cost bipartite assignment over dense rectangular matrices.
//!
//! Shortest augmenting path Hungarian method with row/column potentials,
//! `O(n^2 m)` for an `n x m` matrix with `n <= m`. Wider-than-tall inputs are
//! solved on the transpose.

/// Dense row-major matrix of non-negative finite costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, values }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// Matches between row indices (detections) and column indices (tracks)
/// plus whatever was left over on each side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentResult {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

impl AssignmentResult {
    /// Everything unmatched.
    pub fn unmatched(rows: usize, cols: usize) -> Self {
        Self {
            matches: Vec::new(),
            unmatched_detections: (0..rows).collect(),
            unmatched_tracks: (0..cols).collect(),
        }
    }

    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(i, j)| costs.get(i, j)).sum()
    }

    /// Moves every match failing `keep` to the unmatched sets.
    pub fn retain_matches(&mut self, mut keep: impl FnMut(usize, usize) -> bool) {
        let mut kept = Vec::with_capacity(self.matches.len());
        for &(d, t) in &self.matches {
            if keep(d, t) {
                kept.push((d, t));
            } else {
                self.unmatched_detections.push(d);
                self.unmatched_tracks.push(t);
            }
        }
        self.matches = kept;
        self.unmatched_detections.sort_unstable();
        self.unmatched_tracks.sort_unstable();
    }
}

/// Minimum-total-cost assignment of `min(rows, cols)` pairs. Pairs costing
/// more than `max_cost` are demoted to unmatched afterwards.
pub fn solve_assignment(costs: &CostMatrix, max_cost: f64) -> AssignmentResult {
    if costs.is_empty() {
        return AssignmentResult::unmatched(costs.rows(), costs.cols());
    }
    let row_to_col = if costs.rows() <= costs.cols() {
        hungarian(costs)
    } else {
        let t = costs.transposed();
        let col_to_row = hungarian(&t);
        let mut row_to_col = vec![None; costs.rows()];
        for (c, r) in col_to_row.into_iter().enumerate() {
            if let Some(r) = r {
                row_to_col[r] = Some(c);
            }
        }
        row_to_col
    };

    let mut result = AssignmentResult::default();
    let mut col_used = vec![false; costs.cols()];
    for (r, c) in row_to_col.into_iter().enumerate() {
        match c {
            Some(c) => {
                col_used[c] = true;
                result.matches.push((r, c));
            }
            None => result.unmatched_detections.push(r),
        }
    }
    result.unmatched_tracks = (0..costs.cols()).filter(|&c| !col_used[c]).collect();
    result.retain_matches(|r, c| costs.get(r, c) <= max_cost);
    result
}

/// Core solver for `rows <= cols`; returns the column for every row.
fn hungarian(costs: &CostMatrix) -> Vec<Option<usize>> {
    let n = costs.rows();
    let m = costs.cols();
    debug_assert!(n <= m);

    // 1-based with index 0 as the virtual source column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);

        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &costs.values[(i0 - 1) * m..i0 * m];
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut row_to_col = vec![None; n];
    for j in 1..=m {
        if owner[j] > 0 {
            row_to_col[owner[j] - 1] = Some(j - 1);
        }
    }
    row_to_col
}
