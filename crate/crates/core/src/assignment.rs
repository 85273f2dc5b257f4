//! Exact square linear sum assignment.
//!
//! [`solve_lap`] is a shortest augmenting path solver with row/column dual
//! potentials (Jonker–Volgenant family, O(n³)). After the optimum is found a
//! second pass walks rows in order and moves each one to the lowest column
//! that still admits an optimal completion, so among equal-cost optima the
//! lexicographically smallest permutation is returned.

use thiserror::Error;

const NONE: usize = usize::MAX;
pub const BRUTE_FORCE_MAX: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix is empty")]
    Empty,
    #[error("cost matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("non-finite cost at ({0}, {1})")]
    NonFiniteCost(usize, usize),
    #[error("negative cost at ({0}, {1})")]
    NegativeCost(usize, usize),
    #[error("brute force is limited to n <= {BRUTE_FORCE_MAX}, got {0}")]
    TooLarge(usize),
}

/// Dense square matrix of nonnegative finite costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if n == 0 {
            return Err(AssignmentError::Empty);
        }
        if data.len() != n * n {
            return Err(AssignmentError::NotSquare {
                row: data.len() / n,
                len: data.len() % n,
                expected: n,
            });
        }
        for (k, &c) in data.iter().enumerate() {
            if !c.is_finite() {
                return Err(AssignmentError::NonFiniteCost(k / n, k % n));
            }
            if c < 0.0 {
                return Err(AssignmentError::NegativeCost(k / n, k % n));
            }
        }
        Ok(CostMatrix { n, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AssignmentError> {
        let n = rows.len();
        if n == 0 {
            return Err(AssignmentError::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(AssignmentError::NotSquare {
                    row: i,
                    len: r.len(),
                    expected: n,
                });
            }
            data.extend_from_slice(r);
        }
        CostMatrix::new(n, data)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, AssignmentError> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CostMatrix::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Σᵢ cost[i][perm[i]] summed in row order.
    pub fn total(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Row `i` is matched to column `permutation[i]`.
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.permutation.iter().copied().enumerate()
    }
}

pub fn solve_lap(cost: &CostMatrix) -> Assignment {
    let n = cost.n();
    let (mut col4row, mut row4col, u, v) = shortest_augmenting_path(cost);
    lexicographic_refine(cost, &mut col4row, &mut row4col, &u, &v);
    let total_cost = cost.total(&col4row);
    debug_assert!(row4col.iter().all(|&r| r < n));
    Assignment {
        permutation: col4row,
        total_cost,
    }
}

/// Convenience wrapper validating a nested-vector matrix first.
pub fn solve_lap_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Assignment, AssignmentError> {
    Ok(solve_lap(&CostMatrix::from_rows(rows)?))
}

type Duals = (Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>);

fn shortest_augmenting_path(cost: &CostMatrix) -> Duals {
    let n = cost.n();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];

    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        shortest.fill(f64::INFINITY);
        seen_row.fill(false);
        seen_col.fill(false);
        // reverse fill keeps ties on low column indices for constant rows
        for (k, r) in remaining.iter_mut().enumerate() {
            *r = n - 1 - k;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink;

        loop {
            seen_row[i] = true;
            let row = cost.row(i);
            let ui = u[i];
            let mut lowest = f64::INFINITY;
            let mut index = NONE;
            for (k, &j) in remaining[..num_remaining].iter().enumerate() {
                let r = min_val + row[j] - ui - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    index = k;
                }
            }
            min_val = lowest;
            let j = remaining[index];
            seen_col[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
            if row4col[j] == NONE {
                sink = j;
                break;
            }
            i = row4col[j];
        }

        u[cur_row] += min_val;
        for r in 0..n {
            if seen_row[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..n {
            if seen_col[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }
    (col4row, row4col, u, v)
}

/// Moves each row, in order, to the smallest column reachable by an
/// alternating cycle of dual-tight edges that does not disturb earlier rows
/// and does not raise the row-order total.
fn lexicographic_refine(cost: &CostMatrix, col4row: &mut [usize], row4col: &mut [usize], u: &[f64], v: &[f64]) {
    let n = cost.n();
    if n < 2 {
        return;
    }
    let scale = cost.data.iter().fold(1.0f64, |m, &c| m.max(c));
    let tol = 1e-9 * scale;
    let tight = |i: usize, j: usize| cost.get(i, j) - u[i] - v[j] <= tol;

    let mut total = cost.total(col4row);
    let mut prev = vec![NONE; n];
    let mut queue = Vec::with_capacity(n);

    for i in 0..n - 1 {
        let c0 = col4row[i];
        for j in 0..c0 {
            let r1 = row4col[j];
            if r1 < i || !tight(i, j) {
                continue;
            }
            // BFS over rows > i: prev[col] = row that would take col
            prev.fill(NONE);
            queue.clear();
            queue.push(r1);
            let mut head = 0;
            let mut end_row = NONE;
            'bfs: while head < queue.len() {
                let r = queue[head];
                head += 1;
                for c in 0..n {
                    if c == j || prev[c] != NONE || !tight(r, c) {
                        continue;
                    }
                    if c == c0 {
                        prev[c] = r;
                        end_row = r;
                        break 'bfs;
                    }
                    let owner = row4col[c];
                    if owner <= i {
                        continue;
                    }
                    prev[c] = r;
                    queue.push(owner);
                }
            }
            if end_row == NONE {
                continue;
            }

            let mut candidate = col4row.to_vec();
            candidate[i] = j;
            let mut c = c0;
            loop {
                let r = prev[c];
                let old = candidate[r];
                candidate[r] = c;
                if r == r1 {
                    break;
                }
                c = old;
            }
            let new_total = cost.total(&candidate);
            if new_total <= total {
                total = new_total;
                col4row.copy_from_slice(&candidate);
                for (r, &c) in col4row.iter().enumerate() {
                    row4col[c] = r;
                }
                break;
            }
        }
    }
}

/// Exhaustive search in lexicographic permutation order; the first strict
/// minimum wins, so ties resolve to the lexicographically smallest optimum.
pub fn brute_force_lap(cost: &CostMatrix) -> Result<Assignment, AssignmentError> {
    let n = cost.n();
    if n > BRUTE_FORCE_MAX {
        return Err(AssignmentError::TooLarge(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.total(&perm);
    while next_permutation(&mut perm) {
        let c = cost.total(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        permutation: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
