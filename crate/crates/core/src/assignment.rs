//! Exact square linear assignment.
//!
//! Shortest augmenting path with dual potentials (the Jonker-Volgenant
//! family), O(n³). Rows are inserted in index order and ties go to the
//! lowest column, so results are reproducible.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A bijection on `0..n`; `mapping()[i]` is the column assigned to row `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &j in &mapping {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid(format!("{mapping:?} is not a permutation")));
            }
        }
        Ok(Permutation(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn mapping(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Permutation(inv)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Finds a permutation optimizing `Σ_i cost[i, mapping[i]]`.
pub fn solve_assignment(cost: ArrayView2<'_, f64>, direction: Direction) -> Result<Permutation> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!(
            "assignment needs a square matrix, got {n}x{m}"
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment cost matrix".into()));
    }
    let sign = match direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let flat: Vec<f64> = cost.iter().map(|&v| sign * v).collect();
    Ok(Permutation(shortest_augmenting_path(&flat, n)))
}

/// `flat` is a row-major `n×n` cost matrix; returns row→column.
fn shortest_augmenting_path(flat: &[f64], n: usize) -> Vec<usize> {
    // 1-based internally; column 0 and row 0 are sentinels.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let costs = &flat[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = costs[j - 1] - ui0 - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
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

    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[owner[j] - 1] = j - 1;
    }
    mapping
}

/// `Σ_i cost[i, mapping[i]]`, summed in row order.
pub fn assignment_value(cost: ArrayView2<'_, f64>, perm: &Permutation) -> Result<f64> {
    let (n, m) = cost.dim();
    if n != m || perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for a {n}x{m} matrix",
            perm.len()
        )));
    }
    Ok(perm.mapping().iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum())
}
