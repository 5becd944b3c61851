//! Profile (skyline) `L D Lᵀ` factorization for sparse symmetric matrices.
//!
//! No numerical pivoting: the caller supplies a symmetric permutation, usually
//! a reverse Cuthill–McKee ordering that keeps the envelope narrow. Pivots
//! below `pivot_tol * max|a_ii|` are counted and replaced by that threshold.

use super::ldlt::PivotStats;
use super::sparse::CsrMatrix;
use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct SkylineLdlt {
    n: usize,
    // perm[new] = old
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    // row i holds columns first[i]..i (strictly lower part of L)
    lower: Vec<f64>,
    diag: Vec<f64>,
    stats: PivotStats,
}

impl SkylineLdlt {
    pub fn factor(a: &CsrMatrix, perm: &[usize], pivot_tol: f64) -> Self {
        let n = a.nrows();
        assert_eq!(a.ncols(), n);
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, v) in a.iter() {
            if v == 0.0 {
                continue;
            }
            let (ni, nj) = (inv[i], inv[j]);
            let (r, c) = if ni >= nj { (ni, nj) } else { (nj, ni) };
            first[r] = first[r].min(c);
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i]));
        }
        let mut lower = vec![0.0; offset[n]];
        let mut diag = vec![0.0; n];
        for (i, j, v) in a.iter() {
            if v == 0.0 {
                continue;
            }
            let (ni, nj) = (inv[i], inv[j]);
            if ni == nj {
                diag[ni] += v;
            } else if ni > nj {
                // symmetric input: take the lower entry only
                lower[offset[ni] + nj - first[ni]] += v;
            }
        }
        let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let thr = if scale > 0.0 {
            pivot_tol * scale
        } else {
            pivot_tol
        };

        let mut f = SkylineLdlt {
            n,
            perm: perm.to_vec(),
            first,
            offset,
            lower,
            diag,
            stats: PivotStats {
                min_abs_pivot: f64::INFINITY,
                ..Default::default()
            },
        };
        f.run(thr);
        f
    }

    fn run(&mut self, thr: f64) {
        let n = self.n;
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            // t_j = a_ij - sum_k t_k l_jk, stored in place, then l_ij = t_j / d_j
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let mut s = 0.0;
                for k in k0..j {
                    s += self.lower[oi + k - fi] * self.lower[oj + k - fj];
                }
                self.lower[oi + j - fi] -= s;
            }
            let mut di = self.diag[i];
            for j in fi..i {
                let t = self.lower[oi + j - fi];
                let l = t / self.diag[j];
                di -= t * l;
                self.lower[oi + j - fi] = l;
            }
            if di.abs() < thr || !di.is_finite() {
                self.stats.zero += 1;
                di = if di < 0.0 { -thr } else { thr };
            }
            if di > 0.0 {
                self.stats.positive += 1;
            } else {
                self.stats.negative += 1;
            }
            self.stats.min_abs_pivot = self.stats.min_abs_pivot.min(di.abs());
            self.stats.max_abs_pivot = self.stats.max_abs_pivot.max(di.abs());
            self.diag[i] = di;
        }
        if n == 0 {
            self.stats.min_abs_pivot = 0.0;
        }
    }

    pub fn stats(&self) -> PivotStats {
        self.stats
    }

    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let (fi, oi) = (self.first[i], self.offset[i]);
            let mut s = 0.0;
            for j in fi..i {
                s += self.lower[oi + j - fi] * y[j];
            }
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let (fi, oi) = (self.first[i], self.offset[i]);
            let yi = y[i];
            for j in fi..i {
                y[j] -= self.lower[oi + j - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// Reverse Cuthill–McKee ordering of the pattern of `a`, with the indices in
/// `last` appended at the end in the given order.
pub fn rcm_ordering(a: &CsrMatrix, last: &[usize]) -> Vec<usize> {
    let n = a.nrows();
    let mut deferred = vec![false; n];
    for &i in last {
        deferred[i] = true;
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if deferred[i] {
                return Vec::new();
            }
            a.row(i)
                .filter(|&(j, v)| j != i && v != 0.0 && !deferred[j])
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = deferred.clone();
    let mut order = Vec::with_capacity(n);
    // start each component from a pseudo-peripheral node
    while let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
        let start = pseudo_peripheral(seed, &adj, &visited);
        let begin = order.len();
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
        order[begin..].reverse();
    }
    order.extend_from_slice(last);
    order
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], blocked: &[bool]) -> usize {
    let mut root = seed;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (far, depth) = bfs_farthest(root, adj, blocked);
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        root = far;
    }
    root
}

fn bfs_farthest(root: usize, adj: &[Vec<usize>], blocked: &[bool]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut far = (root, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > far.1 || (d == far.1 && adj[v].len() < adj[far.0].len()) {
            far = (v, d);
        }
        for &w in &adj[v] {
            if !blocked[w] && dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    far
}
