//! Exact discrete optimal transport by the transportation simplex
//! (modified distribution method) on a spanning-tree basis.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Largest support accepted per side.
pub const EXACT_SIZE_LIMIT: usize = 2000;

/// Solution of a dense transportation problem.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// basic cells (row, column, mass); zero masses are degenerate basics
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub iterations: usize,
}

struct Basis {
    m: usize,
    edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<usize>>,
    parent_edge: Vec<usize>,
    parent: Vec<usize>,
    depth: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Basis {
    fn node_of_col(&self, j: usize) -> usize {
        self.m + j
    }

    fn add_edge(&mut self, i: usize, j: usize, flow: f64) {
        let k = self.edges.len();
        self.edges.push((i, j, flow));
        let cj = self.node_of_col(j);
        self.adj[i].push(k);
        self.adj[cj].push(k);
    }

    fn replace_edge(&mut self, k: usize, i: usize, j: usize, flow: f64) {
        let (oi, oj, _) = self.edges[k];
        let oc = self.node_of_col(oj);
        self.adj[oi].retain(|&e| e != k);
        self.adj[oc].retain(|&e| e != k);
        self.edges[k] = (i, j, flow);
        let cj = self.node_of_col(j);
        self.adj[i].push(k);
        self.adj[cj].push(k);
    }

    /// Parent pointers, depths and dual potentials by BFS from row 0.
    fn refresh(&mut self, cost: &[f64], n: usize) {
        let nodes = self.adj.len();
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.depth[0] = 0;
        self.u[0] = 0.0;
        self.parent_edge[0] = usize::MAX;
        while let Some(a) = queue.pop_front() {
            for &k in &self.adj[a] {
                let (i, j, _) = self.edges[k];
                let cj = self.m + j;
                let b = if a == i { cj } else { i };
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                self.parent[b] = a;
                self.parent_edge[b] = k;
                self.depth[b] = self.depth[a] + 1;
                let c = cost[i * n + j];
                if b == cj {
                    self.v[j] = c - self.u[i];
                } else {
                    self.u[i] = c - self.v[j];
                }
                queue.push_back(b);
            }
        }
    }
}

fn find(uf: &mut [usize], mut a: usize) -> usize {
    while uf[a] != a {
        uf[a] = uf[uf[a]];
        a = uf[a];
    }
    a
}

/// Minimizes Σ π_ij c_ij over couplings of `a` and `b`.
///
/// `cost` is row-major with `a.len()` rows. Masses must be nonnegative with
/// equal totals.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<ExactSolution> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("empty marginal".into()));
    }
    if m.max(n) > EXACT_SIZE_LIMIT {
        return Err(Error::SizeLimit { size: m.max(n), limit: EXACT_SIZE_LIMIT });
    }
    if cost.len() != m * n {
        return Err(Error::DimensionMismatch { expected: m * n, got: cost.len() });
    }
    let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs())).max(1e-300);
    let tol = 1e-13 * scale;

    let mut basis = Basis {
        m,
        edges: Vec::with_capacity(m + n - 1),
        adj: vec![Vec::new(); m + n],
        parent_edge: vec![usize::MAX; m + n],
        parent: vec![0; m + n],
        depth: vec![0; m + n],
        u: vec![0.0; m],
        v: vec![0.0; n],
    };

    // least-cost initial allocation; each step exhausts a row or column,
    // so the allocated cells form a forest
    let mut order: Vec<u32> = (0..(m * n) as u32).collect();
    order.sort_unstable_by(|&p, &q| cost[p as usize].total_cmp(&cost[q as usize]).then(p.cmp(&q)));
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut uf: Vec<usize> = (0..m + n).collect();
    for &cell in &order {
        let (i, j) = (cell as usize / n, cell as usize % n);
        if ra[i] <= 0.0 || rb[j] <= 0.0 {
            continue;
        }
        let f = ra[i].min(rb[j]);
        ra[i] -= f;
        rb[j] -= f;
        if ra[i] <= rb[j] {
            ra[i] = 0.0;
        } else {
            rb[j] = 0.0;
        }
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, m + j));
        uf[ri] = rj;
        basis.add_edge(i, j, f);
        if basis.edges.len() == m + n - 1 {
            break;
        }
    }
    // zero-mass connectors complete the forest to a spanning tree
    for &cell in &order {
        if basis.edges.len() == m + n - 1 {
            break;
        }
        let (i, j) = (cell as usize / n, cell as usize % n);
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, m + j));
        if ri != rj {
            uf[ri] = rj;
            basis.add_edge(i, j, 0.0);
        }
    }
    basis.refresh(cost, n);

    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(n).min(total);
    let max_iter = 50 * (m + n) * ((m + n) as f64).log2().ceil().max(1.0) as usize + 1000;
    let mut cursor = 0usize;
    let mut iterations = 0usize;
    let mut path_a = Vec::new();
    let mut path_b = Vec::new();
    loop {
        // block pricing
        let mut entering = None;
        let mut scanned = 0usize;
        while scanned < total {
            let mut best = -tol;
            let len = block.min(total - scanned);
            for s in 0..len {
                let cell = (cursor + s) % total;
                let (i, j) = (cell / n, cell % n);
                let r = cost[cell] - basis.u[i] - basis.v[j];
                if r < best {
                    best = r;
                    entering = Some((i, j));
                }
            }
            cursor = (cursor + len) % total;
            scanned += len;
            if entering.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = entering else { break };
        iterations += 1;
        if iterations > max_iter {
            let worst = (0..total)
                .map(|c| cost[c] - basis.u[c / n] - basis.v[c % n])
                .fold(0.0f64, f64::min);
            return Err(Error::SolverNotConverged { iterations, residual: -worst });
        }

        // tree path between row ei and column ej
        path_a.clear();
        path_b.clear();
        let (mut x, mut y) = (ei, m + ej);
        while basis.depth[x] > basis.depth[y] {
            path_a.push(basis.parent_edge[x]);
            x = basis.parent[x];
        }
        while basis.depth[y] > basis.depth[x] {
            path_b.push(basis.parent_edge[y]);
            y = basis.parent[y];
        }
        while x != y {
            path_a.push(basis.parent_edge[x]);
            x = basis.parent[x];
            path_b.push(basis.parent_edge[y]);
            y = basis.parent[y];
        }
        // edges at even positions from either endpoint lose mass
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for path in [&path_b, &path_a] {
            for &k in path.iter().step_by(2) {
                let f = basis.edges[k].2;
                if f < theta {
                    theta = f;
                    leaving = k;
                }
            }
        }
        for path in [&path_a, &path_b] {
            for (pos, &k) in path.iter().enumerate() {
                let e = &mut basis.edges[k].2;
                if pos % 2 == 0 {
                    *e -= theta;
                } else {
                    *e += theta;
                }
            }
        }
        basis.replace_edge(leaving, ei, ej, theta);
        basis.refresh(cost, n);
    }

    let mut flows: Vec<(usize, usize, f64)> =
        basis.edges.iter().map(|&(i, j, f)| (i, j, f.max(0.0))).collect();
    flows.sort_unstable_by_key(|&(i, j, _)| (i, j));
    let cost_value = crate::numeric::compensated_sum(flows.iter().map(|&(i, j, f)| f * cost[i * n + j]));
    Ok(ExactSolution { flows, cost: cost_value, row_potentials: basis.u, col_potentials: basis.v, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_feasible(a: &[f64], b: &[f64], sol: &ExactSolution) {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, f) in &sol.flows {
            assert!(f >= 0.0);
            rows[i] += f;
            cols[j] += f;
        }
        for (r, x) in rows.iter().zip(a) {
            assert!((r - x).abs() < 1e-12);
        }
        for (c, x) in cols.iter().zip(b) {
            assert!((c - x).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_by_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = 4;
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let w = vec![0.25; n];
            let sol = solve_transport(&w, &w, &cost).unwrap();
            check_feasible(&w, &w, &sol);
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..n).collect();
            permutations(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| 0.25 * cost[i * n + j]).sum());
            });
            assert!((sol.cost - best).abs() < 1e-14);
        }
    }

    fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permutations(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn optimality_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (m, n) = (37, 23);
        let mut a: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        a.iter_mut().for_each(|x| *x /= sa);
        b.iter_mut().for_each(|x| *x /= sb);
        let cost: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
        let sol = solve_transport(&a, &b, &cost).unwrap();
        check_feasible(&a, &b, &sol);
        // dual feasibility and complementary slackness
        for i in 0..m {
            for j in 0..n {
                assert!(cost[i * n + j] - sol.row_potentials[i] - sol.col_potentials[j] > -1e-12);
            }
        }
        let dual: f64 = a.iter().zip(&sol.row_potentials).map(|(x, u)| x * u).sum::<f64>()
            + b.iter().zip(&sol.col_potentials).map(|(x, v)| x * v).sum::<f64>();
        assert!((dual - sol.cost).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_zero_weights() {
        let a = [0.5, 0.0, 0.5];
        let b = [0.5, 0.5];
        let cost = [0.0, 1.0, 3.0, 3.0, 1.0, 0.0];
        let sol = solve_transport(&a, &b, &cost).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.flows.len(), 4);
    }

    #[test]
    fn size_limit() {
        let a = vec![1.0 / 2001.0; 2001];
        assert!(matches!(
            solve_transport(&a, &[1.0], &vec![0.0; 2001]),
            Err(Error::SizeLimit { size: 2001, .. })
        ));
    }
}
