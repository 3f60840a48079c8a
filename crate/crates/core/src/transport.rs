//! Exact optimal transport between finite distributions.
//!
//! The transportation problem is solved with the transportation simplex
//! (northwest-corner start, `u`/`v` potentials, Bland's rule for both the
//! entering and the leaving cell). The returned potentials form a dual
//! certificate: [`TransportSolution::certify`] checks primal feasibility,
//! dual feasibility and equality of the two objectives.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{DistanceMatrix, Matrix};

/// Mass tolerance for input distributions.
pub const MASS_TOL: f64 = 1e-9;

/// One nonzero (or degenerate basic) entry of a transport plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub cost: f64,
    pub plan: Vec<PlanEntry>,
    /// Dual variable per source index (zero outside the support of `p`).
    pub u: Vec<f64>,
    /// Dual variable per target index (zero outside the support of `q`).
    pub v: Vec<f64>,
}

impl TransportSolution {
    /// Checks the optimality certificate against the problem data.
    pub fn certify(&self, p: &[f64], q: &[f64], cost: &Matrix) -> bool {
        let scale = 1.0 + cost.max_abs();
        let tol = 1e-9 * scale;
        let mut rows = vec![0.0; p.len()];
        let mut cols = vec![0.0; q.len()];
        let mut primal = 0.0;
        for e in &self.plan {
            if e.mass < -1e-12 {
                return false;
            }
            rows[e.from] += e.mass;
            cols[e.to] += e.mass;
            primal += e.mass * cost[(e.from, e.to)];
        }
        let feasible = rows.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-8)
            && cols.iter().zip(q).all(|(a, b)| (a - b).abs() <= 1e-8);
        let mut dual_ok = true;
        for (i, &pi) in p.iter().enumerate() {
            for (j, &qj) in q.iter().enumerate() {
                if pi > 0.0 && qj > 0.0 && cost[(i, j)] - self.u[i] - self.v[j] < -tol {
                    dual_ok = false;
                }
            }
        }
        let dual: f64 = p.iter().zip(&self.u).map(|(a, b)| a * b).sum::<f64>()
            + q.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>();
        feasible && dual_ok && (primal - dual).abs() <= tol && (primal - self.cost).abs() <= tol
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!(
            "{name} is not a probability vector (sum {sum})"
        )));
    }
    Ok(())
}

/// Exact 1-Wasserstein distance between `p` and `q` under `ground`.
pub fn w1_exact(p: &[f64], q: &[f64], ground: &DistanceMatrix) -> Result<f64> {
    check_dim("w1 source length", ground.n(), p.len())?;
    check_dim("w1 target length", ground.n(), q.len())?;
    check_distribution("source distribution", p)?;
    check_distribution("target distribution", q)?;
    let sol = solve_transport(p, q, ground.as_matrix())?;
    debug_assert!(
        sol.certify(p, q, ground.as_matrix()),
        "transport certificate failed"
    );
    Ok(sol.cost)
}

/// Solves `min Σ x_ij c_ij` over couplings of `p` and `q`.
///
/// `cost` must be `p.len() × q.len()` with finite nonnegative entries.
pub fn solve_transport(p: &[f64], q: &[f64], cost: &Matrix) -> Result<TransportSolution> {
    check_dim("transport cost rows", p.len(), cost.rows())?;
    check_dim("transport cost cols", q.len(), cost.cols())?;
    if !cost.is_finite() || cost.as_slice().iter().any(|c| *c < 0.0) {
        return Err(Error::Validation("transport costs must be finite and nonnegative".into()));
    }
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Validation("transport marginals have no mass".into()));
    }
    let (m, n) = (rows.len(), cols.len());
    let c = |i: usize, j: usize| cost[(rows[i], cols[j])];

    let mut u = vec![0.0; p.len()];
    let mut v = vec![0.0; q.len()];

    // A single source or a single target admits exactly one coupling.
    if m == 1 || n == 1 {
        let mut plan = Vec::with_capacity(m * n);
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..n {
                let mass = if m == 1 { q[cols[j]] } else { p[rows[i]] };
                total += mass * c(i, j);
                plan.push(PlanEntry { from: rows[i], to: cols[j], mass });
            }
        }
        if m == 1 {
            for j in 0..n {
                v[cols[j]] = c(0, j);
            }
        } else {
            for i in 0..m {
                u[rows[i]] = c(i, 0);
            }
        }
        return Ok(TransportSolution { cost: total, plan, u, v });
    }

    let mut simplex = Simplex::northwest(
        rows.iter().map(|&i| p[i]).collect(),
        cols.iter().map(|&j| q[j]).collect(),
    );
    let eps = 1e-12 * (1.0 + cost.max_abs());
    let max_pivots = 50 * m * n + 100;
    let mut pivots = 0;
    loop {
        let (ur, vr) = simplex.potentials(&c);
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !simplex.is_basic(i, j) && c(i, j) - ur[i] - vr[j] < -eps);
        match entering {
            None => {
                for i in 0..m {
                    u[rows[i]] = ur[i];
                }
                for j in 0..n {
                    v[cols[j]] = vr[j];
                }
                break;
            }
            Some((i, j)) => {
                simplex.pivot(i, j);
                pivots += 1;
                if pivots > max_pivots {
                    return Err(Error::NotConverged {
                        iterations: pivots,
                        residual: f64::NAN,
                    });
                }
            }
        }
    }

    let mut total = 0.0;
    let plan = simplex
        .basis
        .iter()
        .map(|&(i, j, mass)| {
            total += mass * c(i, j);
            PlanEntry { from: rows[i], to: cols[j], mass }
        })
        .collect();
    Ok(TransportSolution { cost: total, plan, u, v })
}

/// Basis of the transportation simplex: `m + n − 1` cells forming a
/// spanning tree of the bipartite row/column graph.
struct Simplex {
    m: usize,
    n: usize,
    basis: Vec<(usize, usize, f64)>,
    /// `slot[i * n + j]` is the basis position of cell `(i, j)`.
    slot: Vec<Option<usize>>,
}

impl Simplex {
    fn northwest(mut supply: Vec<f64>, mut demand: Vec<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut basis = Vec::with_capacity(m + n - 1);
        let mut slot = vec![None; m * n];
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]);
            supply[i] -= x;
            demand[j] -= x;
            slot[i * n + j] = Some(basis.len());
            basis.push((i, j, x));
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // The last cell absorbs rounding left over in the marginals.
        debug_assert_eq!(basis.len(), m + n - 1);
        Self { m, n, basis, slot }
    }

    fn is_basic(&self, i: usize, j: usize) -> bool {
        self.slot[i * self.n + j].is_some()
    }

    /// Adjacency of the basis tree; row `i` is node `i`, column `j` is node `m + j`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.basis.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, c: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let adj = self.adjacency();
        let mut pot = vec![f64::NAN; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::new();
        pot[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &(other, k) in &adj[node] {
                if seen[other] {
                    continue;
                }
                let (i, j, _) = self.basis[k];
                // u_i + v_j = c_ij
                pot[other] = c(i, j) - pot[node];
                seen[other] = true;
                queue.push_back(other);
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Basis positions along the tree path from column node of `j` to row node `i`.
    fn tree_path(&self, i: usize, j: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let start = self.m + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &(other, k) in &adj[node] {
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some((node, k));
                    queue.push_back(other);
                }
            }
        }
        // Walk back from row i to column j, then reverse.
        let mut path = Vec::new();
        let mut node = i;
        while node != start {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = prev;
        }
        path.reverse();
        path
    }

    fn pivot(&mut self, i: usize, j: usize) {
        // Cycle: entering (+), then alternating − / + along the path from
        // column j back to row i; the path has odd length.
        let path = self.tree_path(i, j);
        let mut leaving: Option<usize> = None;
        for &k in path.iter().step_by(2) {
            let (ki, kj, x) = self.basis[k];
            leaving = match leaving {
                None => Some(k),
                Some(best) => {
                    let (bi, bj, bx) = self.basis[best];
                    if x < bx || (x == bx && (ki, kj) < (bi, bj)) {
                        Some(k)
                    } else {
                        Some(best)
                    }
                }
            };
        }
        let leaving = leaving.expect("cycle has a decreasing cell");
        let theta = self.basis[leaving].2;
        for (step, &k) in path.iter().enumerate() {
            if step % 2 == 0 {
                self.basis[k].2 -= theta;
            } else {
                self.basis[k].2 += theta;
            }
        }
        let (li, lj, _) = self.basis[leaving];
        self.slot[li * self.n + lj] = None;
        self.slot[i * self.n + j] = Some(leaving);
        self.basis[leaving] = (i, j, theta);
    }
}
