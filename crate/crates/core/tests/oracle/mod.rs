//! Test oracles that share no code with the library: a dense two-phase
//! simplex solver, the DCT-III matrix written out from its formula, and
//! planted sparse instances.
#![allow(dead_code)]

use rand::Rng;

const EPS: f64 = 1e-9;

#[derive(Debug, PartialEq)]
pub enum LpError {
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost · x` over columns `0..allowed`, Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<(), LpError> {
        loop {
            let reduced = |j: usize, t: &Tableau| {
                cost[j] - t.rows.iter().zip(&t.basis).map(|(row, &b)| cost[b] * row[j]).sum::<f64>()
            };
            let Some(enter) = (0..allowed).find(|&j| !self.basis.contains(&j) && reduced(j, self) < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (r, _) = leave.ok_or(LpError::Unbounded)?;
            self.pivot(r, enter);
        }
    }
}

/// `min cᵀx` subject to `Ax = b`, `x ≥ 0`. Returns the optimal value and a
/// basic optimal solution.
pub fn solve_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>), LpError> {
    let (m, n) = (a.len(), c.len());
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[i].iter().map(|v| sign * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        row.push(sign * b[i]);
        rows.push(row);
    }
    let mut t = Tableau { rows, basis: (n..n + m).collect(), width };

    let mut phase1 = vec![0.0; width];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    t.optimize(&phase1, width)?;
    let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    if infeas > 1e-7 {
        return Err(LpError::Infeasible);
    }
    // drive zero-valued artificials out where a structural column allows
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t.rows[i][j].abs() > 1e-7) {
                t.pivot(i, j);
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.resize(width, 0.0);
    t.optimize(&phase2, n)?;
    let mut x = vec![0.0; n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs(i);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok((value, x))
}

/// Inverse orthonormal DCT matrix from its closed form: `x = Ψα`.
pub fn idct_matrix(n: usize) -> Vec<Vec<f64>> {
    let nf = n as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    s * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
                })
                .collect()
        })
        .collect()
}

/// Smallest ‖α‖₁ with `Ψ[kept, :] α = y`, solved as an LP over `α = u − v`.
pub fn basis_pursuit_lp(n: usize, kept: &[usize], y: &[f64]) -> Result<(f64, Vec<f64>), LpError> {
    let psi = idct_matrix(n);
    let a: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| psi[i].iter().copied().chain(psi[i].iter().map(|v| -v)).collect())
        .collect();
    let (value, uv) = solve_lp(&a, y, &vec![1.0; 2 * n])?;
    Ok((value, (0..n).map(|k| uv[k] - uv[n + k]).collect()))
}

pub struct Planted {
    pub alpha: Vec<f64>,
    pub signal: Vec<f64>,
    pub kept: Vec<usize>,
}

/// K-sparse coefficients with magnitudes in [1, 3] and random signs, plus
/// `m` kept positions drawn without replacement.
pub fn planted<R: Rng>(n: usize, k: usize, m: usize, rng: &mut R) -> Planted {
    let mut alpha = vec![0.0; n];
    for j in rand::seq::index::sample(rng, n, k).into_iter() {
        let mag = rng.random_range(1.0..3.0);
        alpha[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    let psi = idct_matrix(n);
    let signal = psi.iter().map(|row| row.iter().zip(&alpha).map(|(p, a)| p * a).sum()).collect();
    let mut kept = rand::seq::index::sample(rng, n, m).into_vec();
    kept.sort_unstable();
    Planted { alpha, signal, kept }
}
