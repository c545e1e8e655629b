use serde::{Deserialize, Serialize};

use super::dct::Dct;
use super::{CodecError, SampledBlock};

/// DCT-domain coefficients of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector(Vec<f64>);

impl CoeffVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

/// ADMM settings for basis pursuit.
///
/// `penalty` is the initial ρ. With `adaptive_penalty` on, ρ is rescaled by
/// 2 whenever the primal and dual residuals differ by more than a factor of
/// 10 (residual balancing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub penalty: f64,
    pub adaptive_penalty: bool,
    /// Finish with a simplex crossover to a certified optimal vertex.
    pub polish: bool,
    /// Weight each coefficient by the ℓ2 norm of its measurement column.
    #[doc(hidden)]
    #[serde(skip)]
    pub column_normalize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            penalty: 1.0,
            adaptive_penalty: true,
            polish: true,
            column_normalize: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iters == 0 {
            return Err(CodecError::InvalidArgument("max_iters must be positive".into()));
        }
        if !positive(self.primal_tol) || !positive(self.dual_tol) || !positive(self.penalty) {
            return Err(CodecError::InvalidArgument(
                "primal_tol, dual_tol and penalty must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// ‖x − z‖₂ / ‖y‖₂ at exit.
    pub primal_residual: f64,
    /// ρ‖z − z_prev‖₂ / ‖y‖₂ at exit.
    pub dual_residual: f64,
    /// The result is a vertex with an optimality certificate; the residuals
    /// are then its constraint error and certificate excess.
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coeffs: CoeffVector,
    pub stats: SolveStats,
}

// Projection onto {α : Θα = y}. Θ = DΨ has orthonormal rows, so
// P(v) = v − Θᵀ(Θv − y) = Ψᵀ w with w = Ψv and w[kept] = y.
struct Projector<'a> {
    dct: Dct,
    indices: &'a [usize],
    y: Vec<f64>,
    signal: Vec<f64>,
}

impl Projector<'_> {
    fn project(&mut self, v: &[f64], out: &mut [f64]) {
        self.dct.inverse(v, &mut self.signal);
        for (&i, &yi) in self.indices.iter().zip(&self.y) {
            self.signal[i] = yi;
        }
        self.dct.forward(&self.signal, out);
    }
}

const RELAXATION: f64 = 1.6;
/// Iteration at which the vertex polish is first attempted; it is tried
/// again at the cap.
const POLISH_AT: usize = 200;
/// Accepted certificate excess; bounds the relative ℓ1 gap.
const CERT_TOL: f64 = 1e-9;

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn column_weights(indices: &[usize], n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n)
        .map(|j| {
            let k2 = if j == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
            let s: f64 = indices
                .iter()
                .map(|&i| (PI * j as f64 * (i as f64 + 0.5) / n as f64).cos().powi(2))
                .sum();
            (k2 * s).sqrt().max(1e-12)
        })
        .collect()
}

/// Solves `min ‖α‖₁ subject to Θα = y` for one block by ADMM.
///
/// Row `i` of Θ is row `pattern.indices[i]` of the inverse DCT matrix; Θ is
/// applied through fast transforms and never formed. The returned
/// coefficients are the projected iterate, so they satisfy the measurement
/// constraint to rounding error. With `polish` set, the solver also tries a
/// simplex crossover from the iterate at iteration 200 and at the cap, and
/// returns the optimal vertex when one is certified.
pub fn solve_basis_pursuit(block: &SampledBlock, cfg: &SolverConfig) -> Result<Solution, CodecError> {
    cfg.validate()?;
    let pattern = &block.pattern;
    if pattern.is_empty() {
        return Err(CodecError::BlockUnrecoverable { block_seq: block.block_seq });
    }
    if pattern.len() != block.values.len() {
        return Err(CodecError::InvalidArgument("pattern and values differ in length".into()));
    }
    let n = pattern.block_len();
    let mut dct = Dct::new(n)?;

    if pattern.is_full() {
        let mut coeffs = vec![0.0; n];
        dct.forward(&block.values, &mut coeffs);
        return Ok(Solution { coeffs: CoeffVector(coeffs), stats: SolveStats::default() });
    }

    // basis pursuit is positively homogeneous in y; solve at unit scale
    let scale = block.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(Solution { coeffs: CoeffVector::zeros(n), stats: SolveStats::default() });
    }
    let y: Vec<f64> = block.values.iter().map(|v| v / scale).collect();
    let y_norm = norm2(y.iter().copied());

    let weights = cfg.column_normalize.then(|| column_weights(pattern.indices(), n));
    let mut proj = Projector { dct, indices: pattern.indices(), y, signal: vec![0.0; n] };

    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    // minimum-norm feasible point
    proj.project(&v, &mut z);

    let mut rho = cfg.penalty;
    let mut stats = SolveStats::default();
    let mut z_prev = vec![0.0; n];
    for iter in 1..=cfg.max_iters {
        for i in 0..n {
            v[i] = z[i] - u[i];
        }
        proj.project(&v, &mut x);
        z_prev.copy_from_slice(&z);

        for i in 0..n {
            let xr = RELAXATION * x[i] + (1.0 - RELAXATION) * z_prev[i];
            let w = xr + u[i];
            let t = weights.as_ref().map_or(1.0, |ws| ws[i]) / rho;
            z[i] = if w > t {
                w - t
            } else if w < -t {
                w + t
            } else {
                0.0
            };
            u[i] = w - z[i];
        }
        let r = norm2((0..n).map(|i| x[i] - z[i]));
        let s = norm2((0..n).map(|i| z[i] - z_prev[i]));
        let xz = norm2(x.iter().copied()).max(norm2(z.iter().copied())).max(y_norm);
        let un = norm2(u.iter().copied()).max(f64::MIN_POSITIVE);
        let primal = r / xz;
        let dual = s / un;
        stats = SolveStats { iterations: iter, primal_residual: primal, dual_residual: dual, polished: false };
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            x.iter_mut().for_each(|c| *c *= scale);
            return Ok(Solution { coeffs: CoeffVector(x), stats });
        }
        if cfg.polish && (iter == POLISH_AT || iter == cfg.max_iters) {
            if let Some((mut alpha, feas, excess)) = polish(&z, &u, pattern.indices(), &proj.y, &mut proj.dct, weights.as_deref()) {
                alpha.iter_mut().for_each(|c| *c *= scale);
                let stats = SolveStats { iterations: iter, primal_residual: feas, dual_residual: excess, polished: true };
                return Ok(Solution { coeffs: CoeffVector(alpha), stats });
            }
        }
        if cfg.adaptive_penalty && iter % 10 == 0 {
            let (rp, rd) = (r, rho * s);
            if rp > 10.0 * rd {
                rho *= 2.0;
                u.iter_mut().for_each(|c| *c *= 0.5);
            } else if rd > 10.0 * rp {
                rho *= 0.5;
                u.iter_mut().for_each(|c| *c *= 2.0);
            }
        }
    }
    x.iter_mut().for_each(|c| *c *= scale);
    Err(CodecError::NotConverged { stats, last: CoeffVector(x) })
}

fn psi(i: usize, k: usize, n: usize) -> f64 {
    let nf = n as f64;
    let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
    s * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(p, q)| p * q).sum();
    for (p, q) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += p[k] * q[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(p, q)| *p += a * q);
}

/// Inverts a square matrix given as rows, by Gauss-Jordan elimination with
/// partial pivoting; `None` if it is numerically singular.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if !(a[p][k].abs() > 1e-12 * scale) {
            return None;
        }
        a.swap(k, p);
        inv.swap(k, p);
        let d = 1.0 / a[k][k];
        a[k].iter_mut().for_each(|v| *v *= d);
        inv[k].iter_mut().for_each(|v| *v *= d);
        let (ak, ik) = (a[k].clone(), inv[k].clone());
        for i in (0..n).filter(|&i| i != k) {
            let f = a[i][k];
            if f != 0.0 {
                axpy(&mut a[i][k..], -f, &ak[k..]);
                axpy(&mut inv[i], -f, &ik);
            }
        }
    }
    Some(inv)
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

/// A simplex basis for basis pursuit written as an LP over `α = α⁺ − α⁻`:
/// one signed measurement column `σ·Θ_j` per kept sample.
struct Basis<'a> {
    n: usize,
    indices: &'a [usize],
    y: &'a [f64],
    weights: Option<&'a [f64]>,
    cols: Vec<(usize, f64)>,
    inv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    lambda: Vec<f64>,
}

impl<'a> Basis<'a> {
    fn weight(&self, j: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[j])
    }

    fn column(&self, j: usize, sign: f64) -> Vec<f64> {
        self.indices.iter().map(|&i| sign * psi(i, j, self.n)).collect()
    }

    fn factor(&mut self) -> Option<()> {
        let m = self.indices.len();
        let mut b = vec![vec![0.0; m]; m];
        for (c, &(j, s)) in self.cols.iter().enumerate() {
            for (r, v) in self.column(j, s).into_iter().enumerate() {
                b[r][c] = v;
            }
        }
        self.inv = invert(b)?;
        self.xb = mat_vec(&self.inv, self.y);
        self.refresh_duals();
        Some(())
    }

    /// λ solving `Bᵀλ = c_B`.
    fn refresh_duals(&mut self) {
        let m = self.indices.len();
        self.lambda = vec![0.0; m];
        for (c, row) in self.inv.iter().enumerate() {
            let w = self.weight(self.cols[c].0);
            axpy(&mut self.lambda, w, row);
        }
    }

    /// Correlations `Θᵀλ` of every coefficient with the current duals.
    fn correlations(&self, dct: &mut Dct) -> Vec<f64> {
        let mut spread = vec![0.0; self.n];
        for (&i, &l) in self.indices.iter().zip(&self.lambda) {
            spread[i] = l;
        }
        let mut out = vec![0.0; self.n];
        dct.forward(&spread, &mut out);
        out
    }
}

const PIVOT_BUDGET_PER_ROW: usize = 10;


/// Crossover from the ADMM state to an optimal vertex. The starting basis
/// takes the nonzeros of `z`, largest first, then the largest scaled duals
/// `u` (whose magnitudes approach the subgradient bound as a coefficient is
/// about to enter). Column signs follow the basic solution, so the start is
/// feasible, and primal simplex pivots (largest violation enters) walk to
/// the optimum. The result is returned only with a dual certificate:
/// `|Θᵀλ| ≤ w` everywhere, with equality on the support. Returns
/// (α, constraint error, certificate excess).
fn polish(
    z: &[f64],
    u: &[f64],
    indices: &[usize],
    y: &[f64],
    dct: &mut Dct,
    weights: Option<&[f64]>,
) -> Option<(Vec<f64>, f64, f64)> {
    let (n, m) = (z.len(), indices.len());
    let mut order: Vec<usize> = (0..n).filter(|&j| z[j] != 0.0).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    order.truncate(m);
    let mut in_order = vec![false; n];
    order.iter().for_each(|&j| in_order[j] = true);
    let mut rest: Vec<usize> = (0..n).filter(|&j| !in_order[j]).collect();
    rest.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b)));
    order.extend(rest.into_iter().take(m - order.len()));

    let mut basis = Basis {
        n,
        indices,
        y,
        weights,
        cols: order.iter().map(|&j| (j, 1.0)).collect(),
        inv: vec![],
        xb: vec![],
        lambda: vec![],
    };
    basis.factor()?;
    // sign each column by its basic value; vanishing ones follow the iterate
    for c in 0..m {
        let j = basis.cols[c].0;
        let s = if basis.xb[c].abs() > 1e-12 {
            basis.xb[c].signum()
        } else if z[j] != 0.0 {
            z[j].signum()
        } else {
            u[j].signum()
        };
        if s < 0.0 {
            basis.cols[c].1 = -1.0;
            basis.xb[c] = -basis.xb[c];
            basis.inv[c].iter_mut().for_each(|v| *v = -*v);
        }
    }
    basis.refresh_duals();

    let mut in_basis = vec![false; n];
    basis.cols.iter().for_each(|&(j, _)| in_basis[j] = true);
    let mut since_factor = 0;
    for _ in 0..PIVOT_BUDGET_PER_ROW * m {
        let corr = basis.correlations(dct);
        let enter = (0..n)
            .filter(|&j| !in_basis[j])
            .map(|j| (j, corr[j].abs() / basis.weight(j) - 1.0))
            .filter(|&(_, v)| v > CERT_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, _)) = enter else {
            if since_factor > 0 {
                // confirm on a fresh factorization
                basis.factor()?;
                since_factor = 0;
                if basis.xb.iter().any(|&v| v < -1e-9) {
                    return None;
                }
                continue;
            }
            return finish(&basis, &corr, dct);
        };
        let sign = corr[j].signum();
        let reduced = basis.weight(j) - sign * corr[j];
        let d = mat_vec(&basis.inv, &basis.column(j, sign));
        let (leave, step) = (0..m)
            .filter(|&r| d[r] > 1e-12)
            .map(|r| (r, basis.xb[r].max(0.0) / d[r]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
        for r in 0..m {
            basis.xb[r] -= step * d[r];
        }
        basis.xb[leave] = step;
        in_basis[basis.cols[leave].0] = false;
        in_basis[j] = true;
        basis.cols[leave] = (j, sign);
        let piv = 1.0 / d[leave];
        basis.inv[leave].iter_mut().for_each(|v| *v *= piv);
        let prow = basis.inv[leave].clone();
        for r in (0..m).filter(|&r| r != leave && d[r] != 0.0) {
            axpy(&mut basis.inv[r], -d[r], &prow);
        }
        axpy(&mut basis.lambda, reduced, &prow);
        since_factor += 1;
        if since_factor == 2 * m {
            basis.factor()?;
            since_factor = 0;
        }
    }
    None
}

fn finish(basis: &Basis, corr: &[f64], dct: &mut Dct) -> Option<(Vec<f64>, f64, f64)> {
    let n = basis.n;
    let mut alpha = vec![0.0; n];
    let mut in_basis = vec![false; n];
    let mut excess = 0.0f64;
    for (c, &(j, s)) in basis.cols.iter().enumerate() {
        alpha[j] = s * basis.xb[c].max(0.0);
        in_basis[j] = true;
        excess = excess.max((s * corr[j] - basis.weight(j)).abs() / basis.weight(j));
    }
    for j in (0..n).filter(|&j| !in_basis[j]) {
        excess = excess.max(corr[j].abs() / basis.weight(j) - 1.0);
    }
    let mut x = vec![0.0; n];
    dct.inverse(&alpha, &mut x);
    let resid = norm2(basis.indices.iter().zip(basis.y).map(|(&i, &yi)| x[i] - yi));
    let feas = resid / norm2(basis.y.iter().copied());
    (feas <= 1e-9 && excess <= CERT_TOL).then_some((alpha, feas, excess.max(0.0)))
}
