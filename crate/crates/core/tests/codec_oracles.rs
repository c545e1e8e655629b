mod oracle;

use cvsense::codec::{solve_basis_pursuit, CodecError, Dct, SampledBlock, SensingPattern, SolverConfig};
use cvsense::metrics::rmse_normalized;
use cvsense::rng;
use rand::Rng;

use oracle::{basis_pursuit_lp, idct_matrix, planted, solve_lp, LpError};

#[test]
fn simplex_solves_hand_examples() {
    // x1 + 2x2 = 4, 3x1 + x2 = 6 has the single solution (1.6, 1.2)
    let (v, x) = solve_lp(&[vec![1.0, 2.0], vec![3.0, 1.0]], &[4.0, 6.0], &[1.0, 1.0]).unwrap();
    assert!((v - 2.8).abs() < 1e-12 && (x[0] - 1.6).abs() < 1e-12);
    // min −x1 with x1 − x2 = 1 is unbounded
    assert_eq!(solve_lp(&[vec![1.0, -1.0]], &[1.0], &[-1.0, 0.0]), Err(LpError::Unbounded));
    // x1 + x2 = −1 has no non-negative solution
    assert_eq!(solve_lp(&[vec![1.0, 1.0]], &[-1.0], &[1.0, 1.0]), Err(LpError::Infeasible));
    // min |a| + |b| s.t. a + b = 2 → 2
    let (v, _) = solve_lp(&[vec![1.0, 1.0, -1.0, -1.0]], &[2.0], &[1.0; 4]).unwrap();
    assert!((v - 2.0).abs() < 1e-12);
}

fn explicit_psi(dct: &mut Dct) -> Vec<Vec<f64>> {
    let n = dct.len();
    let mut cols = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    for (k, col) in cols.iter_mut().enumerate() {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[k] = 1.0;
        dct.inverse(&e, col);
    }
    cols
}

#[test]
fn inverse_transform_matches_closed_form() {
    for n in [4, 16, 100, 200, 1000] {
        let cols = explicit_psi(&mut Dct::new(n).unwrap());
        let psi = idct_matrix(n);
        let worst = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| (cols[k][i] - psi[i][k]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "N={n}: {worst}");
    }
}

#[test]
fn psi_is_orthonormal() {
    for n in [4, 16, 100, 200, 1000] {
        let cols = explicit_psi(&mut Dct::new(n).unwrap());
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in a..n {
                let dot: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
                worst = worst.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst < 1e-9, "N={n}: {worst}");
    }
}

#[test]
fn round_trip_on_random_vectors() {
    for n in [4, 16, 100, 200, 1000] {
        let mut dct = Dct::new(n).unwrap();
        let mut r = rng::stream(n as u64, 0);
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
            dct.forward(&x, &mut a);
            dct.inverse(&a, &mut b);
            assert!(rmse_normalized(&x, &b).unwrap() < 1e-9);
        }
    }
}

fn block(n: usize, kept: &[usize], signal: &[f64]) -> SampledBlock {
    let pattern = SensingPattern::new(n, kept.to_vec()).unwrap();
    SampledBlock::new(pattern, kept.iter().map(|&i| signal[i]).collect(), 0).unwrap()
}

#[test]
fn planted_sparse_signals_are_recovered() {
    let (n, k, m) = (100, 5, 60);
    let psi = idct_matrix(n);
    let mut hits = 0;
    for seed in 0..100 {
        let p = planted(n, k, m, &mut rng::stream(seed, 7));
        let sol = match solve_basis_pursuit(&block(n, &p.kept, &p.signal), &SolverConfig::default()) {
            Ok(s) => s.coeffs.into_inner(),
            Err(CodecError::NotConverged { last, .. }) => last.into_inner(),
            Err(e) => panic!("{e}"),
        };
        let x: Vec<f64> = psi.iter().map(|row| row.iter().zip(&sol).map(|(a, b)| a * b).sum()).collect();
        if rmse_normalized(&p.signal, &x).unwrap() < 1e-3 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100 recovered");
}

#[test]
fn l1_norm_matches_lp_optimum() {
    let mut r = rng::stream(2024, 0);
    for inst in 0..20 {
        let n = [16, 24, 32, 40][inst % 4];
        let m = n / 2;
        // generic data, not sparse: the optimum sits on a vertex of the LP
        let signal: Vec<f64> = (0..n).map(|i| 30.0 + 10.0 * (i as f64 / 5.0).sin() + r.random_range(-3.0..3.0)).collect();
        let mut kept = rand::seq::index::sample(&mut r, n, m).into_vec();
        kept.sort_unstable();
        let y: Vec<f64> = kept.iter().map(|&i| signal[i]).collect();
        let (lp, _) = basis_pursuit_lp(n, &kept, &y).unwrap();
        let l1 = match solve_basis_pursuit(&block(n, &kept, &signal), &SolverConfig::default()) {
            Ok(s) => s.coeffs.l1_norm(),
            Err(CodecError::NotConverged { last, .. }) => last.l1_norm(),
            Err(e) => panic!("{e}"),
        };
        let rel = (l1 - lp).abs() / lp;
        assert!(rel < 1e-3, "instance {inst} (N={n}): admm {l1} vs lp {lp}");
    }
}
