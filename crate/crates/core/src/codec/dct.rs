use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{CodecError, CoeffVector};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Orthonormal DCT-II / DCT-III pair of one length, with scratch buffers.
///
/// The forward transform is
/// `α_j = K(j) Σ_i x_i cos(π j (i + ½) / N)` with `K(0) = 1/√N` and
/// `K(j) = √(2/N)` otherwise; the inverse is its transpose. Both run in
/// `O(N log N)` through one complex FFT of length `N` on the even/odd
/// reordered input.
pub struct Dct {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    // e^{-iπj/(2N)}
    twiddle: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Dct {
    pub fn new(n: usize) -> Result<Self, CodecError> {
        if n == 0 {
            return Err(CodecError::InvalidArgument("transform length must be at least 1".into()));
        }
        let (fft, ifft) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let twiddle = (0..n)
            .map(|j| Complex64::from_polar(1.0, -PI * j as f64 / (2.0 * n as f64)))
            .collect();
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        Ok(Self {
            n,
            fft,
            ifft,
            twiddle,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn k0(&self) -> f64 {
        (1.0 / self.n as f64).sqrt()
    }

    fn kj(&self) -> f64 {
        (2.0 / self.n as f64).sqrt()
    }

    /// Forward transform of `x` into `out`. Both slices must have length `N`.
    pub fn forward(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        for k in 0..n.div_ceil(2) {
            self.buf[k] = Complex64::new(x[2 * k], 0.0);
        }
        for k in 0..n / 2 {
            self.buf[n - 1 - k] = Complex64::new(x[2 * k + 1], 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let (k0, kj) = (self.k0(), self.kj());
        out[0] = self.buf[0].re * k0;
        for j in 1..n {
            out[j] = (self.buf[j] * self.twiddle[j]).re * kj;
        }
    }

    /// Inverse transform of `coeffs` into `out`.
    pub fn inverse(&mut self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(coeffs.len(), n);
        assert_eq!(out.len(), n);
        let (k0, kj) = (self.k0(), self.kj());
        // unscaled spectrum X_j = α_j / K(j); V_j = (X_j - i X_{N-j}) e^{iπj/(2N)}
        self.buf[0] = Complex64::new(coeffs[0] / k0, 0.0);
        for j in 1..n {
            let re = coeffs[j] / kj;
            let im = -coeffs[n - j] / kj;
            self.buf[j] = Complex64::new(re, im) * self.twiddle[j].conj();
        }
        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let inv_n = 1.0 / n as f64;
        for k in 0..n.div_ceil(2) {
            out[2 * k] = self.buf[k].re * inv_n;
        }
        for k in 0..n / 2 {
            out[2 * k + 1] = self.buf[n - 1 - k].re * inv_n;
        }
    }
}

/// Orthonormal DCT-II of `x`.
pub fn dct_forward(x: &[f64]) -> Result<CoeffVector, CodecError> {
    let mut plan = Dct::new(x.len())?;
    let mut out = vec![0.0; x.len()];
    plan.forward(x, &mut out);
    Ok(CoeffVector::new(out))
}

/// Inverse of [`dct_forward`].
pub fn idct(coeffs: &CoeffVector) -> Result<Vec<f64>, CodecError> {
    let mut plan = Dct::new(coeffs.len())?;
    let mut out = vec![0.0; coeffs.len()];
    plan.inverse(coeffs.as_slice(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct O(N²) evaluation of the transform definition.
    fn naive_dct(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|j| {
                let k = if j == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                k * x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| xi * (PI * j as f64 * (i as f64 + 0.5) / n as f64).cos())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn constant_signal() {
        let a = dct_forward(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((a.as_slice()[0] - 2.0).abs() < 1e-12);
        assert!(a.as_slice()[1..].iter().all(|v| v.abs() < 1e-12));
        for n in [1usize, 2, 3, 7, 64, 167] {
            let a = dct_forward(&vec![3.5; n]).unwrap();
            assert!((a.as_slice()[0] - 3.5 * (n as f64).sqrt()).abs() < 1e-9);
            assert!(a.as_slice()[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn inverse_of_constant() {
        let x = idct(&CoeffVector::new(vec![2.0, 0.0, 0.0, 0.0])).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_for_odd_and_even_lengths() {
        for n in [1usize, 2, 5, 8, 13, 40, 167, 200] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 97) as f64 / 9.0 - 4.0).collect();
            let fast = dct_forward(&x).unwrap();
            let slow = naive_dct(&x);
            for (a, b) in fast.as_slice().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
            let back = idct(&fast).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(dct_forward(&[]), Err(CodecError::InvalidArgument(_))));
        assert!(matches!(idct(&CoeffVector::new(vec![])), Err(CodecError::InvalidArgument(_))));
    }
}
