//! Thin wrappers over rustfft for the small transforms used here.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Unnormalized forward DFT.
pub(crate) fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

/// Inverse DFT with 1/N normalization.
pub(crate) fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(x.len()).process(&mut buf);
    let scale = 1.0 / x.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

pub(crate) fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let back = ifft(&fft_real(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b.re).abs() < 1e-13);
            assert!(b.im.abs() < 1e-13);
        }
    }
}
