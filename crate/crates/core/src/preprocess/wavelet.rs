//! Periodized orthogonal discrete wavelet transform (Daubechies-4, 8 taps),
//! used to isolate the slow approximation band of a signal.

use super::filter::symmetric_extend;

/// Daubechies-4 reconstruction low-pass filter (four vanishing moments).
pub const DB4_LOWPASS: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// One analysis step: low-pass filter and downsample by two, with periodic
/// wrap. `x.len()` must be even.
fn analyze_lowpass(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n / 2)
        .map(|k| h.iter().enumerate().map(|(j, hj)| hj * x[(2 * k + j) % n]).sum())
        .collect()
}

/// Transpose of [`analyze_lowpass`]: upsample and filter.
fn synthesize_lowpass(a: &[f64], h: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut out = vec![0.0; n];
    for (k, ak) in a.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            out[(2 * k + j) % n] += ak * hj;
        }
    }
    out
}

/// Orthogonal projection of `x` onto the level-`depth` approximation space
/// (all detail coefficients zeroed). `x.len()` must be divisible by
/// `2^depth`.
pub fn approximation_periodic(x: &[f64], depth: u32, h: &[f64]) -> Vec<f64> {
    let block = 1usize << depth;
    assert!(
        x.len().is_multiple_of(block) && !x.is_empty(),
        "length must be a positive multiple of 2^depth"
    );
    let mut coeffs = x.to_vec();
    for _ in 0..depth {
        coeffs = analyze_lowpass(&coeffs, h);
    }
    for _ in 0..depth {
        coeffs = synthesize_lowpass(&coeffs, h);
    }
    coeffs
}

/// Level-`depth` approximation of `x` with symmetric boundary handling: the
/// signal is mirrored beyond both ends by the filter's support at that depth
/// before the periodized transform, then cropped back.
pub fn approximation(x: &[f64], depth: u32) -> Vec<f64> {
    let h = &DB4_LOWPASS;
    let block = 1usize << depth;
    let support = (h.len() - 1) * (block - 1);
    let n = x.len();
    let left = support;
    let mut right = support;
    let total = n + left + right;
    right += (block - total % block) % block;
    let ext = symmetric_extend(x, left, right);
    let approx = approximation_periodic(&ext, depth, h);
    approx[left..left + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_is_orthonormal() {
        let h = DB4_LOWPASS;
        let energy: f64 = h.iter().map(|v| v * v).sum();
        assert!((energy - 1.0).abs() < 1e-12);
        let sum: f64 = h.iter().sum();
        assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in [2, 4, 6] {
            let dot: f64 = (0..8 - shift).map(|j| h[j] * h[j + shift]).sum();
            assert!(dot.abs() < 1e-12, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let x: Vec<f64> = (0..256).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let p1 = approximation_periodic(&x, 3, &DB4_LOWPASS);
        let p2 = approximation_periodic(&p1, 3, &DB4_LOWPASS);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn low_order_polynomials_live_in_approximation() {
        // Four vanishing moments: cubics are reproduced away from the wrap.
        let x: Vec<f64> = (0..512).map(|i| 1.0 + 0.01 * i as f64).collect();
        let a = approximation(&x, 4);
        for i in 100..400 {
            assert!((a[i] - x[i]).abs() < 1e-8);
        }
    }
}
