//! Butterworth IIR design (bilinear transform, cascaded biquads) and
//! zero-phase forward-backward filtering.

use std::f64::consts::PI;

/// One second-order section, `a0` normalized to 1. First-order sections
/// carry zero `b2`/`a2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state for a constant input `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        [y - self.b[0] * u, self.b[2] * u - self.a[1] * y]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandType {
    LowPass,
    HighPass,
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Butterworth design of the given order; `cutoff_hz` is the −3 dB point.
    pub fn butterworth(order: usize, cutoff_hz: f64, sample_rate_hz: f64, band: BandType) -> Self {
        assert!(order > 0, "filter order must be positive");
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0,
            "cutoff must lie strictly inside (0, Nyquist)"
        );
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for i in 0..order / 2 {
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let q = 1.0 / (2.0 * theta.cos());
            let norm = 1.0 / (1.0 + k / q + k2);
            let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k / q + k2) * norm];
            let b = match band {
                BandType::LowPass => [k2 * norm, 2.0 * k2 * norm, k2 * norm],
                BandType::HighPass => [norm, -2.0 * norm, norm],
            };
            sections.push(Biquad { b, a });
        }
        if order % 2 == 1 {
            let norm = 1.0 / (1.0 + k);
            let a = [(k - 1.0) * norm, 0.0];
            let b = match band {
                BandType::LowPass => [k * norm, k * norm, 0.0],
                BandType::HighPass => [norm, -norm, 0.0],
            };
            sections.push(Biquad { b, a });
        }
        Sos { sections }
    }

    pub fn dc_gain(&self) -> f64 {
        self.sections.iter().map(Biquad::dc_gain).product()
    }

    /// Causal filtering, starting from the steady state for `x[0]`.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let mut level = first;
        for s in &self.sections {
            let z = s.steady_state(level);
            level *= s.dc_gain();
            s.run(x, z);
        }
    }

    /// Zero-phase filtering: symmetric extension by `pad` samples on each
    /// side, forward pass, backward pass, crop.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let mut ext = symmetric_extend(x, pad, pad);
        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + x.len()].to_vec()
    }
}

/// Half-sample symmetric index into `0..n` for any (possibly negative or
/// out-of-range) position; the extension has period `2n`.
pub fn symmetric_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

/// `x` extended by `left` and `right` samples of mirrored data.
pub fn symmetric_extend(x: &[f64], left: usize, right: usize) -> Vec<f64> {
    let n = x.len();
    (-(left as isize)..(n + right) as isize)
        .map(|i| x[symmetric_index(i, n)])
        .collect()
}

/// Extension length giving the filter's transient room to settle: six
/// periods of the lowest corner frequency.
pub fn default_pad(cutoff_hz: f64, sample_rate_hz: f64) -> usize {
    (6.0 * sample_rate_hz / cutoff_hz).ceil() as usize
}
