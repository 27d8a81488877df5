//! Butterworth band-pass design as cascaded biquads (second-order sections)
//! and bi-directional zero-phase application.
//!
//! Design is the classic analog-prototype route: Butterworth poles, band-pass
//! transform, bilinear mapping with pre-warped edges. Filtering runs each
//! section in transposed direct form II with step-response initial
//! conditions; `filtfilt` extends the signal by even reflection before the
//! forward and backward passes.

use num_complex::Complex64;
use std::f64::consts::PI;

/// One biquad: numerator `b0,b1,b2`, denominator `1,a1,a2`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// DC gain of the section (0/0-free: numerators that sum to zero give 0).
    fn dc_gain(&self) -> f64 {
        let num = self.b0 + self.b1 + self.b2;
        if num == 0.0 {
            return 0.0;
        }
        num / (1.0 + self.a1 + self.a2)
    }

    /// Steady-state filter state for a unit-step input (transposed DF-II).
    fn step_state(&self) -> (f64, f64) {
        let g = self.dc_gain();
        let s2 = self.b2 - self.a2 * g;
        let s1 = self.b1 - self.a1 * g + s2;
        (s1, s2)
    }

    fn response_at(&self, theta: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -theta);
        let z2 = Complex64::from_polar(1.0, -2.0 * theta);
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }
}

/// A cascade of second-order sections.
#[derive(Debug, Clone)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Butterworth band-pass: analog prototype of order `order`, band edges
    /// in Hz. The digital filter has `order` sections (2·order poles).
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Self {
        assert!(order >= 1 && order % 2 == 0, "prototype order must be even");
        assert!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0);

        let fs2 = 2.0 * fs;
        let warp = |f: f64| fs2 * (PI * f / fs).tan();
        let w1 = warp(low_hz);
        let w2 = warp(high_hz);
        let bw = w2 - w1;
        let w0_sq = w1 * w2;

        // Prototype poles in the upper half plane; conjugates are implied.
        let mut digital_pole_pairs: Vec<Complex64> = Vec::with_capacity(order);
        for k in 0..order / 2 {
            let theta = PI * (2.0 * k as f64 + 1.0) / (2.0 * order as f64);
            let proto = Complex64::new(-theta.sin(), theta.cos());
            // Band-pass transform: each prototype pole yields two poles.
            let bp = bw * proto;
            let disc = (bp * bp - 4.0 * w0_sq).sqrt();
            for s in [(bp + disc) / 2.0, (bp - disc) / 2.0] {
                // Bilinear transform.
                digital_pole_pairs.push((fs2 + s) / (fs2 - s));
            }
        }

        // Each pole pairs with its conjugate; zeros split as one at z=1 and
        // one at z=-1 per section, i.e. numerator (1, 0, -1).
        let mut sections: Vec<Biquad> = digital_pole_pairs
            .iter()
            .map(|z| Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            })
            .collect();

        // Unity gain at the geometric band center, spread across sections.
        let f_center = (low_hz * high_hz).sqrt();
        let theta = 2.0 * PI * f_center / fs;
        let total: Complex64 = sections
            .iter()
            .map(|s| s.response_at(theta))
            .product();
        let g = (1.0 / total.norm()).powf(1.0 / sections.len() as f64);
        for s in &mut sections {
            s.b0 *= g;
            s.b2 *= g;
        }
        Self { sections }
    }

    pub fn magnitude_at(&self, freq_hz: f64, fs: f64) -> f64 {
        let theta = 2.0 * PI * freq_hz / fs;
        self.sections
            .iter()
            .map(|s| s.response_at(theta).norm())
            .product()
    }

    /// Single forward pass with step-response initial conditions scaled by
    /// the first input sample.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut step_in = match x.first() {
            Some(&v) => v,
            None => return y,
        };
        for sec in &self.sections {
            let (z1u, z2u) = sec.step_state();
            let mut s1 = z1u * step_in;
            let mut s2 = z2u * step_in;
            for v in y.iter_mut() {
                let xn = *v;
                let yn = sec.b0 * xn + s1;
                s1 = sec.b1 * xn - sec.a1 * yn + s2;
                s2 = sec.b2 * xn - sec.a2 * yn;
                *v = yn;
            }
            step_in *= sec.dc_gain();
        }
        y
    }

    /// Zero-phase filtering: even-reflection padding, forward pass, backward
    /// pass, trim. Padding length is 3× the effective filter order (2 poles
    /// per section), clamped to the signal length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let pad = (6 * self.sections.len()).min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(x[i]);
        }
        ext.extend_from_slice(x);
        for i in (n - pad - 1..n - 1).rev() {
            ext.push(x[i]);
        }

        let mut fwd = self.filter(&ext);
        fwd.reverse();
        let mut back = self.filter(&fwd);
        back.reverse();
        back[pad..pad + n].to_vec()
    }
}
