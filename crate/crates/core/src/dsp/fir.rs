//! Windowed-sinc FIR design and polyphase rational resampling.
//!
//! The resampler upsamples by L, low-passes at `min(f_in, f_out)/2` with a
//! Kaiser-windowed sinc sized for 80 dB stopband attenuation, and downsamples
//! by M. The convolution is evaluated only at the output sample positions, so
//! the zero-stuffed intermediate signal never materializes.

/// Stopband attenuation the anti-aliasing filter is designed for (dB).
pub const STOPBAND_DB: f64 = 80.0;

/// Zeroth-order modified Bessel function of the first kind, by power series.
/// Converges in ~25 terms for the argument range Kaiser windows use.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Kaiser shape parameter for a given stopband attenuation (dB), from the
/// standard empirical fit.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Symmetric Kaiser window of length `n`.
pub fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    let denom = bessel_i0(beta);
    let alpha = (n as f64 - 1.0) / 2.0;
    (0..n)
        .map(|i| {
            let r = (i as f64 - alpha) / alpha;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Lowpass windowed-sinc taps: `cutoff` in cycles/sample (0, 0.5), odd
/// length, unity DC gain.
pub fn lowpass_taps(cutoff: f64, half_len: usize, beta: f64) -> Vec<f64> {
    assert!(cutoff > 0.0 && cutoff < 0.5, "cutoff out of (0, 0.5)");
    let n = 2 * half_len + 1;
    let win = kaiser_window(n, beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 - half_len as f64;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            sinc * win[i]
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Best rational approximation p/q to `x` with `q <= max_den`, by continued
/// fractions. Returns `None` when no representation matches `x` to within
/// `tol` relative error.
pub fn rational_approx(x: f64, max_den: u64, tol: f64) -> Option<(u64, u64)> {
    assert!(x > 0.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut frac = x;
    for _ in 0..64 {
        let a = frac.floor();
        if a > u64::MAX as f64 {
            break;
        }
        let a64 = a as u64;
        let p2 = a64.checked_mul(p1).and_then(|v| v.checked_add(p0));
        let q2 = a64.checked_mul(q1).and_then(|v| v.checked_add(q0));
        let (p2, q2) = match (p2, q2) {
            (Some(p), Some(q)) => (p, q),
            _ => break,
        };
        if q2 > max_den || p2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let rem = frac - a;
        if rem.abs() < 1e-15 {
            break;
        }
        frac = 1.0 / rem;
    }
    if q1 == 0 || p1 == 0 {
        return None;
    }
    let approx = p1 as f64 / q1 as f64;
    if ((approx - x) / x).abs() <= tol {
        Some((p1, q1))
    } else {
        None
    }
}

/// Polyphase resampling of one channel by the rational factor `up/down`.
///
/// Output length is `ceil(len * up / down)`; the filter's group delay is
/// compensated so output sample m sits at input time `m * down / up`.
/// Samples beyond the input edges are treated as zero.
pub fn resample_channel(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    assert!(up > 0 && down > 0);
    if up == down {
        return x.to_vec();
    }
    let max_rate = up.max(down);
    // Cutoff at min(f_in, f_out)/2 expressed at the upsampled rate.
    let cutoff = 0.5 / max_rate as f64;
    // Kaiser sizing for 80 dB with transition width ~(A-8)/(2.285*(N-1)).
    let half_len = 16 * max_rate;
    let taps = lowpass_taps(cutoff, half_len, kaiser_beta(STOPBAND_DB));
    // Upsampling-gain compensation.
    let taps: Vec<f64> = taps.iter().map(|t| t * up as f64).collect();

    let n_taps = taps.len();
    let half = half_len; // (n_taps - 1) / 2
    let t_in = x.len() as i64;
    let out_len = (x.len() * up).div_ceil(down);
    let mut y = vec![0.0; out_len];
    for (m, out) in y.iter_mut().enumerate() {
        // Center of the filter sits at upsampled position m*down + half.
        let pos = (m * down + half) as i64;
        // Valid input indices n with 0 <= pos - n*up < n_taps.
        let n_min = ((pos - n_taps as i64 + 1).div_euclid(up as i64)
            + i64::from((pos - n_taps as i64 + 1).rem_euclid(up as i64) != 0))
        .max(0);
        let n_max = (pos.div_euclid(up as i64)).min(t_in - 1);
        let mut acc = 0.0;
        let mut n = n_min;
        while n <= n_max {
            let k = (pos - n * up as i64) as usize;
            acc += taps[k] * x[n as usize];
            n += 1;
        }
        *out = acc;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_i0_reference_points() {
        // I0(0)=1; I0(1)=1.2660658777520084; I0(5)=27.239871823604442
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.2660658777520084).abs() < 1e-12);
        assert!((bessel_i0(5.0) - 27.239871823604442).abs() < 1e-9);
    }

    #[test]
    fn lowpass_has_unity_dc_gain() {
        let taps = lowpass_taps(0.25, 32, kaiser_beta(80.0));
        let sum: f64 = taps.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(taps.len(), 65);
    }

    #[test]
    fn lowpass_stopband_attenuation_meets_design() {
        // Evaluate |H| on a stopband frequency well past the transition.
        let half = 32;
        let taps = lowpass_taps(0.25, half, kaiser_beta(80.0));
        let eval = |f: f64| -> f64 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, t) in taps.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * f * i as f64;
                re += t * ph.cos();
                im += t * ph.sin();
            }
            (re * re + im * im).sqrt()
        };
        let h = eval(0.40);
        assert!(h < 10f64.powf(-STOPBAND_DB / 20.0) * 2.0, "|H(0.40)| = {h}");
    }

    #[test]
    fn rational_approx_exact_and_bounded() {
        assert_eq!(rational_approx(0.5, 1000, 1e-9), Some((1, 2)));
        assert_eq!(rational_approx(2.0, 1000, 1e-9), Some((2, 1)));
        assert_eq!(rational_approx(256.0 / 500.0, 1000, 1e-9), Some((64, 125)));
        // sqrt(2) has no small exact representation
        assert_eq!(rational_approx(std::f64::consts::SQRT_2, 1000, 1e-9), None);
    }

    #[test]
    fn decimation_by_two_preserves_a_low_tone() {
        // 10 Hz at 512 Hz -> 256 Hz; compare against the analytic tone.
        let f_in = 512.0;
        let n = 2048;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / f_in).sin())
            .collect();
        let y = resample_channel(&x, 1, 2);
        assert_eq!(y.len(), 1024);
        let reference: Vec<f64> = (0..y.len())
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 256.0).sin())
            .collect();
        // Discard edge transients (one filter length each side).
        let edge = 80;
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for i in edge..y.len() - edge {
            dot += y[i] * reference[i];
            na += y[i] * y[i];
            nb += reference[i] * reference[i];
        }
        let corr = dot / (na * nb).sqrt();
        assert!(corr >= 0.999, "correlation {corr}");
        // Energy preserved within 5%.
        let var_ratio = na / nb;
        assert!((var_ratio - 1.0).abs() < 0.05, "variance ratio {var_ratio}");
    }

    #[test]
    fn upsampling_interpolates_a_tone() {
        // 5 Hz at 128 Hz -> 256 Hz
        let x: Vec<f64> = (0..512)
            .map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 128.0).sin())
            .collect();
        let y = resample_channel(&x, 2, 1);
        assert_eq!(y.len(), 1024);
        let edge = 100;
        let mut worst = 0.0f64;
        for i in edge..y.len() - edge {
            let r = (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 256.0).sin();
            worst = worst.max((y[i] - r).abs());
        }
        assert!(worst < 1e-3, "max abs deviation {worst}");
    }

    #[test]
    fn identity_factors_pass_through() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(resample_channel(&x, 3, 3), x);
    }
}
