//! Small DSP building blocks shared by the SICER, room and metrics modules.

use std::f64::consts::PI;

/// Normalised sinc, `sin(pi x) / (pi x)`.
///
/// Exact at the removable singularity and exactly zero at the other
/// integers, so integer-spaced resampling is an exact identity.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else if x == x.round() {
        0.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window evaluated at offset `t` from the centre, half-width `half`.
/// Zero outside `|t| <= half`.
pub fn kaiser(t: f64, half: f64, beta: f64) -> f64 {
    let r = t / half;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

/// Kaiser shape parameter for a given stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Hann window evaluated at offset `t` from the centre, half-width `half`.
pub fn hann(t: f64, half: f64) -> f64 {
    if t.abs() > half {
        0.0
    } else {
        0.5 * (1.0 + (PI * t / half).cos())
    }
}

/// Linear-phase FIR lowpass (Kaiser-windowed sinc), odd length, unit DC gain.
///
/// Frequencies are fractions of Nyquist: `cutoff` is the -6 dB point and the
/// transition band spans `cutoff ± half_transition`.
pub fn kaiser_lowpass(cutoff: f64, half_transition: f64, atten_db: f64) -> Vec<f64> {
    let width_rad = 2.0 * half_transition * PI;
    let order = ((atten_db - 8.0) / (2.285 * width_rad)).ceil() as usize;
    let taps = order + 1 + (order % 2); // force odd length
    let half = (taps - 1) as f64 / 2.0;
    let beta = kaiser_beta(atten_db);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - half;
            cutoff * sinc(cutoff * t) * kaiser(t, half, beta)
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= dc);
    h
}

/// Filter `x` with an odd-length linear-phase FIR, compensating its group
/// delay so the output is aligned with and as long as the input.
pub fn filter_zero_phase(x: &[f64], taps: &[f64]) -> Vec<f64> {
    debug_assert!(taps.len() % 2 == 1);
    let delay = (taps.len() / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(j, &t)| {
                    let idx = i + delay - j as isize;
                    (0..n).contains(&idx).then(|| t * x[idx as usize])
                })
                .sum()
        })
        .collect()
}

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Accumulate `a * b` into `out` (which must be at least full-convolution long).
pub fn convolve_add(out: &mut [f64], a: &[f64], b: &[f64]) {
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

/// Magnitude of the DTFT of `x` at normalised frequency `f` (cycles/sample).
pub fn dtft_magnitude(x: &[f64], f: f64) -> f64 {
    let w = 2.0 * PI * f;
    let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &v)| {
        let (s, c) = (w * n as f64).sin_cos();
        (re + v * c, im - v * s)
    });
    re.hypot(im)
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
