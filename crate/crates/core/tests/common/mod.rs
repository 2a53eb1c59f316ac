#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use szc::ir::{ImpulseResponse, IrGrid, Point3, Zone};
use szc::room::{self, Preset};

pub fn random_ir(rng: &mut ChaCha8Rng, n: usize, fs: f64, c: f64) -> ImpulseResponse {
    let samples = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ImpulseResponse::new(samples, fs, c, "rand").unwrap()
}

/// Exponentially decaying noise, shaped like a short room response.
pub fn decaying_ir(rng: &mut ChaCha8Rng, n: usize, fs: f64, c: f64) -> ImpulseResponse {
    let tau = n as f64 / 6.0;
    let samples = (0..n)
        .map(|i| rng.gen_range(-1.0..1.0) * (-(i as f64) / tau).exp())
        .collect();
    ImpulseResponse::new(samples, fs, c, "decay").unwrap()
}

pub fn random_grid(rng: &mut ChaCha8Rng, zone: Zone, k: usize, l: usize, n: usize) -> IrGrid {
    let irs = (0..k * l).map(|_| decaying_ir(rng, n, 8000.0, 343.0)).collect();
    let mics = (0..k).map(|i| [i as f64, 1.0, 0.0]).collect();
    let speakers = (0..l).map(|i| [i as f64, 0.0, 0.0]).collect();
    IrGrid::from_flat(zone, irs, mics, speakers).unwrap()
}

pub fn random_pair(rng: &mut ChaCha8Rng, k: usize, l: usize, n: usize) -> (IrGrid, IrGrid) {
    (
        random_grid(rng, Zone::Bright, k, l, n),
        random_grid(rng, Zone::Dark, k, l, n),
    )
}

fn jitter(rng: &mut ChaCha8Rng, p: Point3, r: f64) -> Point3 {
    [
        p[0] + rng.gen_range(-r..r),
        p[1] + rng.gen_range(-r..r),
        p[2] + rng.gen_range(-r / 4.0..r / 4.0),
    ]
}

/// The desk preset with the array and both zones moved at random.
pub fn random_desk_instance(rng: &mut ChaCha8Rng) -> Preset {
    let mut p = room::desk_preset();
    let shift = |rng: &mut ChaCha8Rng, pts: &mut Vec<Point3>, r: f64| {
        let d = jitter(rng, [0.0; 3], r);
        for q in pts.iter_mut() {
            *q = [q[0] + d[0], q[1] + d[1], q[2] + d[2]];
        }
    };
    shift(rng, &mut p.array.speaker_positions, 0.5);
    shift(rng, &mut p.array.bright_mic_positions, 0.4);
    shift(rng, &mut p.array.dark_mic_positions, 0.4);
    p
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Normalised cross-correlation at lag zero.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn argmax_abs(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap()
}

/// `|X(f)|` by direct summation, `f` in cycles per sample.
pub fn dtft_mag(x: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let ph = -2.0 * std::f64::consts::PI * f * n as f64;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    re.hypot(im)
}

/// Gaussian-windowed cosine burst, negligible above `band` (cycles/sample).
pub fn test_pulse(n: usize, centre: f64, band: f64) -> Vec<f64> {
    let sigma = 1.0 / (2.0 * std::f64::consts::PI * band / 4.0);
    (0..n)
        .map(|i| {
            let t = i as f64 - centre;
            (-(t * t) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}
