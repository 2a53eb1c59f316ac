//! Shoebox room impulse responses by the image-source method.
//!
//! Each image contributes `r^order / (4 pi d)` at delay `d / c * f_s`,
//! rendered with an 81-tap Hann-windowed sinc so sub-sample delays survive.
//! The sinc is band-limited to `kernel_cutoff` of Nyquist (default 0.9) and
//! scaled to a unit peak, so an on-grid image keeps its geometric amplitude
//! and the passband gain is `1 / kernel_cutoff`. The guard band keeps IRs
//! band-limited after a moderate change of sound speed.
//! The wall reflection coefficient `r = sqrt(1 - alpha)` is shared by all
//! six walls, with `alpha` from Sabine's formula
//! `RT60 = 0.161 V / (S alpha)`. The metric constant 0.161 keeps the walls
//! identical across simulated sound speeds, so a room simulated at a
//! different `c` is the same room in different air.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp;
use crate::ir::{GridError, ImpulseResponse, IrGrid, Point3, Zone};
use crate::par;

/// Fractional-delay kernel length in taps.
pub const KERNEL_TAPS: usize = 81;
const KERNEL_HALF: f64 = KERNEL_TAPS as f64 / 2.0;
/// Default kernel cutoff, a fraction of Nyquist.
pub const KERNEL_CUTOFF: f64 = 0.9;
const SABINE_CONSTANT: f64 = 0.161;
const MIN_MIC_SPEAKER_DISTANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoomError {
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("invalid array: {0}")]
    InvalidArray(String),
    #[error("source {index} at {position:?} is not strictly inside the room")]
    SourceOutsideRoom { index: usize, position: Point3 },
    #[error("receiver {index} at {position:?} is not strictly inside the room")]
    ReceiverOutsideRoom { index: usize, position: Point3 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionOrder {
    /// `ceil(c * rt60 / min dimension) + 1`
    #[default]
    Auto,
    #[serde(untagged)]
    Max(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: Point3,
    pub rt60_s: f64,
    pub sample_rate_hz: f64,
    pub sound_speed_mps: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub max_reflection_order: ReflectionOrder,
    /// Cutoff of the fractional-delay kernel as a fraction of Nyquist.
    #[serde(default = "default_kernel_cutoff")]
    pub kernel_cutoff: f64,
}

fn default_kernel_cutoff() -> f64 {
    KERNEL_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub speaker_positions: Vec<Point3>,
    pub bright_mic_positions: Vec<Point3>,
    pub dark_mic_positions: Vec<Point3>,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<(), RoomError> {
        let bad = |m: String| Err(RoomError::InvalidRoom(m));
        if self.dimensions.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return bad(format!("dimensions must be positive, got {:?}", self.dimensions));
        }
        if !(self.rt60_s.is_finite() && self.rt60_s >= 0.0) {
            return bad(format!("rt60 must be >= 0, got {}", self.rt60_s));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.sound_speed_mps.is_finite() && self.sound_speed_mps > 0.0) {
            return bad(format!("sound speed must be positive, got {}", self.sound_speed_mps));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if !(self.kernel_cutoff > 0.0 && self.kernel_cutoff <= 1.0) {
            return bad(format!("kernel cutoff must be in (0, 1], got {}", self.kernel_cutoff));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.iter()
            .zip(&self.dimensions)
            .all(|(&x, &d)| x.is_finite() && x > 0.0 && x < d)
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    /// Uniform pressure reflection coefficient of the walls.
    pub fn reflection_coefficient(&self) -> f64 {
        if self.rt60_s <= 0.0 {
            return 0.0;
        }
        let alpha = SABINE_CONSTANT * self.volume() / (self.surface() * self.rt60_s);
        (1.0 - alpha.min(1.0)).sqrt()
    }

    pub fn reflection_order(&self) -> u32 {
        match self.max_reflection_order {
            ReflectionOrder::Max(n) => n,
            ReflectionOrder::Auto => {
                let min_dim = self.dimensions.iter().cloned().fold(f64::INFINITY, f64::min);
                (self.sound_speed_mps * self.rt60_s / min_dim).ceil() as u32 + 1
            }
        }
    }

    pub fn with_sound_speed(&self, c: f64) -> Self {
        Self {
            sound_speed_mps: c,
            ..self.clone()
        }
    }
}

impl ArraySpec {
    pub fn validate(&self) -> Result<(), RoomError> {
        if self.speaker_positions.is_empty() {
            return Err(RoomError::InvalidArray("no loudspeakers".into()));
        }
        if self.bright_mic_positions.is_empty() || self.dark_mic_positions.is_empty() {
            return Err(RoomError::InvalidArray("each zone needs at least one microphone".into()));
        }
        for m in self.bright_mic_positions.iter().chain(&self.dark_mic_positions) {
            for s in &self.speaker_positions {
                if distance(m, s) <= MIN_MIC_SPEAKER_DISTANCE {
                    return Err(RoomError::InvalidArray(format!(
                        "microphone {m:?} within 1 cm of loudspeaker {s:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mics(&self, zone: Zone) -> &[Point3] {
        match zone {
            Zone::Bright => &self.bright_mic_positions,
            Zone::Dark => &self.dark_mic_positions,
        }
    }
}

fn distance(a: &Point3, b: &Point3) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// One image source: position and reflection order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Image {
    pub position: Point3,
    pub order: u32,
}

/// Images of `source` up to `max_order` whose distance to `receiver` is at
/// most `max_distance`, in a fixed enumeration order.
pub fn image_sources(
    room: &RoomSpec,
    source: &Point3,
    receiver: &Point3,
    max_order: u32,
    max_distance: f64,
) -> Vec<Image> {
    let dims = room.dimensions;
    // |n| <= (order + 1) / 2 on each axis.
    let order_reach = (max_order as i64 + 1) / 2;
    let reach: [i64; 3] = std::array::from_fn(|a| {
        let by_distance = (max_distance / (2.0 * dims[a])).ceil().min(i64::MAX as f64 / 4.0) as i64 + 1;
        by_distance.min(order_reach)
    });
    let mut out = Vec::new();
    for qx in 0..2i64 {
        for qy in 0..2i64 {
            for qz in 0..2i64 {
                let q = [qx, qy, qz];
                for nx in -reach[0]..=reach[0] {
                    for ny in -reach[1]..=reach[1] {
                        for nz in -reach[2]..=reach[2] {
                            let n = [nx, ny, nz];
                            let order: i64 = (0..3).map(|a| (n[a] - q[a]).abs() + n[a].abs()).sum();
                            if order > max_order as i64 {
                                continue;
                            }
                            let position: Point3 = std::array::from_fn(|a| {
                                (1 - 2 * q[a]) as f64 * source[a] + 2.0 * n[a] as f64 * dims[a]
                            });
                            if distance(&position, receiver) <= max_distance {
                                out.push(Image {
                                    position,
                                    order: order as u32,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Add a band-limited impulse of amplitude `amp` at fractional sample `tau`.
fn render_impulse(out: &mut [f64], tau: f64, amp: f64, cutoff: f64) {
    let lo = (tau - KERNEL_HALF).ceil().max(0.0);
    let hi = (tau + KERNEL_HALF).floor().min(out.len() as f64 - 1.0);
    if hi < lo {
        return;
    }
    for k in lo as usize..=hi as usize {
        let t = k as f64 - tau;
        out[k] += amp * dsp::hann(t, KERNEL_HALF) * dsp::sinc(cutoff * t);
    }
}

/// Impulse response from `source` to `receiver`.
pub fn simulate_ir(room: &RoomSpec, source: &Point3, receiver: &Point3) -> Vec<f64> {
    let fs = room.sample_rate_hz;
    let c = room.sound_speed_mps;
    let n = room.n_samples;
    let r = room.reflection_coefficient();
    let max_distance = (n as f64 + KERNEL_HALF) * c / fs;
    let mut out = vec![0.0; n];
    for img in image_sources(room, source, receiver, room.reflection_order(), max_distance) {
        let gain = if img.order == 0 { 1.0 } else { r.powi(img.order as i32) };
        if gain == 0.0 {
            continue;
        }
        let d = distance(&img.position, receiver);
        render_impulse(&mut out, d / c * fs, gain / (4.0 * PI * d), room.kernel_cutoff);
    }
    out
}

/// Simulate every speaker-to-microphone IR for one zone.
pub fn simulate_zone(
    room: &RoomSpec,
    speakers: &[Point3],
    mics: &[Point3],
    zone: Zone,
) -> Result<IrGrid, RoomError> {
    room.validate()?;
    if let Some((index, p)) = speakers.iter().enumerate().find(|(_, p)| !room.contains(p)) {
        return Err(RoomError::SourceOutsideRoom {
            index,
            position: *p,
        });
    }
    if let Some((index, p)) = mics.iter().enumerate().find(|(_, p)| !room.contains(p)) {
        return Err(RoomError::ReceiverOutsideRoom {
            index,
            position: *p,
        });
    }
    let l = speakers.len();
    let irs = par::map_range(mics.len() * l, |i| {
        let (k, s) = (i / l, i % l);
        let samples = simulate_ir(room, &speakers[s], &mics[k]);
        ImpulseResponse::new(
            samples,
            room.sample_rate_hz,
            room.sound_speed_mps,
            format!("{zone} mic {k} speaker {s} @ {} m/s", room.sound_speed_mps),
        )
        .expect("simulated IR is finite")
    });
    Ok(IrGrid::from_flat(zone, irs, mics.to_vec(), speakers.to_vec())?)
}

/// Simulate both zones of an array.
pub fn simulate_array(room: &RoomSpec, array: &ArraySpec) -> Result<(IrGrid, IrGrid), RoomError> {
    array.validate()?;
    let bright = simulate_zone(room, &array.speaker_positions, array.mics(Zone::Bright), Zone::Bright)?;
    let dark = simulate_zone(room, &array.speaker_positions, array.mics(Zone::Dark), Zone::Dark)?;
    Ok((bright, dark))
}

/// `k` points of a hexagonal lattice with the given spacing, nearest to
/// `centre` first, in the horizontal plane through `centre`.
pub fn hex_zone(centre: Point3, spacing: f64, k: usize) -> Vec<Point3> {
    let rings = (0..).find(|&r: &i64| 1 + 3 * r * (r + 1) >= k as i64).unwrap() + 1;
    let mut pts: Vec<(f64, f64, f64, f64)> = Vec::new();
    for i in -rings..=rings {
        for j in -rings..=rings {
            let x = spacing * (i as f64 + 0.5 * j as f64);
            let y = spacing * (3f64.sqrt() / 2.0 * j as f64);
            let r = (x * x + y * y).sqrt();
            let a = y.atan2(x).rem_euclid(2.0 * PI);
            pts.push(((r * 1e9).round(), (a * 1e9).round(), x, y));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.into_iter()
        .take(k)
        .map(|(_, _, x, y)| [centre[0] + x, centre[1] + y, centre[2]])
        .collect()
}

/// Uniform linear array along x centred on `centre`.
pub fn linear_array(centre: Point3, spacing: f64, l: usize) -> Vec<Point3> {
    let offset = (l as f64 - 1.0) / 2.0;
    (0..l)
        .map(|i| [centre[0] + (i as f64 - offset) * spacing, centre[1], centre[2]])
        .collect()
}

/// A complete experiment geometry and filter-design defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub room: RoomSpec,
    pub array: ArraySpec,
    pub filter_len_j: usize,
    pub mu: f64,
}

impl Preset {
    /// 1-based index of the loudspeaker used as the virtual source.
    pub fn virtual_source_index(&self) -> usize {
        virtual_source_index(self.array.speaker_positions.len())
    }
}

/// Middle loudspeaker, `ceil(L / 2)`, 1-based.
pub fn virtual_source_index(l: usize) -> usize {
    l.div_ceil(2)
}

pub const ROOM_DIMENSIONS: Point3 = [4.5, 4.5, 2.2];
pub const ARRAY_HEIGHT: f64 = 1.2;
pub const SPEAKER_SPACING: f64 = 0.06;
pub const MIC_SPACING: f64 = 0.09;

/// Geometry presets by scale:
///
/// | scale        | L  | K_b=K_d | f_s (Hz) | N    | J   | RT60 (s) |
/// |--------------|----|---------|----------|------|-----|----------|
/// | 1            | 16 | 37      | 16000    | 2967 | 800 | 0.3      |
/// | [0.5, 1)     | 8  | 19      | 16000    | 1484 | 400 | 0.3      |
/// | (0, 0.5)     | 4  | 5       | 8000     | 1024 | 128 | 0.2      |
///
/// Speakers sit on a line along x centred at (2.25, 1.5, 1.2); the bright
/// and dark zones are hexagonal microphone patches centred at (1.75, 2.6)
/// and (2.75, 2.6), all at 1.2 m height. Design speed is 343 m/s.
pub fn preset_for_scale(scale: f64) -> Preset {
    let (name, l, k, fs, n, j, rt60) = if scale >= 1.0 {
        ("paper", 16, 37, 16000.0, 2967, 800, 0.3)
    } else if scale >= 0.5 {
        ("half", 8, 19, 16000.0, 1484, 400, 0.3)
    } else {
        ("desk", 4, 5, 8000.0, 1024, 128, 0.2)
    };
    Preset {
        name: name.into(),
        room: RoomSpec {
            dimensions: ROOM_DIMENSIONS,
            rt60_s: rt60,
            sample_rate_hz: fs,
            sound_speed_mps: 343.0,
            n_samples: n,
            max_reflection_order: ReflectionOrder::Auto,
            kernel_cutoff: KERNEL_CUTOFF,
        },
        array: ArraySpec {
            speaker_positions: linear_array([2.25, 1.5, ARRAY_HEIGHT], SPEAKER_SPACING, l),
            bright_mic_positions: hex_zone([1.75, 2.6, ARRAY_HEIGHT], MIC_SPACING, k),
            dark_mic_positions: hex_zone([2.75, 2.6, ARRAY_HEIGHT], MIC_SPACING, k),
        },
        filter_len_j: j,
        mu: 1.0,
    }
}

pub const DESK_SCALE: f64 = 0.25;

pub fn paper_preset() -> Preset {
    preset_for_scale(1.0)
}

pub fn desk_preset() -> Preset {
    preset_for_scale(DESK_SCALE)
}

/// `(RoomSpec, ArraySpec)` of [`preset_for_scale`].
pub fn default_paper_geometry(scale: f64) -> (RoomSpec, ArraySpec) {
    let p = preset_for_scale(scale);
    (p.room, p.array)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anechoic(c: f64, fs: f64, n: usize) -> RoomSpec {
        RoomSpec {
            dimensions: [10.0, 10.0, 10.0],
            rt60_s: 0.0,
            sample_rate_hz: fs,
            sound_speed_mps: c,
            n_samples: n,
            max_reflection_order: ReflectionOrder::Auto,
            kernel_cutoff: KERNEL_CUTOFF,
        }
    }

    fn argmax(x: &[f64]) -> usize {
        x.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn free_field_integer_delay() {
        let room = anechoic(343.0, 16000.0, 256);
        let h = simulate_ir(&room, &[5.0, 5.0, 5.0], &[6.715, 5.0, 5.0]);
        assert_eq!(argmax(&h), 80);
        let expected = 1.0 / (4.0 * PI * 1.715);
        assert!((h[80] - expected).abs() < 1e-12);
        // Symmetric kernel around an on-grid delay.
        for k in 1..=40 {
            assert!((h[80 - k] - h[80 + k]).abs() < 1e-10);
        }

        // Full-band kernel: every other tap hits a sinc zero.
        let mut full = room.clone();
        full.kernel_cutoff = 1.0;
        let h = simulate_ir(&full, &[5.0, 5.0, 5.0], &[6.715, 5.0, 5.0]);
        assert!(h.iter().enumerate().all(|(i, &v)| i == 80 || v.abs() < 1e-15));
    }

    #[test]
    fn kernel_passband_gain() {
        // DC gain of the band-limited kernel is close to 1 / cutoff.
        let room = anechoic(343.0, 16000.0, 256);
        let h = simulate_ir(&room, &[5.0, 5.0, 5.0], &[6.715, 5.0, 5.0]);
        let dc: f64 = h.iter().sum::<f64>() * 4.0 * PI * 1.715;
        assert!((dc - 1.0 / KERNEL_CUTOFF).abs() < 0.02, "{dc}");
        let mut bad = room.clone();
        bad.kernel_cutoff = 1.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn free_field_fractional_delay() {
        let room = anechoic(333.0, 16000.0, 256);
        let h = simulate_ir(&room, &[5.0, 5.0, 5.0], &[6.715, 5.0, 5.0]);
        let tau = 1.715 / 333.0 * 16000.0;
        assert!(tau > 82.0 && tau < 83.0);
        let p = argmax(&h);
        assert!(p == 82 || p == 83, "peak at {p}");
        assert!(h[82] > 0.0 && h[83] > 0.0);
    }

    #[test]
    fn first_order_image_count() {
        let mut room = anechoic(343.0, 8000.0, 64);
        room.rt60_s = 0.3;
        room.max_reflection_order = ReflectionOrder::Max(1);
        let imgs = image_sources(&room, &[2.0, 3.0, 4.0], &[5.0, 5.0, 5.0], 1, 1e9);
        assert_eq!(imgs.len(), 7);
        assert_eq!(imgs.iter().filter(|i| i.order == 0).count(), 1);
        assert_eq!(imgs.iter().filter(|i| i.order == 1).count(), 6);
    }

    #[test]
    fn auto_order_formula() {
        let p = desk_preset();
        let expect = (343.0 * 0.2 / 2.2f64).ceil() as u32 + 1;
        assert_eq!(p.room.reflection_order(), expect);
    }

    #[test]
    fn reciprocity() {
        let p = desk_preset();
        let mut room = p.room.clone();
        room.n_samples = 512;
        let a = [1.3, 2.1, 1.0];
        let b = [3.2, 0.7, 1.6];
        let h_ab = simulate_ir(&room, &a, &b);
        let h_ba = simulate_ir(&room, &b, &a);
        let scale = h_ab.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in h_ab.iter().zip(&h_ba) {
            assert!((x - y).abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn outside_positions_rejected() {
        let room = anechoic(343.0, 8000.0, 64);
        let err = simulate_zone(&room, &[[11.0, 1.0, 1.0]], &[[1.0, 1.0, 1.0]], Zone::Bright);
        assert!(matches!(err, Err(RoomError::SourceOutsideRoom { index: 0, .. })));
        let err = simulate_zone(&room, &[[1.0, 1.0, 1.0]], &[[1.0, 0.0, 1.0]], Zone::Dark);
        assert!(matches!(err, Err(RoomError::ReceiverOutsideRoom { index: 0, .. })));
    }

    #[test]
    fn presets_follow_table() {
        let p = paper_preset();
        assert_eq!(p.array.speaker_positions.len(), 16);
        assert_eq!(p.array.bright_mic_positions.len(), 37);
        assert_eq!(p.array.dark_mic_positions.len(), 37);
        assert_eq!(p.room.n_samples, 2967);
        assert_eq!(p.room.sample_rate_hz, 16000.0);
        assert_eq!(p.filter_len_j, 800);
        assert_eq!(p.virtual_source_index(), 8);

        let d = desk_preset();
        assert_eq!(d.array.speaker_positions.len(), 4);
        assert_eq!(d.array.bright_mic_positions.len(), 5);
        assert_eq!(d.room.n_samples, 1024);
        assert_eq!(d.room.sample_rate_hz, 8000.0);
        assert_eq!(d.virtual_source_index(), 2);

        for s in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let p = preset_for_scale(s);
            let l = p.array.speaker_positions.len();
            assert_eq!(p.virtual_source_index(), l.div_ceil(2));
            p.array.validate().unwrap();
            p.room.validate().unwrap();
            for pos in p.array.speaker_positions.iter().chain(&p.array.bright_mic_positions) {
                assert!(p.room.contains(pos));
            }
        }
    }

    #[test]
    fn hex_zone_spacing() {
        let pts = hex_zone([0.0, 0.0, 1.2], 0.09, 37);
        assert_eq!(pts.len(), 37);
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert!(distance(a, b) > 0.09 - 1e-12);
            }
        }
        let ring1 = &hex_zone([0.0, 0.0, 0.0], 0.09, 7)[1..];
        assert!(ring1.iter().all(|p| (distance(p, &[0.0; 3]) - 0.09).abs() < 1e-12));
    }

    #[test]
    fn doubling_speed_halves_delay() {
        let fs = 16000.0;
        let src = [5.0, 5.0, 5.0];
        let rcv = [7.3, 5.4, 5.0];
        let h1 = simulate_ir(&anechoic(300.0, fs, 512), &src, &rcv);
        let h2 = simulate_ir(&anechoic(600.0, fs, 512), &src, &rcv);
        let (p1, p2) = (argmax(&h1) as f64, argmax(&h2) as f64);
        assert!((p1 / 2.0 - p2).abs() <= 1.0, "{p1} {p2}");
    }
}
