//! Band-limited resampling with a Kaiser-windowed sinc kernel.
//!
//! The conversion ratio is reduced to `up/down`; output sample `n` sits at
//! input position `n * down / up`, so the kernel only has `up` distinct
//! fractional phases. Those are tabulated when the table is small enough and
//! computed per sample otherwise.

use std::f64::consts::PI;

use super::{AudioBuffer, AudioError};

pub const KAISER_BETA: f64 = 8.6;
/// Sinc zero crossings on each side of the kernel centre.
pub const ZERO_CROSSINGS: usize = 32;

pub const MIN_RATE_HZ: u32 = 8_000;
pub const MAX_RATE_HZ: u32 = 192_000;

const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = (x / 2.0) * (x / 2.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    i0_beta: f64,
    /// Input offsets `first_tap..first_tap + taps` around the integer position.
    first_tap: i64,
    taps: usize,
}

impl Kernel {
    fn new(up: u64, down: u64) -> Self {
        let cutoff = (up as f64 / down as f64).min(1.0);
        let half_width = ZERO_CROSSINGS as f64 / cutoff;
        let reach = half_width.ceil() as i64;
        Self {
            cutoff,
            half_width,
            i0_beta: bessel_i0(KAISER_BETA),
            first_tap: -reach,
            taps: (2 * reach + 2) as usize,
        }
    }

    fn weight(&self, x: f64) -> f64 {
        let r = x / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        self.cutoff * sinc(self.cutoff * x) * window
    }

    fn fill(&self, frac: f64, out: &mut [f64]) {
        for (j, w) in out.iter_mut().enumerate() {
            let offset = self.first_tap + j as i64;
            *w = self.weight(offset as f64 - frac);
        }
    }
}

/// Converts `buf` to `target_hz`.
///
/// Matching rates return the buffer unchanged. Otherwise the output holds
/// `round(len * target / source)` samples, clamped to `[-1, 1]`.
pub fn resample(buf: AudioBuffer, target_hz: u32) -> Result<AudioBuffer, AudioError> {
    if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&target_hz) {
        return Err(AudioError::InvalidSampleRate(target_hz));
    }
    let source_hz = buf.sample_rate_hz();
    if source_hz == target_hz {
        return Ok(buf);
    }

    let g = gcd(u64::from(source_hz), u64::from(target_hz));
    let up = u64::from(target_hz) / g;
    let down = u64::from(source_hz) / g;
    let input = buf.samples();
    let len = input.len() as u64;
    let out_len = ((2 * len * up + down) / (2 * down)) as usize;

    let kernel = Kernel::new(up, down);
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| {
                let mut w = vec![0.0; kernel.taps];
                kernel.fill(p as f64 / up as f64, &mut w);
                w
            })
            .collect()
    });
    let mut scratch = vec![0.0; kernel.taps];

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let weights: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                kernel.fill(phase as f64 / up as f64, &mut scratch);
                &scratch
            }
        };
        let start = base + kernel.first_tap;
        let mut acc = 0.0;
        for (j, w) in weights.iter().enumerate() {
            let i = start + j as i64;
            if i >= 0 && (i as u64) < len {
                acc += w * f64::from(input[i as usize]);
            }
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    if out.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    AudioBuffer::new(out, target_hz)
}
