//! RIFF/WAVE reader and writer (little-endian, `fmt ` + `data` chunks).

use super::{AudioBuffer, AudioError, AudioFormat, Container, Encoding};

const TAG_PCM: u16 = 0x0001;
const TAG_FLOAT: u16 = 0x0003;
const TAG_ALAW: u16 = 0x0006;
const TAG_MULAW: u16 = 0x0007;
const TAG_EXTENSIBLE: u16 = 0xFFFE;

struct Chunk<'a> {
    id: [u8; 4],
    body: &'a [u8],
    /// Declared size exceeded the bytes available.
    truncated: bool,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn chunks(bytes: &[u8]) -> impl Iterator<Item = Chunk<'_>> {
    let mut pos = 12usize;
    std::iter::from_fn(move || {
        if pos + 8 > bytes.len() {
            return None;
        }
        let id = [bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]];
        let declared = le_u32(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start.saturating_add(declared);
        let truncated = end > bytes.len();
        let body = &bytes[start..end.min(bytes.len())];
        pos = end.saturating_add(declared & 1);
        Some(Chunk {
            id,
            body,
            truncated,
        })
    })
}

struct FmtChunk {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn read_fmt(bytes: &[u8]) -> Result<FmtChunk, AudioError> {
    let fmt = chunks(bytes)
        .find(|c| &c.id == b"fmt ")
        .ok_or_else(|| AudioError::TruncatedHeader("no fmt chunk".into()))?;
    let b = fmt.body;
    if b.len() < 16 {
        return Err(AudioError::TruncatedHeader("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = le_u16(b, 0);
    if tag == TAG_EXTENSIBLE {
        if b.len() < 40 {
            return Err(AudioError::TruncatedHeader("WAVE_FORMAT_EXTENSIBLE fmt chunk".into()));
        }
        // first two bytes of the sub-format GUID carry the format tag
        tag = le_u16(b, 24);
    }
    Ok(FmtChunk {
        tag,
        channels: le_u16(b, 2),
        sample_rate: le_u32(b, 4),
        block_align: le_u16(b, 12),
        bits: le_u16(b, 14),
    })
}

fn encoding_of(fmt: &FmtChunk) -> Encoding {
    match fmt.tag {
        TAG_PCM => Encoding::Pcm { bits: fmt.bits },
        TAG_FLOAT => Encoding::Float { bits: fmt.bits },
        TAG_ALAW => Encoding::ALaw,
        TAG_MULAW => Encoding::MuLaw,
        other => Encoding::WavTag(other),
    }
}

pub(super) fn sniff_wav(bytes: &[u8]) -> Result<AudioFormat, AudioError> {
    let fmt = read_fmt(bytes)?;
    Ok(AudioFormat {
        container: Container::Wav,
        declared_sample_rate_hz: Some(fmt.sample_rate),
        declared_channels: Some(fmt.channels),
        encoding: encoding_of(&fmt),
    })
}

fn sample_decoder(encoding: Encoding) -> Result<(usize, fn(&[u8]) -> f64), AudioError> {
    Ok(match encoding {
        Encoding::Pcm { bits: 8 } => (1, |b| (f64::from(b[0]) - 128.0) / 128.0),
        Encoding::Pcm { bits: 16 } => (2, |b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0),
        Encoding::Pcm { bits: 24 } => (3, |b| {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            f64::from(v) / 8_388_608.0
        }),
        Encoding::Pcm { bits: 32 } => (4, |b| {
            f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])) / 2_147_483_648.0
        }),
        Encoding::Float { bits: 32 } => (4, |b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))),
        Encoding::Float { bits: 64 } => (8, |b| {
            f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
        }),
        other => return Err(AudioError::UnsupportedEncoding(other.to_string())),
    })
}

/// Decodes WAV PCM to mono by averaging channels. The source rate is kept.
pub fn decode_wav(bytes: &[u8], format: &AudioFormat) -> Result<AudioBuffer, AudioError> {
    if format.container != Container::Wav {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} is not a WAV stream",
            format.container
        )));
    }
    let fmt = read_fmt(bytes)?;
    let (width, read) = sample_decoder(encoding_of(&fmt))?;
    let channels = usize::from(fmt.channels);
    if channels == 0 {
        return Err(AudioError::CorruptStream("zero channels".into()));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::CorruptStream("zero sample rate".into()));
    }
    let frame = width * channels;
    if usize::from(fmt.block_align) != frame {
        return Err(AudioError::CorruptStream(format!(
            "block align {} does not match {channels} x {width} bytes",
            fmt.block_align
        )));
    }
    let data = chunks(bytes)
        .find(|c| &c.id == b"data")
        .ok_or_else(|| AudioError::CorruptStream("no data chunk".into()))?;
    if data.truncated {
        tracing::debug!(available = data.body.len(), "data chunk shorter than declared");
    }

    let mut samples = Vec::with_capacity(data.body.len() / frame);
    for f in data.body.chunks_exact(frame) {
        let sum: f64 = f.chunks_exact(width).map(read).sum();
        let mean = sum / channels as f64;
        if !mean.is_finite() {
            return Err(AudioError::CorruptStream("non-finite float sample".into()));
        }
        samples.push(mean as f32);
    }
    AudioBuffer::new(samples, fmt.sample_rate)
}

fn write_header(out: &mut Vec<u8>, tag: u16, rate: u32, bits: u16, data_len: usize) {
    let block_align = bits / 8;
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
}

/// Mono PCM16 WAV. Samples are scaled by 32768 and saturated.
pub fn encode_wav_pcm16(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    write_header(&mut out, TAG_PCM, buf.sample_rate_hz(), 16, data_len);
    for &s in buf.samples() {
        let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Mono IEEE float32 WAV.
pub fn encode_wav_f32(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.len() * 4;
    let mut out = Vec::with_capacity(44 + data_len);
    write_header(&mut out, TAG_FLOAT, buf.sample_rate_hz(), 32, data_len);
    out.extend_from_slice(&buf.to_f32_le_bytes());
    out
}
