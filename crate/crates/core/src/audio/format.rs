use super::wav::sniff_wav;
use super::{AudioError, AudioFormat, Container, Encoding};

/// Identifies the container from its magic bytes.
///
/// WAV headers are parsed fully. FLAC reports its STREAMINFO parameters, MP3
/// the parameters of the first frame header when one is present in `bytes`.
pub fn sniff_format(bytes: &[u8]) -> Result<AudioFormat, AudioError> {
    if bytes.starts_with(b"RIFF") {
        if bytes.len() < 12 {
            return Err(AudioError::TruncatedHeader("RIFF header".into()));
        }
        if &bytes[8..12] != b"WAVE" {
            return Err(AudioError::UnrecognizedFormat);
        }
        return sniff_wav(bytes);
    }
    if bytes.starts_with(b"fLaC") {
        return sniff_flac(bytes);
    }
    if bytes.starts_with(b"ID3") {
        return sniff_id3(bytes);
    }
    if let Some(frame) = mpeg_frame(bytes) {
        return Ok(frame);
    }
    Err(AudioError::UnrecognizedFormat)
}

fn sniff_flac(bytes: &[u8]) -> Result<AudioFormat, AudioError> {
    // "fLaC", 4-byte metadata block header, 34-byte STREAMINFO
    if bytes.len() < 8 + 18 {
        return Err(AudioError::TruncatedHeader("FLAC STREAMINFO".into()));
    }
    if bytes[4] & 0x7F != 0 {
        return Err(AudioError::CorruptStream("first FLAC metadata block is not STREAMINFO".into()));
    }
    let d = &bytes[8..];
    let rate = (u32::from(d[10]) << 12) | (u32::from(d[11]) << 4) | (u32::from(d[12]) >> 4);
    let channels = u16::from((d[12] >> 1) & 0x07) + 1;
    let bits = u16::from(((d[12] & 0x01) << 4) | (d[13] >> 4)) + 1;
    Ok(AudioFormat {
        container: Container::Flac,
        declared_sample_rate_hz: (rate > 0).then_some(rate),
        declared_channels: Some(channels),
        encoding: Encoding::Flac { bits: Some(bits) },
    })
}

fn sniff_id3(bytes: &[u8]) -> Result<AudioFormat, AudioError> {
    if bytes.len() < 10 {
        return Err(AudioError::TruncatedHeader("ID3v2 tag header".into()));
    }
    // synchsafe tag size, excluding the 10-byte header
    let size = bytes[6..10]
        .iter()
        .fold(0usize, |acc, &b| (acc << 7) | usize::from(b & 0x7F));
    let footer = if bytes[5] & 0x10 != 0 { 10 } else { 0 };
    let audio = bytes.get(10 + size + footer..).unwrap_or(&[]);
    Ok(mpeg_frame(audio).unwrap_or(AudioFormat {
        container: Container::Mp3,
        declared_sample_rate_hz: None,
        declared_channels: None,
        encoding: Encoding::Mpeg { layer: 3 },
    }))
}

fn mpeg_frame(b: &[u8]) -> Option<AudioFormat> {
    if b.len() < 4 || b[0] != 0xFF || b[1] & 0xE0 != 0xE0 {
        return None;
    }
    let version = (b[1] >> 3) & 0x03;
    let layer = match (b[1] >> 1) & 0x03 {
        0b01 => 3,
        0b10 => 2,
        0b11 => 1,
        _ => return None,
    };
    let base = match (b[2] >> 2) & 0x03 {
        0 => 44_100,
        1 => 48_000,
        2 => 32_000,
        _ => return None,
    };
    let rate = match version {
        0b11 => base,
        0b10 => base / 2,
        0b00 => base / 4,
        _ => return None,
    };
    if b[2] >> 4 == 0x0F {
        return None;
    }
    let channels = if b[3] >> 6 == 0b11 { 1 } else { 2 };
    Some(AudioFormat {
        container: Container::Mp3,
        declared_sample_rate_hz: Some(rate),
        declared_channels: Some(channels),
        encoding: Encoding::Mpeg { layer },
    })
}
