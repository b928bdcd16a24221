//! Audio ingestion: container sniffing, decoding to mono float PCM and
//! resampling to the model rate.
//!
//! WAV is decoded in-tree. MP3 and FLAC are recognised by [`sniff_format`] but
//! decoded only when a plugin is registered in [`DecoderRegistry`]; without one
//! they fail with [`AudioError::UnsupportedEncoding`].

mod format;
mod resample;
mod wav;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use format::sniff_format;
pub use resample::{resample, KAISER_BETA, ZERO_CROSSINGS};
pub use wav::{decode_wav, encode_wav_f32, encode_wav_pcm16};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("unrecognized audio format")]
    UnrecognizedFormat,
    #[error("truncated header: {0}")]
    TruncatedHeader(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("corrupt stream: {0}")]
    CorruptStream(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("payload of {size} bytes exceeds the {limit} byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("audio lasts {seconds:.1} s, limit is {limit:.1} s")]
    TooLong { seconds: f64, limit: f64 },
    #[error("sample rate {0} Hz outside the supported range")]
    InvalidSampleRate(u32),
}

impl AudioError {
    /// Stable machine-readable name, used in API error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            AudioError::UnrecognizedFormat => "UnrecognizedFormat",
            AudioError::TruncatedHeader(_) => "TruncatedHeader",
            AudioError::UnsupportedEncoding(_) => "UnsupportedEncoding",
            AudioError::CorruptStream(_) => "CorruptStream",
            AudioError::EmptyAudio => "EmptyAudio",
            AudioError::PayloadTooLarge { .. } => "PayloadTooLarge",
            AudioError::TooLong { .. } => "TooLong",
            AudioError::InvalidSampleRate(_) => "InvalidSampleRate",
        }
    }
}

/// Mono float PCM. Samples are finite and lie in `[-1.0, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    /// Builds a buffer, clamping samples into `[-1, 1]`.
    ///
    /// Non-finite samples are rejected as [`AudioError::CorruptStream`].
    pub fn new(mut samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidSampleRate(0));
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        for s in samples.iter_mut() {
            if !s.is_finite() {
                return Err(AudioError::CorruptStream("non-finite sample".into()));
            }
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Little-endian float32 bytes, the wire encoding used by remote backends.
    pub fn to_f32_le_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    /// Hex SHA-256 over the sample rate and the float32 sample bytes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.sample_rate_hz.to_le_bytes());
        for s in &self.samples {
            h.update(s.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Container {
    Wav,
    Mp3,
    Flac,
}

impl Container {
    pub fn extension(self) -> &'static str {
        match self {
            Container::Wav => "wav",
            Container::Mp3 => "mp3",
            Container::Flac => "flac",
        }
    }
}

impl fmt::Display for Container {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Container::Wav => "WAV",
            Container::Mp3 => "MP3",
            Container::Flac => "FLAC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    /// Integer PCM, 8-bit unsigned or 16/24/32-bit signed.
    Pcm { bits: u16 },
    /// IEEE float PCM.
    Float { bits: u16 },
    ALaw,
    MuLaw,
    /// WAV format tag we do not recognise.
    WavTag(u16),
    Mpeg { layer: u8 },
    Flac { bits: Option<u16> },
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoding::Pcm { bits } => write!(f, "PCM{bits}"),
            Encoding::Float { bits } => write!(f, "FLOAT{bits}"),
            Encoding::ALaw => f.write_str("A-law"),
            Encoding::MuLaw => f.write_str("mu-law"),
            Encoding::WavTag(tag) => write!(f, "WAV format tag {tag:#06x}"),
            Encoding::Mpeg { layer } => write!(f, "MPEG layer {layer}"),
            Encoding::Flac { bits: Some(b) } => write!(f, "FLAC {b}-bit"),
            Encoding::Flac { bits: None } => f.write_str("FLAC"),
        }
    }
}

/// Container and header parameters as declared by the file itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioFormat {
    pub container: Container,
    pub declared_sample_rate_hz: Option<u32>,
    pub declared_channels: Option<u16>,
    pub encoding: Encoding,
}

/// External decoder for a container the crate does not decode natively.
pub trait AudioDecoder: Send + Sync {
    fn decode(&self, bytes: &[u8], format: &AudioFormat) -> Result<AudioBuffer, AudioError>;

    /// Whether [`AudioDecoder::decode`] may run on several threads at once.
    /// Unsafe decoders are serialized by the registry.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

struct RegisteredDecoder {
    decoder: Arc<dyn AudioDecoder>,
    serial: Option<Mutex<()>>,
}

/// Per-container decoder plugins. WAV always uses the built-in reader.
#[derive(Default)]
pub struct DecoderRegistry {
    plugins: HashMap<Container, RegisteredDecoder>,
}

impl DecoderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, container: Container, decoder: Arc<dyn AudioDecoder>) {
        let serial = (!decoder.concurrency_safe()).then(|| Mutex::new(()));
        self.plugins
            .insert(container, RegisteredDecoder { decoder, serial });
    }

    pub fn supports(&self, container: Container) -> bool {
        container == Container::Wav || self.plugins.contains_key(&container)
    }

    pub fn decode(&self, bytes: &[u8], format: &AudioFormat) -> Result<AudioBuffer, AudioError> {
        if format.container == Container::Wav {
            return decode_wav(bytes, format);
        }
        let Some(plugin) = self.plugins.get(&format.container) else {
            return Err(AudioError::UnsupportedEncoding(format!(
                "no decoder registered for {}",
                format.container
            )));
        };
        let _guard = plugin
            .serial
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        plugin.decoder.decode(bytes, format)
    }
}

impl fmt::Debug for DecoderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecoderRegistry")
            .field("plugins", &self.plugins.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Decodes `bytes` as described by `format`, using only the built-in decoders.
pub fn decode(bytes: &[u8], format: &AudioFormat) -> Result<AudioBuffer, AudioError> {
    DecoderRegistry::default().decode(bytes, format)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestLimits {
    pub max_payload_bytes: usize,
    pub max_duration_s: f64,
}

impl Default for IngestLimits {
    fn default() -> Self {
        Self {
            max_payload_bytes: 100 * 1024 * 1024,
            max_duration_s: 300.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub format: AudioFormat,
    pub source_rate_hz: u32,
    pub buffer: AudioBuffer,
}

/// Size check, sniff, decode, duration check and resample to `target_hz`.
pub fn ingest(
    bytes: &[u8],
    decoders: &DecoderRegistry,
    limits: &IngestLimits,
    target_hz: u32,
) -> Result<Ingested, AudioError> {
    if bytes.len() > limits.max_payload_bytes {
        return Err(AudioError::PayloadTooLarge {
            size: bytes.len(),
            limit: limits.max_payload_bytes,
        });
    }
    let format = sniff_format(bytes)?;
    let decoded = decoders.decode(bytes, &format)?;
    let seconds = decoded.duration_seconds();
    if seconds > limits.max_duration_s {
        return Err(AudioError::TooLong {
            seconds,
            limit: limits.max_duration_s,
        });
    }
    let source_rate_hz = decoded.sample_rate_hz();
    let buffer = resample(decoded, target_hz)?;
    Ok(Ingested {
        format,
        source_rate_hz,
        buffer,
    })
}
