pub mod api;
pub mod arabic_text;
pub mod asr;
pub mod audio;
pub mod dialect;
pub mod did;
pub mod evaluation;
pub mod feedback;
pub mod remote;
pub mod routing;

pub use dialect::{DialectLabel, DialectSelection, DialectUsed};
pub use routing::CANONICAL_SAMPLE_RATE_HZ;
