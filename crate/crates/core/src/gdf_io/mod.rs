//! File formats: a GDF 2.x subset (read, plus a small writer) and the native
//! recording bundle.

mod bundle;
mod gdf;

use thiserror::Error;

use crate::recording::RecordingError;

pub use bundle::{read_bundle, write_bundle, BundleMeta, BUNDLE_FORMAT, BUNDLE_VERSION, META_FILE, SIGNALS_FILE};
pub use gdf::{parse_gdf, read_gdf, write_gdf, GdfFile, GdfSampleType};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a GDF file")]
    BadMagic,
    #[error("unsupported GDF version {0:?}")]
    UnsupportedVersion(String),
    #[error("inconsistent GDF header: {0}")]
    HeaderInconsistent(String),
    #[error("file truncated: need {needed} bytes, have {available}")]
    TruncatedData { needed: u64, available: u64 },
    #[error("unsupported GDF sample type {0}")]
    UnsupportedType(u32),
    #[error("non-finite sample in channel {channel} at index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("bundle metadata: {0}")]
    SchemaMismatch(String),
    #[error("signals file holds {found} bytes, metadata implies {expected}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error(transparent)]
    Recording(#[from] RecordingError),
}
