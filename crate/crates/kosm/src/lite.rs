//! Reading and writing `.kosm` bundles over byte streams.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use kosm_core::bundle::{self, LiteError, ModelBundle};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] LiteError),
}

/// Creation time stamped into an exported bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timestamp {
    Now,
    /// Seconds since the Unix epoch; makes exports byte-reproducible.
    Fixed(u64),
}

impl Timestamp {
    pub fn unix(self) -> u64 {
        match self {
            Timestamp::Fixed(t) => t,
            Timestamp::Now => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Writes the bundle and returns the number of bytes written.
pub fn export_lite<W: Write>(bundle: &ModelBundle, mut sink: W) -> io::Result<usize> {
    let bytes = bundle::encode(bundle);
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(bytes.len())
}

pub fn load_lite<R: Read>(mut source: R) -> Result<ModelBundle, LoadError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    Ok(bundle::decode(&bytes)?)
}

pub fn save(bundle: &ModelBundle, path: &Path) -> io::Result<usize> {
    export_lite(bundle, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<ModelBundle, LoadError> {
    load_lite(File::open(path)?)
}
