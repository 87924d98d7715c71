use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("IoError: {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic in {0} file")]
    BadMagic(&'static str),
    #[error("unsupported {kind} version {version}")]
    UnsupportedVersion { kind: &'static str, version: u16 },
    #[error("truncated {0} file")]
    Truncated(&'static str),
    #[error("malformed {kind}: {reason}")]
    Malformed { kind: &'static str, reason: String },
    #[error("block {index}: {reason}")]
    BadBlockLine { index: usize, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl FormatError {
    pub(crate) fn malformed(kind: &'static str, reason: impl Into<String>) -> Self {
        FormatError::Malformed { kind, reason: reason.into() }
    }
}

pub(crate) fn read(path: &std::path::Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write(path: &std::path::Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    kind: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], kind: &'static str) -> Self {
        Reader { buf, kind }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() < n {
            return Err(FormatError::Truncated(self.kind));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn rest(self) -> &'a [u8] {
        self.buf
    }
}
