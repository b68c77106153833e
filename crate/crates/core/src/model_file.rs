//! Versioned text model files.
//!
//! ```text
//! BOOSTFOREST
//! format_version 1
//! crc32 1a2b3c4d
//! payload_bytes 123456
//! {"task":...}
//! ```
//!
//! The payload is a compact JSON document holding the whole [`Forest`]
//! (task, base learner kind, preprocessing state and every tree as nested
//! records). Floats are written with 17 significant digits so a load
//! reproduces every coefficient bit for bit. The CRC32 covers the payload bytes.

use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forest::Forest;

pub const MAGIC: &str = "BOOSTFOREST";
pub const FORMAT_VERSION: u32 = 1;

/// JSON formatter that prints every float as `{:.16e}`.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

fn payload(forest: &Forest) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    forest
        .serialize(&mut ser)
        .map_err(|e| Error::Malformed(format!("cannot serialise model: {e}")))?;
    Ok(out)
}

/// Renders a forest as a model document.
pub fn to_string(forest: &Forest) -> Result<String> {
    let body = payload(forest)?;
    let crc = crc32fast::hash(&body);
    let mut s = format!(
        "{MAGIC}\nformat_version {FORMAT_VERSION}\ncrc32 {crc:08x}\npayload_bytes {}\n",
        body.len()
    );
    s.push_str(std::str::from_utf8(&body).expect("serde_json writes UTF-8"));
    s.push('\n');
    Ok(s)
}

fn header_field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Malformed(format!("expected header field {key:?}, found {line:?}")))
}

/// Parses a model document.
pub fn from_str(text: &str) -> Result<Forest> {
    from_bytes(text.as_bytes())
}

/// Parses a model document given as raw bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<Forest> {
    let magic = MAGIC.as_bytes();
    if !bytes.starts_with(magic) {
        return Err(if !bytes.is_empty() && magic.starts_with(bytes) {
            Error::Truncated
        } else {
            Error::UnrecognizedModel
        });
    }
    // Four header lines, then the payload.
    let mut rest = bytes;
    let mut lines = Vec::with_capacity(4);
    for _ in 0..4 {
        let i = rest.iter().position(|&b| b == b'\n').ok_or(Error::Truncated)?;
        let line = std::str::from_utf8(&rest[..i]).map_err(|_| Error::Malformed("non-text header".into()))?;
        lines.push(line);
        rest = &rest[i + 1..];
    }
    if lines[0] != MAGIC {
        return Err(Error::UnrecognizedModel);
    }
    let version = header_field(lines[1], "format_version")?;
    if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version.to_string(),
        });
    }
    let stored = u32::from_str_radix(header_field(lines[2], "crc32")?, 16)
        .map_err(|_| Error::Malformed("bad crc32 field".into()))?;
    let len: usize = header_field(lines[3], "payload_bytes")?
        .parse()
        .map_err(|_| Error::Malformed("bad payload_bytes field".into()))?;
    if rest.len() < len {
        return Err(Error::Truncated);
    }
    let body = &rest[..len];
    let computed = crc32fast::hash(body);
    if computed != stored {
        return Err(Error::Checksum { stored, computed });
    }
    let mut de = serde_json::Deserializer::from_slice(body);
    de.disable_recursion_limit();
    let forest: Forest = serde::Deserialize::deserialize(&mut de)
        .map_err(|e| Error::Malformed(format!("invalid model payload: {e}")))?;
    de.end()
        .map_err(|e| Error::Malformed(format!("invalid model payload: {e}")))?;
    Ok(forest)
}

pub fn save_model(forest: &Forest, path: &Path) -> Result<()> {
    let text = to_string(forest)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Forest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
