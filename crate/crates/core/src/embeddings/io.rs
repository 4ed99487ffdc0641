//! Embedding table files.
//!
//! Binary layout (little-endian), the canonical form:
//!
//! ```text
//! "LEMB1\0"  u32 C  u32 count  { u16 len, label bytes (UTF-8), C x f32 }*
//! ```
//!
//! The text form has one record per line: the label followed by `C` decimal
//! floats, whitespace separated. Labels may contain inner spaces; the
//! trailing `C` tokens are always the vector.

use std::fmt::Write as _;
use std::path::Path;

use crate::embeddings::table::EmbeddingTable;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"LEMB1\0";

pub fn encode_binary(table: &EmbeddingTable) -> Result<Vec<u8>> {
    if table.is_empty() {
        return Err(Error::Format("embedding table needs at least one entry".into()));
    }
    let c = table.dimension();
    let mut out = Vec::with_capacity(14 + table.len() * (2 + 16 + 4 * c));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (label, v) in table.iter() {
        out.extend_from_slice(&(label.len() as u16).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::Truncated("embedding table"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<EmbeddingTable> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::BadMagic {
            what: "embedding table",
            expected: "LEMB1\\0".into(),
        });
    }
    let c = r.u32()? as usize;
    let count = r.u32()? as usize;
    if c == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let mut table = EmbeddingTable::new(c)?;
    for _ in 0..count {
        let len = r.u16()? as usize;
        let label = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Format(format!("label is not UTF-8: {e}")))?
            .to_string();
        let raw = r.take(4 * c)?;
        let v = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if table.contains(&label) {
            return Err(Error::Format(format!("duplicate label `{label}`")));
        }
        table.insert(label, v)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after {count} entries",
            bytes.len() - r.pos
        )));
    }
    if table.is_empty() {
        return Err(Error::Format("embedding table has no entries".into()));
    }
    Ok(table)
}

pub fn encode_text(table: &EmbeddingTable) -> Result<String> {
    if table.is_empty() {
        return Err(Error::Format("embedding table needs at least one entry".into()));
    }
    let mut out = String::new();
    for (label, v) in table.iter() {
        if label.contains(['\n', '\r']) || label.trim() != label {
            return Err(Error::Format(format!("label `{label}` cannot be written as text")));
        }
        out.push_str(label);
        for x in v {
            write!(out, " {x}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses the text form. `C` is the length of the trailing float run on the
/// first record; later records must agree.
pub fn decode_text(text: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let dim = match &table {
            Some(t) => t.dimension(),
            None => tokens
                .iter()
                .rev()
                .take_while(|t| t.parse::<f32>().is_ok())
                .count()
                .min(tokens.len() - 1),
        };
        if dim == 0 || tokens.len() <= dim {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                found: tokens.len().saturating_sub(1),
            });
        }
        let split = tokens.len() - dim;
        let label = tokens[..split].join(" ");
        let v = tokens[split..]
            .iter()
            .map(|t| t.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                Error::Format(format!(
                    "line {}: `{label}` expects {dim} floats",
                    lineno + 1
                ))
            })?;
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(dim)?),
        };
        if t.contains(&label) {
            return Err(Error::Format(format!("line {}: duplicate label `{label}`", lineno + 1)));
        }
        t.insert(label, v)?;
    }
    table.ok_or_else(|| Error::Format("embedding text file has no records".into()))
}

pub fn save_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_binary(table)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_binary(&bytes)
}

/// Like [`load_table`] but rejects tables of another dimension.
pub fn load_table_with_dimension(path: impl AsRef<Path>, dimension: usize) -> Result<EmbeddingTable> {
    let table = load_table_auto(path)?;
    if table.dimension() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: table.dimension(),
        });
    }
    Ok(table)
}

pub fn save_table_text(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_text(table)?).map_err(|e| Error::io(path, e))
}

pub fn load_table_text(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_text(&text)
}

/// Text form for `.txt` files, binary otherwise.
pub fn load_table_auto(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "txt") {
        load_table_text(path)
    } else {
        load_table(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{synth_vocab, SyntheticVocabulary};

    fn sample() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3).unwrap();
        t.insert("cat", vec![0.1, -2.5e-8, 3.0]).unwrap();
        t.insert("potted plant", vec![f32::MIN_POSITIVE, 1.0 / 3.0, -0.0]).unwrap();
        t
    }

    #[test]
    fn binary_and_text_round_trip_bit_exact() {
        let t = sample();
        let back = decode_binary(&encode_binary(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let back = decode_text(&encode_text(&t).unwrap()).unwrap();
        for ((la, va), (lb, vb)) in t.iter().zip(back.iter()) {
            assert_eq!(la, lb);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(va), bits(vb));
        }
    }

    #[test]
    fn empty_table_cannot_be_saved() {
        let t = EmbeddingTable::new(4).unwrap();
        assert!(matches!(encode_binary(&t), Err(Error::Format(_))));
    }

    #[test]
    fn corrupt_header_is_magic_error() {
        let mut bytes = encode_binary(&sample()).unwrap();
        bytes[2] ^= 0xff;
        assert!(matches!(decode_binary(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncation_and_dimension_errors_are_distinct() {
        let bytes = encode_binary(&sample()).unwrap();
        assert!(matches!(decode_binary(&bytes[..bytes.len() - 1]), Err(Error::Truncated(_))));
        assert!(matches!(decode_binary(&bytes[..4]), Err(Error::Truncated(_))));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.lemb");
        save_table(&sample(), &path).unwrap();
        assert!(matches!(
            load_table_with_dimension(&path, 4),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(matches!(
            decode_text("a 1 2 3\nb 1 2\n"),
            Err(Error::DimensionMismatch { .. }) | Err(Error::Format(_))
        ));
    }

    #[test]
    fn clip_sized_table_loads_with_dimension_512() {
        let spec = SyntheticVocabulary::roots(["dog", "cat", "other"], 512, 3);
        let t = synth_vocab(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.lemb");
        save_table(&t, &path).unwrap();
        let back = load_table(&path).unwrap();
        assert_eq!(back.dimension(), 512);
        assert_eq!(back, t);
    }
}
