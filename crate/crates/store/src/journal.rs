//! Line framing for the journal file.
//!
//! ```text
//! RETROSTORE 1
//! <16 hex digits of sha256(json)> <json array of entries>
//! ...
//! ```
//!
//! Every line is one atomic batch. A crash can only leave the last line
//! incomplete, which recovery detects by the missing newline or a checksum
//! mismatch and truncates away.

use sha2::{Digest, Sha256};

use crate::record::Entry;

pub const MAGIC: &str = "RETROSTORE";
pub const FORMAT_VERSION: u32 = 1;

pub fn header() -> String {
    format!("{MAGIC} {FORMAT_VERSION}\n")
}

fn checksum(json: &[u8]) -> String {
    hex::encode(&Sha256::digest(json)[..8])
}

pub fn encode(entries: &[Entry]) -> Vec<u8> {
    let json = serde_json::to_vec(entries).expect("journal entries always serialize");
    let mut line = checksum(&json).into_bytes();
    line.push(b' ');
    line.extend_from_slice(&json);
    line.push(b'\n');
    line
}

/// Decodes one line without its trailing newline. `None` means the line is
/// damaged.
pub fn decode(line: &[u8]) -> Option<Vec<Entry>> {
    if line.len() < 18 || line[16] != b' ' {
        return None;
    }
    let (sum, json) = (&line[..16], &line[17..]);
    if sum != checksum(json).as_bytes() {
        return None;
    }
    serde_json::from_slice(json).ok()
}

#[derive(Debug)]
pub enum Header {
    /// Empty file, or a torn header from a crash during creation.
    Missing,
    Valid { len: usize },
    Unsupported(String),
    BadMagic,
}

pub fn read_header(bytes: &[u8]) -> Header {
    let expected = header();
    if bytes.len() < expected.len() && expected.as_bytes().starts_with(bytes) {
        return Header::Missing;
    }
    let Some(end) = bytes.iter().position(|&b| b == b'\n') else {
        return Header::BadMagic;
    };
    let line = String::from_utf8_lossy(&bytes[..end]);
    match line.split_once(' ') {
        Some((MAGIC, v)) if v == FORMAT_VERSION.to_string() => Header::Valid { len: end + 1 },
        Some((MAGIC, v)) => Header::Unsupported(v.to_string()),
        _ => Header::BadMagic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Kind;
    use serde_json::json;

    #[test]
    fn roundtrip_and_damage() {
        let entries = vec![Entry {
            kind: Kind::Board,
            id: "b1".into(),
            version: 3,
            schema_version: 1,
            value: Some(json!({"x": 1})),
        }];
        let line = encode(&entries);
        assert_eq!(*line.last().unwrap(), b'\n');
        let body = &line[..line.len() - 1];
        assert_eq!(decode(body).unwrap(), entries);
        for cut in 0..body.len() {
            assert!(decode(&body[..cut]).is_none(), "prefix of {cut} bytes decoded");
        }
        let mut flipped = body.to_vec();
        flipped[20] ^= 1;
        assert!(decode(&flipped).is_none());
    }

    #[test]
    fn header_states() {
        assert!(matches!(read_header(b""), Header::Missing));
        assert!(matches!(read_header(b"RETRO"), Header::Missing));
        assert!(matches!(read_header(b"RETROSTORE 1\n"), Header::Valid { len: 13 }));
        assert!(matches!(read_header(b"RETROSTORE 2\n"), Header::Unsupported(_)));
        assert!(matches!(read_header(b"SQLite format 3\0"), Header::BadMagic));
    }
}
