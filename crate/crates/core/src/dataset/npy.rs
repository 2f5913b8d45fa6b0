//! Minimal NPY (version 1.0) container for dense little-endian `f64` arrays.
//!
//! Layout: the magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16`
//! header length, then an ASCII dict
//! `{'descr': '<f8', 'fortran_order': False, 'shape': (...), }` padded with
//! spaces and terminated by `\n` so the payload starts on a 64-byte boundary.
//! The reader also accepts version 2.0/3.0 headers (`u32` length).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                expected,
                actual: data.len(),
            });
        }
        Ok(NpyArray { shape, data })
    }
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        _ => {
            let parts: Vec<String> = shape.iter().map(|n| n.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    }
}

/// Serializes an array to NPY bytes.
pub fn encode(shape: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Dimension {
            expected,
            actual: data.len(),
        });
    }
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': {}, }}",
        shape_literal(shape)
    );
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');
    let header_len = u16::try_from(header.len()).map_err(|_| Error::Format {
        offset: 8,
        reason: "header too long for NPY 1.0".into(),
    })?;

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

/// Parses NPY bytes holding a C-ordered `<f8` array.
pub fn decode(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(format_err(0, "missing \\x93NUMPY magic"));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_start, header_len) = match major {
        1 => (10, u16::from_le_bytes([bytes[8], bytes[9]]) as usize),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(format_err(8, "truncated header length"));
            }
            (12, u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize)
        }
        _ => return Err(format_err(6, format!("unsupported version {major}.{minor}"))),
    };
    if minor != 0 {
        return Err(format_err(7, format!("unsupported version {major}.{minor}")));
    }
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(format_err(header_start, "header extends past end of file"));
    }
    let header = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|_| format_err(header_start, "header is not valid text"))?;
    if !header.ends_with('\n') {
        return Err(format_err(data_start - 1, "header must end with a newline"));
    }
    let dict = parse_dict(header).map_err(|(pos, msg)| format_err(header_start + pos, msg))?;

    match dict.descr.as_str() {
        "<f8" | "<d" => {}
        other => {
            return Err(format_err(header_start, format!("unsupported dtype '{other}', expected '<f8'")))
        }
    }
    if dict.fortran_order {
        return Err(format_err(header_start, "fortran_order arrays are not supported"));
    }
    let count: usize = dict.shape.iter().product();
    let payload = &bytes[data_start..];
    if payload.len() != 8 * count {
        return Err(format_err(
            data_start,
            format!("payload has {} bytes, shape {:?} needs {}", payload.len(), dict.shape, 8 * count),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(NpyArray {
        shape: dict.shape,
        data,
    })
}

struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> ParseResult<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err((self.pos, format!("expected '{}'", c as char)))
        }
    }

    fn string(&mut self) -> ParseResult<&'a str> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err((self.pos, "expected quoted string".into())),
        };
        let start = self.pos + 1;
        let end = self.text[start..]
            .bytes()
            .position(|b| b == quote)
            .map(|p| start + p)
            .ok_or((start, "unterminated string".to_string()))?;
        self.pos = end + 1;
        Ok(&self.text[start..end])
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn shape(&mut self) -> ParseResult<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(dims);
            }
            let at = self.pos;
            let w = self.word();
            let n = w
                .parse::<usize>()
                .map_err(|_| (at, format!("invalid dimension '{w}'")))?;
            dims.push(n);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {}
                _ => return Err((self.pos, "expected ',' or ')' in shape".into())),
            }
        }
    }
}

fn parse_dict(text: &str) -> ParseResult<HeaderDict> {
    let mut cur = Cursor { text, pos: 0 };
    cur.expect(b'{')?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        if cur.peek() == Some(b'}') {
            break;
        }
        let key_at = cur.pos;
        let key = cur.string()?;
        cur.expect(b':')?;
        match key {
            "descr" => descr = Some(cur.string()?.to_string()),
            "fortran_order" => {
                let at = cur.pos;
                fortran = Some(match cur.word() {
                    "True" => true,
                    "False" => false,
                    other => return Err((at, format!("invalid fortran_order '{other}'"))),
                });
            }
            "shape" => shape = Some(cur.shape()?),
            other => return Err((key_at, format!("unexpected key '{other}'"))),
        }
        match cur.peek() {
            Some(b',') => cur.pos += 1,
            Some(b'}') => {}
            _ => return Err((cur.pos, "expected ',' or '}'".into())),
        }
    }
    Ok(HeaderDict {
        descr: descr.ok_or((0, "missing 'descr'".to_string()))?,
        fortran_order: fortran.ok_or((0, "missing 'fortran_order'".to_string()))?,
        shape: shape.ok_or((0, "missing 'shape'".to_string()))?,
    })
}

pub fn save_array(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    let bytes = encode(shape, data)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_array(path: &Path) -> Result<NpyArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&[2, 3], &[0.0; 6]).unwrap();
        assert_eq!(&bytes[..8], b"\x93NUMPY\x01\x00");
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        let header = std::str::from_utf8(&bytes[10..10 + hlen]).unwrap();
        assert!(header.starts_with("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }"));
        assert!(header.ends_with(" \n"));
        assert_eq!(bytes.len(), 10 + hlen + 48);
    }

    #[test]
    fn shapes_render_like_python_tuples() {
        assert_eq!(shape_literal(&[]), "()");
        assert_eq!(shape_literal(&[5]), "(5,)");
        assert_eq!(shape_literal(&[2, 64, 64]), "(2, 64, 64)");
    }

    #[test]
    fn round_trip_2x3() {
        let data = [1.5, -2.25, f64::MIN_POSITIVE, 1e300, -0.0, 3.0];
        let back = decode(&encode(&[2, 3], &data).unwrap()).unwrap();
        assert_eq!(back.shape, vec![2, 3]);
        for (a, b) in back.data.iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn scalar_round_trip() {
        let back = decode(&encode(&[], &[42.0]).unwrap()).unwrap();
        assert!(back.shape.is_empty());
        assert_eq!(back.data, vec![42.0]);
    }

    #[test]
    fn malformed_inputs() {
        let good = encode(&[4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bad = good.clone();
        bad[1] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(decode(truncated), Err(Error::Format { .. })));

        let text = String::from_utf8_lossy(&good).replace("'<f8'", "'<f4'");
        assert!(decode(text.as_bytes()).is_err());

        let mut version = good.clone();
        version[6] = 9;
        assert!(matches!(decode(&version), Err(Error::Format { offset: 6, .. })));

        assert!(encode(&[3], &[1.0]).is_err());
    }

    #[test]
    fn parses_python_style_header_without_trailing_comma() {
        let header = "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 2)}";
        let mut h = header.to_string();
        let pad = (64 - (10 + h.len() + 1) % 64) % 64;
        h.extend(std::iter::repeat_n(' ', pad));
        h.push('\n');
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&[1, 0]);
        bytes.extend_from_slice(&(h.len() as u16).to_le_bytes());
        bytes.extend_from_slice(h.as_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        bytes.extend_from_slice(&2.0f64.to_le_bytes());
        let arr = decode(&bytes).unwrap();
        assert_eq!(arr.shape, vec![1, 2]);
        assert_eq!(arr.data, vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn round_trip_preserves_bits(rows in 0usize..5, cols in 1usize..7, seed in any::<u64>()) {
            use rand::{RngExt, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1e6..1e6)).collect();
            let bytes = encode(&[rows, cols], &data).unwrap();
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(back.shape, vec![rows, cols]);
            prop_assert_eq!(back.data, data);
        }
    }
}
