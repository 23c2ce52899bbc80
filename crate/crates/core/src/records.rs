//! File formats: the binary sample-set container, line-oriented text
//! records, and content fingerprints.
//!
//! Text records are one line each: a tag followed by `key=value` pairs.
//! Floats print in Rust's shortest round-trip form, so writing and
//! re-parsing a record is bit-exact. Binary layout of a sample-set file
//! (all integers little-endian):
//!
//! ```text
//! magic  b"PRSS"
//! u32    version (currently 1)
//! u32    prng name length, then that many bytes (utf-8)
//! u32    ensemble descriptor length, then that many bytes (utf-8)
//! u64    seed
//! u64    m
//! u64    n
//! f64*mn measurement matrix, row-major
//! f64*m  intensities y
//! f64*m  noise w
//! ```

use crate::ensemble::{Ensemble, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::PRNG_NAME;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

pub const SAMPLESET_MAGIC: &[u8; 4] = b"PRSS";
pub const SAMPLESET_VERSION: u32 = 1;

/// Hex content fingerprint (first 12 hex digits of sha-256).
pub fn fingerprint(content: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(content.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(12);
    for byte in digest.iter().take(6) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn write_sampleset(mut w: impl Write, s: &SampleSet) -> Result<()> {
    w.write_all(SAMPLESET_MAGIC)?;
    w.write_all(&SAMPLESET_VERSION.to_le_bytes())?;
    let write_str = |w: &mut dyn Write, text: &str| -> Result<()> {
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        Ok(())
    };
    write_str(&mut w, PRNG_NAME)?;
    write_str(&mut w, &s.ensemble.descriptor())?;
    w.write_all(&s.seed.to_le_bytes())?;
    w.write_all(&(s.m() as u64).to_le_bytes())?;
    w.write_all(&(s.n() as u64).to_le_bytes())?;
    for &v in s.a.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &s.y {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &s.w {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct OffsetReader<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> OffsetReader<R> {
    fn take(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        self.inner.read_exact(buf).map_err(|_| Error::Malformed {
            offset: at,
            what: format!("truncated while reading {what} ({} bytes)", buf.len()),
        })?;
        self.offset += buf.len();
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut b = [0u8; 8];
        for _ in 0..count {
            self.take(&mut b, what)?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let at = self.offset;
        let len = self.u32(what)? as usize;
        if len > 1 << 20 {
            return Err(Error::Malformed {
                offset: at,
                what: format!("{what} length {len} is implausible"),
            });
        }
        let mut buf = vec![0u8; len];
        self.take(&mut buf, what)?;
        String::from_utf8(buf).map_err(|_| Error::Malformed {
            offset: at,
            what: format!("{what} is not utf-8"),
        })
    }
}

pub fn read_sampleset(r: impl Read) -> Result<SampleSet> {
    let mut r = OffsetReader {
        inner: r,
        offset: 0,
    };
    let mut magic = [0u8; 4];
    r.take(&mut magic, "magic")?;
    if &magic != SAMPLESET_MAGIC {
        return Err(Error::Malformed {
            offset: 0,
            what: format!("bad magic {magic:?}, expected {SAMPLESET_MAGIC:?}"),
        });
    }
    let version = r.u32("version")?;
    if version != SAMPLESET_VERSION {
        return Err(Error::Version {
            expected: SAMPLESET_VERSION,
            got: version,
        });
    }
    let prng = r.string("prng name")?;
    if prng != PRNG_NAME {
        return Err(Error::Malformed {
            offset: 8,
            what: format!("file was produced with prng {prng:?}, this build pins {PRNG_NAME:?}"),
        });
    }
    let descriptor_at = r.offset;
    let descriptor = r.string("ensemble descriptor")?;
    let ensemble = Ensemble::parse_descriptor(&descriptor).map_err(|e| Error::Malformed {
        offset: descriptor_at,
        what: e.to_string(),
    })?;
    let seed = r.u64("seed")?;
    let m = r.u64("m")? as usize;
    let n = r.u64("n")? as usize;
    if m == 0 || n == 0 || m.checked_mul(n).is_none_or(|x| x > 1 << 28) {
        return Err(Error::Malformed {
            offset: r.offset,
            what: format!("implausible dimensions {m} x {n}"),
        });
    }
    let data = r.f64s(m * n, "measurement matrix")?;
    let y = r.f64s(m, "intensities")?;
    let w = r.f64s(m, "noise")?;
    let mut a = Mat::zeros(m, n);
    a.data_mut().copy_from_slice(&data);
    Ok(SampleSet {
        a,
        y,
        w,
        seed,
        ensemble,
    })
}

/// One line of a structured text report: a tag plus ordered key=value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub tag: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new(tag: &str) -> Self {
        Record {
            tag: tag.to_string(),
            fields: Vec::new(),
        }
    }

    pub fn push(mut self, key: &str, value: impl RecordValue) -> Self {
        debug_assert!(!key.contains(['=', ' ']), "bad record key {key}");
        self.fields.push((key.to_string(), value.render()));
        self
    }

    pub fn to_line(&self) -> String {
        let mut line = self.tag.clone();
        for (k, v) in &self.fields {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        line
    }

    pub fn parse(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let tag = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty record line".into()))?
            .to_string();
        let mut fields = Vec::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("record field {part:?} is not key=value"))
            })?;
            fields.push((k.to_string(), v.to_string()));
        }
        Ok(Record { tag, fields })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing field {key}")))?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("field {key} is not a float")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing field {key}")))?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("field {key} is not an integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(Error::InvalidConfig(format!(
                "field {key} is not a bool: {other:?}"
            ))),
            None => Err(Error::InvalidConfig(format!("missing field {key}"))),
        }
    }
}

/// Values renderable into a record; floats use the shortest round-trip form.
pub trait RecordValue {
    fn render(&self) -> String;
}

impl RecordValue for f64 {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl RecordValue for usize {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl RecordValue for u64 {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl RecordValue for bool {
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl RecordValue for &str {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl RecordValue for &String {
    fn render(&self) -> String {
        (*self).clone()
    }
}
