//! The certification cache: per-input state of `f` that incremental
//! recertification replays.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "IRSC"            4 bytes magic
//! version           u16
//! header_len        u32, then header_len bytes of JSON
//! per record:
//!   meta_len        u32, then meta_len bytes of JSON
//!   seeds           samples × u64
//!   predictions     samples × u16
//! checksum          u64 FNV-1a over every preceding byte
//! ```
//!
//! `samples` comes from the record metadata: `n` for certified records and
//! zero for abstained ones.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassIndex;
use crate::error::{Error, Result};
use crate::noise::SeedList;

pub const MAGIC: &[u8; 4] = b"IRSC";
pub const FORMAT_VERSION: u16 = 1;
pub const DIGEST_ALGORITHM: &str = "fnv1a64-f64le";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes
        .into_iter()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Content hash of an input vector, over its little-endian f64 bytes.
pub fn input_digest(x: &[f64]) -> u64 {
    fnv1a(x.iter().flat_map(|v| v.to_le_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub input_id: String,
    pub input_digest: u64,
    pub top_class: ClassIndex,
    /// `None` marks an abstained certification; such records hold no samples.
    pub p_lower: Option<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub n: usize,
    pub seeds: SeedList,
    pub predictions: Vec<ClassIndex>,
    pub generator_id: String,
}

impl CacheRecord {
    pub fn abstained(
        input_id: String,
        input_digest: u64,
        top_class: ClassIndex,
        sigma: f64,
        alpha: f64,
        n: usize,
    ) -> Self {
        Self {
            input_id,
            input_digest,
            top_class,
            p_lower: None,
            sigma,
            alpha,
            n,
            seeds: SeedList::default(),
            predictions: Vec::new(),
            generator_id: crate::noise::GENERATOR_ID.to_owned(),
        }
    }

    pub fn is_abstained(&self) -> bool {
        self.p_lower.is_none()
    }

    fn sample_count(&self) -> usize {
        if self.is_abstained() {
            0
        } else {
            self.n
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::CacheValidation(format!("record `{}`: {msg}", self.input_id)));
        if self.seeds.len() != self.predictions.len() {
            return bad(format!(
                "{} seeds but {} predictions",
                self.seeds.len(),
                self.predictions.len()
            ));
        }
        if self.seeds.len() != self.sample_count() {
            return bad(format!(
                "{} samples stored, expected {}",
                self.seeds.len(),
                self.sample_count()
            ));
        }
        if let Some(p) = self.p_lower {
            if !(p > 0.5 && p <= 1.0) {
                return bad(format!("p_lower {p} outside (1/2, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub generator_id: String,
    pub digest_algorithm: String,
    pub sigma: f64,
    pub alpha: f64,
    pub n: usize,
    /// Identity of the classifier `f` the records describe.
    pub classifier: String,
    /// Seconds since the Unix epoch. Supplied by the caller so that
    /// reproducible runs produce identical bytes.
    pub created_unix: u64,
}

impl CacheHeader {
    pub fn new(sigma: f64, alpha: f64, n: usize, classifier: String, created_unix: u64) -> Self {
        Self {
            generator_id: crate::noise::GENERATOR_ID.to_owned(),
            digest_algorithm: DIGEST_ALGORITHM.to_owned(),
            sigma,
            alpha,
            n,
            classifier,
            created_unix,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderBlock {
    format_version: u16,
    #[serde(flatten)]
    header: CacheHeader,
    record_count: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    input_id: String,
    input_digest: u64,
    top_class: ClassIndex,
    p_lower: Option<f64>,
    samples: usize,
}

fn validate(header: &CacheHeader, records: &[CacheRecord]) -> Result<()> {
    if header.digest_algorithm != DIGEST_ALGORITHM {
        return Err(Error::CacheValidation(format!(
            "unknown digest algorithm `{}`",
            header.digest_algorithm
        )));
    }
    let mut ids = HashSet::with_capacity(records.len());
    for r in records {
        r.validate()?;
        if r.sigma != header.sigma
            || r.alpha != header.alpha
            || r.n != header.n
            || r.generator_id != header.generator_id
        {
            return Err(Error::CacheValidation(format!(
                "record `{}` does not share the header's sigma/alpha/n/generator",
                r.input_id
            )));
        }
        if !ids.insert(r.input_id.as_str()) {
            return Err(Error::CacheValidation(format!(
                "duplicate input id `{}`",
                r.input_id
            )));
        }
    }
    Ok(())
}

fn push_block(out: &mut Vec<u8>, json: &[u8]) -> Result<()> {
    let len = u32::try_from(json.len())
        .map_err(|_| Error::CacheValidation("metadata block exceeds 4 GiB".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(json);
    Ok(())
}

/// Serializes a cache after validating it.
pub fn encode_cache(header: &CacheHeader, records: &[CacheRecord]) -> Result<Vec<u8>> {
    validate(header, records)?;
    let mut out = Vec::with_capacity(64 + records.iter().map(|r| 10 * r.seeds.len() + 128).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let block = HeaderBlock {
        format_version: FORMAT_VERSION,
        header: header.clone(),
        record_count: records.len(),
    };
    push_block(&mut out, &serde_json::to_vec(&block).expect("header serializes"))?;
    for r in records {
        let meta = RecordMeta {
            input_id: r.input_id.clone(),
            input_digest: r.input_digest,
            top_class: r.top_class,
            p_lower: r.p_lower,
            samples: r.seeds.len(),
        };
        push_block(&mut out, &serde_json::to_vec(&meta).expect("meta serializes"))?;
        for s in r.seeds.as_slice() {
            out.extend_from_slice(&s.to_le_bytes());
        }
        for p in &r.predictions {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    let checksum = fnv1a(out.iter().copied());
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CacheCorrupt(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn block<T: for<'de> Deserialize<'de>>(&mut self, what: &str) -> Result<T> {
        let len = self.u32(what)? as usize;
        serde_json::from_slice(self.take(len, what)?)
            .map_err(|e| Error::CacheCorrupt(format!("malformed {what}: {e}")))
    }
}

/// Parses and validates a serialized cache.
pub fn decode_cache(bytes: &[u8]) -> Result<(CacheHeader, Vec<CacheRecord>)> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC {
        return Err(Error::CacheCorrupt("missing IRSC magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 6 + 8 {
        return Err(Error::CacheCorrupt("truncated before checksum".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if fnv1a(body.iter().copied()) != stored {
        return Err(Error::CacheCorrupt("checksum mismatch (truncated or modified file)".into()));
    }

    let mut cur = Cursor { bytes: body, pos: 6 };
    let block: HeaderBlock = cur.block("header")?;
    if block.format_version != version {
        return Err(Error::CacheCorrupt("header version disagrees with preamble".into()));
    }
    let header = block.header;
    let mut records = Vec::with_capacity(block.record_count.min(1 << 20));
    for i in 0..block.record_count {
        let meta: RecordMeta = cur.block(&format!("record {i} metadata"))?;
        let seed_bytes = cur.take(meta.samples.saturating_mul(8), "seeds")?;
        let pred_bytes = cur.take(meta.samples.saturating_mul(2), "predictions")?;
        let seeds: Vec<u64> = seed_bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let predictions = pred_bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        records.push(CacheRecord {
            input_id: meta.input_id,
            input_digest: meta.input_digest,
            top_class: meta.top_class,
            p_lower: meta.p_lower,
            sigma: header.sigma,
            alpha: header.alpha,
            n: header.n,
            seeds: SeedList::from(seeds),
            predictions,
            generator_id: header.generator_id.clone(),
        });
    }
    if cur.pos != body.len() {
        return Err(Error::CacheCorrupt(format!(
            "{} unexpected trailing bytes",
            body.len() - cur.pos
        )));
    }
    validate(&header, &records).map_err(|e| Error::CacheCorrupt(e.to_string()))?;
    Ok((header, records))
}

/// Writes the cache atomically: a sibling temp file renamed over `path`.
pub fn write_cache(path: &Path, header: &CacheHeader, records: &[CacheRecord]) -> Result<()> {
    let bytes = encode_cache(header, records)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("cache path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(CacheHeader, Vec<CacheRecord>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cache(&bytes)
}
