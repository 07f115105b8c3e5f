//! Multinomial coefficients with an in-memory table and a chunked on-disk
//! store.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "AMMC"  u32 version  u32 chunk_count
//! chunk_count x { u32 degree, u64 offset, u64 length, u64 records }
//! chunk bodies
//! ```
//!
//! A record is `u32 part_count, part_count x u32 part, u32 byte_count,
//! magnitude bytes (least significant first)`, where the parts are the
//! sorted nonzero entries of the multi-index. Each chunk holds records of a
//! single degree and is at most [`MAX_CHUNK_BYTES`] long. Chunks are read
//! the first time a coefficient of their degree is requested.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock, RwLock};

use rug::integer::Order;
use rug::Integer;

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"AMMC";
const VERSION: u32 = 1;
pub const MAX_CHUNK_BYTES: u64 = 1 << 30;

type Key = (u32, Vec<u32>);

#[derive(Clone, Copy, Debug)]
struct ChunkEntry {
    degree: u32,
    offset: u64,
    length: u64,
    records: u64,
}

/// Hit/miss counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub computed: u64,
    pub chunks_loaded: u64,
}

/// Thread-safe memo of `j! / (k_1! ... k_n!)`, optionally backed by a file.
#[derive(Debug, Default)]
pub struct MultinomialCache {
    table: RwLock<HashMap<Key, Integer>>,
    backing: Option<PathBuf>,
    chunks: Vec<ChunkEntry>,
    loaded: Mutex<HashSet<u32>>,
    stats: Mutex<CacheStats>,
}

fn key_of(kappa: &[u32]) -> Vec<u32> {
    let mut p: Vec<u32> = kappa.iter().copied().filter(|&k| k > 0).collect();
    p.sort_unstable();
    p
}

/// Product of binomials `C(k_1, k_1) C(k_1 + k_2, k_2) ...`.
fn compute(parts: &[u32]) -> Integer {
    let mut acc = Integer::from(1);
    let mut s = 0u32;
    for &k in parts {
        s += k;
        acc *= Integer::from(Integer::binomial_u(s, k));
    }
    acc
}

fn corrupt(path: &Path, message: impl Into<String>) -> Error {
    Error::Schema {
        location: path.display().to_string(),
        message: message.into(),
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn encode_record(parts: &[u32], value: &Integer, out: &mut Vec<u8>) {
    out.extend_from_slice(&(parts.len() as u32).to_le_bytes());
    for p in parts {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let bytes = value.to_digits::<u8>(Order::Lsf);
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&bytes);
}

impl MultinomialCache {
    /// Empty in-memory cache.
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a cache file, reading only its chunk index. A missing file gives
    /// an empty cache that [`persist`](Self::persist) will create.
    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = MultinomialCache {
            backing: Some(path.to_path_buf()),
            ..Self::default()
        };
        if !path.exists() {
            return Ok(cache);
        }
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| corrupt(path, "truncated header"))?;
        if &magic != MAGIC {
            return Err(corrupt(path, "not a multinomial cache file"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(corrupt(path, format!("unsupported cache version {version}")));
        }
        let n = read_u32(&mut r)?;
        for _ in 0..n {
            cache.chunks.push(ChunkEntry {
                degree: read_u32(&mut r)?,
                offset: read_u64(&mut r)?,
                length: read_u64(&mut r)?,
                records: read_u64(&mut r)?,
            });
        }
        Ok(cache)
    }

    pub fn stats(&self) -> CacheStats {
        *self.stats.lock().unwrap()
    }

    pub fn len(&self) -> usize {
        self.table.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn load_degree(&self, degree: u32) -> Result<()> {
        let Some(path) = &self.backing else {
            return Ok(());
        };
        let mut loaded = self.loaded.lock().unwrap();
        if !loaded.insert(degree) {
            return Ok(());
        }
        let mut records = Vec::new();
        for c in self.chunks.iter().filter(|c| c.degree == degree) {
            let mut f = File::open(path)?;
            f.seek(SeekFrom::Start(c.offset))?;
            let mut r = BufReader::new(f.take(c.length));
            for _ in 0..c.records {
                let np = read_u32(&mut r).map_err(|_| corrupt(path, "truncated chunk"))?;
                let parts = (0..np).map(|_| read_u32(&mut r)).collect::<std::io::Result<Vec<_>>>()?;
                let nb = read_u32(&mut r)? as usize;
                let mut bytes = vec![0u8; nb];
                r.read_exact(&mut bytes)?;
                if parts.iter().sum::<u32>() != degree {
                    return Err(corrupt(path, format!("record of degree {degree} has parts {parts:?}")));
                }
                records.push(((degree, parts), Integer::from_digits(&bytes, Order::Lsf)));
            }
            self.stats.lock().unwrap().chunks_loaded += 1;
        }
        self.table.write().unwrap().extend(records);
        Ok(())
    }

    /// `j! / (k_1! ... k_n!)` for `|k| = j`.
    pub fn get(&self, j: u32, kappa: &[u32]) -> Result<Integer> {
        let total: u64 = kappa.iter().map(|&k| k as u64).sum();
        if total != j as u64 {
            return Err(Error::Parameter(format!(
                "multi-index {kappa:?} has degree {total}, expected {j}"
            )));
        }
        let key = (j, key_of(kappa));
        if let Some(v) = self.table.read().unwrap().get(&key) {
            self.stats.lock().unwrap().hits += 1;
            return Ok(v.clone());
        }
        self.load_degree(j)?;
        if let Some(v) = self.table.read().unwrap().get(&key) {
            self.stats.lock().unwrap().hits += 1;
            return Ok(v.clone());
        }
        let v = compute(&key.1);
        self.stats.lock().unwrap().computed += 1;
        self.table.write().unwrap().entry(key).or_insert_with(|| v.clone());
        Ok(v)
    }

    /// Writes every known coefficient (including unread chunks) to `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let degrees: Vec<u32> = self.chunks.iter().map(|c| c.degree).collect();
        for d in degrees {
            self.load_degree(d)?;
        }
        let table = self.table.read().unwrap();
        let mut by_degree: Vec<(&Key, &Integer)> = table.iter().collect();
        by_degree.sort_by(|a, b| a.0.cmp(b.0));

        let mut chunks: Vec<(ChunkEntry, Vec<u8>)> = Vec::new();
        for (key, value) in by_degree {
            let mut rec = Vec::new();
            encode_record(&key.1, value, &mut rec);
            let start_new = match chunks.last() {
                Some((c, body)) => c.degree != key.0 || (body.len() + rec.len()) as u64 > MAX_CHUNK_BYTES,
                None => true,
            };
            if start_new {
                chunks.push((
                    ChunkEntry {
                        degree: key.0,
                        offset: 0,
                        length: 0,
                        records: 0,
                    },
                    Vec::new(),
                ));
            }
            let (c, body) = chunks.last_mut().unwrap();
            body.extend_from_slice(&rec);
            c.records += 1;
        }
        let mut offset = (4 + 4 + 4 + chunks.len() * 28) as u64;
        for (c, body) in &mut chunks {
            c.offset = offset;
            c.length = body.len() as u64;
            offset += c.length;
        }

        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_all(&VERSION.to_le_bytes())?;
            w.write_all(&(chunks.len() as u32).to_le_bytes())?;
            for (c, _) in &chunks {
                w.write_all(&c.degree.to_le_bytes())?;
                w.write_all(&c.offset.to_le_bytes())?;
                w.write_all(&c.length.to_le_bytes())?;
                w.write_all(&c.records.to_le_bytes())?;
            }
            for (_, body) in &chunks {
                w.write_all(body)?;
            }
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Saves to the file this cache was opened from.
    pub fn persist(&self) -> Result<()> {
        match &self.backing {
            Some(p) => self.save(p),
            None => Err(Error::Parameter("cache has no backing file".into())),
        }
    }
}

/// Process-wide in-memory cache.
pub fn global_cache() -> &'static MultinomialCache {
    static CACHE: OnceLock<MultinomialCache> = OnceLock::new();
    CACHE.get_or_init(MultinomialCache::new)
}

/// `j! / (k_1! ... k_n!)`, memoized in [`global_cache`].
pub fn multinomial_coefficient(j: u32, kappa: &[u32]) -> Result<Integer> {
    global_cache().get(j, kappa)
}
