//! On-disk layout: a directory of flat files plus a `key=value` manifest
//! carrying the format version, shape parameters, analyzer fingerprint and a
//! SHA-256 checksum of every data file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CentroidEntry, CollectionStats, DocCentroids, DocumentRecord, Index};
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.txt";
const DOCUMENTS: &str = "documents.json";
const POSTINGS: &str = "postings.json";
const STATS: &str = "stats.json";
const CENTROIDS: &str = "centroids.bin";
const DATA_FILES: [&str; 4] = [DOCUMENTS, POSTINGS, STATS, CENTROIDS];
const CENTROID_MAGIC: &[u8; 4] = b"WVCT";

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl<T: Scalar> Index<T> {
    pub fn persist(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let files: [(&str, Vec<u8>); 4] = [
            (DOCUMENTS, json(&self.documents)?),
            (POSTINGS, json(&self.postings)?),
            (STATS, json(&self.stats)?),
            (CENTROIDS, encode_centroids(self)),
        ];
        let mut manifest = format!(
            "format_version={FORMAT_VERSION}\nnum_docs={}\nvocab_size={}\ndim={}\nk={}\nnormalized={}\nanalyzer_fingerprint={}\n",
            self.num_docs(),
            self.vocabulary_size(),
            self.dim,
            self.k,
            self.normalized,
            self.analyzer_fingerprint,
        );
        for (name, bytes) in &files {
            fs::write(dir.join(name), bytes)?;
            manifest.push_str(&format!("checksum.{name}={}\n", sha256(bytes)));
        }
        fs::write(dir.join(MANIFEST), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let manifest = fs::read_to_string(&manifest_path)
            .map_err(|e| Error::load(&manifest_path, e.to_string()))?;
        let kv: BTreeMap<&str, &str> = manifest
            .lines()
            .filter_map(|l| l.split_once('='))
            .collect();
        let get = |key: &str| {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::load(&manifest_path, format!("missing key {key}")))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::load(&manifest_path, format!("bad value for {key}")))
        };
        let version = num("format_version")?;
        if version != FORMAT_VERSION as usize {
            return Err(Error::load(
                &manifest_path,
                format!("format version {version}, expected {FORMAT_VERSION}"),
            ));
        }
        let (dim, k, num_docs) = (num("dim")?, num("k")?, num("num_docs")?);
        let normalized = get("normalized")? == "true";
        let fingerprint = get("analyzer_fingerprint")?.to_string();

        let mut contents = BTreeMap::new();
        for name in DATA_FILES {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::load(&path, e.to_string()))?;
            if sha256(&bytes) != get(&format!("checksum.{name}"))? {
                return Err(Error::load(&path, "checksum mismatch"));
            }
            contents.insert(name, bytes);
        }
        let parse_err = |name: &str, e: serde_json::Error| Error::load(dir.join(name), e.to_string());
        let documents: Vec<DocumentRecord> =
            serde_json::from_slice(&contents[DOCUMENTS]).map_err(|e| parse_err(DOCUMENTS, e))?;
        let postings = serde_json::from_slice(&contents[POSTINGS]).map_err(|e| parse_err(POSTINGS, e))?;
        let stats: CollectionStats =
            serde_json::from_slice(&contents[STATS]).map_err(|e| parse_err(STATS, e))?;
        if documents.len() != num_docs {
            return Err(Error::load(dir.join(DOCUMENTS), "document count disagrees with manifest"));
        }
        let centroids = decode_centroids(&contents[CENTROIDS], &documents, dim)
            .map_err(|m| Error::load(dir.join(CENTROIDS), m))?;
        Ok(Index::from_parts(documents, postings, stats, centroids, fingerprint, dim, k, normalized))
    }
}

fn json<S: serde::Serialize>(value: &S) -> Result<Vec<u8>> {
    serde_json::to_vec(value).map_err(|e| Error::Io(e.into()))
}

// Layout: magic, u32 version, u64 doc count, u32 dim; then per document
// u32 entry count, entries as (u32 cluster, u32 members, dim x f64), and a
// u8 flag followed by dim x f64 for the document mean.
fn encode_centroids<T: Scalar>(index: &Index<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CENTROID_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(index.centroids.len() as u64).to_le_bytes());
    out.extend_from_slice(&(index.dim as u32).to_le_bytes());
    let put_vec = |out: &mut Vec<u8>, v: &[T]| {
        for x in v {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    };
    for dc in &index.centroids {
        out.extend_from_slice(&(dc.entries.len() as u32).to_le_bytes());
        for e in &dc.entries {
            out.extend_from_slice(&e.cluster_id.to_le_bytes());
            out.extend_from_slice(&e.member_count.to_le_bytes());
            put_vec(&mut out, &e.centroid);
        }
        match &dc.mean {
            Some(m) => {
                out.push(1);
                put_vec(&mut out, m);
            }
            None => out.push(0),
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn vec<T: Scalar>(&mut self, dim: usize) -> std::result::Result<Vec<T>, String> {
        (0..dim)
            .map(|_| Ok(T::of(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))))
            .collect()
    }
}

fn decode_centroids<T: Scalar>(
    bytes: &[u8],
    documents: &[DocumentRecord],
    dim: usize,
) -> std::result::Result<Vec<DocCentroids<T>>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CENTROID_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("format version {version}, expected {FORMAT_VERSION}"));
    }
    let n = r.u64()? as usize;
    let stored_dim = r.u32()? as usize;
    if n != documents.len() || stored_dim != dim {
        return Err("header disagrees with manifest".into());
    }
    let mut out = Vec::with_capacity(n);
    for doc in documents {
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let cluster_id = r.u32()?;
            let member_count = r.u32()?;
            entries.push(CentroidEntry { cluster_id, member_count, centroid: r.vec(dim)? });
        }
        let mean = match r.u8()? {
            0 => None,
            1 => Some(r.vec(dim)?),
            f => return Err(format!("bad mean flag {f}")),
        };
        out.push(DocCentroids { doc_id: doc.doc_id.clone(), entries, mean });
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    Ok(out)
}
