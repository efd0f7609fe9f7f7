//! Precomputed embeddings: `SPRIGVEC` files, exact cosine search and an
//! HNSW approximate index.
//!
//! `SPRIGVEC` layout, little-endian: magic `"SPRIGVEC"`, u32 version (1),
//! u32 dim, u64 count, then `count * dim` f32 values row by row. A sidecar
//! text file holds one id per line in the same order. Vectors are stored
//! as produced by the encoder and unit-normalized when loaded.

mod hnsw;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ranked::RankedList;

pub use hnsw::{HnswIndex, HnswParams};

pub const VECTOR_MAGIC: &[u8; 8] = b"SPRIGVEC";
const VERSION: u32 = 1;

/// Raw (unnormalized) contents of a `SPRIGVEC` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVectors {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl RawVectors {
    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }
}

pub fn write_sprigvec<W: Write>(w: &mut W, dim: usize, data: &[f32]) -> std::io::Result<()> {
    assert!(dim > 0 && data.len().is_multiple_of(dim), "data is not a whole number of rows");
    w.write_all(VECTOR_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&((data.len() / dim) as u64).to_le_bytes())?;
    for &x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a vector file and its ids sidecar.
pub fn save_vectors(path: &Path, ids_path: &Path, dim: usize, data: &[f32], ids: &[String]) -> Result<()> {
    if dim == 0 || data.len() != dim * ids.len() {
        return Err(Error::param(format!(
            "{} values do not form {} rows of dim {dim}",
            data.len(),
            ids.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_sprigvec(&mut w, dim, data)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    let file = File::create(ids_path).map_err(|e| Error::io(ids_path, e))?;
    let mut w = BufWriter::new(file);
    for id in ids {
        writeln!(w, "{id}").map_err(|e| Error::io(ids_path, e))?;
    }
    w.flush().map_err(|e| Error::io(ids_path, e))
}

pub fn read_sprigvec<R: Read>(mut r: R, origin: &Path) -> Result<RawVectors> {
    let io = |e: std::io::Error| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(origin, "truncated vector file"),
        _ => Error::io(origin, e),
    };
    let mut header = [0u8; 24];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..8] != VECTOR_MAGIC {
        return Err(Error::format(origin, "bad magic, not a SPRIGVEC file"));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(origin, format!("unsupported vector version {version}")));
    }
    let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::format(origin, "dim must be positive"));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(origin, e))?;
    let expected = count.checked_mul(dim).and_then(|n| n.checked_mul(4));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            origin,
            format!("payload has {} bytes, header implies {count} x {dim} f32", bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawVectors { dim, data })
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

/// Unit-normalized row-major vectors with their ids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    index_of: HashMap<String, u32>,
}

impl VectorStore {
    /// Normalizes every row; a zero or non-finite row is an error.
    pub fn from_rows(dim: usize, mut data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if dim == 0 || data.len() != dim * ids.len() {
            return Err(Error::param(format!(
                "{} values do not form {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        for (i, row) in data.chunks_exact_mut(dim).enumerate() {
            normalize_in_place(row).map_err(|m| Error::param(format!("row {i} ({}): {m}", ids[i])))?;
        }
        let mut index_of = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index_of.insert(id.clone(), i as u32).is_some() {
                return Err(Error::param(format!("duplicate vector id {id}")));
            }
        }
        Ok(VectorStore {
            dim,
            data,
            ids,
            index_of,
        })
    }

    pub fn load(path: &Path, ids_path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let raw = read_sprigvec(BufReader::new(file), path)?;
        let ids = read_ids(ids_path)?;
        if ids.len() != raw.count() {
            return Err(Error::format(
                ids_path,
                format!("{} ids for {} vectors", ids.len(), raw.count()),
            ));
        }
        Self::from_rows(raw.dim, raw.data, ids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn row(&self, i: u32) -> &[f32] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f32]> {
        self.index_of.get(id).map(|&i| self.row(i))
    }

    /// Reorders rows so that row `i` belongs to corpus passage `i`. Every
    /// passage needs a vector; ids not in the corpus are dropped.
    pub fn aligned_to(&self, corpus: &Corpus) -> Result<Self> {
        let mut data = Vec::with_capacity(corpus.len() * self.dim);
        for p in corpus.passages() {
            let row = self.row_by_id(&p.id).ok_or_else(|| {
                Error::Misaligned(format!("passage {} has no vector", p.id))
            })?;
            data.extend_from_slice(row);
        }
        let ids: Vec<String> = corpus.passages().iter().map(|p| p.id.clone()).collect();
        let index_of = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        Ok(VectorStore {
            dim: self.dim,
            data,
            ids,
            index_of,
        })
    }

    /// Normalized copy of `query`, checked against the store dimension.
    pub fn prepare_query(&self, query: &[f32]) -> Result<Vec<f32>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut q = query.to_vec();
        normalize_in_place(&mut q).map_err(|m| Error::param(format!("query vector: {m}")))?;
        Ok(q)
    }
}

fn normalize_in_place(row: &mut [f32]) -> std::result::Result<(), &'static str> {
    let norm = row.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err("non-finite values");
    }
    if norm == 0.0 {
        return Err("zero vector cannot be normalized");
    }
    for x in row {
        *x = (*x as f64 / norm) as f32;
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Eight independent lanes so the loop vectorizes.
    let mut acc = [0f32; 8];
    let chunks = a.len() / 8 * 8;
    for (ca, cb) in a[..chunks].chunks_exact(8).zip(b[..chunks].chunks_exact(8)) {
        for i in 0..8 {
            acc[i] += ca[i] * cb[i];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Exhaustive cosine top-`k`, ties by ordinal.
pub fn exact_search(store: &VectorStore, query: &[f32], k: usize) -> Result<RankedList> {
    let q = store.prepare_query(query)?;
    Ok(RankedList::top_k(
        (0..store.len() as u32).map(|i| (i, dot(store.row(i), &q) as f64)),
        k,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_store(n: usize, dim: usize, seed: u64) -> VectorStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let ids = (0..n).map(|i| format!("v{i}")).collect();
        VectorStore::from_rows(dim, data, ids).unwrap()
    }

    fn bytes(dim: usize, data: &[f32]) -> Vec<u8> {
        let mut out = Vec::new();
        write_sprigvec(&mut out, dim, data).unwrap();
        out
    }

    #[test]
    fn header_layout() {
        let b = bytes(4, &[1.0; 12]);
        assert_eq!(&b[..8], b"SPRIGVEC");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(b.len(), 24 + 12 * 4);
    }

    #[test]
    fn load_normalizes_and_round_trips_raw_payload() {
        let dir = tempfile::tempdir().unwrap();
        let (vp, ip) = (dir.path().join("v.bin"), dir.path().join("v.ids"));
        let data = vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        save_vectors(&vp, &ip, 4, &data, &ids).unwrap();

        let raw = read_sprigvec(File::open(&vp).unwrap(), &vp).unwrap();
        assert_eq!(raw.dim, 4);
        assert_eq!(raw.data, data);
        assert_eq!(bytes(raw.dim, &raw.data), std::fs::read(&vp).unwrap());

        let store = VectorStore::load(&vp, &ip).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.dim(), 4);
        assert_eq!(store.row(0), &[0.6, 0.8, 0.0, 0.0]);
        for i in 0..3 {
            let n: f32 = store.row(i).iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (vp, ip) = (dir.path().join("v.bin"), dir.path().join("v.ids"));
        let ids: Vec<String> = vec!["a".into(), "b".into()];

        save_vectors(&vp, &ip, 2, &[1.0, 0.0, 0.0, 0.0], &ids).unwrap();
        assert!(VectorStore::load(&vp, &ip).is_err(), "zero row");

        save_vectors(&vp, &ip, 2, &[1.0, 0.0, 0.0, 1.0], &ids).unwrap();
        std::fs::write(&ip, "a\n").unwrap();
        assert!(VectorStore::load(&vp, &ip).is_err(), "id count");

        let mut b = bytes(2, &[1.0, 0.0, 0.0, 1.0]);
        b.truncate(b.len() - 2);
        assert!(matches!(read_sprigvec(b.as_slice(), &vp), Err(Error::Format { .. })));
        let mut b = bytes(2, &[1.0, 0.0]);
        b[0] = b'X';
        assert!(read_sprigvec(b.as_slice(), &vp).is_err());
        let mut b = bytes(2, &[1.0, 0.0]);
        b[8] = 2;
        assert!(read_sprigvec(b.as_slice(), &vp).is_err());
    }

    #[test]
    fn exact_search_examples() {
        let store = random_store(50, 8, 1);
        let q = store.row(17).to_vec();
        let r = exact_search(&store, &q, 3).unwrap();
        assert_eq!(r.items[0].doc, 17);
        assert!((r.items[0].score - 1.0).abs() < 1e-6);
        assert!(matches!(
            exact_search(&store, &[1.0; 7], 3),
            Err(Error::DimensionMismatch { expected: 8, actual: 7 })
        ));

        let axis = VectorStore::from_rows(
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            vec!["x".into(), "y".into(), "xy".into()],
        )
        .unwrap();
        let r = exact_search(&axis, &[0.0, 0.0, 5.0], 3).unwrap();
        assert_eq!(r.docs().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(r.items.iter().all(|h| h.score.abs() < 1e-6));
    }

    #[test]
    fn exact_matches_brute_force_oracle() {
        let store = random_store(1000, 32, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let got: Vec<u32> = exact_search(&store, &q, 10).unwrap().docs().collect();
            // oracle: f64 dot products with full sort
            let qn = store.prepare_query(&q).unwrap();
            let mut all: Vec<(u32, f64)> = (0..1000u32)
                .map(|i| {
                    let s = store.row(i).iter().zip(&qn).map(|(a, b)| *a as f64 * *b as f64).sum();
                    (i, s)
                })
                .collect();
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let want: Vec<u32> = all[..10].iter().map(|x| x.0).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn alignment_to_corpus() {
        use crate::corpus::Passage;
        let store = VectorStore::from_rows(
            2,
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec!["b".into(), "a".into(), "extra".into()],
        )
        .unwrap();
        let corpus = Corpus::new(
            ["a", "b"]
                .iter()
                .map(|id| Passage {
                    id: id.to_string(),
                    title: String::new(),
                    text: "t".into(),
                })
                .collect(),
        )
        .unwrap();
        let aligned = store.aligned_to(&corpus).unwrap();
        assert_eq!(aligned.ids(), &["a".to_string(), "b".to_string()]);
        assert_eq!(aligned.row(0), &[0.0, 1.0]);

        let small = VectorStore::from_rows(2, vec![1.0, 0.0], vec!["a".into()]).unwrap();
        assert!(matches!(small.aligned_to(&corpus), Err(Error::Misaligned(_))));
    }
}
