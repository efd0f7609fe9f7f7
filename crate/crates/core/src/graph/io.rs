//! `SPRIGGRF` binary persistence.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "SPRIGGRF" | u32 version | u64 n_docs | u64 n_entities
//! u64 raw_nnz | u64 fwd_nnz | f64 hub_penalty
//! n_entities x (u32 byte length, utf-8 name)
//! n_entities x u32 df | n_entities x f64 hub scale
//! raw:     (n_docs + 1) x u64 row_ptr | raw_nnz x u32 col | raw_nnz x f64 val
//! forward: (nodes + 1) x u64 row_ptr  | fwd_nnz x u32 col | fwd_nnz x f64 val
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BipartiteGraph, Csr};
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 8] = b"SPRIGGRF";
const VERSION: u32 = 1;

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> std::io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn u32(&mut self) -> std::io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> std::io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> std::io::Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn csr(&mut self, rows: usize, nnz: usize) -> std::io::Result<Csr> {
        let row_ptr = (0..=rows).map(|_| self.u64()).collect::<std::io::Result<_>>()?;
        let cols = (0..nnz).map(|_| self.u32()).collect::<std::io::Result<_>>()?;
        let vals = (0..nnz).map(|_| self.f64()).collect::<std::io::Result<_>>()?;
        Ok(Csr {
            row_ptr,
            cols,
            vals,
        })
    }
}

fn write_csr<W: Write>(w: &mut W, csr: &Csr) -> std::io::Result<()> {
    for &p in &csr.row_ptr {
        w.write_all(&p.to_le_bytes())?;
    }
    for &c in &csr.cols {
        w.write_all(&c.to_le_bytes())?;
    }
    for &v in &csr.vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn check_csr(csr: &Csr, n_cols: usize) -> std::result::Result<(), String> {
    if csr.row_ptr.first() != Some(&0) {
        return Err("row_ptr must start at 0".into());
    }
    if csr.row_ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err("row_ptr is not monotone".into());
    }
    if *csr.row_ptr.last().unwrap() as usize != csr.cols.len() {
        return Err("row_ptr does not end at nnz".into());
    }
    if csr.cols.iter().any(|&c| c as usize >= n_cols) {
        return Err("column index out of range".into());
    }
    Ok(())
}

impl BipartiteGraph {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(GRAPH_MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_docs as u64).to_le_bytes())?;
        w.write_all(&(self.n_entities() as u64).to_le_bytes())?;
        w.write_all(&(self.raw.nnz() as u64).to_le_bytes())?;
        w.write_all(&(self.forward.nnz() as u64).to_le_bytes())?;
        w.write_all(&self.hub_penalty.to_le_bytes())?;
        for name in &self.entity_names {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        for &d in &self.df {
            w.write_all(&d.to_le_bytes())?;
        }
        for &s in &self.hub_scale {
            w.write_all(&s.to_le_bytes())?;
        }
        write_csr(w, &self.raw)?;
        write_csr(w, &self.forward)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    /// Reads a graph; `origin` is only used in error messages.
    pub fn read_from<R: Read>(inner: R, origin: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(origin, msg);
        let io = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format(origin, "truncated graph file"),
            _ => Error::io(origin, e),
        };
        let mut r = Reader { inner };
        let magic: [u8; 8] = r.bytes().map_err(io)?;
        if &magic != GRAPH_MAGIC {
            return Err(bad("bad magic, not a SPRIGGRF file".into()));
        }
        let version = r.u32().map_err(io)?;
        if version != VERSION {
            return Err(bad(format!("unsupported graph version {version}")));
        }
        let n_docs = r.u64().map_err(io)?;
        let n_entities = r.u64().map_err(io)? as usize;
        let raw_nnz = r.u64().map_err(io)? as usize;
        let fwd_nnz = r.u64().map_err(io)? as usize;
        let hub_penalty = r.f64().map_err(io)?;
        if n_docs > u32::MAX as u64 || n_docs as usize + n_entities > u32::MAX as usize {
            return Err(bad("node count exceeds u32 range".into()));
        }
        let n_docs = n_docs as usize;

        let mut names = Vec::with_capacity(n_entities);
        for _ in 0..n_entities {
            let len = r.u32().map_err(io)? as usize;
            let mut buf = vec![0u8; len];
            r.inner.read_exact(&mut buf).map_err(io)?;
            names.push(String::from_utf8(buf).map_err(|_| bad("entity name is not utf-8".into()))?);
        }
        let df = (0..n_entities).map(|_| r.u32()).collect::<std::io::Result<Vec<_>>>().map_err(io)?;
        let hub_scale = (0..n_entities)
            .map(|_| r.f64())
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(io)?;
        let raw = r.csr(n_docs, raw_nnz).map_err(io)?;
        let forward = r.csr(n_docs + n_entities, fwd_nnz).map_err(io)?;
        let mut trailing = [0u8; 1];
        if r.inner.read(&mut trailing).map_err(io)? != 0 {
            return Err(bad("trailing bytes after graph payload".into()));
        }
        check_csr(&raw, n_entities).map_err(|m| bad(format!("raw matrix: {m}")))?;
        check_csr(&forward, n_docs + n_entities).map_err(|m| bad(format!("forward matrix: {m}")))?;

        let entity_index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect::<std::collections::HashMap<_, _>>();
        if entity_index.len() != n_entities {
            return Err(bad("duplicate entity names".into()));
        }
        Ok(BipartiteGraph {
            n_docs: n_docs as u32,
            entity_names: names,
            entity_index,
            df,
            hub_scale,
            hub_penalty,
            raw,
            forward,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BipartiteGraph {
        BipartiteGraph::from_edges(
            3,
            vec!["paris".into(), "eiffel tower".into(), "ünïcode".into()],
            &[(0, 0, 1.5), (1, 0, 2.0), (1, 1, 1.0), (2, 2, 3.25)],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let g = sample();
        let mut a = Vec::new();
        g.write_to(&mut a).unwrap();
        let back = BipartiteGraph::read_from(a.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, g);
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[..8], GRAPH_MAGIC);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        let g = sample();
        g.save(&path).unwrap();
        assert_eq!(BipartiteGraph::load(&path).unwrap(), g);
    }

    #[test]
    fn rejects_corrupt_input() {
        let mut bytes = Vec::new();
        sample().write_to(&mut bytes).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(BipartiteGraph::read_from(bad_magic.as_slice(), Path::new("m")).is_err());

        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(BipartiteGraph::read_from(bad_version.as_slice(), Path::new("m")).is_err());

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            BipartiteGraph::read_from(truncated, Path::new("m")),
            Err(Error::Format { .. })
        ));

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(BipartiteGraph::read_from(extra.as_slice(), Path::new("m")).is_err());
    }
}
