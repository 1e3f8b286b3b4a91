//! Versioned binary persistence for embedding tables.
//!
//! Layout (little-endian): magic `KGEMBED\0`, format version, model name,
//! dimension/norm/init scale, entity/relation counts and seed, then each
//! present parameter block as `(tag, rows, cols, f64 data)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::spec::{ModelKind, ModelSpec, Norm};
use super::table::{EmbeddingTable, Matrix};

const MAGIC: &[u8; 8] = b"KGEMBED\0";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an embedding file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("corrupt embedding file: {0}")]
    Corrupt(String),
}

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.w.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.w.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.w.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.w.write_all(&v.to_le_bytes())
    }
    fn bytes(&mut self, v: &[u8]) -> std::io::Result<()> {
        self.u32(v.len() as u32)?;
        self.w.write_all(v)
    }
    fn floats(&mut self, v: &[f64]) -> std::io::Result<()> {
        for x in v {
            self.f64(*x)?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn u8(&mut self) -> std::io::Result<u8> {
        let mut b = [0u8; 1];
        self.r.read_exact(&mut b)?;
        Ok(b[0])
    }
    fn u32(&mut self) -> std::io::Result<u32> {
        let mut b = [0u8; 4];
        self.r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        self.r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn bytes(&mut self) -> std::io::Result<Vec<u8>> {
        let n = self.u32()? as usize;
        let mut v = vec![0u8; n];
        self.r.read_exact(&mut v)?;
        Ok(v)
    }
    fn floats(&mut self, n: usize) -> std::io::Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.f64()?);
        }
        Ok(v)
    }
}

const TAG_ENTITY: u8 = 0;
const TAG_ENTITY_EXTRA: u8 = 1;
const TAG_HEAD_BIAS: u8 = 2;
const TAG_TAIL_BIAS: u8 = 3;
const TAG_RELATION: u8 = 4;
const TAG_RELATION_EXTRA: u8 = 5;
const TAG_CURVATURE: u8 = 6;

/// Write a table to `path`.
pub fn save_table(path: &Path, table: &EmbeddingTable) -> Result<(), PersistError> {
    let io = |source| PersistError::Io { path: path.to_path_buf(), source };
    let f = File::create(path).map_err(io)?;
    let mut w = Writer { w: BufWriter::new(f) };
    (|| -> std::io::Result<()> {
        w.w.write_all(MAGIC)?;
        w.u32(VERSION)?;
        w.bytes(table.spec.kind.name().as_bytes())?;
        w.u32(table.spec.dim as u32)?;
        w.u8(match table.spec.norm {
            Norm::L1 => 0,
            Norm::L2 => 1,
        })?;
        w.f64(table.spec.init_scale)?;
        w.u64(table.num_entities as u64)?;
        w.u64(table.num_relations as u64)?;
        w.u64(table.seed)?;

        let mut blocks: Vec<(u8, usize, usize, &[f64])> = Vec::new();
        blocks.push((TAG_ENTITY, table.entity.rows(), table.entity.cols(), table.entity.data()));
        if let Some(m) = &table.entity_extra {
            blocks.push((TAG_ENTITY_EXTRA, m.rows(), m.cols(), m.data()));
        }
        if !table.head_bias.is_empty() {
            blocks.push((TAG_HEAD_BIAS, table.head_bias.len(), 1, &table.head_bias));
            blocks.push((TAG_TAIL_BIAS, table.tail_bias.len(), 1, &table.tail_bias));
        }
        blocks.push((TAG_RELATION, table.relation.rows(), table.relation.cols(), table.relation.data()));
        if let Some(m) = &table.relation_extra {
            blocks.push((TAG_RELATION_EXTRA, m.rows(), m.cols(), m.data()));
        }
        if !table.curvature_raw.is_empty() {
            blocks.push((TAG_CURVATURE, table.curvature_raw.len(), 1, &table.curvature_raw));
        }

        w.u32(blocks.len() as u32)?;
        for (tag, rows, cols, data) in blocks {
            w.u8(tag)?;
            w.u64(rows as u64)?;
            w.u64(cols as u64)?;
            w.floats(data)?;
        }
        w.w.flush()
    })()
    .map_err(io)
}

/// Read a table written by [`save_table`].
pub fn load_table(path: &Path) -> Result<EmbeddingTable, PersistError> {
    let io = |source| PersistError::Io { path: path.to_path_buf(), source };
    let f = File::open(path).map_err(io)?;
    let mut r = Reader { r: BufReader::new(f) };

    let mut magic = [0u8; 8];
    r.r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(PersistError::BadMagic);
    }
    let version = r.u32().map_err(io)?;
    if version != VERSION {
        return Err(PersistError::BadVersion(version));
    }
    let name = String::from_utf8(r.bytes().map_err(io)?)
        .map_err(|e| PersistError::Corrupt(e.to_string()))?;
    let kind: ModelKind = name.parse().map_err(PersistError::Corrupt)?;
    let dim = r.u32().map_err(io)? as usize;
    let norm = match r.u8().map_err(io)? {
        0 => Norm::L1,
        1 => Norm::L2,
        other => return Err(PersistError::Corrupt(format!("bad norm tag {other}"))),
    };
    let init_scale = r.f64().map_err(io)?;
    let num_entities = r.u64().map_err(io)? as usize;
    let num_relations = r.u64().map_err(io)? as usize;
    let seed = r.u64().map_err(io)?;

    let spec = ModelSpec { kind, dim, norm, init_scale };
    let mut table = EmbeddingTable {
        spec,
        num_entities,
        num_relations,
        seed,
        entity: Matrix::zeros(num_entities, spec.entity_width()),
        entity_extra: None,
        head_bias: Vec::new(),
        tail_bias: Vec::new(),
        relation: Matrix::zeros(num_relations, spec.relation_width()),
        relation_extra: None,
        curvature_raw: Vec::new(),
    };

    let nblocks = r.u32().map_err(io)?;
    for _ in 0..nblocks {
        let tag = r.u8().map_err(io)?;
        let rows = r.u64().map_err(io)? as usize;
        let cols = r.u64().map_err(io)? as usize;
        let data = r.floats(rows * cols).map_err(io)?;
        match tag {
            TAG_ENTITY => table.entity = Matrix::from_data(rows, cols, data),
            TAG_ENTITY_EXTRA => table.entity_extra = Some(Matrix::from_data(rows, cols, data)),
            TAG_HEAD_BIAS => table.head_bias = data,
            TAG_TAIL_BIAS => table.tail_bias = data,
            TAG_RELATION => table.relation = Matrix::from_data(rows, cols, data),
            TAG_RELATION_EXTRA => table.relation_extra = Some(Matrix::from_data(rows, cols, data)),
            TAG_CURVATURE => table.curvature_raw = data,
            other => return Err(PersistError::Corrupt(format!("unknown block tag {other}"))),
        }
    }
    if table.entity.rows() != num_entities || table.relation.rows() != num_relations {
        return Err(PersistError::Corrupt("block shapes disagree with header".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::spec::ALL_MODELS;
    use crate::models::table::init_params;

    #[test]
    fn round_trips_every_model() {
        let dir = std::env::temp_dir().join(format!("kge-persist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for kind in ALL_MODELS {
            let spec = ModelSpec::new(kind, 6);
            let table = init_params(&spec, 7, 3, 11);
            let path = dir.join(format!("{kind}.kge"));
            save_table(&path, &table).unwrap();
            let back = load_table(&path).unwrap();
            assert_eq!(back, table, "{kind}");
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = std::env::temp_dir().join(format!("kge-persist-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("junk.kge");
        std::fs::write(&path, b"definitely not an embedding file").unwrap();
        assert!(matches!(load_table(&path), Err(PersistError::BadMagic)));
    }
}
