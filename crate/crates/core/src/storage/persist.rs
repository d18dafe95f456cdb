//! On-disk database format.
//!
//! Layout under the database directory:
//!
//! ```text
//! catalog              magic + version + JSON payload + SHA-256
//! dict                 term dictionary, length-prefixed entries
//! ecs.idx              (from, property, to) link triples
//! tables/<id>/subject.bin   fixed-width subject ids
//! tables/<id>/<col>.bin     NULL bitmap + varint-framed value lists
//! ```
//!
//! All ids are little-endian u32. The catalog carries a manifest with
//! the SHA-256 of every other file; the catalog itself ends in the hash
//! of its own payload, so any single flipped byte is detected and
//! reported with the offending file name.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_subject_index, Catalog, Database, EcsIndex, MergedTable, Row, TableId};
use crate::error::{Error, Result};
use crate::term::{Dictionary, Term, TermId};

const FORMAT_VERSION: u16 = 1;
const MAGIC_CATALOG: &[u8; 5] = b"RXCAT";
const MAGIC_DICT: &[u8; 5] = b"RXDIC";
const MAGIC_ECS: &[u8; 5] = b"RXECS";
const MAGIC_SUBJECT: &[u8; 5] = b"RXSUB";
const MAGIC_COLUMN: &[u8; 5] = b"RXCOL";

#[derive(Serialize, Deserialize)]
struct PersistedCatalog {
    catalog: Catalog,
    /// SHA-256 (hex) of every non-catalog file, keyed by relative path.
    files: BTreeMap<String, String>,
}

impl Database {
    /// Writes the database into `dir`, which must be absent or empty.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        if fs::read_dir(dir)?.next().is_some() {
            return Err(Error::DbDirNotEmpty(dir.to_path_buf()));
        }

        let mut manifest = BTreeMap::new();
        let mut write_file = |rel: String, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            manifest.insert(rel, sha256_hex(&bytes));
            let mut f = fs::File::create(path)?;
            f.write_all(&bytes)?;
            Ok(())
        };

        write_file("dict".into(), encode_dict(&self.dict))?;
        write_file("ecs.idx".into(), encode_ecs(&self.ecs))?;
        for table in &self.tables {
            let base = format!("tables/{}", table.id.0);
            write_file(format!("{base}/subject.bin"), encode_subjects(table))?;
            for (col, p) in table.columns.iter().enumerate() {
                write_file(format!("{base}/{}.bin", p.0), encode_column(table, col))?;
            }
        }

        let persisted = PersistedCatalog {
            catalog: self.catalog.clone(),
            files: manifest,
        };
        let payload =
            serde_json::to_vec(&persisted).expect("catalog serialization cannot fail");
        let mut bytes = Vec::with_capacity(payload.len() + 64);
        bytes.extend_from_slice(MAGIC_CATALOG);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        bytes.extend_from_slice(&payload);
        bytes.extend_from_slice(&Sha256::digest(&payload));
        fs::write(dir.join("catalog"), bytes)?;
        Ok(())
    }

    /// Loads a database written by [`Database::persist`], verifying the
    /// version and every file checksum.
    pub fn load(dir: &Path) -> Result<Database> {
        let catalog_path = dir.join("catalog");
        let bytes = match fs::read(&catalog_path) {
            Ok(b) => b,
            Err(_) => return Err(Error::NotADatabase(dir.to_path_buf())),
        };
        let persisted = decode_catalog(&bytes)?;

        let mut contents: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
        for (rel, expected) in &persisted.files {
            let data = fs::read(dir.join(rel))
                .map_err(|e| Error::corrupt(rel.clone(), format!("unreadable: {e}")))?;
            if &sha256_hex(&data) != expected {
                return Err(Error::corrupt(rel.clone(), "checksum mismatch"));
            }
            contents.insert(rel, data);
        }

        let dict = decode_dict(
            contents
                .get("dict")
                .ok_or_else(|| Error::corrupt("dict", "missing from manifest"))?,
        )?;
        if dict.len() as u64 != persisted.catalog.dict_len {
            return Err(Error::corrupt("dict", "entry count disagrees with catalog"));
        }
        let ecs = decode_ecs(
            contents
                .get("ecs.idx")
                .ok_or_else(|| Error::corrupt("ecs.idx", "missing from manifest"))?,
        )?;

        let mut tables = Vec::with_capacity(persisted.catalog.tables.len());
        for meta in &persisted.catalog.tables {
            let base = format!("tables/{}", meta.id.0);
            let subj_rel = format!("{base}/subject.bin");
            let subjects = decode_subjects(
                contents
                    .get(subj_rel.as_str())
                    .ok_or_else(|| Error::corrupt(&subj_rel, "missing from manifest"))?,
                &subj_rel,
            )?;
            if subjects.len() as u64 != meta.row_count {
                return Err(Error::corrupt(&subj_rel, "row count disagrees with catalog"));
            }
            let mut rows: Vec<Row> = subjects
                .into_iter()
                .map(|subject| Row {
                    subject,
                    cells: Vec::with_capacity(meta.columns.len()),
                })
                .collect();
            for p in meta.columns.iter() {
                let rel = format!("{base}/{}.bin", p.0);
                let cells = decode_column(
                    contents
                        .get(rel.as_str())
                        .ok_or_else(|| Error::corrupt(&rel, "missing from manifest"))?,
                    meta.row_count as usize,
                    &rel,
                )?;
                for (row, cell) in rows.iter_mut().zip(cells) {
                    row.cells.push(cell);
                }
            }
            tables.push(MergedTable {
                id: meta.id,
                columns: meta.columns.clone(),
                multi_valued: meta.multi_valued.clone(),
                rows,
                provenance: meta.provenance.clone(),
            });
        }

        let subject_index = build_subject_index(&tables);
        Ok(Database {
            dict,
            catalog: persisted.catalog,
            tables,
            ecs,
            subject_index,
        })
    }
}

fn decode_catalog(bytes: &[u8]) -> Result<PersistedCatalog> {
    let mut r = Reader::new(bytes, "catalog");
    let magic = r.take(5)?;
    if magic != MAGIC_CATALOG {
        return Err(Error::NotADatabase(PathBuf::from("catalog")));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            file: "catalog".into(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let len = r.u64()? as usize;
    let payload = r.take(len)?;
    let digest = r.take(32)?;
    if digest != Sha256::digest(payload).as_slice() {
        return Err(Error::corrupt("catalog", "checksum mismatch"));
    }
    serde_json::from_slice(payload)
        .map_err(|e| Error::corrupt("catalog", format!("bad payload: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn header(magic: &[u8; 5]) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes
}

fn encode_dict(dict: &Dictionary) -> Vec<u8> {
    let mut bytes = header(MAGIC_DICT);
    bytes.extend_from_slice(&(dict.len() as u64).to_le_bytes());
    for term in dict.terms() {
        let (kind, lexical) = match term {
            Term::Iri(s) => (0u8, s),
            Term::Literal(s) => (1u8, s),
            Term::BlankNode(s) => (2u8, s),
        };
        bytes.push(kind);
        bytes.extend_from_slice(&(lexical.len() as u32).to_le_bytes());
        bytes.extend_from_slice(lexical.as_bytes());
    }
    bytes
}

fn decode_dict(bytes: &[u8]) -> Result<Dictionary> {
    let mut r = Reader::with_header(bytes, MAGIC_DICT, "dict")?;
    let count = r.u64()? as usize;
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        let kind = r.u8()?;
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::corrupt("dict", "invalid utf-8 term"))?
            .to_owned();
        terms.push(match kind {
            0 => Term::Iri(text),
            1 => Term::Literal(text),
            2 => Term::BlankNode(text),
            other => {
                return Err(Error::corrupt("dict", format!("unknown term kind {other}")))
            }
        });
    }
    r.expect_end()?;
    Ok(Dictionary::from_terms(terms))
}

fn encode_ecs(ecs: &EcsIndex) -> Vec<u8> {
    let mut bytes = header(MAGIC_ECS);
    bytes.extend_from_slice(&(ecs.len() as u64).to_le_bytes());
    for (from, p, to) in ecs.links() {
        bytes.extend_from_slice(&from.0.to_le_bytes());
        bytes.extend_from_slice(&p.0.to_le_bytes());
        bytes.extend_from_slice(&to.0.to_le_bytes());
    }
    bytes
}

fn decode_ecs(bytes: &[u8]) -> Result<EcsIndex> {
    let mut r = Reader::with_header(bytes, MAGIC_ECS, "ecs.idx")?;
    let count = r.u64()?;
    let mut links = std::collections::BTreeSet::new();
    for _ in 0..count {
        let from = TableId(r.u32()?);
        let p = TermId(r.u32()?);
        let to = TableId(r.u32()?);
        links.insert((from, p, to));
    }
    r.expect_end()?;
    Ok(EcsIndex::from_links(links))
}

fn encode_subjects(table: &MergedTable) -> Vec<u8> {
    let mut bytes = header(MAGIC_SUBJECT);
    bytes.extend_from_slice(&(table.rows.len() as u64).to_le_bytes());
    for row in &table.rows {
        bytes.extend_from_slice(&row.subject.0.to_le_bytes());
    }
    bytes
}

fn decode_subjects(bytes: &[u8], file: &str) -> Result<Vec<TermId>> {
    let mut r = Reader::with_header(bytes, MAGIC_SUBJECT, file)?;
    let count = r.u64()? as usize;
    let mut subjects = Vec::with_capacity(count);
    for _ in 0..count {
        subjects.push(TermId(r.u32()?));
    }
    r.expect_end()?;
    Ok(subjects)
}

/// Column layout: row count, NULL bitmap (bit set = value present),
/// then for each present cell a varint length and that many ids.
fn encode_column(table: &MergedTable, col: usize) -> Vec<u8> {
    let mut bytes = header(MAGIC_COLUMN);
    bytes.extend_from_slice(&(table.rows.len() as u64).to_le_bytes());
    let mut bitmap = vec![0u8; table.rows.len().div_ceil(8)];
    for (i, row) in table.rows.iter().enumerate() {
        if row.cells[col].is_some() {
            bitmap[i / 8] |= 1 << (i % 8);
        }
    }
    bytes.extend_from_slice(&bitmap);
    for row in &table.rows {
        if let Some(values) = &row.cells[col] {
            write_varint(&mut bytes, values.len() as u64);
            for v in values {
                bytes.extend_from_slice(&v.0.to_le_bytes());
            }
        }
    }
    bytes
}

fn decode_column(
    bytes: &[u8],
    row_count: usize,
    file: &str,
) -> Result<Vec<Option<Vec<TermId>>>> {
    let mut r = Reader::with_header(bytes, MAGIC_COLUMN, file)?;
    let stored = r.u64()? as usize;
    if stored != row_count {
        return Err(Error::corrupt(file, "row count disagrees with catalog"));
    }
    let bitmap = r.take(row_count.div_ceil(8))?.to_vec();
    let mut cells = Vec::with_capacity(row_count);
    for i in 0..row_count {
        if bitmap[i / 8] & (1 << (i % 8)) == 0 {
            cells.push(None);
            continue;
        }
        let len = r.varint()?;
        if len == 0 {
            return Err(Error::corrupt(file, "empty value list"));
        }
        let mut values = Vec::with_capacity(len as usize);
        for _ in 0..len {
            values.push(TermId(r.u32()?));
        }
        cells.push(Some(values));
    }
    r.expect_end()?;
    Ok(cells)
}

fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: String,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], file: &str) -> Self {
        Reader {
            bytes,
            pos: 0,
            file: file.to_owned(),
        }
    }

    fn with_header(bytes: &'a [u8], magic: &[u8; 5], file: &str) -> Result<Self> {
        let mut r = Reader::new(bytes, file);
        if r.take(5)? != magic {
            return Err(Error::corrupt(file, "bad magic"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                file: file.to_owned(),
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::corrupt(&self.file, "truncated"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        let mut shift = 0;
        loop {
            let byte = self.u8()?;
            value |= ((byte & 0x7f) as u64) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
            if shift >= 64 {
                return Err(Error::corrupt(&self.file, "varint overflow"));
            }
        }
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::corrupt(&self.file, "trailing bytes"));
        }
        Ok(())
    }
}
