//! Column-oriented tables, their binary file format and per-table samples.
//!
//! File layout (little endian):
//!
//! ```text
//! magic "TCTB" | version u32 | name (u32 len + utf8)
//! sample_size u64 | seed u64 | rows u64 | ncols u32
//! per column: name (u32 len + utf8) | type u8 (0 int, 1 float, 2 str) | values
//!   int: i64 * rows, float: f64 * rows, str: (u32 len + utf8) * rows
//! if sample_size > 0: source row ids, u64 * rows
//! ```
//!
//! Full tables store `sample_size = 0` and no row ids.

use std::collections::{HashMap, HashSet};
use std::io::{self, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::plan::{Predicate, Value};
use crate::schema::{ColumnInfo, ColumnType, ForeignKey, IndexInfo, SchemaCatalog, SchemaError, TableInfo};

const MAGIC: &[u8; 4] = b"TCTB";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("corrupt table file: {0}")]
    Corrupt(String),
    #[error("no table `{0}` in dataset")]
    MissingTable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Str(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ty(&self) -> ColumnType {
        match self {
            ColumnData::Int(_) => ColumnType::Int,
            ColumnData::Float(_) => ColumnType::Float,
            ColumnData::Str(_) => ColumnType::Str,
        }
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match self {
            ColumnData::Int(v) => Value::Num(v[row] as f64),
            ColumnData::Float(v) => Value::Num(v[row]),
            ColumnData::Str(v) => Value::Str(&v[row]),
        }
    }

    /// Numeric view; `None` for strings.
    pub fn as_f64(&self, row: usize) -> Option<f64> {
        match self {
            ColumnData::Int(v) => Some(v[row] as f64),
            ColumnData::Float(v) => Some(v[row]),
            ColumnData::Str(_) => None,
        }
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Int(v) => ColumnData::Int(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Float(v) => ColumnData::Float(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Str(v) => ColumnData::Str(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    /// Qualified `table.column` name.
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Table {
            name: name.into(),
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_pos(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn value(&self, col: usize, row: usize) -> Value<'_> {
        self.columns[col].data.value(row)
    }

    /// Evaluates a single-table predicate on one row.
    pub fn matches(&self, p: &Predicate, row: usize) -> bool {
        p.eval(&|name: &str| self.column(name).map(|c| c.data.value(row)))
    }

    /// Rows satisfying `p` (all rows when `p` is `None`).
    pub fn filter(&self, p: Option<&Predicate>) -> Vec<usize> {
        match p {
            None => (0..self.rows()).collect(),
            Some(p) => {
                // Resolve column positions once.
                let index: HashMap<&str, usize> =
                    self.columns.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
                (0..self.rows())
                    .filter(|&row| {
                        p.eval(&|name: &str| index.get(name).map(|&i| self.columns[i].data.value(row)))
                    })
                    .collect()
            }
        }
    }

    pub fn take(&self, rows: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W, sample: Option<(&SampleHeader, &[u32])>) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(w, &self.name)?;
        let (size, seed) = sample.map_or((0, 0), |(h, _)| (h.sample_size as u64, h.seed));
        w.write_all(&size.to_le_bytes())?;
        w.write_all(&seed.to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.columns.len() as u32).to_le_bytes())?;
        for c in &self.columns {
            write_str(w, &c.name)?;
            match &c.data {
                ColumnData::Int(v) => {
                    w.write_all(&[0])?;
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                ColumnData::Float(v) => {
                    w.write_all(&[1])?;
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                ColumnData::Str(v) => {
                    w.write_all(&[2])?;
                    for x in v {
                        write_str(w, x)?;
                    }
                }
            }
        }
        if let Some((_, ids)) = sample {
            for id in ids {
                w.write_all(&(*id as u64).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<(Table, Option<(SampleHeader, Vec<u32>)>), DataError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DataError::Corrupt("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(DataError::Corrupt(format!("unsupported version {version}")));
        }
        let name = read_str(r)?;
        let sample_size = read_u64(r)? as usize;
        let seed = read_u64(r)?;
        let rows = read_u64(r)? as usize;
        let ncols = read_u32(r)? as usize;
        let mut columns = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            let cname = read_str(r)?;
            let mut ty = [0u8; 1];
            r.read_exact(&mut ty)?;
            let data = match ty[0] {
                0 => ColumnData::Int((0..rows).map(|_| read_u64(r).map(|x| x as i64)).collect::<Result<_, _>>()?),
                1 => ColumnData::Float(
                    (0..rows)
                        .map(|_| read_u64(r).map(f64::from_bits))
                        .collect::<Result<_, _>>()?,
                ),
                2 => ColumnData::Str((0..rows).map(|_| read_str(r)).collect::<Result<_, _>>()?),
                t => return Err(DataError::Corrupt(format!("unknown column type tag {t}"))),
            };
            columns.push(Column { name: cname, data });
        }
        let table = Table { name, columns };
        let sample = if sample_size > 0 {
            let ids = (0..rows).map(|_| read_u64(r).map(|x| x as u32)).collect::<Result<_, _>>()?;
            Some((SampleHeader { sample_size, seed }, ids))
        } else {
            None
        };
        Ok((table, sample))
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, DataError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| DataError::Corrupt(e.to_string()))
}

/// A schema plus the rows of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub catalog: SchemaCatalog,
    pub tables: Vec<Table>,
}

impl Dataset {
    /// Builds the catalog (row counts, min/max, distinct counts) from data.
    pub fn from_tables(tables: Vec<Table>, indexes: Vec<IndexInfo>, foreign_keys: Vec<ForeignKey>) -> Self {
        let infos = tables
            .iter()
            .map(|t| TableInfo {
                name: t.name.clone(),
                rows: t.rows(),
            })
            .collect();
        let mut columns = Vec::new();
        for t in &tables {
            for c in &t.columns {
                columns.push(column_stats(&t.name, c));
            }
        }
        Dataset {
            catalog: SchemaCatalog::new(infos, columns, indexes, foreign_keys),
            tables,
        }
    }

    pub fn table(&self, name: &str) -> Result<&Table, DataError> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| DataError::MissingTable(name.to_string()))
    }

    /// Writes `schema.txt` and one `<table>.tbl` per table.
    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir)?;
        self.catalog.save(&dir.join("schema.txt"))?;
        for t in &self.tables {
            let mut f = io::BufWriter::new(std::fs::File::create(dir.join(format!("{}.tbl", t.name)))?);
            t.write_to(&mut f, None)?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let catalog = SchemaCatalog::load(&dir.join("schema.txt"))?;
        let mut tables = Vec::new();
        for info in &catalog.tables {
            let mut f = io::BufReader::new(std::fs::File::open(dir.join(format!("{}.tbl", info.name)))?);
            tables.push(Table::read_from(&mut f)?.0);
        }
        Ok(Dataset { catalog, tables })
    }

    /// Every string value of every string column, table by table.
    pub fn string_values(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().flat_map(|t| {
            t.columns.iter().flat_map(|c| match &c.data {
                ColumnData::Str(v) => v.iter().map(String::as_str).collect::<Vec<_>>(),
                _ => Vec::new(),
            })
        })
    }
}

fn column_stats(table: &str, c: &Column) -> ColumnInfo {
    let (min, max, ndv) = match &c.data {
        ColumnData::Int(v) => {
            let ndv = v.iter().collect::<HashSet<_>>().len();
            let min = v.iter().copied().min().unwrap_or(0) as f64;
            let max = v.iter().copied().max().unwrap_or(0) as f64;
            (min, max, ndv)
        }
        ColumnData::Float(v) => {
            let ndv = v.iter().map(|x| x.to_bits()).collect::<HashSet<_>>().len();
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if v.is_empty() {
                (0.0, 0.0, 0)
            } else {
                (min, max, ndv)
            }
        }
        ColumnData::Str(v) => (0.0, 0.0, v.iter().collect::<HashSet<_>>().len()),
    };
    ColumnInfo {
        name: c.name.clone(),
        table: table.to_string(),
        ty: c.data.ty(),
        min,
        max,
        ndv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleHeader {
    pub sample_size: usize,
    pub seed: u64,
}

/// A fixed uniform sample of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSample {
    pub header: SampleHeader,
    pub rows: Table,
    /// Source row of each sampled row.
    pub row_ids: Vec<u32>,
}

/// Per-table samples of at most `sample_size` rows, drawn without
/// replacement from a seeded generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub sample_size: usize,
    pub seed: u64,
    samples: Vec<TableSample>,
}

impl SampleStore {
    pub fn draw(ds: &Dataset, sample_size: usize, seed: u64) -> Self {
        let samples = ds
            .tables
            .iter()
            .enumerate()
            .map(|(i, t)| {
                // One stream per table so adding a table does not reshuffle others.
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64 * 0x9E37_79B9));
                let n = t.rows();
                let mut ids: Vec<usize> = if n <= sample_size {
                    (0..n).collect()
                } else {
                    sample(&mut rng, n, sample_size).into_vec()
                };
                ids.sort_unstable();
                TableSample {
                    header: SampleHeader { sample_size, seed },
                    rows: t.take(&ids),
                    row_ids: ids.into_iter().map(|x| x as u32).collect(),
                }
            })
            .collect();
        SampleStore {
            sample_size,
            seed,
            samples,
        }
    }

    pub fn get(&self, table: &str) -> Option<&TableSample> {
        self.samples.iter().find(|s| s.rows.name == table)
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableSample> {
        self.samples.iter()
    }

    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir)?;
        for s in &self.samples {
            let mut f = io::BufWriter::new(std::fs::File::create(dir.join(format!("{}.smp", s.rows.name)))?);
            s.rows.write_to(&mut f, Some((&s.header, &s.row_ids)))?;
            f.flush()?;
        }
        Ok(())
    }

    /// Loads the samples for every table in `catalog`.
    pub fn load(dir: &Path, catalog: &SchemaCatalog) -> Result<Self, DataError> {
        let mut samples = Vec::new();
        for info in &catalog.tables {
            let mut f = io::BufReader::new(std::fs::File::open(dir.join(format!("{}.smp", info.name)))?);
            let (rows, meta) = Table::read_from(&mut f)?;
            let (header, row_ids) = meta.ok_or_else(|| DataError::Corrupt(format!("{} is not a sample", info.name)))?;
            samples.push(TableSample { header, rows, row_ids });
        }
        let (sample_size, seed) = samples
            .first()
            .map_or((0, 0), |s| (s.header.sample_size, s.header.seed));
        Ok(SampleStore {
            sample_size,
            seed,
            samples,
        })
    }
}
