//! Schema catalog: tables, typed columns with statistics, indexes and
//! foreign keys, persisted in a line-oriented text format.
//!
//! ```text
//! # treecost schema v1
//! table title rows=10000
//! column title.id int min=0 max=9999 ndv=10000
//! column title.name str ndv=812
//! index title_pkey title.id
//! fk movie_info.movie_id title.id
//! ```
//!
//! Column names are always qualified as `table.column`. Feature widths are
//! derived from the catalog order, so reloading the same file yields the
//! same encodings.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Float,
    Str,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnType::Str)
    }

    fn keyword(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::Str => "str",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnInfo {
    /// Qualified `table.column` name.
    pub name: String,
    pub table: String,
    pub ty: ColumnType,
    pub min: f64,
    pub max: f64,
    pub ndv: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableInfo {
    pub name: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexInfo {
    pub name: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForeignKey {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaCatalog {
    pub tables: Vec<TableInfo>,
    pub columns: Vec<ColumnInfo>,
    pub indexes: Vec<IndexInfo>,
    pub foreign_keys: Vec<ForeignKey>,
    table_pos: HashMap<String, usize>,
    column_pos: HashMap<String, usize>,
    index_pos: HashMap<String, usize>,
}

impl SchemaCatalog {
    pub fn new(
        tables: Vec<TableInfo>,
        columns: Vec<ColumnInfo>,
        indexes: Vec<IndexInfo>,
        foreign_keys: Vec<ForeignKey>,
    ) -> Self {
        let mut cat = SchemaCatalog {
            tables,
            columns,
            indexes,
            foreign_keys,
            ..Default::default()
        };
        cat.reindex();
        cat
    }

    fn reindex(&mut self) {
        self.table_pos = self.tables.iter().enumerate().map(|(i, t)| (t.name.clone(), i)).collect();
        self.column_pos = self.columns.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        self.index_pos = self.indexes.iter().enumerate().map(|(i, x)| (x.name.clone(), i)).collect();
    }

    pub fn table_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.table_pos
            .get(name)
            .copied()
            .ok_or_else(|| SchemaError::UnknownTable(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.column_pos
            .get(name)
            .copied()
            .ok_or_else(|| SchemaError::UnknownColumn(name.to_string()))
    }

    pub fn index_index(&self, name: &str) -> Result<usize, SchemaError> {
        self.index_pos
            .get(name)
            .copied()
            .ok_or_else(|| SchemaError::UnknownIndex(name.to_string()))
    }

    pub fn table(&self, name: &str) -> Result<&TableInfo, SchemaError> {
        Ok(&self.tables[self.table_index(name)?])
    }

    pub fn column(&self, name: &str) -> Result<&ColumnInfo, SchemaError> {
        Ok(&self.columns[self.column_index(name)?])
    }

    pub fn columns_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ColumnInfo> + 'a {
        self.columns.iter().filter(move |c| c.table == table)
    }

    pub fn indexes_on(&self, column: &str) -> impl Iterator<Item = &IndexInfo> {
        let column = column.to_string();
        self.indexes.iter().filter(move |i| i.column == column)
    }

    /// Width of the metadata bitmap: tables, then columns, then indexes.
    pub fn meta_width(&self) -> usize {
        self.tables.len() + self.columns.len() + self.indexes.len()
    }

    /// Foreign keys linking two tables, in either direction.
    pub fn join_keys(&self, a: &str, b: &str) -> Option<(&str, &str)> {
        self.foreign_keys.iter().find_map(|fk| {
            let ft = fk.from.split_once('.')?.0;
            let tt = fk.to.split_once('.')?.0;
            if ft == a && tt == b {
                Some((fk.from.as_str(), fk.to.as_str()))
            } else if ft == b && tt == a {
                Some((fk.to.as_str(), fk.from.as_str()))
            } else {
                None
            }
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# treecost schema v1\n");
        for t in &self.tables {
            writeln!(out, "table {} rows={}", t.name, t.rows).unwrap();
        }
        for c in &self.columns {
            if c.ty.is_numeric() {
                writeln!(
                    out,
                    "column {} {} min={} max={} ndv={}",
                    c.name,
                    c.ty.keyword(),
                    c.min,
                    c.max,
                    c.ndv
                )
                .unwrap();
            } else {
                writeln!(out, "column {} str ndv={}", c.name, c.ndv).unwrap();
            }
        }
        for i in &self.indexes {
            writeln!(out, "index {} {}", i.name, i.column).unwrap();
        }
        for fk in &self.foreign_keys {
            writeln!(out, "fk {} {}", fk.from, fk.to).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let mut tables = Vec::new();
        let mut columns = Vec::new();
        let mut indexes = Vec::new();
        let mut fks = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SchemaError::Parse {
                line: lineno + 1,
                message,
            };
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap();
            let rest: Vec<&str> = words.collect();
            let attrs = |from: usize| -> Result<HashMap<&str, &str>, SchemaError> {
                rest[from..]
                    .iter()
                    .map(|kv| kv.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{kv}`"))))
                    .collect()
            };
            let num = |attrs: &HashMap<&str, &str>, key: &str| -> Result<f64, SchemaError> {
                attrs
                    .get(key)
                    .ok_or_else(|| err(format!("missing `{key}`")))?
                    .parse::<f64>()
                    .map_err(|e| err(format!("bad `{key}`: {e}")))
            };
            match keyword {
                "table" => {
                    let name = rest.first().ok_or_else(|| err("table without name".into()))?;
                    let a = attrs(1)?;
                    tables.push(TableInfo {
                        name: name.to_string(),
                        rows: num(&a, "rows")? as usize,
                    });
                }
                "column" => {
                    if rest.len() < 2 {
                        return Err(err("column needs a name and a type".into()));
                    }
                    let name = rest[0];
                    let (table, _) = name
                        .split_once('.')
                        .ok_or_else(|| err(format!("column `{name}` is not qualified")))?;
                    let ty = match rest[1] {
                        "int" => ColumnType::Int,
                        "float" => ColumnType::Float,
                        "str" => ColumnType::Str,
                        other => return Err(err(format!("unknown column type `{other}`"))),
                    };
                    let a = attrs(2)?;
                    let (min, max) = if ty.is_numeric() {
                        (num(&a, "min")?, num(&a, "max")?)
                    } else {
                        (0.0, 0.0)
                    };
                    columns.push(ColumnInfo {
                        name: name.to_string(),
                        table: table.to_string(),
                        ty,
                        min,
                        max,
                        ndv: num(&a, "ndv")? as usize,
                    });
                }
                "index" => {
                    if rest.len() != 2 {
                        return Err(err("index needs a name and a column".into()));
                    }
                    indexes.push(IndexInfo {
                        name: rest[0].to_string(),
                        column: rest[1].to_string(),
                    });
                }
                "fk" => {
                    if rest.len() != 2 {
                        return Err(err("fk needs two columns".into()));
                    }
                    fks.push(ForeignKey {
                        from: rest[0].to_string(),
                        to: rest[1].to_string(),
                    });
                }
                other => return Err(err(format!("unknown entry `{other}`"))),
            }
        }
        let cat = SchemaCatalog::new(tables, columns, indexes, fks);
        for c in &cat.columns {
            cat.table_index(&c.table)?;
        }
        for i in &cat.indexes {
            cat.column_index(&i.column)?;
        }
        for fk in &cat.foreign_keys {
            cat.column_index(&fk.from)?;
            cat.column_index(&fk.to)?;
        }
        Ok(cat)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), SchemaError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# demo\n\
        table a rows=10\n\
        table b rows=5\n\
        column a.id int min=0 max=9 ndv=10\n\
        column a.s str ndv=3\n\
        column b.a_id int min=0 max=9 ndv=5\n\
        column b.x float min=-1.5 max=2.25 ndv=5\n\
        index a_pkey a.id\n\
        fk b.a_id a.id\n";

    #[test]
    fn text_round_trip() {
        let cat = SchemaCatalog::parse(TEXT).unwrap();
        assert_eq!(cat.tables.len(), 2);
        assert_eq!(cat.columns.len(), 4);
        assert_eq!(cat.meta_width(), 2 + 4 + 1);
        assert_eq!(cat.column("b.x").unwrap().min, -1.5);
        let again = SchemaCatalog::parse(&cat.to_text()).unwrap();
        assert_eq!(again, cat);
    }

    #[test]
    fn join_keys_either_direction() {
        let cat = SchemaCatalog::parse(TEXT).unwrap();
        assert_eq!(cat.join_keys("a", "b"), Some(("a.id", "b.a_id")));
        assert_eq!(cat.join_keys("b", "a"), Some(("b.a_id", "a.id")));
        assert_eq!(cat.join_keys("a", "a"), None);
    }

    #[test]
    fn rejects_dangling_references() {
        assert!(matches!(
            SchemaCatalog::parse("table a rows=1\nindex i a.nope\n"),
            Err(SchemaError::UnknownColumn(_))
        ));
        assert!(matches!(
            SchemaCatalog::parse("table a rows=1\ncolumn a.x blob ndv=1\n"),
            Err(SchemaError::Parse { line: 2, .. })
        ));
    }
}
