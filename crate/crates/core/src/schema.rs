//! Declared table schemas and the typed columnar table they validate into.
//!
//! A schema is the authority for column kinds and category vocabularies; no
//! type inference happens downstream of it.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Continuous => write!(f, "continuous"),
            ColumnKind::Ordinal => write!(f, "ordinal"),
            ColumnKind::Categorical => write!(f, "categorical"),
        }
    }
}

/// One declared column: a name, a kind, and (for discrete kinds) the ordered
/// list of admissible levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Category vocabulary (categorical) or ordered level list (ordinal).
    /// Empty for continuous columns.
    #[serde(default)]
    pub levels: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
            levels: Vec::new(),
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Ordinal,
            levels,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            levels,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind != ColumnKind::Continuous
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("column name must be nonempty".into()));
        }
        match self.kind {
            ColumnKind::Continuous => {
                if !self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "continuous column '{}' must not declare levels",
                        self.name
                    )));
                }
            }
            ColumnKind::Ordinal | ColumnKind::Categorical => {
                if self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "{} column '{}' must declare at least one level",
                        self.kind, self.name
                    )));
                }
                let mut seen = HashSet::new();
                for level in &self.levels {
                    if !seen.insert(level.as_str()) {
                        return Err(Error::Schema(format!(
                            "column '{}' repeats level '{}'",
                            self.name, level
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
    /// Optional prediction target; must name a declared column.
    #[serde(default)]
    pub target: Option<String>,
    /// Columns excluded before analysis regardless of their associations.
    #[serde(default)]
    pub drop_list: Vec<String>,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = TableSchema {
            columns,
            target: None,
            drop_list: Vec::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Result<Self> {
        self.target = Some(target.into());
        self.validate()?;
        Ok(self)
    }

    pub fn with_drop_list(mut self, drop_list: Vec<String>) -> Result<Self> {
        self.drop_list = drop_list;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        let mut names = HashSet::new();
        for col in &self.columns {
            col.validate()?;
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", col.name)));
            }
        }
        if let Some(target) = &self.target {
            if !names.contains(target.as_str()) {
                return Err(Error::Schema(format!(
                    "target '{target}' does not name a declared column"
                )));
            }
        }
        for name in &self.drop_list {
            if !names.contains(name.as_str()) {
                return Err(Error::Schema(format!(
                    "drop list entry '{name}' does not name a declared column"
                )));
            }
        }
        Ok(())
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Parses the flat `key: value` schema document.
    ///
    /// Recognised keys: `name`, `kind`, `levels`, `target`, `drop`. A `name`
    /// line opens a new column; `kind` and `levels` attach to the most recent
    /// one. Level lists are comma separated, entries trimmed. Lines starting
    /// with `#` and blank lines are ignored. `=` is accepted in place of `:`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<ColumnSpec> = Vec::new();
        let mut target = None;
        let mut drop_list = Vec::new();
        let mut pending: Option<(String, Option<ColumnKind>, Vec<String>)> = None;

        fn flush(
            pending: &mut Option<(String, Option<ColumnKind>, Vec<String>)>,
            columns: &mut Vec<ColumnSpec>,
        ) -> Result<()> {
            if let Some((name, kind, levels)) = pending.take() {
                let kind = kind.ok_or_else(|| {
                    Error::Schema(format!("column '{name}' is missing a 'kind' line"))
                })?;
                columns.push(ColumnSpec { name, kind, levels });
            }
            Ok(())
        }

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let sep = line.find([':', '=']).ok_or_else(|| {
                Error::Schema(format!("line {}: expected 'key: value'", lineno + 1))
            })?;
            let key = line[..sep].trim();
            let value = line[sep + 1..].trim();
            match key {
                "name" => {
                    flush(&mut pending, &mut columns)?;
                    pending = Some((value.to_string(), None, Vec::new()));
                }
                "kind" => {
                    let kind = match value {
                        "continuous" => ColumnKind::Continuous,
                        "ordinal" => ColumnKind::Ordinal,
                        "categorical" => ColumnKind::Categorical,
                        other => {
                            return Err(Error::Schema(format!(
                                "line {}: unknown kind '{other}'",
                                lineno + 1
                            )))
                        }
                    };
                    match pending.as_mut() {
                        Some(p) => p.1 = Some(kind),
                        None => {
                            return Err(Error::Schema(format!(
                                "line {}: 'kind' before any 'name'",
                                lineno + 1
                            )))
                        }
                    }
                }
                "levels" => {
                    let levels: Vec<String> =
                        value.split(',').map(|s| s.trim().to_string()).collect();
                    match pending.as_mut() {
                        Some(p) => p.2 = levels,
                        None => {
                            return Err(Error::Schema(format!(
                                "line {}: 'levels' before any 'name'",
                                lineno + 1
                            )))
                        }
                    }
                }
                "target" => target = Some(value.to_string()),
                "drop" => {
                    drop_list.extend(value.split(',').map(|s| s.trim().to_string()));
                }
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        flush(&mut pending, &mut columns)?;

        let schema = TableSchema {
            columns,
            target,
            drop_list,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Renders the schema back into the flat document format `parse` accepts.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        if let Some(target) = &self.target {
            out.push_str(&format!("target: {target}\n"));
        }
        if !self.drop_list.is_empty() {
            out.push_str(&format!("drop: {}\n", self.drop_list.join(", ")));
        }
        for col in &self.columns {
            out.push_str(&format!("name: {}\nkind: {}\n", col.name, col.kind));
            if !col.levels.is_empty() {
                out.push_str(&format!("levels: {}\n", col.levels.join(", ")));
            }
        }
        out
    }
}

/// Backing storage for one column of a validated table.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<f64>),
    /// Ordinal or categorical level codes indexing the spec's `levels`.
    Codes(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Codes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated, immutable columnar table. Every stored value conforms to the
/// schema: continuous values are finite f64s, discrete values are codes into
/// the declared level list.
#[derive(Debug, Clone)]
pub struct ColumnTable {
    schema: TableSchema,
    n_rows: usize,
    columns: Vec<ColumnData>,
}

impl ColumnTable {
    pub fn new(schema: TableSchema, columns: Vec<ColumnData>) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.columns.len() {
            return Err(Error::Schema(format!(
                "expected {} columns of data, got {}",
                schema.columns.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, ColumnData::len);
        for (spec, data) in schema.columns.iter().zip(&columns) {
            if data.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column '{}' has {} values, expected {}",
                    spec.name,
                    data.len(),
                    n_rows
                )));
            }
            match (spec.kind, data) {
                (ColumnKind::Continuous, ColumnData::Continuous(v)) => {
                    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                        return Err(Error::Schema(format!(
                            "column '{}' holds non-finite value {bad}",
                            spec.name
                        )));
                    }
                }
                (ColumnKind::Ordinal | ColumnKind::Categorical, ColumnData::Codes(v)) => {
                    let card = spec.levels.len() as u32;
                    if let Some(bad) = v.iter().find(|&&c| c >= card) {
                        return Err(Error::Schema(format!(
                            "column '{}' holds code {bad} outside its {card}-level vocabulary",
                            spec.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column '{}' storage does not match its declared kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(ColumnTable {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, index: usize) -> &ColumnData {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<(&ColumnSpec, &ColumnData)> {
        let idx = self.schema.column_index(name)?;
        Some((&self.schema.columns[idx], &self.columns[idx]))
    }

    pub fn spec(&self, index: usize) -> &ColumnSpec {
        &self.schema.columns[index]
    }

    /// Continuous values of the named column, if it is continuous.
    pub fn continuous_values(&self, name: &str) -> Option<&[f64]> {
        match self.column_by_name(name)? {
            (spec, ColumnData::Continuous(v)) if spec.kind == ColumnKind::Continuous => Some(v),
            _ => None,
        }
    }

    /// New table holding the given rows (indices may repeat).
    pub fn gather_rows(&self, indices: &[usize]) -> ColumnTable {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                ColumnData::Continuous(v) => {
                    ColumnData::Continuous(indices.iter().map(|&i| v[i]).collect())
                }
                ColumnData::Codes(v) => ColumnData::Codes(indices.iter().map(|&i| v[i]).collect()),
            })
            .collect();
        ColumnTable {
            schema: self.schema.clone(),
            n_rows: indices.len(),
            columns,
        }
    }

    /// New table without the named columns. Target and drop-list references to
    /// removed columns are cleared.
    pub fn drop_columns(&self, names: &[String]) -> Result<ColumnTable> {
        let removed: HashSet<&str> = names.iter().map(String::as_str).collect();
        let mut columns = Vec::new();
        let mut specs = Vec::new();
        for (spec, data) in self.schema.columns.iter().zip(&self.columns) {
            if !removed.contains(spec.name.as_str()) {
                specs.push(spec.clone());
                columns.push(data.clone());
            }
        }
        if specs.is_empty() {
            return Err(Error::Schema("dropping all columns leaves an empty schema".into()));
        }
        let target = self
            .schema
            .target
            .clone()
            .filter(|t| !removed.contains(t.as_str()));
        let drop_list = self
            .schema
            .drop_list
            .iter()
            .filter(|d| !removed.contains(d.as_str()))
            .cloned()
            .collect();
        ColumnTable::new(
            TableSchema {
                columns: specs,
                target,
                drop_list,
            },
            columns,
        )
    }

    /// The value at (row, col) rendered as it would appear in a CSV cell.
    pub fn cell_display(&self, row: usize, col: usize) -> String {
        match (&self.schema.columns[col], &self.columns[col]) {
            (_, ColumnData::Continuous(v)) => format!("{}", v[row]),
            (spec, ColumnData::Codes(v)) => spec.levels[v[row] as usize].clone(),
        }
    }

    /// Serializes the table to CSV with a header row. Round-trips through
    /// `ingest::parse_and_validate` without rejections.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))
            .expect("csv write");
        for row in 0..self.n_rows {
            let record: Vec<String> = (0..self.columns.len())
                .map(|col| self.cell_display(row, col))
                .collect();
            w.write_record(&record).expect("csv write");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
    }
}
