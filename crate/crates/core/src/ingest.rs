//! CSV ingestion: validation and cleaning under a declared schema, encodings,
//! train/test splitting, and the bootstrap-resample baseline generator.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::dependence::{self, EffectSizeDf};
use crate::error::{Error, Result};
use crate::schema::{ColumnData, ColumnKind, ColumnSpec, ColumnTable, TableSchema};

/// Why a row was rejected. Checked in this order; the first failing class
/// wins, so a row gets exactly one reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    WrongFieldCount,
    HeaderEcho,
    CoercionFailure,
    UnknownCategory,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::WrongFieldCount => write!(f, "wrong_field_count"),
            RejectReason::HeaderEcho => write!(f, "header_echo"),
            RejectReason::CoercionFailure => write!(f, "coercion_failure"),
            RejectReason::UnknownCategory => write!(f, "unknown_category"),
        }
    }
}

/// Accounting of what cleaning did to an input file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RejectionLog {
    pub n_input: usize,
    pub n_dropped: usize,
    pub n_remaining: usize,
    pub reasons: BTreeMap<RejectReason, usize>,
}

impl RejectionLog {
    fn record(&mut self, reason: RejectReason) {
        self.n_dropped += 1;
        *self.reasons.entry(reason).or_insert(0) += 1;
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.reasons.get(&reason).copied().unwrap_or(0)
    }
}

struct ColumnBuilder {
    spec_index: usize,
    data: ColumnData,
    level_codes: HashMap<String, u32>,
}

/// Scans a CSV byte stream against a schema, returning the retained table
/// (possibly empty) and the rejection log. Field values are trimmed before
/// coercion. A first record whose trimmed fields equal the schema's column
/// names is consumed as the header and not counted as input.
pub fn scan_csv(source: impl Read, schema: &TableSchema) -> Result<(ColumnTable, RejectionLog)> {
    schema.validate()?;
    let p = schema.columns.len();
    let mut log = RejectionLog::default();

    let mut builders: Vec<ColumnBuilder> = schema
        .columns
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let level_codes = spec
                .levels
                .iter()
                .enumerate()
                .map(|(code, level)| (level.clone(), code as u32))
                .collect();
            ColumnBuilder {
                spec_index: i,
                data: match spec.kind {
                    ColumnKind::Continuous => ColumnData::Continuous(Vec::new()),
                    _ => ColumnData::Codes(Vec::new()),
                },
                level_codes,
            }
        })
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let is_header = |fields: &[&str]| -> bool {
        fields.len() == p
            && fields
                .iter()
                .zip(&schema.columns)
                .all(|(f, spec)| *f == spec.name)
    };

    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        if first {
            first = false;
            if is_header(&fields) {
                continue; // header row, not data
            }
        }
        log.n_input += 1;

        if fields.len() != p {
            log.record(RejectReason::WrongFieldCount);
            continue;
        }
        if is_header(&fields) {
            log.record(RejectReason::HeaderEcho);
            continue;
        }

        // Coercion scan: empty fields, or continuous fields that do not parse
        // to a finite number.
        let mut coerced: Vec<f64> = vec![0.0; p];
        let mut coercion_ok = true;
        for (i, spec) in schema.columns.iter().enumerate() {
            let field = fields[i];
            if field.is_empty() {
                coercion_ok = false;
                break;
            }
            if spec.kind == ColumnKind::Continuous {
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => coerced[i] = v,
                    _ => {
                        coercion_ok = false;
                        break;
                    }
                }
            }
        }
        if !coercion_ok {
            log.record(RejectReason::CoercionFailure);
            continue;
        }

        // Vocabulary scan for discrete columns.
        let mut codes: Vec<u32> = vec![0; p];
        let mut vocab_ok = true;
        for (i, spec) in schema.columns.iter().enumerate() {
            if spec.is_discrete() {
                match builders[i].level_codes.get(fields[i]) {
                    Some(&code) => codes[i] = code,
                    None => {
                        vocab_ok = false;
                        break;
                    }
                }
            }
        }
        if !vocab_ok {
            log.record(RejectReason::UnknownCategory);
            continue;
        }

        for builder in builders.iter_mut() {
            match &mut builder.data {
                ColumnData::Continuous(v) => v.push(coerced[builder.spec_index]),
                ColumnData::Codes(v) => v.push(codes[builder.spec_index]),
            }
        }
        log.n_remaining += 1;
    }

    let columns = builders.into_iter().map(|b| b.data).collect();
    let table = ColumnTable::new(schema.clone(), columns)?;
    Ok((table, log))
}

/// Like [`scan_csv`] but an empty retained table is an error.
pub fn parse_and_validate(
    source: impl Read,
    schema: &TableSchema,
) -> Result<(ColumnTable, RejectionLog)> {
    let (table, log) = scan_csv(source, schema)?;
    if table.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((table, log))
}

pub fn parse_file(path: impl AsRef<Path>, schema: &TableSchema) -> Result<(ColumnTable, RejectionLog)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_and_validate(std::io::BufReader::new(file), schema)
}

/// Numeric view of a table: continuous values pass through, discrete columns
/// map to their 0-based level index. Column order is preserved.
pub fn label_encode(table: &ColumnTable) -> DMatrix<f64> {
    let n = table.n_rows();
    let p = table.n_columns();
    DMatrix::from_fn(n, p, |r, c| match table.column(c) {
        ColumnData::Continuous(v) => v[r],
        ColumnData::Codes(v) => f64::from(v[r]),
    })
}

/// Expands each categorical column with at most `max_cardinality` levels into
/// 0/1 indicator columns named `<col>=<level>`, one per level. Higher
/// cardinality categoricals and the target column are left intact.
pub fn one_hot_encode(table: &ColumnTable, max_cardinality: usize) -> Result<ColumnTable> {
    if max_cardinality < 2 {
        return Err(Error::InvalidInput(
            "max_cardinality must be at least 2".into(),
        ));
    }
    let schema = table.schema();
    let mut specs = Vec::new();
    let mut columns = Vec::new();
    for (spec, data) in schema.columns.iter().zip((0..table.n_columns()).map(|i| table.column(i))) {
        let is_target = schema.target.as_deref() == Some(spec.name.as_str());
        let expand = spec.kind == ColumnKind::Categorical
            && spec.levels.len() <= max_cardinality
            && !is_target;
        if !expand {
            specs.push(spec.clone());
            columns.push(data.clone());
            continue;
        }
        let codes = match data {
            ColumnData::Codes(v) => v,
            _ => unreachable!("categorical columns store codes"),
        };
        for (level_code, level) in spec.levels.iter().enumerate() {
            specs.push(ColumnSpec::ordinal(
                format!("{}={}", spec.name, level),
                vec!["0".into(), "1".into()],
            ));
            columns.push(ColumnData::Codes(
                codes
                    .iter()
                    .map(|&c| u32::from(c as usize == level_code))
                    .collect(),
            ));
        }
    }
    ColumnTable::new(
        TableSchema {
            columns: specs,
            target: schema.target.clone(),
            drop_list: schema.drop_list.clone(),
        },
        columns,
    )
}

/// Deterministic row-disjoint split. The train part holds
/// `round(fraction * n_rows)` rows chosen by a seeded shuffle; both parts keep
/// the original row order.
pub fn split_train_test(
    table: &ColumnTable,
    fraction: f64,
    seed: u64,
) -> Result<(ColumnTable, ColumnTable)> {
    let n = table.n_rows();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidSplit {
            n_rows: n,
            fraction,
        });
    }
    let k = (fraction * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(Error::InvalidSplit {
            n_rows: n,
            fraction,
        });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut train_idx = indices[..k].to_vec();
    let mut test_idx = indices[k..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((table.gather_rows(&train_idx), table.gather_rows(&test_idx)))
}

/// Draws `n` rows i.i.d. uniformly with replacement. The bootstrap baseline:
/// a best-case "synthetic" dataset sampled from the table itself.
pub fn resample(table: &ColumnTable, n: usize, seed: u64) -> Result<ColumnTable> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if n == 0 {
        return Err(Error::InvalidInput("resample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..table.n_rows())).collect();
    Ok(table.gather_rows(&indices))
}

/// Removes the schema drop list plus, iteratively, the later column of any
/// pair whose association reaches `threshold`. The collinearity screen uses
/// the min-degrees-of-freedom effect size, under which a column and its exact
/// copy score exactly 1 whatever their level count.
pub fn drop_colinear(
    table: &ColumnTable,
    threshold: f64,
    n_bins: usize,
) -> Result<(ColumnTable, Vec<String>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "collinearity threshold {threshold} outside (0, 1]"
        )));
    }
    let mut dropped: Vec<String> = table
        .schema()
        .drop_list
        .iter()
        .filter(|name| table.schema().column_index(name).is_some())
        .cloned()
        .collect();
    let mut kept = if dropped.is_empty() {
        table.clone()
    } else {
        table.drop_columns(&dropped)?
    };

    if kept.n_columns() >= 2 {
        let assoc = dependence::association_matrix(&kept, n_bins, EffectSizeDf::Min)?;
        let p = assoc.p();
        let mut removed = vec![false; p];
        for j in 1..p {
            for i in 0..j {
                if removed[i] || removed[j] {
                    continue;
                }
                if let Some(v) = assoc.get(i, j) {
                    if v >= threshold {
                        removed[j] = true;
                        dropped.push(kept.spec(j).name.clone());
                        break;
                    }
                }
            }
        }
        let colinear: Vec<String> = (0..p)
            .filter(|&j| removed[j])
            .map(|j| kept.spec(j).name.clone())
            .collect();
        if !colinear.is_empty() {
            kept = kept.drop_columns(&colinear)?;
        }
    }
    Ok((kept, dropped))
}
