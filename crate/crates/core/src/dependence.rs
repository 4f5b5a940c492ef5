//! Pairwise association structure: chi-squared effect sizes over contingency
//! tables, the p x p association matrix, and the real-minus-synthetic
//! difference summaries.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schema::{ColumnData, ColumnTable};

/// Degrees-of-freedom rule for the effect size sqrt(chi2 / (n * df)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSizeDf {
    /// df = (r - 1)(c - 1), the chi-squared test's degrees of freedom.
    Product,
    /// df = min(r - 1, c - 1), the Cramer's V normalization.
    Min,
}

/// Quantile-binned discretization of a continuous column.
#[derive(Debug, Clone)]
pub struct BinnedColumn {
    pub codes: Vec<u32>,
    /// Number of distinct realized bins (duplicate quantile edges collapse).
    pub n_realized: usize,
    /// Set when the column has a single realized bin.
    pub zero_variation: bool,
}

/// Equal-frequency binning. Interior edges sit at the nearest-rank quantiles
/// k/n_bins; duplicate edges merge, so the realized bin count can be lower
/// than requested. Monotone: x <= y implies bin(x) <= bin(y).
pub fn bin_continuous(values: &[f64], n_bins: usize) -> Result<BinnedColumn> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot bin an empty column".into()));
    }
    if n_bins < 2 {
        return Err(Error::InvalidInput("need at least 2 bins".into()));
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = Vec::with_capacity(n_bins - 1);
    for k in 1..n_bins {
        let rank = ((k as f64 / n_bins as f64) * n as f64).ceil() as usize;
        let edge = sorted[rank.clamp(1, n) - 1];
        if edges.last().map_or(true, |&e| edge > e) {
            edges.push(edge);
        }
    }
    // bin(x) = number of edges strictly below x
    let codes: Vec<u32> = values
        .iter()
        .map(|&x| edges.iter().take_while(|&&e| e < x).count() as u32)
        .collect();
    let mut seen = vec![false; edges.len() + 1];
    for &c in &codes {
        seen[c as usize] = true;
    }
    let n_realized = seen.iter().filter(|&&s| s).count();
    Ok(BinnedColumn {
        codes,
        n_realized,
        zero_variation: n_realized <= 1,
    })
}

/// Cross-tabulation over the levels actually observed in each input; declared
/// levels that never occur contribute no rows or columns.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub row_levels: Vec<u32>,
    pub col_levels: Vec<u32>,
}

impl ContingencyTable {
    pub fn n_rows(&self) -> usize {
        self.row_levels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_levels.len()
    }
}

pub fn contingency(a: &[u32], b: &[u32]) -> Result<ContingencyTable> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(
            "contingency inputs differ in length".into(),
        ));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("contingency inputs are empty".into()));
    }
    let mut row_levels: Vec<u32> = a.to_vec();
    row_levels.sort_unstable();
    row_levels.dedup();
    let mut col_levels: Vec<u32> = b.to_vec();
    col_levels.sort_unstable();
    col_levels.dedup();
    let row_of = |v: u32| row_levels.binary_search(&v).expect("observed level");
    let col_of = |v: u32| col_levels.binary_search(&v).expect("observed level");
    let mut counts = vec![vec![0u64; col_levels.len()]; row_levels.len()];
    for (&x, &y) in a.iter().zip(b) {
        counts[row_of(x)][col_of(y)] += 1;
    }
    Ok(ContingencyTable {
        counts,
        n: a.len() as u64,
        row_levels,
        col_levels,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquared {
    pub chi2: f64,
    /// (r - 1)(c - 1) over observed levels.
    pub df: usize,
    /// Set when either margin has a single observed level.
    pub zero_variation: bool,
}

/// Pearson chi-squared statistic with expected counts from the margins.
/// A single-level margin yields chi2 = 0 with df = 0.
pub fn chi_squared(table: &ContingencyTable) -> ChiSquared {
    let r = table.n_rows();
    let c = table.n_cols();
    if r < 2 || c < 2 {
        return ChiSquared {
            chi2: 0.0,
            df: 0,
            zero_variation: true,
        };
    }
    let row_totals: Vec<f64> = table
        .counts
        .iter()
        .map(|row| row.iter().sum::<u64>() as f64)
        .collect();
    let mut col_totals = vec![0.0; c];
    for row in &table.counts {
        for (j, &v) in row.iter().enumerate() {
            col_totals[j] += v as f64;
        }
    }
    let n = table.n as f64;
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = row_totals[i] * col_totals[j] / n;
            if expected > 0.0 {
                let o = table.counts[i][j] as f64;
                chi2 += (o - expected).powi(2) / expected;
            }
        }
    }
    ChiSquared {
        chi2,
        df: (r - 1) * (c - 1),
        zero_variation: false,
    }
}

/// sqrt(chi2 / (n * df)). Returns `None` when df = 0 (the undefined cells
/// rendered as question marks in association heatmaps).
pub fn effect_size(chi2: f64, n: u64, df: usize) -> Option<f64> {
    if df == 0 {
        return None;
    }
    Some((chi2 / (n as f64 * df as f64)).sqrt())
}

/// Symmetric p x p effect-size matrix with an undefined-cell mask. The
/// diagonal is fixed at 1 and always defined.
#[derive(Debug, Clone)]
pub struct AssociationMatrix {
    names: Vec<String>,
    values: DMatrix<f64>,
    defined: Vec<bool>,
}

impl AssociationMatrix {
    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_defined(&self, i: usize, j: usize) -> bool {
        self.defined[i * self.p() + j]
    }

    /// Entry (i, j) if defined.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_defined(i, j).then(|| self.values[(i, j)])
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// The matrix with undefined cells imputed as zero (diagonal stays 1).
    pub fn imputed(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| if self.is_defined(i, j) { self.values[(i, j)] } else { 0.0 })
    }
}

fn discretize(table: &ColumnTable, n_bins: usize) -> Result<Vec<Vec<u32>>> {
    (0..table.n_columns())
        .map(|c| match table.column(c) {
            ColumnData::Continuous(v) => Ok(bin_continuous(v, n_bins)?.codes),
            ColumnData::Codes(v) => Ok(v.clone()),
        })
        .collect()
}

/// Effect sizes for every column pair. Continuous columns are quantile-binned
/// first; pairs involving a zero-variation column are masked undefined.
pub fn association_matrix(
    table: &ColumnTable,
    n_bins: usize,
    df_rule: EffectSizeDf,
) -> Result<AssociationMatrix> {
    let p = table.n_columns();
    if p < 2 {
        return Err(Error::InvalidInput(
            "association matrix needs at least 2 columns".into(),
        ));
    }
    if table.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let codes = discretize(table, n_bins)?;
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    let computed: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let ct = contingency(&codes[i], &codes[j]).expect("equal-length columns");
            let stat = chi_squared(&ct);
            let df = match df_rule {
                EffectSizeDf::Product => stat.df,
                EffectSizeDf::Min => {
                    if stat.zero_variation {
                        0
                    } else {
                        (ct.n_rows() - 1).min(ct.n_cols() - 1)
                    }
                }
            };
            effect_size(stat.chi2, ct.n, df)
        })
        .collect();

    let mut values = DMatrix::zeros(p, p);
    let mut defined = vec![false; p * p];
    for i in 0..p {
        values[(i, i)] = 1.0;
        defined[i * p + i] = true;
    }
    for (&(i, j), v) in pairs.iter().zip(&computed) {
        if let Some(v) = v {
            values[(i, j)] = *v;
            values[(j, i)] = *v;
            defined[i * p + j] = true;
            defined[j * p + i] = true;
        }
    }
    Ok(AssociationMatrix {
        names: table
            .schema()
            .columns
            .iter()
            .map(|c| c.name.clone())
            .collect(),
        values,
        defined,
    })
}

/// Elementwise difference of two association matrices where both are defined;
/// cells undefined on either side are masked.
#[derive(Debug, Clone)]
pub struct DifferenceMatrix {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
    pub defined: Vec<bool>,
}

impl DifferenceMatrix {
    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn is_defined(&self, i: usize, j: usize) -> bool {
        self.defined[i * self.p() + j]
    }

    /// Undefined cells imputed as zero.
    pub fn imputed(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| {
            if self.is_defined(i, j) {
                self.values[(i, j)]
            } else {
                0.0
            }
        })
    }
}

pub fn difference_matrix(
    real: &AssociationMatrix,
    synth: &AssociationMatrix,
) -> Result<DifferenceMatrix> {
    if real.names != synth.names {
        return Err(Error::SchemaMismatch(format!(
            "association matrices cover different columns ({} vs {})",
            real.names.join(","),
            synth.names.join(",")
        )));
    }
    let p = real.p();
    let mut values = DMatrix::zeros(p, p);
    let mut defined = vec![false; p * p];
    for i in 0..p {
        for j in 0..p {
            if real.is_defined(i, j) && synth.is_defined(i, j) {
                values[(i, j)] = real.values[(i, j)] - synth.values[(i, j)];
                defined[i * p + j] = true;
            }
        }
    }
    Ok(DifferenceMatrix {
        names: real.names.clone(),
        values,
        defined,
    })
}

/// |det| of a difference matrix (masked cells as zero), via LU factorization
/// with partial pivoting.
pub fn det_difference(diff: &DifferenceMatrix) -> f64 {
    det_abs(&diff.imputed())
}

pub fn det_abs(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ColumnSpec, TableSchema};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deciles_of_1_to_100() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let binned = bin_continuous(&values, 10).unwrap();
        assert_eq!(binned.n_realized, 10);
        let mut counts = [0usize; 10];
        for &c in &binned.codes {
            counts[c as usize] += 1;
        }
        assert_eq!(counts, [10; 10]);
    }

    #[test]
    fn constant_column_flags_zero_variation() {
        let binned = bin_continuous(&[3.0; 40], 10).unwrap();
        assert!(binned.zero_variation);
        assert_eq!(binned.n_realized, 1);
    }

    #[test]
    fn heavy_ties_merge_bins_monotonically() {
        let mut values = vec![0.0; 95];
        values.extend([1.0, 2.0, 3.0, 4.0, 5.0]);
        let binned = bin_continuous(&values, 10).unwrap();
        assert!(binned.n_realized < 10);
        let mut pairs: Vec<(f64, u32)> = values.iter().copied().zip(binned.codes).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn chi_squared_zero_for_independent_product_table() {
        // counts proportional to margins: O = E everywhere
        let a = [0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1];
        let ct = contingency(&a, &b).unwrap();
        let stat = chi_squared(&ct);
        assert_relative_eq!(stat.chi2, 0.0, epsilon = 1e-12);
        assert_eq!(stat.df, 1);
    }

    #[test]
    fn perfect_two_by_two_association() {
        let a: Vec<u32> = (0..100).map(|i| u32::from(i >= 50)).collect();
        let ct = contingency(&a, &a).unwrap();
        let stat = chi_squared(&ct);
        assert_relative_eq!(stat.chi2, 100.0, epsilon = 1e-9);
        assert_eq!(stat.df, 1);
        assert_relative_eq!(effect_size(stat.chi2, ct.n, stat.df).unwrap(), 1.0);
    }

    #[test]
    fn two_by_three_hand_fixture() {
        // [[10,20,30],[30,20,10]]
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (row, cols) in [(0u32, [10, 20, 30]), (1u32, [30, 20, 10])] {
            for (col, count) in cols.into_iter().enumerate() {
                for _ in 0..count {
                    a.push(row);
                    b.push(col as u32);
                }
            }
        }
        let ct = contingency(&a, &b).unwrap();
        let stat = chi_squared(&ct);
        assert_relative_eq!(stat.chi2, 20.0, epsilon = 1e-10);
        assert_eq!(stat.df, 2);
        let es = effect_size(stat.chi2, ct.n, stat.df).unwrap();
        assert_relative_eq!(es, (20.0f64 / 240.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn df_zero_is_undefined() {
        assert_eq!(effect_size(0.0, 10, 0), None);
        assert_eq!(effect_size(0.0, 10, 3), Some(0.0));
    }

    fn table_from_columns(cols: Vec<(&str, ColumnData)>) -> ColumnTable {
        let specs = cols
            .iter()
            .map(|(name, data)| match data {
                ColumnData::Continuous(_) => ColumnSpec::continuous(*name),
                ColumnData::Codes(v) => {
                    let max = v.iter().max().copied().unwrap_or(0);
                    ColumnSpec::categorical(
                        *name,
                        (0..=max).map(|i| format!("{i}")).collect(),
                    )
                }
            })
            .collect();
        ColumnTable::new(
            TableSchema::new(specs).unwrap(),
            cols.into_iter().map(|(_, data)| data).collect(),
        )
        .unwrap()
    }

    #[test]
    fn copy_column_scores_one_on_diagonal_pairs() {
        let codes: Vec<u32> = (0..60).map(|i| i % 2).collect();
        let table = table_from_columns(vec![
            ("a", ColumnData::Codes(codes.clone())),
            ("b", ColumnData::Codes(codes)),
        ]);
        let assoc = association_matrix(&table, 10, EffectSizeDf::Product).unwrap();
        assert_relative_eq!(assoc.get(0, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(assoc.get(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn independent_columns_have_small_effect_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let table = table_from_columns(vec![
            ("a", ColumnData::Continuous(a)),
            ("b", ColumnData::Continuous(b)),
        ]);
        let assoc = association_matrix(&table, 10, EffectSizeDf::Product).unwrap();
        assert!(assoc.get(0, 1).unwrap() < 0.02);
    }

    #[test]
    fn constant_column_is_fully_masked_off_diagonal() {
        let table = table_from_columns(vec![
            ("c", ColumnData::Continuous(vec![2.0; 30])),
            ("x", ColumnData::Continuous((0..30).map(f64::from).collect())),
            ("y", ColumnData::Codes((0..30).map(|i| i % 3).collect())),
        ]);
        let assoc = association_matrix(&table, 10, EffectSizeDf::Product).unwrap();
        assert_eq!(assoc.get(0, 1), None);
        assert_eq!(assoc.get(0, 2), None);
        assert!(assoc.get(1, 2).is_some());
        assert_eq!(assoc.get(0, 0), Some(1.0));
    }

    #[test]
    fn association_matrix_is_permutation_equivariant() {
        let x: Vec<u32> = (0..90).map(|i| i % 3).collect();
        let y: Vec<u32> = (0..90).map(|i| (i / 3) % 2).collect();
        let z: Vec<u32> = (0..90).map(|i| ((i % 3) + (i % 2)) as u32 % 3).collect();
        let t1 = table_from_columns(vec![
            ("x", ColumnData::Codes(x.clone())),
            ("y", ColumnData::Codes(y.clone())),
            ("z", ColumnData::Codes(z.clone())),
        ]);
        let t2 = table_from_columns(vec![
            ("z", ColumnData::Codes(z)),
            ("x", ColumnData::Codes(x)),
            ("y", ColumnData::Codes(y)),
        ]);
        let a1 = association_matrix(&t1, 10, EffectSizeDf::Product).unwrap();
        let a2 = association_matrix(&t2, 10, EffectSizeDf::Product).unwrap();
        // permutation (x,y,z) -> (z,x,y): old index k maps to new position perm[k]
        let perm = [1usize, 2, 0];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a1.get(i, j), a2.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn difference_of_identical_matrices_is_zero_with_zero_det() {
        let codes: Vec<u32> = (0..80).map(|i| i % 4).collect();
        let other: Vec<u32> = (0..80).map(|i| (i / 2) % 3).collect();
        let table = table_from_columns(vec![
            ("a", ColumnData::Codes(codes)),
            ("b", ColumnData::Codes(other)),
        ]);
        let assoc = association_matrix(&table, 10, EffectSizeDf::Product).unwrap();
        let diff = difference_matrix(&assoc, &assoc).unwrap();
        assert_eq!(det_difference(&diff), 0.0);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(diff.values[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn difference_is_antisymmetric_in_arguments() {
        let a_codes: Vec<u32> = (0..60).map(|i| i % 2).collect();
        let b_codes: Vec<u32> = (0..60).map(|i| (i / 2) % 2).collect();
        let c_codes: Vec<u32> = (0..60).map(|i| (i / 4) % 2).collect();
        let t1 = table_from_columns(vec![
            ("a", ColumnData::Codes(a_codes.clone())),
            ("b", ColumnData::Codes(b_codes.clone())),
        ]);
        let t2 = table_from_columns(vec![
            ("a", ColumnData::Codes(c_codes.clone())),
            ("b", ColumnData::Codes(a_codes)),
        ]);
        let m1 = association_matrix(&t1, 10, EffectSizeDf::Product).unwrap();
        let m2 = association_matrix(&t2, 10, EffectSizeDf::Product).unwrap();
        let d12 = difference_matrix(&m1, &m2).unwrap();
        let d21 = difference_matrix(&m2, &m1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(d12.values[(i, j)], -d21.values[(i, j)]);
            }
        }
    }

    #[test]
    fn determinant_examples() {
        let diag = DifferenceMatrix {
            names: vec!["a".into(), "b".into()],
            values: DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.5]),
            defined: vec![true; 4],
        };
        assert_relative_eq!(det_difference(&diag), 0.1, epsilon = 1e-15);
    }

    /// Cofactor-expansion determinant, the independent oracle for `det_abs`.
    fn det_cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut acc = 0.0;
        for j in 0..n {
            let minor = DMatrix::from_fn(n - 1, n - 1, |r, c| {
                m[(r + 1, if c < j { c } else { c + 1 })]
            });
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * m[(0, j)] * det_cofactor(&minor);
        }
        acc
    }

    #[test]
    fn lu_determinant_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let m = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
            let expected = det_cofactor(&m).abs();
            let got = det_abs(&m);
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn all_independent_fixture_drops_nothing() {
        // companion check for ingest::drop_colinear on an independence fixture
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 5000;
        let cols: Vec<(String, Vec<u32>)> = (0..4)
            .map(|k| (format!("c{k}"), (0..n).map(|_| rng.gen_range(0..5u32)).collect()))
            .collect();
        let table = table_from_columns(
            cols.iter()
                .map(|(name, v)| (name.as_str(), ColumnData::Codes(v.clone())))
                .collect(),
        );
        let assoc = association_matrix(&table, 10, EffectSizeDf::Min).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert!(assoc.get(i, j).unwrap() < 0.05);
            }
        }
        let (kept, dropped) = crate::ingest::drop_colinear(&table, 0.9, 10).unwrap();
        assert!(dropped.is_empty());
        assert_eq!(kept.n_columns(), 4);
    }
}
