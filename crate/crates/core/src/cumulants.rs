//! Joint central cumulants of orders 2-4 over a numeric matrix, stored as
//! symmetric tensors by sorted multi-index, plus the empirical-rule
//! significance screen and real-vs-synthetic agreement summaries.
//!
//! For centered variables every partition block of size one has expectation
//! zero, so the partition-sum expansion collapses to:
//! order 2 and 3, the central moment itself; order 4,
//! m(ijkl) - m(ij)m(kl) - m(ik)m(jl) - m(il)m(jk).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Binomial coefficients up to a fixed size, for multiset ranking.
#[derive(Debug, Clone)]
struct Binom {
    rows: Vec<Vec<u64>>,
}

impl Binom {
    fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Binom { rows }
    }

    fn c(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

/// Colex rank of a nondecreasing multi-index within all multisets of its
/// length over 0..p-1.
fn multiset_rank(binom: &Binom, sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(t, &i)| binom.c(i + t, t + 1))
        .sum::<u64>() as usize
}

fn n_multisets(binom: &Binom, p: usize, k: usize) -> usize {
    binom.c(p + k - 1, k) as usize
}

/// Visits every nondecreasing multi-index of length k over 0..p-1 in
/// lexicographic order.
fn for_each_sorted_index(p: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; k];
    loop {
        f(&idx);
        // advance odometer keeping nondecreasing order
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] + 1 < p {
                idx[pos] += 1;
                for t in (pos + 1)..k {
                    idx[t] = idx[pos];
                }
                break;
            }
        }
    }
}

/// Number of distinct permutations of a sorted multi-index.
fn multiplicity(sorted: &[usize]) -> u64 {
    let k = sorted.len();
    let factorial = |m: usize| -> u64 { (1..=m as u64).product::<u64>().max(1) };
    let mut denom = 1u64;
    let mut run = 1usize;
    for t in 1..k {
        if sorted[t] == sorted[t - 1] {
            run += 1;
        } else {
            denom *= factorial(run);
            run = 1;
        }
    }
    denom *= factorial(run);
    factorial(k) / denom
}

/// Sample central product moments m(i1..ik) = (1/n) sum_r prod_t (x - mean)
/// for every sorted multi-index of orders 2 through 4.
#[derive(Debug, Clone)]
pub struct MomentCache {
    n: usize,
    p: usize,
    means: Vec<f64>,
    m2: Vec<f64>,
    m3: Vec<f64>,
    m4: Vec<f64>,
    binom: Binom,
}

impl MomentCache {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Central moment for a multi-index of length 1..=4 (length 1 is zero by
    /// centering).
    pub fn central_moment(&self, index: &[usize]) -> Result<f64> {
        self.check_index(index)?;
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        Ok(match sorted.len() {
            1 => 0.0,
            2 => self.m2[multiset_rank(&self.binom, &sorted)],
            3 => self.m3[multiset_rank(&self.binom, &sorted)],
            4 => self.m4[multiset_rank(&self.binom, &sorted)],
            _ => unreachable!("checked length"),
        })
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.is_empty() || index.len() > 4 {
            return Err(Error::InvalidInput(format!(
                "multi-index length {} outside 1..=4",
                index.len()
            )));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= self.p) {
            return Err(Error::InvalidInput(format!(
                "index {bad} out of range for p = {}",
                self.p
            )));
        }
        Ok(())
    }

    fn pair_moment(&self, a: usize, b: usize) -> f64 {
        let sorted = if a <= b { [a, b] } else { [b, a] };
        self.m2[multiset_rank(&self.binom, &sorted)]
    }
}

/// Columns of `x` as rows of a contiguous buffer, mean-centered.
fn centered_columns(x: &nalgebra::DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    let mut means = vec![0.0; p];
    let mut cols = vec![vec![0.0f64; n]; p];
    for j in 0..p {
        let mut acc = 0.0;
        for i in 0..n {
            acc += x[(i, j)];
        }
        let mean = acc / n as f64;
        means[j] = mean;
        for i in 0..n {
            cols[j][i] = x[(i, j)] - mean;
        }
    }
    (cols, means)
}

/// Builds the order 2-4 central moment cache for an n x p matrix. Entries for
/// a fixed leading index are computed independently, so the reduction is
/// parallel with deterministic per-entry sums.
pub fn moment_cache(x: &nalgebra::DMatrix<f64>) -> Result<MomentCache> {
    let n = x.nrows();
    let p = x.ncols();
    if p == 0 {
        return Err(Error::InvalidInput("moment cache needs p >= 1".into()));
    }
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "moment cache needs at least 5 rows, got {n}"
        )));
    }
    let binom = Binom::new(p + 4);
    let (cols, means) = centered_columns(x);
    let inv_n = 1.0 / n as f64;

    let mut m2 = vec![0.0f64; n_multisets(&binom, p, 2)];
    let mut m3 = vec![0.0f64; n_multisets(&binom, p, 3)];
    let mut m4 = vec![0.0f64; n_multisets(&binom, p, 4)];

    let parts: Vec<(Vec<(usize, f64)>, Vec<(usize, f64)>, Vec<(usize, f64)>)> = (0..p)
        .into_par_iter()
        .map(|i| {
            let mut p2 = Vec::new();
            let mut p3 = Vec::new();
            let mut p4 = Vec::new();
            let mut vij = vec![0.0f64; n];
            let mut vijk = vec![0.0f64; n];
            let xi = &cols[i];
            for j in i..p {
                let xj = &cols[j];
                let mut s2 = 0.0;
                for r in 0..n {
                    let v = xi[r] * xj[r];
                    vij[r] = v;
                    s2 += v;
                }
                p2.push((multiset_rank(&binom, &[i, j]), s2 * inv_n));
                for k in j..p {
                    let xk = &cols[k];
                    let mut s3 = 0.0;
                    for r in 0..n {
                        let v = vij[r] * xk[r];
                        vijk[r] = v;
                        s3 += v;
                    }
                    p3.push((multiset_rank(&binom, &[i, j, k]), s3 * inv_n));
                    for l in k..p {
                        let xl = &cols[l];
                        let mut s4 = 0.0;
                        for r in 0..n {
                            s4 += vijk[r] * xl[r];
                        }
                        p4.push((multiset_rank(&binom, &[i, j, k, l]), s4 * inv_n));
                    }
                }
            }
            (p2, p3, p4)
        })
        .collect();

    for (p2, p3, p4) in parts {
        for (rank, v) in p2 {
            m2[rank] = v;
        }
        for (rank, v) in p3 {
            m3[rank] = v;
        }
        for (rank, v) in p4 {
            m4[rank] = v;
        }
    }

    Ok(MomentCache {
        n,
        p,
        means,
        m2,
        m3,
        m4,
        binom,
    })
}

/// Joint central cumulant for a multi-index of length 1..=4, symmetric under
/// index permutation.
pub fn joint_cumulant(cache: &MomentCache, index: &[usize]) -> Result<f64> {
    cache.check_index(index)?;
    match index.len() {
        1 => Ok(0.0),
        2 | 3 => cache.central_moment(index),
        4 => {
            let (a, b, c, d) = (index[0], index[1], index[2], index[3]);
            let m4 = cache.central_moment(index)?;
            Ok(m4
                - cache.pair_moment(a, b) * cache.pair_moment(c, d)
                - cache.pair_moment(a, c) * cache.pair_moment(b, d)
                - cache.pair_moment(a, d) * cache.pair_moment(b, c))
        }
        _ => unreachable!("checked length"),
    }
}

/// Order-k symmetric cumulant tensor: one stored value per sorted multi-index,
/// addressable by any permutation, with p^k expanded-entry accounting.
#[derive(Debug, Clone)]
pub struct CumulantTensor {
    order: usize,
    p: usize,
    values: Vec<f64>,
    binom: Binom,
}

impl CumulantTensor {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_stored(&self) -> usize {
        self.values.len()
    }

    pub fn expanded_count(&self) -> u64 {
        (self.p as u64).pow(self.order as u32)
    }

    /// Value at any permutation of a multi-index.
    pub fn value(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.order {
            return Err(Error::InvalidInput(format!(
                "index length {} does not match tensor order {}",
                index.len(),
                self.order
            )));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= self.p) {
            return Err(Error::InvalidInput(format!(
                "index {bad} out of range for p = {}",
                self.p
            )));
        }
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        Ok(self.values[multiset_rank(&self.binom, &sorted)])
    }

    /// Iterates (sorted multi-index, value, number of expanded permutations).
    pub fn for_each_stored(&self, mut f: impl FnMut(&[usize], f64, u64)) {
        let mut rank = 0usize;
        for_each_sorted_index(self.p, self.order, |idx| {
            f(idx, self.values[rank], multiplicity(idx));
            rank += 1;
        });
    }
}

pub fn cumulant_tensor(cache: &MomentCache, order: usize) -> Result<CumulantTensor> {
    if !(2..=4).contains(&order) {
        return Err(Error::InvalidInput(format!(
            "tensor order {order} outside 2..=4"
        )));
    }
    let p = cache.p;
    let binom = cache.binom.clone();
    let mut values = vec![0.0f64; n_multisets(&binom, p, order)];
    let mut rank = 0usize;
    let mut failed = None;
    for_each_sorted_index(p, order, |idx| {
        match joint_cumulant(cache, idx) {
            Ok(v) => values[rank] = v,
            Err(e) => failed = Some(e),
        }
        rank += 1;
    });
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(CumulantTensor {
        order,
        p,
        values,
        binom,
    })
}

/// Entries deemed nonzero by the empirical rule: outside mean +/- 2 sd, with
/// the moments taken over all p^order expanded entries.
#[derive(Debug, Clone, Serialize)]
pub struct SignificanceMask {
    pub order: usize,
    pub p: usize,
    pub mean: f64,
    pub sd: f64,
    pub threshold_low: f64,
    pub threshold_high: f64,
    /// Per stored (sorted) entry; expanded permutations share the flag.
    pub positive: Vec<bool>,
    /// Expanded counts: positive + negative = p^order.
    pub n_positive: u64,
    pub n_negative: u64,
    /// Set when sd = 0 and the band has zero width.
    pub degenerate: bool,
}

pub fn empirical_rule_mask(tensor: &CumulantTensor) -> SignificanceMask {
    let total = tensor.expanded_count();
    let mut mean = 0.0;
    tensor.for_each_stored(|_, v, mult| {
        mean += v * mult as f64;
    });
    mean /= total as f64;
    let mut var = 0.0;
    tensor.for_each_stored(|_, v, mult| {
        var += (v - mean).powi(2) * mult as f64;
    });
    var /= total as f64;
    let sd = var.sqrt();
    let degenerate = sd == 0.0;
    let (lo, hi) = (mean - 2.0 * sd, mean + 2.0 * sd);

    let mut positive = Vec::with_capacity(tensor.n_stored());
    let mut n_positive = 0u64;
    tensor.for_each_stored(|_, v, mult| {
        let flag = !degenerate && (v < lo || v > hi);
        positive.push(flag);
        if flag {
            n_positive += mult;
        }
    });
    SignificanceMask {
        order: tensor.order,
        p: tensor.p,
        mean,
        sd,
        threshold_low: lo,
        threshold_high: hi,
        positive,
        n_positive,
        n_negative: total - n_positive,
        degenerate,
    }
}

/// Confusion counts between a reference (real) mask and a synthetic mask over
/// expanded entries. Positives are defined by the real mask.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulantAgreement {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
    /// TP / (TP + FN); absent when the real mask has no positives.
    pub tpr: Option<f64>,
    /// TN / (TN + FP); absent when the real mask has no negatives.
    pub tnr: Option<f64>,
}

pub fn tpr_tnr(real: &SignificanceMask, synth: &SignificanceMask) -> Result<CumulantAgreement> {
    if real.order != synth.order || real.p != synth.p {
        return Err(Error::SchemaMismatch(format!(
            "masks disagree on shape: order {} p {} vs order {} p {}",
            real.order, real.p, synth.order, synth.p
        )));
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0u64, 0u64, 0u64, 0u64);
    let binom = Binom::new(real.p + 4);
    let mut rank = 0usize;
    let _ = &binom;
    for_each_sorted_index(real.p, real.order, |idx| {
        let mult = multiplicity(idx);
        match (real.positive[rank], synth.positive[rank]) {
            (true, true) => tp += mult,
            (true, false) => fn_ += mult,
            (false, false) => tn += mult,
            (false, true) => fp += mult,
        }
        rank += 1;
    });
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(CumulantAgreement {
        tp,
        fn_,
        tn,
        fp,
        tpr: ratio(tp, tp + fn_),
        tnr: ratio(tn, tn + fp),
    })
}

/// Mean squared entry difference over expanded entries, standardized by the
/// variance of the real tensor's expanded entries. `None` when that variance
/// is zero.
pub fn standardized_error(
    real: &CumulantTensor,
    synth: &CumulantTensor,
) -> Result<Option<f64>> {
    if real.order != synth.order || real.p != synth.p {
        return Err(Error::SchemaMismatch(
            "tensors disagree on order or dimension".into(),
        ));
    }
    let total = real.expanded_count() as f64;
    let mut mean_real = 0.0;
    real.for_each_stored(|_, v, mult| mean_real += v * mult as f64);
    mean_real /= total;
    let mut var_real = 0.0;
    real.for_each_stored(|_, v, mult| var_real += (v - mean_real).powi(2) * mult as f64);
    var_real /= total;
    if var_real == 0.0 {
        return Ok(None);
    }
    let mut mse = 0.0;
    let mut rank = 0usize;
    real.for_each_stored(|_, v, mult| {
        mse += (synth.values[rank] - v).powi(2) * mult as f64;
        rank += 1;
    });
    mse /= total;
    Ok(Some(mse / var_real))
}

/// One rank of the scree table: a top reference cumulant with the per-trial
/// spread of the compared tensors at the same index.
#[derive(Debug, Clone, Serialize)]
pub struct ScreeRow {
    pub rank: usize,
    pub index: Vec<usize>,
    pub reference: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Ranks the k largest-|value| expanded indices of the reference tensor and
/// reports each trial tensor's mean/min/max at those indices. Ties break by
/// ascending index, so the table is deterministic.
pub fn scree_data(
    trial_tensors: &[&CumulantTensor],
    reference: &CumulantTensor,
    k: usize,
) -> Result<Vec<ScreeRow>> {
    if k == 0 {
        return Err(Error::InvalidInput("scree table needs k >= 1".into()));
    }
    if trial_tensors.is_empty() {
        return Err(Error::InvalidInput("scree table needs at least one trial".into()));
    }
    for t in trial_tensors {
        if t.order != reference.order || t.p != reference.p {
            return Err(Error::SchemaMismatch(
                "trial tensor disagrees with reference on order or dimension".into(),
            ));
        }
    }
    let order = reference.order;
    let p = reference.p;
    let total = reference.expanded_count();
    let k = (k as u64).min(total) as usize;

    // enumerate expanded indices (odometer, lexicographic)
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; order];
    loop {
        entries.push((idx.clone(), reference.value(&idx)?));
        let mut pos = order;
        let mut done = true;
        while pos > 0 {
            pos -= 1;
            if idx[pos] + 1 < p {
                idx[pos] += 1;
                for t in (pos + 1)..order {
                    idx[t] = 0;
                }
                done = false;
                break;
            }
        }
        if done {
            break;
        }
    }
    entries.sort_by(|a, b| {
        b.1.abs()
            .total_cmp(&a.1.abs())
            .then_with(|| a.0.cmp(&b.0))
    });
    entries.truncate(k);

    let mut rows = Vec::with_capacity(k);
    for (rank, (index, reference_value)) in entries.into_iter().enumerate() {
        let mut mean = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for t in trial_tensors {
            let v = t.value(&index)?;
            mean += v;
            min = min.min(v);
            max = max.max(v);
        }
        mean /= trial_tensors.len() as f64;
        rows.push(ScreeRow {
            rank: rank + 1,
            index,
            reference: reference_value,
            mean,
            min,
            max,
        });
    }
    Ok(rows)
}
