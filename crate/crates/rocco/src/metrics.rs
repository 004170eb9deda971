//! External clustering agreement indices: NMI, AMI and ARI.
//!
//! NMI uses the geometric-mean normalization sqrt(H(a) H(b)); AMI normalizes
//! by max(H(a), H(b)) with the expected mutual information taken under the
//! hypergeometric permutation model. Entropies use the natural logarithm.
//! ARI is evaluated with integer pair counts so reference values like -0.5
//! come out exact.

use crate::{Error, Result};

/// Cross-tabulation of two label vectors.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub total: usize,
}

pub fn contingency(a: &[usize], b: &[usize]) -> Result<ContingencyTable> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "contingency: label vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Parameter("contingency: empty label vectors".into()));
    }
    let r = a.iter().max().unwrap() + 1;
    let c = b.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; c]; r];
    for (&u, &v) in a.iter().zip(b) {
        counts[u][v] += 1;
    }
    let row_sums: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..c).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
    Ok(ContingencyTable {
        counts,
        row_sums,
        col_sums,
        total: a.len(),
    })
}

impl ContingencyTable {
    fn entropy(marginals: &[usize], total: usize) -> f64 {
        let n = total as f64;
        -marginals
            .iter()
            .filter(|&&m| m > 0)
            .map(|&m| {
                let p = m as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    }

    pub fn row_entropy(&self) -> f64 {
        Self::entropy(&self.row_sums, self.total)
    }

    pub fn col_entropy(&self) -> f64 {
        Self::entropy(&self.col_sums, self.total)
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &nij) in row.iter().enumerate() {
                if nij > 0 {
                    let nij = nij as f64;
                    mi += nij / n
                        * (n * nij / (self.row_sums[i] as f64 * self.col_sums[j] as f64)).ln();
                }
            }
        }
        mi
    }

    /// True when the two labelings induce the same set partition
    /// (the table is a permutation-like bijection between clusters).
    pub fn identical_partitions(&self) -> bool {
        self.counts.iter().all(|row| {
            row.iter().filter(|&&v| v > 0).count() <= 1
        }) && (0..self.col_sums.len()).all(|j| {
            self.counts.iter().filter(|row| row[j] > 0).count() <= 1
        })
    }

    /// Expected mutual information under the hypergeometric permutation model.
    pub fn expected_mutual_information(&self) -> f64 {
        let n = self.total;
        // ln k! for k in 0..=n
        let mut ln_fact = vec![0.0f64; n + 1];
        for k in 1..=n {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let nf = n as f64;
        let mut emi = 0.0;
        for &ai in &self.row_sums {
            if ai == 0 {
                continue;
            }
            for &bj in &self.col_sums {
                if bj == 0 {
                    continue;
                }
                let lo = 1.max((ai + bj).saturating_sub(n));
                let hi = ai.min(bj);
                for nij in lo..=hi {
                    let nij_f = nij as f64;
                    let term = nij_f / nf * (nf * nij_f / (ai as f64 * bj as f64)).ln();
                    let ln_prob = ln_fact[ai] + ln_fact[bj] + ln_fact[n - ai] + ln_fact[n - bj]
                        - ln_fact[n]
                        - ln_fact[nij]
                        - ln_fact[ai - nij]
                        - ln_fact[bj - nij]
                        - ln_fact[n + nij - ai - bj];
                    emi += term * ln_prob.exp();
                }
            }
        }
        emi
    }
}

/// Normalized mutual information, I / sqrt(H(a) H(b)).
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let (ha, hb) = (t.row_entropy(), t.col_entropy());
    if ha == 0.0 || hb == 0.0 {
        return Ok(if t.identical_partitions() { 1.0 } else { 0.0 });
    }
    Ok(t.mutual_information() / (ha * hb).sqrt())
}

/// Adjusted mutual information, (I - E[I]) / (max(H(a), H(b)) - E[I]).
pub fn ami(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let (ha, hb) = (t.row_entropy(), t.col_entropy());
    let emi = t.expected_mutual_information();
    let denom = ha.max(hb) - emi;
    if denom.abs() < 1e-15 {
        return Ok(if t.identical_partitions() { 1.0 } else { 0.0 });
    }
    Ok((t.mutual_information() - emi) / denom)
}

fn comb2(k: usize) -> i128 {
    let k = k as i128;
    k * (k - 1) / 2
}

/// Adjusted Rand index, evaluated with exact integer pair counts.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: i128 = t
        .counts
        .iter()
        .flat_map(|row| row.iter())
        .map(|&nij| comb2(nij))
        .sum();
    let sum_a: i128 = t.row_sums.iter().map(|&s| comb2(s)).sum();
    let sum_b: i128 = t.col_sums.iter().map(|&s| comb2(s)).sum();
    let total = comb2(t.total);
    // ARI = (index - sum_a sum_b / total) / ((sum_a + sum_b)/2 - sum_a sum_b / total),
    // multiplied through by 2 * total to stay in integers.
    let num = 2 * total * index - 2 * sum_a * sum_b;
    let den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(if t.identical_partitions() { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}
