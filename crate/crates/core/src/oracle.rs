//! Exhaustive subset search, the reference the prefix scan is checked
//! against. Deliberately naive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pvalue::RangeVector;
use crate::scan::{candidate_alphas_all, ScanConfig};
use crate::score::{priority, BerkJones, ScanStatistic};

pub const ORACLE_MAX_NODES: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub score: f64,
    pub subset: Vec<usize>,
    pub alpha_star: f64,
}

/// Maximizes Berk-Jones over all `2^J - 1` nonempty subsets and the same
/// candidate alphas the scan uses. Ties go to the smaller subset, then the
/// lexicographically smaller node list.
pub fn exhaustive_scan(ranges: &RangeVector, config: &ScanConfig) -> Result<OracleResult> {
    exhaustive_scan_with(ranges, config, &BerkJones)
}

pub fn exhaustive_scan_with(
    ranges: &RangeVector,
    config: &ScanConfig,
    stat: &impl ScanStatistic,
) -> Result<OracleResult> {
    config.validate()?;
    if config.layer_restriction.is_some() {
        return Err(Error::InvalidConfig(
            "exhaustive scan takes no layer restriction; select the ranges instead".into(),
        ));
    }
    let j = ranges.len();
    if j == 0 {
        return Err(Error::NoEligibleNodes);
    }
    if j > ORACLE_MAX_NODES {
        return Err(Error::OracleTooLarge {
            n: j,
            cap: ORACLE_MAX_NODES,
        });
    }
    let alphas = candidate_alphas_all(ranges, config);
    let table: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| ranges.iter().map(|r| priority(r, a)).collect())
        .collect();

    let mut best: Option<OracleResult> = None;
    for mask in 1u32..(1u32 << j) {
        let subset: Vec<usize> = (0..j).filter(|&i| mask & (1 << i) != 0).collect();
        let mut subset_best = (f64::NEG_INFINITY, 0.0);
        for (a, &alpha) in alphas.iter().enumerate() {
            let n_alpha: f64 = subset.iter().map(|&i| table[a][i]).sum();
            let score = stat.score(alpha, n_alpha, subset.len());
            if score > subset_best.0 {
                subset_best = (score, alpha);
            }
        }
        let candidate = OracleResult {
            score: subset_best.0,
            subset,
            alpha_star: subset_best.1,
        };
        best = match best {
            None => Some(candidate),
            Some(b) if better(&candidate, &b) => Some(candidate),
            keep => keep,
        };
    }
    Ok(best.expect("at least one subset"))
}

fn better(a: &OracleResult, b: &OracleResult) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.subset.len() != b.subset.len() {
        return a.subset.len() < b.subset.len();
    }
    a.subset < b.subset
}
