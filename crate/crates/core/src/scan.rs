//! Exact maximization of the scan statistic over node subsets.
//!
//! For a fixed `alpha` the best subset of any size `k` is the `k` nodes with
//! the highest priority, and the score only grows with `N_alpha`. So the
//! optimum over all `2^J` subsets is one of the `J` prefixes of the priority
//! ordering, and a scan over candidate alphas only has to score prefixes.
//!
//! Priorities depend on a node only through its `(p_min, p_max)` pair, so
//! nodes with identical ranges are grouped and sorted as one unit. Runs of
//! equal priority are scored at their first and last member; for statistics
//! that are convex along such runs that is the run's maximum.

use std::collections::HashMap;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pvalue::RangeVector;
use crate::score::{priority, priority_between, BerkJones, ScanStatistic};
use crate::store::NetworkLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaPolicy {
    /// Distinct range endpoints in `(0, alpha_max]`, plus `alpha_max`.
    RangeEndpoints,
    /// `i * alpha_max / k` for `i = 1..=k`.
    UniformGrid(usize),
}

impl std::str::FromStr for AlphaPolicy {
    type Err = Error;

    /// `endpoints` or `grid:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "endpoints" {
            return Ok(AlphaPolicy::RangeEndpoints);
        }
        if let Some(k) = s.strip_prefix("grid:") {
            let k = k
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad grid size in {s:?}")))?;
            return Ok(AlphaPolicy::UniformGrid(k));
        }
        Err(Error::InvalidConfig(format!(
            "alpha policy must be `endpoints` or `grid:<k>`, got {s:?}"
        )))
    }
}

impl std::fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaPolicy::RangeEndpoints => f.write_str("endpoints"),
            AlphaPolicy::UniformGrid(k) => write!(f, "grid:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha_max: f64,
    pub alpha_policy: AlphaPolicy,
    /// Only columns of these layers are eligible.
    pub layer_restriction: Option<Vec<String>>,
    pub tie_tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha_max: 1.0,
            alpha_policy: AlphaPolicy::RangeEndpoints,
            layer_restriction: None,
            tie_tolerance: 0.0,
        }
    }
}

impl ScanConfig {
    pub fn with_alpha_max(mut self, alpha_max: f64) -> Self {
        self.alpha_max = alpha_max;
        self
    }

    pub fn with_policy(mut self, policy: AlphaPolicy) -> Self {
        self.alpha_policy = policy;
        self
    }

    pub fn with_layers<S: Into<String>>(mut self, layers: impl IntoIterator<Item = S>) -> Self {
        self.layer_restriction = Some(layers.into_iter().map(Into::into).collect());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_max = {} outside (0, 1]",
                self.alpha_max
            )));
        }
        if let AlphaPolicy::UniformGrid(k) = self.alpha_policy {
            if k < 2 {
                return Err(Error::InvalidConfig(format!("grid size {k} < 2")));
            }
        }
        if !(self.tie_tolerance >= 0.0 && self.tie_tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tie tolerance {} must be finite and nonnegative",
                self.tie_tolerance
            )));
        }
        if let Some(layers) = &self.layer_restriction {
            if layers.is_empty() {
                return Err(Error::InvalidConfig("empty layer restriction".into()));
            }
        }
        Ok(())
    }

    /// Ascending eligible node indices under the layer restriction.
    pub fn eligible_nodes(&self, n_nodes: usize, layout: &NetworkLayout) -> Result<Vec<usize>> {
        layout.check_nodes(n_nodes)?;
        let Some(layers) = &self.layer_restriction else {
            return Ok((0..n_nodes).collect());
        };
        let mut keep = vec![false; n_nodes];
        for name in layers {
            for c in layout.columns_of(name)? {
                keep[c] = true;
            }
        }
        Ok((0..n_nodes).filter(|&c| keep[c]).collect())
    }
}

/// Highest-scoring subset and the statistics that produced its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub score: f64,
    pub alpha_star: f64,
    /// Ascending node indices.
    pub subset: Vec<usize>,
    pub n_alpha: f64,
    pub n: usize,
}

/// Candidate significance levels, ascending and never empty.
pub fn candidate_alphas(ranges: &RangeVector, nodes: &[usize], config: &ScanConfig) -> Vec<f64> {
    let alpha_max = config.alpha_max;
    match config.alpha_policy {
        AlphaPolicy::UniformGrid(k) => (1..=k).map(|i| i as f64 * alpha_max / k as f64).collect(),
        AlphaPolicy::RangeEndpoints => {
            let mut alphas: Vec<f64> = nodes
                .iter()
                .flat_map(|&j| {
                    let r = &ranges.as_slice()[j];
                    [r.p_min(), r.p_max()]
                })
                .filter(|&a| a > 0.0 && a <= alpha_max)
                .collect();
            alphas.sort_unstable_by(f64::total_cmp);
            alphas.dedup();
            if alphas.last() != Some(&alpha_max) {
                alphas.push(alpha_max);
            }
            alphas
        }
    }
}

/// Candidate alphas over every node of `ranges`.
pub fn candidate_alphas_all(ranges: &RangeVector, config: &ScanConfig) -> Vec<f64> {
    let nodes: Vec<usize> = (0..ranges.len()).collect();
    candidate_alphas(ranges, &nodes, config)
}

/// Nodes ordered by descending priority at `alpha`, ties by ascending index.
pub fn priority_order(ranges: &RangeVector, nodes: &[usize], alpha: f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = nodes
        .iter()
        .map(|&j| (priority(&ranges.as_slice()[j], alpha), j))
        .collect();
    keyed.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, j)| j).collect()
}

/// Score of every prefix of `order` at a fixed `alpha`; entry `k - 1` scores
/// the first `k` nodes.
pub fn prefix_scores(
    ranges: &RangeVector,
    order: &[usize],
    alpha: f64,
    stat: &impl ScanStatistic,
) -> Vec<f64> {
    let mut n_alpha = 0.0;
    order
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            n_alpha += priority(&ranges.as_slice()[j], alpha);
            stat.score(alpha, n_alpha, i + 1)
        })
        .collect()
}

struct RangeGroup {
    p_min: f64,
    p_max: f64,
    count: usize,
}

fn group_ranges(ranges: &RangeVector, nodes: &[usize]) -> Vec<RangeGroup> {
    let mut counts: HashMap<(u64, u64), usize> = HashMap::new();
    for &j in nodes {
        let r = &ranges.as_slice()[j];
        *counts
            .entry((r.p_min().to_bits(), r.p_max().to_bits()))
            .or_default() += 1;
    }
    let mut groups: Vec<RangeGroup> = counts
        .into_iter()
        .map(|((lo, hi), count)| RangeGroup {
            p_min: f64::from_bits(lo),
            p_max: f64::from_bits(hi),
            count,
        })
        .collect();
    groups.sort_unstable_by(|a, b| {
        a.p_min
            .total_cmp(&b.p_min)
            .then(a.p_max.total_cmp(&b.p_max))
    });
    groups
}

#[derive(Debug, Clone, Copy)]
struct Best {
    score: f64,
    k: usize,
}

fn best_prefix_at(
    groups: &[RangeGroup],
    alpha: f64,
    stat: &impl ScanStatistic,
    scratch: &mut Vec<(f64, usize)>,
) -> Best {
    scratch.clear();
    scratch.extend(
        groups
            .iter()
            .map(|g| (priority_between(g.p_min, g.p_max, alpha), g.count)),
    );
    scratch.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let convex = stat.convex_in_prefix();
    let mut best = Best {
        score: f64::NEG_INFINITY,
        k: 0,
    };
    let mut consider = |score: f64, k: usize| {
        if score > best.score {
            best = Best { score, k };
        }
    };
    let (mut k0, mut n0) = (0usize, 0.0f64);
    let mut i = 0;
    while i < scratch.len() {
        let g = scratch[i].0;
        let mut run = 0;
        while i < scratch.len() && scratch[i].0 == g {
            run += scratch[i].1;
            i += 1;
        }
        if convex {
            consider(stat.score(alpha, n0 + g, k0 + 1), k0 + 1);
            if run > 1 {
                consider(stat.score(alpha, n0 + g * run as f64, k0 + run), k0 + run);
            }
        } else {
            for step in 1..=run {
                consider(
                    stat.score(alpha, n0 + g * step as f64, k0 + step),
                    k0 + step,
                );
            }
        }
        k0 += run;
        n0 += g * run as f64;
    }
    best
}

fn finish(
    ranges: &RangeVector,
    nodes: &[usize],
    alpha: f64,
    k: usize,
    stat: &impl ScanStatistic,
) -> ScanResult {
    let mut subset = priority_order(ranges, nodes, alpha);
    subset.truncate(k);
    subset.sort_unstable();
    let n_alpha: f64 = subset
        .iter()
        .map(|&j| priority(&ranges.as_slice()[j], alpha))
        .sum();
    ScanResult {
        score: stat.score(alpha, n_alpha, subset.len()),
        alpha_star: alpha,
        n: subset.len(),
        subset,
        n_alpha,
    }
}

/// Scans `nodes` (ascending indices into `ranges`) with a caller-supplied
/// statistic and alpha set.
pub fn scan_nodes_with(
    ranges: &RangeVector,
    nodes: &[usize],
    alphas: &[f64],
    stat: &impl ScanStatistic,
) -> Result<ScanResult> {
    if nodes.is_empty() {
        return Err(Error::NoEligibleNodes);
    }
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("no candidate alphas".into()));
    }
    let groups = group_ranges(ranges, nodes);
    let per_alpha: Vec<Best> = alphas
        .par_iter()
        .map_init(Vec::new, |scratch, &alpha| {
            best_prefix_at(&groups, alpha, stat, scratch)
        })
        .collect();
    // sequential reduction in alpha order keeps the tie-break independent of
    // scheduling: first (smallest) alpha wins, then shortest prefix
    let (idx, best) = per_alpha
        .iter()
        .enumerate()
        .fold((0, per_alpha[0]), |acc, (i, b)| {
            if b.score > acc.1.score {
                (i, *b)
            } else {
                acc
            }
        });
    Ok(finish(ranges, nodes, alphas[idx], best.k, stat))
}

fn check_ranges(ranges: &RangeVector, layout: &NetworkLayout) -> Result<()> {
    layout.check_nodes(ranges.len())
}

/// Best-scoring subset of eligible nodes under Berk-Jones.
pub fn scan(
    ranges: &RangeVector,
    config: &ScanConfig,
    layout: &NetworkLayout,
) -> Result<ScanResult> {
    config.validate()?;
    check_ranges(ranges, layout)?;
    let nodes = config.eligible_nodes(ranges.len(), layout)?;
    if nodes.is_empty() {
        return Err(Error::NoEligibleNodes);
    }
    let alphas = candidate_alphas(ranges, &nodes, config);
    scan_nodes_with(ranges, &nodes, &alphas, &BerkJones)
}

/// Scores the whole eligible set, maximizing over alpha only.
pub fn score_all_nodes(
    ranges: &RangeVector,
    config: &ScanConfig,
    layout: &NetworkLayout,
) -> Result<ScanResult> {
    config.validate()?;
    check_ranges(ranges, layout)?;
    let nodes = config.eligible_nodes(ranges.len(), layout)?;
    if nodes.is_empty() {
        return Err(Error::NoEligibleNodes);
    }
    let alphas = candidate_alphas(ranges, &nodes, config);
    let groups = group_ranges(ranges, &nodes);
    let n = nodes.len();
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in &alphas {
        let n_alpha: f64 = groups
            .iter()
            .map(|g| priority_between(g.p_min, g.p_max, alpha) * g.count as f64)
            .sum();
        let score = BerkJones.score(alpha, n_alpha, n);
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, alpha, n_alpha));
        }
    }
    let (score, alpha_star, n_alpha) = best.expect("alphas never empty");
    Ok(ScanResult {
        score,
        alpha_star,
        subset: nodes,
        n_alpha,
        n,
    })
}

/// One independent scan per layer, in layout order.
pub fn scan_per_layer(
    ranges: &RangeVector,
    config: &ScanConfig,
    layout: &NetworkLayout,
) -> Result<IndexMap<String, ScanResult>> {
    layout
        .layers()
        .iter()
        .map(|layer| {
            let cfg = ScanConfig {
                layer_restriction: Some(vec![layer.name.clone()]),
                ..config.clone()
            };
            scan(ranges, &cfg, layout).map(|r| (layer.name.clone(), r))
        })
        .collect()
}

/// Subset size per layer, in layout order.
pub fn per_layer_counts(
    subset: &[usize],
    layout: &NetworkLayout,
) -> Result<IndexMap<String, usize>> {
    let mut counts: IndexMap<String, usize> = layout
        .layers()
        .iter()
        .map(|l| (l.name.clone(), 0))
        .collect();
    for &node in subset {
        let k = layout.layer_of(node)?;
        counts[k] += 1;
    }
    Ok(counts)
}
