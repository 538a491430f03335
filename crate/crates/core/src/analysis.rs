//! Detection evaluation: ROC AUC, per-layer representation of detected
//! subsets, and a seeded synthetic activation generator.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pvalue::RangeSource;
use crate::scan::{scan, score_all_nodes, ScanConfig};
use crate::store::{ActivationMatrix, BackgroundActivations, NetworkLayout};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredGroups {
    pub clean_scores: Vec<f64>,
    pub anomalous_scores: Vec<f64>,
}

/// Probability that an anomalous score exceeds a clean one, ties counting
/// one half (Mann-Whitney U / (n_a * n_c), via midranks).
pub fn auc(groups: &ScoredGroups) -> Result<f64> {
    let n_c = groups.clean_scores.len();
    let n_a = groups.anomalous_scores.len();
    if n_c == 0 {
        return Err(Error::EmptyGroup("clean"));
    }
    if n_a == 0 {
        return Err(Error::EmptyGroup("anomalous"));
    }
    let mut pooled: Vec<(f64, bool)> = groups
        .clean_scores
        .iter()
        .map(|&s| (s, false))
        .chain(groups.anomalous_scores.iter().map(|&s| (s, true)))
        .collect();
    if pooled.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * pooled[i..j].iter().filter(|(_, anom)| *anom).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_a * (n_a + 1)) as f64 / 2.0;
    Ok(u / (n_a as f64 * n_c as f64))
}

/// Standard deviation of the AUC when both groups come from the same
/// continuous distribution.
pub fn null_auc_sd(n_clean: usize, n_anomalous: usize) -> f64 {
    let (n1, n2) = (n_clean as f64, n_anomalous as f64);
    ((n1 + n2 + 1.0) / (12.0 * n1 * n2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRepresentation {
    pub layer: String,
    pub rep: f64,
    pub subset_count: usize,
    pub layer_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub layers: Vec<LayerRepresentation>,
}

impl RepresentationReport {
    /// Mean of `rep` weighted by each layer's share of the network; exactly 1
    /// in real arithmetic for any subset.
    pub fn weighted_mean(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.layer_size).sum();
        self.layers
            .iter()
            .map(|l| l.rep * l.layer_size as f64 / total as f64)
            .sum()
    }
}

/// Share of the subset in each layer divided by the layer's share of nodes.
pub fn representation(subset: &[usize], layout: &NetworkLayout) -> Result<RepresentationReport> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut counts = vec![0usize; layout.layers().len()];
    for &node in subset {
        counts[layout.layer_of(node)?] += 1;
    }
    let total = layout.total_nodes() as f64;
    let size = subset.len() as f64;
    let layers = layout
        .layers()
        .iter()
        .zip(counts)
        .map(|(layer, count)| LayerRepresentation {
            layer: layer.name.clone(),
            rep: (count as f64 / size) / (layer.size as f64 / total),
            subset_count: count,
            layer_size: layer.size,
        })
        .collect();
    Ok(RepresentationReport { layers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_nodes: usize,
    pub n_background: usize,
    pub n_clean_eval: usize,
    pub n_anomalous_eval: usize,
    /// Fraction of nodes carrying the planted shift.
    pub affected_fraction: f64,
    pub shift: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0
            || self.n_background == 0
            || self.n_clean_eval == 0
            || self.n_anomalous_eval == 0
        {
            return Err(Error::InvalidArgument(
                "synthetic sizes must all be positive".into(),
            ));
        }
        if !(self.affected_fraction > 0.0 && self.affected_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "affected fraction {} outside (0, 1]",
                self.affected_fraction
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidArgument("shift must be finite".into()));
        }
        Ok(())
    }

    pub fn n_planted(&self) -> usize {
        ((self.affected_fraction * self.n_nodes as f64).ceil() as usize).clamp(1, self.n_nodes)
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub background: BackgroundActivations,
    pub clean: ActivationMatrix,
    pub anomalous: ActivationMatrix,
    /// Ascending indices of the shifted nodes.
    pub planted: Vec<usize>,
}

// Each generated row owns a ChaCha stream, so output does not depend on how
// rows are scheduled across threads.
const STREAM_PLANTED: u64 = 0;
const STREAM_BACKGROUND: u64 = 1 << 40;
const STREAM_CLEAN: u64 = 2 << 40;
const STREAM_ANOMALOUS: u64 = 3 << 40;

fn normal_rows(seed: u64, stream_base: u64, rows: usize, cols: usize) -> Vec<f32> {
    let mut values = vec![0f32; rows * cols];
    values
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + i as u64);
            for v in row {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z as f32;
            }
        });
    values
}

/// Standard normal activations; anomalous rows add `shift` on a seeded
/// random node subset.
pub fn synthesize(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let j = spec.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_PLANTED);
    let mut planted = index::sample(&mut rng, j, spec.n_planted()).into_vec();
    planted.sort_unstable();

    let background = ActivationMatrix::new(
        spec.n_background,
        j,
        normal_rows(spec.seed, STREAM_BACKGROUND, spec.n_background, j),
    )?;
    let clean = ActivationMatrix::new(
        spec.n_clean_eval,
        j,
        normal_rows(spec.seed, STREAM_CLEAN, spec.n_clean_eval, j),
    )?;
    let mut anomalous = normal_rows(spec.seed, STREAM_ANOMALOUS, spec.n_anomalous_eval, j);
    let shift = spec.shift as f32;
    for row in anomalous.chunks_mut(j) {
        for &node in &planted {
            row[node] += shift;
        }
    }
    Ok(SynthData {
        background: BackgroundActivations::new(background)?,
        clean,
        anomalous: ActivationMatrix::new(spec.n_anomalous_eval, j, anomalous)?,
        planted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub scan_auc: f64,
    pub all_nodes_auc: f64,
    pub n_clean: usize,
    pub n_anom: usize,
    #[serde(skip)]
    pub scan_scores: ScoredGroups,
    #[serde(skip)]
    pub all_nodes_scores: ScoredGroups,
}

/// Subset-scan and all-nodes scores for every row of `rows`, in row order.
pub fn score_rows<B: RangeSource + ?Sized>(
    background: &B,
    rows: &ActivationMatrix,
    config: &ScanConfig,
    layout: &NetworkLayout,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rows.cols() != background.n_nodes() {
        return Err(Error::DimensionMismatch {
            what: "evaluation columns vs background nodes",
            expected: background.n_nodes(),
            actual: rows.cols(),
        });
    }
    let scored: Vec<(f64, f64)> = (0..rows.rows())
        .into_par_iter()
        .map(|i| {
            let ranges = background.ranges_for_input(rows.row(i), config.tie_tolerance)?;
            let subset = scan(&ranges, config, layout)?;
            let all = score_all_nodes(&ranges, config, layout)?;
            Ok((subset.score, all.score))
        })
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().unzip())
}

/// Scores both groups against the background (never against each other) and
/// reports the AUC of the subset scan and of the all-nodes baseline.
pub fn evaluate_detection<B: RangeSource + ?Sized>(
    background: &B,
    clean: &ActivationMatrix,
    anomalous: &ActivationMatrix,
    config: &ScanConfig,
    layout: &NetworkLayout,
) -> Result<DetectionReport> {
    config.validate()?;
    layout.check_nodes(background.n_nodes())?;
    let (clean_scan, clean_all) = score_rows(background, clean, config, layout)?;
    let (anom_scan, anom_all) = score_rows(background, anomalous, config, layout)?;
    let scan_scores = ScoredGroups {
        clean_scores: clean_scan,
        anomalous_scores: anom_scan,
    };
    let all_nodes_scores = ScoredGroups {
        clean_scores: clean_all,
        anomalous_scores: anom_all,
    };
    Ok(DetectionReport {
        scan_auc: auc(&scan_scores)?,
        all_nodes_auc: auc(&all_nodes_scores)?,
        n_clean: clean.rows(),
        n_anom: anomalous.rows(),
        scan_scores,
        all_nodes_scores,
    })
}
