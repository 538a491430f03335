//! Empirical p-value ranges of an input's activations against the background.
//!
//! For node `j` with evaluation activation `a`, `n_beat` counts background
//! activations strictly larger than `a` and `n_tie` counts equal ones. The
//! range is
//!
//! ```text
//! p_min = n_beat / (|B| + 1)
//! p_max = (n_beat + n_tie + 1) / (|B| + 1)
//! ```
//!
//! With a nonzero tie tolerance `t`, "larger" means `A - a > t` and "equal"
//! means `|A - a| <= t`, both evaluated on the f64 difference so the two sets
//! stay disjoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::BackgroundActivations;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueRange {
    #[serde(rename = "pmin")]
    p_min: f64,
    #[serde(rename = "pmax")]
    p_max: f64,
}

impl PValueRange {
    /// Checks `0 <= p_min < p_max <= 1`.
    pub fn new(p_min: f64, p_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min >= p_max {
            return Err(Error::InvalidRange { p_min, p_max });
        }
        Ok(Self { p_min, p_max })
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn width(&self) -> f64 {
        self.p_max - self.p_min
    }
}

/// One p-value range per node, in column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangeVector(Vec<PValueRange>);

impl RangeVector {
    pub fn new(ranges: Vec<PValueRange>) -> Self {
        Self(ranges)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[PValueRange] {
        &self.0
    }

    pub fn get(&self, node: usize) -> Option<&PValueRange> {
        self.0.get(node)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PValueRange> {
        self.0.iter()
    }

    /// Ranges restricted to `nodes`, renumbered from 0.
    pub fn select(&self, nodes: impl IntoIterator<Item = usize>) -> Self {
        Self(nodes.into_iter().map(|j| self.0[j]).collect())
    }

    /// `[{"node": j, "pmin": x, "pmax": y}, ...]`
    pub fn to_json(&self) -> String {
        let entries: Vec<_> = self
            .0
            .iter()
            .enumerate()
            .map(|(node, r)| NodeRange {
                node,
                pmin: r.p_min,
                pmax: r.p_max,
            })
            .collect();
        serde_json::to_string(&entries).expect("ranges serialize")
    }

    /// Parses the node-tagged JSON form. Node ids must be exactly `0..n`
    /// (any order).
    pub fn from_json(text: &str) -> Result<Self> {
        let mut entries: Vec<NodeRange> = serde_json::from_str(text)?;
        entries.sort_by_key(|e| e.node);
        for (i, e) in entries.iter().enumerate() {
            if e.node != i {
                return Err(Error::InvalidArgument(format!(
                    "range list must cover nodes 0..{} exactly once; node {} is missing or repeated",
                    entries.len(),
                    i
                )));
            }
        }
        entries
            .into_iter()
            .map(|e| PValueRange::new(e.pmin, e.pmax))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl FromIterator<PValueRange> for RangeVector {
    fn from_iter<I: IntoIterator<Item = PValueRange>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a RangeVector {
    type Item = &'a PValueRange;
    type IntoIter = std::slice::Iter<'a, PValueRange>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRange {
    node: usize,
    pmin: f64,
    pmax: f64,
}

#[inline]
fn beats(background: f32, activation: f32, tol: f64) -> bool {
    background as f64 - activation as f64 > tol
}

#[inline]
fn ties(background: f32, activation: f32, tol: f64) -> bool {
    (background as f64 - activation as f64).abs() <= tol
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tie tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    Ok(())
}

/// Counts background values beating and tying `activation` by linear scan.
pub fn beat_tie_counts(
    column: &[f32],
    activation: f32,
    tie_tolerance: f64,
) -> Result<(usize, usize)> {
    if column.is_empty() {
        return Err(Error::EmptyBackground);
    }
    check_tolerance(tie_tolerance)?;
    let mut n_beat = 0;
    let mut n_tie = 0;
    for &b in column {
        if beats(b, activation, tie_tolerance) {
            n_beat += 1;
        } else if ties(b, activation, tie_tolerance) {
            n_tie += 1;
        }
    }
    Ok((n_beat, n_tie))
}

pub fn pvalue_range(n_beat: usize, n_tie: usize, n_background: usize) -> Result<PValueRange> {
    if n_background == 0 {
        return Err(Error::EmptyBackground);
    }
    match n_beat.checked_add(n_tie) {
        Some(total) if total <= n_background => {}
        _ => {
            return Err(Error::InvalidCounts {
                n_beat,
                n_tie,
                n_background,
            })
        }
    }
    Ok(range_unchecked(n_beat, n_tie, n_background))
}

#[inline]
fn range_unchecked(n_beat: usize, n_tie: usize, n_background: usize) -> PValueRange {
    let denom = (n_background + 1) as f64;
    PValueRange {
        p_min: n_beat as f64 / denom,
        p_max: (n_beat + n_tie + 1) as f64 / denom,
    }
}

/// Anything that can turn one evaluation row into a [`RangeVector`].
pub trait RangeSource: Sync {
    fn n_nodes(&self) -> usize;
    fn n_backgrounds(&self) -> usize;
    fn ranges_for_input(&self, input_row: &[f32], tie_tolerance: f64) -> Result<RangeVector>;
}

fn check_row(expected: usize, row: &[f32]) -> Result<()> {
    if row.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "input row length vs background nodes",
            expected,
            actual: row.len(),
        });
    }
    if let Some(col) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }
    Ok(())
}

/// Row-sweep counting directly over the row-major background. Costs one pass
/// over the matrix per input and needs no extra memory.
impl RangeSource for BackgroundActivations {
    fn n_nodes(&self) -> usize {
        BackgroundActivations::n_nodes(self)
    }

    fn n_backgrounds(&self) -> usize {
        BackgroundActivations::n_backgrounds(self)
    }

    fn ranges_for_input(&self, input_row: &[f32], tie_tolerance: f64) -> Result<RangeVector> {
        check_row(self.n_nodes(), input_row)?;
        check_tolerance(tie_tolerance)?;
        let mut n_beat = vec![0u32; input_row.len()];
        let mut n_tie = vec![0u32; input_row.len()];
        for bg_row in self.matrix().iter_rows() {
            for (((&b, &a), beat), tie) in bg_row
                .iter()
                .zip(input_row)
                .zip(n_beat.iter_mut())
                .zip(n_tie.iter_mut())
            {
                let d = b as f64 - a as f64;
                *beat += (d > tie_tolerance) as u32;
                *tie += (d.abs() <= tie_tolerance) as u32;
            }
        }
        let n = BackgroundActivations::n_backgrounds(self);
        Ok(n_beat
            .into_iter()
            .zip(n_tie)
            .map(|(b, t)| range_unchecked(b as usize, t as usize, n))
            .collect())
    }
}

/// Background columns sorted once, so each per-node query is two binary
/// searches.
#[derive(Debug, Clone)]
pub struct SortedBackground {
    n_backgrounds: usize,
    n_nodes: usize,
    // column-major, each column ascending
    sorted: Vec<f32>,
}

impl SortedBackground {
    pub fn new(background: &BackgroundActivations) -> Self {
        let n_backgrounds = background.n_backgrounds();
        let n_nodes = background.n_nodes();
        let matrix = background.matrix();
        let mut sorted = vec![0f32; n_backgrounds * n_nodes];
        sorted
            .par_chunks_mut(n_backgrounds)
            .enumerate()
            .for_each(|(j, col)| {
                for (i, slot) in col.iter_mut().enumerate() {
                    *slot = matrix.row(i)[j];
                }
                col.sort_unstable_by(f32::total_cmp);
            });
        Self {
            n_backgrounds,
            n_nodes,
            sorted,
        }
    }

    pub fn column(&self, j: usize) -> &[f32] {
        &self.sorted[j * self.n_backgrounds..(j + 1) * self.n_backgrounds]
    }

    /// Same counts as [`beat_tie_counts`] on the unsorted column.
    pub fn counts(&self, j: usize, activation: f32, tie_tolerance: f64) -> (usize, usize) {
        let col = self.column(j);
        // Both predicates are monotone in the background value.
        let below_tie = col.partition_point(|&b| (b as f64 - activation as f64) < -tie_tolerance);
        let not_beating = col.partition_point(|&b| !beats(b, activation, tie_tolerance));
        (col.len() - not_beating, not_beating - below_tie)
    }
}

impl RangeSource for SortedBackground {
    fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn n_backgrounds(&self) -> usize {
        self.n_backgrounds
    }

    fn ranges_for_input(&self, input_row: &[f32], tie_tolerance: f64) -> Result<RangeVector> {
        check_row(self.n_nodes, input_row)?;
        check_tolerance(tie_tolerance)?;
        let ranges: Vec<_> = input_row
            .par_iter()
            .enumerate()
            .map(|(j, &a)| {
                let (b, t) = self.counts(j, a, tie_tolerance);
                range_unchecked(b, t, self.n_backgrounds)
            })
            .collect();
        Ok(RangeVector(ranges))
    }
}
