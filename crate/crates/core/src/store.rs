//! Activation matrices and network layout metadata.
//!
//! Matrices are stored row-major as `f32`, one row per input and one column
//! per network node. On disk they use the ACTS container:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ACTS"
//! 4       4     version (u32 LE) = 1
//! 8       4     n_rows  (u32 LE)
//! 12      4     n_cols  (u32 LE)
//! 16      4*r*c payload, f32 LE, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTS_MAGIC: [u8; 4] = *b"ACTS";
pub const ACTS_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const CHUNK_FLOATS: usize = 1 << 14;

/// Dense row-major matrix of node activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl ActivationMatrix {
    /// Wraps row-major values. Rejects non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos / cols, pos % cols);
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Column `j` copied out of the row-major storage.
    pub fn column(&self, j: usize) -> Vec<f32> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    pub fn write_acts<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows)
            .map_err(|_| Error::InvalidArgument(format!("{} rows exceed u32", self.rows)))?;
        let cols = u32::try_from(self.cols)
            .map_err(|_| Error::InvalidArgument(format!("{} cols exceed u32", self.cols)))?;
        let mut header = [0u8; HEADER_LEN];
        header[0..4].copy_from_slice(&ACTS_MAGIC);
        header[4..8].copy_from_slice(&ACTS_VERSION.to_le_bytes());
        header[8..12].copy_from_slice(&rows.to_le_bytes());
        header[12..16].copy_from_slice(&cols.to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(CHUNK_FLOATS * 4);
        for chunk in self.values.chunks(CHUNK_FLOATS) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_acts<R: Read>(r: R) -> Result<Self> {
        Self::read_acts_sized(r, None)
    }

    // `size_hint` is the total byte length when known; it bounds the up-front
    // reservation so a lying header cannot force a huge allocation.
    fn read_acts_sized<R: Read>(mut r: R, size_hint: Option<u64>) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        let got = read_fully(&mut r, &mut header)?;
        if got >= 4 && header[0..4] != ACTS_MAGIC {
            return Err(Error::BadMagic {
                found: header[0..4].try_into().unwrap(),
            });
        }
        if got < HEADER_LEN {
            return Err(Error::TruncatedHeader { actual: got });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != ACTS_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: ACTS_VERSION,
            });
        }
        let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let expected = rows as u64 * cols as u64;

        let reserve = match size_hint {
            Some(len) => expected.min(len.saturating_sub(HEADER_LEN as u64) / 4),
            None => expected.min(CHUNK_FLOATS as u64),
        };
        let mut values = Vec::with_capacity(reserve as usize);
        let mut buf = vec![0u8; CHUNK_FLOATS * 4];
        let mut remaining = expected;
        while remaining > 0 {
            let want = remaining.min(CHUNK_FLOATS as u64) as usize;
            let got = read_fully(&mut r, &mut buf[..want * 4])?;
            values.extend(
                buf[..got - got % 4]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap())),
            );
            if got < want * 4 {
                return Err(Error::TruncatedPayload {
                    expected,
                    actual: values.len() as u64,
                });
            }
            remaining -= want as u64;
        }
        let mut probe = [0u8; 1];
        if read_fully(&mut r, &mut probe)? != 0 {
            return Err(Error::TrailingBytes { expected });
        }
        Self::new(rows, cols, values)
    }
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn load_acts(path: impl AsRef<Path>) -> Result<ActivationMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().ok().map(|m| m.len());
    ActivationMatrix::read_acts_sized(BufReader::new(file), len)
}

pub fn save_acts(path: impl AsRef<Path>, matrix: &ActivationMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    matrix.write_acts(BufWriter::new(file))
}

/// Reads headerless comma-separated floats, one input per line.
pub fn read_csv<R: Read>(r: R) -> Result<ActivationMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f32>().map_err(|e| Error::CsvValue {
                    line: line + 1,
                    message: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    ActivationMatrix::from_rows(&rows)
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<ActivationMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file))
}

/// The null-hypothesis activations: at least one input and one node.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundActivations(ActivationMatrix);

impl BackgroundActivations {
    pub fn new(matrix: ActivationMatrix) -> Result<Self> {
        if matrix.rows == 0 || matrix.cols == 0 {
            return Err(Error::EmptyMatrix {
                rows: matrix.rows,
                cols: matrix.cols,
            });
        }
        Ok(Self(matrix))
    }

    pub fn n_backgrounds(&self) -> usize {
        self.0.rows
    }

    pub fn n_nodes(&self) -> usize {
        self.0.cols
    }

    pub fn matrix(&self) -> &ActivationMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ActivationMatrix {
        self.0
    }
}

/// Inputs to be scored, optionally tagged with a group label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationBatch {
    matrix: ActivationMatrix,
    labels: Option<Vec<String>>,
}

impl EvaluationBatch {
    pub fn new(
        matrix: ActivationMatrix,
        labels: Option<Vec<String>>,
        background: &BackgroundActivations,
    ) -> Result<Self> {
        if matrix.cols != background.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "evaluation columns vs background nodes",
                expected: background.n_nodes(),
                actual: matrix.cols,
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != matrix.rows {
                return Err(Error::DimensionMismatch {
                    what: "labels vs evaluation rows",
                    expected: matrix.rows,
                    actual: labels.len(),
                });
            }
        }
        Ok(Self { matrix, labels })
    }

    pub fn matrix(&self) -> &ActivationMatrix {
        &self.matrix
    }

    pub fn label(&self, row: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[row].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub size: usize,
}

/// Ordered named layers; column `c` belongs to the layer whose cumulative
/// interval contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkLayout {
    layers: Vec<Layer>,
    // offsets[k] is the first column of layer k; offsets[len] is the total.
    offsets: Vec<usize>,
}

#[derive(Deserialize)]
struct LayoutFile {
    layers: Vec<LayerEntry>,
}

#[derive(Deserialize)]
struct LayerEntry {
    name: String,
    size: i64,
}

#[derive(Serialize)]
struct LayoutFileOut<'a> {
    layers: &'a [Layer],
}

impl NetworkLayout {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyLayout);
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0usize;
        for (i, layer) in layers.iter().enumerate() {
            if layer.size == 0 {
                return Err(Error::NonPositiveLayerSize {
                    name: layer.name.clone(),
                    size: 0,
                });
            }
            if layers[..i].iter().any(|l| l.name == layer.name) {
                return Err(Error::DuplicateLayer(layer.name.clone()));
            }
            offsets.push(total);
            total += layer.size;
        }
        offsets.push(total);
        Ok(Self { layers, offsets })
    }

    pub fn single(name: &str, size: usize) -> Result<Self> {
        Self::new(vec![Layer {
            name: name.to_owned(),
            size,
        }])
    }

    /// The seven hidden layers of the reference CIFAR-10 network.
    pub fn cifar_cnn() -> Self {
        let layers = [
            ("Conv1", 32_768),
            ("Conv2", 28_800),
            ("Pool1", 7_200),
            ("Conv3", 14_400),
            ("Conv4", 10_816),
            ("Pool2", 2_304),
            ("Flat", 512),
        ]
        .into_iter()
        .map(|(name, size)| Layer {
            name: name.to_owned(),
            size,
        })
        .collect();
        Self::new(layers).expect("static layout is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        let layers = file
            .layers
            .into_iter()
            .map(|e| {
                if e.size <= 0 {
                    Err(Error::NonPositiveLayerSize {
                        name: e.name,
                        size: e.size,
                    })
                } else {
                    Ok(Layer {
                        name: e.name,
                        size: e.size as usize,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&LayoutFileOut {
            layers: &self.layers,
        })
        .expect("layout serializes")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn total_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Column range owned by layer `k`.
    pub fn layer_columns(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn columns_of(&self, name: &str) -> Result<Range<usize>> {
        self.layer_index(name)
            .map(|k| self.layer_columns(k))
            .ok_or_else(|| Error::UnknownLayer(name.to_owned()))
    }

    /// Index of the layer owning column `col`.
    pub fn layer_of(&self, col: usize) -> Result<usize> {
        if col >= self.total_nodes() {
            return Err(Error::IndexOutOfRange {
                index: col,
                len: self.total_nodes(),
            });
        }
        Ok(self.offsets.partition_point(|&o| o <= col) - 1)
    }

    pub fn node_to_layer(&self, col: usize) -> Result<&str> {
        self.layer_of(col).map(|k| self.layers[k].name.as_str())
    }

    pub fn check_nodes(&self, n_nodes: usize) -> Result<()> {
        if self.total_nodes() != n_nodes {
            return Err(Error::DimensionMismatch {
                what: "layout size vs matrix columns",
                expected: n_nodes,
                actual: self.total_nodes(),
            });
        }
        Ok(())
    }
}

pub fn load_layout(path: impl AsRef<Path>) -> Result<NetworkLayout> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NetworkLayout::from_json(&text)
}
