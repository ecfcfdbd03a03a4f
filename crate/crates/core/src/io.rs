//! File formats: numeric CSV input, JSON documents for partitions, models
//! and reports, and CSV tables for scores, loadings and simulation output.
//!
//! Every writer goes through [`write_atomic`], so a failed run never leaves a
//! half-written artifact behind. Floats in CSV use 17 significant digits;
//! JSON uses the shortest representation that parses back to the same
//! `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::detect::BlockPartition;
use crate::error::{Error, Result};
use crate::matrix::{center_columns, DataMatrix};
use crate::model::{IsPcaModel, ModelDoc};
use crate::pla::VarianceReport;
use crate::sim::SimResult;

pub const PARTITION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Header present when any cell of the first record is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub header: HeaderMode,
    pub delimiter: char,
    /// First field of every record is a row label.
    pub row_names: bool,
    /// File rows are variables (genes-as-rows layout).
    pub transpose: bool,
    /// Replace every value by its base-2 logarithm before centering.
    pub log2: bool,
    pub center: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            header: HeaderMode::Auto,
            delimiter: ',',
            row_names: false,
            transpose: false,
            log2: false,
            center: true,
        }
    }
}

/// A data matrix read from disk, with the observation labels if the file
/// had them.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMatrix {
    pub data: DataMatrix,
    pub row_labels: Option<Vec<String>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bad_file(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Read a rectangular numeric table. Error positions are 1-based line and
/// field numbers of the file as written.
pub fn read_matrix_csv(path: &Path, opts: &CsvOptions) -> Result<LoadedMatrix> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io_err(path))?;
    parse_matrix_csv(path, &text, opts)
}

/// [`read_matrix_csv`] on in-memory text; `path` is only used in errors.
pub fn parse_matrix_csv(path: &Path, text: &str, opts: &CsvOptions) -> Result<LoadedMatrix> {
    if !opts.delimiter.is_ascii() {
        return Err(Error::InvalidConfig(format!(
            "delimiter {:?} is not a single-byte character",
            opts.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(opts.delimiter as u8)
        .from_reader(text.as_bytes());
    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec
            .position()
            .map_or(records.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        records.push((line, rec.iter().map(|s| s.trim().to_string()).collect()));
    }
    if records.is_empty() {
        return Err(bad_file(path, "empty file"));
    }

    let skip = usize::from(opts.row_names);
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let has_header = match opts.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => records[0].1.iter().skip(skip).any(|s| !numeric(s)),
    };
    let header = if has_header {
        Some(records.remove(0))
    } else {
        None
    };
    if records.is_empty() {
        return Err(bad_file(path, "no data rows after the header"));
    }

    let width = records[0].1.len();
    if width <= skip {
        return Err(bad_file(path, "no numeric columns"));
    }
    let mut values = Vec::with_capacity(records.len() * (width - skip));
    let mut row_names = Vec::new();
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: *line,
                expected: width,
                found: fields.len(),
            });
        }
        if opts.row_names {
            row_names.push(fields[0].clone());
        }
        for (k, cell) in fields.iter().enumerate().skip(skip) {
            let bad = || Error::BadCell {
                path: path.to_path_buf(),
                row: *line,
                col: k + 1,
                value: cell.clone(),
            };
            let v: f64 = cell.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            let v = if opts.log2 {
                if v <= 0.0 {
                    return Err(bad_file(
                        path,
                        format!(
                            "line {line}, field {}: log2 of nonpositive value {cell}",
                            k + 1
                        ),
                    ));
                }
                v.log2()
            } else {
                v
            };
            values.push(v);
        }
    }
    let (rows, cols) = (records.len(), width - skip);
    let mut col_labels = header.map(|(line, h)| {
        if h.len() == width {
            Ok(h[skip..].to_vec())
        } else if h.len() == width - skip {
            Ok(h)
        } else {
            Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: line,
                expected: width,
                found: h.len(),
            })
        }
    });
    let mut row_labels = opts.row_names.then_some(row_names);
    let mut m = DMatrix::from_row_slice(rows, cols, &values);
    if opts.transpose {
        m = m.transpose();
        let cl = col_labels.take().transpose()?;
        col_labels = row_labels.take().map(Ok);
        row_labels = cl;
    }
    let labels = col_labels.transpose()?;
    let raw = DataMatrix::new(m, labels)?;
    let data = if opts.center {
        center_columns(&raw)
    } else {
        mark_centered(raw)?
    };
    Ok(LoadedMatrix { data, row_labels })
}

fn mark_centered(x: DataMatrix) -> Result<DataMatrix> {
    let labels = x.col_labels().map(<[String]>::to_vec);
    let m = DataMatrix::assume_centered(x.values().clone())?;
    match labels {
        Some(l) => m.with_labels(l),
        None => Ok(m),
    }
}

/// One label per line (the first field of each CSV record).
pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if let Some(first) = rec.get(0) {
            if !(rec.len() == 1 && first.trim().is_empty()) {
                out.push(first.trim().to_string());
            }
        }
    }
    Ok(out)
}

/// Write `path` through a temporary file in the same directory and rename
/// it into place once `body` has succeeded.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(io_err(path))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| bad_file(path, e.to_string()))
}

/// `{:.16e}`: 17 significant digits, enough to recover any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a CSV with the given header; every record must match its width.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for r in rows {
            out.write_record(&r)?;
        }
        out.flush().map_err(io_err(path))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub format_version: u32,
    pub p: usize,
    /// 0-based column indices, ascending within each block.
    pub blocks: Vec<Vec<usize>>,
    /// Column order that lists the blocks one after another.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
}

impl PartitionDoc {
    pub fn from_partition(part: &BlockPartition) -> Self {
        Self {
            format_version: PARTITION_FORMAT_VERSION,
            p: part.p(),
            blocks: part.to_vecs(),
            permutation: Some(part.permutation().as_slice().to_vec()),
        }
    }

    /// Validate and build the partition. A stored permutation must agree
    /// with the blocks.
    pub fn into_partition(self) -> Result<BlockPartition> {
        let part = BlockPartition::new(self.p, self.blocks)?;
        if let Some(perm) = self.permutation {
            if perm != part.permutation().as_slice() {
                return Err(Error::InvalidPermutation {
                    len: self.p,
                    reason: "does not list the blocks in order".into(),
                });
            }
        }
        Ok(part)
    }
}

/// A blocks file is either a full partition document or a bare list of
/// column lists.
#[derive(Deserialize)]
#[serde(untagged)]
enum BlocksFile {
    Doc(PartitionDoc),
    Bare(Vec<Vec<usize>>),
}

pub fn write_partition(path: &Path, part: &BlockPartition) -> Result<()> {
    write_json(path, &PartitionDoc::from_partition(part))
}

/// Read a blocks file for a data set with `p` columns.
pub fn read_partition(path: &Path, p: usize) -> Result<BlockPartition> {
    let part = match read_json::<BlocksFile>(path)? {
        BlocksFile::Doc(doc) => {
            if doc.format_version != PARTITION_FORMAT_VERSION {
                return Err(bad_file(
                    path,
                    format!("unsupported format_version {}", doc.format_version),
                ));
            }
            doc.into_partition()?
        }
        BlocksFile::Bare(blocks) => BlockPartition::new(p, blocks)?,
    };
    if part.p() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("partition of {p} columns"),
            found: part.p().to_string(),
        });
    }
    Ok(part)
}

pub fn write_model(path: &Path, model: &IsPcaModel) -> Result<()> {
    write_json(path, &model.to_doc())
}

pub fn read_model(path: &Path) -> Result<IsPcaModel> {
    IsPcaModel::from_doc(read_json::<ModelDoc>(path)?)
}

fn observation_ids(n: usize, labels: Option<&[String]>) -> Vec<String> {
    match labels {
        Some(l) => l.to_vec(),
        None => (0..n).map(|i| i.to_string()).collect(),
    }
}

/// `observation,PC1,…,PCk`.
pub fn write_scores(
    path: &Path,
    scores: &DMatrix<f64>,
    row_labels: Option<&[String]>,
) -> Result<()> {
    let header: Vec<String> = std::iter::once("observation".to_string())
        .chain((1..=scores.ncols()).map(|j| format!("PC{j}")))
        .collect();
    let ids = observation_ids(scores.nrows(), row_labels);
    let rows = (0..scores.nrows()).map(|i| {
        std::iter::once(ids[i].clone())
            .chain(scores.row(i).iter().map(|&v| fmt_f64(v)))
            .collect()
    });
    write_csv(path, &header, rows)
}

/// Sparse loadings: `row,variable,component,value` over each component's
/// block, components numbered from 1.
pub fn write_loadings(
    path: &Path,
    model: &IsPcaModel,
    col_labels: Option<&[String]>,
) -> Result<()> {
    let header = ["row", "variable", "component", "value"].map(String::from);
    let mut rows = Vec::new();
    for (j, &b) in model.component_block.iter().enumerate() {
        for &r in model.partition.block(b).iter() {
            let name = col_labels.map_or_else(|| r.to_string(), |l| l[r].clone());
            rows.push(vec![
                r.to_string(),
                name,
                (j + 1).to_string(),
                fmt_f64(model.loadings[(r, j)]),
            ]);
        }
    }
    write_csv(path, &header, rows)
}

/// `component,dense1,…` with absolute correlations.
pub fn write_correlations(path: &Path, corr: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = std::iter::once("component".to_string())
        .chain((1..=corr.ncols()).map(|j| format!("dense{j}")))
        .collect();
    let rows = (0..corr.nrows()).map(|i| {
        std::iter::once((i + 1).to_string())
            .chain(corr.row(i).iter().map(|&v| fmt_f64(v)))
            .collect()
    });
    write_csv(path, &header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentVariance {
    /// Numbered from 1.
    pub component: usize,
    pub block: usize,
    pub eigenvalue: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariance {
    pub total_variance: f64,
    pub components: Vec<ComponentVariance>,
    pub blocks: VarianceReport,
}

impl ModelVariance {
    pub fn new(model: &IsPcaModel, blocks: VarianceReport) -> Self {
        let components = model
            .variance_shares()
            .into_iter()
            .enumerate()
            .map(|(j, share)| ComponentVariance {
                component: j + 1,
                block: model.component_block[j],
                eigenvalue: model.eigenvalues[j],
                share,
            })
            .collect();
        Self {
            total_variance: model.total_variance,
            components,
            blocks,
        }
    }
}

/// `block,size,variance,share,baseline`, descending share.
pub fn write_variance_csv(path: &Path, report: &VarianceReport) -> Result<()> {
    let header = ["block", "size", "variance", "share", "baseline"].map(String::from);
    let rows = report.per_block.iter().map(|b| {
        vec![
            b.block.to_string(),
            b.size.to_string(),
            fmt_f64(b.variance),
            fmt_f64(b.share),
            fmt_f64(b.baseline),
        ]
    });
    write_csv(path, &header, rows)
}

/// `observation,PC<i>,PC<j>[,label]` for a pair of components numbered
/// from 1.
pub fn write_biplot(
    path: &Path,
    scores: &DMatrix<f64>,
    (i, j): (usize, usize),
    row_labels: Option<&[String]>,
    groups: Option<&[String]>,
) -> Result<()> {
    let mut header = vec![
        "observation".to_string(),
        format!("PC{i}"),
        format!("PC{j}"),
    ];
    if groups.is_some() {
        header.push("label".into());
    }
    let ids = observation_ids(scores.nrows(), row_labels);
    let rows = (0..scores.nrows()).map(|a| {
        let mut r = vec![
            ids[a].clone(),
            fmt_f64(scores[(a, i - 1)]),
            fmt_f64(scores[(a, j - 1)]),
        ];
        if let Some(g) = groups {
            r.push(g[a].clone());
        }
        r
    });
    write_csv(path, &header, rows)
}

/// Tidy table: one row per replicate, approach and block.
pub fn write_sim_csv(path: &Path, result: &SimResult) -> Result<()> {
    let header = ["replicate", "approach", "block", "omega", "cosine", "ratio"].map(String::from);
    let rows = result.records.iter().map(|r| {
        vec![
            r.replicate.to_string(),
            r.approach.name().to_string(),
            r.block.to_string(),
            fmt_f64(r.omega),
            fmt_f64(r.cosine),
            fmt_f64(r.ratio),
        ]
    });
    write_csv(path, &header, rows)
}

#[derive(Serialize)]
struct SimSummaryDoc<'a> {
    config: &'a crate::sim::SimConfig,
    summary: &'a [crate::sim::ApproachSummary],
    failures: &'a [crate::sim::SimFailure],
}

pub fn write_sim_summary(path: &Path, result: &SimResult) -> Result<()> {
    write_json(
        path,
        &SimSummaryDoc {
            config: &result.config,
            summary: &result.summary,
            failures: &result.failures,
        },
    )
}
