//! Dataset records and their CSV and binary encodings.
//!
//! Binary layout (little endian): `"TGQM"`, `u16` version, `u64` record
//! count, then fixed 148-byte records: a 16-byte SHA-256 prefix of the
//! object id, 31 `f32` (p0 ×6, d ×2, use point ×3, inward use normal ×3,
//! contact count, the 12 metrics, 4 reserved zeros), a `reached` byte, a
//! `viable` byte and 6 zero bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, object_hash, PipelineError, RunConfig};
use crate::metrics::MetricVector;

pub const BINARY_MAGIC: &[u8; 4] = b"TGQM";
pub const BINARY_VERSION: u16 = 1;
pub const BINARY_RECORD_BYTES: usize = 148;
const BINARY_HEADER_BYTES: u64 = 14;
const BINARY_FLOATS: usize = 31;

pub const CSV_COLUMNS: [&str; 30] = [
    "object_id",
    "p0_0",
    "p0_1",
    "p0_2",
    "p0_3",
    "p0_4",
    "p0_5",
    "d_0",
    "d_1",
    "u_x",
    "u_y",
    "u_z",
    "un_x",
    "un_y",
    "un_z",
    "n_contacts",
    "eps",
    "inertia",
    "e_i",
    "e_h_0",
    "e_h_1",
    "e_h_2",
    "e_h_3",
    "e_h_4",
    "e_h_5",
    "delta",
    "u_tau",
    "u_g",
    "reached",
    "viable",
];

/// One evaluated sample. A use point of NaNs marks a use ray that found
/// no surface.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspRecord {
    pub object_id: String,
    pub p0: [f64; 6],
    pub d: [f64; 2],
    pub use_point: [f64; 3],
    pub use_normal: [f64; 3],
    pub n_contacts: u32,
    pub phi: MetricVector,
    pub reached: bool,
    pub viable: bool,
}

impl GraspRecord {
    /// p0, d, use point, use normal, contact count and the metrics.
    pub fn numeric_fields(&self) -> [f64; 27] {
        let mut out = [0.0; 27];
        out[..6].copy_from_slice(&self.p0);
        out[6..8].copy_from_slice(&self.d);
        out[8..11].copy_from_slice(&self.use_point);
        out[11..14].copy_from_slice(&self.use_normal);
        out[14] = self.n_contacts as f64;
        out[15..].copy_from_slice(&self.phi.to_array());
        out
    }

    fn from_numeric(object_id: String, v: &[f64], reached: bool, viable: bool) -> GraspRecord {
        let mut phi = [0.0; 12];
        phi.copy_from_slice(&v[15..27]);
        GraspRecord {
            object_id,
            p0: v[..6].try_into().unwrap(),
            d: v[6..8].try_into().unwrap(),
            use_point: v[8..11].try_into().unwrap(),
            use_normal: v[11..14].try_into().unwrap(),
            n_contacts: v[14] as u32,
            phi: MetricVector::from_array(phi),
            reached,
            viable,
        }
    }

    /// The record as the given format stores it.
    pub fn quantized(&self, format: DatasetFormat) -> GraspRecord {
        match format {
            DatasetFormat::Csv => self.clone(),
            DatasetFormat::Binary => {
                let v = self.numeric_fields().map(|x| x as f32 as f64);
                GraspRecord::from_numeric(self.object_id.clone(), &v, self.reached, self.viable)
            }
        }
    }

    pub fn use_valid(&self) -> bool {
        !self.use_point[0].is_nan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl DatasetFormat {
    /// CSV for a `.csv` extension, binary for anything else.
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Binary,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

pub enum DatasetWriter {
    Csv {
        path: PathBuf,
        w: csv::Writer<BufWriter<File>>,
    },
    Binary {
        path: PathBuf,
        w: BufWriter<File>,
        count: u64,
    },
}

impl DatasetWriter {
    pub fn create(path: &Path, format: DatasetFormat) -> Result<DatasetWriter, PipelineError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        match format {
            DatasetFormat::Csv => {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(CSV_COLUMNS).map_err(|e| csv_err(path, e))?;
                Ok(DatasetWriter::Csv {
                    path: path.to_path_buf(),
                    w,
                })
            }
            DatasetFormat::Binary => {
                w.write_all(BINARY_MAGIC).map_err(io_err(path))?;
                w.write_all(&BINARY_VERSION.to_le_bytes())
                    .map_err(io_err(path))?;
                w.write_all(&0u64.to_le_bytes()).map_err(io_err(path))?;
                Ok(DatasetWriter::Binary {
                    path: path.to_path_buf(),
                    w,
                    count: 0,
                })
            }
        }
    }

    pub fn write(&mut self, r: &GraspRecord) -> Result<(), PipelineError> {
        match self {
            DatasetWriter::Csv { path, w } => {
                let mut row: Vec<String> = Vec::with_capacity(CSV_COLUMNS.len());
                row.push(r.object_id.clone());
                let v = r.numeric_fields();
                row.extend(v[..14].iter().map(|x| fmt_f64(*x)));
                row.push(r.n_contacts.to_string());
                row.extend(v[15..].iter().map(|x| fmt_f64(*x)));
                row.push((r.reached as u8).to_string());
                row.push((r.viable as u8).to_string());
                w.write_record(&row).map_err(|e| csv_err(path, e))
            }
            DatasetWriter::Binary { path, w, count } => {
                let mut buf = [0u8; BINARY_RECORD_BYTES];
                buf[..16].copy_from_slice(&object_hash(&r.object_id));
                for (k, x) in r.numeric_fields().iter().enumerate() {
                    buf[16 + 4 * k..20 + 4 * k].copy_from_slice(&(*x as f32).to_le_bytes());
                }
                let flags = 16 + 4 * BINARY_FLOATS;
                buf[flags] = r.reached as u8;
                buf[flags + 1] = r.viable as u8;
                *count += 1;
                w.write_all(&buf).map_err(io_err(path))
            }
        }
    }

    pub fn finish(self) -> Result<(), PipelineError> {
        match self {
            DatasetWriter::Csv { path, mut w } => w.flush().map_err(io_err(&path)),
            DatasetWriter::Binary { path, w, count } => {
                let mut file = w.into_inner().map_err(|e| io_err(&path)(e.into_error()))?;
                file.seek(SeekFrom::Start(6)).map_err(io_err(&path))?;
                file.write_all(&count.to_le_bytes())
                    .map_err(io_err(&path))?;
                file.flush().map_err(io_err(&path))
            }
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Streams records from a CSV or binary dataset (detected by magic).
pub enum DatasetReader {
    Csv {
        path: PathBuf,
        rows: csv::StringRecordsIntoIter<BufReader<File>>,
    },
    Binary {
        path: PathBuf,
        r: BufReader<File>,
        remaining: u64,
        ids: HashMap<[u8; 16], String>,
    },
}

impl DatasetReader {
    /// `ids` names the objects a binary file may reference; unknown hashes
    /// read back as their hex string.
    pub fn open(path: &Path, ids: &[String]) -> Result<DatasetReader, PipelineError> {
        let mut file = File::open(path).map_err(io_err(path))?;
        let mut magic = [0u8; 4];
        let n = file.read(&mut magic).map_err(io_err(path))?;
        file.seek(SeekFrom::Start(0)).map_err(io_err(path))?;
        let fmt_err = |m: String| PipelineError::Format {
            path: path.display().to_string(),
            message: m,
        };
        if n == 4 && &magic == BINARY_MAGIC {
            let mut r = BufReader::new(file);
            let mut head = [0u8; BINARY_HEADER_BYTES as usize];
            r.read_exact(&mut head).map_err(io_err(path))?;
            let version = u16::from_le_bytes([head[4], head[5]]);
            if version != BINARY_VERSION {
                return Err(fmt_err(format!("unsupported version {version}")));
            }
            let remaining = u64::from_le_bytes(head[6..14].try_into().unwrap());
            let len = std::fs::metadata(path).map_err(io_err(path))?.len();
            if len != BINARY_HEADER_BYTES + remaining * BINARY_RECORD_BYTES as u64 {
                return Err(fmt_err(format!(
                    "{remaining} records declared but file holds {len} bytes"
                )));
            }
            Ok(DatasetReader::Binary {
                path: path.to_path_buf(),
                r,
                remaining,
                ids: ids.iter().map(|id| (object_hash(id), id.clone())).collect(),
            })
        } else {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(BufReader::new(file));
            let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
            if header.iter().ne(CSV_COLUMNS.iter().copied()) {
                return Err(fmt_err(
                    "CSV header does not match the dataset columns".into(),
                ));
            }
            Ok(DatasetReader::Csv {
                path: path.to_path_buf(),
                rows: rdr.into_records(),
            })
        }
    }

    pub fn format(&self) -> DatasetFormat {
        match self {
            DatasetReader::Csv { .. } => DatasetFormat::Csv,
            DatasetReader::Binary { .. } => DatasetFormat::Binary,
        }
    }
}

impl Iterator for DatasetReader {
    type Item = Result<GraspRecord, PipelineError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            DatasetReader::Csv { path, rows } => {
                let row = match rows.next()? {
                    Ok(r) => r,
                    Err(e) => return Some(Err(csv_err(path, e))),
                };
                Some(parse_csv_row(path, &row))
            }
            DatasetReader::Binary {
                path,
                r,
                remaining,
                ids,
            } => {
                if *remaining == 0 {
                    return None;
                }
                *remaining -= 1;
                let mut buf = [0u8; BINARY_RECORD_BYTES];
                if let Err(e) = r.read_exact(&mut buf) {
                    return Some(Err(io_err(path)(e)));
                }
                let hash: [u8; 16] = buf[..16].try_into().unwrap();
                let id = ids
                    .get(&hash)
                    .cloned()
                    .unwrap_or_else(|| hash.iter().map(|b| format!("{b:02x}")).collect());
                let v: Vec<f64> = (0..27)
                    .map(|k| {
                        f32::from_le_bytes(buf[16 + 4 * k..20 + 4 * k].try_into().unwrap()) as f64
                    })
                    .collect();
                let flags = 16 + 4 * BINARY_FLOATS;
                Some(Ok(GraspRecord::from_numeric(
                    id,
                    &v,
                    buf[flags] != 0,
                    buf[flags + 1] != 0,
                )))
            }
        }
    }
}

fn parse_csv_row(path: &Path, row: &csv::StringRecord) -> Result<GraspRecord, PipelineError> {
    let bad = |m: String| PipelineError::Format {
        path: path.display().to_string(),
        message: format!("line {}: {m}", row.position().map_or(0, |p| p.line())),
    };
    if row.len() != CSV_COLUMNS.len() {
        return Err(bad(format!(
            "{} fields, expected {}",
            row.len(),
            CSV_COLUMNS.len()
        )));
    }
    let mut v = [0.0; 27];
    for (k, x) in v.iter_mut().enumerate() {
        let field = &row[k + 1];
        *x = parse_f64(field).ok_or_else(|| {
            bad(format!(
                "column {}: not a number: {field:?}",
                CSV_COLUMNS[k + 1]
            ))
        })?;
    }
    let flag = |k: usize| match &row[k] {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(bad(format!(
            "column {}: expected 0 or 1, got {other:?}",
            CSV_COLUMNS[k]
        ))),
    };
    Ok(GraspRecord::from_numeric(
        row[0].to_string(),
        &v,
        flag(28)?,
        flag(29)?,
    ))
}

/// Sidecar describing how a dataset was produced, written next to it as
/// `<dataset>.meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u16,
    pub config: RunConfig,
}

impl DatasetMeta {
    pub fn new(cfg: &RunConfig) -> Self {
        DatasetMeta {
            format_version: BINARY_VERSION,
            config: cfg.clone(),
        }
    }

    pub fn sidecar_path(dataset: &Path) -> PathBuf {
        let mut name = dataset.as_os_str().to_owned();
        name.push(".meta.json");
        PathBuf::from(name)
    }

    pub fn write(&self, dataset: &Path) -> Result<(), PipelineError> {
        let path = Self::sidecar_path(dataset);
        let text = serde_json::to_string_pretty(self).expect("meta serializes");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    /// `None` when the dataset has no sidecar.
    pub fn read(dataset: &Path) -> Result<Option<DatasetMeta>, PipelineError> {
        let path = Self::sidecar_path(dataset);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| PipelineError::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.config.objects.iter().map(|o| o.id.clone()).collect()
    }
}

/// All records of a dataset, with object ids resolved through the sidecar
/// when there is one.
pub fn read_dataset(path: &Path) -> Result<(Vec<GraspRecord>, Option<DatasetMeta>), PipelineError> {
    let meta = DatasetMeta::read(path)?;
    let ids = meta.as_ref().map(|m| m.object_ids()).unwrap_or_default();
    let records = DatasetReader::open(path, &ids)?.collect::<Result<Vec<_>, _>>()?;
    Ok((records, meta))
}
