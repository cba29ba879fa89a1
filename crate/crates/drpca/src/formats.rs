//! On-disk formats: DMX1 and CSV matrices, hyperspectral cubes (JSON
//! sidecar plus raw binary, or one CSV per band), label maps and the CSV
//! outputs of the experiment commands.
//!
//! DMX1 layout: the bytes `DMX1`, rows and cols as little-endian `u64`, then
//! `rows * cols` little-endian `f64` in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use drpca_core::eval::RocCurve;
use drpca_core::hsi::HyperCube;
use drpca_core::DenseMatrix;
use serde::{Deserialize, Serialize};

pub const DMX_MAGIC: &[u8; 4] = b"DMX1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] drpca_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_dmx(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.data().len());
    out.extend_from_slice(DMX_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Decodes a DMX1 buffer; `path` only labels errors.
pub fn decode_dmx(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    if bytes.len() < 20 || &bytes[..4] != DMX_MAGIC {
        return Err(parse_err(path, "not a DMX1 file"));
    }
    let word =
        |k: usize| u64::from_le_bytes(bytes[4 + 8 * k..12 + 8 * k].try_into().expect("8 bytes"));
    let (rows, cols) = (word(0), word(1));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| parse_err(path, "matrix size overflows"))?;
    let payload = &bytes[20..];
    if count.checked_mul(8) != Some(payload.len()) {
        return Err(parse_err(
            path,
            format!(
                "{rows}x{cols} matrix needs {} payload bytes, found {}",
                count * 8,
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DenseMatrix::new(rows as usize, cols as usize, data)?)
}

/// Comma-separated rows; blank lines and lines starting with `#` are skipped.
pub fn parse_csv_matrix(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    format!(
                        "line {} has {} fields, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DenseMatrix::new(rows.len(), cols, data)?)
}

pub fn format_csv_matrix(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Reads a DMX1 file, or a CSV file when the magic bytes are absent.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(DMX_MAGIC) {
        return decode_dmx(&bytes, path);
    }
    let text =
        String::from_utf8(bytes).map_err(|_| parse_err(path, "neither DMX1 nor UTF-8 CSV"))?;
    parse_csv_matrix(&text, path)
}

/// Writes CSV when the extension is `.csv`, DMX1 otherwise.
pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let bytes = if is_csv {
        format_csv_matrix(m).into_bytes()
    } else {
        encode_dmx(m)
    };
    fs::write(path, bytes).map_err(io_err(path))
}

/// JSON sidecar of a binary cube.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub dtype: String,
    pub order: String,
    /// Binary file next to the sidecar; defaults to the sidecar path with a
    /// `.bin` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

fn binary_path(sidecar: &Path, header: &CubeHeader) -> PathBuf {
    match &header.data {
        Some(name) => sidecar.parent().unwrap_or(Path::new(".")).join(name),
        None => sidecar.with_extension("bin"),
    }
}

/// Loads a cube from a JSON sidecar (with its raw little-endian `f64`
/// band-major binary) or from a directory holding one `h × w` CSV per band,
/// taken in file-name order.
pub fn read_cube(path: &Path) -> Result<HyperCube> {
    if path.is_dir() {
        return read_cube_dir(path);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let header: CubeHeader =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    if header.dtype != "f64" {
        return Err(parse_err(
            path,
            format!("unsupported dtype {:?}, expected \"f64\"", header.dtype),
        ));
    }
    if header.order != "band-major" {
        return Err(parse_err(
            path,
            format!(
                "unsupported order {:?}, expected \"band-major\"",
                header.order
            ),
        ));
    }
    let bin = binary_path(path, &header);
    let bytes = fs::read(&bin).map_err(io_err(&bin))?;
    if bytes.len() % 8 != 0 {
        return Err(parse_err(&bin, "length is not a multiple of 8"));
    }
    let voxels = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(HyperCube::new(
        header.height,
        header.width,
        header.bands,
        voxels,
        None,
    )?)
}

fn read_cube_dir(dir: &Path) -> Result<HyperCube> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(parse_err(dir, "no band CSV files"));
    }
    let mut voxels = Vec::new();
    let mut shape = None;
    for f in &files {
        let band = read_matrix(f)?;
        match shape {
            None => shape = Some(band.shape()),
            Some(s) if s != band.shape() => {
                return Err(parse_err(
                    f,
                    format!("band is {:?}, expected {:?}", band.shape(), s),
                ));
            }
            _ => {}
        }
        voxels.extend_from_slice(band.data());
    }
    let (h, w) = shape.expect("at least one band");
    Ok(HyperCube::new(h, w, files.len(), voxels, None)?)
}

/// Writes `<path>` (JSON sidecar) and the binary next to it.
pub fn write_cube(path: &Path, cube: &HyperCube) -> Result<()> {
    let header = CubeHeader {
        height: cube.height(),
        width: cube.width(),
        bands: cube.bands(),
        dtype: "f64".into(),
        order: "band-major".into(),
        data: None,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(path, json).map_err(io_err(path))?;
    let bin = binary_path(path, &header);
    let mut out = Vec::with_capacity(cube.voxels().len() * 8);
    for v in cube.voxels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, out).map_err(io_err(&bin))
}

/// Label map: `h` rows of `w` nonnegative integers.
pub fn read_labels(path: &Path) -> Result<(usize, usize, Vec<u32>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut width = None;
    let mut labels = Vec::new();
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<u32>, _>>()
            .map_err(|e| parse_err(path, format!("line {}: {e}", lineno + 1)))?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(parse_err(
                path,
                format!("line {} has a different width", lineno + 1),
            ));
        }
        labels.extend(row);
        height += 1;
    }
    Ok((height, width.unwrap_or(0), labels))
}

pub fn write_labels(path: &Path, height: usize, width: usize, labels: &[u32]) -> Result<()> {
    let mut out = String::new();
    for r in 0..height {
        let row: Vec<String> = labels[r * width..(r + 1) * width]
            .iter()
            .map(u32::to_string)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// `threshold,tpr,fpr` rows.
pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "threshold,tpr,fpr")?;
        for ((t, tp), fp) in curve.thresholds.iter().zip(&curve.tpr).zip(&curve.fpr) {
            writeln!(w, "{t},{tp},{fp}")?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// Per-pixel values given in unfolded (column-major pixel) order, written as
/// an `h × w` image grid.
pub fn write_score_map(path: &Path, scores: &[f64], height: usize, width: usize) -> Result<()> {
    let grid = DenseMatrix::from_fn(height, width, |r, c| scores[c * height + r]);
    fs::write(path, format_csv_matrix(&grid)).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}
