//! Snapshot export to 8-bit PGM rasters and CSV tables.
//!
//! Input arrays are read as `(nx, ny)`, `(frames, nx, ny)` or
//! `(frames, nx, ny, nz)`; 3D frames are cut at the middle `z` index.
//! Image rows follow the first grid axis and columns the second.

use std::io::Write;

use awsim_core::dataset::npy::NpyArray;

/// One 2D slice, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn frame_count(array: &NpyArray) -> Result<usize, String> {
    match array.shape.len() {
        2 => Ok(1),
        3 | 4 => Ok(array.shape[0]),
        n => Err(format!("expected a 2, 3 or 4 dimensional array, got {n} dimensions")),
    }
}

/// Extracts frame `index`; `None` selects the last one.
pub fn select_frame(array: &NpyArray, index: Option<usize>) -> Result<Frame, String> {
    let count = frame_count(array)?;
    if count == 0 {
        return Err("array holds no frames".into());
    }
    let k = index.unwrap_or(count - 1);
    if k >= count {
        return Err(format!("frame {k} out of range, file holds {count}"));
    }
    let s = &array.shape;
    match s.len() {
        2 => Ok(Frame {
            rows: s[0],
            cols: s[1],
            values: array.data.clone(),
        }),
        3 => {
            let size = s[1] * s[2];
            Ok(Frame {
                rows: s[1],
                cols: s[2],
                values: array.data[k * size..(k + 1) * size].to_vec(),
            })
        }
        _ => {
            let (nx, ny, nz) = (s[1], s[2], s[3]);
            let mid = nz / 2;
            let base = k * nx * ny * nz;
            let values = (0..nx * ny).map(|ij| array.data[base + ij * nz + mid]).collect();
            Ok(Frame { rows: nx, cols: ny, values })
        }
    }
}

/// Min-max normalization to 0..=255; a constant frame maps to 128.
pub fn to_gray(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![128; values.len()];
    }
    let scale = 255.0 / (hi - lo);
    values
        .iter()
        .map(|v| ((v - lo) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary (P5) PGM.
pub fn write_pgm<W: Write>(frame: &Frame, mut w: W) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", frame.cols, frame.rows)?;
    w.write_all(&to_gray(&frame.values))
}

/// One line per grid row, shortest round-trip float formatting.
pub fn write_csv<W: Write>(frame: &Frame, mut w: W) -> std::io::Result<()> {
    for row in frame.values.chunks(frame.cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
