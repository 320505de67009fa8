//! On-disk matrix formats.
//!
//! NMFB layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `NMFB`                  |
//! | 4      | 4    | u32 version (= 1)             |
//! | 8      | 8    | u64 rows                      |
//! | 16     | 8    | u64 cols                      |
//! | 24     | 8·rc | f64 entries, row-major        |

use super::DenseMatrix;
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const NMFB_MAGIC: [u8; 4] = *b"NMFB";
pub const NMFB_VERSION: u32 = 1;

pub fn write_nmfb(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        w.write_all(&NMFB_MAGIC)?;
        w.write_all(&NMFB_VERSION.to_le_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for v in m.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

pub fn read_nmfb(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut header = [0u8; 24];
    r.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if header[..4] != NMFB_MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != NMFB_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != len * 8 {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", len * 8, bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite entry"));
    }
    DenseMatrix::new(rows as usize, cols as usize, data)
}

/// One row per line, comma-separated, shortest round-trip decimal form.
pub fn write_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        for row in m.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let v: f64 = tok.trim().parse().map_err(|_| {
                    Error::format(path, format!("line {}: bad number {tok:?}", lineno + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(
                        path,
                        format!("line {}: non-finite entry", lineno + 1),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{gaussian_matrix, RngSeed};
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.nmfb");
        let m = DenseMatrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        write_nmfb(&p, &m).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"NMFB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 3 * 8);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.nmfb");
        std::fs::write(&p, b"NMFX\x01\0\0\0").unwrap();
        assert!(matches!(read_nmfb(&p), Err(Error::Format { .. })));

        let m = DenseMatrix::identity(2);
        write_nmfb(&p, &m).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_nmfb(&p), Err(Error::Format { .. })));

        assert!(matches!(
            read_nmfb(dir.path().join("missing.nmfb")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = gaussian_matrix(7, 4, RngSeed(11)).unwrap();
        write_csv(&p, &m).unwrap();
        assert_eq!(read_csv(&p).unwrap(), m);

        std::fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_csv(&p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn nmfb_round_trips_bit_exactly(rows in 1usize..40, cols in 1usize..40, seed in any::<u64>()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.nmfb");
            let m = gaussian_matrix(rows, cols, RngSeed(seed)).unwrap().scaled(1e-3);
            write_nmfb(&p, &m).unwrap();
            let back = read_nmfb(&p).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.data().iter().zip(m.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
