//! Scan container: a binary 16-bit PGM image (rows are azimuths, columns
//! range bins) next to a text sidecar with the same stem and a `.txt`
//! extension.
//!
//! Sidecar layout:
//!
//! ```text
//! range_resolution 0.25
//! min_range 0
//! rows
//! <timestamp_us> <angle_urad>     one line per azimuth
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use radodom_core::radar::PolarScan;

use crate::error::{read_file, read_text, write_file, IoError, Location, Result};

pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("txt")
}

/// Write `scan` to `image` and its sidecar. Intensities are rounded to the
/// nearest integer and clamped to `[0, 65535]`.
pub fn save_scan(scan: &PolarScan, image: &Path) -> Result<()> {
    let (rows, cols) = (scan.azimuths(), scan.bins());
    let mut bytes = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    bytes.reserve(2 * rows * cols);
    for &v in scan.intensities() {
        let q = v.round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    write_file(image, &bytes)?;

    let mut side = String::with_capacity(24 * rows + 64);
    let _ = writeln!(side, "range_resolution {}", scan.range_resolution());
    let _ = writeln!(side, "min_range {}", scan.min_range());
    side.push_str("rows\n");
    for (t, a) in scan.azimuth_timestamps().iter().zip(scan.azimuth_angles()) {
        let _ = writeln!(side, "{} {}", to_fixed(*t, 1e6), to_fixed(*a, 1e6));
    }
    write_file(&sidecar_path(image), side.as_bytes())
}

pub fn load_scan(image: &Path) -> Result<PolarScan> {
    let (cols, rows, intensities) = read_pgm(image)?;
    let side_path = sidecar_path(image);
    let side = parse_sidecar(&side_path, &read_text(&side_path)?, rows)?;
    PolarScan::new(rows, cols, intensities, side.timestamps, side.angles, side.range_resolution, side.min_range)
        .map_err(|e| IoError::format(image, Location::Header, e.to_string()))
}

fn to_fixed(x: f64, scale: f64) -> i64 {
    (x * scale).round() as i64
}

fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = read_file(path)?;
    let bad = |msg: &str| IoError::format(path, Location::Header, msg);
    let mut pos = 0;
    let mut token = || -> Option<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| &bytes[start..pos])
    };
    if token() != Some(b"P5") {
        return Err(bad("not a binary PGM (expected magic P5)"));
    }
    let mut number = |name: &str| -> Result<usize> {
        token()
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("missing or invalid {name}")))
    };
    let cols = number("width")?;
    let rows = number("height")?;
    let maxval = number("maxval")?;
    if !(1..=65535).contains(&maxval) {
        return Err(bad("maxval must be in 1..=65535"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let width = if maxval > 255 { 2 } else { 1 };
    let expected = rows * cols * width;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < expected {
        let complete = raster.len() / (cols * width).max(1);
        return Err(IoError::format(
            path,
            Location::Row(complete),
            format!("image truncated: {} of {rows} rows present", complete),
        ));
    }
    let intensities = if width == 2 {
        raster[..expected].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f32).collect()
    } else {
        raster[..expected].iter().map(|&b| b as f32).collect()
    };
    Ok((cols, rows, intensities))
}

#[derive(Debug)]
struct Sidecar {
    range_resolution: f64,
    min_range: f64,
    timestamps: Vec<f64>,
    angles: Vec<f64>,
}

fn parse_sidecar(path: &Path, text: &str, rows: usize) -> Result<Sidecar> {
    let mut range_resolution = None;
    let mut min_range = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut saw_rows = false;
    for (n, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "rows" {
            saw_rows = true;
            break;
        }
        let (key, value) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let slot = match key {
            "range_resolution" => &mut range_resolution,
            "min_range" => &mut min_range,
            _ => return Err(IoError::format(path, Location::Line(n), format!("unknown field `{key}`"))),
        };
        let v: f64 = value.trim().parse().map_err(|_| {
            IoError::format(path, Location::Field(key.into()), format!("invalid number `{}`", value.trim()))
        })?;
        *slot = Some(v);
    }
    let field = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| IoError::format(path, Location::Field(name.into()), "missing field"))
    };
    let range_resolution = field(range_resolution, "range_resolution")?;
    let min_range = field(min_range, "min_range")?;
    if !saw_rows {
        return Err(IoError::format(path, Location::Field("rows".into()), "missing field"));
    }

    let mut timestamps = Vec::with_capacity(rows);
    let mut angles = Vec::with_capacity(rows);
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = timestamps.len();
        if row == rows {
            return Err(IoError::format(
                path,
                Location::Row(row),
                format!("sidecar has more rows than the image ({rows}) at line {n}"),
            ));
        }
        let mut it = line.split_whitespace().map(str::parse::<i64>);
        let (Some(Ok(t)), Some(Ok(a)), None) = (it.next(), it.next(), it.next()) else {
            return Err(IoError::format(
                path,
                Location::Row(row),
                format!("expected `<timestamp_us> <angle_urad>` at line {n}"),
            ));
        };
        let t = t as f64 / 1e6;
        if timestamps.last().is_some_and(|&prev| t <= prev) {
            return Err(IoError::format(path, Location::Row(row), "azimuth timestamps not increasing"));
        }
        timestamps.push(t);
        angles.push(a as f64 / 1e6);
    }
    if timestamps.len() != rows {
        return Err(IoError::format(
            path,
            Location::Row(timestamps.len()),
            format!("sidecar has {} rows, image has {rows}", timestamps.len()),
        ));
    }
    Ok(Sidecar { range_resolution, min_range, timestamps, angles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(rows: usize, cols: usize) -> PolarScan {
        let intensities = (0..rows * cols).map(|i| ((i * 7919) % 65536) as f32).collect();
        let ts = (0..rows).map(|a| 12.5 + a as f64 * 0.25 / rows as f64).collect();
        let angles = (0..rows).map(|a| a as f64 * std::f64::consts::TAU / rows as f64).collect();
        PolarScan::new(rows, cols, intensities, ts, angles, 0.0438, 0.25).unwrap()
    }

    #[test]
    fn round_trip_and_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let s = scan(400, 1000);
        save_scan(&s, &p).unwrap();
        let back = load_scan(&p).unwrap();
        assert_eq!((back.azimuths(), back.bins()), (400, 1000));
        assert_eq!(back.intensities(), s.intensities());
        assert_eq!(back.range_resolution(), s.range_resolution());
        assert_eq!(back.min_range(), s.min_range());
        for (a, b) in back.azimuth_timestamps().iter().zip(s.azimuth_timestamps()) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in back.azimuth_angles().iter().zip(s.azimuth_angles()) {
            assert!((a - b).abs() < 1e-6);
        }
        // A second save of the loaded scan is byte-identical.
        let q = dir.path().join("b.pgm");
        save_scan(&back, &q).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        assert_eq!(std::fs::read(sidecar_path(&p)).unwrap(), std::fs::read(sidecar_path(&q)).unwrap());
    }

    #[test]
    fn sidecar_errors_name_what_is_wrong() {
        let p = Path::new("x.txt");
        let err = parse_sidecar(p, "range_resolution 0.1\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Field("min_range".into())));
        let err = parse_sidecar(p, "range_resolution 0.1\nmin_range 0\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Field("rows".into())));
        let err = parse_sidecar(p, "range_resolution 0.1\nmin_range 0\nrows\n0 0\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Row(1)));
        let err = parse_sidecar(p, "range_resolution 0.1\nmin_range 0\nrows\n5 0\n5 1\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Row(1)));
        let err = parse_sidecar(p, "range_resolution 0.1\nmin_range 0\nrows\n0 0\n1 1\n2 2\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Row(2)));
        let err = parse_sidecar(p, "range_resolution abc\n", 2).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Field("range_resolution".into())));
    }

    #[test]
    fn eight_bit_and_comments_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.pgm");
        let mut img = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        img.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        std::fs::write(&p, img).unwrap();
        std::fs::write(sidecar_path(&p), "min_range 0\nrange_resolution 1\nrows\n0 0\n100 3141592\n").unwrap();
        let s = load_scan(&p).unwrap();
        assert_eq!(s.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn truncated_image_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        save_scan(&scan(10, 20), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 100);
        std::fs::write(&p, bytes).unwrap();
        let err = load_scan(&p).unwrap_err();
        assert_eq!(err.location(), Some(&Location::Row(7)));
    }
}
