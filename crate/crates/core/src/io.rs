//! PGM images and CSV convergence traces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::driver::IterationTrace;
use crate::imaging::Image;

/// Column header of the trace CSV.
pub const TRACE_HEADER: &str = "iter,cost,psnr,step_norm,gamma_abs_sum,elapsed_s";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0} (at most 255)")]
    UnsupportedMaxval(u32),
    #[error("{}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_failure(path))?;
    decode_pgm(&bytes)
}

/// Writes binary P5; pixels are clipped to `[0, 255]` and rounded half away
/// from zero.
pub fn write_pgm(path: impl AsRef<Path>, image: &Image) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(io_failure(path))
}

pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|&p| p.clamp(0.0, 255.0).round() as u8),
    );
    out
}

/// Parses P5 (binary) or P2 (ASCII) with `#` comments in the header.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image, IoError> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(IoError::MalformedHeader(format!("unknown magic `{other}`"))),
    };
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::MalformedHeader(format!(
            "empty image {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(IoError::UnsupportedMaxval(maxval));
    }
    let n = width as usize * height as usize;
    let pixels: Vec<f64> = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cursor.pos + 1;
        let raster = bytes
            .get(start..start + n)
            .ok_or_else(|| IoError::MalformedHeader(format!("raster shorter than {n} bytes")))?;
        raster.iter().map(|&b| f64::from(b)).collect()
    } else {
        (0..n)
            .map(|_| cursor.number("pixel").map(f64::from))
            .collect::<Result<_, _>>()?
    };
    if pixels.iter().any(|&p| p > f64::from(maxval)) {
        return Err(IoError::MalformedHeader("pixel above maxval".into()));
    }
    Ok(Image::from_vec(width as usize, height as usize, pixels))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String, IoError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IoError::MalformedHeader("unexpected end of file".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<u32, IoError> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| IoError::MalformedHeader(format!("bad {what} `{tok}`")))
    }
}

fn opt(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map(fmt).unwrap_or_default()
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.15e}")
    } else {
        v.to_string()
    }
}

/// CSV text for a trace; missing values are empty fields.
pub fn format_trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace.records() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6}",
            r.iter,
            opt(r.cost, sci),
            opt(r.psnr, |p| if p.is_finite() {
                format!("{p:.6}")
            } else {
                p.to_string()
            }),
            sci(r.step_norm),
            opt(r.gamma_abs_sum, sci),
            r.elapsed_s
        );
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &IterationTrace) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, format_trace_csv(trace)).map_err(io_failure(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::IterationRecord;
    use crate::imaging::synthetic;

    fn integer_image(w: usize, h: usize, seed: u64) -> Image {
        synthetic::random(w, h, seed).map(f64::floor)
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let img = integer_image(16, 16, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        write_pgm(&path, &img).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn ascii_with_comments() {
        let text = b"P2\n# made by hand\n3 2 # width height\n# another\n255\n0 1 2\n253 254 255\n";
        let img = decode_pgm(text).unwrap();
        assert_eq!(img.dims(), (3, 2));
        assert_eq!(img.as_slice(), &[0.0, 1.0, 2.0, 253.0, 254.0, 255.0]);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let text = b"P2\n1 1\n65535\n7\n";
        assert!(matches!(
            decode_pgm(text),
            Err(IoError::UnsupportedMaxval(65535))
        ));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            decode_pgm(b"P6\n1 1\n255\n\0"),
            Err(IoError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\0\0"),
            Err(IoError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pgm(b"P2\nx 1\n255\n0"),
            Err(IoError::MalformedHeader(_))
        ));
        assert!(matches!(decode_pgm(b""), Err(IoError::MalformedHeader(_))));
    }

    #[test]
    fn missing_file_is_io_failure() {
        assert!(matches!(
            read_pgm("/nonexistent/dir/x.pgm"),
            Err(IoError::IoFailure { .. })
        ));
    }

    #[test]
    fn export_clips_and_rounds_half_away() {
        let img = Image::new(5, 1, vec![-3.0, 0.5, 1.49, 254.5, 300.0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 5..], &[0, 1, 1, 255, 255]);
    }

    fn record(iter: usize, psnr: Option<f64>) -> IterationRecord {
        IterationRecord {
            iter,
            cost: Some(1234.567890123456),
            psnr,
            step_norm: 0.25,
            gamma_abs_sum: None,
            elapsed_s: 0.5,
        }
    }

    #[test]
    fn trace_csv_layout() {
        let trace = IterationTrace::from_records(vec![
            record(1, Some(20.0)),
            record(2, None),
            record(3, Some(21.5)),
        ]);
        let csv = format_trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], TRACE_HEADER);
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[2], "");
        assert_eq!(fields[4], "");
        let cost: f64 = fields[1].parse().unwrap();
        assert!((cost - 1234.567890123456).abs() < 1e-9);
        let mantissa = fields[1].split('e').next().unwrap().replace('.', "");
        assert!(mantissa.len() >= 12);
    }

    #[test]
    fn trace_csv_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&path, &IterationTrace::from_records(vec![record(1, None)])).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
    }
}
