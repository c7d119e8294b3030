use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};

/// A decoded grayscale image with pixels scaled to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .filter(|t| !t.is_empty())
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("missing {what}"))?;
        tok.parse().map_err(|_| format!("bad {what} {tok:?}"))
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let magic = r.token().ok_or("empty file")?.to_string();
    if magic != "P2" && magic != "P5" {
        return Err(format!("unsupported magic number {magic:?}"));
    }
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width * height;
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(count);

    if magic == "P2" {
        for _ in 0..count {
            let v = r.number("pixel")?;
            if v > maxval {
                return Err(format!("pixel {v} exceeds maxval {maxval}"));
            }
            pixels.push(v as f64 / scale);
        }
    } else {
        // exactly one whitespace byte separates maxval from the raster
        let start = r.pos + 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let raster = bytes
            .get(start..start + count * bpp)
            .ok_or_else(|| format!("truncated raster: need {} bytes", count * bpp))?;
        for chunk in raster.chunks_exact(bpp) {
            let v = if bpp == 1 {
                chunk[0] as usize
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as usize
            };
            if v > maxval {
                return Err(format!("pixel {v} exceeds maxval {maxval}"));
            }
            pixels.push(v as f64 / scale);
        }
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Reads a binary (P5) or ASCII (P2) PGM file.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|message| Error::BadFile {
        path: path.to_path_buf(),
        message,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn is_pgm(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Loads a person-per-subdirectory image tree. Class ids follow the
/// lexicographic order of subdirectory names; images are flattened row-major.
pub fn load_pgm_dir(root: &Path) -> Result<Dataset> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::BadFile {
            path: root.to_path_buf(),
            message: "no class subdirectories".into(),
        });
    }

    let mut first: Option<(PathBuf, (usize, usize))> = None;
    let mut columns: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| is_pgm(p))
            .collect();
        if files.is_empty() {
            return Err(Error::BadFile {
                path: dir.clone(),
                message: "class directory contains no PGM images".into(),
            });
        }
        for file in files {
            let img = read_pgm(&file)?;
            let dims = (img.width, img.height);
            match &first {
                None => first = Some((file.clone(), dims)),
                Some((p, fd)) if *fd != dims => {
                    return Err(Error::ImageDimensionMismatch {
                        first: p.clone(),
                        first_dims: *fd,
                        second: file,
                        second_dims: dims,
                    })
                }
                _ => {}
            }
            columns.extend_from_slice(&img.pixels);
            labels.push(class as u32);
        }
    }
    let (_, (w, h)) = first.expect("at least one image");
    let samples = DMatrix::from_vec(w * h, labels.len(), columns);
    Dataset::from_columns(samples, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_p5(path: &Path, w: usize, h: usize, fill: impl Fn(usize) -> u8) {
        let mut bytes = format!("P5\n# test image\n{w} {h}\n255\n").into_bytes();
        bytes.extend((0..w * h).map(fill));
        std::fs::write(path, bytes).unwrap();
    }

    #[test]
    fn two_classes_of_two_images() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["s1", "s2"] {
            std::fs::create_dir(dir.path().join(class)).unwrap();
            for k in 0..2 {
                write_p5(
                    &dir.path().join(class).join(format!("{k}.pgm")),
                    4,
                    4,
                    |i| i as u8,
                );
            }
        }
        let ds = load_pgm_dir(dir.path()).unwrap();
        assert_eq!((ds.n(), ds.d()), (4, 16));
        assert_eq!(ds.labels(), &[0, 0, 1, 1]);
        assert_eq!(ds.sample(0)[5], 5.0 / 255.0);
    }

    #[test]
    fn maxval_pixel_scales_to_one() {
        let img = decode(b"P5 2 1 255\n\xff\x00").unwrap();
        assert_eq!(img.pixels, vec![1.0, 0.0]);
        let img = decode(b"P2\n2 2\n15\n15 0\n# mid\n5 10\n").unwrap();
        assert_eq!(img.pixels, vec![1.0, 0.0, 5.0 / 15.0, 10.0 / 15.0]);
    }

    #[test]
    fn sixteen_bit_binary() {
        let img = decode(b"P5 1 1 65535\n\xff\xff").unwrap();
        assert_eq!(img.pixels, vec![1.0]);
    }

    #[test]
    fn mismatched_dimensions_name_both_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("a")).unwrap();
        std::fs::create_dir(dir.path().join("b")).unwrap();
        write_p5(&dir.path().join("a/x.pgm"), 4, 4, |_| 0);
        write_p5(&dir.path().join("b/y.pgm"), 8, 8, |_| 0);
        let msg = load_pgm_dir(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("x.pgm") && msg.contains("y.pgm"), "{msg}");
    }

    #[test]
    fn corrupt_header_and_empty_class() {
        assert!(decode(b"P6 1 1 255\n\x00").is_err());
        assert!(decode(b"P5 1 1\n").is_err());
        assert!(decode(b"P5 2 2 255\n\x00").is_err());
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("a")).unwrap();
        std::fs::create_dir(dir.path().join("b")).unwrap();
        write_p5(&dir.path().join("a/x.pgm"), 2, 2, |_| 0);
        let err = load_pgm_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no PGM images"), "{err}");
    }
}
