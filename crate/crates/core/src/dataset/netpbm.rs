use std::fs;
use std::path::Path;

use super::DatasetError;
use crate::tensor::Tensor;

fn format_err(msg: impl Into<String>) -> DatasetError {
    DatasetError::Format(msg.into())
}

/// Reads whitespace-separated header integers, skipping `#` comments.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
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

    fn number(&mut self, what: &str) -> Result<usize, DatasetError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(format!("missing or non-numeric {what} at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("{what} out of range")))
    }
}

/// Decodes binary P5 (gray) or P6 (RGB) into an `H×W×3` tensor in `[0, 1]`.
/// Gray images are replicated across the three channels.
pub fn load_netpbm(bytes: &[u8]) -> Result<Tensor<f32>, DatasetError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(format_err("bad magic: expected P5 or P6")),
    };
    let mut hdr = Header { bytes, pos: 2 };
    if !hdr.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(format_err("bad magic: expected whitespace after P5/P6"));
    }
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format_err(format!("maxval {maxval} unsupported (1..=255)")));
    }
    match bytes.get(hdr.pos) {
        Some(b) if b.is_ascii_whitespace() => hdr.pos += 1,
        _ => return Err(format_err("truncated header after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| format_err("image dimensions overflow"))?;
    let raster = &bytes[hdr.pos..];
    if raster.len() < need {
        return Err(format_err(format!(
            "truncated payload: {} of {need} bytes",
            raster.len()
        )));
    }
    let scale = 1.0 / maxval as f32;
    let mut data = Vec::with_capacity(width * height * 3);
    if channels == 3 {
        for &v in &raster[..need] {
            if usize::from(v) > maxval {
                return Err(format_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(f32::from(v) * scale);
        }
    } else {
        for &v in &raster[..need] {
            if usize::from(v) > maxval {
                return Err(format_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            let g = f32::from(v) * scale;
            data.extend([g, g, g]);
        }
    }
    Tensor::from_vec(&[height, width, 3], data).map_err(|e| format_err(e.to_string()))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor<f32>, DatasetError> {
    load_netpbm(&fs::read(path)?)
}

/// Encodes an `H×W×3` tensor as binary P6 with maxval 255.
pub fn encode_ppm(image: &Tensor<f32>) -> Result<Vec<u8>, DatasetError> {
    let [h, w, 3] = *image.shape() else {
        return Err(DatasetError::Input(format!(
            "expected an HxWx3 image, got {:?}",
            image.shape()
        )));
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_pixel() {
        let t = load_netpbm(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(t.shape(), &[1, 1, 3]);
        assert_eq!(t.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn gray_is_replicated() {
        let t = load_netpbm(b"P5\n1 1\n255\n\x80").unwrap();
        let g = 128.0f32 / 255.0;
        assert_eq!(t.data(), &[g, g, g]);
        assert!((g - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn comments_are_ignored() {
        let plain = load_netpbm(b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        let commented = load_netpbm(b"P6\n# drone frame\n2 # width\n1\n# max\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        assert_eq!(plain, commented);
    }

    #[test]
    fn small_maxval_scales() {
        let t = load_netpbm(b"P5 2 1 15\n\x0f\x05").unwrap();
        assert_eq!(t.data()[0], 1.0);
        assert!((t.data()[3] - 5.0 / 15.0).abs() < 1e-7);
    }

    #[test]
    fn defects_are_named() {
        let cases: [(&[u8], &str); 6] = [
            (b"P3\n1 1\n255\n1 2 3", "magic"),
            (b"P6\n2 2\n255\n\x00\x00", "truncated payload"),
            (b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00", "maxval"),
            (b"P6\n1 1\n0\n\x00\x00\x00", "maxval"),
            (b"P6\n1\n", "height"),
            (b"P6\n1 1\n255", "truncated header"),
        ];
        for (bytes, needle) in cases {
            let err = load_netpbm(bytes).unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} should mention {needle:?}");
        }
    }

    #[test]
    fn encode_then_decode_is_exact_for_8_bit_values() {
        let raw: Vec<u8> = (0..=255u8).chain(0..=255u8).chain(0..=255u8).collect();
        let mut bytes = b"P6\n256 1\n255\n".to_vec();
        bytes.extend(&raw);
        let img = load_netpbm(&bytes).unwrap();
        let again = load_netpbm(&encode_ppm(&img).unwrap()).unwrap();
        assert_eq!(img, again);
    }
}
