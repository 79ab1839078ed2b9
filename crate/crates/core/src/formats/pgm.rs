//! Binary greymap (P5) codec, plus PNG decoding for occupancy images.

use super::FormatError;

pub const DEFAULT_COMMENT: &str = " written by mapforge";

/// An 8-bit greyscale raster in image order (row 0 is the top row).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Text of the first header comment, without the leading `#`.
    pub comment: Option<String>,
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn is_png(bytes: &[u8]) -> bool {
    bytes.starts_with(PNG_MAGIC)
}

pub fn is_pgm(bytes: &[u8]) -> bool {
    bytes.len() >= 3 && &bytes[..2] == b"P5" && bytes[2].is_ascii_whitespace()
}

/// Decodes a P5 greymap or a PNG (converted to greyscale).
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, FormatError> {
    if is_png(bytes) {
        decode_png(bytes)
    } else {
        decode_pgm(bytes)
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, FormatError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| FormatError::UnsupportedImageEncoding(format!("png: {e}")))?
        .to_luma8();
    Ok(GrayImage {
        width: img.width() as usize,
        height: img.height() as usize,
        pixels: img.into_raw(),
        comment: None,
    })
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    comment: Option<String>,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                let start = self.pos + 1;
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                if self.comment.is_none() {
                    self.comment = Some(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned());
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, FormatError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                FormatError::malformed(format!("pgm header byte {start}"), format!("expected {what}"))
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, FormatError> {
    if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1] != b'5' {
        return Err(FormatError::UnsupportedImageEncoding(format!(
            "netpbm variant P{} (only binary P5 is supported)",
            bytes[1] as char
        )));
    }
    if !is_pgm(bytes) {
        return Err(FormatError::UnsupportedImageEncoding(
            "not a P5 greymap or PNG image".to_string(),
        ));
    }
    let mut h = Header { bytes, pos: 2, comment: None };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(FormatError::UnsupportedImageEncoding(format!(
            "maxval {maxval} (only 255 is supported)"
        )));
    }
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(FormatError::malformed(
            format!("pgm header byte {}", h.pos),
            "expected whitespace after maxval",
        ));
    }
    let data = &bytes[h.pos + 1..];
    let expected = width * height;
    if data.len() != expected {
        return Err(FormatError::ImageMetaMismatch(format!(
            "header declares {width}x{height} ({expected} bytes), payload has {} bytes",
            data.len()
        )));
    }
    Ok(GrayImage { width, height, pixels: data.to_vec(), comment: h.comment })
}

/// Writes `P5\n#<comment>\n<w> <h>\n255\n<data>`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let comment = img.comment.as_deref().unwrap_or(DEFAULT_COMMENT);
    let mut out = format!("P5\n#{comment}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_header_round_trips() {
        let img = GrayImage {
            width: 3,
            height: 2,
            pixels: vec![0, 128, 255, 10, 20, 30],
            comment: Some(" CREATOR: map_saver.cpp 0.050 m/pix".into()),
        };
        let bytes = encode_pgm(&img);
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_pgm(&back), bytes);
    }

    #[test]
    fn header_without_comment() {
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend([7, 9]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.pixels, vec![7, 9]);
        assert_eq!(img.comment, None);
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend([0; 10]);
        assert!(matches!(decode_pgm(&bytes), Err(FormatError::ImageMetaMismatch(_))));
    }

    #[test]
    fn ascii_and_deep_variants_rejected() {
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n0\n"),
            Err(FormatError::UnsupportedImageEncoding(_))
        ));
        let mut deep = b"P5\n1 1\n65535\n".to_vec();
        deep.extend([0, 0]);
        assert!(matches!(decode_pgm(&deep), Err(FormatError::UnsupportedImageEncoding(_))));
    }

    #[test]
    fn png_is_converted_to_grey() {
        let mut buf = Vec::new();
        let rgb = image::RgbImage::from_raw(2, 1, vec![255, 255, 255, 0, 0, 0]).unwrap();
        rgb.write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png).unwrap();
        let img = decode_image(&buf).unwrap();
        assert_eq!(img.pixels, vec![255, 0]);
    }
}
