//! Decoding of PDF image XObjects into pixels.

use std::io::Cursor;

use image::{DynamicImage, GrayAlphaImage, GrayImage, ImageFormat as CodecFormat, RgbImage, RgbaImage};
use lopdf::{Document, Object, Stream};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DecodeIssue, ImageFormat};

/// Colour model of the samples as stored in the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorModel {
    Gray,
    GrayAlpha,
    Rgb,
    Rgba,
    Cmyk,
    Indexed,
    Unknown,
}

/// Decoded XObject: the encoded bytes to keep plus the pixels.
pub(crate) struct DecodedImage {
    pub bytes: Vec<u8>,
    pub format: ImageFormat,
    pub color: ColorModel,
    pub pixels: DynamicImage,
}

/// Digest of decoded RGB pixels, including dimensions.
pub fn pixel_hash(rgb: &RgbImage) -> String {
    let mut h = Sha256::new();
    h.update(rgb.width().to_le_bytes());
    h.update(rgb.height().to_le_bytes());
    h.update(rgb.as_raw());
    hex::encode(h.finalize())
}

/// Flattens to RGB, compositing any alpha channel over white.
pub(crate) fn flatten_rgb(img: &DynamicImage) -> RgbImage {
    if !img.color().has_alpha() {
        return img.to_rgb8();
    }
    let rgba = img.to_rgba8();
    let mut out = RgbImage::new(rgba.width(), rgba.height());
    for (dst, src) in out.pixels_mut().zip(rgba.pixels()) {
        let a = src[3] as u32;
        for c in 0..3 {
            let v = (src[c] as u32 * a + 255 * (255 - a) + 127) / 255;
            dst[c] = v as u8;
        }
    }
    out
}

pub(crate) fn encode_png(img: &DynamicImage) -> Result<Vec<u8>, String> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, CodecFormat::Png)
        .map_err(|e| e.to_string())?;
    Ok(buf.into_inner())
}

fn undecodable(detail: impl Into<String>) -> DecodeIssue {
    DecodeIssue {
        unsupported_colorspace: false,
        detail: detail.into(),
    }
}

fn unsupported(detail: impl Into<String>) -> DecodeIssue {
    DecodeIssue {
        unsupported_colorspace: true,
        detail: detail.into(),
    }
}

fn deref<'a>(doc: &'a Document, obj: &'a Object) -> &'a Object {
    doc.dereference(obj).map(|(_, o)| o).unwrap_or(obj)
}

fn dict_int(doc: &Document, stream: &Stream, key: &[u8]) -> Option<i64> {
    stream
        .dict
        .get(key)
        .ok()
        .map(|o| deref(doc, o))
        .and_then(|o| o.as_i64().ok())
}

/// Resolved colour space of raw samples.
enum Space {
    Gray,
    Rgb,
    Cmyk,
    Indexed {
        base: Box<Space>,
        hival: usize,
        lookup: Vec<u8>,
    },
}

impl Space {
    fn components(&self) -> usize {
        match self {
            Space::Gray => 1,
            Space::Rgb => 3,
            Space::Cmyk => 4,
            Space::Indexed { .. } => 1,
        }
    }
}

fn resolve_space(doc: &Document, obj: &Object) -> Result<Space, DecodeIssue> {
    match deref(doc, obj) {
        Object::Name(n) => match n.as_slice() {
            b"DeviceGray" | b"CalGray" | b"G" => Ok(Space::Gray),
            b"DeviceRGB" | b"CalRGB" | b"RGB" => Ok(Space::Rgb),
            b"DeviceCMYK" | b"CMYK" => Ok(Space::Cmyk),
            other => Err(unsupported(String::from_utf8_lossy(other).into_owned())),
        },
        Object::Array(items) if !items.is_empty() => {
            let family = deref(doc, &items[0]).as_name().unwrap_or(b"");
            match family {
                b"ICCBased" => {
                    let n = items
                        .get(1)
                        .map(|o| deref(doc, o))
                        .and_then(|o| o.as_stream().ok())
                        .and_then(|s| s.dict.get(b"N").ok())
                        .and_then(|o| o.as_i64().ok())
                        .unwrap_or(3);
                    match n {
                        1 => Ok(Space::Gray),
                        3 => Ok(Space::Rgb),
                        4 => Ok(Space::Cmyk),
                        n => Err(unsupported(format!("ICCBased with {n} components"))),
                    }
                }
                b"CalGray" => Ok(Space::Gray),
                b"CalRGB" => Ok(Space::Rgb),
                b"Indexed" | b"I" if items.len() >= 4 => {
                    let base = resolve_space(doc, &items[1])?;
                    if matches!(base, Space::Indexed { .. }) {
                        return Err(unsupported("nested Indexed"));
                    }
                    let hival = deref(doc, &items[2])
                        .as_i64()
                        .map_err(|_| undecodable("Indexed hival"))?
                        .clamp(0, 255) as usize;
                    let lookup = match deref(doc, &items[3]) {
                        Object::String(bytes, _) => bytes.clone(),
                        Object::Stream(s) => s
                            .decompressed_content()
                            .unwrap_or_else(|_| s.content.clone()),
                        _ => return Err(undecodable("Indexed lookup")),
                    };
                    Ok(Space::Indexed {
                        base: Box::new(base),
                        hival,
                        lookup,
                    })
                }
                other => Err(unsupported(String::from_utf8_lossy(other).into_owned())),
            }
        }
        _ => Err(undecodable("missing or malformed ColorSpace")),
    }
}

/// Unpacks `bpc`-bit samples, rows padded to whole bytes, into 8-bit values.
fn unpack_samples(data: &[u8], width: usize, height: usize, comps: usize, bpc: u8, scale: bool) -> Option<Vec<u8>> {
    let per_row = width * comps;
    match bpc {
        8 => {
            let need = per_row * height;
            (data.len() >= need).then(|| data[..need].to_vec())
        }
        16 => {
            let need = per_row * height * 2;
            (data.len() >= need).then(|| data[..need].iter().step_by(2).copied().collect())
        }
        1 | 2 | 4 => {
            let bits = bpc as usize;
            let row_bytes = (per_row * bits).div_ceil(8);
            if data.len() < row_bytes * height {
                return None;
            }
            let max = (1u16 << bits) - 1;
            let mut out = Vec::with_capacity(per_row * height);
            for row in data.chunks(row_bytes).take(height) {
                for i in 0..per_row {
                    let bit = i * bits;
                    let byte = row[bit / 8];
                    let shift = 8 - bits - (bit % 8);
                    let v = ((byte >> shift) as u16) & max;
                    out.push(if scale { (v * 255 / max) as u8 } else { v as u8 });
                }
            }
            Some(out)
        }
        _ => None,
    }
}

fn cmyk_to_rgb(c: u8, m: u8, y: u8, k: u8) -> [u8; 3] {
    let k = 255 - k as u32;
    let f = |v: u8| ((255 - v as u32) * k / 255) as u8;
    [f(c), f(m), f(y)]
}

fn samples_to_image(space: &Space, width: u32, height: u32, samples: &[u8]) -> Result<DynamicImage, DecodeIssue> {
    let n = (width as usize) * (height as usize);
    match space {
        Space::Gray => GrayImage::from_raw(width, height, samples[..n].to_vec())
            .map(DynamicImage::ImageLuma8)
            .ok_or_else(|| undecodable("gray buffer size")),
        Space::Rgb => RgbImage::from_raw(width, height, samples[..n * 3].to_vec())
            .map(DynamicImage::ImageRgb8)
            .ok_or_else(|| undecodable("rgb buffer size")),
        Space::Cmyk => {
            let rgb: Vec<u8> = samples[..n * 4]
                .chunks_exact(4)
                .flat_map(|p| cmyk_to_rgb(p[0], p[1], p[2], p[3]))
                .collect();
            Ok(DynamicImage::ImageRgb8(
                RgbImage::from_raw(width, height, rgb).ok_or_else(|| undecodable("cmyk buffer size"))?,
            ))
        }
        Space::Indexed { base, hival, lookup } => {
            let bc = base.components();
            let mut rgb = Vec::with_capacity(n * 3);
            for &idx in &samples[..n] {
                let i = (idx as usize).min(*hival);
                let entry = lookup
                    .get(i * bc..(i + 1) * bc)
                    .ok_or_else(|| undecodable("Indexed lookup too short"))?;
                match **base {
                    Space::Gray => rgb.extend_from_slice(&[entry[0]; 3]),
                    Space::Rgb => rgb.extend_from_slice(entry),
                    Space::Cmyk => rgb.extend(cmyk_to_rgb(entry[0], entry[1], entry[2], entry[3])),
                    Space::Indexed { .. } => unreachable!("nested Indexed rejected earlier"),
                }
            }
            Ok(DynamicImage::ImageRgb8(
                RgbImage::from_raw(width, height, rgb).ok_or_else(|| undecodable("indexed buffer size"))?,
            ))
        }
    }
}

fn soft_mask(doc: &Document, stream: &Stream, width: u32, height: u32) -> Option<Vec<u8>> {
    let mask = deref(doc, stream.dict.get(b"SMask").ok()?).as_stream().ok()?;
    let mw = dict_int(doc, mask, b"Width")? as u32;
    let mh = dict_int(doc, mask, b"Height")? as u32;
    if (mw, mh) != (width, height) {
        return None;
    }
    let bpc = dict_int(doc, mask, b"BitsPerComponent").unwrap_or(8) as u8;
    let data = mask.decompressed_content().unwrap_or_else(|_| mask.content.clone());
    unpack_samples(&data, width as usize, height as usize, 1, bpc, true)
}

fn with_alpha(img: DynamicImage, alpha: Vec<u8>) -> DynamicImage {
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(g) => {
            let raw: Vec<u8> = g.as_raw().iter().zip(&alpha).flat_map(|(&v, &a)| [v, a]).collect();
            DynamicImage::ImageLumaA8(GrayAlphaImage::from_raw(w, h, raw).expect("sized"))
        }
        other => {
            let rgb = other.to_rgb8();
            let raw: Vec<u8> = rgb
                .as_raw()
                .chunks_exact(3)
                .zip(&alpha)
                .flat_map(|(p, &a)| [p[0], p[1], p[2], a])
                .collect();
            DynamicImage::ImageRgba8(RgbaImage::from_raw(w, h, raw).expect("sized"))
        }
    }
}

fn color_of(img: &DynamicImage) -> ColorModel {
    match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) => ColorModel::Gray,
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => ColorModel::GrayAlpha,
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgba16(_) => ColorModel::Rgba,
        _ => ColorModel::Rgb,
    }
}

/// Decodes an image XObject stream.
pub(crate) fn decode_xobject(doc: &Document, stream: &Stream) -> Result<DecodedImage, DecodeIssue> {
    let filters: Vec<Vec<u8>> = match stream.dict.get(b"Filter").map(|o| deref(doc, o)) {
        Ok(Object::Name(n)) => vec![n.clone()],
        Ok(Object::Array(a)) => a
            .iter()
            .filter_map(|o| deref(doc, o).as_name().ok().map(<[u8]>::to_vec))
            .collect(),
        _ => Vec::new(),
    };
    let last = filters.last().map(Vec::as_slice);
    if matches!(last, Some(b"DCTDecode") | Some(b"DCT")) {
        if filters.len() > 1 {
            return Err(undecodable("DCTDecode behind another filter"));
        }
        let pixels = image::load_from_memory_with_format(&stream.content, CodecFormat::Jpeg)
            .map_err(|e| undecodable(format!("jpeg: {e}")))?;
        let color = match stream.dict.get(b"ColorSpace").ok().map(|o| resolve_space(doc, o)) {
            Some(Ok(Space::Cmyk)) => ColorModel::Cmyk,
            _ => color_of(&pixels),
        };
        return Ok(DecodedImage {
            bytes: stream.content.clone(),
            format: ImageFormat::Jpeg,
            color,
            pixels,
        });
    }
    if let Some(f) = last {
        if matches!(f, b"JPXDecode" | b"JBIG2Decode" | b"CCITTFaxDecode" | b"CCF") {
            return Err(undecodable(format!(
                "{} not supported",
                String::from_utf8_lossy(f)
            )));
        }
    }

    let width = dict_int(doc, stream, b"Width").filter(|w| *w > 0).ok_or_else(|| undecodable("missing Width"))? as u32;
    let height = dict_int(doc, stream, b"Height").filter(|h| *h > 0).ok_or_else(|| undecodable("missing Height"))? as u32;
    let is_mask = stream
        .dict
        .get(b"ImageMask")
        .ok()
        .and_then(|o| o.as_bool().ok())
        .unwrap_or(false);
    let (space, bpc) = if is_mask {
        (Space::Gray, 1u8)
    } else {
        let cs = stream
            .dict
            .get(b"ColorSpace")
            .map_err(|_| undecodable("missing ColorSpace"))?;
        let space = resolve_space(doc, cs)?;
        (space, dict_int(doc, stream, b"BitsPerComponent").unwrap_or(8) as u8)
    };
    let data = if filters.is_empty() {
        stream.content.clone()
    } else {
        stream
            .decompressed_content()
            .map_err(|e| undecodable(format!("stream filter: {e}")))?
    };
    let scale = !matches!(space, Space::Indexed { .. });
    let samples = unpack_samples(&data, width as usize, height as usize, space.components(), bpc, scale)
        .ok_or_else(|| undecodable(format!("sample data too short for {width}x{height} at {bpc} bpc")))?;
    let mut pixels = samples_to_image(&space, width, height, &samples)?;
    let mut color = match space {
        Space::Gray => ColorModel::Gray,
        Space::Rgb => ColorModel::Rgb,
        Space::Cmyk => ColorModel::Cmyk,
        Space::Indexed { .. } => ColorModel::Indexed,
    };
    if let Some(alpha) = soft_mask(doc, stream, width, height) {
        pixels = with_alpha(pixels, alpha);
        if color == ColorModel::Gray {
            color = ColorModel::GrayAlpha;
        } else if color == ColorModel::Rgb {
            color = ColorModel::Rgba;
        }
    }
    let bytes = encode_png(&pixels).map_err(undecodable)?;
    Ok(DecodedImage {
        bytes,
        format: ImageFormat::Png,
        color,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpack_one_bit_rows_are_byte_padded() {
        // 3 px wide, 2 rows: 101 / 010
        let data = [0b1010_0000, 0b0100_0000];
        let out = unpack_samples(&data, 3, 2, 1, 1, true).unwrap();
        assert_eq!(out, vec![255, 0, 255, 0, 255, 0]);
    }

    #[test]
    fn cmyk_extremes() {
        assert_eq!(cmyk_to_rgb(0, 0, 0, 0), [255, 255, 255]);
        assert_eq!(cmyk_to_rgb(0, 0, 0, 255), [0, 0, 0]);
        assert_eq!(cmyk_to_rgb(255, 0, 0, 0), [0, 255, 255]);
    }

    #[test]
    fn alpha_composites_over_white() {
        let img = DynamicImage::ImageRgba8(RgbaImage::from_raw(1, 1, vec![0, 0, 0, 0]).unwrap());
        assert_eq!(flatten_rgb(&img).as_raw(), &vec![255, 255, 255]);
    }

    #[test]
    fn hash_depends_on_shape() {
        let a = RgbImage::from_raw(2, 1, vec![0; 6]).unwrap();
        let b = RgbImage::from_raw(1, 2, vec![0; 6]).unwrap();
        assert_ne!(pixel_hash(&a), pixel_hash(&b));
        assert_eq!(pixel_hash(&a), pixel_hash(&a.clone()));
    }
}
