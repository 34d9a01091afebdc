//! Minimal content-stream interpreter recovering text-block and image geometry.
//!
//! Tracks the graphics state (`q`/`Q`/`cm`), the text state (`BT`..`ET`, `Tf`, `Tm`, `Td`,
//! `TD`, `T*`, `TL`, `Tc`, `Tw`, `Tz`, `Ts`) and the text-showing operators, and follows
//! `Do` into image and form XObjects. Glyph extents come from the font's `Widths` array when
//! present, otherwise half an em per glyph; vertical extents come from the font descriptor's
//! ascent/descent or [`DEFAULT_ASCENT`]/[`DEFAULT_DESCENT`].

use std::collections::HashMap;

use lopdf::content::Content;
use lopdf::Encoding;
use lopdf::{Dictionary, Document, Object, ObjectId};

use super::images::{decode_xobject, flatten_rgb, pixel_hash};
use super::{BBox, ColorModel, ExtractedImage, ImageFormat, PageGeometry, TextBlock};

/// Ascent (fraction of the font size) assumed when a font carries no descriptor.
pub const DEFAULT_ASCENT: f64 = 0.8;
pub const DEFAULT_DESCENT: f64 = 0.2;
const DEFAULT_GLYPH_WIDTH: f64 = 0.5;
const MAX_FORM_DEPTH: usize = 8;

/// Everything the pairing step needs from one page.
#[derive(Debug, Clone)]
pub struct PageLayout {
    pub geometry: PageGeometry,
    pub blocks: Vec<TextBlock>,
    pub images: Vec<ExtractedImage>,
}

type Matrix = [f64; 6];
const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
        a[4] * b[0] + a[5] * b[2] + b[4],
        a[4] * b[1] + a[5] * b[3] + b[5],
    ]
}

fn apply(m: &Matrix, x: f64, y: f64) -> (f64, f64) {
    (x * m[0] + y * m[2] + m[4], x * m[1] + y * m[3] + m[5])
}

fn num(obj: &Object) -> Option<f64> {
    match obj {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(*r as f64),
        _ => None,
    }
}

fn operand_matrix(ops: &[Object]) -> Option<Matrix> {
    if ops.len() < 6 {
        return None;
    }
    let mut m = [0.0; 6];
    for (slot, o) in m.iter_mut().zip(ops) {
        *slot = num(o)?;
    }
    Some(m)
}

fn deref<'a>(doc: &'a Document, obj: &'a Object) -> &'a Object {
    doc.dereference(obj).map(|(_, o)| o).unwrap_or(obj)
}

/// Media box of a page, following `Parent` links for inherited values.
fn media_box(doc: &Document, page_id: ObjectId) -> Option<[f64; 4]> {
    let mut node = doc.get_dictionary(page_id).ok()?;
    for _ in 0..32 {
        if let Ok(mb) = node.get(b"MediaBox") {
            let arr = deref(doc, mb).as_array().ok()?;
            if arr.len() == 4 {
                let v: Vec<f64> = arr.iter().filter_map(|o| num(deref(doc, o))).collect();
                if v.len() == 4 {
                    return Some([v[0].min(v[2]), v[1].min(v[3]), v[0].max(v[2]), v[1].max(v[3])]);
                }
            }
        }
        let parent = node.get(b"Parent").ok()?.as_reference().ok()?;
        node = doc.get_dictionary(parent).ok()?;
    }
    None
}

struct FontInfo<'a> {
    encoding: Option<Encoding<'a>>,
    first_char: i64,
    widths: Vec<f64>,
    two_byte: bool,
    ascent: f64,
    descent: f64,
}

impl<'a> FontInfo<'a> {
    fn load(doc: &'a Document, dict: &'a Dictionary) -> Self {
        let two_byte = dict.get(b"Subtype").and_then(Object::as_name).ok() == Some(b"Type0".as_slice());
        let first_char = dict
            .get(b"FirstChar")
            .ok()
            .and_then(|o| deref(doc, o).as_i64().ok())
            .unwrap_or(0);
        let widths = dict
            .get(b"Widths")
            .ok()
            .and_then(|o| deref(doc, o).as_array().ok())
            .map(|a| a.iter().map(|o| num(deref(doc, o)).unwrap_or(0.0) / 1000.0).collect())
            .unwrap_or_default();
        let descriptor = dict
            .get(b"FontDescriptor")
            .ok()
            .and_then(|o| deref(doc, o).as_dict().ok());
        let metric = |key: &[u8]| {
            descriptor
                .and_then(|d| d.get(key).ok())
                .and_then(|o| num(deref(doc, o)))
                .map(|v| v.abs() / 1000.0)
                .filter(|v| *v > 0.0)
        };
        Self {
            encoding: dict.get_font_encoding(doc).ok(),
            first_char,
            widths,
            two_byte,
            ascent: metric(b"Ascent").unwrap_or(DEFAULT_ASCENT),
            descent: metric(b"Descent").unwrap_or(DEFAULT_DESCENT),
        }
    }

    fn fallback() -> Self {
        Self {
            encoding: None,
            first_char: 0,
            widths: Vec::new(),
            two_byte: false,
            ascent: DEFAULT_ASCENT,
            descent: DEFAULT_DESCENT,
        }
    }

    fn decode(&self, bytes: &[u8]) -> String {
        if let Some(enc) = &self.encoding {
            if let Ok(s) = Document::decode_text(enc, bytes) {
                return s;
            }
        }
        bytes.iter().map(|&b| b as char).collect()
    }

    /// Advance of `bytes` in text-space units (before font size), and the number of
    /// glyphs and single-byte spaces.
    fn measure(&self, bytes: &[u8], text: &str) -> (f64, usize, usize) {
        if self.two_byte {
            let n = text.chars().count();
            return (n as f64 * DEFAULT_GLYPH_WIDTH, n, 0);
        }
        let mut w = 0.0;
        let mut spaces = 0;
        for &b in bytes {
            let idx = b as i64 - self.first_char;
            w += if idx >= 0 && (idx as usize) < self.widths.len() {
                self.widths[idx as usize]
            } else {
                DEFAULT_GLYPH_WIDTH
            };
            if b == b' ' {
                spaces += 1;
            }
        }
        (w, bytes.len(), spaces)
    }
}

/// A run of text in PDF user space (y upward).
#[derive(Debug, Clone)]
struct Span {
    text: String,
    x0: f64,
    x1: f64,
    baseline: f64,
    size: f64,
    ascent: f64,
    descent: f64,
}

#[derive(Default)]
struct TextState {
    tm: Option<Matrix>,
    tlm: Matrix,
    size: f64,
    leading: f64,
    char_spacing: f64,
    word_spacing: f64,
    hscale: f64,
    rise: f64,
    font: Vec<u8>,
}

struct Interpreter<'a> {
    doc: &'a Document,
    page_index: u32,
    spans: Vec<Span>,
    placed: Vec<(Matrix, ExtractedImage)>,
    issues: Vec<String>,
}

/// Resource dictionaries searched in order for a named entry.
#[derive(Clone)]
struct Resources<'a> {
    dicts: Vec<&'a Dictionary>,
}

impl<'a> Resources<'a> {
    fn lookup(&self, doc: &'a Document, category: &[u8], name: &[u8]) -> Option<&'a Object> {
        self.dicts.iter().find_map(|d| {
            let cat = deref(doc, d.get(category).ok()?).as_dict().ok()?;
            cat.get(name).ok().map(|o| deref(doc, o))
        })
    }
}

impl<'a> Interpreter<'a> {
    fn run(&mut self, ops: &[lopdf::content::Operation], res: &Resources<'a>, base_ctm: Matrix, depth: usize) {
        let mut ctm = base_ctm;
        let mut stack: Vec<Matrix> = Vec::new();
        let mut ts = TextState {
            hscale: 1.0,
            ..Default::default()
        };
        let mut fonts: HashMap<Vec<u8>, FontInfo<'a>> = HashMap::new();

        for op in ops {
            let o = &op.operands;
            match op.operator.as_str() {
                "q" => stack.push(ctm),
                "Q" => ctm = stack.pop().unwrap_or(base_ctm),
                "cm" => {
                    if let Some(m) = operand_matrix(o) {
                        ctm = mul(&m, &ctm);
                    }
                }
                "BT" => {
                    ts.tm = Some(IDENTITY);
                    ts.tlm = IDENTITY;
                }
                "ET" => ts.tm = None,
                "Tf" => {
                    if let (Some(name), Some(size)) = (o.first().and_then(|n| n.as_name().ok()), o.get(1).and_then(num)) {
                        ts.font = name.to_vec();
                        ts.size = size;
                        if !fonts.contains_key(name) {
                            let info = res
                                .lookup(self.doc, b"Font", name)
                                .and_then(|f| f.as_dict().ok())
                                .map(|d| FontInfo::load(self.doc, d))
                                .unwrap_or_else(FontInfo::fallback);
                            fonts.insert(name.to_vec(), info);
                        }
                    }
                }
                "TL" => ts.leading = o.first().and_then(num).unwrap_or(0.0),
                "Tc" => ts.char_spacing = o.first().and_then(num).unwrap_or(0.0),
                "Tw" => ts.word_spacing = o.first().and_then(num).unwrap_or(0.0),
                "Tz" => ts.hscale = o.first().and_then(num).unwrap_or(100.0) / 100.0,
                "Ts" => ts.rise = o.first().and_then(num).unwrap_or(0.0),
                "Tm" => {
                    if let Some(m) = operand_matrix(o) {
                        ts.tm = Some(m);
                        ts.tlm = m;
                    }
                }
                "Td" | "TD" => {
                    if let (Some(tx), Some(ty)) = (o.first().and_then(num), o.get(1).and_then(num)) {
                        if op.operator == "TD" {
                            ts.leading = -ty;
                        }
                        ts.tlm = mul(&[1.0, 0.0, 0.0, 1.0, tx, ty], &ts.tlm);
                        ts.tm = Some(ts.tlm);
                    }
                }
                "T*" => next_line(&mut ts),
                "Tj" => {
                    if let Some(bytes) = o.first().and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &fonts, &ctm, &[TjPart::Text(bytes)]);
                    }
                }
                "'" => {
                    next_line(&mut ts);
                    if let Some(bytes) = o.first().and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &fonts, &ctm, &[TjPart::Text(bytes)]);
                    }
                }
                "\"" => {
                    ts.word_spacing = o.first().and_then(num).unwrap_or(ts.word_spacing);
                    ts.char_spacing = o.get(1).and_then(num).unwrap_or(ts.char_spacing);
                    next_line(&mut ts);
                    if let Some(bytes) = o.get(2).and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &fonts, &ctm, &[TjPart::Text(bytes)]);
                    }
                }
                "TJ" => {
                    if let Some(arr) = o.first().and_then(|a| a.as_array().ok()) {
                        let parts: Vec<TjPart> = arr
                            .iter()
                            .filter_map(|item| match item {
                                Object::String(b, _) => Some(TjPart::Text(b)),
                                other => num(other).map(TjPart::Adjust),
                            })
                            .collect();
                        self.show(&mut ts, &fonts, &ctm, &parts);
                    }
                }
                "Do" => {
                    if let Some(name) = o.first().and_then(|n| n.as_name().ok()) {
                        self.do_xobject(name, res, &ctm, depth);
                    }
                }
                _ => {}
            }
        }
    }

    fn show(&mut self, ts: &mut TextState, fonts: &HashMap<Vec<u8>, FontInfo<'a>>, ctm: &Matrix, parts: &[TjPart]) {
        let Some(tm) = ts.tm else { return };
        let fallback = FontInfo::fallback();
        let font = fonts.get(&ts.font).unwrap_or(&fallback);
        let start = mul(&mul(&[1.0, 0.0, 0.0, 1.0, 0.0, ts.rise], &tm), ctm);
        let mut text = String::new();
        let mut advance = 0.0;
        for part in parts {
            match part {
                TjPart::Text(bytes) => {
                    let s = font.decode(bytes);
                    let (w, glyphs, spaces) = font.measure(bytes, &s);
                    advance += (w * ts.size + ts.char_spacing * glyphs as f64 + ts.word_spacing * spaces as f64) * ts.hscale;
                    text.push_str(&s);
                }
                TjPart::Adjust(a) => {
                    advance -= a / 1000.0 * ts.size * ts.hscale;
                    if *a <= -250.0 && !text.ends_with(' ') {
                        text.push(' ');
                    }
                }
            }
        }
        ts.tm = Some(mul(&[1.0, 0.0, 0.0, 1.0, advance, 0.0], &tm));
        if text.trim().is_empty() {
            return;
        }
        let (x0, baseline) = apply(&start, 0.0, 0.0);
        let (x1, _) = apply(&start, advance, 0.0);
        let vscale = start[2].hypot(start[3]);
        self.spans.push(Span {
            text,
            x0: x0.min(x1),
            x1: x0.max(x1),
            baseline,
            size: ts.size * vscale,
            ascent: font.ascent,
            descent: font.descent,
        });
    }

    fn do_xobject(&mut self, name: &[u8], res: &Resources<'a>, ctm: &Matrix, depth: usize) {
        let Some(Object::Stream(stream)) = res.lookup(self.doc, b"XObject", name) else {
            return;
        };
        let subtype = stream.dict.get(b"Subtype").and_then(Object::as_name).unwrap_or(b"");
        match subtype {
            b"Image" => {
                let image = match decode_xobject(self.doc, stream) {
                    Ok(decoded) => {
                        let rgb = flatten_rgb(&decoded.pixels);
                        ExtractedImage {
                            intrinsic_width_px: rgb.width(),
                            intrinsic_height_px: rgb.height(),
                            content_hash: pixel_hash(&rgb),
                            bytes: decoded.bytes,
                            format: decoded.format,
                            bbox: BBox::new(0.0, 0.0, 0.0, 0.0),
                            page_index: self.page_index,
                            color: decoded.color,
                            decode_issue: None,
                        }
                    }
                    Err(issue) => {
                        let dim = |k: &[u8]| {
                            stream
                                .dict
                                .get(k)
                                .ok()
                                .and_then(|o| deref(self.doc, o).as_i64().ok())
                                .unwrap_or(0)
                                .max(0) as u32
                        };
                        ExtractedImage {
                            bytes: Vec::new(),
                            format: ImageFormat::Png,
                            bbox: BBox::new(0.0, 0.0, 0.0, 0.0),
                            page_index: self.page_index,
                            intrinsic_width_px: dim(b"Width"),
                            intrinsic_height_px: dim(b"Height"),
                            content_hash: String::new(),
                            color: ColorModel::Unknown,
                            decode_issue: Some(issue),
                        }
                    }
                };
                self.placed.push((*ctm, image));
            }
            b"Form" => {
                if depth >= MAX_FORM_DEPTH {
                    self.issues.push("form XObject nesting too deep".into());
                    return;
                }
                let matrix = stream
                    .dict
                    .get(b"Matrix")
                    .ok()
                    .and_then(|m| m.as_array().ok())
                    .and_then(|a| operand_matrix(a))
                    .unwrap_or(IDENTITY);
                let inner = match stream.dict.get(b"Resources").ok().map(|r| deref(self.doc, r)) {
                    Some(Object::Dictionary(d)) => {
                        let mut dicts = vec![d];
                        dicts.extend(res.dicts.iter().copied());
                        Resources { dicts }
                    }
                    _ => res.clone(),
                };
                let content = stream
                    .decompressed_content()
                    .unwrap_or_else(|_| stream.content.clone());
                match Content::decode(&content) {
                    Ok(c) => self.run(&c.operations, &inner, mul(&matrix, ctm), depth + 1),
                    Err(e) => self.issues.push(format!("form XObject content: {e}")),
                }
            }
            _ => {}
        }
    }
}

enum TjPart<'b> {
    Text(&'b [u8]),
    Adjust(f64),
}

fn next_line(ts: &mut TextState) {
    ts.tlm = mul(&[1.0, 0.0, 0.0, 1.0, 0.0, -ts.leading], &ts.tlm);
    ts.tm = Some(ts.tlm);
}

/// A text line in render coordinates (y downward).
struct Line {
    text: String,
    bbox: BBox,
    baseline: f64,
    size: f64,
}

fn group_lines(spans: Vec<Span>, flip: impl Fn(f64) -> f64) -> Vec<Line> {
    let mut lines: Vec<Line> = Vec::new();
    for s in spans {
        let baseline = flip(s.baseline);
        let top = baseline - s.ascent * s.size;
        let bottom = baseline + s.descent * s.size;
        let bbox = BBox::new(s.x0, top, s.x1, bottom);
        if let Some(last) = lines.last_mut() {
            let same_baseline = (last.baseline - baseline).abs() < 0.3 * s.size.max(last.size);
            let gap = bbox.x0 - last.bbox.x1;
            if same_baseline && gap > -0.5 * s.size && gap < 3.0 * s.size {
                if gap > 0.15 * s.size && !last.text.ends_with(' ') && !s.text.starts_with(' ') {
                    last.text.push(' ');
                }
                last.text.push_str(&s.text);
                last.bbox = last.bbox.union(&bbox);
                last.size = last.size.max(s.size);
                continue;
            }
        }
        lines.push(Line {
            text: s.text,
            bbox,
            baseline,
            size: s.size,
        });
    }
    lines
}

fn group_blocks(lines: Vec<Line>, page_index: u32) -> Vec<TextBlock> {
    struct Acc {
        text: String,
        bbox: BBox,
        size: f64,
    }
    let mut blocks: Vec<Acc> = Vec::new();
    for line in lines {
        if let Some(b) = blocks.last_mut() {
            let gap = line.bbox.y0 - b.bbox.y1;
            let ratio = line.size / b.size;
            let aligned = b.bbox.horizontal_overlap(&line.bbox) > 0.0 || (line.bbox.x0 - b.bbox.x0).abs() < 2.0 * line.size;
            if gap >= -0.5 * line.size && gap <= 0.8 * line.size && (0.8..=1.25).contains(&ratio) && aligned {
                let joined = b.text.trim_end().to_string();
                b.text = if joined.ends_with('-') {
                    format!("{}{}", &joined[..joined.len() - 1], line.text.trim_start())
                } else {
                    format!("{} {}", joined, line.text.trim_start())
                };
                b.bbox = b.bbox.union(&line.bbox);
                continue;
            }
        }
        blocks.push(Acc {
            text: line.text,
            bbox: line.bbox,
            size: line.size,
        });
    }
    blocks
        .into_iter()
        .map(|b| TextBlock {
            text: b.text.trim().to_string(),
            bbox: b.bbox,
            page_index,
        })
        .filter(|b| !b.text.is_empty())
        .collect()
}

/// Interprets one page's content stream.
pub fn parse_page_layout(doc: &Document, page_id: ObjectId, page_index: u32) -> Result<(PageLayout, Vec<String>), String> {
    let [mx0, my0, mx1, my1] = media_box(doc, page_id).unwrap_or([0.0, 0.0, 612.0, 792.0]);
    let geometry = PageGeometry {
        page_index,
        width: mx1 - mx0,
        height: my1 - my0,
    };
    if geometry.width <= 0.0 || geometry.height <= 0.0 {
        return Err(format!("degenerate MediaBox on page {page_index}"));
    }
    let (direct, inherited) = doc.get_page_resources(page_id).map_err(|e| e.to_string())?;
    let mut dicts: Vec<&Dictionary> = direct.into_iter().collect();
    dicts.extend(inherited.iter().filter_map(|id| doc.get_dictionary(*id).ok()));
    let resources = Resources { dicts };

    let content = doc.get_and_decode_page_content(page_id).map_err(|e| e.to_string())?;
    let mut interp = Interpreter {
        doc,
        page_index,
        spans: Vec::new(),
        placed: Vec::new(),
        issues: Vec::new(),
    };
    interp.run(&content.operations, &resources, IDENTITY, 0);

    let flip = |y: f64| my1 - y;
    let lines = group_lines(std::mem::take(&mut interp.spans), flip);
    let blocks: Vec<TextBlock> = group_blocks(lines, page_index)
        .into_iter()
        .map(|mut b| {
            b.bbox = b.bbox.translate(-mx0, 0.0).clamp_to(geometry.width, geometry.height);
            b
        })
        .collect();
    let images = interp
        .placed
        .into_iter()
        .map(|(m, mut img)| {
            let corners = [apply(&m, 0.0, 0.0), apply(&m, 1.0, 0.0), apply(&m, 0.0, 1.0), apply(&m, 1.0, 1.0)];
            let xs = corners.iter().map(|c| c.0 - mx0);
            let ys = corners.iter().map(|c| flip(c.1));
            let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            img.bbox = BBox::new(x0, y0, x1, y1).clamp_to(geometry.width, geometry.height);
            img
        })
        .collect();
    Ok((
        PageLayout {
            geometry,
            blocks,
            images,
        },
        interp.issues,
    ))
}
