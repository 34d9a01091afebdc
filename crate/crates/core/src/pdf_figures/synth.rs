//! Synthetic PDF builder with exactly known geometry.
//!
//! Used for fixtures and demos: every image and text line is placed at integer page
//! coordinates given in render space (y downward), so expected boxes can be computed by
//! hand. Text is set in Helvetica without a `Widths` array.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat as CodecFormat, RgbImage};
use lopdf::{dictionary, Document, Object, Stream, StringFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::parse::DEFAULT_ASCENT;
use super::BBox;

/// How the image samples are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Rgb,
    Gray,
    Cmyk,
    Indexed,
    GrayAlpha,
    Jpeg,
    /// Flate stream that does not inflate.
    Corrupt,
    /// Lab colour space, which the decoder does not handle.
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    /// Left edge, page units.
    pub x: i64,
    /// Top edge, page units, y downward.
    pub top: i64,
    pub width: i64,
    pub height: i64,
    pub px_width: u32,
    pub px_height: u32,
    pub kind: SynthKind,
    /// Varies pixel content so distinct images hash differently.
    pub seed: u8,
    /// Draw through a form XObject instead of directly.
    pub in_form: bool,
}

impl SynthImage {
    pub fn new(x: i64, top: i64, width: i64, height: i64, seed: u8) -> Self {
        Self {
            x,
            top,
            width,
            height,
            px_width: 160,
            px_height: 120,
            kind: SynthKind::Rgb,
            seed,
            in_form: false,
        }
    }

    pub fn pixels(mut self, w: u32, h: u32) -> Self {
        self.px_width = w;
        self.px_height = h;
        self
    }

    pub fn kind(mut self, kind: SynthKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn in_form(mut self) -> Self {
        self.in_form = true;
        self
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.top as f64, (self.x + self.width) as f64, (self.top + self.height) as f64)
    }

    /// RGB pixels this image decodes to (before any colour-model round trip).
    pub fn rgb(&self) -> RgbImage {
        RgbImage::from_fn(self.px_width, self.px_height, |i, j| {
            let s = self.seed as u32;
            image::Rgb([
                ((i * 7 + s * 31) % 256) as u8,
                ((j * 13 + s * 17) % 256) as u8,
                ((i + j + s * 5) % 256) as u8,
            ])
        })
    }
}

/// One line of text; `baseline` is in render space (y downward).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthText {
    pub x: i64,
    pub baseline: i64,
    pub size: i64,
    pub text: String,
}

impl SynthText {
    pub fn new(x: i64, baseline: i64, text: impl Into<String>) -> Self {
        Self {
            x,
            baseline,
            size: 10,
            text: text.into(),
        }
    }

    /// Top-left corner the layout parser reports for this line.
    pub fn top_left(&self) -> (f64, f64) {
        (self.x as f64, self.baseline as f64 - DEFAULT_ASCENT * self.size as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPage {
    pub width: i64,
    pub height: i64,
    pub images: Vec<SynthImage>,
    pub texts: Vec<SynthText>,
}

impl Default for SynthPage {
    fn default() -> Self {
        Self {
            width: 612,
            height: 792,
            images: Vec::new(),
            texts: Vec::new(),
        }
    }
}

fn encoded_stream(kind: SynthKind, img: &SynthImage) -> Stream {
    let rgb = img.rgb();
    let (w, h) = (img.px_width as i64, img.px_height as i64);
    let base = dictionary! {
        "Type" => "XObject",
        "Subtype" => "Image",
        "Width" => w,
        "Height" => h,
        "BitsPerComponent" => 8,
    };
    let with = |mut d: lopdf::Dictionary, cs: Object| {
        d.set("ColorSpace", cs);
        d
    };
    let mut stream = match kind {
        SynthKind::Rgb => Stream::new(with(base, "DeviceRGB".into()), rgb.into_raw()),
        SynthKind::Gray | SynthKind::GrayAlpha => {
            let gray = DynamicImage::ImageRgb8(rgb).to_luma8().into_raw();
            Stream::new(with(base, "DeviceGray".into()), gray)
        }
        SynthKind::Cmyk => {
            let cmyk: Vec<u8> = rgb
                .pixels()
                .flat_map(|p| [255 - p[0], 255 - p[1], 255 - p[2], 0])
                .collect();
            Stream::new(with(base, "DeviceCMYK".into()), cmyk)
        }
        SynthKind::Indexed => {
            let lookup: Vec<u8> = (0..=255u32).flat_map(|i| [i as u8, (255 - i) as u8, (i * 3 % 256) as u8]).collect();
            let idx: Vec<u8> = rgb.pixels().map(|p| p[0]).collect();
            let cs = Object::Array(vec![
                "Indexed".into(),
                "DeviceRGB".into(),
                255.into(),
                Object::String(lookup, StringFormat::Hexadecimal),
            ]);
            Stream::new(with(base, cs), idx)
        }
        SynthKind::Jpeg => {
            let mut buf = Cursor::new(Vec::new());
            DynamicImage::ImageRgb8(rgb)
                .write_to(&mut buf, CodecFormat::Jpeg)
                .expect("jpeg encode");
            let mut d = with(base, "DeviceRGB".into());
            d.set("Filter", "DCTDecode");
            return Stream::new(d, buf.into_inner()).with_compression(false);
        }
        SynthKind::Corrupt => {
            let mut d = with(base, "DeviceRGB".into());
            d.set("Filter", "FlateDecode");
            return Stream::new(d, b"definitely not zlib data".to_vec()).with_compression(false);
        }
        SynthKind::Lab => {
            let cs = Object::Array(vec![
                "Lab".into(),
                Object::Dictionary(dictionary! { "WhitePoint" => vec![Object::Real(0.95), 1.into(), Object::Real(1.09)] }),
            ]);
            Stream::new(with(base, cs), rgb.into_raw())
        }
    };
    let _ = stream.compress();
    stream
}

/// Serializes `pages` to PDF bytes.
pub fn build_pdf(pages: &[SynthPage]) -> Vec<u8> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
    });
    let mut kids = Vec::new();
    for page in pages {
        let mut xobjects = lopdf::Dictionary::new();
        let mut ops = String::new();
        for (n, img) in page.images.iter().enumerate() {
            let mut stream = encoded_stream(img.kind, img);
            if img.kind == SynthKind::GrayAlpha {
                let alpha: Vec<u8> = (0..img.px_width * img.px_height).map(|i| (i % 200 + 55) as u8).collect();
                let mut mask = Stream::new(
                    dictionary! {
                        "Type" => "XObject",
                        "Subtype" => "Image",
                        "Width" => img.px_width as i64,
                        "Height" => img.px_height as i64,
                        "ColorSpace" => "DeviceGray",
                        "BitsPerComponent" => 8,
                    },
                    alpha,
                );
                let _ = mask.compress();
                let mask_id = doc.add_object(mask);
                stream.dict.set("SMask", mask_id);
            }
            let image_id = doc.add_object(stream);
            let bottom_pdf = page.height - img.top - img.height;
            let name = format!("Im{n}");
            if img.in_form {
                let form_content = format!("q {} 0 0 {} 0 0 cm /Inner Do Q", img.width, img.height);
                let form = Stream::new(
                    dictionary! {
                        "Type" => "XObject",
                        "Subtype" => "Form",
                        "BBox" => vec![0.into(), 0.into(), img.width.into(), img.height.into()],
                        "Matrix" => vec![1.into(), 0.into(), 0.into(), 1.into(), img.x.into(), bottom_pdf.into()],
                        "Resources" => dictionary! { "XObject" => dictionary! { "Inner" => image_id } },
                    },
                    form_content.into_bytes(),
                );
                let form_id = doc.add_object(form);
                xobjects.set(name.as_str(), form_id);
                ops.push_str(&format!("q /{name} Do Q\n"));
            } else {
                xobjects.set(name.as_str(), image_id);
                ops.push_str(&format!(
                    "q {} 0 0 {} {} {} cm /{name} Do Q\n",
                    img.width, img.height, img.x, bottom_pdf
                ));
            }
        }
        let mut content_ops = lopdf::content::Content::decode(ops.as_bytes())
            .expect("synthetic content parses")
            .operations;
        for t in &page.texts {
            use lopdf::content::Operation;
            content_ops.push(Operation::new("BT", vec![]));
            content_ops.push(Operation::new("Tf", vec!["F1".into(), t.size.into()]));
            content_ops.push(Operation::new(
                "Tm",
                vec![1.into(), 0.into(), 0.into(), 1.into(), t.x.into(), (page.height - t.baseline).into()],
            ));
            content_ops.push(Operation::new("Tj", vec![Object::string_literal(t.text.as_bytes())]));
            content_ops.push(Operation::new("ET", vec![]));
        }
        let content = lopdf::content::Content { operations: content_ops };
        let mut content_stream = Stream::new(lopdf::Dictionary::new(), content.encode().expect("encode content"));
        let _ = content_stream.compress();
        let content_id = doc.add_object(content_stream);
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "MediaBox" => vec![0.into(), 0.into(), page.width.into(), page.height.into()],
            "Contents" => content_id,
            "Resources" => dictionary! {
                "Font" => dictionary! { "F1" => font_id },
                "XObject" => xobjects,
            },
        });
        kids.push(Object::Reference(page_id));
    }
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! {
            "Type" => "Pages",
            "Kids" => kids,
            "Count" => count,
        }),
    );
    let catalog_id = doc.add_object(dictionary! {
        "Type" => "Catalog",
        "Pages" => pages_id,
    });
    doc.trailer.set("Root", catalog_id);
    let mut out = Vec::new();
    doc.save_to(&mut out).expect("write synthetic pdf");
    out
}

/// A named fixture document.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub pages: Vec<SynthPage>,
}

impl Fixture {
    pub fn pdf(&self) -> Vec<u8> {
        build_pdf(&self.pages)
    }
}

fn page(images: Vec<SynthImage>, texts: Vec<SynthText>) -> SynthPage {
    SynthPage {
        images,
        texts,
        ..Default::default()
    }
}

fn fixture(name: &str, pages: Vec<SynthPage>) -> Fixture {
    Fixture {
        name: name.into(),
        pages,
    }
}

/// Hand-built layouts covering the pairing edge cases.
pub fn edge_case_fixtures() -> Vec<Fixture> {
    let body = |b: i64| SynthText::new(72, b, "Body text paragraph that is not a caption.");
    vec![
        fixture(
            "single",
            vec![page(
                vec![SynthImage::new(100, 200, 300, 300, 1)],
                vec![SynthText::new(100, 528, "Figure 1. A single image.")],
            )],
        ),
        fixture(
            "three_four_five",
            vec![page(
                vec![SynthImage::new(100, 300, 200, 200, 2)],
                vec![SynthText::new(130, 548, "Fig. 2 offset caption")],
            )],
        ),
        fixture(
            "multi_caption",
            vec![page(
                vec![SynthImage::new(100, 100, 300, 200, 3)],
                vec![
                    SynthText::new(100, 328, "Figure 1. Closest caption."),
                    SynthText::new(100, 420, "Figure 2. Farther caption."),
                    SynthText::new(100, 620, "Figure 3. Farthest caption."),
                ],
            )],
        ),
        fixture(
            "shared_caption",
            vec![page(
                vec![SynthImage::new(80, 150, 200, 200, 4), SynthImage::new(320, 150, 200, 200, 5)],
                vec![SynthText::new(80, 378, "Figure 4. Two panels share this caption.")],
            )],
        ),
        fixture(
            "caption_above",
            vec![page(
                vec![SynthImage::new(100, 300, 300, 200, 6)],
                vec![SynthText::new(100, 250, "Figure 5. Caption placed above.")],
            )],
        ),
        fixture(
            "body_text_below",
            vec![page(
                vec![SynthImage::new(100, 100, 300, 200, 7)],
                vec![body(320), SynthText::new(100, 420, "Figure 6. Caption after body text.")],
            )],
        ),
        fixture(
            "filtered_small",
            vec![page(
                vec![SynthImage::new(40, 40, 30, 30, 8).pixels(32, 32), SynthImage::new(100, 200, 300, 200, 9)],
                vec![SynthText::new(100, 428, "Figure 7. Real figure.")],
            )],
        ),
        fixture(
            "filtered_strip",
            vec![page(
                vec![SynthImage::new(50, 100, 500, 10, 10).pixels(2000, 40), SynthImage::new(100, 200, 300, 200, 11)],
                vec![SynthText::new(100, 428, "Figure 8. Figure under a rule.")],
            )],
        ),
        fixture(
            "undecodable",
            vec![page(
                vec![SynthImage::new(100, 100, 300, 200, 12).kind(SynthKind::Corrupt)],
                vec![SynthText::new(100, 328, "Figure 9. Broken image stream.")],
            )],
        ),
        fixture(
            "unsupported_colorspace",
            vec![page(
                vec![SynthImage::new(100, 100, 300, 200, 13).kind(SynthKind::Lab)],
                vec![SynthText::new(100, 328, "Figure 10. Lab image.")],
            )],
        ),
        fixture(
            "caption_next_page",
            vec![
                page(vec![SynthImage::new(100, 400, 300, 300, 14)], vec![body(200)]),
                page(vec![], vec![SynthText::new(100, 80, "Figure 11. Caption spilled over.")]),
            ],
        ),
        fixture(
            "colour_models",
            vec![page(
                vec![
                    SynthImage::new(40, 60, 150, 120, 15).kind(SynthKind::Gray),
                    SynthImage::new(230, 60, 150, 120, 16).kind(SynthKind::Cmyk),
                    SynthImage::new(420, 60, 150, 120, 17).kind(SynthKind::Indexed),
                    SynthImage::new(40, 300, 150, 120, 18).kind(SynthKind::GrayAlpha),
                    SynthImage::new(230, 300, 150, 120, 19).kind(SynthKind::Jpeg),
                    SynthImage::new(420, 300, 150, 120, 20).in_form(),
                ],
                vec![
                    SynthText::new(40, 200, "Fig. 12a gray"),
                    SynthText::new(230, 200, "Fig. 12b cmyk"),
                    SynthText::new(420, 200, "Fig. 12c indexed"),
                    SynthText::new(40, 440, "Fig. 12d gray+alpha"),
                    SynthText::new(230, 440, "Fig. 12e jpeg"),
                    SynthText::new(420, 440, "Fig. 12f form"),
                ],
            )],
        ),
        fixture(
            "multi_line_caption",
            vec![page(
                vec![SynthImage::new(100, 100, 300, 200, 21)],
                vec![
                    SynthText::new(100, 322, "Figure 13. A caption that wraps"),
                    SynthText::new(100, 334, "onto a second line."),
                ],
            )],
        ),
        fixture(
            "two_pages",
            vec![
                page(vec![SynthImage::new(100, 100, 200, 200, 22)], vec![SynthText::new(100, 330, "Figure 14. First page.")]),
                page(vec![SynthImage::new(300, 100, 200, 200, 23)], vec![SynthText::new(300, 330, "Figure 15. Second page.")]),
            ],
        ),
        fixture("no_images", vec![page(vec![], vec![body(100), SynthText::new(72, 200, "Figure 16. Orphan caption.")])]),
    ]
}

/// Seeded random layouts: a grid of images with caption lines scattered around them.
///
/// Layouts whose nearest and second-nearest candidate captions are within one page unit
/// of each other are redrawn, so the expected pairing is unambiguous.
pub fn random_fixtures(count: usize, seed: u64) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut image_seed: u8 = 100;
    while out.len() < count {
        let n_images = rng.random_range(1..=3);
        let mut images = Vec::new();
        for col in 0..n_images {
            let x = 40 + col as i64 * 190 + rng.random_range(0..20);
            let top = rng.random_range(60..300);
            let w = rng.random_range(100..170);
            let h = rng.random_range(80..200);
            image_seed = image_seed.wrapping_add(1);
            images.push(SynthImage::new(x, top, w, h, image_seed));
        }
        let n_caps = rng.random_range(0..=4);
        let mut texts = Vec::new();
        for k in 0..n_caps {
            let x = rng.random_range(30..450);
            let baseline = rng.random_range(40..760) as i64;
            texts.push(SynthText::new(x, baseline, format!("Figure {}. Random caption {k}.", k + 1)));
        }
        if rng.random_bool(0.5) {
            texts.push(SynthText::new(72, rng.random_range(40..760), "Unrelated body text line."));
        }
        texts.sort_by_key(|t| t.baseline);
        // keep caption lines far enough apart that they never merge into one block
        if texts.windows(2).any(|w| w[1].baseline - w[0].baseline < 30) {
            continue;
        }
        let ambiguous = images.iter().any(|img| {
            let b = img.bbox();
            let mut ds: Vec<f64> = texts
                .iter()
                .filter(|t| t.text.starts_with("Figure"))
                .filter_map(|t| {
                    let (cx, cy) = t.top_left();
                    (cy >= b.y1 - 2.0).then(|| (cx - b.x0).hypot(cy - b.y1))
                })
                .collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds.len() >= 2 && ds[1] - ds[0] < 1.0
        });
        let overlapping_text = texts.iter().any(|t| {
            let (_, ty) = t.top_left();
            images.iter().any(|img| {
                let b = img.bbox();
                ty < b.y1 + 4.0 && ty + 12.0 > b.y0 - 4.0 && (t.x as f64) < b.x1
            })
        });
        if ambiguous || overlapping_text {
            continue;
        }
        out.push(fixture(&format!("random_{}", out.len()), vec![page(images, texts)]));
    }
    out
}
