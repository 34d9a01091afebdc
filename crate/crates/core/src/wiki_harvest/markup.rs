use scraper::{ElementRef, Html, Selector};
use url::Url;

/// A captioned image found in article markup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleImage {
    pub image_url: String,
    pub caption: String,
    /// From `data-file-width`/`data-file-height`, else the `width`/`height` attributes.
    pub width_px: Option<u32>,
    pub height_px: Option<u32>,
}

/// Figure-like containers and the caption element inside each.
const CONTAINERS: [(&str, &str); 3] = [
    ("figure", "figcaption"),
    ("div.thumbinner", "div.thumbcaption"),
    ("li.gallerybox", "div.gallerytext"),
];

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn dim(img: &ElementRef<'_>, data_attr: &str, attr: &str) -> Option<u32> {
    let v = img.value();
    v.attr(data_attr).or_else(|| v.attr(attr)).and_then(|s| s.trim().parse().ok())
}

/// Captioned figures, thumbnails and gallery entries, in document order. Images whose
/// known shorter side is under `min_side_px` are skipped as icons; uncaptioned images
/// are skipped; relative sources resolve against `base_url`.
pub fn extract_article_images(markup: &str, base_url: &str, min_side_px: u32) -> Vec<ArticleImage> {
    let Ok(base) = Url::parse(base_url) else {
        log::warn!("invalid base URL {base_url:?}; no images extracted");
        return Vec::new();
    };
    let doc = Html::parse_document(markup);
    let img_sel = Selector::parse("img").expect("static selector");
    let mut found: Vec<(usize, ArticleImage)> = Vec::new();
    let order: std::collections::HashMap<_, usize> = doc.root_element().descendants().enumerate().map(|(i, n)| (n.id(), i)).collect();
    for (container, caption) in CONTAINERS {
        let container_sel = Selector::parse(container).expect("static selector");
        let caption_sel = Selector::parse(caption).expect("static selector");
        for node in doc.select(&container_sel) {
            let Some(img) = node.select(&img_sel).next() else { continue };
            let Some(cap) = node.select(&caption_sel).next() else { continue };
            let text = collapse_ws(&cap.text().collect::<String>());
            if text.is_empty() {
                continue;
            }
            let Some(src) = img.value().attr("src").filter(|s| !s.trim().is_empty()) else { continue };
            let Ok(url) = base.join(src.trim()) else {
                log::warn!("unresolvable image source {src:?}");
                continue;
            };
            let (w, h) = (dim(&img, "data-file-width", "width"), dim(&img, "data-file-height", "height"));
            if let (Some(w), Some(h)) = (w, h) {
                if w.min(h) < min_side_px {
                    continue;
                }
            }
            found.push((
                order.get(&node.id()).copied().unwrap_or(usize::MAX),
                ArticleImage {
                    image_url: url.to_string(),
                    caption: text,
                    width_px: w,
                    height_px: h,
                },
            ));
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    let mut seen = std::collections::HashSet::new();
    found.into_iter().map(|(_, a)| a).filter(|a| seen.insert(a.image_url.clone())).collect()
}
