use std::collections::HashMap;

use super::geometry::caption_distance_with_tolerance;
use super::{
    is_caption_block_with, ExtractPolicy, ExtractedImage, FigurePair, RejectCode, RejectReason,
    Rejected, TextBlock,
};

/// Pairs every image with the closest caption block below it on the same page.
///
/// Blocks that do not look like captions are ignored. Ties go to the caption that comes
/// first in `blocks`. Several images may claim one caption; those pairs get
/// `shared_caption = true`. Images with nothing below them are rejected with
/// `no_caption_found`.
pub fn match_figures(
    doc_id: &str,
    images: Vec<ExtractedImage>,
    blocks: &[TextBlock],
    policy: &ExtractPolicy,
) -> (Vec<FigurePair>, Vec<Rejected>) {
    let captions: Vec<&TextBlock> = blocks
        .iter()
        .filter(|b| is_caption_block_with(b.text.trim(), &policy.caption_prefixes))
        .collect();

    let mut matched: Vec<(ExtractedImage, usize, f64)> = Vec::new();
    let mut rejected = Vec::new();
    for image in images {
        let mut best: Option<(usize, f64)> = None;
        for (ci, caption) in captions.iter().enumerate() {
            let Some(d) = caption_distance_with_tolerance(&image.bbox, &caption.bbox, policy.below_tolerance)
            else {
                continue;
            };
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((ci, d));
            }
        }
        match best {
            Some((ci, d)) => matched.push((image, ci, d)),
            None => rejected.push(Rejected {
                image,
                reason: RejectReason::new(
                    RejectCode::NoCaptionFound,
                    format!("{} caption block(s) on page, none below", captions.len()),
                ),
            }),
        }
    }

    let mut claims: HashMap<usize, usize> = HashMap::new();
    for (_, ci, _) in &matched {
        *claims.entry(*ci).or_default() += 1;
    }
    let pairs = matched
        .into_iter()
        .map(|(image, ci, distance)| FigurePair {
            doc_id: doc_id.to_string(),
            image,
            caption: captions[ci].clone(),
            distance,
            shared_caption: claims[&ci] > 1,
        })
        .collect();
    (pairs, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdf_figures::{BBox, ColorModel, ImageFormat};

    fn image_at(x0: f64, y0: f64, x1: f64, y1: f64) -> ExtractedImage {
        ExtractedImage {
            bytes: Vec::new(),
            format: ImageFormat::Png,
            bbox: BBox::new(x0, y0, x1, y1),
            page_index: 0,
            intrinsic_width_px: 100,
            intrinsic_height_px: 100,
            content_hash: String::new(),
            color: ColorModel::Rgb,
            decode_issue: None,
        }
    }

    fn block(text: &str, x: f64, y: f64) -> TextBlock {
        TextBlock {
            text: text.into(),
            bbox: BBox::new(x, y, x + 200.0, y + 12.0),
            page_index: 0,
        }
    }

    /// Independent all-pairs nearest search.
    fn brute_force(image: &ExtractedImage, blocks: &[TextBlock]) -> Option<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.text.to_lowercase().starts_with("fig"))
            .filter(|(_, b)| b.bbox.y0 >= image.bbox.y1 - 2.0)
            .map(|(i, b)| {
                let dx = b.bbox.x0 - image.bbox.x0;
                let dy = b.bbox.y0 - image.bbox.y1;
                (i, dx.hypot(dy))
            })
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.first().copied()
    }

    #[test]
    fn nearest_of_two() {
        let blocks = vec![block("Figure 2. far", 100.0, 550.0), block("Figure 1. near", 100.0, 520.0)];
        let (pairs, rej) = match_figures("d", vec![image_at(100.0, 300.0, 400.0, 500.0)], &blocks, &ExtractPolicy::default());
        assert!(rej.is_empty());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].distance, 20.0);
        assert_eq!(pairs[0].caption.text, "Figure 1. near");
        let (bi, bd) = brute_force(&pairs[0].image, &blocks).unwrap();
        assert_eq!(blocks[bi].text, pairs[0].caption.text);
        assert_eq!(bd, pairs[0].distance);
        assert!(!pairs[0].shared_caption);
    }

    #[test]
    fn no_captions_rejects_all() {
        let (pairs, rej) = match_figures(
            "d",
            vec![image_at(0.0, 0.0, 10.0, 10.0), image_at(20.0, 0.0, 30.0, 10.0)],
            &[block("Body text only", 0.0, 100.0)],
            &ExtractPolicy::default(),
        );
        assert!(pairs.is_empty());
        assert_eq!(rej.len(), 2);
        assert!(rej.iter().all(|r| r.reason.code == RejectCode::NoCaptionFound));
    }

    #[test]
    fn shared_caption_is_flagged() {
        let blocks = vec![block("Fig. 1 Both panels", 100.0, 420.0)];
        let imgs = vec![image_at(100.0, 200.0, 250.0, 400.0), image_at(300.0, 200.0, 450.0, 400.0)];
        let (pairs, _) = match_figures("d", imgs, &blocks, &ExtractPolicy::default());
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.shared_caption));
        for p in &pairs {
            let (bi, bd) = brute_force(&p.image, &blocks).unwrap();
            assert_eq!(bi, 0);
            assert_eq!(bd, p.distance);
        }
    }

    #[test]
    fn caption_above_is_ignored() {
        let blocks = vec![block("Figure 1", 100.0, 100.0)];
        let (pairs, rej) = match_figures("d", vec![image_at(100.0, 200.0, 300.0, 400.0)], &blocks, &ExtractPolicy::default());
        assert!(pairs.is_empty());
        assert_eq!(rej.len(), 1);
    }
}
