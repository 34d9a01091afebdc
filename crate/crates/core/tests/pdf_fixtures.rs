//! Fixture suite: synthetic PDFs with known geometry, checked against an all-pairs
//! oracle computed from the generator's ground truth (never from parsed output).

use std::collections::BTreeSet;

use vlcorpus::pdf_figures::synth::{edge_case_fixtures, random_fixtures, Fixture, SynthKind, SynthText};
use vlcorpus::pdf_figures::{extract_document, extract_documents, write_sidecar, DocumentExtraction, ExtractPolicy, RejectCode};
use vlcorpus::Exec;

#[derive(Debug, Clone, PartialEq)]
enum Expect {
    Pair { caption_start: String, distance: f64 },
    Reject(RejectCode),
}

/// Caption blocks as the generator laid them out: consecutive lines at the same x and
/// at most 1.8 font sizes apart form one block, identified by its first line.
fn blocks(texts: &[SynthText]) -> Vec<&SynthText> {
    let mut sorted: Vec<&SynthText> = texts.iter().collect();
    sorted.sort_by_key(|t| (t.x, t.baseline));
    let mut heads = Vec::new();
    for (i, t) in sorted.iter().enumerate() {
        let continues = i > 0 && sorted[i - 1].x == t.x && (t.baseline - sorted[i - 1].baseline) as f64 <= 1.8 * t.size as f64;
        if !continues {
            heads.push(*t);
        }
    }
    heads
}

fn oracle(fx: &Fixture, policy: &ExtractPolicy) -> Vec<(u32, [i64; 4], Expect)> {
    let mut out = Vec::new();
    for (p, page) in fx.pages.iter().enumerate() {
        let captions: Vec<&SynthText> = blocks(&page.texts)
            .into_iter()
            .filter(|t| t.text.to_lowercase().starts_with("fig"))
            .collect();
        for img in &page.images {
            let key = [img.x, img.top, img.x + img.width, img.top + img.height];
            let (w, h) = (img.px_width.max(1) as f64, img.px_height.max(1) as f64);
            let expect = if img.kind == SynthKind::Corrupt {
                Expect::Reject(RejectCode::Undecodable)
            } else if img.kind == SynthKind::Lab {
                Expect::Reject(RejectCode::UnsupportedColorspace)
            } else if w.max(h) / w.min(h) > policy.filter.max_aspect {
                Expect::Reject(RejectCode::ExtremeAspectRatio)
            } else if img.px_width.min(img.px_height) < policy.filter.min_px {
                Expect::Reject(RejectCode::TooSmall)
            } else {
                let y1 = (img.top + img.height) as f64;
                let x0 = img.x as f64;
                // Brute force over every (image, caption) pair; ties keep the first found.
                let mut best: Option<(&SynthText, f64)> = None;
                for c in &captions {
                    let (cx, cy) = c.top_left();
                    if cy < y1 - policy.below_tolerance {
                        continue;
                    }
                    let d = ((cx - x0).powi(2) + (cy - y1).powi(2)).sqrt();
                    if best.is_none() || d < best.unwrap().1 {
                        best = Some((c, d));
                    }
                }
                match best {
                    Some((c, d)) => Expect::Pair {
                        caption_start: c.text.clone(),
                        distance: d,
                    },
                    None => Expect::Reject(RejectCode::NoCaptionFound),
                }
            };
            out.push((p as u32, key, expect));
        }
    }
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

fn observed(ex: &DocumentExtraction) -> Vec<(u32, [i64; 4], Expect)> {
    let key = |b: &vlcorpus::pdf_figures::BBox| [b.x0, b.y0, b.x1, b.y1].map(|v| v.round() as i64);
    let mut out: Vec<_> = ex
        .pairs
        .iter()
        .map(|p| {
            (
                p.image.page_index,
                key(&p.image.bbox),
                Expect::Pair {
                    caption_start: p.caption.text.clone(),
                    distance: p.distance,
                },
            )
        })
        .chain(ex.rejects.iter().map(|r| (r.image.page_index, key(&r.image.bbox), Expect::Reject(r.reason.code))))
        .collect();
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

fn matches(expected: &[(u32, [i64; 4], Expect)], got: &[(u32, [i64; 4], Expect)]) -> bool {
    expected.len() == got.len()
        && expected.iter().zip(got).all(|(e, g)| {
            e.0 == g.0
                && e.1 == g.1
                && match (&e.2, &g.2) {
                    (Expect::Pair { caption_start: a, distance: da }, Expect::Pair { caption_start: b, distance: db }) => {
                        b.starts_with(a.as_str()) && (da - db).abs() < 1e-6
                    }
                    (x, y) => x == y,
                }
        })
}

fn suite() -> Vec<Fixture> {
    let mut all = edge_case_fixtures();
    all.extend(random_fixtures(15, 2024));
    all
}

#[test]
fn every_fixture_matches_the_oracle() {
    let policy = ExtractPolicy::default();
    let fixtures = suite();
    assert!(fixtures.len() >= 20);
    let mut failures = Vec::new();
    for fx in &fixtures {
        let ex = extract_document(&fx.name, &fx.pdf(), &policy).unwrap();
        let (want, got) = (oracle(fx, &policy), observed(&ex));
        if !matches(&want, &got) {
            failures.push(format!("{}:\n  want {want:?}\n  got  {got:?}", fx.name));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn three_four_five_is_exact() {
    let fx = edge_case_fixtures().into_iter().find(|f| f.name == "three_four_five").unwrap();
    let ex = extract_document("t", &fx.pdf(), &ExtractPolicy::default()).unwrap();
    assert_eq!(ex.pairs.len(), 1);
    assert_eq!(ex.pairs[0].distance, 50.0);
}

#[test]
fn shared_caption_flagged_and_caption_above_rejected() {
    let policy = ExtractPolicy::default();
    let by_name = |n: &str| {
        let fx = edge_case_fixtures().into_iter().find(|f| f.name == n).unwrap();
        extract_document(n, &fx.pdf(), &policy).unwrap()
    };
    let shared = by_name("shared_caption");
    assert_eq!(shared.pairs.len(), 2);
    assert!(shared.pairs.iter().all(|p| p.shared_caption));
    let above = by_name("caption_above");
    assert!(above.pairs.is_empty());
    assert_eq!(above.rejects[0].reason.code, RejectCode::NoCaptionFound);
    let multi = by_name("multi_caption");
    assert!(multi.pairs[0].caption.text.starts_with("Figure 1."));
    assert!(!multi.pairs[0].shared_caption);
    let wrapped = by_name("multi_line_caption");
    assert_eq!(wrapped.pairs[0].caption.text, "Figure 13. A caption that wraps onto a second line.");
}

#[test]
fn exclusion_list_rejects_by_pixel_hash() {
    let fx = edge_case_fixtures().into_iter().find(|f| f.name == "single").unwrap();
    let bytes = fx.pdf();
    let first = extract_document("s", &bytes, &ExtractPolicy::default()).unwrap();
    let hash = first.pairs[0].image.content_hash.clone();
    let mut policy = ExtractPolicy::default();
    policy.filter.exclusion = BTreeSet::from([hash]);
    let second = extract_document("s", &bytes, &policy).unwrap();
    assert!(second.pairs.is_empty());
    assert_eq!(second.rejects[0].reason.code, RejectCode::InExclusionList);
}

#[test]
fn unparseable_document_is_an_error() {
    assert!(extract_document("junk", b"%PDF-1.4 not really", &ExtractPolicy::default()).is_err());
}

#[test]
fn parallel_and_sequential_agree_and_sidecars_are_stable() {
    let docs: Vec<(String, Vec<u8>)> = suite().iter().map(|f| (f.name.clone(), f.pdf())).collect();
    let policy = ExtractPolicy::default();
    let seq = extract_documents(&docs, &policy, Exec::Sequential);
    let par = extract_documents(&docs, &policy, Exec::Parallel);
    let dir = tempfile::tempdir().unwrap();
    for (i, (s, p)) in seq.iter().zip(&par).enumerate() {
        let (s, p) = (s.as_ref().unwrap(), p.as_ref().unwrap());
        assert_eq!(observed(s), observed(p));
        let (a, b) = (dir.path().join(format!("a{i}")), dir.path().join(format!("b{i}")));
        let (pa, la) = write_sidecar(s, &a).unwrap();
        let (pb, _) = write_sidecar(p, &b).unwrap();
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        for line in la {
            assert!(a.join(&line.image_path).is_file() || std::path::Path::new(&line.image_path).is_file());
        }
    }
}
