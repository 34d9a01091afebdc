use std::path::Path;

use vlcorpus::corpus::{export, CorpusRecord, Source, Store};
use vlcorpus::stats::{report, token_histogram, BinSpec, TextField, TokenizerAdapter};
use vlcorpus::Exec;

fn fixture_adapter() -> TokenizerAdapter {
    TokenizerAdapter::from_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tokenizer.json")).unwrap()
}

#[test]
fn vocabulary_adapter_applies_merges() {
    // Merges in rank order: t h, th e, a t, c at, o n.
    // the -> [the]; cat -> c,at -> [cat]; sat -> [s, at]; on -> [on]; the -> [the];
    // mat -> [m, at]; . -> [.]  => 9 tokens.
    let adapter = fixture_adapter();
    assert_eq!(adapter.count_tokens("the cat sat on the mat."), 9);
    assert_eq!(adapter.count_tokens(""), 0);
    assert_eq!(TokenizerAdapter::Whitespace.count_tokens("the cat sat on the mat."), 6);
}

#[test]
fn vocabulary_histogram() {
    let records = vec![
        CorpusRecord::text_only("the cat", "sat on the mat."),
        CorpusRecord::text_only("the", "cat"),
    ];
    let h = token_histogram(&records, TextField::Answer, &fixture_adapter(), &BinSpec::Edges(vec![0.0, 2.0, 10.0]), Exec::Sequential).unwrap();
    assert_eq!(h.counts, vec![1, 1]);
}

fn build_corpus(dir: &Path) -> Vec<CorpusRecord> {
    let store = Store::open(dir.join("store")).unwrap();
    let mut recs = Vec::new();
    for i in 0..12u32 {
        if i % 3 == 0 {
            recs.push(CorpusRecord::text_only(format!("question {i}"), "an answer"));
        } else {
            let img = image::RgbImage::from_pixel(20 + i, 40 - i, image::Rgb([i as u8, 0, 0]));
            let mut bytes = Vec::new();
            img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png).unwrap();
            let (hash, _) = store.put_image(&bytes, "png").unwrap();
            recs.push(CorpusRecord::with_image(Source::Wikipedia, &hash, "png", "Describe the image.", format!("The image shows {i} things")));
        }
    }
    store.add_records(recs).unwrap();
    store.assign_splits(0.9, 1).unwrap();
    export(&store, "fixture", &dir.join("export")).unwrap();
    vlcorpus::corpus::import(&dir.join("export")).unwrap().records
}

#[test]
fn report_writes_six_files_with_consistent_sums() {
    let dir = tempfile::tempdir().unwrap();
    let records = build_corpus(dir.path());
    let out = dir.path().join("stats");
    let summary = report(&records, &dir.path().join("export"), &TokenizerAdapter::Whitespace, &BinSpec::Auto(5), &out, Exec::Parallel).unwrap();
    assert_eq!(summary.files.len(), 6);
    let sum_counts = |name: &str| -> u64 {
        std::fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum()
    };
    for f in ["tokens_question.csv", "tokens_answer.csv", "tokens_combined.csv"] {
        assert_eq!(sum_counts(f), 12);
    }
    assert_eq!(sum_counts("resolution_x.csv"), 8);
    assert_eq!(sum_counts("resolution_y.csv"), 8);

    let first: Vec<_> = summary.files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect();
    let out2 = dir.path().join("stats2");
    report(&records, &dir.path().join("export"), &TokenizerAdapter::Whitespace, &BinSpec::Auto(5), &out2, Exec::Sequential).unwrap();
    let second: Vec<_> = summary.files.iter().map(|f| std::fs::read(out2.join(f)).unwrap()).collect();
    assert_eq!(first, second);
}
