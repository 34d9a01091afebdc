use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vlcorpus::corpus::CorpusRecord;
use vlcorpus::model_arith::clusters::gaussian_clusters;
use vlcorpus::model_arith::{loss_and_gradient, moe_combine_batch, Expert, GateParams};
use vlcorpus::pdf_figures::synth::random_fixtures;
use vlcorpus::pdf_figures::{extract_documents, ExtractPolicy};
use vlcorpus::stats::{resolution_histogram_from_dims, token_histogram, Axis, BinSpec, TextField, TokenizerAdapter};
use vlcorpus::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn gradient(c: &mut Criterion) {
    let samples = gaussian_clusters(3, 64, 2000, 5.0, 1.0, 1);
    let mut params = GateParams::zeros(3, 64);
    params.weight.iter_mut().enumerate().for_each(|(i, w)| *w = ((i % 7) as f64 - 3.0) * 0.01);
    let mut g = c.benchmark_group("gate_gradient");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| loss_and_gradient(&params, &samples, exec).unwrap()));
    }
    g.finish();
}

fn moe_batch(c: &mut Criterion) {
    let tokens: Vec<_> = gaussian_clusters(4, 64, 1000, 5.0, 1.0, 2).into_iter().flatten().collect();
    let mut params = GateParams::zeros(4, 64);
    params.weight.iter_mut().enumerate().for_each(|(i, w)| *w = ((i % 5) as f64 - 2.0) * 0.1);
    let experts: Vec<Expert> = (0..4)
        .map(|e| Box::new(move |x: &[f64]| x.iter().map(|v| (v * (e + 1) as f64).tanh()).collect()) as Expert)
        .collect();
    let mut g = c.benchmark_group("moe_combine_batch");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| moe_combine_batch(&tokens, &params, 2, &experts, exec).unwrap()));
    }
    g.finish();
}

fn histograms(c: &mut Criterion) {
    let records: Vec<CorpusRecord> = (0..20_000)
        .map(|i| CorpusRecord::text_only(format!("question {i} about {}", "material ".repeat(i % 40)), "the answer ".repeat(1 + i % 90)))
        .collect();
    let dims: Vec<Option<(u32, u32)>> = (0..200_000u32).map(|i| Some((64 + i % 2000, 64 + (i * 7) % 1500))).collect();
    let adapter = TokenizerAdapter::Whitespace;
    let mut g = c.benchmark_group("histograms");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("tokens", name), |b| {
            b.iter(|| token_histogram(&records, TextField::Combined, &adapter, &BinSpec::default(), exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("resolution", name), |b| {
            b.iter(|| resolution_histogram_from_dims(&dims, Axis::X, &BinSpec::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let docs: Vec<(String, Vec<u8>)> = random_fixtures(24, 9).into_iter().map(|f| (f.name.clone(), f.pdf())).collect();
    let policy = ExtractPolicy::default();
    let mut g = c.benchmark_group("extract_documents");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| extract_documents(&docs, &policy, exec)));
    }
    g.finish();
}

criterion_group!(benches, gradient, moe_batch, histograms, extraction);
criterion_main!(benches);
