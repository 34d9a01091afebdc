use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use vlcorpus::corpus::{self, CorpusRecord, Source, Split, Store};
use vlcorpus::instruct_eval::{
    build_instruction, diff_proportion_paths, evaluate_run, field_statistics, normalize_damage, parse_answer_vector, write_report,
    AnswerValue, InstructionRecord, Task,
};
use vlcorpus::stats::{image_dimensions, resolution_histogram_from_dims, token_histogram, Axis, BinSpec, TextField, TokenizerAdapter};
use vlcorpus::util::read_jsonl;

use super::{emit, Ctx};
use crate::failure::{Failure, Kind};

fn load_dataset(dataset: &Path) -> Result<Vec<CorpusRecord>> {
    Ok(corpus::import(dataset).with_context(|| format!("reading dataset {}", dataset.display()))?.records)
}

pub fn tokens(ctx: &mut Ctx, dataset: &Path, adapter: Option<String>, bins: Option<usize>, out: &Path) -> Result<()> {
    if let Some(a) = adapter {
        ctx.cfg.tokenizer = a;
    }
    if let Some(b) = bins {
        ctx.cfg.bins = b;
    }
    let mut rec = ctx.begin("stats-tokens")?;
    let adapter = TokenizerAdapter::load(&ctx.cfg.tokenizer).map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    if ctx.cfg.tokenizer != "whitespace" {
        rec.input(Path::new(&ctx.cfg.tokenizer))?;
    }
    rec.input(dataset)?;
    let records = load_dataset(dataset)?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for field in TextField::ALL {
        let h = token_histogram(&records, field, &adapter, &BinSpec::Auto(ctx.cfg.bins), ctx.exec)
            .map_err(|e| Failure::input(format!("{}: {e}", field.as_str())))?;
        let name = format!("tokens_{}.csv", field.as_str());
        fs::write(out.join(&name), h.to_csv())?;
        files.push(name);
    }
    rec.finish(out)?;
    emit(&serde_json::json!({"tokenizer": adapter.id(), "records": records.len(), "files": files}))
}

pub fn resolutions(ctx: &mut Ctx, dataset: &Path, bins: Option<usize>, out: &Path) -> Result<()> {
    if let Some(b) = bins {
        ctx.cfg.bins = b;
    }
    let mut rec = ctx.begin("stats-resolutions")?;
    rec.input(dataset)?;
    let records = load_dataset(dataset)?;
    let refs: BTreeSet<&str> = records.iter().filter_map(|r| r.image_ref.as_deref()).collect();
    let paths: Vec<PathBuf> = refs.iter().map(|r| dataset.join(r)).collect();
    let dims = ctx.exec.map(&paths, |p| image_dimensions(p));
    fs::create_dir_all(out)?;
    let mut skipped = 0;
    for (axis, name) in [(Axis::X, "resolution_x.csv"), (Axis::Y, "resolution_y.csv")] {
        let h = resolution_histogram_from_dims(&dims, axis, &BinSpec::Auto(ctx.cfg.bins), ctx.exec)
            .map_err(|e| Failure::input(format!("{name}: {e}")))?;
        skipped = h.skipped;
        fs::write(out.join(name), h.histogram.to_csv())?;
    }
    rec.finish(out)?;
    emit(&serde_json::json!({"images": paths.len(), "skipped": skipped}))
}

/// One simulation sample. Stress and energy samples give either the per-atom `field`
/// or a ready `answer`; crack samples give `initial`/`final` frames plus `initiate`,
/// or a ready `answer`. Paths are relative to the input file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sample {
    image: PathBuf,
    task: String,
    #[serde(default)]
    answer: Option<Vec<AnswerValue>>,
    #[serde(default)]
    field: Option<Vec<f64>>,
    #[serde(default)]
    initial: Option<PathBuf>,
    #[serde(default, rename = "final")]
    last: Option<PathBuf>,
    #[serde(default)]
    initiate: Option<bool>,
}

pub fn instruct_build(ctx: &mut Ctx, input: &Path, store_dir: &Path, threshold: Option<f64>) -> Result<()> {
    if let Some(t) = threshold {
        ctx.cfg.damage.color_distance_threshold = t;
    }
    let mut rec = ctx.begin("instruct-build")?;
    rec.input(input)?;
    let base = input.parent().unwrap_or(Path::new(""));
    let samples: Vec<Sample> = read_jsonl(input)?;
    if samples.is_empty() {
        return Err(Failure::input(format!("{} has no samples", input.display())).into());
    }
    let mut tasks = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        tasks.push(s.task.parse::<Task>().map_err(|e| Failure::input(format!("line {}: {e}", i + 1)))?);
    }

    // Raw damage for every crack sample given as a frame pair, normalized over the batch.
    let frame_pairs: Vec<(usize, PathBuf, PathBuf)> = samples
        .iter()
        .enumerate()
        .filter(|(i, s)| tasks[*i] == Task::Crack && s.answer.is_none())
        .map(|(i, s)| match (&s.initial, &s.last) {
            (Some(a), Some(b)) => Ok((i, base.join(a), base.join(b))),
            _ => Err(Failure::input(format!("line {}: crack sample needs `answer` or `initial` and `final`", i + 1))),
        })
        .collect::<Result<_, _>>()?;
    let raw = ctx
        .exec
        .map(&frame_pairs, |(_, a, b)| diff_proportion_paths(a, b, &ctx.cfg.damage))
        .into_iter()
        .zip(&frame_pairs)
        .map(|(r, (i, _, _))| r.map_err(|e| Failure::input(format!("line {}: {e}", i + 1))))
        .collect::<Result<Vec<f64>, _>>()?;
    let damage: HashMap<usize, f64> = if raw.is_empty() {
        HashMap::new()
    } else {
        let norm = normalize_damage(&raw).map_err(|e| Failure::input(format!("damage normalization: {e}")))?;
        frame_pairs.iter().map(|(i, _, _)| *i).zip(norm).collect()
    };
    for (_, a, b) in &frame_pairs {
        rec.input(a)?;
        rec.input(b)?;
    }

    let store = Store::open(store_dir)?;
    let mut records = Vec::with_capacity(samples.len());
    for (i, (s, task)) in samples.iter().zip(&tasks).enumerate() {
        let line = i + 1;
        let payload = match (&s.answer, &s.field, damage.get(&i)) {
            (Some(a), _, _) => a.clone(),
            (None, Some(values), _) if *task != Task::Crack => {
                let st = field_statistics(values).map_err(|e| Failure::input(format!("line {line}: {e}")))?;
                vec![AnswerValue::Real(st.std_dev), AnswerValue::Real(st.mean), AnswerValue::Real(st.median)]
            }
            (None, _, Some(d)) => {
                let initiate = s.initiate.ok_or_else(|| Failure::input(format!("line {line}: crack sample lacks `initiate`")))?;
                vec![AnswerValue::Real(*d), AnswerValue::Bool(initiate)]
            }
            _ => return Err(Failure::input(format!("line {line}: {task} sample needs `answer` or `field`")).into()),
        };
        let image = base.join(&s.image);
        let bytes = fs::read(&image).with_context(|| image.display().to_string())?;
        rec.input(&image)?;
        let ext = image.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_else(|| "png".into());
        let (hash, image_ref) = store.put_image(&bytes, &ext)?;
        let inst = build_instruction(*task, image_ref, payload).map_err(|e| Failure::input(format!("line {line}: {e}")))?;
        let mut r = CorpusRecord::with_image(Source::Simulation, &hash, &ext, inst.instruction.clone(), inst.answer.to_string());
        r.task = Some(task.as_str().to_string());
        records.push(r);
    }
    let report = store.add_records(records)?;
    rec.finish(store.root())?;
    emit(&serde_json::json!({"samples": samples.len(), "added": report.added, "duplicate": report.duplicate, "rejected": report.rejected.len()}))
}

#[derive(Debug, Deserialize)]
struct Response {
    id: String,
    response: String,
}

pub fn instruct_eval(ctx: &Ctx, dataset: &Path, responses: &Path, out: &Path, split: Option<&str>) -> Result<()> {
    let split = match split {
        None => None,
        Some("train") => Some(Split::Train),
        Some("test") => Some(Split::Test),
        Some(other) => return Err(Failure::input(format!("unknown split {other:?}")).into()),
    };
    let mut rec = ctx.begin("instruct-eval")?;
    rec.input(dataset)?;
    rec.input(responses)?;
    let mut pairs = Vec::new();
    for r in load_dataset(dataset)? {
        let Some(task) = r.task.as_deref() else { continue };
        if split.is_some_and(|s| s != r.split) {
            continue;
        }
        let task: Task = task.parse().map_err(|e| Failure::input(format!("{}: {e}", r.id)))?;
        let answer = parse_answer_vector(&r.answer, task).map_err(|e| Failure::input(format!("{}: ground truth: {e}", r.id)))?;
        let inst = InstructionRecord {
            image_ref: r.image_ref.clone().unwrap_or_default(),
            task,
            instruction: r.query.clone(),
            answer,
        };
        pairs.push((r.id, inst));
    }
    if pairs.is_empty() {
        return Err(Failure::input("dataset holds no instruction records").into());
    }
    let answers: HashMap<String, String> = read_jsonl::<Response>(responses)?.into_iter().map(|r| (r.id, r.response)).collect();
    let report = evaluate_run(&pairs, &answers);
    write_report(&report, out)?;
    rec.finish(out)?;
    emit(&serde_json::json!({
        "total": report.total,
        "scored": report.scored,
        "missing": report.missing.len(),
        "unparsed": report.unparsed.len(),
        "components": report.components,
        "crack_initiation": report.crack_initiation,
    }))
}
