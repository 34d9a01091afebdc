use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::answer::{parse_answer_vector, InstructionRecord, Task};
use super::metrics::{r_squared, ClassificationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub task: Task,
    pub component: String,
    pub n: usize,
    /// Absent when fewer than two samples or a constant ground truth make R² undefined.
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unparsed {
    pub id: String,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub scored: usize,
    pub missing: Vec<String>,
    pub unparsed: Vec<Unparsed>,
    pub components: Vec<ComponentScore>,
    pub crack_initiation: Option<ClassificationReport>,
}

/// Score model responses (keyed by record id) against the records' ground-truth answers.
/// Missing and unparseable responses are excluded from every metric and listed.
pub fn evaluate_run(records: &[(String, InstructionRecord)], responses: &HashMap<String, String>) -> EvalReport {
    // (task, component index) -> (pred, gt)
    let mut series: BTreeMap<(Task, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut flags: (Vec<bool>, Vec<bool>) = (Vec::new(), Vec::new());
    let mut missing = Vec::new();
    let mut unparsed = Vec::new();
    let mut scored = 0;
    for (id, rec) in records {
        let Some(text) = responses.get(id) else {
            missing.push(id.clone());
            continue;
        };
        let pred = match parse_answer_vector(text, rec.task) {
            Ok(p) => p,
            Err(e) => {
                unparsed.push(Unparsed {
                    id: id.clone(),
                    code: e.code().into(),
                    detail: e.to_string(),
                });
                continue;
            }
        };
        scored += 1;
        for (i, (p, g)) in pred.0.iter().zip(&rec.answer.0).enumerate() {
            match (p.as_real(), g.as_real(), p.as_bool(), g.as_bool()) {
                (Some(p), Some(g), _, _) => {
                    let s = series.entry((rec.task, i)).or_default();
                    s.0.push(p);
                    s.1.push(g);
                }
                (_, _, Some(p), Some(g)) => {
                    flags.0.push(p);
                    flags.1.push(g);
                }
                _ => {}
            }
        }
    }
    let components = series
        .into_iter()
        .map(|((task, i), (p, g))| ComponentScore {
            task,
            component: task.component_names()[i].to_string(),
            n: p.len(),
            r_squared: r_squared(&p, &g).ok(),
        })
        .collect();
    let crack_initiation = super::metrics::classification_report(&flags.0, &flags.1).ok();
    EvalReport {
        total: records.len(),
        scored,
        missing,
        unparsed,
        components,
        crack_initiation,
    }
}

/// Writes `eval_components.csv` and `eval_summary.json` under `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("eval_components.csv");
    let mut csv = io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "task,component,n,r_squared")?;
    for c in &report.components {
        let r2 = c.r_squared.map(|r| format!("{r:.6}")).unwrap_or_default();
        writeln!(csv, "{},{},{},{}", c.task, c.component, c.n, r2)?;
    }
    if let Some(r) = &report.crack_initiation {
        for (name, v) in [("accuracy", r.accuracy), ("precision", r.precision), ("recall", r.recall), ("f1", r.f1)] {
            writeln!(csv, "crack,initiate_{name},{},{v:.6}", r.total())?;
        }
    }
    csv.flush()?;
    let json_path = dir.join("eval_summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(vec![csv_path, json_path])
}

#[cfg(test)]
mod tests {
    use super::super::answer::{build_instruction, AnswerValue};
    use super::*;

    fn fixture() -> Vec<(String, InstructionRecord)> {
        (0..20)
            .map(|i| {
                let x = i as f64 / 20.0;
                let rec = if i % 2 == 0 {
                    build_instruction(Task::Stress, "s.png", vec![AnswerValue::Real(x), AnswerValue::Real(1.0 - x), AnswerValue::Real(x * x)])
                } else {
                    build_instruction(Task::Crack, "c.png", vec![AnswerValue::Real(x), AnswerValue::Bool(i % 3 == 0)])
                };
                (format!("r{i:02}"), rec.unwrap())
            })
            .collect()
    }

    #[test]
    fn oracle_responses_score_perfectly() {
        let recs = fixture();
        let responses = recs.iter().map(|(id, r)| (id.clone(), r.answer.to_string())).collect();
        let rep = evaluate_run(&recs, &responses);
        assert_eq!(rep.scored, 20);
        assert!(rep.components.iter().all(|c| (c.r_squared.unwrap() - 1.0).abs() < 1e-4));
        let cr = rep.crack_initiation.unwrap();
        assert_eq!((cr.accuracy, cr.precision, cr.recall, cr.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn unparseable_are_excluded() {
        let recs = fixture();
        let responses: HashMap<String, String> = recs
            .iter()
            .map(|(id, r)| {
                let text = if id == "r04" || id == "r07" { "no idea".into() } else { r.answer.to_string() };
                (id.clone(), text)
            })
            .collect();
        let rep = evaluate_run(&recs, &responses);
        assert_eq!(rep.unparsed.len(), 2);
        assert_eq!(rep.scored, 18);
        assert_eq!(rep.components.iter().find(|c| c.task == Task::Stress).unwrap().n, 9);
        assert_eq!(rep.crack_initiation.unwrap().total(), 9);
    }

    #[test]
    fn shuffled_matches_recomputation() {
        let recs = fixture();
        let stress: Vec<_> = recs.iter().filter(|(_, r)| r.task == Task::Stress).collect();
        // Each stress record answers with the next record's ground truth.
        let responses: HashMap<String, String> = stress
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), stress[(i + 1) % stress.len()].1.answer.to_string()))
            .collect();
        let rep = evaluate_run(&recs, &responses);
        assert_eq!(rep.missing.len(), 10);
        for (k, c) in rep.components.iter().enumerate() {
            let gt: Vec<f64> = stress.iter().map(|(_, r)| r.answer.rounded().0[k].as_real().unwrap()).collect();
            let pred: Vec<f64> = (0..gt.len()).map(|i| gt[(i + 1) % gt.len()]).collect();
            let unrounded_gt: Vec<f64> = stress.iter().map(|(_, r)| r.answer.0[k].as_real().unwrap()).collect();
            let mean = unrounded_gt.iter().sum::<f64>() / gt.len() as f64;
            let ss_tot: f64 = unrounded_gt.iter().map(|g| (g - mean) * (g - mean)).sum();
            let ss_res: f64 = pred.iter().zip(&unrounded_gt).map(|(p, g)| (p - g) * (p - g)).sum();
            let expected = 1.0 - ss_res / ss_tot;
            assert!((c.r_squared.unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn report_files() {
        let recs = fixture();
        let responses = recs.iter().map(|(id, r)| (id.clone(), r.answer.to_string())).collect();
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&evaluate_run(&recs, &responses), dir.path()).unwrap();
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert!(csv.starts_with("task,component,n,r_squared\n"));
        assert_eq!(csv.lines().count(), 1 + 3 + 1 + 4);
    }
}
