use std::fs;

use anyhow::Result;
use vlcorpus::model_arith::clusters::gaussian_clusters;
use vlcorpus::model_arith::{
    self, gate_scores, moe_combine, routing_accuracy, train_gate, Expert, GateConfig, GateParams, MergePlan, TokenState, TrainOptions,
};

use super::Ctx;
use crate::failure::Failure;
use crate::{MergeArgs, MoeArgs};

/// Deterministic nonlinear experts for the combine check.
fn demo_experts(n: usize) -> Vec<Expert<'static>> {
    (0..n)
        .map(|e| {
            let scale = e as f64 + 1.0;
            Box::new(move |x: &[f64]| x.iter().map(|v| scale * v.tanh() + e as f64).collect()) as Expert<'static>
        })
        .collect()
}

/// Largest gap between the k = E combine and a dense softmax over all experts.
fn dense_residual(params: &GateParams, tokens: &[TokenState], experts: &[Expert<'_>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in tokens {
        let mixed = moe_combine(t, params, params.num_experts, experts)?;
        let scores = gate_scores(t, params)?;
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut dense = vec![0.0; t.dim()];
        for (e, w) in exps.iter().enumerate() {
            for (d, y) in dense.iter_mut().zip(experts[e](&t.0)) {
                *d += w / z * y;
            }
        }
        worst = mixed.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

pub fn moe_demo(ctx: &mut Ctx, a: MoeArgs) -> Result<()> {
    if let Some(s) = a.seed {
        ctx.cfg.seed = s;
    }
    let rec = ctx.begin("moe-demo")?;
    let gate = GateConfig {
        num_experts: a.experts,
        k: a.k,
        hidden_dim: a.dim,
    };
    gate.validate().map_err(|e| Failure::input(e.to_string()))?;
    let defaults = TrainOptions::default();
    let opts = TrainOptions {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        lr: a.lr.unwrap_or(defaults.lr),
        exec: ctx.exec,
        ..defaults
    };
    let seed = ctx.cfg.seed;
    let train = gaussian_clusters(a.experts, a.dim, a.per_expert, a.separation, a.sigma, seed);
    let held = gaussian_clusters(a.experts, a.dim, a.held_out, a.separation, a.sigma, seed.wrapping_add(1));
    let trained = train_gate(&train, &gate, &opts)?;
    let accuracy = routing_accuracy(&trained.params, &held)?;
    let probe: Vec<TokenState> = held.iter().flat_map(|c| c.iter().take(50).cloned()).collect();
    let residual = dense_residual(&trained.params, &probe, &demo_experts(a.experts))?;

    let out = a.out.clone().unwrap_or_else(|| ctx.cfg.output_root.join("moe-demo"));
    fs::create_dir_all(&out)?;
    let result = serde_json::json!({
        "experts": a.experts,
        "k": a.k,
        "dim": a.dim,
        "seed": seed,
        "epochs": opts.epochs,
        "lr": opts.lr,
        "routing_accuracy": accuracy,
        "held_out_tokens": held.iter().map(Vec::len).sum::<usize>(),
        "dense_residual": residual,
        "initial_loss": trained.initial_loss,
        "final_loss": trained.final_loss,
        "losses": trained.losses,
        "gate": trained.params,
    });
    fs::write(out.join("moe_demo.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    rec.finish(&out)?;

    println!("routing_accuracy {accuracy:.4}");
    println!("dense_residual {residual:.3e}");
    println!("loss {:.6} -> {:.6}", trained.initial_loss, trained.final_loss);
    Ok(())
}

fn table(plan: &MergePlan) -> String {
    let mut s = format!("{:>5}  {:<6}  {:>6}  trainable\n", "layer", "origin", "source");
    for (i, origin, src, trainable) in plan.rows() {
        let origin = match origin {
            model_arith::LayerOrigin::Base => "base",
            model_arith::LayerOrigin::Donor => "donor",
        };
        s.push_str(&format!("{i:>5}  {origin:<6}  {src:>6}  {}\n", if trainable { "yes" } else { "no" }));
    }
    s.push_str(&format!(
        "total {} layers: {} base + {} donor (donor layers {}..={})\n",
        plan.total_layers,
        plan.base_layers,
        plan.donor_take,
        plan.donor_indices.first().map_or(String::from("-"), |v| v.to_string()),
        plan.donor_indices.last().map_or(String::from("-"), |v| v.to_string()),
    ));
    s
}

pub fn merge_plan(ctx: &Ctx, a: MergeArgs) -> Result<()> {
    let rec = ctx.begin("merge-plan")?;
    let plan = model_arith::merge_plan(a.base, a.donor).map_err(|e| Failure::input(e.to_string()))?;
    let out = a.out.clone().unwrap_or_else(|| ctx.cfg.output_root.join("merge-plan"));
    fs::create_dir_all(&out)?;
    fs::write(out.join("merge_plan.json"), serde_json::to_string_pretty(&plan)? + "\n")?;
    rec.finish(&out)?;
    if a.json {
        println!("{}", serde_json::to_string(&plan)?);
    } else {
        print!("{}", table(&plan));
    }
    Ok(())
}
