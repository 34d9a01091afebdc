use serde::{Deserialize, Serialize};

use super::gate::{gate_scores, GateParams, TokenState};
use super::{ArithError, GateConfig};
use crate::Exec;

/// Gradient-descent schedule for the gate. Defaults: 1000 epochs, learning rate 5e-5,
/// loss reported every 100 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub loss_report_every: usize,
    /// Starting point; zeros when absent.
    #[serde(skip)]
    pub init: Option<GateParams>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 5e-5,
            loss_report_every: 100,
            init: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGate {
    pub params: GateParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `(epoch, loss)` before the update of every reported epoch.
    pub losses: Vec<(usize, f64)>,
}

struct Accum {
    loss: f64,
    grad_w: Vec<f64>,
    grad_b: Vec<f64>,
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// Mean cross-entropy of `softmax(scores)` against one-hot expert labels, and its gradient
/// `(d/dweight, d/dbias)`. `samples[e]` holds the states whose target is expert `e`.
pub fn loss_and_gradient(
    params: &GateParams,
    samples: &[Vec<TokenState>],
    exec: Exec,
) -> Result<(f64, Vec<f64>, Vec<f64>), ArithError> {
    let (e, d) = (params.num_experts, params.hidden_dim);
    let flat: Vec<(usize, &TokenState)> = samples
        .iter()
        .enumerate()
        .flat_map(|(label, xs)| xs.iter().map(move |x| (label, x)))
        .collect();
    for (_, x) in &flat {
        if x.dim() != d {
            return Err(ArithError::DimMismatch { expected: d, got: x.dim() });
        }
    }
    let n = flat.len().max(1) as f64;
    let acc = exec.fold(
        &flat,
        || {
            Ok(Accum {
                loss: 0.0,
                grad_w: vec![0.0; e * d],
                grad_b: vec![0.0; e],
            })
        },
        |acc: Result<Accum, ArithError>, (label, x)| {
            let mut acc = acc?;
            let scores = gate_scores(x, params)?;
            let logp = log_softmax(&scores);
            acc.loss -= logp[*label];
            for (j, lp) in logp.iter().enumerate() {
                let delta = lp.exp() - if j == *label { 1.0 } else { 0.0 };
                acc.grad_b[j] += delta;
                let row = &mut acc.grad_w[j * d..(j + 1) * d];
                row.iter_mut().zip(&x.0).for_each(|(g, xi)| *g += delta * xi);
            }
            Ok(acc)
        },
        |a, b| {
            let (mut a, b) = (a?, b?);
            a.loss += b.loss;
            a.grad_w.iter_mut().zip(b.grad_w).for_each(|(x, y)| *x += y);
            a.grad_b.iter_mut().zip(b.grad_b).for_each(|(x, y)| *x += y);
            Ok(a)
        },
    )?;
    Ok((
        acc.loss / n,
        acc.grad_w.into_iter().map(|g| g / n).collect(),
        acc.grad_b.into_iter().map(|g| g / n).collect(),
    ))
}

/// Full-batch gradient descent on the gate's routing cross-entropy.
pub fn train_gate(samples: &[Vec<TokenState>], cfg: &GateConfig, opts: &TrainOptions) -> Result<TrainedGate, ArithError> {
    cfg.validate()?;
    if samples.len() != cfg.num_experts {
        return Err(ArithError::DimMismatch {
            expected: cfg.num_experts,
            got: samples.len(),
        });
    }
    if let Some(empty) = samples.iter().position(Vec::is_empty) {
        return Err(ArithError::EmptyClass(empty));
    }
    let mut params = opts
        .init
        .clone()
        .unwrap_or_else(|| GateParams::zeros(cfg.num_experts, cfg.hidden_dim));
    if params.num_experts != cfg.num_experts || params.hidden_dim != cfg.hidden_dim {
        return Err(ArithError::DimMismatch {
            expected: cfg.num_experts * cfg.hidden_dim,
            got: params.weight.len(),
        });
    }
    let mut losses = Vec::new();
    let mut initial_loss = None;
    for epoch in 0..opts.epochs {
        let (loss, gw, gb) = loss_and_gradient(&params, samples, opts.exec)?;
        initial_loss.get_or_insert(loss);
        if opts.loss_report_every > 0 && epoch % opts.loss_report_every == 0 {
            log::info!("gate epoch {epoch}: loss {loss:.6}");
            losses.push((epoch, loss));
        }
        params.weight.iter_mut().zip(gw).for_each(|(w, g)| *w -= opts.lr * g);
        params.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= opts.lr * g);
    }
    let (final_loss, _, _) = loss_and_gradient(&params, samples, opts.exec)?;
    Ok(TrainedGate {
        params,
        initial_loss: initial_loss.unwrap_or(final_loss),
        final_loss,
        losses,
    })
}

/// Fraction of samples whose highest-scoring expert is their label.
pub fn routing_accuracy(params: &GateParams, samples: &[Vec<TokenState>]) -> Result<f64, ArithError> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (label, xs) in samples.iter().enumerate() {
        for x in xs {
            let top = super::gate::gate_topk(x, params, 1)?;
            hits += usize::from(top.indices[0] == label);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_arith::clusters::gaussian_clusters;

    #[test]
    fn single_expert_has_zero_loss() {
        let samples = vec![vec![TokenState(vec![1.0, 2.0]), TokenState(vec![-1.0, 0.5])]];
        let cfg = GateConfig {
            num_experts: 1,
            k: 1,
            hidden_dim: 2,
        };
        let t = train_gate(&samples, &cfg, &TrainOptions::default()).unwrap();
        assert!(t.final_loss.abs() < 1e-12);
        assert_eq!(routing_accuracy(&t.params, &samples).unwrap(), 1.0);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let samples = gaussian_clusters(3, 4, 5, 5.0, 1.0, 1);
        let cfg = GateConfig {
            num_experts: 3,
            k: 1,
            hidden_dim: 4,
        };
        let mut init = GateParams::zeros(3, 4);
        init.weight.iter_mut().enumerate().for_each(|(i, w)| *w = i as f64 * 0.1);
        let opts = TrainOptions {
            epochs: 20,
            lr: 0.0,
            init: Some(init.clone()),
            ..Default::default()
        };
        assert_eq!(train_gate(&samples, &cfg, &opts).unwrap().params, init);
    }

    #[test]
    fn empty_class_is_an_error() {
        let samples = vec![vec![TokenState(vec![0.0])], vec![]];
        let cfg = GateConfig {
            num_experts: 2,
            k: 1,
            hidden_dim: 1,
        };
        assert_eq!(train_gate(&samples, &cfg, &TrainOptions::default()), Err(ArithError::EmptyClass(1)));
    }

    #[test]
    fn loss_does_not_increase() {
        let samples = gaussian_clusters(3, 8, 20, 5.0, 1.0, 9);
        let cfg = GateConfig {
            num_experts: 3,
            k: 1,
            hidden_dim: 8,
        };
        let t = train_gate(&samples, &cfg, &TrainOptions { epochs: 50, lr: 0.05, ..Default::default() }).unwrap();
        assert!(t.final_loss <= t.initial_loss);
        assert_eq!(t.losses.len(), 1);
    }

    #[test]
    fn parallel_and_sequential_gradients_agree() {
        let samples = gaussian_clusters(3, 8, 40, 5.0, 1.0, 4);
        let mut p = GateParams::zeros(3, 8);
        p.weight.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64).sin());
        let (ls, gws, gbs) = loss_and_gradient(&p, &samples, Exec::Sequential).unwrap();
        let (lp, gwp, gbp) = loss_and_gradient(&p, &samples, Exec::Parallel).unwrap();
        assert!((ls - lp).abs() < 1e-12);
        for (a, b) in gws.iter().chain(&gbs).zip(gwp.iter().chain(&gbp)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn default_schedule_routes_clusters() {
        let train = gaussian_clusters(3, 64, 50, 5.0, 1.0, 2024);
        let held_out = gaussian_clusters(3, 64, 500, 5.0, 1.0, 2025);
        let cfg = GateConfig {
            num_experts: 3,
            k: 1,
            hidden_dim: 64,
        };
        let t = train_gate(&train, &cfg, &TrainOptions::default()).unwrap();
        assert_eq!(t.losses.len(), 10);
        assert!(t.final_loss < t.initial_loss);
        let acc = routing_accuracy(&t.params, &held_out).unwrap();
        assert!(acc >= 0.99, "held-out accuracy {acc}");
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut seed = 17u64;
        for trial in 0..40 {
            let e = 1 + trial % 3;
            let d = 1 + (trial * 5) % 8;
            let samples: Vec<Vec<TokenState>> = (0..e)
                .map(|_| (0..3).map(|_| TokenState((0..d).map(|_| 2.0 * lcg(&mut seed)).collect())).collect())
                .collect();
            let mut p = GateParams::zeros(e, d);
            p.weight.iter_mut().for_each(|w| *w = lcg(&mut seed));
            p.bias.iter_mut().for_each(|b| *b = lcg(&mut seed));
            let (_, gw, gb) = loss_and_gradient(&p, &samples, Exec::Sequential).unwrap();
            let h = 1e-5;
            let loss_at = |q: &GateParams| loss_and_gradient(q, &samples, Exec::Sequential).unwrap().0;
            let check = |analytic: f64, numeric: f64| {
                let scale = analytic.abs().max(numeric.abs()).max(1e-3);
                assert!((analytic - numeric).abs() / scale < 1e-4, "analytic {analytic} numeric {numeric}");
            };
            for i in 0..p.weight.len() {
                let (mut a, mut b) = (p.clone(), p.clone());
                a.weight[i] += h;
                b.weight[i] -= h;
                check(gw[i], (loss_at(&a) - loss_at(&b)) / (2.0 * h));
            }
            for i in 0..e {
                let (mut a, mut b) = (p.clone(), p.clone());
                a.bias[i] += h;
                b.bias[i] -= h;
                check(gb[i], (loss_at(&a) - loss_at(&b)) / (2.0 * h));
            }
        }
    }
}
