use serde::{Deserialize, Serialize};

use super::ArithError;
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateConfig {
    pub num_experts: usize,
    pub k: usize,
    pub hidden_dim: usize,
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), ArithError> {
        if self.num_experts == 0 {
            return Err(ArithError::NoExperts);
        }
        if self.k == 0 || self.k > self.num_experts {
            return Err(ArithError::InvalidK {
                k: self.k,
                experts: self.num_experts,
            });
        }
        if self.hidden_dim == 0 {
            return Err(ArithError::DimMismatch { expected: 1, got: 0 });
        }
        Ok(())
    }
}

/// Affine gate: `scores = weight · hidden + bias`, with `weight` stored row-major (E × d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub num_experts: usize,
    pub hidden_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl GateParams {
    pub fn zeros(num_experts: usize, hidden_dim: usize) -> Self {
        Self {
            num_experts,
            hidden_dim,
            weight: vec![0.0; num_experts * hidden_dim],
            bias: vec![0.0; num_experts],
        }
    }

    pub fn row(&self, expert: usize) -> &[f64] {
        &self.weight[expert * self.hidden_dim..(expert + 1) * self.hidden_dim]
    }
}

/// Hidden state of one token position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenState(pub Vec<f64>);

impl TokenState {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Selected experts, highest score first, with softmax weights over the selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub weights: Vec<f64>,
    pub indices: Vec<usize>,
}

/// An expert maps a hidden vector to an output vector of the same length.
pub type Expert<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a>;

pub fn gate_scores(state: &TokenState, params: &GateParams) -> Result<Vec<f64>, ArithError> {
    if state.dim() != params.hidden_dim {
        return Err(ArithError::DimMismatch {
            expected: params.hidden_dim,
            got: state.dim(),
        });
    }
    (0..params.num_experts)
        .map(|e| {
            let s = params.bias[e] + params.row(e).iter().zip(&state.0).map(|(w, x)| w * x).sum::<f64>();
            if s.is_finite() {
                Ok(s)
            } else {
                Err(ArithError::NonFiniteScore(e))
            }
        })
        .collect()
}

/// Picks the `k` highest-scoring experts (ties to the lower index) and softmaxes their
/// scores among themselves.
pub fn gate_topk(state: &TokenState, params: &GateParams, k: usize) -> Result<TopK, ArithError> {
    if k == 0 || k > params.num_experts {
        return Err(ArithError::InvalidK {
            k,
            experts: params.num_experts,
        });
    }
    let scores = gate_scores(state, params)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    let top = scores[order[0]];
    let exps: Vec<f64> = order.iter().map(|&i| (scores[i] - top).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(TopK {
        weights: exps.iter().map(|e| e / z).collect(),
        indices: order,
    })
}

/// `Σ_i T_i · f_{I_i}(x)` over the top-k selection.
///
/// The sum starts from the first weighted term, so with `k = 1` the result is bit-identical
/// to the chosen expert's output.
pub fn moe_combine(state: &TokenState, params: &GateParams, k: usize, experts: &[Expert<'_>]) -> Result<Vec<f64>, ArithError> {
    if experts.len() != params.num_experts {
        return Err(ArithError::DimMismatch {
            expected: params.num_experts,
            got: experts.len(),
        });
    }
    let top = gate_topk(state, params, k)?;
    let mut out: Option<Vec<f64>> = None;
    for (&w, &idx) in top.weights.iter().zip(&top.indices) {
        let y = experts[idx](&state.0);
        if y.len() != state.dim() {
            return Err(ArithError::DimMismatch {
                expected: state.dim(),
                got: y.len(),
            });
        }
        match out.as_mut() {
            None => out = Some(y.into_iter().map(|v| w * v).collect()),
            Some(acc) => acc.iter_mut().zip(y).for_each(|(a, v)| *a += w * v),
        }
    }
    Ok(out.expect("k >= 1"))
}

/// [`moe_combine`] over a grid of token positions.
pub fn moe_combine_batch(
    states: &[TokenState],
    params: &GateParams,
    k: usize,
    experts: &[Expert<'_>],
    exec: Exec,
) -> Result<Vec<Vec<f64>>, ArithError> {
    exec.map(states, |s| moe_combine(s, params, k, experts)).into_iter().collect()
}
