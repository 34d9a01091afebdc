use std::fmt;

use serde::{Deserialize, Serialize};

use super::ArithError;

/// Which model a layer of the merged stack comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerOrigin {
    Base,
    Donor,
}

/// A base model extended by the last `donor_take` layers of a same-depth donor.
///
/// The merged stack is all `base_layers` base layers followed by donor layers
/// `base_layers - donor_take .. base_layers`. Only the appended donor layers train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePlan {
    pub base_layers: usize,
    pub donor_take: usize,
    pub donor_indices: Vec<usize>,
    pub total_layers: usize,
    pub trainable_mask: Vec<bool>,
}

pub fn merge_plan(base_layers: usize, donor_take: usize) -> Result<MergePlan, ArithError> {
    if base_layers == 0 {
        return Err(ArithError::EmptyBase);
    }
    if donor_take > base_layers {
        return Err(ArithError::DonorExceedsBase {
            base_layers,
            donor_take,
        });
    }
    let total_layers = base_layers + donor_take;
    let mut plan = MergePlan {
        base_layers,
        donor_take,
        donor_indices: (base_layers - donor_take..base_layers).collect(),
        total_layers,
        trainable_mask: Vec::new(),
    };
    plan.trainable_mask = trainable_mask(&plan);
    Ok(plan)
}

/// Everything frozen except the trailing donor layers.
pub fn trainable_mask(plan: &MergePlan) -> Vec<bool> {
    (0..plan.total_layers).map(|i| i >= plan.base_layers).collect()
}

impl MergePlan {
    /// `(merged index, origin, index in the source model, trainable)` for every layer.
    pub fn rows(&self) -> impl Iterator<Item = (usize, LayerOrigin, usize, bool)> + '_ {
        (0..self.total_layers).map(move |i| {
            if i < self.base_layers {
                (i, LayerOrigin::Base, i, self.trainable_mask[i])
            } else {
                (i, LayerOrigin::Donor, self.donor_indices[i - self.base_layers], self.trainable_mask[i])
            }
        })
    }
}

impl fmt::Display for MergePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5}  {:<6}  {:>6}  {}", "layer", "origin", "source", "trainable")?;
        for (i, origin, src, train) in self.rows() {
            let origin = match origin {
                LayerOrigin::Base => "base",
                LayerOrigin::Donor => "donor",
            };
            writeln!(f, "{i:>5}  {origin:<6}  {src:>6}  {train}")?;
        }
        Ok(())
    }
}
