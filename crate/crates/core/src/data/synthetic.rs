use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Axis, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub categories: Vec<String>,
}

/// Number of rows to draw for one cell (one category per axis, in axis order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub cells: Vec<String>,
    pub count: usize,
}

/// Additive contribution of one axis category to every cell containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryEffect {
    pub axis: String,
    pub category: String,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    /// Shift of the feature mean for rows in this category.
    #[serde(default)]
    pub mean: Vec<f64>,
}

/// Extra contribution for exactly one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub cells: Vec<String>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub mean: Vec<f64>,
}

/// Generator description: features `x ~ N(mu_g, I)` and labels
/// `y ~ Bernoulli(sigmoid(w_g . x + b_g + eps))`, `eps ~ N(0, noise_scale)`,
/// where `w_g`, `b_g`, `mu_g` sum the effects of the cell's categories plus the
/// cell's interaction term when present. Missing vectors count as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub axes: Vec<AxisSpec>,
    pub groups: Vec<GroupCount>,
    #[serde(default)]
    pub effects: Vec<CategoryEffect>,
    #[serde(default)]
    pub interactions: Vec<InteractionTerm>,
    #[serde(default)]
    pub noise_scale: f64,
    pub feature_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be at least 1".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidArgument("noise_scale must be a finite value >= 0".into()));
        }
        let check_cells = |cells: &[String]| -> Result<()> {
            if cells.len() != self.axes.len() {
                return Err(Error::InvalidArgument(format!(
                    "cell {cells:?} has {} values for {} axes",
                    cells.len(),
                    self.axes.len()
                )));
            }
            for (c, axis) in cells.iter().zip(&self.axes) {
                if !axis.categories.contains(c) {
                    return Err(Error::InvalidArgument(format!(
                        "`{c}` is not a category of axis `{}`",
                        axis.name
                    )));
                }
            }
            Ok(())
        };
        let check_len = |what: &str, v: &[f64]| -> Result<()> {
            if !v.is_empty() && v.len() != self.feature_dim {
                return Err(Error::InvalidArgument(format!(
                    "{what} has length {}, expected {}",
                    v.len(),
                    self.feature_dim
                )));
            }
            Ok(())
        };
        for g in &self.groups {
            check_cells(&g.cells)?;
        }
        for e in &self.effects {
            let axis = self
                .axes
                .iter()
                .find(|a| a.name == e.axis)
                .ok_or_else(|| Error::UnknownAxis(e.axis.clone()))?;
            if !axis.categories.contains(&e.category) {
                return Err(Error::InvalidArgument(format!(
                    "`{}` is not a category of axis `{}`",
                    e.category, e.axis
                )));
            }
            check_len("effect weights", &e.weights)?;
            check_len("effect mean", &e.mean)?;
        }
        for t in &self.interactions {
            check_cells(&t.cells)?;
            check_len("interaction weights", &t.weights)?;
            check_len("interaction mean", &t.mean)?;
        }
        Ok(())
    }

    /// Total logit weights, bias and feature mean for one cell.
    pub fn cell_model(&self, cells: &[String]) -> (Vec<f64>, f64, Vec<f64>) {
        let d = self.feature_dim;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut mu = vec![0.0; d];
        let mut add = |weights: &[f64], bias: f64, mean: &[f64]| {
            for (acc, v) in w.iter_mut().zip(weights) {
                *acc += v;
            }
            for (acc, v) in mu.iter_mut().zip(mean) {
                *acc += v;
            }
            b += bias;
        };
        for (axis, cat) in self.axes.iter().zip(cells) {
            for e in &self.effects {
                if e.axis == axis.name && &e.category == cat {
                    add(&e.weights, e.bias, &e.mean);
                }
            }
        }
        for t in &self.interactions {
            if t.cells == cells {
                add(&t.weights, t.bias, &t.mean);
            }
        }
        (w, b, mu)
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.feature_dim;
    let axes: Vec<Axis> = spec
        .axes
        .iter()
        .map(|a| Axis::new(a.name.clone(), a.categories.clone()))
        .collect();
    let noise = Normal::new(0.0, spec.noise_scale)
        .map_err(|e| Error::InvalidArgument(format!("noise_scale: {e}")))?;
    let mut rng = seed::rng(spec.seed);
    let total: usize = spec.groups.iter().map(|g| g.count).sum();
    let mut data = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut attributes = Vec::with_capacity(total);
    let mut models: BTreeMap<&[String], (Vec<f64>, f64, Vec<f64>)> = BTreeMap::new();
    for g in &spec.groups {
        let (w, b, mu) = models
            .entry(g.cells.as_slice())
            .or_insert_with(|| spec.cell_model(&g.cells))
            .clone();
        let attr: Vec<usize> = g
            .cells
            .iter()
            .zip(&axes)
            .map(|(c, a)| a.category_index(c).expect("validated"))
            .collect();
        for _ in 0..g.count {
            let mut logit = b;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = z + mu[j];
                logit += w[j] * x;
                data.push(x);
            }
            if spec.noise_scale > 0.0 {
                logit += noise.sample(&mut rng);
            }
            let p = 1.0 / (1.0 + (-logit).exp());
            labels.push(u8::from(rng.random::<f64>() < p));
            attributes.push(attr.clone());
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(Matrix::new(total, d, data)?, names, labels, axes, attributes)
}
