//! Synthetic generators with planted ground truth, one per study.

use crate::data::{AxisSpec, CategoryEffect, GroupCount, InteractionTerm, SyntheticSpec};

fn axis(name: &str, categories: &[&str]) -> AxisSpec {
    AxisSpec {
        name: name.into(),
        categories: categories.iter().map(|c| c.to_string()).collect(),
    }
}

fn effect(axis: &str, category: &str, weights: Vec<f64>, bias: f64, mean: Vec<f64>) -> CategoryEffect {
    CategoryEffect {
        axis: axis.into(),
        category: category.into(),
        weights,
        bias,
        mean,
    }
}

fn cells(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn unit(d: usize, j: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[j] = scale;
    v
}

/// Race {R1, R2} by sex {F, M}, one shared labelling rule, and cell biases
/// that spread base rates from roughly 0.7 (R1-M) down to 0.15 (R2-F).
pub fn base_rate_disparity(per_group: usize, seed: u64) -> SyntheticSpec {
    let weights = vec![1.5, 1.0, 0.5, 0.0];
    SyntheticSpec {
        axes: vec![axis("race", &["R1", "R2"]), axis("sex", &["F", "M"])],
        groups: [["R1", "F"], ["R1", "M"], ["R2", "F"], ["R2", "M"]]
            .iter()
            .map(|c| GroupCount {
                cells: cells(c),
                count: per_group,
            })
            .collect(),
        effects: vec![
            effect("race", "R1", weights.clone(), 0.8, vec![]),
            effect("race", "R2", weights, -1.2, vec![]),
            effect("sex", "F", vec![], -0.6, vec![]),
            effect("sex", "M", vec![], 0.6, vec![]),
        ],
        interactions: vec![],
        noise_scale: 0.0,
        feature_dim: 4,
        seed,
    }
}

/// One axis of `n_groups` groups `g0..`, a shared labelling rule, and biases
/// rising evenly from -`spread` to +`spread`, so base rates increase with the
/// group index.
pub fn monotone_base_rates(n_groups: usize, per_group: usize, spread: f64, seed: u64) -> SyntheticSpec {
    let names: Vec<String> = (0..n_groups).map(|g| format!("g{g}")).collect();
    let weights = vec![1.2, 0.8, 0.4];
    let step = if n_groups > 1 { 2.0 * spread / (n_groups - 1) as f64 } else { 0.0 };
    SyntheticSpec {
        axes: vec![AxisSpec {
            name: "group".into(),
            categories: names.clone(),
        }],
        groups: names
            .iter()
            .map(|n| GroupCount {
                cells: vec![n.clone()],
                count: per_group,
            })
            .collect(),
        effects: names
            .iter()
            .enumerate()
            .map(|(g, n)| effect("group", n, weights.clone(), -spread + step * g as f64, vec![]))
            .collect(),
        interactions: vec![],
        noise_scale: 0.0,
        feature_dim: 3,
        seed,
    }
}

/// Race {B, W} by sex {F, M}. Every cell labels with the rule `x0`; with
/// `interaction`, the B-F cell instead labels with `x1` alone, a rule none of
/// the cells sharing one of its identities follows.
pub fn predictivity(per_group: usize, interaction: bool, seed: u64) -> SyntheticSpec {
    let d = 4;
    let strength = 2.0;
    SyntheticSpec {
        axes: vec![axis("race", &["B", "W"]), axis("sex", &["F", "M"])],
        groups: [["B", "F"], ["B", "M"], ["W", "F"], ["W", "M"]]
            .iter()
            .map(|c| GroupCount {
                cells: cells(c),
                count: per_group,
            })
            .collect(),
        effects: vec![
            effect("race", "B", unit(d, 0, strength), 0.0, vec![]),
            effect("race", "W", unit(d, 0, strength), 0.0, vec![]),
        ],
        interactions: if interaction {
            vec![InteractionTerm {
                cells: cells(&["B", "F"]),
                weights: vec![-strength, strength, 0.0, 0.0],
                bias: 0.0,
                mean: vec![],
            }]
        } else {
            vec![]
        },
        noise_scale: 0.0,
        feature_dim: d,
        seed,
    }
}

/// Race {A, B, C, Other}. Groups A to C sit at well separated feature means
/// (4 standard deviations along their own coordinate) with their own
/// labelling rules; Other copies A's distribution and rule exactly.
pub fn other_alias(per_group: usize, other_count: usize, seed: u64) -> SyntheticSpec {
    let d = 4;
    let shift = 4.0;
    // A labelling rule centred on the group mean keeps each base rate near 0.5.
    let rule = |j: usize, w: Vec<f64>| -> (Vec<f64>, f64, Vec<f64>) {
        let mean = unit(d, j, shift);
        let bias = -w.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>();
        (w, bias, mean)
    };
    let rules = [
        ("A", rule(0, vec![1.5, 1.0, 0.0, 0.0])),
        ("B", rule(1, vec![0.0, 1.5, -1.0, 0.0])),
        ("C", rule(2, vec![0.0, 0.0, 1.5, 1.0])),
        ("Other", rule(0, vec![1.5, 1.0, 0.0, 0.0])),
    ];
    SyntheticSpec {
        axes: vec![axis("race", &["A", "B", "C", "Other"])],
        groups: rules
            .iter()
            .map(|(name, _)| GroupCount {
                cells: cells(&[name]),
                count: if *name == "Other" { other_count } else { per_group },
            })
            .collect(),
        effects: rules
            .into_iter()
            .map(|(name, (w, b, mu))| effect("race", name, w, b, mu))
            .collect(),
        interactions: vec![],
        noise_scale: 0.0,
        feature_dim: d,
        seed,
    }
}

/// Race {API-1, API-2, API-3, B, W}. With `shared`, the three API groups
/// share one rule; otherwise API-3 follows its own.
pub fn granularity(per_group: usize, shared: bool, seed: u64) -> SyntheticSpec {
    let d = 4;
    let names = ["API-1", "API-2", "API-3", "B", "W"];
    let mut effects = vec![
        effect("race", "API-1", vec![1.5, 0.5, 0.0, 0.0], 0.3, vec![]),
        effect("race", "API-2", vec![1.5, 0.5, 0.0, 0.0], 0.3, vec![]),
        effect("race", "B", vec![1.0, 1.0, 0.0, 0.0], -0.5, vec![]),
        effect("race", "W", vec![1.0, 1.0, 0.0, 0.0], 0.5, vec![]),
    ];
    effects.push(if shared {
        effect("race", "API-3", vec![1.5, 0.5, 0.0, 0.0], 0.3, vec![])
    } else {
        effect("race", "API-3", vec![-1.0, 0.0, 1.5, 0.0], -0.8, vec![])
    });
    SyntheticSpec {
        axes: vec![axis("race", &names)],
        groups: names
            .iter()
            .map(|n| GroupCount {
                cells: cells(&[n]),
                count: per_group,
            })
            .collect(),
        effects,
        interactions: vec![],
        noise_scale: 0.0,
        feature_dim: d,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::groups::GroupingScheme;

    fn base_rates(spec: &SyntheticSpec, axes: &[&str]) -> Vec<(String, f64)> {
        let ds = generate_synthetic(spec).unwrap();
        let labels = GroupingScheme::conjunction(&ds, axes).unwrap().assign(&ds).unwrap();
        labels
            .ids()
            .iter()
            .enumerate()
            .map(|(g, id)| {
                let rows = labels.members(g);
                let pos = rows.iter().filter(|&&i| ds.labels()[i] == 1).count();
                (id.clone(), pos as f64 / rows.len() as f64)
            })
            .collect()
    }

    #[test]
    fn presets_validate() {
        base_rate_disparity(10, 0).validate().unwrap();
        monotone_base_rates(8, 10, 2.0, 0).validate().unwrap();
        predictivity(10, true, 0).validate().unwrap();
        other_alias(10, 5, 0).validate().unwrap();
        granularity(10, false, 0).validate().unwrap();
    }

    #[test]
    fn disparity_spreads_base_rates() {
        let rates = base_rate_disparity(4000, 1);
        let r = base_rates(&rates, &["race", "sex"]);
        let hi = r.iter().map(|x| x.1).fold(0.0, f64::max);
        let lo = r.iter().map(|x| x.1).fold(1.0, f64::min);
        assert!(hi - lo > 0.4, "{r:?}");
    }

    #[test]
    fn monotone_rates_increase() {
        let r = base_rates(&monotone_base_rates(8, 3000, 2.0, 2), &["group"]);
        assert!(r.windows(2).all(|w| w[0].1 < w[1].1), "{r:?}");
    }

    #[test]
    fn alias_matches_its_source() {
        let spec = other_alias(10, 10, 0);
        assert_eq!(spec.cell_model(&cells(&["A"])), spec.cell_model(&cells(&["Other"])));
    }
}
