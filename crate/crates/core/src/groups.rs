//! Group identities over one or more demographic axes: conjunction encoding,
//! coarsening, small-group filtering and handling of a residual "Other" group.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Separator between axis values in a conjunction group id.
pub const JOIN: &str = "-";

/// Mapping from attribute tuples (over `axes`) to group ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingScheme {
    pub name: String,
    axes: Vec<String>,
    mapping: BTreeMap<Vec<String>, String>,
    group_ids: Vec<String>,
}

impl GroupingScheme {
    /// One group per observed tuple of `axes`; ids join the values in axis order.
    pub fn conjunction(ds: &Dataset, axes: &[&str]) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("no axes selected".into()));
        }
        let idx = axes
            .iter()
            .map(|a| ds.axis_index(a))
            .collect::<Result<Vec<_>>>()?;
        let tuples: BTreeSet<Vec<String>> =
            (0..ds.len()).map(|i| ds.attribute_tuple(i, &idx)).collect();
        let mapping: BTreeMap<Vec<String>, String> = tuples
            .into_iter()
            .map(|t| {
                let id = t.join(JOIN);
                (t, id)
            })
            .collect();
        let group_ids = mapping.values().cloned().collect();
        Ok(Self {
            name: axes.join("x"),
            axes: axes.iter().map(|s| s.to_string()).collect(),
            mapping,
            group_ids,
        })
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.group_ids.iter().any(|g| g == id)
    }

    pub fn group_of(&self, tuple: &[String]) -> Option<&str> {
        self.mapping.get(tuple).map(String::as_str)
    }

    /// Compose with `merge_map` (fine id -> coarse id). Coarse ids keep the
    /// order of their first fine member.
    pub fn regroup(&self, name: &str, merge_map: &BTreeMap<String, String>) -> Result<Self> {
        for id in &self.group_ids {
            if !merge_map.contains_key(id) {
                return Err(Error::UnknownGroup(format!(
                    "merge map does not cover group `{id}`"
                )));
            }
        }
        let mapping = self
            .mapping
            .iter()
            .map(|(t, id)| (t.clone(), merge_map[id].clone()))
            .collect();
        let mut group_ids: Vec<String> = Vec::new();
        for id in &self.group_ids {
            let coarse = &merge_map[id];
            if !group_ids.contains(coarse) {
                group_ids.push(coarse.clone());
            }
        }
        Ok(Self {
            name: name.to_string(),
            axes: self.axes.clone(),
            mapping,
            group_ids,
        })
    }

    /// Like [`regroup`](Self::regroup) but ids absent from `merge_map` map to themselves.
    pub fn merge(&self, name: &str, partial: &BTreeMap<String, String>) -> Result<Self> {
        for k in partial.keys() {
            if !self.contains(k) {
                return Err(Error::UnknownGroup(k.clone()));
            }
        }
        let full = self
            .group_ids
            .iter()
            .map(|id| (id.clone(), partial.get(id).unwrap_or(id).clone()))
            .collect();
        self.regroup(name, &full)
    }

    /// True when every fine tuple maps into a single id of `self`.
    pub fn is_coarsening_of(&self, fine: &GroupingScheme) -> bool {
        if self.axes != fine.axes {
            return false;
        }
        let mut image: BTreeMap<&str, &str> = BTreeMap::new();
        for (t, fine_id) in &fine.mapping {
            let Some(coarse) = self.mapping.get(t) else {
                return false;
            };
            if let Some(prev) = image.insert(fine_id.as_str(), coarse.as_str()) {
                if prev != coarse {
                    return false;
                }
            }
        }
        true
    }

    /// Group of every row. Rows whose tuple is not mapped are an error.
    pub fn assign(&self, ds: &Dataset) -> Result<GroupLabels> {
        let idx = self
            .axes
            .iter()
            .map(|a| ds.axis_index(a))
            .collect::<Result<Vec<_>>>()?;
        let pos: BTreeMap<&str, usize> = self
            .group_ids
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let of_row = (0..ds.len())
            .map(|i| {
                let t = ds.attribute_tuple(i, &idx);
                self.mapping
                    .get(&t)
                    .map(|id| pos[id.as_str()])
                    .ok_or_else(|| Error::UnknownGroup(t.join(JOIN)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupLabels {
            ids: self.group_ids.clone(),
            of_row,
        })
    }
}

/// Group membership of each row of some dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabels {
    ids: Vec<String>,
    of_row: Vec<usize>,
}

impl GroupLabels {
    pub fn new(ids: Vec<String>, of_row: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = of_row.iter().find(|&&g| g >= ids.len()) {
            return Err(Error::InvalidArgument(format!("group index {bad} out of range")));
        }
        let unique: BTreeSet<&String> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(Error::InvalidArgument("duplicate group ids".into()));
        }
        Ok(Self { ids, of_row })
    }

    /// Build from one id per row; ids are ordered by first appearance.
    pub fn from_row_ids<S: AsRef<str>>(rows: &[S]) -> Self {
        let mut ids: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let of_row = rows
            .iter()
            .map(|r| {
                *index.entry(r.as_ref().to_string()).or_insert_with(|| {
                    ids.push(r.as_ref().to_string());
                    ids.len() - 1
                })
            })
            .collect();
        Self { ids, of_row }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.of_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.of_row.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn index_of_row(&self, row: usize) -> usize {
        self.of_row[row]
    }

    pub fn indices(&self) -> &[usize] {
        &self.of_row
    }

    pub fn id_of_row(&self, row: usize) -> &str {
        &self.ids[self.of_row[row]]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|g| g == id)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.of_row[i] == group).collect()
    }

    pub fn members_of(&self, id: &str) -> Vec<usize> {
        self.position(id).map(|g| self.members(g)).unwrap_or_default()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.ids.len()];
        for &g in &self.of_row {
            c[g] += 1;
        }
        c
    }

    /// Labels of the rows at `indices`; the id list is kept.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            ids: self.ids.clone(),
            of_row: indices.iter().map(|&i| self.of_row[i]).collect(),
        }
    }

    /// Drop ids that no row uses, keeping the order of the rest.
    pub fn compact(&self) -> Self {
        let used: BTreeSet<usize> = self.of_row.iter().copied().collect();
        let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        Self {
            ids: used.iter().map(|&g| self.ids[g].clone()).collect(),
            of_row: self.of_row.iter().map(|g| remap[g]).collect(),
        }
    }
}

/// Minimum size and label counts a group needs to be kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupFilter {
    pub min_count: usize,
    pub min_pos: usize,
    pub min_neg: usize,
}

impl Default for GroupFilter {
    fn default() -> Self {
        Self {
            min_count: 300,
            min_pos: 30,
            min_neg: 30,
        }
    }
}

impl GroupFilter {
    pub const NONE: GroupFilter = GroupFilter {
        min_count: 0,
        min_pos: 0,
        min_neg: 0,
    };
}

/// Remove rows of groups failing any threshold; returns the kept rows and the
/// dropped group ids.
pub fn filter_groups(
    ds: &Dataset,
    scheme: &GroupingScheme,
    filter: &GroupFilter,
) -> Result<(Dataset, Vec<String>)> {
    let labels = scheme.assign(ds)?;
    let mut count = vec![0usize; labels.n_groups()];
    let mut pos = vec![0usize; labels.n_groups()];
    for (i, &y) in ds.labels().iter().enumerate() {
        let g = labels.index_of_row(i);
        count[g] += 1;
        pos[g] += y as usize;
    }
    let keep_group: Vec<bool> = (0..labels.n_groups())
        .map(|g| {
            count[g] >= filter.min_count
                && pos[g] >= filter.min_pos
                && count[g] - pos[g] >= filter.min_neg
        })
        .collect();
    let dropped = labels
        .ids()
        .iter()
        .zip(&keep_group)
        .filter(|(_, &k)| !k)
        .map(|(id, _)| id.clone())
        .collect();
    let rows: Vec<usize> = (0..ds.len())
        .filter(|&i| keep_group[labels.index_of_row(i)])
        .collect();
    if rows.is_empty() {
        return Err(Error::Validation("group filter removed every row".into()));
    }
    Ok((ds.select(&rows), dropped))
}

/// How rows of the residual group are treated at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OtherStrategy {
    Separate,
    Redistribute,
    Ignore,
}

impl OtherStrategy {
    pub const ALL: [OtherStrategy; 3] = [
        OtherStrategy::Separate,
        OtherStrategy::Redistribute,
        OtherStrategy::Ignore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OtherStrategy::Separate => "separate",
            OtherStrategy::Redistribute => "redistribute",
            OtherStrategy::Ignore => "ignore",
        }
    }
}

/// Training view produced by [`apply_other_strategy`].
#[derive(Debug, Clone)]
pub struct OtherView {
    pub train: Dataset,
    pub train_groups: GroupLabels,
    /// Rows of the input dataset whose original group is the residual group.
    pub other_rows: Vec<usize>,
    /// Group given to each entry of `other_rows` under Redistribute.
    pub reassigned: Vec<String>,
}

pub fn apply_other_strategy(
    ds: &Dataset,
    groups: &GroupLabels,
    other_id: &str,
    strategy: OtherStrategy,
) -> Result<OtherView> {
    let other = groups
        .position(other_id)
        .ok_or_else(|| Error::UnknownGroup(other_id.to_string()))?;
    let other_rows = groups.members(other);
    match strategy {
        OtherStrategy::Separate => Ok(OtherView {
            train: ds.clone(),
            train_groups: groups.clone(),
            other_rows,
            reassigned: Vec::new(),
        }),
        OtherStrategy::Redistribute => {
            let reassigned = redistribute(ds, &other_rows, ds, groups, other_id)?;
            let ids: Vec<String> = groups.ids().iter().filter(|g| *g != other_id).cloned().collect();
            let mut row_ids: Vec<&str> = (0..ds.len()).map(|i| groups.id_of_row(i)).collect();
            for (&r, g) in other_rows.iter().zip(&reassigned) {
                row_ids[r] = g;
            }
            let of_row = row_ids
                .iter()
                .map(|id| ids.iter().position(|g| g == id).expect("non-Other id"))
                .collect();
            Ok(OtherView {
                train: ds.clone(),
                train_groups: GroupLabels::new(ids, of_row)?,
                other_rows,
                reassigned,
            })
        }
        OtherStrategy::Ignore => {
            let keep: Vec<usize> = (0..ds.len()).filter(|&i| groups.index_of_row(i) != other).collect();
            let ids: Vec<String> = groups.ids().iter().filter(|g| *g != other_id).cloned().collect();
            let of_row = keep
                .iter()
                .map(|&i| {
                    let g = groups.index_of_row(i);
                    if g > other { g - 1 } else { g }
                })
                .collect();
            Ok(OtherView {
                train: ds.select(&keep),
                train_groups: GroupLabels::new(ids, of_row)?,
                other_rows,
                reassigned: Vec::new(),
            })
        }
    }
}

/// Group id of each `rows` entry of `query` after nearest-neighbour
/// reassignment against the non-residual rows of `candidates`.
pub fn redistribute(
    query: &Dataset,
    rows: &[usize],
    candidates: &Dataset,
    candidate_groups: &GroupLabels,
    other_id: &str,
) -> Result<Vec<String>> {
    let keep: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidate_groups.id_of_row(i) != other_id)
        .collect();
    if keep.is_empty() {
        return Err(Error::Validation(
            "redistribution needs at least one row outside the residual group".into(),
        ));
    }
    let cand_x = candidates.features().select_rows(&keep);
    Ok(rows
        .iter()
        .map(|&r| {
            let j = nearest_index(query.features().row(r), &cand_x);
            candidate_groups.id_of_row(keep[j]).to_string()
        })
        .collect())
}

/// Group of the candidate row closest to `row` in Euclidean distance; ties go
/// to the lowest candidate index.
pub fn nearest_neighbor_reassign(
    row: &[f64],
    candidates: &Dataset,
    candidate_groups: &GroupLabels,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate rows".into()));
    }
    if row.len() != candidates.dim() {
        return Err(Error::InvalidArgument(format!(
            "row has {} features, candidates have {}",
            row.len(),
            candidates.dim()
        )));
    }
    let j = nearest_index(row, candidates.features());
    Ok(candidate_groups.id_of_row(j).to_string())
}

fn nearest_index(row: &[f64], candidates: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for j in 0..candidates.rows() {
        let mut d = 0.0;
        for (a, b) in row.iter().zip(candidates.row(j)) {
            let t = a - b;
            d += t * t;
            if d >= best_d {
                break;
            }
        }
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Axis, Matrix};

    fn dataset(rows: &[(&str, &str, &str, u8)], x: Option<Vec<Vec<f64>>>) -> Dataset {
        let axes = vec![
            Axis::new("race", vec!["Asian".into(), "Black".into(), "NHPI".into(), "Other".into(), "White".into()]),
            Axis::new("sex", vec!["Female".into(), "Male".into()]),
            Axis::new("dis", vec!["no".into(), "yes".into()]),
        ];
        let attrs = rows
            .iter()
            .map(|(r, s, d, _)| {
                vec![
                    axes[0].category_index(r).unwrap(),
                    axes[1].category_index(s).unwrap(),
                    axes[2].category_index(d).unwrap(),
                ]
            })
            .collect();
        let n = rows.len();
        let x = x.unwrap_or_else(|| (0..n).map(|i| vec![i as f64]).collect());
        let d = x[0].len();
        Dataset::new(
            Matrix::from_rows(&x).unwrap(),
            (0..d).map(|j| format!("x{j}")).collect(),
            rows.iter().map(|r| r.3).collect(),
            axes,
            attrs,
        )
        .unwrap()
    }

    fn all_race_sex_dis() -> Dataset {
        let mut rows = Vec::new();
        for r in ["Black", "White"] {
            for s in ["Female", "Male"] {
                for d in ["no", "yes"] {
                    rows.push((r, s, d, 1));
                }
            }
        }
        dataset(&rows, None)
    }

    #[test]
    fn conjunction_counts() {
        let ds = all_race_sex_dis();
        let rs = GroupingScheme::conjunction(&ds, &["race", "sex"]).unwrap();
        assert_eq!(
            rs.group_ids(),
            ["Black-Female", "Black-Male", "White-Female", "White-Male"]
        );
        let single = GroupingScheme::conjunction(&ds, &["race"]).unwrap();
        assert_eq!(single.group_ids(), ["Black", "White"]);
        let three = GroupingScheme::conjunction(&ds, &["race", "sex", "dis"]).unwrap();
        assert_eq!(three.group_ids().len(), 8);
        assert!(matches!(
            GroupingScheme::conjunction(&ds, &["age"]),
            Err(Error::UnknownAxis(_))
        ));
    }

    #[test]
    fn regroup_composes_and_checks_coverage() {
        let ds = dataset(
            &[("Asian", "Female", "no", 1), ("NHPI", "Male", "no", 0), ("White", "Male", "no", 1)],
            None,
        );
        let fine = GroupingScheme::conjunction(&ds, &["race"]).unwrap();
        let identity: BTreeMap<String, String> =
            fine.group_ids().iter().map(|g| (g.clone(), g.clone())).collect();
        let same = fine.regroup("race", &identity).unwrap();
        assert_eq!(same.group_ids(), fine.group_ids());
        assert_eq!(same.assign(&ds).unwrap(), fine.assign(&ds).unwrap());

        let mut api = identity.clone();
        api.insert("Asian".into(), "API".into());
        api.insert("NHPI".into(), "API".into());
        let coarse = fine.regroup("1 group", &api).unwrap();
        assert_eq!(coarse.group_ids(), ["API", "White"]);
        assert!(coarse.is_coarsening_of(&fine));
        assert_eq!(coarse.assign(&ds).unwrap().id_of_row(1), "API");

        let mut partial = api.clone();
        partial.remove("White");
        assert!(fine.regroup("bad", &partial).is_err());
        assert_eq!(fine.merge("m", &partial).unwrap(), coarse.clone().renamed("m"));
    }

    impl GroupingScheme {
        fn renamed(mut self, name: &str) -> Self {
            self.name = name.into();
            self
        }
    }

    #[test]
    fn filter_thresholds() {
        let mut rows = Vec::new();
        // Asian: 299 rows, balanced.  White: 500 rows, 29 positives.  Black: 400 rows, 100 positives.
        for i in 0..299 {
            rows.push(("Asian", "Female", "no", (i % 2) as u8));
        }
        for i in 0..500 {
            rows.push(("White", "Female", "no", u8::from(i < 29)));
        }
        for i in 0..400 {
            rows.push(("Black", "Male", "no", u8::from(i < 100)));
        }
        let ds = dataset(&rows, None);
        let scheme = GroupingScheme::conjunction(&ds, &["race"]).unwrap();
        let (kept, dropped) = filter_groups(&ds, &scheme, &GroupFilter::default()).unwrap();
        assert_eq!(dropped, ["Asian", "White"]);
        assert_eq!(kept.len(), 400);
        let (again, dropped2) = filter_groups(&kept, &scheme, &GroupFilter::default()).unwrap();
        assert_eq!(again, kept);
        assert!(dropped2.is_empty() || dropped2 == ["Asian", "White"]);
        let (all, none) = filter_groups(&ds, &scheme, &GroupFilter::NONE).unwrap();
        assert_eq!((all.len(), none.len()), (ds.len(), 0));
        let strict = GroupFilter { min_count: 10_000, ..GroupFilter::default() };
        assert!(filter_groups(&ds, &scheme, &strict).is_err());
    }

    #[test]
    fn nearest_neighbor_rules() {
        let ds = dataset(
            &[("White", "Male", "no", 1), ("Black", "Male", "no", 1)],
            Some(vec![vec![0.0, 0.1], vec![5.0, 5.0]]),
        );
        let g = GroupLabels::from_row_ids(&["A", "B"]);
        assert_eq!(nearest_neighbor_reassign(&[0.0, 0.0], &ds, &g).unwrap(), "A");

        let x: Vec<Vec<f64>> = (0..8).map(|i| if i == 3 || i == 7 { vec![1.0, 0.0] } else { vec![9.0, 9.0] }).collect();
        let rows: Vec<_> = (0..8).map(|_| ("White", "Male", "no", 1)).collect();
        let ds = dataset(&rows, Some(x));
        let ids: Vec<&str> = (0..8).map(|i| match i { 3 => "B", 7 => "A", _ => "C" }).collect();
        let g = GroupLabels::from_row_ids(&ids);
        assert_eq!(nearest_neighbor_reassign(&[0.0, 0.0], &ds, &g).unwrap(), "B");
    }

    #[test]
    fn other_strategies() {
        let rows = [
            ("White", "Male", "no", 1),
            ("Other", "Male", "no", 0),
            ("Black", "Male", "no", 1),
            ("Other", "Female", "no", 1),
            ("White", "Female", "no", 0),
        ];
        let x = vec![vec![0.0], vec![0.2], vec![10.0], vec![9.0], vec![1.0]];
        let ds = dataset(&rows, Some(x));
        let scheme = GroupingScheme::conjunction(&ds, &["race"]).unwrap();
        let groups = scheme.assign(&ds).unwrap();

        let sep = apply_other_strategy(&ds, &groups, "Other", OtherStrategy::Separate).unwrap();
        assert!(sep.train_groups.ids().contains(&"Other".to_string()));
        assert_eq!(sep.train_groups, groups);

        let ign = apply_other_strategy(&ds, &groups, "Other", OtherStrategy::Ignore).unwrap();
        assert_eq!(ign.train.len(), 3);
        assert_eq!(ign.other_rows, vec![1, 3]);
        assert!(!ign.train_groups.ids().contains(&"Other".to_string()));
        assert_eq!(ign.train_groups.id_of_row(1), "Black");

        let red = apply_other_strategy(&ds, &groups, "Other", OtherStrategy::Redistribute).unwrap();
        assert_eq!(red.reassigned, ["White", "Black"]);
        assert_eq!(red.train_groups.id_of_row(1), "White");
        assert_eq!(red.train_groups.id_of_row(3), "Black");
        for i in [0, 2, 4] {
            assert_eq!(red.train_groups.id_of_row(i), groups.id_of_row(i));
        }

        assert!(apply_other_strategy(&ds, &groups, "Martian", OtherStrategy::Separate).is_err());
        let only_other = ds.select(&[1, 3]);
        let og = GroupLabels::from_row_ids(&["Other", "Other"]);
        assert!(apply_other_strategy(&only_other, &og, "Other", OtherStrategy::Redistribute).is_err());
    }

    #[test]
    fn labels_helpers() {
        let g = GroupLabels::from_row_ids(&["b", "a", "b", "c"]);
        assert_eq!(g.ids(), ["b", "a", "c"]);
        assert_eq!(g.counts(), vec![2, 1, 1]);
        let s = g.select(&[1, 3]).compact();
        assert_eq!(s.ids(), ["a", "c"]);
        assert_eq!(s.indices(), &[0, 1]);
        assert!(GroupLabels::new(vec!["a".into(), "a".into()], vec![0]).is_err());
    }
}
