//! Conditioning vectors and intercategorical label interpolation.
//!
//! A conditioning vector assigns a mass in `[0, 1]` to each class, with the
//! masses summing to one. Training uses one-hot vectors; interpolation moves
//! mass from a source class to a target class in steps of size `e`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the unit-sum constraint.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A single broken invariant reported by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TooFewClasses { n: usize },
    OutOfRange { index: usize, value: f64 },
    Sum { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewClasses { n } => write!(f, "need at least 2 classes, got {n}"),
            Violation::OutOfRange { index, value } => write!(f, "element {index} = {value} outside [0, 1]"),
            Violation::Sum { sum } => write!(f, "elements sum to {sum}, not 1"),
        }
    }
}

/// Checks raw values against the conditioning-vector invariants and
/// returns every violation found (empty when valid).
pub fn validate(values: &[f64]) -> Vec<Violation> {
    let mut out = Vec::new();
    if values.len() < 2 {
        out.push(Violation::TooFewClasses { n: values.len() });
    }
    for (index, &value) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            out.push(Violation::OutOfRange { index, value });
        }
    }
    let sum: f64 = values.iter().sum();
    if !((sum - 1.0).abs() <= SUM_TOLERANCE) {
        out.push(Violation::Sum { sum });
    }
    out
}

/// Per-class mass vector on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConditioningVector(Vec<f64>);

impl ConditioningVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let v = validate(&values);
        if v.is_empty() {
            Ok(Self(values))
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Class with the largest mass (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// True when only `anchor` and at most one other class carry mass and
    /// the two add up to one.
    pub fn is_anchored_at(&self, anchor: usize) -> bool {
        if anchor >= self.0.len() {
            return false;
        }
        let others: Vec<usize> = (0..self.0.len()).filter(|&i| i != anchor && self.0[i] != 0.0).collect();
        match others.as_slice() {
            [] => (self.0[anchor] - 1.0).abs() <= SUM_TOLERANCE,
            [i] => (self.0[anchor] + self.0[*i] - 1.0).abs() <= SUM_TOLERANCE,
            _ => false,
        }
    }
}

impl TryFrom<Vec<f64>> for ConditioningVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ConditioningVector> for Vec<f64> {
    fn from(v: ConditioningVector) -> Self {
        v.0
    }
}

/// One-hot vector for `index` among `n` classes.
pub fn one_hot(index: usize, n: usize) -> Result<ConditioningVector> {
    if index >= n {
        return Err(Error::Index { index, n });
    }
    let mut values = vec![0.0; n];
    values[index] = 1.0;
    ConditioningVector::new(values)
}

/// Moves mass `e` from `source` to `target`, leaving every other class untouched.
pub fn transfer_mass(v: &ConditioningVector, source: usize, target: usize, e: f64) -> Result<ConditioningVector> {
    let n = v.len();
    for idx in [source, target] {
        if idx >= n {
            return Err(Error::Index { index: idx, n });
        }
    }
    if source == target {
        return Err(Error::DegenerateTransfer(source));
    }
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::InvalidStepSize(e));
    }
    let available = v.0[source];
    if e > available {
        return Err(Error::InsufficientMass { source_class: source, requested: e, available });
    }
    let mut values = v.0.clone();
    values[source] = (available - e).clamp(0.0, 1.0);
    values[target] = (values[target] + e).clamp(0.0, 1.0);
    ConditioningVector::new(values)
}

/// Source/target pair and the ordered conditioning vectors between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSchedule {
    pub source: usize,
    pub target: usize,
    pub step_size: f64,
    pub steps: Vec<ConditioningVector>,
}

impl InterpolationSchedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Mass carried by the target class at each step.
    pub fn target_mass(&self) -> Vec<f64> {
        self.steps.iter().map(|v| v.get(self.target)).collect()
    }
}

/// Number of transitions needed to move all mass with step `e`.
pub fn transition_count(e: f64) -> usize {
    // Slack absorbs 1/e landing a hair above an integer.
    ((1.0 / e) - 1e-9).ceil().max(1.0) as usize
}

/// Uniform schedule from `source` to `target` with step size `e`.
///
/// Every step except the last moves exactly `e`; the last moves whatever
/// remains, so the schedule always ends on `one_hot(target)` and has
/// `ceil(1/e) + 1` entries.
pub fn build_schedule(source: usize, target: usize, e: f64, n: usize) -> Result<InterpolationSchedule> {
    if !(e > 0.0 && e <= 1.0) {
        return Err(Error::InvalidStepSize(e));
    }
    let t = transition_count(e);
    let mut increments = vec![e; t];
    increments[t - 1] = 1.0 - e * (t - 1) as f64;
    let mut s = schedule_from_increments(source, target, &increments, n)?;
    s.step_size = e;
    Ok(s)
}

/// Schedule with caller-chosen per-step increments.
///
/// The increments must be positive and sum to one (within
/// [`SUM_TOLERANCE`]); the final step is pinned to `one_hot(target)`.
pub fn schedule_from_increments(source: usize, target: usize, increments: &[f64], n: usize) -> Result<InterpolationSchedule> {
    for idx in [source, target] {
        if idx >= n {
            return Err(Error::Index { index: idx, n });
        }
    }
    if source == target {
        return Err(Error::DegenerateTransfer(source));
    }
    if increments.is_empty() {
        return Err(Error::EmptyInput("schedule increments".into()));
    }
    if let Some(&bad) = increments.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::InvalidStepSize(bad));
    }
    let mut steps = vec![one_hot(source, n)?];
    let last = increments.len() - 1;
    for (k, &e) in increments.iter().enumerate() {
        let prev = steps.last().expect("schedule starts non-empty");
        let next = if k == last {
            let remainder = prev.get(source);
            if (remainder - e).abs() > SUM_TOLERANCE {
                return Err(Error::Consistency(format!("increments sum to {} rather than 1", increments.iter().sum::<f64>())));
            }
            one_hot(target, n)?
        } else {
            transfer_mass(prev, source, target, e)?
        };
        steps.push(next);
    }
    Ok(InterpolationSchedule { source, target, step_size: increments[0], steps })
}

/// A class index with its human-readable name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassIndex {
    pub index: usize,
    pub label: String,
}

/// Bijection between class names and dense indices `0..n`.
///
/// Serialises as a JSON object `{label: index}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, usize>", into = "BTreeMap<String, usize>")]
pub struct LabelMap {
    names: Vec<String>,
}

impl LabelMap {
    /// Names in index order.
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(Error::Consistency(format!("duplicate class name {n:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Indices assigned by sorted name order.
    pub fn from_sorted(mut names: Vec<String>) -> Result<Self> {
        names.sort();
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn class(&self, index: usize) -> Result<ClassIndex> {
        let label = self.name(index).ok_or(Error::Index { index, n: self.len() })?.to_owned();
        Ok(ClassIndex { index, label })
    }

    /// Resolves a class given either its name or its decimal index.
    pub fn resolve(&self, key: &str) -> Result<ClassIndex> {
        if let Some(i) = self.index(key) {
            return self.class(i);
        }
        match key.parse::<usize>() {
            Ok(i) => self.class(i),
            Err(_) => Err(Error::Consistency(format!("unknown class {key:?}"))),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassIndex> + '_ {
        self.names.iter().enumerate().map(|(index, label)| ClassIndex { index, label: label.clone() })
    }
}

impl TryFrom<BTreeMap<String, usize>> for LabelMap {
    type Error = Error;

    fn try_from(map: BTreeMap<String, usize>) -> Result<Self> {
        let n = map.len();
        let mut names = vec![None; n];
        for (name, idx) in map {
            if idx >= n {
                return Err(Error::Index { index: idx, n });
            }
            if names[idx].replace(name).is_some() {
                return Err(Error::Consistency(format!("index {idx} assigned twice")));
            }
        }
        Self::new(names.into_iter().map(|n| n.expect("dense indices")).collect())
    }
}

impl From<LabelMap> for BTreeMap<String, usize> {
    fn from(m: LabelMap) -> Self {
        m.names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[f64]) -> ConditioningVector {
        ConditioningVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(0, 6).unwrap().values(), &[1., 0., 0., 0., 0., 0.]);
        assert_eq!(one_hot(5, 6).unwrap().values(), &[0., 0., 0., 0., 0., 1.]);
        assert!(matches!(one_hot(6, 6), Err(Error::Index { index: 6, n: 6 })));
    }

    #[test]
    fn transfer_examples() {
        let r = transfer_mass(&one_hot(0, 6).unwrap(), 0, 5, 0.3).unwrap();
        assert_eq!(r.values(), &[0.7, 0., 0., 0., 0., 0.3]);
        let r = transfer_mass(&cv(&[0.5, 0., 0., 0., 0., 0.5]), 0, 5, 0.5).unwrap();
        assert_eq!(r.values(), &[0., 0., 0., 0., 0., 1.]);
        let err = transfer_mass(&cv(&[0.05, 0., 0., 0., 0., 0.95]), 0, 5, 0.1).unwrap_err();
        assert!(matches!(err, Error::InsufficientMass { .. }));
        assert!(matches!(transfer_mass(&one_hot(1, 3).unwrap(), 1, 1, 0.1), Err(Error::DegenerateTransfer(1))));
    }

    #[test]
    fn schedule_examples() {
        let s = build_schedule(0, 5, 0.1, 6).unwrap();
        assert_eq!(s.len(), 11);
        let expected = [0.7, 0., 0., 0., 0., 0.3];
        assert!(s.steps[3].values().iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(s.steps[10], one_hot(5, 6).unwrap());

        let s = build_schedule(0, 5, 0.5, 6).unwrap();
        let got: Vec<&[f64]> = s.steps.iter().map(|v| v.values()).collect();
        assert_eq!(got, vec![&[1., 0., 0., 0., 0., 0.][..], &[0.5, 0., 0., 0., 0., 0.5], &[0., 0., 0., 0., 0., 1.]]);

        assert!(matches!(build_schedule(2, 2, 0.1, 6), Err(Error::DegenerateTransfer(2))));
    }

    #[test]
    fn non_integral_step_ends_on_target() {
        let s = build_schedule(1, 0, 0.3, 3).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.steps[4], one_hot(0, 3).unwrap());
        assert!((s.steps[3].get(1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn full_step_is_single_transition() {
        let s = build_schedule(0, 1, 1.0, 2).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn rejects_bad_step_sizes() {
        for e in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(build_schedule(0, 1, e, 2), Err(Error::InvalidStepSize(_))));
        }
    }

    #[test]
    fn custom_increments() {
        let s = schedule_from_increments(0, 2, &[0.5, 0.25, 0.25], 3).unwrap();
        assert_eq!(s.target_mass(), vec![0.0, 0.5, 0.75, 1.0]);
        assert!(schedule_from_increments(0, 2, &[0.25, 0.25], 3).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&[0.5, 0.5]).is_empty());
        assert_eq!(validate(&[0.5, 0.6]), vec![Violation::Sum { sum: 1.1 }]);
        assert_eq!(
            validate(&[1.2, -0.2]),
            vec![Violation::OutOfRange { index: 0, value: 1.2 }, Violation::OutOfRange { index: 1, value: -0.2 }]
        );
        assert_eq!(validate(&[1.0]), vec![Violation::TooFewClasses { n: 1 }]);
        assert!(!validate(&[f64::NAN, 1.0]).is_empty());
    }

    #[test]
    fn anchored_vectors() {
        assert!(cv(&[0.3, 0.0, 0.7]).is_anchored_at(0));
        assert!(one_hot(0, 3).unwrap().is_anchored_at(0));
        assert!(!cv(&[0.2, 0.4, 0.4]).is_anchored_at(0));
    }

    #[test]
    fn json_forms() {
        let v = one_hot(1, 3).unwrap();
        assert_eq!(serde_json::to_string(&v).unwrap(), "[0.0,1.0,0.0]");
        assert!(serde_json::from_str::<ConditioningVector>("[0.7,0.7]").is_err());

        let m = LabelMap::from_sorted(vec!["b".into(), "a".into()]).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"a":0,"b":1}"#);
        let back: LabelMap = serde_json::from_str(r#"{"b":1,"a":0}"#).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<LabelMap>(r#"{"a":0,"b":0}"#).is_err());
        assert_eq!(m.resolve("b").unwrap().index, 1);
        assert_eq!(m.resolve("0").unwrap().label, "a");
    }
}
