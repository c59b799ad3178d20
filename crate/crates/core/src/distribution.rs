//! Probability assignments over a task's categories.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{name_key, SubScope, Taxonomy};

/// Accepted drift of the probability mass around 1.
pub const SUM_TOLERANCE: f64 = 0.01;
/// Mass band inside which an off-simplex distribution is renormalized.
pub const REPAIR_LOW: f64 = 0.95;
pub const REPAIR_HIGH: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPolicy {
    pub sum_tolerance: f64,
    pub repair_low: f64,
    pub repair_high: f64,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        ValidationPolicy { sum_tolerance: SUM_TOLERANCE, repair_low: REPAIR_LOW, repair_high: REPAIR_HIGH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvalidReason {
    Empty,
    NotFinite { category: String },
    OutOfRange { category: String, value: f64 },
    UnknownCategory { category: String },
    SumOutOfBand { sum: f64 },
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::Empty => write!(f, "empty distribution"),
            InvalidReason::NotFinite { category } => write!(f, "non-finite probability for `{category}`"),
            InvalidReason::OutOfRange { category, value } => {
                write!(f, "probability {value} for `{category}` outside [0, 1]")
            }
            InvalidReason::UnknownCategory { category } => write!(f, "category `{category}` not in scope"),
            InvalidReason::SumOutOfBand { sum } => write!(f, "probabilities sum to {sum}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationVerdict {
    Valid,
    /// In-scope, in-range, and close enough to the simplex to renormalize.
    Repairable { sum: f64 },
    Invalid(InvalidReason),
}

impl ValidationVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidationVerdict::Valid)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("cannot normalize a distribution with zero mass")]
    ZeroMass,
    #[error("cannot normalize: {0}")]
    NotNormalizable(InvalidReason),
    #[error("category `{category}` is not part of the {scope} categories")]
    UnknownCategory { scope: SubScope, category: String },
    #[error("category `{category}` listed twice")]
    Duplicate { category: String },
    #[error("scope mismatch: {left} vs {right}")]
    ScopeMismatch { left: SubScope, right: SubScope },
}

/// Ordered category → probability map tagged with the scope it ranges over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub scope: SubScope,
    pub entries: IndexMap<String, f64>,
}

impl CategoryDistribution {
    pub fn new(scope: SubScope, entries: IndexMap<String, f64>) -> Self {
        CategoryDistribution { scope, entries }
    }

    pub fn from_pairs<S: Into<String>>(scope: SubScope, pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        CategoryDistribution { scope, entries: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn get(&self, category: &str) -> Option<f64> {
        let key = name_key(category);
        self.entries.iter().find(|(k, _)| name_key(k) == key).map(|(_, v)| *v)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.values().copied().collect()
    }

    /// Canonicalizes names against the taxonomy and fills absent categories
    /// with zero, yielding entries in taxonomy order.
    pub fn completed(&self, taxonomy: &Taxonomy) -> Result<Self, DistributionError> {
        let mut resolved: IndexMap<&str, f64> = IndexMap::new();
        for (name, p) in &self.entries {
            let canonical = taxonomy.resolve(self.scope, name).ok_or_else(|| {
                DistributionError::UnknownCategory { scope: self.scope, category: name.clone() }
            })?;
            if resolved.insert(canonical, *p).is_some() {
                return Err(DistributionError::Duplicate { category: canonical.to_string() });
            }
        }
        let entries = taxonomy
            .categories(self.scope)
            .into_iter()
            .map(|c| (c.to_string(), resolved.get(c).copied().unwrap_or(0.0)))
            .collect();
        Ok(CategoryDistribution { scope: self.scope, entries })
    }
}

pub fn validate_distribution(dist: &CategoryDistribution, taxonomy: &Taxonomy) -> ValidationVerdict {
    validate_with(dist, taxonomy, &ValidationPolicy::default())
}

pub fn validate_with(
    dist: &CategoryDistribution,
    taxonomy: &Taxonomy,
    policy: &ValidationPolicy,
) -> ValidationVerdict {
    if dist.entries.is_empty() {
        return ValidationVerdict::Invalid(InvalidReason::Empty);
    }
    for (name, &p) in &dist.entries {
        if taxonomy.resolve(dist.scope, name).is_none() {
            return ValidationVerdict::Invalid(InvalidReason::UnknownCategory { category: name.clone() });
        }
        if !p.is_finite() {
            return ValidationVerdict::Invalid(InvalidReason::NotFinite { category: name.clone() });
        }
        if !(0.0..=1.0).contains(&p) {
            return ValidationVerdict::Invalid(InvalidReason::OutOfRange { category: name.clone(), value: p });
        }
    }
    let sum = dist.sum();
    if (sum - 1.0).abs() <= policy.sum_tolerance {
        ValidationVerdict::Valid
    } else if (policy.repair_low..=policy.repair_high).contains(&sum) {
        ValidationVerdict::Repairable { sum }
    } else {
        ValidationVerdict::Invalid(InvalidReason::SumOutOfBand { sum })
    }
}

/// Divides every probability by the total mass.
pub fn normalize_distribution(dist: &CategoryDistribution) -> Result<CategoryDistribution, DistributionError> {
    for (name, &p) in &dist.entries {
        if !p.is_finite() {
            return Err(DistributionError::NotNormalizable(InvalidReason::NotFinite { category: name.clone() }));
        }
        if p < 0.0 {
            return Err(DistributionError::NotNormalizable(InvalidReason::OutOfRange {
                category: name.clone(),
                value: p,
            }));
        }
    }
    let sum = dist.sum();
    if sum <= 0.0 {
        return Err(DistributionError::ZeroMass);
    }
    let entries = dist.entries.iter().map(|(k, &p)| (k.clone(), p / sum)).collect();
    Ok(CategoryDistribution { scope: dist.scope, entries })
}

/// Ranks in entry order, 1 = largest value, ties share the mean of the ranks they span.
pub fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Rank vector of a distribution in its entry order (taxonomy order once
/// [`CategoryDistribution::completed`] has run).
pub fn ranks_from_distribution(dist: &CategoryDistribution) -> Vec<f64> {
    average_ranks_desc(&dist.probabilities())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vie(p: [f64; 4]) -> CategoryDistribution {
        CategoryDistribution::from_pairs(
            SubScope::Vie,
            ["Vulnerability", "Impact", "Emergency", "Others"].into_iter().zip(p),
        )
    }

    #[test]
    fn verdicts() {
        let t = Taxonomy::default();
        assert_eq!(validate_distribution(&vie([0.40, 0.10, 0.50, 0.0]), &t), ValidationVerdict::Valid);
        let sad = CategoryDistribution::from_pairs(
            SubScope::Emotion,
            [("Sadness", 1.0), ("Anger", 0.0), ("Fear", 0.0), ("Joy", 0.0), ("Optimism", 0.0), ("Trust", 0.0), ("Neutral", 0.0)],
        );
        assert!(validate_distribution(&sad, &t).is_valid());
        match validate_distribution(&vie([0.5, 0.52, 0.0, 0.0]), &t) {
            ValidationVerdict::Repairable { sum } => assert!((sum - 1.02).abs() < 1e-12),
            other => panic!("expected repairable, got {other:?}"),
        }
        assert!(matches!(
            validate_distribution(&vie([0.5, 0.7, 0.0, 0.0]), &t),
            ValidationVerdict::Invalid(InvalidReason::SumOutOfBand { .. })
        ));
        assert!(matches!(
            validate_distribution(&vie([1.2, -0.2, 0.0, 0.0]), &t),
            ValidationVerdict::Invalid(InvalidReason::OutOfRange { .. })
        ));
        let unknown = CategoryDistribution::from_pairs(SubScope::Vie, [("Hazard", 1.0)]);
        assert!(matches!(
            validate_distribution(&unknown, &t),
            ValidationVerdict::Invalid(InvalidReason::UnknownCategory { .. })
        ));
        let empty = CategoryDistribution::new(SubScope::Vie, IndexMap::new());
        assert_eq!(validate_distribution(&empty, &t), ValidationVerdict::Invalid(InvalidReason::Empty));
    }

    #[test]
    fn normalize_examples() {
        let d = CategoryDistribution::from_pairs(SubScope::Vie, [("A", 0.5), ("B", 0.52)]);
        let n = normalize_distribution(&d).unwrap();
        assert!((n.entries["A"] - 0.5 / 1.02).abs() < 1e-12);
        assert!((n.entries["B"] - 0.52 / 1.02).abs() < 1e-12);
        assert!((n.entries["A"] - 0.4902).abs() < 1e-4);

        let one = CategoryDistribution::from_pairs(SubScope::Vie, [("A", 1.0)]);
        assert_eq!(normalize_distribution(&one).unwrap(), one);

        let zero = CategoryDistribution::from_pairs(SubScope::Vie, [("A", 0.0), ("B", 0.0)]);
        assert_eq!(normalize_distribution(&zero), Err(DistributionError::ZeroMass));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ranks_from_distribution(&vie([0.4, 0.1, 0.5, 0.0])), [2.0, 3.0, 1.0, 4.0]);
        assert_eq!(ranks_from_distribution(&vie([0.25; 4])), [2.5; 4]);
        let d = CategoryDistribution::from_pairs(SubScope::Vie, [("A", 0.8), ("B", 0.1), ("C", 0.1)]);
        assert_eq!(ranks_from_distribution(&d), [1.0, 2.5, 2.5]);
    }

    #[test]
    fn completion_fills_and_orders() {
        let t = Taxonomy::default();
        let d = CategoryDistribution::from_pairs(SubScope::Vie, [("emergency", 0.6), (" Vulnerability", 0.4)]);
        let c = d.completed(&t).unwrap();
        assert_eq!(c.entries.keys().collect::<Vec<_>>(), ["Vulnerability", "Impact", "Emergency", "Others"]);
        assert_eq!(c.probabilities(), [0.4, 0.0, 0.6, 0.0]);

        let dup = CategoryDistribution::from_pairs(SubScope::Vie, [("Impact", 0.5), ("impact", 0.5)]);
        assert!(matches!(dup.completed(&t), Err(DistributionError::Duplicate { .. })));
    }
}
