use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    Mcmc,
    WhatHat,
}

/// Normalized weights over support sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeightTable {
    entries: BTreeMap<Vec<usize>, f64>,
    source: WeightSource,
}

impl ModelWeightTable {
    /// Normalizes non-negative weights.
    pub fn from_weights(entries: BTreeMap<Vec<usize>, f64>, source: WeightSource) -> Result<Self> {
        if entries.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "model weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = entries.values().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyChain);
        }
        let entries = entries.into_iter().map(|(k, w)| (k, w / total)).collect();
        Ok(Self { entries, source })
    }

    /// Normalizes weights given on the log scale.
    pub fn from_log_weights(
        entries: BTreeMap<Vec<usize>, f64>,
        source: WeightSource,
    ) -> Result<Self> {
        let max = entries.values().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidConfig("no finite log weight".into()));
        }
        Self::from_weights(
            entries
                .into_iter()
                .map(|(k, l)| (k, (l - max).exp()))
                .collect(),
            source,
        )
    }

    pub fn from_counts(counts: &BTreeMap<Vec<usize>, u64>, source: WeightSource) -> Result<Self> {
        Self::from_weights(
            counts.iter().map(|(k, c)| (k.clone(), *c as f64)).collect(),
            source,
        )
    }

    pub fn source(&self) -> WeightSource {
        self.source
    }

    pub fn entries(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, support: &[usize]) -> f64 {
        self.entries.get(support).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// `0.5 * sum_S |w_S - w'_S|` over the union of supports.
    pub fn total_variation(&self, other: &ModelWeightTable) -> f64 {
        let keys: BTreeSet<&Vec<usize>> = self.entries.keys().chain(other.entries.keys()).collect();
        0.5 * keys
            .into_iter()
            .map(|k| (self.get(k) - other.get(k)).abs())
            .sum::<f64>()
    }

    /// Entries sorted by decreasing weight; ties broken by support order.
    pub fn top(&self, k: usize) -> Vec<(Vec<usize>, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(s, w)| (s.clone(), *w)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    /// Marginal distribution of `|S|`.
    pub fn size_distribution(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (s, w) in &self.entries {
            *out.entry(s.len()).or_insert(0.0) += w;
        }
        out
    }

    /// Mass on supports strictly containing `support`.
    pub fn strict_superset_mass(&self, support: &[usize]) -> f64 {
        self.entries
            .iter()
            .filter(|(s, _)| {
                s.len() > support.len() && support.iter().all(|j| s.binary_search(j).is_ok())
            })
            .map(|(_, w)| w)
            .sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["support", "size", "weight"])?;
        for (s, weight) in self.top(self.entries.len()) {
            let label = s
                .iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([label, s.len().to_string(), format!("{weight:.12e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses `"0;3;7"` (empty string for the empty model).
pub fn parse_support(label: &str) -> Result<Vec<usize>> {
    let label = label.trim();
    if label.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = label
        .split([';', ',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad support index {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_and_compares() {
        let mut a = BTreeMap::new();
        a.insert(vec![], 1.0);
        a.insert(vec![0], 3.0);
        let ta = ModelWeightTable::from_weights(a, WeightSource::Mcmc).unwrap();
        assert!((ta.total() - 1.0).abs() < 1e-12);
        assert_eq!(ta.get(&[0]), 0.75);
        let mut b = BTreeMap::new();
        b.insert(vec![1], 1.0);
        let tb = ModelWeightTable::from_weights(b, WeightSource::WhatHat).unwrap();
        assert!((ta.total_variation(&tb) - 1.0).abs() < 1e-15);
        assert_eq!(ta.total_variation(&ta), 0.0);
        assert_eq!(ta.top(1)[0].0, vec![0]);
        assert_eq!(ta.strict_superset_mass(&[]), 0.75);
    }

    #[test]
    fn log_weights_do_not_underflow() {
        let mut a = BTreeMap::new();
        a.insert(vec![0], -2000.0);
        a.insert(vec![1], -2000.0 + 2f64.ln());
        let t = ModelWeightTable::from_log_weights(a, WeightSource::WhatHat).unwrap();
        assert!((t.get(&[1]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn support_labels() {
        assert_eq!(parse_support("3;1;1").unwrap(), vec![1, 3]);
        assert!(parse_support("").unwrap().is_empty());
        assert!(parse_support("a").is_err());
    }
}
