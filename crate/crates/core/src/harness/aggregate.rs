use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ConditionTag;
use super::trial::TrialResult;
use crate::error::{Error, Result};
use crate::online::Method;

/// Mean and sample standard deviation (`n - 1` denominator; 0 when `n == 1`).
pub fn mean_sd(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub method: Method,
    /// `None` for tag-level rows.
    pub condition: Option<usize>,
    pub tag: ConditionTag,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    /// Set when only one trial contributed, so `sd` carries no information.
    pub single_trial: bool,
    /// Per-trial values in seed order.
    pub values: Vec<f64>,
}

impl CellStats {
    fn new(
        method: Method,
        condition: Option<usize>,
        tag: ConditionTag,
        values: Vec<f64>,
    ) -> Result<Self> {
        let (mean, sd) = mean_sd(&values)?;
        Ok(Self {
            method,
            condition,
            tag,
            mean,
            sd,
            n: values.len(),
            single_trial: values.len() == 1,
            values,
        })
    }

    pub fn display(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.sd)
    }
}

/// A `(method, seed)` trial that did not complete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncompleteCell {
    pub method: Method,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    /// One row per `(method, condition)`.
    pub conditions: Vec<CellStats>,
    /// One row per `(method, tag)`: per-trial mean over that tag's conditions.
    pub tags: Vec<CellStats>,
    #[serde(default)]
    pub incomplete: Vec<IncompleteCell>,
}

impl Summary {
    pub fn tag(&self, method: Method, tag: ConditionTag) -> Option<&CellStats> {
        self.tags
            .iter()
            .find(|c| c.method == method && c.tag == tag)
    }

    pub fn condition(&self, method: Method, condition: usize) -> Option<&CellStats> {
        self.conditions
            .iter()
            .find(|c| c.method == method && c.condition == Some(condition))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table: one row per method, a column per condition
    /// (tagged UC/KC), then the tag averages.
    pub fn to_table(&self) -> String {
        let mut methods: Vec<Method> = self.conditions.iter().map(|c| c.method).collect();
        methods.sort();
        methods.dedup();
        let mut conds: Vec<(usize, ConditionTag)> = self
            .conditions
            .iter()
            .map(|c| (c.condition.unwrap_or_default(), c.tag))
            .collect();
        conds.sort_by_key(|&(c, tag)| (tag, c));
        conds.dedup();
        let mut tags: Vec<ConditionTag> = self.tags.iter().map(|c| c.tag).collect();
        tags.sort();
        tags.dedup();

        let mut header = vec!["method".to_string()];
        header.extend(conds.iter().map(|(c, tag)| format!("{tag} c{c}")));
        header.extend(tags.iter().map(|t| format!("{t} mean")));
        let mut rows = vec![header];
        for &m in &methods {
            let mut row = vec![m.to_string()];
            for &(c, _) in &conds {
                row.push(
                    self.condition(m, c)
                        .map(CellStats::display)
                        .unwrap_or_else(|| "-".into()),
                );
            }
            for &t in &tags {
                row.push(
                    self.tag(m, t)
                        .map(CellStats::display)
                        .unwrap_or_else(|| "-".into()),
                );
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(
                    out,
                    "{}",
                    "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
                );
            }
        }
        let n = self.conditions.iter().map(|c| c.n).max().unwrap_or(0);
        if self.conditions.iter().any(|c| c.single_trial) {
            let _ = writeln!(out, "n = 1 trial: SD not informative");
        } else {
            let _ = writeln!(out, "n = {n} trials, mean±SD (n-1)");
        }
        for inc in &self.incomplete {
            let _ = writeln!(
                out,
                "incomplete: {} seed {}: {}",
                inc.method, inc.seed, inc.error
            );
        }
        out
    }
}

/// Groups results by `(method, condition)` and by `(method, tag)`. No
/// results gives an empty summary.
pub fn aggregate(
    results: &[TrialResult],
    offline_conditions: &[usize],
    config_hash: &str,
) -> Result<Summary> {
    let tag_of = |c: usize| {
        if offline_conditions.contains(&c) {
            ConditionTag::Known
        } else {
            ConditionTag::Unknown
        }
    };
    let mut sorted: Vec<&TrialResult> = results.iter().collect();
    sorted.sort_by_key(|r| (r.method, r.seed));

    let mut by_cond: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
    let mut by_tag: BTreeMap<(Method, ConditionTag), Vec<f64>> = BTreeMap::new();
    for r in sorted {
        let mut per_tag: BTreeMap<ConditionTag, Vec<f64>> = BTreeMap::new();
        for (&c, &acc) in &r.per_condition_accuracy {
            by_cond.entry((r.method, c)).or_default().push(acc);
            per_tag.entry(tag_of(c)).or_default().push(acc);
        }
        for (tag, accs) in per_tag {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            by_tag.entry((r.method, tag)).or_default().push(mean);
        }
    }
    let conditions = by_cond
        .into_iter()
        .map(|((m, c), v)| CellStats::new(m, Some(c), tag_of(c), v))
        .collect::<Result<Vec<_>>>()?;
    let tags = by_tag
        .into_iter()
        .map(|((m, t), v)| CellStats::new(m, None, t, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary {
        config_hash: config_hash.to_string(),
        conditions,
        tags,
        incomplete: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: Method, seed: u64, accs: &[(usize, f64)]) -> TrialResult {
        TrialResult {
            method,
            seed,
            per_condition_accuracy: accs.iter().copied().collect(),
            segments: Vec::new(),
            update_count: 0,
            initial_digest: String::new(),
            final_digest: String::new(),
            curve: Vec::new(),
        }
    }

    #[test]
    fn hand_computed_sd() {
        let (m, s) = mean_sd(&[0.9, 1.0]).unwrap();
        assert!((m - 0.95).abs() < 1e-12);
        // sqrt(((0.05)^2 * 2) / 1)
        assert!((s - 0.005f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_sd(&[1.0; 5]).unwrap(), (1.0, 0.0));
        assert_eq!(mean_sd(&[0.4]).unwrap(), (0.4, 0.0));
        assert!(mean_sd(&[]).is_err());
    }

    #[test]
    fn groups_by_tag() {
        let rs = vec![
            result(Method::Proposed, 1, &[(0, 1.0), (2, 0.5), (3, 0.7)]),
            result(Method::Proposed, 2, &[(0, 0.8), (2, 0.7), (3, 0.9)]),
        ];
        let s = aggregate(&rs, &[0, 1], "h").unwrap();
        let uc = s.tag(Method::Proposed, ConditionTag::Unknown).unwrap();
        assert_eq!(uc.values, vec![0.6, 0.8]);
        let kc = s.tag(Method::Proposed, ConditionTag::Known).unwrap();
        assert_eq!(kc.n, 2);
        assert!((kc.mean - 0.9).abs() < 1e-12);
        assert_eq!(
            s.condition(Method::Proposed, 2).unwrap().tag,
            ConditionTag::Unknown
        );
    }

    #[test]
    fn single_trial_flagged_in_table() {
        let s = aggregate(&[result(Method::Baseline, 1, &[(0, 1.0)])], &[0], "h").unwrap();
        assert!(s.conditions[0].single_trial);
        let table = s.to_table();
        assert!(table.contains("1.000±0.000"));
        assert!(table.contains("n = 1"));
    }

    #[test]
    fn empty_gives_empty_summary() {
        let s = aggregate(&[], &[0], "h").unwrap();
        assert!(s.conditions.is_empty() && s.tags.is_empty());
    }
}
