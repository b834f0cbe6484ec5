//! Gold-versus-predicted counts per subgoal slot, aligned by position.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{to_tsv, EvalRecord};
use crate::grammar::Subgoal;

/// Label for a position one side of the alignment lacks.
pub const NULL_LABEL: &str = "<none>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Object,
    Action,
}

impl Slot {
    fn label(self, g: &Subgoal) -> String {
        match self {
            Slot::Object => g.object.id.to_string(),
            Slot::Action => g.action.name().to_string(),
        }
    }
}

/// Square counts; `counts[i][j]` is gold `labels[i]` predicted as `labels[j]`.
/// The last label is [`NULL_LABEL`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, gold: &str, predicted: &str) -> u64 {
        match (self.index(gold), self.index(predicted)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn row_sum(&self, gold: &str) -> u64 {
        self.index(gold).map_or(0, |i| self.counts[i].iter().sum())
    }

    /// For each gold label with errors, the wrong predictions by
    /// descending count (ties by label).
    pub fn most_confused(&self) -> Vec<(String, Vec<(String, u64)>)> {
        let mut out = Vec::new();
        for (i, gold) in self.labels.iter().enumerate() {
            let mut wrong: Vec<(String, u64)> = self.counts[i]
                .iter()
                .enumerate()
                .filter(|&(j, &n)| j != i && n > 0)
                .map(|(j, &n)| (self.labels[j].clone(), n))
                .collect();
            if wrong.is_empty() {
                continue;
            }
            wrong.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            out.push((gold.clone(), wrong));
        }
        out.sort_by(|a, b| {
            let total = |x: &[(String, u64)]| x.iter().map(|p| p.1).sum::<u64>();
            total(&b.1).cmp(&total(&a.1)).then_with(|| a.0.cmp(&b.0))
        });
        out
    }

    /// Full matrix: a header of predicted labels, one row per gold label.
    pub fn to_tsv(&self) -> String {
        let mut header = vec!["gold\\predicted"];
        header.extend(self.labels.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = self
            .labels
            .iter()
            .zip(&self.counts)
            .map(|(l, row)| std::iter::once(l.clone()).chain(row.iter().map(u64::to_string)).collect())
            .collect();
        to_tsv(&header, &rows)
    }

    /// One line per (gold, predicted) error pair, most frequent first.
    pub fn summary_tsv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .most_confused()
            .into_iter()
            .flat_map(|(g, wrong)| wrong.into_iter().map(move |(p, n)| vec![g.clone(), p, n.to_string()]))
            .collect();
        to_tsv(&["gold", "predicted", "count"], &rows)
    }
}

/// Counts gold against top-1 predicted labels, position by position.
pub fn confusion(records: &[EvalRecord], slot: Slot) -> ConfusionMatrix {
    let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
    let null = || NULL_LABEL.to_string();
    for r in records {
        let gold = &r.gold.steps;
        let empty = Vec::new();
        let pred = r.predicted.first().map_or(&empty, |p| &p.steps);
        for i in 0..gold.len().max(pred.len()) {
            let g = gold.get(i).map_or_else(null, |g| slot.label(g));
            let p = pred.get(i).map_or_else(null, |p| slot.label(p));
            *pairs.entry((g, p)).or_default() += 1;
        }
    }
    let mut labels: Vec<String> = pairs.keys().flat_map(|(g, p)| [g.clone(), p.clone()]).filter(|l| l != NULL_LABEL).collect();
    labels.sort();
    labels.dedup();
    labels.push(null());
    let pos = |l: &str| labels.iter().position(|x| x == l).expect("label collected");
    let mut counts = vec![vec![0; labels.len()]; labels.len()];
    for ((g, p), n) in &pairs {
        counts[pos(g)][pos(p)] += n;
    }
    ConfusionMatrix { labels, counts }
}
