//! Link-prediction evaluation: tie-averaged filtered ranking, AUC-PR for
//! query-style datasets, and the rank-vs-Z-count diagnostic.

use rayon::prelude::*;

use crate::model::ModelParams;
use crate::store::{Triple, TripleStore};
use crate::zcount::{z_count, ZPathPolicy};
use crate::{Error, Result};

/// Which slot of the triple is being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Head,
    Tail,
}

#[derive(Debug, Clone)]
pub struct RankResult {
    pub triple: Triple,
    pub direction: Direction,
    /// Tie-averaged rank, 1-based; ties contribute half a position each.
    pub rank: f64,
    pub filtered: bool,
}

/// Rank the true answer among all entity replacements of the chosen slot.
/// In the filtered setting, candidates forming a known triple (from any
/// split) other than the query itself are discarded before ranking.
/// rank = 1 + #strictly-better + #ties / 2.
pub fn rank_triple(
    params: &ModelParams,
    store: &TripleStore,
    triple: &Triple,
    direction: Direction,
    filtered: bool,
) -> RankResult {
    let true_id = match direction {
        Direction::Head => triple.head,
        Direction::Tail => triple.tail,
    };
    let true_score = params.score(triple.head, triple.relation, triple.tail);
    let mut better = 0usize;
    let mut ties = 0usize;
    for candidate in 0..store.n_entities() as u32 {
        if candidate == true_id {
            continue;
        }
        let (h, t) = match direction {
            Direction::Head => (candidate, triple.tail),
            Direction::Tail => (triple.head, candidate),
        };
        if filtered && store.known(h, triple.relation, t) {
            continue;
        }
        let s = params.score(h, triple.relation, t);
        if s < true_score {
            better += 1;
        } else if s == true_score {
            ties += 1;
        }
    }
    RankResult {
        triple: *triple,
        direction,
        rank: 1.0 + better as f64 + ties as f64 / 2.0,
        filtered,
    }
}

/// Aggregate ranking metrics over a split; `count` is the number of
/// (triple, direction) queries, two per triple.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub mr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
}

impl EvalReport {
    fn from_ranks(ranks: &[f64]) -> EvalReport {
        let n = ranks.len() as f64;
        EvalReport {
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            mr: ranks.iter().sum::<f64>() / n,
            hits1: ranks.iter().filter(|&&r| r <= 1.0).count() as f64 / n,
            hits3: ranks.iter().filter(|&&r| r <= 3.0).count() as f64 / n,
            hits10: ranks.iter().filter(|&&r| r <= 10.0).count() as f64 / n,
            count: ranks.len(),
        }
    }

    /// Plain-text table in the usual column layout.
    pub fn to_table(&self) -> String {
        format!(
            "{:<10} {:<10} {:<10} {:<10} {:<10}\n{:<10.4} {:<10.1} {:<10.4} {:<10.4} {:<10.4}\n",
            "MRR", "MR", "Hits@1", "Hits@3", "Hits@10", self.mrr, self.mr, self.hits1,
            self.hits3, self.hits10
        )
    }
}

/// Rank every triple of the split in both directions.
pub fn evaluate(
    params: &ModelParams,
    store: &TripleStore,
    split: &[Triple],
    filtered: bool,
) -> EvalReport {
    let ranks: Vec<f64> = split
        .par_iter()
        .flat_map_iter(|t| {
            [
                rank_triple(params, store, t, Direction::Head, filtered).rank,
                rank_triple(params, store, t, Direction::Tail, filtered).rank,
            ]
        })
        .collect();
    EvalReport::from_ranks(&ranks)
}

/// Area under the precision-recall curve for lower-is-better scores.
/// Candidates are swept best (lowest) first; equal scores are processed as
/// one block; the area uses step-wise interpolation
/// sum (R_i - R_{i-1}) * P_i.
pub fn auc_pr(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Data(format!(
            "auc_pr: {} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Data("auc_pr: NaN score".into()));
    }
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::Data("auc_pr: needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut recall_prev = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            tp += labels[order[j]] as usize;
            seen += 1;
            j += 1;
        }
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / total_pos as f64;
        auc += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    Ok(auc)
}

/// Query-style evaluation: each split triple (h, r, ?) is scored against
/// the distinct tail entities of the split, the gold tail is the positive,
/// and all (label, score) pairs are pooled into a single PR sweep.
pub fn auc_pr_pooled(params: &ModelParams, split: &[Triple]) -> Result<f64> {
    if split.is_empty() {
        return Err(Error::Data("auc_pr_pooled: empty split".into()));
    }
    let mut candidates: Vec<u32> = split.iter().map(|t| t.tail).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mut labels = Vec::with_capacity(split.len() * candidates.len());
    let mut scores = Vec::with_capacity(split.len() * candidates.len());
    for query in split {
        for &c in &candidates {
            labels.push(c == query.tail);
            scores.push(params.score(query.head, query.relation, c));
        }
    }
    auc_pr(&labels, &scores)
}

/// One test triple's collapsed rank (best of the two directions) and its
/// Z-count against the train edges.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ZRankRow {
    pub rank: f64,
    pub z: u64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ZRankDiagnostic {
    /// Mean Z-count over triples ranked strictly inside the top 10;
    /// `None` when the bucket is empty.
    pub top_mean: Option<f64>,
    /// Mean Z-count over the remaining triples.
    pub bottom_mean: Option<f64>,
    pub rows: Vec<ZRankRow>,
}

/// Rank every split triple (filtered, both directions, best rank kept) and
/// compare the average Z-count of well-ranked triples against the rest.
pub fn diagnose_zcount_rank(
    params: &ModelParams,
    store: &TripleStore,
    policy: ZPathPolicy,
    split: &[Triple],
) -> ZRankDiagnostic {
    let rows: Vec<ZRankRow> = split
        .par_iter()
        .map(|t| {
            let head = rank_triple(params, store, t, Direction::Head, true).rank;
            let tail = rank_triple(params, store, t, Direction::Tail, true).rank;
            ZRankRow {
                rank: head.min(tail),
                z: z_count(store, t, policy),
            }
        })
        .collect();
    let mean_of = |rows: &[&ZRankRow]| {
        if rows.is_empty() {
            None
        } else {
            Some(rows.iter().map(|r| r.z as f64).sum::<f64>() / rows.len() as f64)
        }
    };
    let top: Vec<&ZRankRow> = rows.iter().filter(|r| r.rank < 10.0).collect();
    let bottom: Vec<&ZRankRow> = rows.iter().filter(|r| r.rank >= 10.0).collect();
    ZRankDiagnostic {
        top_mean: mean_of(&top),
        bottom_mean: mean_of(&bottom),
        rows,
    }
}
