//! The training loop: curriculum-restricted epochs, self-adversarial
//! negative sampling, and sparse Adam updates.
//!
//! Per positive, K negatives are drawn by corrupting head or tail (fair
//! coin). The loss is
//!
//! ```text
//! L = -log sigmoid(gamma - f(h,r,t))
//!     - sum_i p_i * log sigmoid(f(h'_i,r,t'_i) - gamma)
//! ```
//!
//! with p_i the softmax of alpha * (gamma - f_i) over the negatives,
//! treated as constants (no gradient flows through the weights).
//!
//! Each batch member derives its own ChaCha stream from (seed, epoch,
//! position), so results are bit-identical for any worker count.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::TrainConfig;
use crate::curriculum::CurriculumSchedule;
use crate::mix_seed;
use crate::model::{ModelKind, ModelParams, Slot, SparseGrad};
use crate::store::{Triple, TripleStore};
use crate::zcount::ZCountTable;
use crate::{Error, Result};

/// K corruptions of one positive. Each draw flips a fair coin for the slot
/// (head or tail) and replaces it with a uniformly random entity; a draw
/// that reproduces the original entity is redrawn once from the remaining
/// entities. The relation is never corrupted. With `filter_known`, draws
/// colliding with any known triple are retried a bounded number of times.
pub fn sample_negatives(
    store: &TripleStore,
    positive: &Triple,
    k: usize,
    rng: &mut impl Rng,
    filter_known: bool,
) -> Vec<Triple> {
    let n = store.n_entities() as u32;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut candidate = corrupt(positive, n, rng);
        if filter_known {
            let mut tries = 0;
            while store.known(candidate.head, candidate.relation, candidate.tail) && tries < 100 {
                candidate = corrupt(positive, n, rng);
                tries += 1;
            }
        }
        out.push(candidate);
    }
    out
}

fn corrupt(positive: &Triple, n_entities: u32, rng: &mut impl Rng) -> Triple {
    let corrupt_head = rng.random_bool(0.5);
    let original = if corrupt_head {
        positive.head
    } else {
        positive.tail
    };
    let mut replacement = rng.random_range(0..n_entities);
    if replacement == original && n_entities > 1 {
        // one redraw, from the other entities so it cannot collide again
        let shifted = rng.random_range(0..n_entities - 1);
        replacement = if shifted >= original { shifted + 1 } else { shifted };
    }
    if corrupt_head {
        Triple::new(replacement, positive.relation, positive.tail)
    } else {
        Triple::new(positive.head, positive.relation, replacement)
    }
}

/// Softmax of alpha * (gamma - f_i) over the negatives, computed with
/// max-subtraction. Sums to 1.
pub fn self_adversarial_weights(neg_scores: &[f64], alpha: f64, gamma: f64) -> Vec<f64> {
    let logits: Vec<f64> = neg_scores.iter().map(|f| alpha * (gamma - f)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Numerically stable log(sigmoid(x)) = -softplus(-x).
fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The self-adversarial loss of one positive against its negatives.
pub fn loss(pos_score: f64, neg_scores: &[f64], alpha: f64, gamma: f64) -> f64 {
    let weights = self_adversarial_weights(neg_scores, alpha, gamma);
    let mut l = -log_sigmoid(gamma - pos_score);
    for (f, w) in neg_scores.iter().zip(&weights) {
        l -= w * log_sigmoid(f - gamma);
    }
    l
}

/// Loss plus its gradient w.r.t. every touched embedding row, with the
/// self-adversarial weights frozen. Entries are merged per row and sorted
/// by (slot, row) so downstream accumulation order is deterministic.
pub fn loss_with_grad(
    params: &ModelParams,
    positive: &Triple,
    negatives: &[Triple],
    alpha: f64,
    gamma: f64,
) -> (f64, SparseGrad) {
    let (pos_score, pos_grad) = params.score_grad(positive.head, positive.relation, positive.tail);
    let neg: Vec<(f64, SparseGrad)> = negatives
        .iter()
        .map(|n| params.score_grad(n.head, n.relation, n.tail))
        .collect();
    let neg_scores: Vec<f64> = neg.iter().map(|(s, _)| *s).collect();
    let weights = self_adversarial_weights(&neg_scores, alpha, gamma);

    let mut total = -log_sigmoid(gamma - pos_score);
    let mut acc: HashMap<(Slot, u32), Vec<f64>> = HashMap::new();
    let mut add = |grad: &SparseGrad, c: f64| {
        for (slot, row, values) in &grad.entries {
            let entry = acc
                .entry((*slot, *row))
                .or_insert_with(|| vec![0.0; values.len()]);
            for (a, v) in entry.iter_mut().zip(values) {
                *a += c * v;
            }
        }
    };
    // dL/d f_pos = sigmoid(f_pos - gamma)
    add(&pos_grad, sigmoid(pos_score - gamma));
    for ((f, grad), w) in neg.iter().map(|(s, g)| (*s, g)).zip(&weights) {
        total -= w * log_sigmoid(f - gamma);
        // dL/d f_i = -w_i * sigmoid(gamma - f_i)
        add(grad, -w * sigmoid(gamma - f));
    }

    let mut entries: Vec<(Slot, u32, Vec<f64>)> = acc
        .into_iter()
        .map(|((slot, row), values)| (slot, row, values))
        .collect();
    entries.sort_by_key(|(slot, row, _)| (*slot, *row));
    (total, SparseGrad { entries })
}

/// One epoch's record: availability, mean loss over trained positives,
/// wall-clock seconds, and how many positives were visited.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochLog {
    pub epoch: u32,
    pub lambda: f64,
    pub mean_loss: f64,
    pub seconds: f64,
    pub triples: usize,
}

pub struct TrainOutput {
    pub params: ModelParams,
    pub epochs: Vec<EpochLog>,
}

struct AdamState {
    m_entity: Vec<f64>,
    v_entity: Vec<f64>,
    m_relation: Vec<f64>,
    v_relation: Vec<f64>,
    step: u64,
}

impl AdamState {
    fn new(entity_len: usize, relation_len: usize) -> AdamState {
        AdamState {
            m_entity: vec![0.0; entity_len],
            v_entity: vec![0.0; entity_len],
            m_relation: vec![0.0; relation_len],
            v_relation: vec![0.0; relation_len],
            step: 0,
        }
    }

    /// One lazy step over the touched rows only. Row updates are mutually
    /// independent, so iteration order does not affect the result.
    fn apply(
        &mut self,
        params: &mut ModelParams,
        grads: &HashMap<(Slot, u32), Vec<f64>>,
        cfg: &TrainConfig,
    ) {
        self.step += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.step as i32);
        for ((slot, row), g) in grads {
            let width = g.len();
            let offset = *row as usize * width;
            let (p, m, v) = match slot {
                Slot::Entity => (
                    params.entity_row_mut(*row),
                    &mut self.m_entity[offset..offset + width],
                    &mut self.v_entity[offset..offset + width],
                ),
                Slot::Relation => (
                    params.relation_row_mut(*row),
                    &mut self.m_relation[offset..offset + width],
                    &mut self.v_relation[offset..offset + width],
                ),
            };
            for k in 0..width {
                m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
                v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

/// Run the curriculum-scheduled loop: sort by difficulty, then per epoch
/// take the pacing prefix, shuffle it, and apply one Adam step per
/// mini-batch. Deterministic given the seed.
pub fn train(
    store: &TripleStore,
    table: &ZCountTable,
    kind: ModelKind,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if table.len() != store.train().len() {
        return Err(Error::Data(format!(
            "z-count table has {} entries but the train split has {} triples",
            table.len(),
            store.train().len()
        )));
    }
    let pacing = cfg.pacing.resolve(table)?;
    let schedule = CurriculumSchedule::new(table, pacing, cfg.seed);
    let mut params = ModelParams::init(
        kind,
        store.n_entities(),
        store.n_relations(),
        cfg.dim,
        cfg.gamma,
        cfg.seed,
    );
    let mut adam = AdamState::new(
        store.n_entities() * kind.entity_width(cfg.dim),
        store.n_relations() * kind.relation_width(cfg.dim),
    );
    let mut epochs = Vec::with_capacity(cfg.max_epochs as usize);

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let lambda = schedule.pacing.lambda(epoch);
        let mut order: Vec<usize> = schedule.available_prefix(epoch).to_vec();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5348_5546 ^ epoch as u64));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let base = batch_no * cfg.batch_size;
            let contributions: Vec<(f64, SparseGrad)> = chunk
                .par_iter()
                .enumerate()
                .map(|(j, &idx)| {
                    let positive = store.train()[idx];
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                        mix_seed(cfg.seed, 0x4e45_4753 ^ epoch as u64),
                        (base + j) as u64,
                    ));
                    let negatives = sample_negatives(
                        store,
                        &positive,
                        cfg.negatives,
                        &mut rng,
                        cfg.filter_negatives,
                    );
                    loss_with_grad(&params, &positive, &negatives, cfg.alpha, cfg.gamma)
                })
                .collect();

            let mut batch_grad: HashMap<(Slot, u32), Vec<f64>> = HashMap::new();
            for (l, grad) in contributions {
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_no,
                    });
                }
                loss_sum += l;
                for (slot, row, values) in grad.entries {
                    match batch_grad.entry((slot, row)) {
                        std::collections::hash_map::Entry::Occupied(mut e) => {
                            for (a, v) in e.get_mut().iter_mut().zip(&values) {
                                *a += v;
                            }
                        }
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(values);
                        }
                    }
                }
            }
            adam.apply(&mut params, &batch_grad, cfg);
            if kind == ModelKind::RotatE {
                for (slot, row) in batch_grad.keys() {
                    if *slot == Slot::Relation {
                        wrap_phases(params.relation_row_mut(*row));
                    }
                }
            }
        }

        epochs.push(EpochLog {
            epoch,
            lambda,
            mean_loss: loss_sum / order.len().max(1) as f64,
            seconds: started.elapsed().as_secs_f64(),
            triples: order.len(),
        });
    }

    Ok(TrainOutput { params, epochs })
}

/// Keep RotatE phases in [-pi, pi); scores are 2*pi periodic so this only
/// normalizes the stored representation.
fn wrap_phases(row: &mut [f64]) {
    use std::f64::consts::PI;
    for theta in row {
        *theta -= 2.0 * PI * ((*theta + PI) / (2.0 * PI)).floor();
    }
}
