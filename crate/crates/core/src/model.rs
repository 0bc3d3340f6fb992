//! Embedding models with separable scores: TransE (L1/L2), DistMult,
//! ComplEx, RotatE.
//!
//! All kinds share one convention: lower score = more plausible, zero on a
//! perfectly fitted triple for the translational models. DistMult and
//! ComplEx are negated inner products so the same loss and ranking code
//! applies unchanged.
//!
//! Storage layout (row-major f64):
//! - TransE / DistMult: entity rows d wide, relation rows d wide
//! - ComplEx: entity and relation rows 2d wide, `[re(0..d), im(0..d)]`
//! - RotatE: entity rows 2d wide as above, relation rows d phase angles
//!   in [-pi, pi); the rotation coefficients e^(i*theta) have unit modulus
//!   by construction.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::store::{EntityId, RelationId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    TransEL1,
    TransEL2,
    DistMult,
    ComplEx,
    RotatE,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "transe-l1" => Ok(ModelKind::TransEL1),
            "transe-l2" => Ok(ModelKind::TransEL2),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "rotate" => Ok(ModelKind::RotatE),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected transe-l1, transe-l2, distmult, complex or rotate)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransEL1 => "transe-l1",
            ModelKind::TransEL2 => "transe-l2",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::RotatE => "rotate",
        }
    }

    pub fn entity_width(self, dim: usize) -> usize {
        match self {
            ModelKind::TransEL1 | ModelKind::TransEL2 | ModelKind::DistMult => dim,
            ModelKind::ComplEx | ModelKind::RotatE => 2 * dim,
        }
    }

    pub fn relation_width(self, dim: usize) -> usize {
        match self {
            ModelKind::TransEL1 | ModelKind::TransEL2 | ModelKind::DistMult => dim,
            ModelKind::ComplEx => 2 * dim,
            ModelKind::RotatE => dim,
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::TransEL1 => 0,
            ModelKind::TransEL2 => 1,
            ModelKind::DistMult => 2,
            ModelKind::ComplEx => 3,
            ModelKind::RotatE => 4,
        }
    }

    fn from_code(code: u8) -> Result<ModelKind> {
        match code {
            0 => Ok(ModelKind::TransEL1),
            1 => Ok(ModelKind::TransEL2),
            2 => Ok(ModelKind::DistMult),
            3 => Ok(ModelKind::ComplEx),
            4 => Ok(ModelKind::RotatE),
            other => Err(Error::Data(format!("bad model code {other} in checkpoint"))),
        }
    }
}

/// Which parameter matrix a gradient entry addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Entity,
    Relation,
}

/// Gradient touching at most the three rows of one scored triple.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    pub entries: Vec<(Slot, u32, Vec<f64>)>,
}

impl SparseGrad {
    pub fn scale(&mut self, c: f64) {
        for (_, _, v) in &mut self.entries {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
    }
}

/// Entity and relation embeddings for one model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dim: usize,
    pub gamma: f64,
    pub seed: u64,
    n_entities: usize,
    n_relations: usize,
    entity: Vec<f64>,
    relation: Vec<f64>,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"KGECKPT1";

impl ModelParams {
    /// Uniform init in [-b, b] with b = (gamma + 2) / d; RotatE phases
    /// uniform in [-pi, pi). Bit-identical for a fixed seed.
    pub fn init(
        kind: ModelKind,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        gamma: f64,
        seed: u64,
    ) -> ModelParams {
        assert!(dim >= 1, "dim must be >= 1");
        let bound = (gamma + 2.0) / dim as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entity: Vec<f64> = (0..n_entities * kind.entity_width(dim))
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let relation: Vec<f64> = match kind {
            ModelKind::RotatE => (0..n_relations * dim)
                .map(|_| rng.random_range(-PI..PI))
                .collect(),
            _ => (0..n_relations * kind.relation_width(dim))
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
        };
        ModelParams {
            kind,
            dim,
            gamma,
            seed,
            n_entities,
            n_relations,
            entity,
            relation,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn entity_row(&self, id: EntityId) -> &[f64] {
        let w = self.kind.entity_width(self.dim);
        &self.entity[id as usize * w..(id as usize + 1) * w]
    }

    pub fn entity_row_mut(&mut self, id: EntityId) -> &mut [f64] {
        let w = self.kind.entity_width(self.dim);
        &mut self.entity[id as usize * w..(id as usize + 1) * w]
    }

    pub fn relation_row(&self, id: RelationId) -> &[f64] {
        let w = self.kind.relation_width(self.dim);
        &self.relation[id as usize * w..(id as usize + 1) * w]
    }

    pub fn relation_row_mut(&mut self, id: RelationId) -> &mut [f64] {
        let w = self.kind.relation_width(self.dim);
        &mut self.relation[id as usize * w..(id as usize + 1) * w]
    }

    /// Score of (h, r, t); lower is more plausible.
    pub fn score(&self, h: EntityId, r: RelationId, t: EntityId) -> f64 {
        let hv = self.entity_row(h);
        let rv = self.relation_row(r);
        let tv = self.entity_row(t);
        let d = self.dim;
        match self.kind {
            ModelKind::TransEL1 => (0..d).map(|k| (hv[k] + rv[k] - tv[k]).abs()).sum(),
            ModelKind::TransEL2 => (0..d)
                .map(|k| {
                    let v = hv[k] + rv[k] - tv[k];
                    v * v
                })
                .sum::<f64>()
                .sqrt(),
            ModelKind::DistMult => -(0..d).map(|k| hv[k] * rv[k] * tv[k]).sum::<f64>(),
            ModelKind::ComplEx => {
                // -Re(<h, r, conj(t)>)
                let mut s = 0.0;
                for k in 0..d {
                    let (a, b) = (hv[k], hv[d + k]);
                    let (c, dd) = (rv[k], rv[d + k]);
                    let (e, f) = (tv[k], tv[d + k]);
                    s += (a * c - b * dd) * e + (a * dd + b * c) * f;
                }
                -s
            }
            ModelKind::RotatE => {
                // L1 norm of complex h * e^(i theta) - t
                let mut s = 0.0;
                for k in 0..d {
                    let (a, b) = (hv[k], hv[d + k]);
                    let (cos, sin) = (rv[k].cos(), rv[k].sin());
                    let re = a * cos - b * sin - tv[k];
                    let im = a * sin + b * cos - tv[d + k];
                    s += (re * re + im * im).sqrt();
                }
                s
            }
        }
    }

    /// Score plus exact partials w.r.t. the three touched rows. L1 terms use
    /// the sign subgradient with sign(0) = 0; the L2 norm and RotatE moduli
    /// return zero gradient at their (non-differentiable) minimum.
    pub fn score_grad(&self, h: EntityId, r: RelationId, t: EntityId) -> (f64, SparseGrad) {
        let hv = self.entity_row(h);
        let rv = self.relation_row(r);
        let tv = self.entity_row(t);
        let d = self.dim;
        let ew = self.kind.entity_width(d);
        let rw = self.kind.relation_width(d);
        let mut gh = vec![0.0; ew];
        let mut gr = vec![0.0; rw];
        let mut gt = vec![0.0; ew];
        let score = match self.kind {
            ModelKind::TransEL1 => {
                let mut s = 0.0;
                for k in 0..d {
                    let v = hv[k] + rv[k] - tv[k];
                    s += v.abs();
                    let sg = sign(v);
                    gh[k] = sg;
                    gr[k] = sg;
                    gt[k] = -sg;
                }
                s
            }
            ModelKind::TransEL2 => {
                let mut sq = 0.0;
                for k in 0..d {
                    let v = hv[k] + rv[k] - tv[k];
                    sq += v * v;
                }
                let norm = sq.sqrt();
                if norm > 0.0 {
                    for k in 0..d {
                        let g = (hv[k] + rv[k] - tv[k]) / norm;
                        gh[k] = g;
                        gr[k] = g;
                        gt[k] = -g;
                    }
                }
                norm
            }
            ModelKind::DistMult => {
                let mut s = 0.0;
                for k in 0..d {
                    s += hv[k] * rv[k] * tv[k];
                    gh[k] = -rv[k] * tv[k];
                    gr[k] = -hv[k] * tv[k];
                    gt[k] = -hv[k] * rv[k];
                }
                -s
            }
            ModelKind::ComplEx => {
                let mut s = 0.0;
                for k in 0..d {
                    let (a, b) = (hv[k], hv[d + k]);
                    let (c, dd) = (rv[k], rv[d + k]);
                    let (e, f) = (tv[k], tv[d + k]);
                    s += (a * c - b * dd) * e + (a * dd + b * c) * f;
                    gh[k] = -(c * e + dd * f);
                    gh[d + k] = -(c * f - dd * e);
                    gr[k] = -(a * e + b * f);
                    gr[d + k] = -(a * f - b * e);
                    gt[k] = -(a * c - b * dd);
                    gt[d + k] = -(a * dd + b * c);
                }
                -s
            }
            ModelKind::RotatE => {
                let mut s = 0.0;
                for k in 0..d {
                    let (a, b) = (hv[k], hv[d + k]);
                    let theta = rv[k];
                    let (cos, sin) = (theta.cos(), theta.sin());
                    let re = a * cos - b * sin - tv[k];
                    let im = a * sin + b * cos - tv[d + k];
                    let m = (re * re + im * im).sqrt();
                    s += m;
                    if m > 0.0 {
                        gh[k] = (re * cos + im * sin) / m;
                        gh[d + k] = (-re * sin + im * cos) / m;
                        gt[k] = -re / m;
                        gt[d + k] = -im / m;
                        // d re / d theta = -a sin - b cos, d im / d theta = a cos - b sin
                        gr[k] = (re * (-a * sin - b * cos) + im * (a * cos - b * sin)) / m;
                    }
                }
                s
            }
        };
        let grad = SparseGrad {
            entries: vec![
                (Slot::Entity, h, gh),
                (Slot::Relation, r, gr),
                (Slot::Entity, t, gt),
            ],
        };
        (score, grad)
    }

    /// Write the checkpoint. Byte layout, little-endian throughout:
    /// 8-byte magic "KGECKPT1", u8 model code, u64 n_entities, u64
    /// n_relations, u64 dim, u64 seed, f64 gamma, then the entity matrix and
    /// the relation matrix row-major as raw f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            w.write_all(CHECKPOINT_MAGIC)?;
            w.write_all(&[self.kind.code()])?;
            w.write_all(&(self.n_entities as u64).to_le_bytes())?;
            w.write_all(&(self.n_relations as u64).to_le_bytes())?;
            w.write_all(&(self.dim as u64).to_le_bytes())?;
            w.write_all(&self.seed.to_le_bytes())?;
            w.write_all(&self.gamma.to_le_bytes())?;
            for x in &self.entity {
                w.write_all(&x.to_le_bytes())?;
            }
            for x in &self.relation {
                w.write_all(&x.to_le_bytes())?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelParams> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, path)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let mut code = [0u8; 1];
        read_exact(&mut r, &mut code, path)?;
        let kind = ModelKind::from_code(code[0])?;
        let n_entities = read_u64(&mut r, path)? as usize;
        let n_relations = read_u64(&mut r, path)? as usize;
        let dim = read_u64(&mut r, path)? as usize;
        let seed = read_u64(&mut r, path)?;
        let gamma = read_f64(&mut r, path)?;
        if dim == 0 {
            return Err(bad("dim must be >= 1"));
        }
        let entity = read_matrix(&mut r, n_entities * kind.entity_width(dim), path)?;
        let relation = read_matrix(&mut r, n_relations * kind.relation_width(dim), path)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(bad("trailing bytes after matrices"));
        }
        Ok(ModelParams {
            kind,
            dim,
            gamma,
            seed,
            n_entities,
            n_relations,
            entity,
            relation,
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::io(path, e))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, path)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, path)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_matrix(r: &mut impl Read, len: usize, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        read_exact(r, &mut buf, path)?;
        let x = f64::from_le_bytes(buf);
        if !x.is_finite() {
            return Err(Error::Data(format!(
                "{}: non-finite parameter in checkpoint",
                path.display()
            )));
        }
        out.push(x);
    }
    Ok(out)
}
