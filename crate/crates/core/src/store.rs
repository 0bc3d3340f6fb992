//! Triple ingestion and the dictionary-encoded, index-backed store.
//!
//! Splits are benchmark-style TSV files: one `head<TAB>relation<TAB>tail`
//! per line. Entities and relations are interned to dense ids in first
//! appearance order (train, then valid, then test). Adjacency indexes are
//! built from the train split only; the known-triple set covers all splits.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

/// A dictionary-encoded fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// (head, relation, tail) as read from disk, before encoding.
pub type RawTriple = (String, String, String);

/// Which split a triple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split '{other}' (expected train, valid or test)"
            ))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Valid => write!(f, "valid"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Read one TSV split file. Lines must have exactly three tab-separated
/// fields; empty lines are skipped; file order is preserved and duplicates
/// are kept (deduplication happens at store build).
pub fn load_split(path: &Path) -> Result<Vec<RawTriple>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let head = fields.next().unwrap_or("");
        let rel = fields.next();
        let tail = fields.next();
        match (rel, tail, fields.next()) {
            (Some(r), Some(t), None) => out.push((head.to_string(), r.to_string(), t.to_string())),
            _ => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: "expected exactly 3 tab-separated fields".to_string(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            line: 0,
            msg: "file contains no triples".to_string(),
        });
    }
    Ok(out)
}

/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone)]
pub struct TripleStore {
    entity_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_names: Vec<String>,
    relation_ids: HashMap<String, RelationId>,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    /// (head, relation) -> sorted tails, train edges only.
    out_index: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    /// (tail, relation) -> sorted heads, train edges only.
    in_index: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    known: HashSet<Triple>,
    warnings: Vec<String>,
    duplicates_dropped: usize,
}

const EMPTY: [EntityId; 0] = [];

impl TripleStore {
    /// Encode three raw splits into a store. Ids follow first-appearance
    /// order over train, then valid, then test; within a triple the head is
    /// interned before the tail. Duplicate triples inside a split are
    /// dropped and counted. Valid/test names absent from train produce
    /// warnings, not errors.
    pub fn build(
        train: &[RawTriple],
        valid: &[RawTriple],
        test: &[RawTriple],
    ) -> Result<TripleStore> {
        let mut store = TripleStore {
            entity_names: Vec::new(),
            entity_ids: HashMap::new(),
            relation_names: Vec::new(),
            relation_ids: HashMap::new(),
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
            out_index: HashMap::new(),
            in_index: HashMap::new(),
            known: HashSet::new(),
            warnings: Vec::new(),
            duplicates_dropped: 0,
        };

        store.encode_split(train, Split::Train, 0, 0)?;
        let train_entities = store.entity_names.len();
        let train_relations = store.relation_names.len();
        store.encode_split(valid, Split::Valid, train_entities, train_relations)?;
        store.encode_split(test, Split::Test, train_entities, train_relations)?;

        for t in &store.train {
            store
                .out_index
                .entry((t.head, t.relation))
                .or_default()
                .push(t.tail);
            store
                .in_index
                .entry((t.tail, t.relation))
                .or_default()
                .push(t.head);
        }
        for list in store.out_index.values_mut() {
            list.sort_unstable();
        }
        for list in store.in_index.values_mut() {
            list.sort_unstable();
        }

        store.known.extend(store.train.iter().copied());
        store.known.extend(store.valid.iter().copied());
        store.known.extend(store.test.iter().copied());
        Ok(store)
    }

    fn encode_split(
        &mut self,
        raw: &[RawTriple],
        split: Split,
        train_entities: usize,
        train_relations: usize,
    ) -> Result<()> {
        let mut seen: HashSet<Triple> = HashSet::with_capacity(raw.len());
        let mut warned: HashSet<(bool, u32)> = HashSet::new();
        let mut encoded = Vec::with_capacity(raw.len());
        for (h, r, t) in raw {
            if h.is_empty() || r.is_empty() || t.is_empty() {
                return Err(Error::Data(format!(
                    "{split} split contains a triple with an empty field"
                )));
            }
            let head = intern(&mut self.entity_names, &mut self.entity_ids, h);
            let tail = intern(&mut self.entity_names, &mut self.entity_ids, t);
            let rel = intern(&mut self.relation_names, &mut self.relation_ids, r);
            if split != Split::Train {
                for (id, name) in [(head, h), (tail, t)] {
                    if id as usize >= train_entities && warned.insert((false, id)) {
                        self.warnings
                            .push(format!("{split}: entity '{name}' does not appear in train"));
                    }
                }
                if rel as usize >= train_relations && warned.insert((true, rel)) {
                    self.warnings
                        .push(format!("{split}: relation '{r}' does not appear in train"));
                }
            }
            let triple = Triple::new(head, rel, tail);
            if seen.insert(triple) {
                encoded.push(triple);
            } else {
                self.duplicates_dropped += 1;
            }
        }
        match split {
            Split::Train => self.train = encoded,
            Split::Valid => self.valid = encoded,
            Split::Test => self.test = encoded,
        }
        Ok(())
    }

    /// Load `train.txt`, `valid.txt`, `test.txt` from a dataset directory.
    pub fn load_dir(dir: &Path) -> Result<TripleStore> {
        Self::load_files(
            &dir.join("train.txt"),
            &dir.join("valid.txt"),
            &dir.join("test.txt"),
        )
    }

    pub fn load_files(train: &Path, valid: &Path, test: &Path) -> Result<TripleStore> {
        let tr = load_split(train)?;
        let va = load_split(valid)?;
        let te = load_split(test)?;
        Self::build(&tr, &va, &te)
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id as usize]
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id as usize]
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, which: Split) -> &[Triple] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Tails e with (h, r, e) in train, sorted ascending.
    pub fn outgoing(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.out_index
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&EMPTY)
    }

    /// Heads e with (e, r, t) in train, sorted ascending.
    pub fn incoming(&self, tail: EntityId, relation: RelationId) -> &[EntityId] {
        self.in_index
            .get(&(tail, relation))
            .map(Vec::as_slice)
            .unwrap_or(&EMPTY)
    }

    /// True iff (h, r, t) occurs in any split.
    pub fn known(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.known.contains(&Triple::new(head, relation, tail))
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Debug dump: `name<TAB>id` per line.
    pub fn write_entity_dict(&self, mut w: impl Write) -> std::io::Result<()> {
        for (id, name) in self.entity_names.iter().enumerate() {
            writeln!(w, "{name}\t{id}")?;
        }
        Ok(())
    }

    pub fn write_relation_dict(&self, mut w: impl Write) -> std::io::Result<()> {
        for (id, name) in self.relation_names.iter().enumerate() {
            writeln!(w, "{name}\t{id}")?;
        }
        Ok(())
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = names.len() as u32;
    names.push(name.to_string());
    ids.insert(name.to_string(), id);
    id
}

/// Resolved paths for one dataset directory, honoring per-file overrides.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

impl DatasetPaths {
    pub fn new(
        dir: &Path,
        train: Option<&Path>,
        valid: Option<&Path>,
        test: Option<&Path>,
    ) -> DatasetPaths {
        DatasetPaths {
            train: train.map(Path::to_path_buf).unwrap_or(dir.join("train.txt")),
            valid: valid.map(Path::to_path_buf).unwrap_or(dir.join("valid.txt")),
            test: test.map(Path::to_path_buf).unwrap_or(dir.join("test.txt")),
        }
    }

    pub fn load(&self) -> Result<TripleStore> {
        TripleStore::load_files(&self.train, &self.valid, &self.test)
    }
}
