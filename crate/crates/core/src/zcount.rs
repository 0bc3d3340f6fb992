//! Z-count difficulty of training triples.
//!
//! A Z-path supporting (h, r, t) is a pair of intermediate entities (e1, e2)
//! with the three train edges (h,r,e1), (e2,r,e1), (e2,r,t), all under the
//! same relation. The Z-count is the number of such pairs. Counts only ever
//! consult the train edge set.
//!
//! [`z_count`] runs off the store's adjacency indexes;
//! [`z_count_oracle`] re-derives the same number from the definition by
//! scanning all entity pairs, and exists to cross-check the fast path.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::store::{Triple, TripleStore};
use crate::{Error, Result};

/// Which candidate pairs count as Z-paths.
///
/// `exclude_query_edge` (default true) skips any pair whose path reuses the
/// queried edge (h,r,t) itself; without it every train triple trivially
/// supports itself through (e1=t, e2=h) and no count can be zero.
/// `require_distinct_intermediates` (default false) additionally demands
/// e1, e2 to be distinct from each other and from {h, t}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZPathPolicy {
    pub exclude_query_edge: bool,
    pub require_distinct_intermediates: bool,
}

impl Default for ZPathPolicy {
    fn default() -> Self {
        ZPathPolicy {
            exclude_query_edge: true,
            require_distinct_intermediates: false,
        }
    }
}

/// Z-count of one triple against the store's train edges.
///
/// Evaluates sum over e1 in out(h,r) of |in(e1,r) ∩ in(t,r)| with the
/// policy's exclusions applied to (e1, e2).
pub fn z_count(store: &TripleStore, triple: &Triple, policy: ZPathPolicy) -> u64 {
    let (h, r, t) = (triple.head, triple.relation, triple.tail);
    let in_t = store.incoming(t, r);
    if in_t.is_empty() {
        return 0;
    }
    let mut total = 0u64;
    for &e1 in store.outgoing(h, r) {
        if policy.exclude_query_edge && e1 == t {
            continue;
        }
        if policy.require_distinct_intermediates && (e1 == h || e1 == t) {
            continue;
        }
        let in_e1 = store.incoming(e1, r);
        total += count_common(in_e1, in_t, |e2| {
            (policy.exclude_query_edge && e2 == h)
                || (policy.require_distinct_intermediates && (e2 == h || e2 == t || e2 == e1))
        });
    }
    total
}

/// |a ∩ b| over sorted slices, skipping excluded members. Falls back to
/// binary probing when one side is much shorter.
fn count_common(a: &[u32], b: &[u32], excluded: impl Fn(u32) -> bool) -> u64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.len() * 32 < large.len() {
        return small
            .iter()
            .filter(|&&x| !excluded(x) && large.binary_search(&x).is_ok())
            .count() as u64;
    }
    let mut count = 0u64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if !excluded(a[i]) {
                    count += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Brute-force re-derivation of the Z-count: double loop over all entity
/// pairs, testing the three edge memberships literally. Quadratic in |E|;
/// meant for graphs of a few hundred entities.
pub fn z_count_oracle(store: &TripleStore, triple: &Triple, policy: ZPathPolicy) -> u64 {
    let edges: HashSet<Triple> = store.train().iter().copied().collect();
    let (h, r, t) = (triple.head, triple.relation, triple.tail);
    let n = store.n_entities() as u32;
    let mut count = 0u64;
    for e1 in 0..n {
        for e2 in 0..n {
            let first = Triple::new(h, r, e1);
            let middle = Triple::new(e2, r, e1);
            let last = Triple::new(e2, r, t);
            if !(edges.contains(&first) && edges.contains(&middle) && edges.contains(&last)) {
                continue;
            }
            if policy.exclude_query_edge
                && (first == *triple || middle == *triple || last == *triple)
            {
                continue;
            }
            if policy.require_distinct_intermediates
                && (e1 == h || e1 == t || e2 == h || e2 == t || e1 == e2)
            {
                continue;
            }
            count += 1;
        }
    }
    count
}

/// One count per train triple, aligned with `store.train()` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZCountTable {
    pub counts: Vec<u64>,
    pub policy: ZPathPolicy,
}

/// Dataset-level summary of a count table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ZStats {
    pub nonzero_count: usize,
    pub nonzero_fraction: f64,
    pub max: u64,
    /// Absent when every count is zero.
    pub mean_over_nonzero: Option<f64>,
    pub mean_over_all: f64,
}

impl ZCountTable {
    /// Count every train triple. Parallelized over triples; the output is
    /// written by index, so it is identical for any worker count.
    pub fn compute(store: &TripleStore, policy: ZPathPolicy) -> ZCountTable {
        let counts = store
            .train()
            .par_iter()
            .map(|t| z_count(store, t, policy))
            .collect();
        ZCountTable { counts, policy }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn stats(&self) -> ZStats {
        let n = self.counts.len();
        let nonzero_count = self.counts.iter().filter(|&&c| c > 0).count();
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let sum: u64 = self.counts.iter().sum();
        let mean_over_nonzero = if nonzero_count > 0 {
            Some(sum as f64 / nonzero_count as f64)
        } else {
            None
        };
        ZStats {
            nonzero_count,
            nonzero_fraction: if n > 0 {
                nonzero_count as f64 / n as f64
            } else {
                0.0
            },
            max,
            mean_over_nonzero,
            mean_over_all: if n > 0 { sum as f64 / n as f64 } else { 0.0 },
        }
    }

    /// Persist as text: a `#` header carrying the policy flags, then one
    /// `index<TAB>count` line per train triple.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        (|| -> std::io::Result<()> {
            writeln!(
                w,
                "# exclude_query_edge={} require_distinct_intermediates={}",
                self.policy.exclude_query_edge, self.policy.require_distinct_intermediates
            )?;
            for (i, c) in self.counts.iter().enumerate() {
                writeln!(w, "{i}\t{c}")?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ZCountTable> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let malformed = |line: usize, msg: &str| Error::Malformed {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let header = match lines.next() {
            Some((_, Ok(l))) => l,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(malformed(0, "empty z-count file")),
        };
        let policy = parse_policy_header(&header)
            .ok_or_else(|| malformed(1, "expected '# exclude_query_edge=.. require_distinct_intermediates=..'"))?;
        let mut counts = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (i, c) = line
                .split_once('\t')
                .ok_or_else(|| malformed(idx + 1, "expected 'index<TAB>count'"))?;
            let i: usize = i
                .parse()
                .map_err(|_| malformed(idx + 1, "bad index"))?;
            if i != counts.len() {
                return Err(malformed(idx + 1, "indexes must be sequential from 0"));
            }
            counts.push(c.parse().map_err(|_| malformed(idx + 1, "bad count"))?);
        }
        Ok(ZCountTable { counts, policy })
    }
}

fn parse_policy_header(header: &str) -> Option<ZPathPolicy> {
    let rest = header.strip_prefix('#')?.trim();
    let mut exclude = None;
    let mut distinct = None;
    for part in rest.split_whitespace() {
        let (key, value) = part.split_once('=')?;
        let value: bool = value.parse().ok()?;
        match key {
            "exclude_query_edge" => exclude = Some(value),
            "require_distinct_intermediates" => distinct = Some(value),
            _ => return None,
        }
    }
    Some(ZPathPolicy {
        exclude_query_edge: exclude?,
        require_distinct_intermediates: distinct?,
    })
}
