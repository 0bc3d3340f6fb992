//! Shared synthetic dataset builders for the integration suites.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kge_core::store::{RawTriple, TripleStore};

pub fn raw(h: impl Into<String>, r: impl Into<String>, t: impl Into<String>) -> RawTriple {
    (h.into(), r.into(), t.into())
}

/// A random multigraph-style store for oracle comparisons.
pub fn random_store(seed: u64, entities: u32, relations: u32, edges: usize) -> TripleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train: Vec<RawTriple> = (0..edges)
        .map(|_| {
            raw(
                format!("e{}", rng.random_range(0..entities)),
                format!("r{}", rng.random_range(0..relations)),
                format!("e{}", rng.random_range(0..entities)),
            )
        })
        .collect();
    TripleStore::build(&train, &[], &[]).unwrap()
}

/// Two-level region hierarchy in the style of the Countries S1 task:
/// countries sit in subregions, subregions in regions, and every country
/// also carries a direct region fact except the held-out ones, whose
/// region facts form the valid/test splits. Neighbor edges connect
/// countries within a subregion.
pub fn region_hierarchy(seed: u64) -> TripleStore {
    let regions = 5u32;
    let subs_per_region = 3u32;
    let countries_per_sub = 5u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();

    let mut countries: Vec<(u32, u32)> = Vec::new(); // (country, subregion)
    for s in 0..regions * subs_per_region {
        let region = s / subs_per_region;
        train.push(raw(format!("S{s}"), "locatedIn", format!("R{region}")));
        for c in 0..countries_per_sub {
            let country = s * countries_per_sub + c;
            countries.push((country, s));
            train.push(raw(format!("C{country}"), "locatedIn", format!("S{s}")));
        }
    }
    // one test country and (on a staggered third of subregions) one valid
    // country per subregion keeps every region represented in both splits
    let mut held_test = HashSet::new();
    let mut held_valid = HashSet::new();
    for s in 0..regions * subs_per_region {
        held_test.insert(s * countries_per_sub);
        if s % 3 == 1 {
            held_valid.insert(s * countries_per_sub + 1);
        }
    }
    for &(country, s) in &countries {
        let region = s / subs_per_region;
        let fact = raw(format!("C{country}"), "locatedIn", format!("R{region}"));
        if held_test.contains(&country) {
            test.push(fact);
        } else if held_valid.contains(&country) {
            valid.push(fact);
        } else {
            train.push(fact);
        }
    }
    // symmetric neighbor edges inside each subregion
    for &(country, s) in &countries {
        for _ in 0..2 {
            let other = s * countries_per_sub + rng.random_range(0..countries_per_sub);
            if other != country {
                train.push(raw(format!("C{country}"), "neighborOf", format!("C{other}")));
                train.push(raw(format!("C{other}"), "neighborOf", format!("C{country}")));
            }
        }
    }
    TripleStore::build(&train, &valid, &test).unwrap()
}

/// Clustered membership graph for the curriculum trend check. Each person
/// carries three of their cluster's five tags, one of which is held out,
/// so held-out facts are recoverable from co-membership; the tag relation
/// is the high-Z-count population. Out-degree-1 relations (next, memberOf)
/// and sparse noise provide the zero-count easy majority.
pub fn clustered_membership(seed: u64) -> TripleStore {
    let clusters = 10u32;
    let people_per_cluster = 30u32;
    let tags_per_cluster = 5u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    let mut noise_seen = HashSet::new();

    for cluster in 0..clusters {
        let tags: Vec<u32> = (0..tags_per_cluster)
            .map(|k| cluster * tags_per_cluster + k)
            .collect();
        for p in 0..people_per_cluster {
            let person = cluster * people_per_cluster + p;
            let mut order = tags.clone();
            order.shuffle(&mut rng);
            // 3 tags per person: 2 visible, 1 held out
            let held = order[0];
            for tag in &order[1..3] {
                train.push(raw(format!("p{person}"), "hasTag", format!("t{tag}")));
            }
            let fact = raw(format!("p{person}"), "hasTag", format!("t{held}"));
            match p % 6 {
                0 | 1 => test.push(fact),
                2 => valid.push(fact),
                _ => train.push(fact),
            }
            // out-degree-1 relations: no Z-paths by construction
            let next = cluster * people_per_cluster + (p + 1) % people_per_cluster;
            train.push(raw(format!("p{person}"), "next", format!("p{next}")));
            train.push(raw(format!("p{person}"), "memberOf", format!("g{cluster}")));
        }
    }
    let n_people = clusters * people_per_cluster;
    for _ in 0..150 {
        let a = rng.random_range(0..n_people);
        let b = rng.random_range(0..n_people);
        if noise_seen.insert((a, b)) {
            let fact = raw(format!("p{a}"), "knows", format!("p{b}"));
            match noise_seen.len() % 5 {
                0 => test.push(fact),
                _ => train.push(fact),
            }
        }
    }
    TripleStore::build(&train, &valid, &test).unwrap()
}
