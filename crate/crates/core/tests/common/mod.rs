#![allow(dead_code)]

use kbqa::fixtures::{random_lf, random_store, LfPool, RandomStoreConfig};
use kbqa::kb::TripleStore;
use kbqa::sexpr::LogicalForm;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random store with `entities` entities and `triples` non-type triples.
pub fn store(seed: u64, entities: usize, triples: usize) -> TripleStore {
    random_store(&mut rng(seed), RandomStoreConfig { entities, triples, ..Default::default() })
}

pub fn forms(seed: u64, pool: &LfPool, depth: usize, n: usize) -> Vec<LogicalForm> {
    let mut r = rng(seed);
    (0..n).map(|_| random_lf(&mut r, pool, depth)).collect()
}
