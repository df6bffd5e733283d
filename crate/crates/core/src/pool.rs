//! Representation memory pool: sub-plan digest to cached state.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};

use lru::LruCache;
use parking_lot::Mutex;

use crate::model::RepresentationState;
use crate::plan::PlanDigest;

/// Natural-unit estimates for one (sub-)plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub cost: f64,
    pub card: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub state: RepresentationState<f32>,
    pub estimate: Estimate,
}

/// Bounded LRU map from sub-plan digest to its representation.
///
/// Lookups update recency, so reads take the lock too.
#[derive(Debug)]
pub struct MemoryPool {
    cache: Mutex<LruCache<PlanDigest, PoolEntry>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl MemoryPool {
    /// A zero capacity is treated as one.
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        MemoryPool {
            cache: Mutex::new(LruCache::new(cap)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.cache.lock().cap().get()
    }

    pub fn get(&self, digest: &PlanDigest) -> Option<PoolEntry> {
        let hit = self.cache.lock().get(digest).cloned();
        let counter = if hit.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        hit
    }

    pub fn put(&self, digest: PlanDigest, entry: PoolEntry) {
        self.cache.lock().put(digest, entry);
    }

    pub fn contains(&self, digest: &PlanDigest) -> bool {
        self.cache.lock().contains(digest)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every entry, as required after loading a new model or dataset.
    pub fn clear(&self) {
        self.cache.lock().clear();
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}
