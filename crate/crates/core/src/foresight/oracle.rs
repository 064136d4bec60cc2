use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::ForesightPredictor;
use crate::observation::{l1_distance, ChannelWeights, Observation};
use crate::simulator::{PickPlaceAction, WorldState};

/// Foresight backed by the simulator.
///
/// Keeps the world state behind every observation it has seen or produced, so a search
/// tree can be expanded from any node. An observation that was never seen is mapped to
/// the closest cached world and counted in [`OraclePredictor::stale_lookups`].
#[derive(Debug, Default)]
pub struct OraclePredictor {
    cache: Mutex<BTreeMap<u64, Vec<(Observation, WorldState)>>>,
    stale: AtomicUsize,
}

fn fingerprint(o: &Observation) -> u64 {
    let mut h = DefaultHasher::new();
    o.height().hash(&mut h);
    o.width().hash(&mut h);
    for p in o.pixels() {
        for c in p {
            c.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

impl OraclePredictor {
    pub fn new(world: &WorldState) -> Self {
        let p = Self::default();
        p.sync(world);
        p
    }

    pub fn stale_lookups(&self) -> usize {
        self.stale.load(Ordering::Relaxed)
    }

    fn insert(cache: &mut BTreeMap<u64, Vec<(Observation, WorldState)>>, o: Observation, w: WorldState) {
        let bucket = cache.entry(fingerprint(&o)).or_default();
        if !bucket.iter().any(|(seen, _)| *seen == o) {
            bucket.push((o, w));
        }
    }

    fn lookup(&self, o: &Observation) -> Option<WorldState> {
        let cache = self.cache.lock().expect("cache lock");
        if let Some(bucket) = cache.get(&fingerprint(o)) {
            if let Some((_, w)) = bucket.iter().find(|(seen, _)| seen == o) {
                return Some(w.clone());
            }
        }
        let w = ChannelWeights::unit();
        let nearest = cache
            .values()
            .flatten()
            .filter_map(|(seen, world)| l1_distance(seen, o, &w).ok().map(|d| (d, world)))
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        self.stale.fetch_add(1, Ordering::Relaxed);
        log::warn!("oracle foresight: unseen observation, using nearest cached world (L1 {:.4})", nearest.0);
        Some(nearest.1.clone())
    }

    pub fn oracle_predict(&self, o: &Observation, a: &PickPlaceAction) -> Option<Observation> {
        let world = self.lookup(o)?;
        let next = world.apply_action(a);
        let rendered = next.render();
        Self::insert(&mut self.cache.lock().expect("cache lock"), rendered.clone(), next);
        Some(rendered)
    }
}

impl ForesightPredictor for OraclePredictor {
    fn predict(&self, o: &Observation, a: &PickPlaceAction) -> Observation {
        self.oracle_predict(o, a).unwrap_or_else(|| o.clone())
    }

    /// Drops the old cache; only states reachable from `world` matter from here on.
    fn sync(&self, world: &WorldState) {
        let mut cache = self.cache.lock().expect("cache lock");
        cache.clear();
        Self::insert(&mut cache, world.render(), world.clone());
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}
