//! Recommendation strategies, the shared interaction ledger, and the
//! early-exposure boost.

use crate::domain::Item;
use crate::env::mf::MfModel;
use crate::seeds;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecommendError {
    #[error("unknown item: {0}")]
    UnknownItem(String),
}

/// Ranking strategy. Popularity ranks by base stat_count plus likes
/// accumulated in the ledger snapshot, so early advantages can compound.
#[derive(Debug, Clone)]
pub enum Strategy {
    Random,
    Popularity,
    Mf(MfModel),
    /// Externally computed rankings: user id → ranked item ids.
    External(BTreeMap<String, Vec<String>>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Popularity => "popularity",
            Strategy::Mf(_) => "mf",
            Strategy::External(_) => "external",
        }
    }
}

/// A strategy bound to a page size and seed, optionally carrying a boost.
#[derive(Debug, Clone)]
pub struct Recommender {
    pub strategy: Strategy,
    pub page_size: usize,
    pub seed: u64,
    boost: Option<(String, u32)>,
}

impl Recommender {
    pub fn new(strategy: Strategy, page_size: usize, seed: u64) -> Self {
        Self { strategy, page_size, seed, boost: None }
    }

    /// During rounds 1..=boost_rounds the target item is pinned to rank 1 of
    /// every user's ranking; afterwards the ranking reverts unchanged.
    pub fn apply_exposure_boost(
        mut self,
        catalog: &BTreeMap<String, Item>,
        item_id: &str,
        boost_rounds: u32,
    ) -> Result<Self, RecommendError> {
        if !catalog.contains_key(item_id) {
            return Err(RecommendError::UnknownItem(item_id.to_string()));
        }
        if boost_rounds > 0 {
            self.boost = Some((item_id.to_string(), boost_rounds));
        }
        Ok(self)
    }

    /// The full ranking for a user at a given round, exclusions removed.
    pub fn ranking(
        &self,
        catalog: &BTreeMap<String, Item>,
        likes_snapshot: &BTreeMap<String, u64>,
        user_id: &str,
        round: u32,
        exclusions: &BTreeSet<String>,
    ) -> Vec<String> {
        let mut ids: Vec<&String> =
            catalog.keys().filter(|id| !exclusions.contains(*id)).collect();
        match &self.strategy {
            Strategy::Random => {
                let mut rng =
                    seeds::agent_rng(self.seed, "random-ranking", user_id, &[]);
                ids.shuffle(&mut rng);
            }
            Strategy::Popularity => {
                ids.sort_by(|a, b| {
                    let count = |id: &String| {
                        catalog[id].stat_count + likes_snapshot.get(id).copied().unwrap_or(0)
                    };
                    count(b).cmp(&count(a)).then_with(|| a.cmp(b))
                });
            }
            Strategy::Mf(model) => {
                ids.sort_by(|a, b| {
                    let score_a = model.predict(user_id, a);
                    let score_b = model.predict(user_id, b);
                    score_b.partial_cmp(&score_a).unwrap().then_with(|| a.cmp(b))
                });
            }
            Strategy::External(rankings) => {
                let ranked = rankings.get(user_id).cloned().unwrap_or_default();
                let mut out: Vec<String> = ranked
                    .into_iter()
                    .filter(|id| catalog.contains_key(id) && !exclusions.contains(id))
                    .collect();
                if let Some((target, rounds)) = &self.boost {
                    if round >= 1 && round <= *rounds && !exclusions.contains(target) {
                        out.retain(|id| id != target);
                        out.insert(0, target.clone());
                    }
                }
                return out;
            }
        }
        let mut out: Vec<String> = ids.into_iter().cloned().collect();
        if let Some((target, rounds)) = &self.boost {
            if round >= 1 && round <= *rounds && !exclusions.contains(target) {
                out.retain(|id| id != target);
                out.insert(0, target.clone());
            }
        }
        out
    }

    /// Page slice [(page−1)·M, page·M) of the ranking; empty past the end.
    pub fn page(
        &self,
        catalog: &BTreeMap<String, Item>,
        likes_snapshot: &BTreeMap<String, u64>,
        user_id: &str,
        round: u32,
        page_number: u32,
        exclusions: &BTreeSet<String>,
    ) -> Vec<Item> {
        let ranking = self.ranking(catalog, likes_snapshot, user_id, round, exclusions);
        page_of(&ranking, catalog, self.page_size, page_number)
    }
}

/// Slice a ranking into page `page_number` (1-based) of size `page_size`.
pub fn page_of(
    ranking: &[String],
    catalog: &BTreeMap<String, Item>,
    page_size: usize,
    page_number: u32,
) -> Vec<Item> {
    let start = (page_number.saturating_sub(1) as usize) * page_size;
    if start >= ranking.len() {
        return Vec::new();
    }
    let end = (start + page_size).min(ranking.len());
    ranking[start..end].iter().filter_map(|id| catalog.get(id).cloned()).collect()
}

/// Cumulative exposure and like counts, with per-round snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionLedger {
    pub exposures: BTreeMap<String, u64>,
    pub likes: BTreeMap<String, u64>,
    /// (round, cumulative exposures, cumulative likes) after each round.
    pub snapshots: Vec<(u32, BTreeMap<String, u64>, BTreeMap<String, u64>)>,
}

impl InteractionLedger {
    pub fn record_exposure(&mut self, item_id: &str) {
        *self.exposures.entry(item_id.to_string()).or_default() += 1;
    }

    pub fn record_like(&mut self, item_id: &str) {
        *self.likes.entry(item_id.to_string()).or_default() += 1;
    }

    /// Close a round: freeze the cumulative counts.
    pub fn commit_round(&mut self, round: u32) {
        self.snapshots.push((round, self.exposures.clone(), self.likes.clone()));
    }

    pub fn likes_of(&self, item_id: &str) -> u64 {
        self.likes.get(item_id).copied().unwrap_or(0)
    }

    /// Cumulative likes of an item after each committed round.
    pub fn like_curve(&self, item_id: &str) -> Vec<u64> {
        self.snapshots
            .iter()
            .map(|(_, _, likes)| likes.get(item_id).copied().unwrap_or(0))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, count: u64) -> Item {
        Item {
            item_id: id.into(),
            title: format!("Title {id}"),
            description: String::new(),
            categories: vec![],
            brand: None,
            price: None,
            stat_count: count,
            stat_mean_rating: if count > 0 { Some(3.5) } else { None },
        }
    }

    fn catalog(counts: &[(&str, u64)]) -> BTreeMap<String, Item> {
        counts.iter().map(|(id, c)| (id.to_string(), item(id, *c))).collect()
    }

    #[test]
    fn popularity_ties_break_by_id() {
        let catalog = catalog(&[("A", 5), ("B", 3), ("C", 3)]);
        let recommender = Recommender::new(Strategy::Popularity, 10, 0);
        let ranking =
            recommender.ranking(&catalog, &BTreeMap::new(), "u", 1, &BTreeSet::new());
        assert_eq!(ranking, vec!["A", "B", "C"]);
    }

    #[test]
    fn random_is_seed_stable() {
        let catalog = catalog(&[("A", 1), ("B", 1), ("C", 1), ("D", 1)]);
        let r = Recommender::new(Strategy::Random, 2, 7);
        let a = r.ranking(&catalog, &BTreeMap::new(), "u", 1, &BTreeSet::new());
        let b = r.ranking(&catalog, &BTreeMap::new(), "u", 1, &BTreeSet::new());
        assert_eq!(a, b);
        // Different users see different shuffles (with overwhelming likelihood
        // on this fixed seed).
        let c = r.ranking(&catalog, &BTreeMap::new(), "other", 1, &BTreeSet::new());
        assert_eq!(a.len(), c.len());
    }

    #[test]
    fn page_slicing() {
        let catalog: BTreeMap<String, Item> =
            (0..15).map(|i| (format!("i{i:02}"), item(&format!("i{i:02}"), 0))).collect();
        let ranking: Vec<String> = catalog.keys().cloned().collect();
        assert_eq!(page_of(&ranking, &catalog, 10, 1).len(), 10);
        assert_eq!(page_of(&ranking, &catalog, 10, 2).len(), 5);
        assert!(page_of(&ranking, &catalog, 10, 3).is_empty());
    }

    #[test]
    fn pages_partition_ranking() {
        let catalog: BTreeMap<String, Item> =
            (0..37).map(|i| (format!("i{i:02}"), item(&format!("i{i:02}"), i as u64))).collect();
        let recommender = Recommender::new(Strategy::Popularity, 10, 0);
        let ranking =
            recommender.ranking(&catalog, &BTreeMap::new(), "u", 1, &BTreeSet::new());
        let mut concatenated = Vec::new();
        for page_number in 1..=4 {
            for item in page_of(&ranking, &catalog, 10, page_number) {
                concatenated.push(item.item_id);
            }
        }
        assert_eq!(concatenated, ranking);
    }

    #[test]
    fn boost_pins_target_then_reverts() {
        let catalog = catalog(&[("A", 50), ("B", 40), ("target", 1)]);
        let base = Recommender::new(Strategy::Popularity, 10, 0);
        let boosted =
            base.clone().apply_exposure_boost(&catalog, "target", 2).unwrap();
        let snapshot = BTreeMap::new();
        for round in 1..=2 {
            let ranking = boosted.ranking(&catalog, &snapshot, "u", round, &BTreeSet::new());
            assert_eq!(ranking[0], "target", "round {round}");
        }
        let round3 = boosted.ranking(&catalog, &snapshot, "u", 3, &BTreeSet::new());
        let unboosted = base.ranking(&catalog, &snapshot, "u", 3, &BTreeSet::new());
        assert_eq!(round3, unboosted);
    }

    #[test]
    fn boost_zero_rounds_is_identity() {
        let catalog = catalog(&[("A", 5), ("B", 3)]);
        let base = Recommender::new(Strategy::Popularity, 10, 0);
        let boosted = base.clone().apply_exposure_boost(&catalog, "B", 0).unwrap();
        let snapshot = BTreeMap::new();
        assert_eq!(
            base.ranking(&catalog, &snapshot, "u", 1, &BTreeSet::new()),
            boosted.ranking(&catalog, &snapshot, "u", 1, &BTreeSet::new())
        );
    }

    #[test]
    fn boost_unknown_item_rejected() {
        let catalog = catalog(&[("A", 5)]);
        let err = Recommender::new(Strategy::Popularity, 10, 0)
            .apply_exposure_boost(&catalog, "ghost", 2)
            .unwrap_err();
        assert_eq!(err, RecommendError::UnknownItem("ghost".into()));
    }

    #[test]
    fn ledger_counts_conserve() {
        let mut ledger = InteractionLedger::default();
        ledger.record_like("A");
        ledger.commit_round(1);
        ledger.record_like("A");
        ledger.record_like("B");
        ledger.commit_round(2);
        assert_eq!(ledger.like_curve("A"), vec![1, 2]);
        assert_eq!(ledger.like_curve("B"), vec![0, 1]);
        // Non-decreasing cumulative counts.
        for curve in [ledger.like_curve("A"), ledger.like_curve("B")] {
            for pair in curve.windows(2) {
                assert!(pair[0] <= pair[1]);
            }
        }
    }

    #[test]
    fn likes_snapshot_feeds_popularity() {
        let catalog = catalog(&[("A", 5), ("B", 5)]);
        let recommender = Recommender::new(Strategy::Popularity, 10, 0);
        let mut snapshot = BTreeMap::new();
        snapshot.insert("B".to_string(), 3u64);
        let ranking = recommender.ranking(&catalog, &snapshot, "u", 1, &BTreeSet::new());
        assert_eq!(ranking, vec!["B", "A"]);
    }
}
