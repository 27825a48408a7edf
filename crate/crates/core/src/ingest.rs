//! Dataset loading, activity filtering to a fixpoint, and the time-based
//! 80/10/10 split.

use crate::domain::{InteractionKind, InteractionRecord, Item};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("io failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("every row malformed in {0}")]
    ParseFailure(String),
    #[error("split fractions {0:?} do not sum to 1")]
    InvalidFractions([f64; 3]),
}

/// Interactions plus the catalog they reference.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub interactions: Vec<InteractionRecord>,
    pub catalog: BTreeMap<String, Item>,
    pub users: BTreeSet<String>,
}

impl Dataset {
    /// Assemble a dataset, dropping interactions whose item is missing from
    /// the catalog (count returned) and deriving the user set. When no catalog
    /// is supplied, stub items are synthesized so invariants hold.
    pub fn assemble(
        interactions: Vec<InteractionRecord>,
        catalog: Option<BTreeMap<String, Item>>,
    ) -> (Dataset, usize) {
        let mut catalog = catalog.unwrap_or_default();
        let synthesize = catalog.is_empty();
        let mut kept = Vec::with_capacity(interactions.len());
        let mut dropped = 0;
        for record in interactions {
            if !catalog.contains_key(&record.item_id) {
                if synthesize {
                    catalog.insert(record.item_id.clone(), stub_item(&record.item_id));
                } else {
                    dropped += 1;
                    continue;
                }
            }
            kept.push(record);
        }
        let users = kept.iter().map(|r| r.user_id.clone()).collect();
        let mut dataset = Dataset { interactions: kept, catalog, users };
        dataset.refresh_item_stats();
        (dataset, dropped)
    }

    /// Recompute per-item rating statistics from the interactions.
    pub fn refresh_item_stats(&mut self) {
        let mut counts: BTreeMap<&str, (u64, f64)> = BTreeMap::new();
        for record in &self.interactions {
            if let Some(rating) = record.rating {
                let entry = counts.entry(record.item_id.as_str()).or_insert((0, 0.0));
                entry.0 += 1;
                entry.1 += rating as f64;
            }
        }
        let counts: BTreeMap<String, (u64, f64)> =
            counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for (item_id, item) in self.catalog.iter_mut() {
            match counts.get(item_id) {
                Some((count, sum)) if *count > 0 => {
                    item.stat_count = *count;
                    item.stat_mean_rating = Some(sum / *count as f64);
                }
                _ => {
                    item.stat_count = 0;
                    item.stat_mean_rating = None;
                }
            }
        }
    }

    /// Interactions of one user, in timestamp order.
    pub fn user_history(&self, user_id: &str) -> Vec<&InteractionRecord> {
        let mut history: Vec<&InteractionRecord> =
            self.interactions.iter().filter(|r| r.user_id == user_id).collect();
        history.sort_by(|a, b| {
            a.timestamp.cmp(&b.timestamp).then_with(|| a.item_id.cmp(&b.item_id))
        });
        history
    }
}

fn stub_item(item_id: &str) -> Item {
    Item {
        item_id: item_id.to_string(),
        title: format!("Item {item_id}"),
        description: String::new(),
        categories: Vec::new(),
        brand: None,
        price: None,
        stat_count: 0,
        stat_mean_rating: None,
    }
}

/// Time-ordered train/validation/test partition.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<InteractionRecord>,
    pub validation: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: Vec<InteractionRecord>,
    pub malformed: usize,
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>, IngestError> {
    if !path.exists() {
        return Err(IngestError::FileNotFound(path.display().to_string()));
    }
    let file = std::fs::File::open(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    Ok(BufReader::new(file))
}

/// Parse `user<delim>item<delim>rating<delim>timestamp` rows in file order.
/// Malformed rows are skipped and counted; a non-empty file where every row is
/// malformed is a `ParseFailure`.
pub fn load_interactions(path: &Path, delimiter: &str) -> Result<LoadReport, IngestError> {
    let reader = open(path)?;
    let mut report = LoadReport::default();
    let mut total_rows = 0usize;
    for line in reader.lines() {
        let line =
            line.map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() {
            continue;
        }
        total_rows += 1;
        match parse_row(trimmed, delimiter) {
            Some(record) => report.records.push(record),
            None => report.malformed += 1,
        }
    }
    if total_rows > 0 && report.records.is_empty() {
        return Err(IngestError::ParseFailure(path.display().to_string()));
    }
    Ok(report)
}

fn parse_row(row: &str, delimiter: &str) -> Option<InteractionRecord> {
    let fields: Vec<&str> = row.split(delimiter).collect();
    if fields.len() < 4 {
        return None;
    }
    let user_id = fields[0].trim();
    let item_id = fields[1].trim();
    if user_id.is_empty() || item_id.is_empty() {
        return None;
    }
    let rating_field = fields[2].trim();
    let timestamp: i64 = fields[3].trim().parse().ok()?;
    let (rating, kind) = if rating_field.is_empty() || rating_field == "-" {
        (None, InteractionKind::View)
    } else {
        let value: f64 = rating_field.parse().ok()?;
        let rounded = value.round();
        if !(1.0..=5.0).contains(&rounded) {
            return None;
        }
        (Some(rounded as u8), InteractionKind::Rate)
    };
    Some(InteractionRecord {
        user_id: user_id.to_string(),
        item_id: item_id.to_string(),
        rating,
        timestamp,
        kind,
    })
}

/// Load a catalog: line-JSON `Item` objects, or delimited rows
/// `item_id<delim>title<delim>cat|cat[<delim>brand[<delim>price]]`.
pub fn load_catalog(path: &Path, delimiter: &str) -> Result<BTreeMap<String, Item>, IngestError> {
    let reader = open(path)?;
    let mut catalog = BTreeMap::new();
    let mut total_rows = 0usize;
    for line in reader.lines() {
        let line =
            line.map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        total_rows += 1;
        let item = if trimmed.starts_with('{') {
            serde_json::from_str::<Item>(trimmed).ok()
        } else {
            parse_catalog_row(trimmed, delimiter)
        };
        if let Some(item) = item {
            catalog.insert(item.item_id.clone(), item);
        }
    }
    if total_rows > 0 && catalog.is_empty() {
        return Err(IngestError::ParseFailure(path.display().to_string()));
    }
    Ok(catalog)
}

fn parse_catalog_row(row: &str, delimiter: &str) -> Option<Item> {
    let fields: Vec<&str> = row.split(delimiter).collect();
    if fields.len() < 2 || fields[0].trim().is_empty() || fields[1].trim().is_empty() {
        return None;
    }
    let categories: Vec<String> = fields
        .get(2)
        .map(|c| c.split('|').map(|g| g.trim().to_string()).filter(|g| !g.is_empty()).collect())
        .unwrap_or_default();
    let brand = fields.get(3).map(|b| b.trim()).filter(|b| !b.is_empty() && *b != "-");
    let price = fields.get(4).and_then(|p| p.trim().parse::<f64>().ok()).filter(|p| *p >= 0.0);
    let title = fields[1].trim().to_string();
    Some(Item {
        item_id: fields[0].trim().to_string(),
        description: format!("{} ({})", title, categories.join(", ")),
        title,
        categories,
        brand: brand.map(|b| b.to_string()),
        price,
        stat_count: 0,
        stat_mean_rating: None,
    })
}

/// Iterate dropping records of under-`k` users AND items until a fixpoint:
/// every surviving user and item has ≥ k interactions among survivors.
pub fn filter_min_interactions(records: &[InteractionRecord], k: usize) -> Vec<InteractionRecord> {
    let mut survivors: Vec<InteractionRecord> = records.to_vec();
    loop {
        let mut user_counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut item_counts: BTreeMap<String, usize> = BTreeMap::new();
        for record in &survivors {
            *user_counts.entry(record.user_id.clone()).or_default() += 1;
            *item_counts.entry(record.item_id.clone()).or_default() += 1;
        }
        let before = survivors.len();
        survivors.retain(|record| {
            user_counts[&record.user_id] >= k && item_counts[&record.item_id] >= k
        });
        if survivors.len() == before {
            return survivors;
        }
    }
}

/// Sort by timestamp (ties by user then item id) and cut ⌊f₁n⌋ / ⌊f₂n⌋ / rest.
pub fn temporal_split(
    records: &[InteractionRecord],
    fractions: (f64, f64, f64),
) -> Result<Split, IngestError> {
    let (train_fraction, validation_fraction, test_fraction) = fractions;
    let sum = train_fraction + validation_fraction + test_fraction;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(IngestError::InvalidFractions([
            train_fraction,
            validation_fraction,
            test_fraction,
        ]));
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.user_id.cmp(&b.user_id))
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    let n = sorted.len() as f64;
    let train_len = (n * train_fraction + 1e-9).floor() as usize;
    let validation_len = (n * validation_fraction + 1e-9).floor() as usize;
    let mut remainder = sorted.split_off(train_len);
    let test = remainder.split_off(validation_len.min(remainder.len()));
    Ok(Split { train: sorted, validation: remainder, test })
}

/// MovieLens-1M occupation code table.
const OCCUPATION_LABELS: [&str; 21] = [
    "other",
    "academic educator",
    "artist",
    "clerical admin",
    "college student",
    "customer service",
    "doctor health care",
    "executive managerial",
    "farmer",
    "homemaker",
    "K-12 student",
    "lawyer",
    "programmer",
    "retired",
    "sales marketing",
    "scientist",
    "self-employed",
    "technician engineer",
    "tradesman craftsman",
    "unemployed",
    "writer",
];

/// Load MovieLens-style demographics rows
/// `user<delim>gender<delim>age<delim>occupation_code[<delim>zip]`.
/// Age-group lower bound 1 ("under 18") maps to 16.
pub fn load_demographics(
    path: &Path,
    delimiter: &str,
) -> Result<BTreeMap<String, (u32, String)>, IngestError> {
    let reader = open(path)?;
    let mut out = BTreeMap::new();
    for line in reader.lines() {
        let line =
            line.map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let fields: Vec<&str> = line.trim().split(delimiter).collect();
        if fields.len() < 4 {
            continue;
        }
        let Ok(age_group) = fields[2].trim().parse::<u32>() else { continue };
        let age = if age_group < 13 { 16 } else { age_group.min(100) };
        let occupation = fields[3]
            .trim()
            .parse::<usize>()
            .ok()
            .and_then(|code| OCCUPATION_LABELS.get(code))
            .map(|label| label.to_string())
            .unwrap_or_else(|| fields[3].trim().to_string());
        out.insert(fields[0].trim().to_string(), (age, occupation));
    }
    Ok(out)
}

/// Counts and timestamp ranges describing an ingest run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_parsed: usize,
    pub rows_malformed: usize,
    pub dropped_missing_item: usize,
    pub records_after_filter: usize,
    pub users: usize,
    pub items: usize,
    pub split_sizes: (usize, usize, usize),
    pub train_timestamp_range: Option<(i64, i64)>,
    pub validation_timestamp_range: Option<(i64, i64)>,
    pub test_timestamp_range: Option<(i64, i64)>,
}

pub fn timestamp_range(records: &[InteractionRecord]) -> Option<(i64, i64)> {
    let min = records.iter().map(|r| r.timestamp).min()?;
    let max = records.iter().map(|r| r.timestamp).max()?;
    Some((min, max))
}
