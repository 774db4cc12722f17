//! Scraped listing records: cleansing, seeded train/test split and
//! descriptive statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Column names in canonical order. `harga_nomina` is accepted as an alias
/// of the price column by the CSV reader.
pub const COLUMNS: [&str; 6] = [
    "kost_name",
    "kota",
    "type_kos",
    "area",
    "facility_score",
    "harga_nominal",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("no records left after cleansing")]
    Empty,
    #[error("split of {n} records with test fraction {fraction} leaves an empty side")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("test fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("top_k must be at least 1")]
    BadTopK,
}

/// A numeric CSV cell kept as parsed, so cleansing can judge it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cell {
    Value(i64),
    Empty,
    Malformed(String),
}

impl Cell {
    pub fn parse(text: &str) -> Self {
        let t = text.trim();
        if t.is_empty() {
            Cell::Empty
        } else {
            t.parse::<i64>()
                .map_or_else(|_| Cell::Malformed(String::from(text)), Cell::Value)
        }
    }

    pub fn value(&self) -> Option<i64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Value(v)
    }
}

/// One scraped row, uncoerced.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawRecord {
    pub kost_name: String,
    pub kota: String,
    pub type_kos: String,
    pub area: String,
    pub facility_score: Cell,
    pub harga_nominal: Cell,
}

impl RawRecord {
    /// True when a numeric column holds non-integer text.
    pub fn is_malformed(&self) -> bool {
        matches!(self.facility_score, Cell::Malformed(_))
            || matches!(self.harga_nominal, Cell::Malformed(_))
    }

    fn key(&self) -> (&str, &str, &str) {
        (&self.kost_name, &self.kota, &self.area)
    }

    fn to_record(&self) -> Option<Record> {
        let blank = |s: &str| s.trim().is_empty();
        if blank(&self.kost_name) || blank(&self.kota) || blank(&self.type_kos) || blank(&self.area)
        {
            return None;
        }
        let score = u32::try_from(self.facility_score.value()?).ok()?;
        let price = u64::try_from(self.harga_nominal.value()?)
            .ok()
            .filter(|&p| p > 0)?;
        Some(Record {
            kost_name: self.kost_name.clone(),
            kota: self.kota.clone(),
            type_kos: self.type_kos.clone(),
            area: self.area.clone(),
            facility_score: score,
            harga_nominal: price,
        })
    }
}

/// A cleansed listing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub kost_name: String,
    pub kota: String,
    pub type_kos: String,
    pub area: String,
    pub facility_score: u32,
    /// Monthly rent in IDR.
    pub harga_nominal: u64,
}

impl From<&Record> for RawRecord {
    fn from(r: &Record) -> Self {
        RawRecord {
            kost_name: r.kost_name.clone(),
            kota: r.kota.clone(),
            type_kos: r.type_kos.clone(),
            area: r.area.clone(),
            facility_score: Cell::Value(i64::from(r.facility_score)),
            harga_nominal: Cell::Value(r.harga_nominal as i64),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub rows_read: usize,
    pub duplicates_dropped: usize,
    pub nulls_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDataset {
    pub records: Vec<Record>,
    pub provenance: Provenance,
}

impl CleanDataset {
    /// Wraps already clean records without re-checking them.
    pub fn from_records(records: Vec<Record>) -> Self {
        let provenance = Provenance {
            rows_read: records.len(),
            ..Provenance::default()
        };
        Self {
            records,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self::from_records(idx.iter().map(|&i| self.records[i].clone()).collect())
    }
}

/// Collapses byte-identical rows, then rows sharing `(kost_name, kota, area)`,
/// keeping first occurrences; then drops rows with a blank field or a
/// missing, malformed or out-of-range number.
pub fn cleanse(records: &[RawRecord]) -> Result<CleanDataset, DatasetError> {
    cleanse_from(records, "")
}

pub fn cleanse_from(records: &[RawRecord], source: &str) -> Result<CleanDataset, DatasetError> {
    let mut seen_rows = BTreeSet::new();
    let mut seen_keys = BTreeSet::new();
    let mut duplicates = 0;
    let mut nulls = 0;
    let mut kept = Vec::new();
    for r in records {
        if !seen_rows.insert(r) || !seen_keys.insert(r.key()) {
            duplicates += 1;
            continue;
        }
        match r.to_record() {
            Some(rec) => kept.push(rec),
            None => nulls += 1,
        }
    }
    if kept.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(CleanDataset {
        records: kept,
        provenance: Provenance {
            source: String::from(source),
            rows_read: records.len(),
            duplicates_dropped: duplicates,
            nulls_dropped: nulls,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 42,
        }
    }
}

/// Shuffled index permutation under `seed`; the first `ceil((1-f)n)`
/// indices go to train. Both sides keep the dataset's original order.
pub fn split(
    data: &CleanDataset,
    spec: SplitSpec,
) -> Result<(CleanDataset, CleanDataset), DatasetError> {
    let (train, test) = split_indices(data.len(), spec)?;
    Ok((data.subset(&train), data.subset(&test)))
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    let f = spec.test_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(DatasetError::BadFraction(f));
    }
    let n_train = libm::ceil((1.0 - f) * n as f64 - 1e-9).max(0.0) as usize;
    if n_train == 0 || n_train >= n {
        return Err(DatasetError::EmptySplit { n, fraction: f });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(spec.seed));
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((train.to_vec(), test.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceCount {
    pub price: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub city_counts: BTreeMap<String, usize>,
    pub areas_per_city: BTreeMap<String, usize>,
    pub type_counts: BTreeMap<String, usize>,
    pub price_ranking: Vec<PriceCount>,
    pub total_records: usize,
}

pub fn describe(data: &CleanDataset, top_k: usize) -> Result<StatsReport, DatasetError> {
    if top_k == 0 {
        return Err(DatasetError::BadTopK);
    }
    if data.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut city_counts = BTreeMap::new();
    let mut type_counts = BTreeMap::new();
    let mut areas: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut prices: BTreeMap<u64, usize> = BTreeMap::new();
    for r in &data.records {
        *city_counts.entry(r.kota.clone()).or_insert(0) += 1;
        *type_counts.entry(r.type_kos.clone()).or_insert(0) += 1;
        areas.entry(&r.kota).or_default().insert(&r.area);
        *prices.entry(r.harga_nominal).or_insert(0) += 1;
    }
    let mut price_ranking: Vec<PriceCount> = prices
        .into_iter()
        .map(|(price, count)| PriceCount { price, count })
        .collect();
    price_ranking.sort_by_key(|p| (Reverse(p.count), p.price));
    price_ranking.truncate(top_k);
    Ok(StatsReport {
        city_counts,
        areas_per_city: areas
            .into_iter()
            .map(|(k, v)| (String::from(k), v.len()))
            .collect(),
        type_counts,
        price_ranking,
        total_records: data.len(),
    })
}
