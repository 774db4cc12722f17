//! Categorical vocabulary encoding followed by frozen z-score normalization
//! over the four feature columns `[kota, type_kos, area, facility_score]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CleanDataset;
use crate::matrix::Matrix;

/// Added to the variance under the square root.
pub const NORM_EPSILON: f64 = 1e-7;

pub const N_FEATURES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("cannot fit an encoder on an empty dataset")]
    Empty,
    #[error("duplicate vocabulary token {0:?}")]
    DuplicateToken(String),
    #[error("unsupported column schema: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub columns: Vec<Column>,
}

impl ColumnSchema {
    pub const NAMES: [&'static str; N_FEATURES] = ["kota", "type_kos", "area", "facility_score"];

    /// The one supported layout: three categoricals then the facility score.
    pub fn standard() -> Self {
        let col = |name: &str, kind| Column {
            name: name.to_string(),
            kind,
        };
        Self {
            columns: vec![
                col("kota", ColumnKind::Categorical),
                col("type_kos", ColumnKind::Categorical),
                col("area", ColumnKind::Categorical),
                col("facility_score", ColumnKind::Numeric),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        if *self != Self::standard() {
            return Err(EncodingError::Schema(
                "expected [kota, type_kos, area] categorical + facility_score numeric".to_string(),
            ));
        }
        Ok(())
    }
}

/// Token list in first-seen order. Index 0 is out-of-vocabulary, token `i`
/// encodes as `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, EncodingError> {
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32 + 1).is_some() {
                return Err(EncodingError::DuplicateToken(t.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    fn observe(&mut self, token: &str) -> u32 {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        let i = self.tokens.len() as u32;
        self.index.insert(token.to_string(), i);
        i
    }

    /// 0 for unknown tokens.
    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        let i = (index as usize).checked_sub(1)?;
        self.tokens.get(i).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = EncodingError;
    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub means: Vec<f64>,
    /// Population variances.
    pub variances: Vec<f64>,
    pub count: u64,
}

impl NormalizationStats {
    /// Means, variances and the row count: `2n + 1` scalars.
    pub fn stored_scalars(&self) -> usize {
        self.means.len() + self.variances.len() + 1
    }

    fn fit(rows: &[[f64; N_FEATURES]]) -> Self {
        let n = rows.len() as f64;
        let mut means = vec![0.0; N_FEATURES];
        for r in rows {
            for (m, x) in means.iter_mut().zip(r) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut variances = vec![0.0; N_FEATURES];
        for r in rows {
            for ((v, m), x) in variances.iter_mut().zip(&means).zip(r) {
                *v += (x - m) * (x - m);
            }
        }
        variances.iter_mut().for_each(|v| *v /= n);
        Self {
            means,
            variances,
            count: rows.len() as u64,
        }
    }

    fn apply(&self, raw: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for (j, o) in out.iter_mut().enumerate() {
            let var = self.variances[j];
            *o = if var == 0.0 {
                0.0
            } else {
                (raw[j] - self.means[j]) / libm::sqrt(var + NORM_EPSILON)
            };
        }
        out
    }
}

/// Which categorical inputs fell outside the fitted vocabularies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OovFlags {
    pub kota: bool,
    pub type_kos: bool,
    pub area: bool,
}

impl OovFlags {
    pub fn fields(&self) -> Vec<&'static str> {
        [
            ("kota", self.kota),
            ("type_kos", self.type_kos),
            ("area", self.area),
        ]
        .into_iter()
        .filter_map(|(name, hit)| hit.then_some(name))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub schema: ColumnSchema,
    pub kota: Vocabulary,
    pub type_kos: Vocabulary,
    pub area: Vocabulary,
    /// `(kota index, area index)` pairs observed during fitting, first-seen order.
    pub area_cities: Vec<(u32, u32)>,
    pub norm: NormalizationStats,
}

impl FeatureEncoder {
    /// Vocabularies in schema order.
    pub fn vocabularies(&self) -> [(&'static str, &Vocabulary); 3] {
        [
            ("kota", &self.kota),
            ("type_kos", &self.type_kos),
            ("area", &self.area),
        ]
    }

    fn raw_row(&self, kota: &str, type_kos: &str, area: &str, score: u32) -> ([f64; 4], OovFlags) {
        let (k, t, a) = (
            self.kota.lookup(kota),
            self.type_kos.lookup(type_kos),
            self.area.lookup(area),
        );
        let flags = OovFlags {
            kota: k == 0,
            type_kos: t == 0,
            area: a == 0,
        };
        (
            [f64::from(k), f64::from(t), f64::from(a), f64::from(score)],
            flags,
        )
    }

    pub fn encode_row(
        &self,
        kota: &str,
        type_kos: &str,
        area: &str,
        facility_score: u32,
    ) -> [f64; 4] {
        self.encode_row_audited(kota, type_kos, area, facility_score)
            .0
    }

    pub fn encode_row_audited(
        &self,
        kota: &str,
        type_kos: &str,
        area: &str,
        facility_score: u32,
    ) -> ([f64; 4], OovFlags) {
        let (raw, flags) = self.raw_row(kota, type_kos, area, facility_score);
        (self.norm.apply(&raw), flags)
    }

    /// Areas seen with each city, keyed by city token, in first-seen order.
    pub fn areas_by_city(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for &(k, a) in &self.area_cities {
            if let (Some(city), Some(area)) = (self.kota.token(k), self.area.token(a)) {
                out.entry(city.to_string())
                    .or_default()
                    .push(area.to_string());
            }
        }
        out
    }
}

pub fn fit_encoder(train: &CleanDataset) -> Result<FeatureEncoder, EncodingError> {
    if train.is_empty() {
        return Err(EncodingError::Empty);
    }
    let mut kota = Vocabulary::default();
    let mut type_kos = Vocabulary::default();
    let mut area = Vocabulary::default();
    let mut pairs = BTreeSet::new();
    let mut area_cities = Vec::new();
    let mut rows = Vec::with_capacity(train.len());
    for r in &train.records {
        let k = kota.observe(&r.kota);
        let t = type_kos.observe(&r.type_kos);
        let a = area.observe(&r.area);
        if pairs.insert((k, a)) {
            area_cities.push((k, a));
        }
        rows.push([
            f64::from(k),
            f64::from(t),
            f64::from(a),
            f64::from(r.facility_score),
        ]);
    }
    Ok(FeatureEncoder {
        schema: ColumnSchema::standard(),
        kota,
        type_kos,
        area,
        area_cities,
        norm: NormalizationStats::fit(&rows),
    })
}

/// Encoded `n x 4` feature matrix and the IDR price targets.
pub fn encode_matrix(enc: &FeatureEncoder, data: &CleanDataset) -> (Matrix, Vec<f64>) {
    let mut x = Matrix::zeros(data.len(), N_FEATURES);
    let mut y = Vec::with_capacity(data.len());
    for (i, r) in data.records.iter().enumerate() {
        let row = enc.encode_row(&r.kota, &r.type_kos, &r.area, r.facility_score);
        x.row_mut(i).copy_from_slice(&row);
        y.push(r.harga_nominal as f64);
    }
    (x, y)
}
