//! The self-contained deployment bundle: fitted encoder, trained network,
//! facility catalog and provenance metadata, plus the prediction entry point
//! used by the CLI and the HTTP service.

mod lite;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use lite::{decode, encode, LiteError, FORMAT_VERSION, MAGIC};

use crate::encoding::{FeatureEncoder, N_FEATURES};
use crate::matrix::Matrix;
use crate::neuralnet::{MlpModel, NetError};

/// Facility checklist offered to clients when none is configured.
pub const DEFAULT_FACILITIES: [&str; 12] = [
    "wifi",
    "ac",
    "kamar mandi dalam",
    "kasur",
    "lemari",
    "meja",
    "kursi",
    "parkir motor",
    "dapur",
    "laundry",
    "cctv",
    "air panas",
];

pub fn default_facility_catalog() -> Vec<String> {
    DEFAULT_FACILITIES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format_version: u32,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub training_seed: u64,
    pub arch_summary: String,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub encoder: FeatureEncoder,
    pub model: MlpModel,
    pub metadata: Metadata,
    pub facility_catalog: Vec<String>,
}

fn normalize_facility(name: &str) -> String {
    name.trim().to_lowercase()
}

impl ModelBundle {
    pub fn new(
        encoder: FeatureEncoder,
        model: MlpModel,
        metadata: Metadata,
        facility_catalog: Vec<String>,
    ) -> Result<Self, NetError> {
        if model.input_dim() != N_FEATURES {
            return Err(NetError::Shape {
                what: "bundle model input_dim",
                expected: N_FEATURES,
                actual: model.input_dim(),
            });
        }
        Ok(Self {
            encoder,
            model,
            metadata,
            facility_catalog,
        })
    }

    pub fn to_lite_bytes(&self) -> Vec<u8> {
        encode(self)
    }

    pub fn from_lite_bytes(bytes: &[u8]) -> Result<Self, LiteError> {
        decode(bytes)
    }

    /// Distinct requested facilities found in the catalog (after trimming
    /// and lowercasing), and the distinct unknown names in request order.
    pub fn facility_score<S: AsRef<str>>(&self, facilities: &[S]) -> (u32, Vec<String>) {
        let catalog: BTreeSet<String> = self
            .facility_catalog
            .iter()
            .map(|f| normalize_facility(f))
            .collect();
        let mut known = BTreeSet::new();
        let mut unknown = Vec::new();
        for f in facilities {
            let name = normalize_facility(f.as_ref());
            if catalog.contains(&name) {
                known.insert(name);
            } else if !unknown.contains(&name) {
                unknown.push(name);
            }
        }
        (known.len() as u32, unknown)
    }

    /// Raw network output in IDR for already-scored inputs.
    pub fn predict_raw(&self, kota: &str, area: &str, type_kos: &str, facility_score: u32) -> f64 {
        let row = self
            .encoder
            .encode_row(kota, type_kos, area, facility_score);
        self.forward_row(&row)
    }

    fn forward_row(&self, row: &[f64; N_FEATURES]) -> f64 {
        let x = Matrix::from_vec(1, N_FEATURES, row.to_vec()).expect("1 x 4");
        self.model
            .forward(&x)
            .expect("bundle model takes 4 features")[0]
    }

    pub fn predict<S: AsRef<str>>(
        &self,
        kota: &str,
        area: &str,
        type_kos: &str,
        facilities: &[S],
    ) -> Prediction {
        let (score, unknown_facilities) = self.facility_score(facilities);
        let (row, oov) = self.encoder.encode_row_audited(kota, type_kos, area, score);
        let raw = self.forward_row(&row);
        let price = raw.max(0.0);
        Prediction {
            price_idr: price,
            display_price: (libm::round(price / 1000.0) * 1000.0) as u64,
            raw_price_idr: raw,
            facility_score_used: score,
            unknown_facilities,
            oov_fields: oov.fields().into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Predicted monthly rent, clamped below at 0.
    pub price_idr: f64,
    /// `price_idr` rounded to the nearest 1,000 IDR.
    pub display_price: u64,
    /// Unclamped network output.
    pub raw_price_idr: f64,
    pub facility_score_used: u32,
    pub unknown_facilities: Vec<String>,
    pub oov_fields: Vec<String>,
}
