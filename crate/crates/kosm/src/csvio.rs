//! Listing CSV files: `kost_name,kota,type_kos,area,facility_score,harga_nominal`.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use kosm_core::dataset::{cleanse_from, Cell, CleanDataset, DatasetError, RawRecord, COLUMNS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Reads raw rows. Numeric cells are parsed but not coerced; empty text is
/// kept for cleansing to judge. Extra columns are ignored.
pub fn parse_raw_csv<R: Read>(source: R) -> Result<Vec<RawRecord>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| {
                h.trim() == name || (name == "harga_nominal" && h.trim() == "harga_nomina")
            })
            .ok_or(CsvError::MissingColumn(name))
    };
    let idx: Vec<usize> = COLUMNS.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let cell = |i: usize| row.get(idx[i]).unwrap_or("");
        out.push(RawRecord {
            kost_name: cell(0).to_string(),
            kota: cell(1).to_string(),
            type_kos: cell(2).to_string(),
            area: cell(3).to_string(),
            facility_score: Cell::parse(cell(4)),
            harga_nominal: Cell::parse(cell(5)),
        });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File, CsvError> {
    File::open(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses and cleanses a listing file.
pub fn load_dataset(path: &Path) -> Result<CleanDataset, CsvError> {
    let raw = parse_raw_csv(open(path)?)?;
    Ok(cleanse_from(&raw, &path.display().to_string())?)
}

pub fn write_clean_csv<W: Write>(data: &CleanDataset, sink: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in &data.records {
        w.write_record([
            r.kost_name.as_str(),
            &r.kota,
            &r.type_kos,
            &r.area,
            &r.facility_score.to_string(),
            &r.harga_nominal.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CsvError::Io {
        path: String::from("<sink>"),
        source,
    })?;
    Ok(())
}

pub fn save_clean_csv(data: &CleanDataset, path: &Path) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_clean_csv(data, io::BufWriter::new(file))
}
