//! End-to-end compositions used by the CLI: split, fit the encoder, train
//! or search, and package the result as a bundle.

use kosm_core::bundle::{Metadata, ModelBundle, FORMAT_VERSION};
use kosm_core::dataset::{split, CleanDataset, DatasetError, SplitSpec};
use kosm_core::encoding::{encode_matrix, fit_encoder, EncodingError, FeatureEncoder};
use kosm_core::nas::{self, SearchBudget, SearchError, SearchSpace, Trial, Validation};
use kosm_core::neuralnet::{
    evaluate, train, ArchSpec, MlpModel, NetError, TrainConfig, TrainHistory,
};
use thiserror::Error;

use crate::checkpoint::Checkpoint;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl PipelineError {
    /// Data problems (as opposed to model or training failures).
    pub fn is_data_error(&self) -> bool {
        matches!(self, PipelineError::Dataset(_) | PipelineError::Encoding(_))
    }
}

pub struct Prepared {
    pub train: CleanDataset,
    pub test: CleanDataset,
    pub encoder: FeatureEncoder,
}

pub fn prepare(data: &CleanDataset, spec: SplitSpec) -> Result<Prepared, PipelineError> {
    let (train, test) = split(data, spec)?;
    let encoder = fit_encoder(&train)?;
    Ok(Prepared {
        train,
        test,
        encoder,
    })
}

pub struct TrainOutcome {
    pub prepared: Prepared,
    pub model: MlpModel,
    pub history: TrainHistory,
    pub train_mae: f64,
    pub test_mae: f64,
    pub checkpoint: Checkpoint,
}

impl TrainOutcome {
    pub fn bundle(&self, created_unix: u64) -> ModelBundle {
        self.checkpoint
            .to_bundle(created_unix)
            .expect("checkpoint built from a valid model")
    }
}

/// Trains `arch` on the train side of the split, validating each epoch on
/// the held-out side.
pub fn train_model(
    data: &CleanDataset,
    arch: &ArchSpec,
    cfg: &TrainConfig,
    spec: SplitSpec,
    facility_catalog: Vec<String>,
) -> Result<TrainOutcome, PipelineError> {
    let prepared = prepare(data, spec)?;
    let (x, y) = encode_matrix(&prepared.encoder, &prepared.train);
    let (xt, yt) = encode_matrix(&prepared.encoder, &prepared.test);
    let (model, history) = train(arch, &x, &y, Some((&xt, &yt)), cfg)?;
    let train_mae = evaluate(&model, &prepared.encoder, &prepared.train)?;
    let test_mae = evaluate(&model, &prepared.encoder, &prepared.test)?;
    let checkpoint = Checkpoint::new(
        &model,
        &prepared.encoder,
        *cfg,
        spec,
        (train_mae, test_mae),
        facility_catalog,
    );
    Ok(TrainOutcome {
        prepared,
        model,
        history,
        train_mae,
        test_mae,
        checkpoint,
    })
}

pub struct SearchRun {
    pub prepared: Prepared,
    pub best: MlpModel,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
    pub bundle: ModelBundle,
}

/// Architecture search scored on the held-out side of the split.
pub fn search_model(
    data: &CleanDataset,
    space: &SearchSpace,
    budget: &SearchBudget,
    base: &TrainConfig,
    spec: SplitSpec,
    facility_catalog: Vec<String>,
    created_unix: u64,
) -> Result<SearchRun, PipelineError> {
    let prepared = prepare(data, spec)?;
    let (x, y) = encode_matrix(&prepared.encoder, &prepared.train);
    let (xv, yv) = encode_matrix(&prepared.encoder, &prepared.test);
    let out = nas::search(&x, &y, Validation { x: &xv, y: &yv }, space, budget, base)?;
    let train_mae = evaluate(&out.best, &prepared.encoder, &prepared.train)?;
    let metadata = Metadata {
        format_version: FORMAT_VERSION,
        created_unix,
        training_seed: out.trials[out.best_trial].seed,
        arch_summary: out.best.arch.summary(),
        train_mae,
        val_mae: out.best_val_mae(),
    };
    let bundle = ModelBundle::new(
        prepared.encoder.clone(),
        out.best.clone(),
        metadata,
        facility_catalog,
    )?;
    Ok(SearchRun {
        prepared,
        best: out.best,
        best_trial: out.best_trial,
        trials: out.trials,
        bundle,
    })
}
