//! Architecture search over dense regressors: seeded random warm start, then
//! hill-climbing on the incumbent through function-preserving morphisms
//! (widen, deepen), each child fine-tuned before it is scored.

mod morph;

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use morph::{deepen, widen, MorphError, Morphism};

use crate::matrix::Matrix;
use crate::neuralnet::{fit, mae_loss, ArchSpec, MlpModel, NetError, TrainConfig};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search budget: {0}")]
    Budget(&'static str),
    #[error("invalid search space: {0}")]
    Space(&'static str),
    #[error("all {} trials diverged", trials.len())]
    AllDiverged { trials: Vec<Trial> },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Morph(#[from] MorphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub input_dim: usize,
    pub min_depth: usize,
    pub max_depth: usize,
    /// Width choices shared by every position.
    pub widths: Vec<usize>,
    /// Optional per-position overrides of `widths`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positional: Vec<Vec<usize>>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            input_dim: 4,
            min_depth: 1,
            max_depth: 4,
            widths: alloc::vec![16, 32, 64, 128, 256, 512, 1024],
            positional: Vec::new(),
        }
    }
}

impl SearchSpace {
    pub fn choices_at(&self, position: usize) -> &[usize] {
        self.positional
            .get(position)
            .filter(|c| !c.is_empty())
            .unwrap_or(&self.widths)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.input_dim == 0 {
            return Err(SearchError::Space("input_dim must be >= 1"));
        }
        if self.min_depth > self.max_depth {
            return Err(SearchError::Space("min_depth exceeds max_depth"));
        }
        if (self.min_depth..=self.max_depth).any(|d| (0..d).any(|p| self.choices_at(p).is_empty()))
        {
            return Err(SearchError::Space("no width choices"));
        }
        if (0..self.max_depth).any(|p| self.choices_at(p).contains(&0)) {
            return Err(SearchError::Space("width 0 is not allowed"));
        }
        Ok(())
    }

    pub fn contains(&self, arch: &ArchSpec) -> bool {
        let d = arch.hidden.len();
        arch.input_dim == self.input_dim
            && (self.min_depth..=self.max_depth).contains(&d)
            && arch
                .hidden
                .iter()
                .enumerate()
                .all(|(p, w)| self.choices_at(p).contains(w))
    }

    /// Every morphism of `arch` whose result stays inside the space, split
    /// into (widen, deepen) options.
    pub fn legal_morphisms(&self, arch: &ArchSpec) -> (Vec<Morphism>, Vec<Morphism>) {
        let mut widen = Vec::new();
        for (layer, &w) in arch.hidden.iter().enumerate() {
            for &new_width in self.choices_at(layer) {
                if new_width > w {
                    widen.push(Morphism::Widen { layer, new_width });
                }
            }
        }
        let deepen = (0..arch.hidden.len())
            .map(|after| Morphism::Deepen { after })
            .collect();
        let keep = |m: &Morphism| self.contains(&m.apply_to(arch));
        (
            widen.into_iter().filter(keep).collect(),
            Vec::into_iter(deepen).filter(keep).collect(),
        )
    }
}

/// Depth uniform over the allowed range, each width uniform over its choices.
pub fn random_arch<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> ArchSpec {
    let depth = rng.random_range(space.min_depth..=space.max_depth);
    let hidden = (0..depth)
        .map(|p| {
            let c = space.choices_at(p);
            c[rng.random_range(0..c.len())]
        })
        .collect();
    ArchSpec {
        input_dim: space.input_dim,
        hidden,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub n_random: usize,
    pub n_morph: usize,
    pub epochs_per_trial: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parent {
    pub trial: usize,
    pub morphism: Morphism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub arch: ArchSpec,
    pub seed: u64,
    /// Validation MAE in IDR; `None` if training diverged.
    pub val_mae: Option<f64>,
    pub parent: Option<Parent>,
    pub epochs_spent: usize,
    /// Lowest validation MAE over this and all earlier trials.
    pub incumbent_val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: MlpModel,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
}

impl SearchOutcome {
    pub fn best_val_mae(&self) -> f64 {
        self.trials[self.best_trial]
            .val_mae
            .expect("best trial completed")
    }
}

/// Validation data the search scores trials on.
pub struct Validation<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
}

/// Runs the warm start and the morphism phase. `base` supplies batch size,
/// learning rate and Adam constants; its `epochs` and `seed` are replaced
/// per trial.
pub fn search(
    x: &Matrix,
    y: &[f64],
    val: Validation<'_>,
    space: &SearchSpace,
    budget: &SearchBudget,
    base: &TrainConfig,
) -> Result<SearchOutcome, SearchError> {
    space.validate()?;
    if budget.n_random == 0 {
        return Err(SearchError::Budget("n_random must be >= 1"));
    }
    if budget.epochs_per_trial == 0 {
        return Err(SearchError::Budget("epochs_per_trial must be >= 1"));
    }
    if x.rows() == 0 || val.x.rows() == 0 {
        return Err(SearchError::Net(NetError::EmptyBatch));
    }

    let mut rng = rng::seeded(budget.seed);
    let mut ledger = Ledger::default();

    for _ in 0..budget.n_random {
        let arch = random_arch(space, &mut rng);
        let seed = rng.random::<u64>();
        let cfg = trial_config(base, budget, seed);
        let result = run(fit(MlpModel::init(&arch, seed), x, y, None, &cfg), &val)?;
        ledger.record(arch, seed, None, budget.epochs_per_trial, result);
    }

    for _ in 0..budget.n_morph {
        let Some((parent_id, parent)) = ledger.best.clone() else {
            break;
        };
        let (widen_opts, deepen_opts) = space.legal_morphisms(&parent.arch);
        let pool = match (widen_opts.is_empty(), deepen_opts.is_empty()) {
            (true, true) => break,
            (false, true) => widen_opts,
            (true, false) => deepen_opts,
            (false, false) => {
                if rng.random_bool(0.5) {
                    widen_opts
                } else {
                    deepen_opts
                }
            }
        };
        let morphism = pool[rng.random_range(0..pool.len())];
        let child = morphism.apply(&parent, &mut rng)?;
        let seed = rng.random::<u64>();
        let cfg = trial_config(base, budget, seed);
        let arch = child.arch.clone();
        let result = run(fit(child, x, y, None, &cfg), &val)?;
        let link = Parent {
            trial: parent_id,
            morphism,
        };
        ledger.record(arch, seed, Some(link), budget.epochs_per_trial, result);
    }

    match ledger.best {
        Some((best_trial, best)) => Ok(SearchOutcome {
            best,
            best_trial,
            trials: ledger.trials,
        }),
        None => Err(SearchError::AllDiverged {
            trials: ledger.trials,
        }),
    }
}

fn trial_config(base: &TrainConfig, budget: &SearchBudget, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: budget.epochs_per_trial,
        seed,
        ..*base
    }
}

/// Scores a finished fit; divergence becomes `None`, other errors propagate.
fn run(
    fitted: Result<(MlpModel, crate::neuralnet::TrainHistory), NetError>,
    val: &Validation<'_>,
) -> Result<Option<(MlpModel, f64)>, SearchError> {
    match fitted {
        Ok((model, _)) => {
            let mae = mae_loss(&model.forward(val.x)?, val.y)?.0;
            Ok(mae.is_finite().then_some((model, mae)))
        }
        Err(NetError::Diverged { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Default)]
struct Ledger {
    trials: Vec<Trial>,
    best: Option<(usize, MlpModel)>,
    best_mae: Option<f64>,
}

impl Ledger {
    fn record(
        &mut self,
        arch: ArchSpec,
        seed: u64,
        parent: Option<Parent>,
        epochs: usize,
        result: Option<(MlpModel, f64)>,
    ) {
        let id = self.trials.len();
        let val_mae = result.as_ref().map(|(_, m)| *m);
        if let Some((model, mae)) = result {
            if self.best_mae.is_none_or(|b| mae < b) {
                self.best_mae = Some(mae);
                self.best = Some((id, model));
            }
        }
        self.trials.push(Trial {
            id,
            arch,
            seed,
            val_mae,
            parent,
            epochs_spent: epochs,
            incumbent_val_mae: self.best_mae,
        });
    }
}
