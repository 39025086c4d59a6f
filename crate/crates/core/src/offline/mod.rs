//! Offline stage: domain-adversarial training of the feature extractor,
//! fault classifier and condition discriminator, plus the offline memory bank.

mod bank;
mod checkpoint;
mod model;
mod schedule;
mod trainer;

pub use bank::{init_offline_bank, CellShortfall, OfflineBank};
pub use checkpoint::{load_checkpoint, save_checkpoint, ModelManifest, MODEL_FORMAT_VERSION};
pub use model::{ArchConfig, DannBatch, DannGradients, DannModel, Seam};
pub use schedule::LambdaSchedule;
pub use trainer::{
    accuracy, dann_train_step, init_model, train_model, train_model_with_state, train_offline,
    DannOptimizers, EpochLog, OfflineConfig, OfflineDataset, StepReport, TrainingLog, TrainingMode,
};

pub(crate) use model::argmax;
