//! Transfer-learning head over frozen backbone features: dataset
//! manifests and splits, the five head layouts, training with early
//! stopping, and accuracy metrics.

mod backbone;
mod features;
mod heads;
mod metrics;
mod records;
mod synthetic;
mod train;

use alloc::string::String;
use alloc::vec::Vec;

use crate::nn::NnError;

pub use backbone::{
    validate_backbone_descriptor, BackboneDescriptor, Mismatch, StageDescriptor, StageField,
};
pub use features::FeatureSet;
pub use heads::{build_head, HeadConfig, HeadKind, HeadModel};
pub use metrics::{
    evaluate_accuracy, per_class_accuracy, predict, subtype_accuracy, ConfusionMatrix,
    SubtypeAccuracy,
};
pub use records::{
    canonical_manifest, split_dataset, BreakhisRecord, DatasetManifest, Label, Magnification,
    Subtype, TABLE_COUNTS,
};
pub use synthetic::generate_synthetic_features;
pub use train::{train_head, EarlyStopping, EpochRecord, StopDecision, TrainHyper, TrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("subtype {subtype} does not belong to label {label}")]
    SubtypeLabelMismatch { subtype: Subtype, label: Label },
    #[error("unknown magnification {0}")]
    UnknownMagnification(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("unknown subtype {0}")]
    UnknownSubtype(String),
    #[error("unknown head configuration {0:?}")]
    UnknownHead(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("feature set is empty")]
    EmptySet,
    #[error("feature shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("head needs a [height, width, channels] input shape, got {0:?}")]
    BadInputShape(Vec<usize>),
    #[error("separation {0} must be finite and non-negative")]
    BadSeparation(f64),
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}
