use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDescriptor {
    pub operator: String,
    pub channels: u32,
    /// Empty when the stage has no activation.
    pub activation: String,
    pub layers: u32,
}

impl StageDescriptor {
    fn row(operator: &str, channels: u32, activation: &str, layers: u32) -> Self {
        Self {
            operator: operator.to_string(),
            channels,
            activation: activation.to_string(),
            layers,
        }
    }
}

/// Stage table of the feature extractor plus its top layers. Stage `i`
/// is `stages[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneDescriptor {
    pub stages: Vec<StageDescriptor>,
}

impl BackboneDescriptor {
    /// The EfficientNetV2-SA layout.
    pub fn canonical() -> Self {
        let r = StageDescriptor::row;
        Self {
            stages: alloc::vec![
                r("Conv 3x3", 24, "SiLU", 1),
                r("Fused-MBConv1, k3x3", 24, "SiLU", 2),
                r("Fused-MBConv4, k3x3", 48, "SiLU", 4),
                r("Fused-MBConv4, k3x3", 64, "SiLU", 4),
                r("MBConv4, k3x3, SE0.25", 128, "SiLU/Sigmoid", 6),
                r("MBConv6, k3x3, SE0.25", 160, "SiLU/Sigmoid", 9),
                r("MBConv6, k3x3, SE0.25", 272, "SiLU/Sigmoid", 15),
                r("Conv 1x1, BN", 272, "ACON-C", 1),
                r("Pooling", 1792, "", 1),
                r("Dense", 1792, "", 1),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageField {
    Operator,
    Channels,
    Activation,
    Layers,
    /// The stage is absent altogether.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub stage: usize,
    pub field: StageField,
    pub expected: String,
    pub found: String,
}

/// Stages checked against the canonical table: the backbone (0-6) and
/// the activation stage (7).
const CHECKED_STAGES: usize = 8;

/// Every difference from the canonical stages 0-7. An empty report
/// means the descriptor is valid.
pub fn validate_backbone_descriptor(desc: &BackboneDescriptor) -> Vec<Mismatch> {
    let canonical = BackboneDescriptor::canonical();
    let mut report = Vec::new();
    for (stage, want) in canonical.stages.iter().take(CHECKED_STAGES).enumerate() {
        let Some(got) = desc.stages.get(stage) else {
            report.push(Mismatch {
                stage,
                field: StageField::Missing,
                expected: want.operator.clone(),
                found: String::new(),
            });
            continue;
        };
        let mut push = |field, expected: String, found: String| {
            if expected != found {
                report.push(Mismatch {
                    stage,
                    field,
                    expected,
                    found,
                });
            }
        };
        push(
            StageField::Operator,
            want.operator.clone(),
            got.operator.clone(),
        );
        push(
            StageField::Channels,
            want.channels.to_string(),
            got.channels.to_string(),
        );
        push(
            StageField::Activation,
            want.activation.clone(),
            got.activation.clone(),
        );
        push(
            StageField::Layers,
            want.layers.to_string(),
            got.layers.to_string(),
        );
    }
    report
}
