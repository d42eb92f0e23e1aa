use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::nn::{
    softmax, AconC, AconCParams, BatchNorm, Dropout, GlobalAvgPool, GlobalMaxPool, Layer, Linear,
    Mode, Sequential, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    #[serde(rename = "VGG-16FC")]
    Vgg16Fc,
    #[serde(rename = "VGG-16GAP")]
    Vgg16Gap,
    #[serde(rename = "ResNet-50")]
    ResNet50,
    #[serde(rename = "EfficientNetV2-S")]
    EfficientNetV2S,
    #[serde(rename = "EfficientNetV2-SA")]
    EfficientNetV2SA,
}

impl HeadKind {
    pub const ALL: [HeadKind; 5] = [
        HeadKind::Vgg16Fc,
        HeadKind::Vgg16Gap,
        HeadKind::ResNet50,
        HeadKind::EfficientNetV2S,
        HeadKind::EfficientNetV2SA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Vgg16Fc => "VGG-16FC",
            HeadKind::Vgg16Gap => "VGG-16GAP",
            HeadKind::ResNet50 => "ResNet-50",
            HeadKind::EfficientNetV2S => "EfficientNetV2-S",
            HeadKind::EfficientNetV2SA => "EfficientNetV2-SA",
        }
    }

    /// Layer rows of the head, top to bottom.
    pub fn stages(self) -> &'static [&'static str] {
        match self {
            HeadKind::Vgg16Fc => &["Maxpooling", "FC-1024", "Dropout 0.3", "FC-512", "softmax"],
            HeadKind::EfficientNetV2SA => &["Conv1x1", "BN(ACON-C)", "Averagepooling", "softmax"],
            _ => &["Conv1x1", "BN(SiLU)", "Averagepooling", "softmax"],
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ClassifierError::UnknownHead(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Per-sample feature map shape `[height, width, channels]`.
    pub input_shape: Vec<usize>,
    pub classes: usize,
    /// Output width of the 1x1 convolution. Defaults to the input channels.
    #[serde(default)]
    pub conv_width: Option<usize>,
}

impl HeadConfig {
    pub const FC_WIDTHS: [usize; 2] = [1024, 512];
    pub const DROPOUT: f64 = 0.3;

    pub fn new(kind: HeadKind, input_shape: Vec<usize>, classes: usize) -> Self {
        Self {
            kind,
            input_shape,
            classes,
            conv_width: None,
        }
    }

    pub fn with_conv_width(mut self, width: usize) -> Self {
        self.conv_width = Some(width);
        self
    }

    pub fn channels(&self) -> usize {
        self.input_shape.last().copied().unwrap_or(0)
    }

    pub fn conv_width(&self) -> usize {
        self.conv_width.unwrap_or_else(|| self.channels())
    }

    fn check(&self) -> Result<(), ClassifierError> {
        if self.input_shape.len() != 3
            || self.input_shape.contains(&0)
            || self.conv_width == Some(0)
        {
            return Err(ClassifierError::BadInputShape(self.input_shape.clone()));
        }
        if self.classes < 2 {
            return Err(ClassifierError::LabelOutOfRange {
                label: 0,
                classes: self.classes,
            });
        }
        Ok(())
    }
}

/// A trainable head. The network outputs logits; `probabilities` applies
/// the softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    pub config: HeadConfig,
    pub net: Sequential,
}

/// Construct the layer stack for `config` with seeded Glorot weights.
///
/// The GAP-style heads are Conv1x1, BN, SiLU or ACON-C, global average
/// pooling and a dense softmax layer. VGG-16FC is global max pooling,
/// FC-1024, dropout, FC-512 and a dense softmax layer, with ReLU after
/// each hidden FC.
pub fn build_head(config: &HeadConfig, seed: u64) -> Result<HeadModel, ClassifierError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config.channels();
    let layers = match config.kind {
        HeadKind::Vgg16Fc => {
            let [h1, h2] = HeadConfig::FC_WIDTHS;
            vec![
                Layer::GlobalMaxPool(GlobalMaxPool::default()),
                Layer::Dense(Linear::glorot(c, h1, &mut rng)),
                Layer::relu(),
                Layer::Dropout(Dropout::new(HeadConfig::DROPOUT)?),
                Layer::Dense(Linear::glorot(h1, h2, &mut rng)),
                Layer::relu(),
                Layer::Dense(Linear::glorot(h2, config.classes, &mut rng)),
            ]
        }
        kind => {
            let w = config.conv_width();
            let conv = Linear::glorot(c, w, &mut rng);
            let out = Linear::glorot(w, config.classes, &mut rng);
            let act = if kind == HeadKind::EfficientNetV2SA {
                Layer::AconC(AconC::new(AconCParams::new(w)))
            } else {
                Layer::silu()
            };
            vec![
                Layer::Conv1x1(conv),
                Layer::BatchNorm(BatchNorm::new(w)),
                act,
                Layer::GlobalAvgPool(GlobalAvgPool::default()),
                Layer::Dense(out),
            ]
        }
    };
    Ok(HeadModel {
        config: config.clone(),
        net: Sequential::new(layers),
    })
}

impl HeadModel {
    pub fn kind(&self) -> HeadKind {
        self.config.kind
    }

    pub fn check_input(&self, x: &Tensor) -> Result<(), ClassifierError> {
        if x.rank() != 4 || x.shape()[1..] != self.config.input_shape[..] {
            let mut expected = vec![x.shape().first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.config.input_shape);
            return Err(ClassifierError::ShapeMismatch {
                expected,
                found: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Logits `[N, classes]` for a `[N, H, W, C]` batch.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor, ClassifierError> {
        self.check_input(x)?;
        Ok(self.net.forward(x, mode, rng)?)
    }

    /// Inference-mode logits; the model itself is left untouched.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor, ClassifierError> {
        let mut m = self.clone();
        // dropout is the only consumer and it is inactive at inference
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.forward(x, Mode::Infer, &mut rng)
    }

    /// Softmax class probabilities per sample.
    pub fn probabilities(&self, x: &Tensor) -> Result<Vec<Vec<f64>>, ClassifierError> {
        let logits = self.logits(x)?;
        Ok((0..logits.rows()).map(|r| softmax(logits.row(r))).collect())
    }

    /// ACON-C switches of the head, if it has any.
    pub fn acon_params(&self) -> Option<AconCParams> {
        self.net.layers.iter().find_map(|l| match l {
            Layer::AconC(a) => Some(a.params()),
            _ => None,
        })
    }

    pub fn dropout_rate(&self) -> Option<f64> {
        self.net.layers.iter().find_map(|l| match l {
            Layer::Dropout(d) => Some(d.rate),
            _ => None,
        })
    }

    /// Output widths of the dense layers, in order.
    pub fn dense_widths(&self) -> Vec<usize> {
        self.net
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.outputs()),
                _ => None,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg(kind: HeadKind) -> HeadConfig {
        HeadConfig::new(kind, vec![2, 2, 4], 2)
    }

    fn batch(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..3 * 16).map(|_| rng.random_range(-2.0..2.0)).collect();
        Tensor::new(vec![3, 2, 2, 4], data).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in HeadKind::ALL {
            assert_eq!(k.name().parse::<HeadKind>().unwrap(), k);
        }
        assert_eq!(
            "LeNet".parse::<HeadKind>(),
            Err(ClassifierError::UnknownHead("LeNet".into()))
        );
    }

    #[test]
    fn sa_head_layout() {
        let m = build_head(&cfg(HeadKind::EfficientNetV2SA), 1).unwrap();
        let names: Vec<&str> = m.net.layers.iter().map(Layer::name).collect();
        assert_eq!(
            names,
            [
                "conv1x1",
                "batch_norm",
                "acon_c",
                "global_avg_pool",
                "dense"
            ]
        );
        assert_eq!(m.acon_params(), Some(AconCParams::new(4)));
        assert_eq!(m.kind().stages().len(), 4);
        assert_eq!(m.dropout_rate(), None);
    }

    #[test]
    fn vgg_fc_layout() {
        let m = build_head(&cfg(HeadKind::Vgg16Fc), 1).unwrap();
        assert_eq!(m.dropout_rate(), Some(0.3));
        assert_eq!(m.dense_widths(), vec![1024, 512, 2]);
        assert!(m.acon_params().is_none());
        for k in HeadKind::ALL
            .into_iter()
            .filter(|k| *k != HeadKind::Vgg16Fc)
        {
            let m = build_head(&cfg(k), 1).unwrap();
            assert_eq!(m.dropout_rate(), None);
            assert_eq!(m.dense_widths(), vec![2]);
        }
    }

    #[test]
    fn sa_adds_three_values_per_channel() {
        let c = cfg(HeadKind::EfficientNetV2S).with_conv_width(6);
        let s = build_head(&c, 3).unwrap();
        let sa = build_head(
            &HeadConfig {
                kind: HeadKind::EfficientNetV2SA,
                ..c
            },
            3,
        )
        .unwrap();
        assert_eq!(sa.param_count(), s.param_count() + 3 * 6);
    }

    #[test]
    fn sa_matches_s_at_init() {
        let s = build_head(&cfg(HeadKind::EfficientNetV2S), 8).unwrap();
        let sa = build_head(&cfg(HeadKind::EfficientNetV2SA), 8).unwrap();
        let x = batch(2);
        let a = s.logits(&x).unwrap();
        let b = sa.logits(&x).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn seeded_build() {
        let c = cfg(HeadKind::ResNet50);
        assert_eq!(build_head(&c, 4).unwrap(), build_head(&c, 4).unwrap());
        assert_ne!(build_head(&c, 4).unwrap(), build_head(&c, 5).unwrap());
    }

    #[test]
    fn probabilities_are_distributions() {
        for k in HeadKind::ALL {
            let m = build_head(&cfg(k), 1).unwrap();
            for p in m.probabilities(&batch(7)).unwrap() {
                assert!(p.iter().all(|v| *v >= 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn input_shape_checked() {
        let m = build_head(&cfg(HeadKind::EfficientNetV2S), 1).unwrap();
        assert!(matches!(
            m.logits(&Tensor::zeros(&[1, 2, 2, 5])),
            Err(ClassifierError::ShapeMismatch { .. })
        ));
        assert!(build_head(&HeadConfig::new(HeadKind::Vgg16Gap, vec![4], 2), 1).is_err());
    }
}
