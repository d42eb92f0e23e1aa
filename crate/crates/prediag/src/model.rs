//! Classifier snapshots and the train / evaluate / predict pipeline.
//!
//! A snapshot is a JSON document:
//!
//! ```text
//! { "format": "prediag-head", "version": 1,
//!   "model_id": "...", "magnification": 40 | null,
//!   "classes": ["benign", "malignant"],
//!   "model": { "config": {...}, "net": { "layers": [...] } } }
//! ```
//!
//! Each layer carries a `type` tag; a parameter is
//! `{"value": {"shape": [...], "data": [...]}}`. An `acon_c` layer holds
//! its `p1`, `p2` and `beta` parameters; `batch_norm` also stores its
//! running statistics. Floats read back bit for bit.
//!
//! Two-class models predict benign/malignant. Eight-class models predict
//! the subtype, and the label follows from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use prediag_core::classifier::{
    build_head, evaluate_accuracy, generate_synthetic_features, per_class_accuracy, predict,
    split_dataset, train_head, ConfusionMatrix, DatasetManifest, FeatureSet, HeadConfig, HeadKind,
    HeadModel, Label, Magnification, Subtype, SubtypeAccuracy, TrainHyper, TrainReport,
};
use prediag_core::nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "prediag-head";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassScheme {
    Label,
    Subtype,
}

impl ClassScheme {
    pub fn from_classes(classes: usize) -> Result<Self> {
        match classes {
            2 => Ok(Self::Label),
            8 => Ok(Self::Subtype),
            n => Err(Error::Config(format!(
                "unsupported class count {n} (expected 2 or 8)"
            ))),
        }
    }

    pub fn classes(self) -> usize {
        match self {
            Self::Label => 2,
            Self::Subtype => 8,
        }
    }

    pub fn names(self) -> Vec<String> {
        match self {
            Self::Label => Label::ALL.iter().map(|l| l.to_string()).collect(),
            Self::Subtype => Subtype::ALL.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn class_of(self, label: Label, subtype: Subtype) -> usize {
        match self {
            Self::Label => label.index(),
            Self::Subtype => subtype.index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub model_id: String,
    pub magnification: Option<Magnification>,
    pub classes: Vec<String>,
    pub model: HeadModel,
}

impl Snapshot {
    pub fn new(
        model_id: impl Into<String>,
        magnification: Option<Magnification>,
        model: HeadModel,
    ) -> Result<Self> {
        let scheme = ClassScheme::from_classes(model.config.classes)?;
        Ok(Self {
            format: FORMAT.into(),
            version: VERSION,
            model_id: model_id.into(),
            magnification,
            classes: scheme.names(),
            model,
        })
    }

    pub fn scheme(&self) -> Result<ClassScheme> {
        ClassScheme::from_classes(self.model.config.classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("snapshot serializes");
        std::fs::write(path, json).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(Error::io(path))?;
        let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        let bad = |message: String| Error::Parse {
            path: path.into(),
            line: 0,
            message,
        };
        if snap.format != FORMAT || snap.version != VERSION {
            return Err(bad(format!(
                "unsupported snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        let scheme = snap.scheme().map_err(|e| bad(e.to_string()))?;
        if snap.classes != scheme.names() {
            return Err(bad("class names do not match the class count".into()));
        }
        Ok(snap)
    }
}

/// `*.json` snapshots of a directory keyed by model id.
pub fn load_model_dir(dir: &Path) -> Result<BTreeMap<String, Snapshot>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for path in files {
        let snap = Snapshot::load(&path)?;
        if out.contains_key(&snap.model_id) {
            return Err(Error::Config(format!(
                "model id {:?} is used twice in {}",
                snap.model_id,
                dir.display()
            )));
        }
        out.insert(snap.model_id.clone(), snap);
    }
    Ok(out)
}

/// Features for every record of the manifest, in manifest order.
pub fn feature_set(
    manifest: &DatasetManifest,
    features: &BTreeMap<String, Tensor>,
    scheme: ClassScheme,
) -> Result<FeatureSet> {
    let first = manifest.records().first().ok_or(Error::Classifier(
        prediag_core::classifier::ClassifierError::EmptyManifest,
    ))?;
    let shape = features
        .get(&first.id)
        .ok_or_else(|| Error::MissingFeatures(first.id.clone()))?
        .shape()
        .to_vec();
    let mut set = FeatureSet::new(shape);
    for r in manifest.records() {
        let t = features
            .get(&r.id)
            .ok_or_else(|| Error::MissingFeatures(r.id.clone()))?;
        set.push(t, scheme.class_of(r.label, r.subtype), Some(r.subtype))?;
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub head: HeadKind,
    pub magnification: Magnification,
    pub scheme: ClassScheme,
    pub train_fraction: f64,
    /// Share of the training split held out for early stopping.
    pub validation_fraction: f64,
    pub conv_width: Option<usize>,
    pub hyper: TrainHyper,
    pub seed: u64,
}

impl TrainOptions {
    pub fn new(head: HeadKind, magnification: Magnification, seed: u64) -> Self {
        Self {
            head,
            magnification,
            scheme: ClassScheme::Label,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            conv_width: None,
            hyper: TrainHyper::default(),
            seed,
        }
    }

    pub fn default_model_id(&self) -> String {
        format!("{}-{}", self.head.name(), self.magnification).to_lowercase()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HeadModel,
    pub report: TrainReport,
    pub test_manifest: DatasetManifest,
}

/// Split the chosen magnification 70/30, hold out part of the training
/// share for validation, train, then score the test share.
pub fn train_classifier(
    manifest: &DatasetManifest,
    features: &BTreeMap<String, Tensor>,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let subset = manifest.at_magnification(opts.magnification);
    let (train_m, test_m) = split_dataset(&subset, opts.train_fraction, opts.seed)?;
    let (fit_m, val_m) = split_dataset(
        &train_m,
        1.0 - opts.validation_fraction,
        opts.seed.wrapping_add(1),
    )?;
    let fit = feature_set(&fit_m, features, opts.scheme)?;
    let val = feature_set(&val_m, features, opts.scheme)?;
    let test = feature_set(&test_m, features, opts.scheme)?;
    let mut config = HeadConfig::new(
        opts.head,
        fit.sample_shape().to_vec(),
        opts.scheme.classes(),
    );
    config.conv_width = opts.conv_width;
    let mut model = build_head(&config, opts.seed)?;
    let mut report = train_head(&mut model, &fit, &val, &opts.hyper, opts.seed)?;
    report.test_accuracy = Some(evaluate_accuracy(&model, &test)?);
    report.per_class = Some(per_class_accuracy(&model, &test)?);
    Ok(TrainOutcome {
        model,
        report,
        test_manifest: test_m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub model_id: String,
    pub head: HeadKind,
    pub magnification: Option<Magnification>,
    pub samples: usize,
    pub accuracy: f64,
    pub per_class: SubtypeAccuracy,
    pub confusion: ConfusionMatrix,
}

/// Score a snapshot on the manifest records at its magnification (all
/// records when the snapshot has none).
pub fn evaluate_classifier(
    snap: &Snapshot,
    manifest: &DatasetManifest,
    features: &BTreeMap<String, Tensor>,
) -> Result<Evaluation> {
    let subset = match snap.magnification {
        Some(m) => manifest.at_magnification(m),
        None => manifest.clone(),
    };
    let set = feature_set(&subset, features, snap.scheme()?)?;
    let predicted = predict(&snap.model, &set)?;
    let confusion =
        ConfusionMatrix::from_predictions(snap.model.config.classes, set.labels(), &predicted)?;
    Ok(Evaluation {
        model_id: snap.model_id.clone(),
        head: snap.model.kind(),
        magnification: snap.magnification,
        samples: set.len(),
        accuracy: confusion.accuracy()?,
        per_class: prediag_core::classifier::subtype_accuracy(
            &predicted,
            set.labels(),
            set.subtypes(),
        ),
        confusion,
    })
}

fn mag_name(m: Option<Magnification>) -> String {
    m.map_or_else(|| "all".into(), |m| m.to_string())
}

/// Accuracy row: `model,magnification,accuracy` with accuracy in percent.
pub fn accuracy_table(rows: &[(HeadKind, Option<Magnification>, f64)]) -> String {
    let mut out = String::from("model,magnification,accuracy\n");
    for (head, mag, acc) in rows {
        let _ = writeln!(out, "{head},{},{:.1}", mag_name(*mag), acc * 100.0);
    }
    out
}

/// Per-subtype rows in percent; `NA` where a subtype had no samples.
pub fn subtype_table(rows: &[(HeadKind, Option<Magnification>, &SubtypeAccuracy)]) -> String {
    let mut out = String::from("model,magnification");
    for s in Subtype::ALL {
        let _ = write!(out, ",{s}");
    }
    out.push('\n');
    for (head, mag, table) in rows {
        let _ = write!(out, "{head},{}", mag_name(*mag));
        for s in Subtype::ALL {
            match table.get(s) {
                Some(v) => {
                    let _ = write!(out, ",{:.1}", v * 100.0);
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    pub subtype: Option<Subtype>,
    /// Probability per class name.
    pub confidence: BTreeMap<String, f64>,
}

/// Classify one `[H, W, C]` feature map.
pub fn predict_one(snap: &Snapshot, features: &Tensor) -> Result<Prediction> {
    let mut shape = vec![1];
    shape.extend_from_slice(features.shape());
    let batch = features
        .clone()
        .reshape(shape)
        .map_err(prediag_core::classifier::ClassifierError::from)?;
    let probs = snap.model.probabilities(&batch)?.remove(0);
    let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
    let (label, subtype) = match snap.scheme()? {
        ClassScheme::Label => (Label::from_index(best).expect("two classes"), None),
        ClassScheme::Subtype => {
            let s = Subtype::from_index(best).expect("eight classes");
            (s.label(), Some(s))
        }
    };
    let confidence = snap.classes.iter().cloned().zip(probs).collect();
    Ok(Prediction {
        label,
        subtype,
        confidence,
    })
}

/// Synthetic features for every manifest record. Records of the same
/// class (label or subtype) share a Gaussian mean.
pub fn synthetic_features(
    manifest: &DatasetManifest,
    scheme: ClassScheme,
    sample_shape: &[usize],
    separation: f64,
    seed: u64,
) -> Result<Vec<(String, Tensor)>> {
    let classes = scheme.classes();
    let mut per_class = vec![0usize; classes];
    for r in manifest.records() {
        per_class[scheme.class_of(r.label, r.subtype)] += 1;
    }
    let most = per_class.iter().copied().max().unwrap_or(0);
    let pool = generate_synthetic_features(classes, most, sample_shape, separation, seed)?;
    let mut used = vec![0usize; classes];
    let mut out = Vec::with_capacity(manifest.len());
    for r in manifest.records() {
        let k = scheme.class_of(r.label, r.subtype);
        // the pool interleaves classes
        let i = used[k] * classes + k;
        used[k] += 1;
        let t = Tensor::new(sample_shape.to_vec(), pool.sample(i).to_vec())
            .map_err(prediag_core::classifier::ClassifierError::from)?;
        out.push((r.id.clone(), t));
    }
    Ok(out)
}
