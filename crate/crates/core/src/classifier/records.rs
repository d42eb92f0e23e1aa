use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Magnification {
    X40,
    X100,
    X200,
    X400,
}

impl Magnification {
    pub const ALL: [Magnification; 4] = [
        Magnification::X40,
        Magnification::X100,
        Magnification::X200,
        Magnification::X400,
    ];

    pub fn factor(self) -> u32 {
        match self {
            Magnification::X40 => 40,
            Magnification::X100 => 100,
            Magnification::X200 => 200,
            Magnification::X400 => 400,
        }
    }
}

impl TryFrom<u32> for Magnification {
    type Error = ClassifierError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Self::ALL
            .into_iter()
            .find(|m| m.factor() == v)
            .ok_or_else(|| ClassifierError::UnknownMagnification(v.to_string()))
    }
}

impl From<Magnification> for u32 {
    fn from(m: Magnification) -> u32 {
        m.factor()
    }
}

impl fmt::Display for Magnification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}X", self.factor())
    }
}

/// Accepts `40`, `40X` or `40x`.
impl FromStr for Magnification {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_suffix(['X', 'x']).unwrap_or(t);
        digits
            .parse::<u32>()
            .ok()
            .and_then(|v| Self::try_from(v).ok())
            .ok_or_else(|| ClassifierError::UnknownMagnification(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malignant];

    /// Class index used by binary heads.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Malignant => "malignant",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" | "b" => Ok(Label::Benign),
            "malignant" | "m" => Ok(Label::Malignant),
            _ => Err(ClassifierError::UnknownLabel(s.to_string())),
        }
    }
}

/// Tumour subtypes; the first four are benign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtype {
    A,
    F,
    PT,
    TA,
    DC,
    LC,
    MC,
    PC,
}

impl Subtype {
    pub const ALL: [Subtype; 8] = [
        Subtype::A,
        Subtype::F,
        Subtype::PT,
        Subtype::TA,
        Subtype::DC,
        Subtype::LC,
        Subtype::MC,
        Subtype::PC,
    ];

    pub fn label(self) -> Label {
        if (self as usize) < 4 {
            Label::Benign
        } else {
            Label::Malignant
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Subtype> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Subtype::A => "A",
            Subtype::F => "F",
            Subtype::PT => "PT",
            Subtype::TA => "TA",
            Subtype::DC => "DC",
            Subtype::LC => "LC",
            Subtype::MC => "MC",
            Subtype::PC => "PC",
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Subtype {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|st| st.code().eq_ignore_ascii_case(t))
            .ok_or_else(|| ClassifierError::UnknownSubtype(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct BreakhisRecord {
    /// Feature file or image identifier.
    pub id: String,
    pub magnification: Magnification,
    pub label: Label,
    pub subtype: Subtype,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    magnification: Magnification,
    label: Label,
    subtype: Subtype,
}

impl TryFrom<RawRecord> for BreakhisRecord {
    type Error = ClassifierError;

    fn try_from(r: RawRecord) -> Result<Self, Self::Error> {
        BreakhisRecord::new(r.id, r.magnification, r.label, r.subtype)
    }
}

impl BreakhisRecord {
    pub fn new(
        id: impl Into<String>,
        magnification: Magnification,
        label: Label,
        subtype: Subtype,
    ) -> Result<Self, ClassifierError> {
        if subtype.label() != label {
            return Err(ClassifierError::SubtypeLabelMismatch { subtype, label });
        }
        Ok(Self {
            id: id.into(),
            magnification,
            label,
            subtype,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    records: Vec<BreakhisRecord>,
}

impl DatasetManifest {
    pub fn new(records: Vec<BreakhisRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[BreakhisRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<BreakhisRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<(Magnification, Label), usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.magnification, r.label)).or_insert(0) += 1;
        }
        out
    }

    pub fn count(&self, magnification: Magnification, label: Label) -> usize {
        self.records
            .iter()
            .filter(|r| r.magnification == magnification && r.label == label)
            .count()
    }

    pub fn total_at(&self, magnification: Magnification) -> usize {
        self.records
            .iter()
            .filter(|r| r.magnification == magnification)
            .count()
    }

    pub fn at_magnification(&self, magnification: Magnification) -> DatasetManifest {
        Self::new(
            self.records
                .iter()
                .filter(|r| r.magnification == magnification)
                .cloned()
                .collect(),
        )
    }
}

/// Benign and malignant image counts per magnification.
pub const TABLE_COUNTS: [(Magnification, usize, usize); 4] = [
    (Magnification::X40, 625, 1370),
    (Magnification::X100, 644, 1437),
    (Magnification::X200, 623, 1390),
    (Magnification::X400, 588, 1232),
];

// Per-subtype image counts of the public dataset release, in
// A, F, PT, TA, DC, LC, MC, PC order.
const SUBTYPE_COUNTS: [(Magnification, [usize; 8]); 4] = [
    (Magnification::X40, [114, 253, 109, 149, 864, 156, 205, 145]),
    (
        Magnification::X100,
        [113, 260, 121, 150, 903, 170, 222, 142],
    ),
    (
        Magnification::X200,
        [111, 264, 108, 140, 896, 163, 196, 135],
    ),
    (
        Magnification::X400,
        [106, 237, 115, 130, 788, 137, 169, 138],
    ),
];

/// Full-size manifest with synthetic identifiers such as `B_TA-40-0007`.
pub fn canonical_manifest() -> DatasetManifest {
    let mut records = Vec::new();
    for (mag, counts) in SUBTYPE_COUNTS {
        for (subtype, n) in Subtype::ALL.into_iter().zip(counts) {
            let prefix = match subtype.label() {
                Label::Benign => 'B',
                Label::Malignant => 'M',
            };
            for i in 1..=n {
                let id = format!("{prefix}_{subtype}-{}-{i:04}", mag.factor());
                records.push(BreakhisRecord {
                    id,
                    magnification: mag,
                    label: subtype.label(),
                    subtype,
                });
            }
        }
    }
    DatasetManifest::new(records)
}

/// Seeded per-magnification split. Within each magnification the records
/// are shuffled and the first `floor(n * train_fraction)` go to training.
pub fn split_dataset(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest), ClassifierError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifierError::BadFraction(train_fraction));
    }
    if manifest.is_empty() {
        return Err(ClassifierError::EmptyManifest);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mag in Magnification::ALL {
        let mut subset: Vec<&BreakhisRecord> = manifest
            .records
            .iter()
            .filter(|r| r.magnification == mag)
            .collect();
        subset.shuffle(&mut rng);
        let cut = libm::floor(subset.len() as f64 * train_fraction) as usize;
        train.extend(subset[..cut].iter().map(|r| (*r).clone()));
        test.extend(subset[cut..].iter().map(|r| (*r).clone()));
    }
    Ok((DatasetManifest::new(train), DatasetManifest::new(test)))
}
