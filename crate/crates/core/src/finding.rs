//! Thoracic finding classes and the 8/14-class label configurations.

use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Finding {
    Atelectasis,
    Cardiomegaly,
    Effusion,
    Infiltration,
    Mass,
    Nodule,
    Pneumonia,
    Pneumothorax,
    Consolidation,
    Edema,
    Emphysema,
    Fibrosis,
    PleuralThickening,
    Hernia,
}

impl Finding {
    pub const ALL: [Finding; 14] = [
        Finding::Atelectasis,
        Finding::Cardiomegaly,
        Finding::Effusion,
        Finding::Infiltration,
        Finding::Mass,
        Finding::Nodule,
        Finding::Pneumonia,
        Finding::Pneumothorax,
        Finding::Consolidation,
        Finding::Edema,
        Finding::Emphysema,
        Finding::Fibrosis,
        Finding::PleuralThickening,
        Finding::Hernia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Finding::Atelectasis => "Atelectasis",
            Finding::Cardiomegaly => "Cardiomegaly",
            Finding::Effusion => "Effusion",
            Finding::Infiltration => "Infiltration",
            Finding::Mass => "Mass",
            Finding::Nodule => "Nodule",
            Finding::Pneumonia => "Pneumonia",
            Finding::Pneumothorax => "Pneumothorax",
            Finding::Consolidation => "Consolidation",
            Finding::Edema => "Edema",
            Finding::Emphysema => "Emphysema",
            Finding::Fibrosis => "Fibrosis",
            Finding::PleuralThickening => "Pleural_Thickening",
            Finding::Hernia => "Hernia",
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Finding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().replace(' ', "_");
        // the published box annotations spell Infiltration as "Infiltrate"
        if key.eq_ignore_ascii_case("infiltrate") {
            return Ok(Finding::Infiltration);
        }
        Finding::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| format!("unknown finding class `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum LabelSet {
    #[default]
    X8,
    X14,
}

impl LabelSet {
    pub fn classes(self) -> &'static [Finding] {
        match self {
            LabelSet::X8 => &Finding::ALL[..8],
            LabelSet::X14 => &Finding::ALL[..],
        }
    }

    pub fn len(self) -> usize {
        self.classes().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index_of(self, finding: Finding) -> Option<usize> {
        self.classes().iter().position(|&f| f == finding)
    }

    pub fn contains(self, finding: Finding) -> bool {
        self.index_of(finding).is_some()
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSet::X8 => "x8",
            LabelSet::X14 => "x14",
        })
    }
}

impl FromStr for LabelSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x8" | "8" => Ok(LabelSet::X8),
            "x14" | "14" => Ok(LabelSet::X14),
            other => Err(format!("unknown label set `{other}`")),
        }
    }
}
