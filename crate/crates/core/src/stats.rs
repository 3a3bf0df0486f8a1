//! Label counts, co-occurrence, and the patient-level data split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::finding::LabelSet;
use crate::labeler::{ReportLabels, Status};

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.7, 0.1, 0.2);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassCount {
    pub name: String,
    pub total: usize,
    pub overlap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelCounts {
    pub classes: Vec<ClassCount>,
    pub normal: usize,
}

impl LabelCounts {
    pub fn get(&self, name: &str) -> Option<&ClassCount> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Class rows, then a `Normal` row whose overlap is always 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,total,overlap\n");
        for c in &self.classes {
            out.push_str(&format!("{},{},{}\n", c.name, c.total, c.overlap));
        }
        out.push_str(&format!("Normal,{},0\n", self.normal));
        out
    }
}

fn check_width(labels: &[ReportLabels], label_set: LabelSet) -> Result<()> {
    match labels.iter().find(|l| l.y.len() != label_set.len()) {
        Some(l) => Err(Error::LengthMismatch {
            expected: label_set.len(),
            got: l.y.len(),
        }),
        None => Ok(()),
    }
}

pub fn label_counts(labels: &[ReportLabels], label_set: LabelSet) -> Result<LabelCounts> {
    check_width(labels, label_set)?;
    let n = label_set.len();
    let (totals, overlaps, normal) = labels.iter().fold(
        (vec![0usize; n], vec![0usize; n], 0usize),
        |(mut t, mut o, mut normal), l| {
            let multi = l.y.iter().filter(|&&v| v == 1).count() >= 2;
            for (c, &v) in l.y.iter().enumerate() {
                if v == 1 {
                    t[c] += 1;
                    if multi {
                        o[c] += 1;
                    }
                }
            }
            if l.status == Status::Normal {
                normal += 1;
            }
            (t, o, normal)
        },
    );
    let classes = label_set
        .classes()
        .iter()
        .enumerate()
        .map(|(c, f)| ClassCount {
            name: f.name().to_string(),
            total: totals[c],
            overlap: overlaps[c],
        })
        .collect();
    Ok(LabelCounts { classes, normal })
}

/// `m[a][b]` counts reports positive for both `a` and `b`; the diagonal
/// holds per-class totals.
pub fn cooccurrence_matrix(labels: &[ReportLabels], label_set: LabelSet) -> Result<Vec<Vec<usize>>> {
    check_width(labels, label_set)?;
    let n = label_set.len();
    let mut m = vec![vec![0usize; n]; n];
    for l in labels {
        let pos: Vec<usize> = (0..n).filter(|&c| l.y[c] == 1).collect();
        for &a in &pos {
            for &b in &pos {
                m[a][b] += 1;
            }
        }
    }
    Ok(m)
}

pub fn write_cooccurrence_csv(m: &[Vec<usize>], label_set: LabelSet) -> String {
    let names: Vec<&str> = label_set.classes().iter().map(|f| f.name()).collect();
    let mut out = format!("class,{}\n", names.join(","));
    for (name, row) in names.iter().zip(m) {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&format!("{},{}\n", name, cells.join(",")));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitAssignment {
    pub patients: BTreeMap<String, Partition>,
    pub images: BTreeMap<String, Partition>,
    pub seed: u64,
    pub fractions: (f64, f64, f64),
}

impl SplitAssignment {
    pub fn size(&self, p: Partition) -> usize {
        self.patients.values().filter(|&&v| v == p).count()
    }

    /// `patient_id<TAB>partition`, sorted by patient id.
    pub fn to_tsv(&self) -> String {
        self.patients
            .iter()
            .map(|(id, p)| format!("{id}\t{p}\n"))
            .collect()
    }
}

/// Seeded shuffle of the (sorted, deduplicated) patient ids, then a prefix
/// partition at the floors of the cumulative fractions.
pub fn patient_split(
    patients: &[(String, Vec<String>)],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitAssignment> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !f.is_finite() || *f <= 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions);
    }
    let mut ids: Vec<&str> = patients
        .iter()
        .map(|(p, _)| p.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len() as f64;
    // the epsilon keeps e.g. (0.7 + 0.1) * 10 from flooring to 7
    let cut1 = ((a * n) + 1e-9).floor() as usize;
    let cut2 = (((a + b) * n) + 1e-9).floor() as usize;
    let patient_map: BTreeMap<String, Partition> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let p = if i < cut1 {
                Partition::Train
            } else if i < cut2 {
                Partition::Val
            } else {
                Partition::Test
            };
            (id.to_string(), p)
        })
        .collect();
    let images = patients
        .iter()
        .flat_map(|(p, imgs)| {
            let part = patient_map[p];
            imgs.iter().map(move |i| (i.clone(), part))
        })
        .collect();
    Ok(SplitAssignment {
        patients: patient_map,
        images,
        seed,
        fractions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rl(id: &str, y: &[u8]) -> ReportLabels {
        let status = if y.contains(&1) {
            Status::TargetFindings
        } else {
            Status::Normal
        };
        ReportLabels {
            report_id: id.into(),
            y: y.to_vec(),
            status,
        }
    }

    fn fixture() -> Vec<ReportLabels> {
        vec![
            rl("r1", &[1, 0, 1, 0, 0, 0, 0, 0]),
            rl("r2", &[1, 0, 0, 0, 0, 0, 0, 0]),
            rl("r3", &[0, 1, 0, 0, 0, 0, 0, 0]),
            rl("r4", &[0; 8]),
            rl("r5", &[1, 1, 1, 0, 0, 0, 0, 0]),
        ]
    }

    #[test]
    fn counts_by_hand() {
        let c = label_counts(&fixture(), LabelSet::X8).unwrap();
        let ate = c.get("Atelectasis").unwrap();
        assert_eq!((ate.total, ate.overlap), (3, 2));
        let card = c.get("Cardiomegaly").unwrap();
        assert_eq!((card.total, card.overlap), (2, 1));
        assert_eq!(c.normal, 1);
        assert!(c.to_csv().ends_with("Normal,1,0\n"));
    }

    #[test]
    fn pair_counts() {
        let m = cooccurrence_matrix(&fixture(), LabelSet::X8).unwrap();
        assert_eq!(m[0][2], 2);
        assert_eq!(m[2][0], 2);
        assert_eq!(m[0][1], 1);
        assert_eq!(m[0][0], 3);
        let csv = write_cooccurrence_csv(&m, LabelSet::X8);
        assert!(csv.starts_with("class,Atelectasis,Cardiomegaly,"));
    }

    #[test]
    fn ten_patients() {
        let patients: Vec<(String, Vec<String>)> = (0..10)
            .map(|i| (format!("p{i}"), vec![format!("p{i}_a"), format!("p{i}_b")]))
            .collect();
        let s = patient_split(&patients, DEFAULT_FRACTIONS, 7).unwrap();
        assert_eq!(
            (s.size(Partition::Train), s.size(Partition::Val), s.size(Partition::Test)),
            (7, 1, 2)
        );
        assert_eq!(s, patient_split(&patients, DEFAULT_FRACTIONS, 7).unwrap());
        for (p, imgs) in &patients {
            for i in imgs {
                assert_eq!(s.images[i], s.patients[p]);
            }
        }
        assert!(matches!(patient_split(&[], DEFAULT_FRACTIONS, 7), Err(Error::EmptyCorpus)));
        assert!(matches!(
            patient_split(&patients, (0.5, 0.1, 0.1), 7),
            Err(Error::InvalidFractions)
        ));
    }
}
