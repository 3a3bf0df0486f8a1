//! Labeling P/R/F1, ROC AUC, and localization accuracy / false positives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::finding::{Finding, LabelSet};
use crate::labeler::{ReportLabels, Status};
use crate::localize::{iobb, iou, BBox};
use crate::num::Scalar;

/// Overlap thresholds swept for IoBB.
pub const IOBB_GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
/// Overlap thresholds swept for IoU.
pub const IOU_GRID: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];

#[derive(Clone, Debug, PartialEq)]
pub struct PrfRow {
    pub name: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfRow {
    pub fn from_counts(name: impl Into<String>, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2PR/(P+R) with the fractions cleared, so F1 is one rounding away
        // from the exact ratio
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        Self {
            name: name.into(),
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Per-class rows (target classes, then `Normal`) and a micro-averaged
/// `Total` over all of them.
#[derive(Clone, Debug, PartialEq)]
pub struct Prf1Result {
    pub rows: Vec<PrfRow>,
    pub total: PrfRow,
}

impl Prf1Result {
    pub fn row(&self, name: &str) -> Option<&PrfRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,tp,fp,fn,precision,recall,f1\n");
        for r in self.rows.iter().chain([&self.total]) {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{:.4}\n",
                r.name, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
            ));
        }
        out
    }
}

pub fn prf1(predicted: &[ReportLabels], gold: &[ReportLabels], label_set: LabelSet) -> Result<Prf1Result> {
    let index = |labels: &[ReportLabels]| -> Result<HashMap<String, ReportLabels>> {
        let mut map = HashMap::with_capacity(labels.len());
        for l in labels {
            if l.y.len() != label_set.len() {
                return Err(Error::LengthMismatch {
                    expected: label_set.len(),
                    got: l.y.len(),
                });
            }
            if map.insert(l.report_id.clone(), l.clone()).is_some() {
                return Err(Error::IdSetMismatch);
            }
        }
        Ok(map)
    };
    let pred = index(predicted)?;
    let gold_map = index(gold)?;
    if pred.len() != gold_map.len() || pred.keys().any(|k| !gold_map.contains_key(k)) {
        return Err(Error::IdSetMismatch);
    }

    let n = label_set.len();
    // one slot per class plus Normal
    let mut counts = vec![(0usize, 0usize, 0usize); n + 1];
    for (id, p) in &pred {
        let g = &gold_map[id];
        let mut flags: Vec<(bool, bool)> = (0..n).map(|i| (p.y[i] == 1, g.y[i] == 1)).collect();
        flags.push((p.status == Status::Normal, g.status == Status::Normal));
        for (slot, (pv, gv)) in counts.iter_mut().zip(flags) {
            match (pv, gv) {
                (true, true) => slot.0 += 1,
                (true, false) => slot.1 += 1,
                (false, true) => slot.2 += 1,
                (false, false) => {}
            }
        }
    }
    let names = label_set.classes().iter().map(|f| f.name()).chain(["Normal"]);
    let rows: Vec<PrfRow> = names
        .zip(&counts)
        .map(|(name, &(tp, fp, fn_))| PrfRow::from_counts(name, tp, fp, fn_))
        .collect();
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(Prf1Result {
        rows,
        total: PrfRow::from_counts("Total", tp, fp, fn_),
    })
}

fn check_scores<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((pos, neg))
}

fn sorted_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected"));
    order
}

/// Area under the ROC curve from the Mann-Whitney rank statistic with
/// midranks for ties.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    let (pos, neg) = check_scores(scores, labels)?;
    let order = sorted_order(scores);
    // twice the positive rank sum, kept integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share the midrank (i + j + 2) / 2
        let mid2 = (i + j + 2) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum2 += mid2 * tied_pos;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(T::from_u128(u2).unwrap() / T::from_u128(2 * p * n).unwrap())
}

/// ROC operating points `(fpr, tpr)` from the highest threshold down,
/// starting at `(0, 0)`.
pub fn roc_points<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order = sorted_order(scores);
    order.reverse();
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OverlapMode {
    IoU,
    IoBB,
}

impl OverlapMode {
    pub fn measure<T: Scalar>(self, gt: &BBox<T>, det: &BBox<T>) -> Result<T> {
        match self {
            OverlapMode::IoU => Ok(iou(gt, det)),
            OverlapMode::IoBB => iobb(gt, det),
        }
    }

    pub fn default_grid(self) -> &'static [f64] {
        match self {
            OverlapMode::IoU => &IOU_GRID,
            OverlapMode::IoBB => &IOBB_GRID,
        }
    }
}

impl fmt::Display for OverlapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapMode::IoU => "IoU",
            OverlapMode::IoBB => "IoBB",
        })
    }
}

impl FromStr for OverlapMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iou" => Ok(OverlapMode::IoU),
            "iobb" => Ok(OverlapMode::IoBB),
            other => Err(format!("unknown overlap mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassLoc {
    pub gt: usize,
    pub matched: usize,
    pub detections: usize,
    pub false_positives: usize,
    /// Matched ground-truth fraction; `None` when the class has no ground
    /// truth.
    pub acc: Option<f64>,
    pub afp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocEvalResult {
    pub mode: OverlapMode,
    pub threshold: f64,
    pub image_count: usize,
    pub per_class: BTreeMap<Finding, ClassLoc>,
}

/// One-to-one matching between ground truths and detections of one image
/// and class. Detections are visited in order of their best overlap
/// (descending) and each takes a free ground truth, or reroutes earlier
/// matches along an augmenting path when all its candidates are taken, so
/// the result is a maximum matching.
pub fn match_boxes<T: Scalar>(
    gts: &[&BBox<T>],
    dets: &[&BBox<T>],
    threshold: T,
    mode: OverlapMode,
) -> Result<Vec<Option<usize>>> {
    let mut overlap = vec![vec![T::zero(); gts.len()]; dets.len()];
    for (d, det) in dets.iter().enumerate() {
        for (g, gt) in gts.iter().enumerate() {
            overlap[d][g] = mode.measure(gt, det)?;
        }
    }
    let best = |d: usize| overlap[d].iter().copied().fold(T::neg_infinity(), T::max);
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| best(b).partial_cmp(&best(a)).unwrap().then(a.cmp(&b)));

    // candidate ground truths per detection, strongest first
    let cands: Vec<Vec<usize>> = (0..dets.len())
        .map(|d| {
            let mut c: Vec<usize> = (0..gts.len()).filter(|&g| overlap[d][g] > threshold).collect();
            c.sort_by(|&a, &b| overlap[d][b].partial_cmp(&overlap[d][a]).unwrap().then(a.cmp(&b)));
            c
        })
        .collect();

    fn augment(d: usize, cands: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &g in &cands[d] {
            if seen[g] {
                continue;
            }
            seen[g] = true;
            if owner[g].is_none_or(|other| augment(other, cands, owner, seen)) {
                owner[g] = Some(d);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; gts.len()];
    for &d in &order {
        let mut seen = vec![false; gts.len()];
        augment(d, &cands, &mut owner, &mut seen);
    }
    let mut assignment = vec![None; dets.len()];
    for (g, o) in owner.iter().enumerate() {
        if let Some(d) = o {
            assignment[*d] = Some(g);
        }
    }
    Ok(assignment)
}

/// Localization accuracy and average false positives per class at one
/// threshold. A detection matches a ground truth of the same image and class
/// when the chosen overlap measure exceeds `threshold`. AFP divides unmatched
/// detections by `image_count`, which defaults to the number of distinct
/// images among ground truths and detections.
pub fn localization_eval<T: Scalar>(
    detections: &[BBox<T>],
    gts: &[BBox<T>],
    threshold: f64,
    mode: OverlapMode,
    image_count: Option<usize>,
) -> Result<LocEvalResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let images: BTreeSet<&str> = gts
        .iter()
        .chain(detections)
        .map(|b| b.image_id.as_str())
        .collect();
    let image_count = image_count.unwrap_or(images.len());

    type Group<'a, T> = (Vec<&'a BBox<T>>, Vec<&'a BBox<T>>);
    let mut groups: BTreeMap<(&str, Finding), Group<'_, T>> = BTreeMap::new();
    for g in gts {
        groups.entry((g.image_id.as_str(), g.class)).or_default().0.push(g);
    }
    for d in detections {
        groups.entry((d.image_id.as_str(), d.class)).or_default().1.push(d);
    }

    let mut tallies: BTreeMap<Finding, (usize, usize, usize)> = BTreeMap::new();
    let t = T::of(threshold);
    for ((_, class), (g, d)) in &groups {
        let assignment = match_boxes(g, d, t, mode)?;
        let matched = assignment.iter().filter(|a| a.is_some()).count();
        let e = tallies.entry(*class).or_default();
        e.0 += g.len();
        e.1 += matched;
        e.2 += d.len();
    }

    let per_class = tallies
        .into_iter()
        .map(|(class, (gt, matched, dets))| {
            let false_positives = dets - matched;
            let afp = if image_count == 0 {
                0.0
            } else {
                false_positives as f64 / image_count as f64
            };
            let acc = (gt > 0).then(|| matched as f64 / gt as f64);
            (
                class,
                ClassLoc {
                    gt,
                    matched,
                    detections: dets,
                    false_positives,
                    acc,
                    afp,
                },
            )
        })
        .collect();
    Ok(LocEvalResult {
        mode,
        threshold,
        image_count,
        per_class,
    })
}

pub fn localization_sweep<T: Scalar>(
    detections: &[BBox<T>],
    gts: &[BBox<T>],
    mode: OverlapMode,
    grid: &[f64],
    image_count: Option<usize>,
) -> Result<Vec<LocEvalResult>> {
    grid.iter()
        .map(|&t| localization_eval(detections, gts, t, mode, image_count))
        .collect()
}

/// One block of `Acc` and `AFP` rows per threshold, one column per class.
pub fn write_loc_csv(results: &[LocEvalResult], label_set: LabelSet) -> String {
    let mut out = String::from("mode,T,metric");
    for f in label_set.classes() {
        out.push(',');
        out.push_str(f.name());
    }
    out.push('\n');
    for r in results {
        for metric in ["Acc", "AFP"] {
            out.push_str(&format!("{},{},{}", r.mode, r.threshold, metric));
            for f in label_set.classes() {
                out.push(',');
                let cell = r.per_class.get(f).and_then(|c| match metric {
                    "Acc" => c.acc,
                    _ => Some(c.afp),
                });
                match (metric, cell) {
                    (_, Some(v)) => out.push_str(&format!("{v:.4}")),
                    ("AFP", None) => out.push_str("0.0000"),
                    _ => {}
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(id: &str, y: &[u8], status: Status) -> ReportLabels {
        ReportLabels {
            report_id: id.into(),
            y: y.to_vec(),
            status,
        }
    }

    fn bx(img: &str, x: f64, y: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new(img, Finding::Atelectasis, x, y, w, h).unwrap()
    }

    #[test]
    fn perfect_agreement() {
        let g = vec![
            labels("a", &[1, 0, 0, 0, 0, 0, 0, 0], Status::TargetFindings),
            labels("b", &[0; 8], Status::Normal),
        ];
        let r = prf1(&g, &g, LabelSet::X8).unwrap();
        assert_eq!(r.total.f1, 1.0);
        assert_eq!(r.row("Atelectasis").unwrap().precision, 1.0);
        assert_eq!(r.row("Normal").unwrap().recall, 1.0);
        assert_eq!(r.rows.len(), 9);
    }

    #[test]
    fn missed_class() {
        let gold = vec![labels("a", &[1, 1, 0, 0, 0, 0, 0, 0], Status::TargetFindings)];
        let pred = vec![labels("a", &[1, 0, 0, 0, 0, 0, 0, 0], Status::TargetFindings)];
        let r = prf1(&pred, &gold, LabelSet::X8).unwrap();
        let a = r.row("Atelectasis").unwrap();
        assert_eq!((a.precision, a.recall), (1.0, 1.0));
        let c = r.row("Cardiomegaly").unwrap();
        assert_eq!((c.tp, c.fn_, c.recall, c.f1), (0, 1, 0.0, 0.0));
        assert_eq!((r.total.tp, r.total.fn_), (1, 1));
        let csv = r.to_csv();
        assert!(csv.lines().last().unwrap().starts_with("Total,1,0,1,"));
    }

    #[test]
    fn id_mismatch() {
        let a = vec![labels("a", &[0; 8], Status::Normal)];
        let b = vec![labels("b", &[0; 8], Status::Normal)];
        assert!(matches!(prf1(&a, &b, LabelSet::X8), Err(Error::IdSetMismatch)));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(roc_auc(&[0.9f64, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5f64; 4], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1f64, 0.9], &[1, 0]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.9f64, 0.8, 0.3], &[1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1f64, 0.2], &[1, 1]), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn roc_curve_ends() {
        let pts = roc_points(&[0.9f64, 0.8, 0.3], &[1, 0, 1]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn self_match() {
        let gts = vec![bx("i1", 0.0, 0.0, 10.0, 10.0), bx("i2", 5.0, 5.0, 20.0, 20.0)];
        for mode in [OverlapMode::IoU, OverlapMode::IoBB] {
            let r = localization_eval(&gts, &gts, 0.9, mode, None).unwrap();
            let c = &r.per_class[&Finding::Atelectasis];
            assert_eq!((c.acc, c.afp), (Some(1.0), 0.0));
        }
        let r = localization_eval(&[], &gts, 0.5, OverlapMode::IoU, None).unwrap();
        let c = &r.per_class[&Finding::Atelectasis];
        assert_eq!((c.acc, c.afp), (Some(0.0), 0.0));
    }

    #[test]
    fn two_image_fixture() {
        let gts = vec![bx("i1", 0.0, 0.0, 10.0, 10.0), bx("i2", 0.0, 0.0, 10.0, 10.0)];
        let dets = vec![bx("i1", 5.0, 0.0, 10.0, 10.0)];
        let r = localization_eval(&dets, &gts, 0.25, OverlapMode::IoBB, None).unwrap();
        let c = &r.per_class[&Finding::Atelectasis];
        assert_eq!((c.acc, c.afp), (Some(0.5), 0.0));
        let r = localization_eval(&dets, &gts, 0.5, OverlapMode::IoBB, None).unwrap();
        let c = &r.per_class[&Finding::Atelectasis];
        assert_eq!((c.acc, c.afp), (Some(0.0), 0.5));
    }

    #[test]
    fn augmenting_beats_plain_greedy() {
        // plain greedy gives det0 to gt0 and strands gt1
        let gt0 = bx("i", 0.0, 0.0, 10.0, 10.0);
        let gt1 = bx("i", 6.0, 0.0, 10.0, 10.0);
        let det0 = bx("i", 2.0, 0.0, 5.0, 5.0); // iobb: gt0 1.0, gt1 0.2
        let det1 = bx("i", 8.0, 0.0, 4.0, 4.0); // iobb: gt0 0.5, gt1 1.0
        let m = match_boxes(&[&gt0, &gt1], &[&det0, &det1], 0.1, OverlapMode::IoBB).unwrap();
        assert_eq!(m.iter().filter(|a| a.is_some()).count(), 2);
        let m = match_boxes(&[&gt0, &gt1], &[&det0], 0.1, OverlapMode::IoBB).unwrap();
        assert_eq!(m, vec![Some(0)]);
    }

    #[test]
    fn empty_ground_truth_class_has_no_acc() {
        let dets = vec![bx("i1", 0.0, 0.0, 1.0, 1.0)];
        let r = localization_eval(&dets, &[], 0.5, OverlapMode::IoU, Some(4)).unwrap();
        let c = &r.per_class[&Finding::Atelectasis];
        assert_eq!((c.acc, c.afp), (None, 0.25));
        assert!(localization_eval::<f64>(&[], &[], 1.0, OverlapMode::IoU, None).is_err());
    }

    #[test]
    fn loc_csv_layout() {
        let gts = vec![bx("i1", 0.0, 0.0, 10.0, 10.0)];
        let res = localization_sweep(&gts, &gts, OverlapMode::IoBB, &IOBB_GRID, None).unwrap();
        let csv = write_loc_csv(&res, LabelSet::X8);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * IOBB_GRID.len());
        assert!(lines[1].starts_with("IoBB,0.1,Acc,1.0000,,"));
        assert!(lines[2].starts_with("IoBB,0.1,AFP,0.0000,0.0000"));
    }
}
