//! Heatmap thresholding into boxes, and box overlap measures.

use std::collections::VecDeque;
use std::path::Path;

use ndarray::Array2;

use crate::error::{read_file, Error, Result};
use crate::finding::Finding;
use crate::num::Scalar;

/// Default two-level thresholds on the `[0, 255]` normalized map.
pub const DEFAULT_THRESHOLDS: [u8; 2] = [60, 180];

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap<T> {
    pub image_id: String,
    pub class: Finding,
    /// Square `S x S` score grid, row-major with row 0 at the image top.
    pub grid: Array2<T>,
    /// Image side length in pixels.
    pub image_dim: T,
}

impl<T: Scalar> Heatmap<T> {
    pub fn new(image_id: impl Into<String>, class: Finding, grid: Array2<T>, image_dim: T) -> Result<Self> {
        let (r, c) = grid.dim();
        if r != c || r == 0 {
            return Err(Error::DimMismatch(format!("heatmap must be square and nonempty, got {r}x{c}")));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("heatmap"));
        }
        if !(image_dim > T::zero()) {
            return Err(Error::DimMismatch("image_dim must be positive".into()));
        }
        Ok(Self {
            image_id: image_id.into(),
            class,
            grid,
            image_dim,
        })
    }

    pub fn side(&self) -> usize {
        self.grid.dim().0
    }

    /// Pixels per grid cell.
    pub fn scale(&self) -> T {
        self.image_dim / T::of_usize(self.side())
    }
}

/// Axis-aligned box in image pixels; `(x, y)` is the top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct BBox<T> {
    pub image_id: String,
    pub class: Finding,
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(image_id: impl Into<String>, class: Finding, x: T, y: T, w: T, h: T) -> Result<Self> {
        if [x, y, w, h].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox("non-finite coordinate".into()));
        }
        if !(w > T::zero() && h > T::zero()) {
            return Err(Error::InvalidBox(format!("extent must be positive, got {w}x{h}")));
        }
        Ok(Self {
            image_id: image_id.into(),
            class,
            x,
            y,
            w,
            h,
        })
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn contains(&self, other: &BBox<T>) -> bool {
        self.x <= other.x && self.y <= other.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn intersection_area(&self, other: &BBox<T>) -> T {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw > T::zero() && ih > T::zero() {
            iw * ih
        } else {
            T::zero()
        }
    }
}

/// A generated box and the threshold that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection<T> {
    pub bbox: BBox<T>,
    pub threshold: u8,
}

/// Intersection over union.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union > T::zero() {
        inter / union
    } else {
        T::zero()
    }
}

/// Intersection over the detected box's area.
pub fn iobb<T: Scalar>(gt: &BBox<T>, det: &BBox<T>) -> Result<T> {
    let area = det.area();
    if !(area > T::zero()) {
        return Err(Error::ZeroAreaDetection);
    }
    Ok(gt.intersection_area(det) / area)
}

/// Linear map of the grid onto `[0, 255]`, rounded half up. A constant grid
/// maps to all zeros.
pub fn normalize_heatmap<T: Scalar>(h: &Heatmap<T>) -> Array2<u8> {
    let lo = h.grid.iter().copied().fold(T::infinity(), T::min);
    let hi = h.grid.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Array2::zeros(h.grid.dim());
    }
    let span = hi - lo;
    let full = T::of(255.0);
    let half = T::of(0.5);
    h.grid.mapv(|v| {
        let scaled = ((v - lo) / span * full + half).floor();
        scaled.max(T::zero()).min(full).to_u8().unwrap_or(0)
    })
}

/// 8-connected components of cells strictly above `t`, each sorted in
/// raster order. Regions are ordered by (min row, min col).
pub fn connected_regions(grid: &Array2<u8>, t: u8) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = grid.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut regions = Vec::new();
    for r0 in 0..rows {
        for c0 in 0..cols {
            if seen[(r0, c0)] || grid[(r0, c0)] <= t {
                continue;
            }
            seen[(r0, c0)] = true;
            let mut region = Vec::new();
            let mut queue = VecDeque::from([(r0, c0)]);
            while let Some((r, c)) = queue.pop_front() {
                region.push((r, c));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if !seen[(nr, nc)] && grid[(nr, nc)] > t {
                            seen[(nr, nc)] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            region.sort_unstable();
            regions.push(region);
        }
    }
    regions.sort_by_key(|reg| {
        let min_row = reg.iter().map(|p| p.0).min().unwrap();
        let min_col = reg.iter().map(|p| p.1).min().unwrap();
        (min_row, min_col)
    });
    regions
}

/// Inclusive grid extent `(row0, col0, row1, col1)` of a region.
pub fn region_extent(region: &[(usize, usize)]) -> (usize, usize, usize, usize) {
    let r0 = region.iter().map(|p| p.0).min().unwrap();
    let r1 = region.iter().map(|p| p.0).max().unwrap();
    let c0 = region.iter().map(|p| p.1).min().unwrap();
    let c1 = region.iter().map(|p| p.1).max().unwrap();
    (r0, c0, r1, c1)
}

/// Boxes around every connected region at each threshold, scaled to image
/// pixels and clipped to the image. Results from all thresholds are
/// concatenated in threshold order without merging.
pub fn boxes_from_heatmap<T: Scalar>(h: &Heatmap<T>, thresholds: &[u8]) -> Vec<Detection<T>> {
    let norm = normalize_heatmap(h);
    let f = h.scale();
    let clip = |v: T| v.max(T::zero()).min(h.image_dim);
    let mut out = Vec::new();
    for &t in thresholds {
        for region in connected_regions(&norm, t) {
            let (r0, c0, r1, c1) = region_extent(&region);
            let x = clip(T::of_usize(c0) * f);
            let y = clip(T::of_usize(r0) * f);
            let right = clip(T::of_usize(c1 + 1) * f);
            let bottom = clip(T::of_usize(r1 + 1) * f);
            let bbox = BBox {
                image_id: h.image_id.clone(),
                class: h.class,
                x,
                y,
                w: right - x,
                h: bottom - y,
            };
            out.push(Detection { bbox, threshold: t });
        }
    }
    out
}

fn parse_num<T: Scalar>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::of)
        .ok_or_else(|| Error::row(line, format!("bad {what} `{s}`")))
}

/// Heatmap blocks: `image_id<TAB>class<TAB>S<TAB>image_dim` followed by `S`
/// rows of `S` space-separated scores. Blank lines between blocks are
/// ignored.
pub fn parse_heatmaps<T: Scalar>(text: &str) -> Result<Vec<Heatmap<T>>> {
    let mut out = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    while let Some((line, header)) = lines.next() {
        let f: Vec<&str> = header.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::row(line, "heatmap header needs image_id, class, S, image_dim"));
        }
        let class: Finding = f[1].parse().map_err(|e: String| Error::row(line, e))?;
        let side: usize = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::row(line, "bad grid size"))?;
        let image_dim: T = parse_num(f[3], line, "image_dim")?;
        let mut values = Vec::with_capacity(side * side);
        for _ in 0..side {
            let (row_line, row) = lines
                .next()
                .ok_or_else(|| Error::row(line, "heatmap has too few rows"))?;
            let cells: Vec<T> = row
                .split_whitespace()
                .map(|v| parse_num(v, row_line, "score"))
                .collect::<Result<_>>()?;
            if cells.len() != side {
                return Err(Error::row(row_line, format!("expected {side} scores, found {}", cells.len())));
            }
            values.extend(cells);
        }
        let grid = Array2::from_shape_vec((side, side), values).map_err(|e| Error::row(line, e.to_string()))?;
        out.push(Heatmap::new(f[0].trim(), class, grid, image_dim).map_err(|e| Error::row(line, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_heatmaps<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Heatmap<T>>> {
    parse_heatmaps(&read_file(path.as_ref())?)
}

pub fn write_heatmap<T: Scalar>(h: &Heatmap<T>) -> String {
    let mut out = format!("{}\t{}\t{}\t{}\n", h.image_id, h.class, h.side(), h.image_dim);
    for row in h.grid.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Ground-truth rows `image_id<TAB>class<TAB>x<TAB>y<TAB>w<TAB>h`.
pub fn parse_boxes<T: Scalar>(text: &str) -> Result<Vec<BBox<T>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::row(line_no, "box row needs 6 fields"));
        }
        out.push(box_from_fields(&f, line_no)?);
    }
    Ok(out)
}

fn box_from_fields<T: Scalar>(f: &[&str], line: usize) -> Result<BBox<T>> {
    let class: Finding = f[1].parse().map_err(|e: String| Error::row(line, e))?;
    BBox::new(
        f[0].trim(),
        class,
        parse_num(f[2], line, "x")?,
        parse_num(f[3], line, "y")?,
        parse_num(f[4], line, "w")?,
        parse_num(f[5], line, "h")?,
    )
    .map_err(|e| Error::row(line, e.to_string()))
}

/// Detection rows: the box columns plus a trailing threshold.
pub fn parse_detections<T: Scalar>(text: &str) -> Result<Vec<Detection<T>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::row(line_no, "detection row needs 7 fields"));
        }
        let threshold: u8 = f[6]
            .trim()
            .parse()
            .map_err(|_| Error::row(line_no, "bad threshold"))?;
        out.push(Detection {
            bbox: box_from_fields(&f[..6], line_no)?,
            threshold,
        });
    }
    Ok(out)
}

pub fn load_boxes<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<BBox<T>>> {
    parse_boxes(&read_file(path.as_ref())?)
}

pub fn load_detections<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Detection<T>>> {
    parse_detections(&read_file(path.as_ref())?)
}

pub fn write_boxes<T: Scalar>(boxes: &[BBox<T>]) -> String {
    boxes
        .iter()
        .map(|b| format!("{}\t{}\t{}\t{}\t{}\t{}\n", b.image_id, b.class, b.x, b.y, b.w, b.h))
        .collect()
}

pub fn write_detections<T: Scalar>(dets: &[Detection<T>]) -> String {
    dets.iter()
        .map(|d| {
            let b = &d.bbox;
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                b.image_id, b.class, b.x, b.y, b.w, b.h, d.threshold
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new("img", Finding::Mass, x, y, w, h).unwrap()
    }

    fn heat(grid: Array2<f64>, dim: f64) -> Heatmap<f64> {
        Heatmap::new("img", Finding::Mass, grid, dim).unwrap()
    }

    #[test]
    fn overlap_cases() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 5.0, 5.0)), 0.0);
        assert_eq!(iou(&a, &b), 50.0 / 150.0);
        assert_eq!(iobb(&a, &b).unwrap(), 0.5);
        assert_eq!(iobb(&a, &bx(2.0, 2.0, 3.0, 3.0)).unwrap(), 1.0);
        assert_eq!(iobb(&a, &bx(20.0, 0.0, 3.0, 3.0)).unwrap(), 0.0);
        let mut zero = bx(0.0, 0.0, 1.0, 1.0);
        zero.w = 0.0;
        assert!(matches!(iobb(&a, &zero), Err(Error::ZeroAreaDetection)));
        assert!(BBox::new("i", Finding::Mass, 0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_heatmap(&heat(array![[0.0, 1.0], [1.0, 0.0]], 2.0)), array![[0u8, 255], [255, 0]]);
        assert_eq!(normalize_heatmap(&heat(Array2::from_elem((3, 3), 0.7), 3.0)), Array2::<u8>::zeros((3, 3)));
        let h = heat(array![[0.0, 0.5, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], 3.0);
        assert_eq!(normalize_heatmap(&h).row(0).to_vec(), vec![0, 128, 255]);
    }

    #[test]
    fn regions() {
        assert!(connected_regions(&Array2::zeros((4, 4)), 60).is_empty());
        let diag = array![[200u8, 0, 0], [0, 200, 0], [0, 0, 0]];
        assert_eq!(connected_regions(&diag, 60).len(), 1);
        let single = array![[0u8, 0], [0, 61]];
        assert_eq!(connected_regions(&single, 60), vec![vec![(1, 1)]]);
        assert!(connected_regions(&array![[60u8]], 60).is_empty());
        let two = array![[0u8, 0, 0, 255], [255, 0, 0, 0], [255, 0, 0, 0]];
        let regs = connected_regions(&two, 60);
        assert_eq!(regs, vec![vec![(0, 3)], vec![(1, 0), (2, 0)]]);
    }

    #[test]
    fn scaled_box() {
        let mut grid = Array2::zeros((32, 32));
        for r in 4..=6 {
            for c in 10..=12 {
                grid[(r, c)] = 1.0;
            }
        }
        let dets = boxes_from_heatmap(&heat(grid, 1024.0), &[180]);
        assert_eq!(dets.len(), 1);
        let b = &dets[0].bbox;
        assert_eq!((b.x, b.y, b.w, b.h), (320.0, 128.0, 96.0, 96.0));
        assert_eq!(dets[0].threshold, 180);
    }

    #[test]
    fn constant_heatmap_has_no_boxes() {
        let dets = boxes_from_heatmap(&heat(Array2::from_elem((8, 8), 3.0), 512.0), &DEFAULT_THRESHOLDS);
        assert!(dets.is_empty());
    }

    #[test]
    fn peak_boxes_contain_argmax() {
        let grid = Array2::from_shape_fn((16, 16), |(r, c)| {
            let (dr, dc) = (r as f64 - 9.0, c as f64 - 5.0);
            (-(dr * dr + dc * dc) / 8.0).exp()
        });
        let h = heat(grid, 1024.0);
        let dets = boxes_from_heatmap(&h, &DEFAULT_THRESHOLDS);
        assert!((1..=3).contains(&dets.len()));
        let cell = bx(5.0 * 64.0, 9.0 * 64.0, 64.0, 64.0);
        assert!(dets.iter().all(|d| d.bbox.contains(&cell)));
    }

    #[test]
    fn file_formats() {
        let text = "img1\tCardiomegaly\t2\t1024\n0 1\n0.5 0.25\n\nimg2\tMass\t1\t512\n3\n";
        let maps: Vec<Heatmap<f64>> = parse_heatmaps(text).unwrap();
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[0].grid[(1, 0)], 0.5);
        let again: Vec<Heatmap<f64>> = parse_heatmaps(&write_heatmap(&maps[0])).unwrap();
        assert_eq!(again[0], maps[0]);
        assert!(parse_heatmaps::<f64>("img\tMass\t2\t10\n1 2\n").is_err());

        let gts: Vec<BBox<f64>> = parse_boxes("00013118_008.png\tInfiltrate\t10\t20\t30.5\t40\n").unwrap();
        assert_eq!(gts[0].class, Finding::Infiltration);
        assert_eq!(parse_boxes::<f64>(&write_boxes(&gts)).unwrap(), gts);
        let dets = vec![Detection { bbox: gts[0].clone(), threshold: 60 }];
        assert_eq!(parse_detections::<f64>(&write_detections(&dets)).unwrap(), dets);
    }
}
