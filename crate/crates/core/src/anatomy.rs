//! Vertebral bounding boxes: AP/LP pairing, click hit-testing, disk-height
//! (IVDL) estimation from overlapping neighbours, trimming and L/R splitting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, ViewCalibration, ViewKind};

/// A single fluoroscopic image holds two to three whole vertebrae.
pub const MAX_VERTEBRAE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnatomyError {
    #[error("label {0} appears in only one view")]
    UnpairedLabel(VertebraLabel),
    #[error("{0} paired vertebrae exceed the limit of {MAX_VERTEBRAE}")]
    TooManyVertebrae(usize),
    #[error("label {label} appears twice in the {view} view")]
    DuplicateLabel { label: VertebraLabel, view: ViewKind },
    #[error("click hits no vertebra in the {0} view")]
    NoHit(ViewKind),
    #[error("boxes do not overlap vertically")]
    NoOverlap,
    #[error("boxes must come from the same view")]
    ViewMismatch,
    #[error("upper box must start above the lower box")]
    NotCraniocaudal,
    #[error("trim of {ivdl_px} px consumes a box {height_px} px tall")]
    DegenerateTrim { ivdl_px: f64, height_px: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertebraLabel {
    T12,
    L1,
    L2,
    L3,
    L4,
    L5,
    S1,
}

impl VertebraLabel {
    pub const ALL: [VertebraLabel; 7] = [
        VertebraLabel::T12,
        VertebraLabel::L1,
        VertebraLabel::L2,
        VertebraLabel::L3,
        VertebraLabel::L4,
        VertebraLabel::L5,
        VertebraLabel::S1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VertebraLabel::T12 => "T12",
            VertebraLabel::L1 => "L1",
            VertebraLabel::L2 => "L2",
            VertebraLabel::L3 => "L3",
            VertebraLabel::L4 => "L4",
            VertebraLabel::L5 => "L5",
            VertebraLabel::S1 => "S1",
        }
    }
}

impl fmt::Display for VertebraLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VertebraLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VertebraLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unsupported vertebra label `{s}`"))
    }
}

/// Which half of the AP box (and which pedicle) a screw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    /// -1 for left, +1 for right; multiplies mediolateral offsets from the box centre.
    pub fn sign(self) -> f64 {
        match self {
            Side::L => -1.0,
            Side::R => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::L => "L",
            Side::R => "R",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" | "l" => Ok(Side::L),
            "R" | "r" => Ok(Side::R),
            other => Err(format!("unknown side `{other}` (expected L or R)")),
        }
    }
}

fn default_confidence() -> f64 {
    1.0
}

/// Axis-aligned vertebra box in one view's pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub view: ViewKind,
    pub label: VertebraLabel,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl BBox2D {
    pub fn new(view: ViewKind, label: VertebraLabel, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { view, label, x_min, y_min, x_max, y_max, confidence: 1.0 }
    }

    pub fn validate(&self) -> Result<(), AnatomyError> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(AnatomyError::InvalidBox("coordinates must be finite".into()));
        }
        if !(self.x_min < self.x_max) {
            return Err(AnatomyError::InvalidBox(format!(
                "x_min {} must be below x_max {}",
                self.x_min, self.x_max
            )));
        }
        if !(self.y_min < self.y_max) {
            return Err(AnatomyError::InvalidBox(format!(
                "y_min {} must be below y_max {}",
                self.y_min, self.y_max
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(AnatomyError::InvalidBox(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// Inclusive of the boundary, with `tol` pixels of slack.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        p.u >= self.x_min - tol
            && p.u <= self.x_max + tol
            && p.v >= self.y_min - tol
            && p.v <= self.y_max + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertebraPair {
    pub label: VertebraLabel,
    pub ap_box: BBox2D,
    pub lp_box: BBox2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IvdlMode {
    Fixed,
    #[default]
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvdlPolicy {
    #[serde(default)]
    pub mode: IvdlMode,
    pub fixed_mm: f64,
}

impl IvdlPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fixed_mm.is_finite() && self.fixed_mm >= 0.0) {
            return Err(format!("fixed_mm must be finite and non-negative, got {}", self.fixed_mm));
        }
        Ok(())
    }
}

/// Pair AP and LP boxes by label, ordered cranial to caudal by AP `y_min`.
pub fn pair_views(boxes: &[BBox2D]) -> Result<Vec<VertebraPair>, AnatomyError> {
    let mut ap: BTreeMap<VertebraLabel, BBox2D> = BTreeMap::new();
    let mut lp: BTreeMap<VertebraLabel, BBox2D> = BTreeMap::new();
    for b in boxes {
        let slot = match b.view {
            ViewKind::Ap => &mut ap,
            ViewKind::Lp => &mut lp,
        };
        if slot.insert(b.label, *b).is_some() {
            return Err(AnatomyError::DuplicateLabel { label: b.label, view: b.view });
        }
    }
    if let Some(label) = ap
        .keys()
        .find(|l| !lp.contains_key(l))
        .or_else(|| lp.keys().find(|l| !ap.contains_key(l)))
    {
        return Err(AnatomyError::UnpairedLabel(*label));
    }
    if ap.len() > MAX_VERTEBRAE {
        return Err(AnatomyError::TooManyVertebrae(ap.len()));
    }
    let mut pairs: Vec<VertebraPair> = ap
        .into_iter()
        .map(|(label, ap_box)| VertebraPair { label, ap_box, lp_box: lp[&label] })
        .collect();
    // Stable on label order for equal y_min, so the result is input-order independent.
    pairs.sort_by(|a, b| a.ap_box.y_min.total_cmp(&b.ap_box.y_min));
    Ok(pairs)
}

/// Label of the box under `click`; overlapping hits resolve to the nearest box centre.
pub fn hit_test_vertebra(
    click: Point2,
    view: ViewKind,
    boxes: &[BBox2D],
) -> Result<VertebraLabel, AnatomyError> {
    boxes
        .iter()
        .filter(|b| b.view == view && b.contains(click, 0.0))
        .min_by(|a, b| {
            click
                .distance(a.center())
                .total_cmp(&click.distance(b.center()))
                .then(a.label.cmp(&b.label))
        })
        .map(|b| b.label)
        .ok_or(AnatomyError::NoHit(view))
}

/// Vertical overlap of two neighbouring boxes in millimetres.
pub fn ivdl_from_overlap(
    upper: &BBox2D,
    lower: &BBox2D,
    calib: &ViewCalibration,
) -> Result<f64, AnatomyError> {
    if upper.view != lower.view || upper.view != calib.view {
        return Err(AnatomyError::ViewMismatch);
    }
    if !(upper.y_min < lower.y_min) {
        return Err(AnatomyError::NotCraniocaudal);
    }
    // Interval intersection; equals upper.y_max - lower.y_min unless `lower` is nested.
    let overlap_px = upper.y_max.min(lower.y_max) - lower.y_min;
    if overlap_px <= 0.0 {
        return Err(AnatomyError::NoOverlap);
    }
    Ok(overlap_px * calib.mm_per_px_v)
}

pub fn trim_box(b: &BBox2D, ivdl_px: f64) -> Result<BBox2D, AnatomyError> {
    if !(ivdl_px.is_finite() && ivdl_px >= 0.0) || 2.0 * ivdl_px >= b.height() {
        return Err(AnatomyError::DegenerateTrim { ivdl_px, height_px: b.height() });
    }
    Ok(BBox2D { y_min: b.y_min + ivdl_px, y_max: b.y_max - ivdl_px, ..*b })
}

pub fn split_half(ap_box: &BBox2D, side: Side) -> BBox2D {
    let x_center = (ap_box.x_min + ap_box.x_max) / 2.0;
    match side {
        Side::L => BBox2D { x_max: x_center, ..*ap_box },
        Side::R => BBox2D { x_min: x_center, ..*ap_box },
    }
}

/// Result of resolving the disk height for one vertebra.
#[derive(Debug, Clone, PartialEq)]
pub struct IvdlEstimate {
    pub ivdl_mm: f64,
    /// Set when overlap estimation was requested but fell back to `fixed_mm`.
    pub fallback_reason: Option<String>,
}

/// Disk height for `label` under `policy`, using the AP boxes of `pairs`
/// (sorted cranio-caudally). With two neighbours the overlaps are averaged.
pub fn resolve_ivdl(
    pairs: &[VertebraPair],
    label: VertebraLabel,
    policy: &IvdlPolicy,
    ap_calib: &ViewCalibration,
) -> IvdlEstimate {
    let fixed = |reason: Option<String>| IvdlEstimate { ivdl_mm: policy.fixed_mm, fallback_reason: reason };
    if policy.mode == IvdlMode::Fixed {
        return fixed(None);
    }
    let Some(i) = pairs.iter().position(|p| p.label == label) else {
        return fixed(Some(format!("{label} is not a paired vertebra")));
    };
    let mut overlaps = Vec::with_capacity(2);
    if i > 0 {
        if let Ok(mm) = ivdl_from_overlap(&pairs[i - 1].ap_box, &pairs[i].ap_box, ap_calib) {
            overlaps.push(mm);
        }
    }
    if let Some(next) = pairs.get(i + 1) {
        if let Ok(mm) = ivdl_from_overlap(&pairs[i].ap_box, &next.ap_box, ap_calib) {
            overlaps.push(mm);
        }
    }
    if overlaps.is_empty() {
        return fixed(Some(format!("no overlapping neighbour box for {label}")));
    }
    IvdlEstimate {
        ivdl_mm: overlaps.iter().sum::<f64>() / overlaps.len() as f64,
        fallback_reason: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use VertebraLabel::*;

    fn ap(label: VertebraLabel, y0: f64, y1: f64) -> BBox2D {
        BBox2D::new(ViewKind::Ap, label, 100.0, y0, 180.0, y1)
    }

    fn lp(label: VertebraLabel, y0: f64, y1: f64) -> BBox2D {
        BBox2D::new(ViewKind::Lp, label, 200.0, y0, 280.0, y1)
    }

    fn calib(scale: f64) -> ViewCalibration {
        ViewCalibration { mm_per_px_v: scale, ..ViewCalibration::identity(ViewKind::Ap, [512, 512]) }
    }

    #[test]
    fn pairs_l4_l5() {
        let boxes = [lp(L5, 90.0, 200.0), ap(L5, 90.0, 200.0), ap(L4, 0.0, 100.0), lp(L4, 0.0, 100.0)];
        let pairs = pair_views(&boxes).unwrap();
        assert_eq!(pairs.iter().map(|p| p.label).collect::<Vec<_>>(), vec![L4, L5]);
    }

    #[test]
    fn unpaired_labels() {
        let err = pair_views(&[ap(L4, 0.0, 50.0), lp(L5, 0.0, 50.0)]).unwrap_err();
        assert!(matches!(err, AnatomyError::UnpairedLabel(L4 | L5)));
    }

    #[test]
    fn too_many_vertebrae() {
        let boxes: Vec<_> = [L3, L4, L5, S1]
            .into_iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let y = i as f64 * 50.0;
                [ap(l, y, y + 60.0), lp(l, y, y + 60.0)]
            })
            .collect();
        assert_eq!(pair_views(&boxes), Err(AnatomyError::TooManyVertebrae(4)));
    }

    #[test]
    fn duplicate_label() {
        let err = pair_views(&[ap(L4, 0.0, 50.0), ap(L4, 60.0, 90.0)]).unwrap_err();
        assert_eq!(err, AnatomyError::DuplicateLabel { label: L4, view: ViewKind::Ap });
    }

    #[test]
    fn hit_tests() {
        let l4 = BBox2D::new(ViewKind::Ap, L4, 100.0, 50.0, 180.0, 110.0);
        assert_eq!(hit_test_vertebra(Point2::new(140.0, 80.0), ViewKind::Ap, &[l4]), Ok(L4));
        assert_eq!(
            hit_test_vertebra(Point2::new(0.0, 0.0), ViewKind::Ap, &[l4]),
            Err(AnatomyError::NoHit(ViewKind::Ap))
        );
        // Wrong view never hits.
        assert!(hit_test_vertebra(Point2::new(140.0, 80.0), ViewKind::Lp, &[l4]).is_err());
    }

    #[test]
    fn shared_corner_goes_to_nearer_centre() {
        // Touching at (180, 110): L4 centre is (140, 80), L5 centre is (200, 120).
        let l4 = BBox2D::new(ViewKind::Ap, L4, 100.0, 50.0, 180.0, 110.0);
        let l5 = BBox2D::new(ViewKind::Ap, L5, 180.0, 110.0, 220.0, 130.0);
        assert_eq!(hit_test_vertebra(Point2::new(180.0, 110.0), ViewKind::Ap, &[l4, l5]), Ok(L5));
        assert_eq!(hit_test_vertebra(Point2::new(180.0, 110.0), ViewKind::Ap, &[l5, l4]), Ok(L5));
    }

    #[test]
    fn ivdl_examples() {
        assert_eq!(ivdl_from_overlap(&ap(L4, 0.0, 100.0), &ap(L5, 90.0, 200.0), &calib(1.0)), Ok(10.0));
        assert_eq!(
            ivdl_from_overlap(&ap(L4, 0.0, 100.0), &ap(L5, 100.0, 200.0), &calib(1.0)),
            Err(AnatomyError::NoOverlap)
        );
        assert_eq!(ivdl_from_overlap(&ap(L4, 0.0, 100.0), &ap(L5, 92.0, 200.0), &calib(0.5)), Ok(4.0));
        assert_eq!(
            ivdl_from_overlap(&ap(L5, 90.0, 200.0), &ap(L4, 0.0, 100.0), &calib(1.0)),
            Err(AnatomyError::NotCraniocaudal)
        );
        assert_eq!(
            ivdl_from_overlap(&ap(L4, 0.0, 100.0), &lp(L5, 90.0, 200.0), &calib(1.0)),
            Err(AnatomyError::ViewMismatch)
        );
    }

    #[test]
    fn trim_examples() {
        let b = BBox2D::new(ViewKind::Ap, L4, 100.0, 50.0, 180.0, 110.0);
        let t = trim_box(&b, 8.0).unwrap();
        assert_eq!((t.x_min, t.y_min, t.x_max, t.y_max), (100.0, 58.0, 180.0, 102.0));
        assert_eq!(trim_box(&b, 0.0).unwrap(), b);
        assert!(matches!(trim_box(&b, 30.0), Err(AnatomyError::DegenerateTrim { .. })));
        assert!(trim_box(&b, -1.0).is_err());
    }

    #[test]
    fn split_examples() {
        let b = BBox2D::new(ViewKind::Ap, L4, 100.0, 50.0, 180.0, 110.0);
        let l = split_half(&b, Side::L);
        let r = split_half(&b, Side::R);
        assert_eq!((l.x_min, l.y_min, l.x_max, l.y_max), (100.0, 50.0, 140.0, 110.0));
        assert_eq!((r.x_min, r.y_min, r.x_max, r.y_max), (140.0, 50.0, 180.0, 110.0));
        assert_eq!(l.x_max, r.x_min);
        assert_eq!((l.x_min, r.x_max), (b.x_min, b.x_max));
    }

    #[test]
    fn resolve_ivdl_policies() {
        let pairs = pair_views(&[
            ap(L3, 0.0, 100.0),
            lp(L3, 0.0, 100.0),
            ap(L4, 90.0, 200.0),
            lp(L4, 90.0, 200.0),
            ap(L5, 194.0, 300.0),
            lp(L5, 194.0, 300.0),
        ])
        .unwrap();
        let overlap = IvdlPolicy { mode: IvdlMode::Overlap, fixed_mm: 7.0 };
        let c = calib(1.0);
        assert_eq!(resolve_ivdl(&pairs, L3, &overlap, &c).ivdl_mm, 10.0);
        assert_eq!(resolve_ivdl(&pairs, L4, &overlap, &c).ivdl_mm, 8.0);
        assert_eq!(resolve_ivdl(&pairs, L5, &overlap, &c).ivdl_mm, 6.0);
        let fixed = IvdlPolicy { mode: IvdlMode::Fixed, fixed_mm: 7.0 };
        assert_eq!(resolve_ivdl(&pairs, L4, &fixed, &c), IvdlEstimate { ivdl_mm: 7.0, fallback_reason: None });

        let single = pair_views(&[ap(L4, 0.0, 100.0), lp(L4, 0.0, 100.0)]).unwrap();
        let est = resolve_ivdl(&single, L4, &overlap, &c);
        assert_eq!(est.ivdl_mm, 7.0);
        assert!(est.fallback_reason.is_some());
    }

    #[test]
    fn label_parsing() {
        assert_eq!("l4".parse::<VertebraLabel>(), Ok(L4));
        assert_eq!("T12".parse::<VertebraLabel>(), Ok(T12));
        assert!("L6".parse::<VertebraLabel>().is_err());
        assert_eq!(serde_json::to_string(&S1).unwrap(), "\"S1\"");
    }

    /// Count unit pixel rows covered by both integer intervals.
    fn brute_overlap(a: (i32, i32), b: (i32, i32)) -> i32 {
        (a.0.min(b.0)..a.1.max(b.1)).filter(|&k| k >= a.0 && k < a.1 && k >= b.0 && k < b.1).count() as i32
    }

    proptest! {
        #[test]
        fn ivdl_matches_brute_force(
            a0 in 0i32..200, ah in 1i32..150, b0 in 0i32..200, bh in 1i32..150,
        ) {
            prop_assume!(a0 < b0);
            let upper = ap(L4, a0 as f64, (a0 + ah) as f64);
            let lower = ap(L5, b0 as f64, (b0 + bh) as f64);
            let expected = brute_overlap((a0, a0 + ah), (b0, b0 + bh));
            match ivdl_from_overlap(&upper, &lower, &calib(1.0)) {
                Ok(mm) => prop_assert_eq!(mm, expected as f64),
                Err(e) => {
                    prop_assert_eq!(e, AnatomyError::NoOverlap);
                    prop_assert_eq!(expected, 0);
                }
            }
        }

        #[test]
        fn split_partitions(x0 in -500.0f64..500.0, w in 1.0f64..300.0) {
            let b = BBox2D::new(ViewKind::Ap, L4, x0, 0.0, x0 + w, 40.0);
            let (l, r) = (split_half(&b, Side::L), split_half(&b, Side::R));
            prop_assert_eq!(l.x_max, r.x_min);
            prop_assert!((l.width() - r.width()).abs() <= 1e-9);
            prop_assert_eq!((l.y_min, l.y_max, r.y_min, r.y_max), (b.y_min, b.y_max, b.y_min, b.y_max));
        }

        #[test]
        fn trim_is_monotone(h in 10.0f64..300.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let b = ap(L4, 0.0, h);
            let (small, large) = (t1.min(t2) * h / 2.0 * 0.99, t1.max(t2) * h / 2.0 * 0.99);
            prop_assume!(large > small);
            let outer = trim_box(&b, small).unwrap();
            let inner = trim_box(&b, large).unwrap();
            prop_assert!(inner.y_min > outer.y_min && inner.y_max < outer.y_max);
        }

        #[test]
        fn pairing_is_order_independent(seed in any::<u64>()) {
            let mut boxes = vec![
                ap(L3, 0.0, 100.0), lp(L3, 0.0, 100.0),
                ap(L4, 90.0, 200.0), lp(L4, 90.0, 200.0),
                ap(L5, 190.0, 300.0), lp(L5, 190.0, 300.0),
            ];
            let n = boxes.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                boxes.swap(i, (s >> 33) as usize % (i + 1));
            }
            let labels: Vec<_> = pair_views(&boxes).unwrap().iter().map(|p| p.label).collect();
            prop_assert_eq!(labels, vec![L3, L4, L5]);
        }
    }
}
