//! Synchronized AP/LP editing.
//!
//! Every 2D gesture is lifted onto the one [`Screw3D`]; both views are then
//! re-projected from it, so the shared craniocaudal coordinate can never drift
//! between panes. The discrepancy model reconciles the two views' readings of
//! that shared axis once, when a case is loaded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::{BBox2D, VertebraPair};
use crate::geometry::{backproject_point, CalibrationPair, Point2, ScrewProjection2D, ViewCalibration, ViewKind};
use crate::planning::{Endpoint, Screw3D};

/// Default endpoint grab radius in pixels.
pub const DEFAULT_GRAB_PX: f64 = 8.0;

/// Screws shorter than this are treated as zero-length.
const MIN_SCREW_LENGTH_MM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("edit collapses the screw to zero length")]
    DegenerateScrew,
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("at least two correspondences are required, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("all LP readings are equal; the fit is undetermined")]
    DegenerateFit,
    #[error("fitted gain {0} is not positive")]
    NonPositiveGain(f64),
}

/// A user gesture in one view's pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Translate { view: ViewKind, du_px: f64, dv_px: f64 },
    MoveEndpoint { view: ViewKind, endpoint: Endpoint, new_px: Point2 },
    Resize { new_radius_mm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitRegion {
    Body,
    TargetEndpoint,
    EntryEndpoint,
    None,
}

pub fn hit_test_screw(click: Point2, proj: &ScrewProjection2D, grab_px: f64) -> HitRegion {
    let dt = click.distance(proj.target_px);
    let de = click.distance(proj.entry_px);
    if dt <= grab_px || de <= grab_px {
        return if dt <= de { HitRegion::TargetEndpoint } else { HitRegion::EntryEndpoint };
    }
    if click.distance_to_segment(proj.target_px, proj.entry_px) <= proj.radius_px {
        HitRegion::Body
    } else {
        HitRegion::None
    }
}

/// Lift a 2D edit onto the 3D screw.
pub fn apply_edit(screw: &Screw3D, op: &EditOp, calibs: &CalibrationPair) -> Result<Screw3D, SyncError> {
    let mut out = *screw;
    match *op {
        EditOp::Translate { view, du_px, dv_px } => {
            if !(du_px.is_finite() && dv_px.is_finite()) {
                return Err(SyncError::InvalidEdit("translation must be finite".into()));
            }
            let calib = calibs.get(view);
            let horizontal = view.horizontal_axis();
            let dh = calib.du_to_world(du_px);
            let dz = calib.dv_to_world(dv_px);
            for p in [&mut out.target_c1, &mut out.entry_c2] {
                horizontal.set(p, horizontal.get(p) + dh);
                p.z += dz;
            }
        }
        EditOp::MoveEndpoint { view, endpoint, new_px } => {
            if !new_px.is_finite() {
                return Err(SyncError::InvalidEdit("endpoint position must be finite".into()));
            }
            let calib = calibs.get(view);
            let current = screw.endpoint(endpoint);
            let hidden = view.hidden_axis().get(&current);
            *out.endpoint_mut(endpoint) = backproject_point(new_px, calib, hidden);
        }
        EditOp::Resize { new_radius_mm } => {
            if !(new_radius_mm.is_finite() && new_radius_mm > 0.0) {
                return Err(SyncError::InvalidEdit(format!("radius must be positive, got {new_radius_mm}")));
            }
            out.radius = new_radius_mm;
        }
    }
    if out.length() <= MIN_SCREW_LENGTH_MM {
        return Err(SyncError::DegenerateScrew);
    }
    Ok(out)
}

/// Affine correction `z_ap = gain_a * z_lp + offset_b_mm` of LP craniocaudal readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyModel {
    pub gain_a: f64,
    pub offset_b_mm: f64,
}

impl DiscrepancyModel {
    pub const IDENTITY: DiscrepancyModel = DiscrepancyModel { gain_a: 1.0, offset_b_mm: 0.0 };

    pub fn correct(&self, z_lp: f64) -> f64 {
        self.gain_a * z_lp + self.offset_b_mm
    }
}

impl Default for DiscrepancyModel {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Least-squares line through `(z_ap, z_lp)` correspondences.
pub fn fit_discrepancy(correspondences: &[(f64, f64)]) -> Result<DiscrepancyModel, SyncError> {
    let n = correspondences.len();
    if n < 2 {
        return Err(SyncError::InsufficientCorrespondences(n));
    }
    let first_lp = correspondences[0].1;
    if correspondences.iter().all(|&(_, lp)| lp == first_lp) {
        return Err(SyncError::DegenerateFit);
    }
    let nf = n as f64;
    let mean_ap = correspondences.iter().map(|c| c.0).sum::<f64>() / nf;
    let mean_lp = correspondences.iter().map(|c| c.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(ap, lp) in correspondences {
        let dx = lp - mean_lp;
        sxy += dx * (ap - mean_ap);
        sxx += dx * dx;
    }
    let gain_a = sxy / sxx;
    if !(gain_a > 0.0) {
        return Err(SyncError::NonPositiveGain(gain_a));
    }
    Ok(DiscrepancyModel { gain_a, offset_b_mm: mean_ap - gain_a * mean_lp })
}

/// Matched top and bottom box edges of each vertebra, as world `(z_ap, z_lp)`.
pub fn edge_correspondences(pairs: &[VertebraPair], calibs: &CalibrationPair) -> Vec<(f64, f64)> {
    pairs
        .iter()
        .flat_map(|p| {
            [
                (calibs.ap.v_to_world(p.ap_box.y_min), calibs.lp.v_to_world(p.lp_box.y_min)),
                (calibs.ap.v_to_world(p.ap_box.y_max), calibs.lp.v_to_world(p.lp_box.y_max)),
            ]
        })
        .collect()
}

/// Rewrite the vertical bounds of LP boxes into the AP craniocaudal frame.
/// Non-LP boxes pass through untouched.
pub fn apply_discrepancy(model: &DiscrepancyModel, boxes: &[BBox2D], lp_calib: &ViewCalibration) -> Vec<BBox2D> {
    let fix = |v: f64| lp_calib.world_to_v(model.correct(lp_calib.v_to_world(v)));
    boxes
        .iter()
        .map(|b| match b.view {
            ViewKind::Lp => BBox2D { y_min: fix(b.y_min), y_max: fix(b.y_max), ..*b },
            ViewKind::Ap => *b,
        })
        .collect()
}
