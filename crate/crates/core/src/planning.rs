//! Screw initialization from a vertebra's AP/LP boxes, size reporting against
//! a screw catalog, and containment checks.
//!
//! The target point C1 sits near the midline and the anterior edge of the
//! body; the entry point C2 sits laterally near the posterior edge. Both are
//! inset from the box sides by fixed pads (millimetres) and kept clear of the
//! intervertebral disks above and below.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::{split_half, trim_box, AnatomyError, BBox2D, Side, VertebraLabel, VertebraPair};
use crate::geometry::{project_point, CalibrationPair, Point3};
use crate::warning::{Quantity, Warning};

/// Pixel slack for containment checks, absorbing round-off in the mm/px round trip.
const CONTAINMENT_TOL_PX: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error(transparent)]
    Anatomy(#[from] AnatomyError),
    #[error("pad {pad} = {value_mm} mm does not fit inside a {limit_mm} mm region")]
    PadTooLarge { pad: &'static str, value_mm: f64, limit_mm: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("screw endpoints coincide")]
    DegenerateScrew,
    #[error("planned {quantity:?} {raw_mm} mm is below the smallest catalog entry {catalog_min_mm} mm")]
    CatalogUnderflow { quantity: Quantity, raw_mm: f64, catalog_min_mm: f64 },
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Target,
    Entry,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endpoint::Target => "target",
            Endpoint::Entry => "entry",
        })
    }
}

/// The single 3D screw both views are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Screw3D {
    pub id: u64,
    pub label: VertebraLabel,
    pub side: Side,
    #[serde(rename = "target_c1_mm")]
    pub target_c1: Point3,
    #[serde(rename = "entry_c2_mm")]
    pub entry_c2: Point3,
    #[serde(rename = "radius_mm")]
    pub radius: f64,
}

impl Screw3D {
    pub fn endpoint(&self, which: Endpoint) -> Point3 {
        match which {
            Endpoint::Target => self.target_c1,
            Endpoint::Entry => self.entry_c2,
        }
    }

    pub fn endpoint_mut(&mut self, which: Endpoint) -> &mut Point3 {
        match which {
            Endpoint::Target => &mut self.target_c1,
            Endpoint::Entry => &mut self.entry_c2,
        }
    }

    pub fn length(&self) -> f64 {
        self.target_c1.distance(self.entry_c2)
    }

    pub fn validate(&self) -> Result<(), PlanningError> {
        if !(self.target_c1.is_finite() && self.entry_c2.is_finite()) {
            return Err(PlanningError::InvalidConfig("screw endpoints must be finite".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(PlanningError::InvalidConfig(format!(
                "screw radius must be positive, got {}",
                self.radius
            )));
        }
        if self.length() == 0.0 {
            return Err(PlanningError::DegenerateScrew);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZPolicy {
    /// Target at the trimmed top edge, entry at the trimmed bottom edge.
    #[default]
    Sloped,
    /// Both endpoints at mid-height: the screw is horizontal in the lateral view.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaddingConfig {
    pub pad_target_mm: f64,
    pub pad_entry_mm: f64,
    pub z_policy: ZPolicy,
    pub default_radius_mm: f64,
}

impl Default for PaddingConfig {
    fn default() -> Self {
        Self {
            pad_target_mm: 5.0,
            pad_entry_mm: 5.0,
            z_policy: ZPolicy::Sloped,
            default_radius_mm: 3.25,
        }
    }
}

impl PaddingConfig {
    pub fn validate(&self) -> Result<(), PlanningError> {
        for (name, v) in [("pad_target_mm", self.pad_target_mm), ("pad_entry_mm", self.pad_entry_mm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlanningError::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.default_radius_mm.is_finite() && self.default_radius_mm > 0.0) {
            return Err(PlanningError::InvalidConfig(format!(
                "default_radius_mm must be positive, got {}",
                self.default_radius_mm
            )));
        }
        Ok(())
    }
}

/// World-space extents of a vertebra pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertebraExtents {
    pub y: (f64, f64),
    pub z: (f64, f64),
    /// Anterior edge first.
    pub x: (f64, f64),
}

impl VertebraExtents {
    pub fn of(pair: &VertebraPair, calibs: &CalibrationPair) -> Self {
        let (ap, lp) = (&calibs.ap, &calibs.lp);
        let xa = lp.u_to_world(pair.lp_box.x_min);
        let xb = lp.u_to_world(pair.lp_box.x_max);
        Self {
            y: (ap.u_to_world(pair.ap_box.x_min), ap.u_to_world(pair.ap_box.x_max)),
            z: (ap.v_to_world(pair.ap_box.y_min), ap.v_to_world(pair.ap_box.y_max)),
            x: (xa.min(xb), xa.max(xb)),
        }
    }

    pub fn y_center(&self) -> f64 {
        (self.y.0 + self.y.1) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.y.1 - self.y.0
    }

    pub fn depth(&self) -> f64 {
        self.x.1 - self.x.0
    }
}

/// Trimmed placement regions in pixels: the AP half-box for the screw's side and the LP box.
fn placement_regions(
    pair: &VertebraPair,
    side: Side,
    ivdl_mm: f64,
    calibs: &CalibrationPair,
) -> Result<(BBox2D, BBox2D), AnatomyError> {
    let ap = trim_box(&pair.ap_box, ivdl_mm / calibs.ap.mm_per_px_v)?;
    let lp = trim_box(&pair.lp_box, ivdl_mm / calibs.lp.mm_per_px_v)?;
    Ok((split_half(&ap, side), lp))
}

/// Place the initial screw for one side of a vertebra.
///
/// The returned screw has `id` 0; sessions assign their own ids.
pub fn init_screw(
    pair: &VertebraPair,
    side: Side,
    ivdl_mm: f64,
    cfg: &PaddingConfig,
    calibs: &CalibrationPair,
) -> Result<Screw3D, PlanningError> {
    cfg.validate()?;
    if !(ivdl_mm.is_finite() && ivdl_mm >= 0.0) {
        return Err(PlanningError::InvalidConfig(format!("ivdl must be non-negative, got {ivdl_mm}")));
    }
    placement_regions(pair, side, ivdl_mm, calibs)?;

    let ext = VertebraExtents::of(pair, calibs);
    let half_width = ext.width() / 2.0;
    for (pad, value_mm, limit_mm) in [
        ("pad_target_mm", cfg.pad_target_mm, half_width),
        ("pad_entry_mm", cfg.pad_entry_mm, half_width),
        ("pad_target_mm", cfg.pad_target_mm, ext.depth()),
        ("pad_entry_mm", cfg.pad_entry_mm, ext.depth()),
    ] {
        if value_mm >= limit_mm {
            return Err(PlanningError::PadTooLarge { pad, value_mm, limit_mm });
        }
    }

    let s = side.sign();
    let yc = ext.y_center();
    let (z_target, z_entry) = match cfg.z_policy {
        ZPolicy::Sloped => (ext.z.0 + ivdl_mm, ext.z.1 - ivdl_mm),
        ZPolicy::Centered => {
            let mid = (ext.z.0 + ext.z.1) / 2.0;
            (mid, mid)
        }
    };
    let screw = Screw3D {
        id: 0,
        label: pair.label,
        side,
        target_c1: Point3::new(ext.x.0 + cfg.pad_target_mm, yc + s * cfg.pad_target_mm, z_target),
        entry_c2: Point3::new(ext.x.1 - cfg.pad_entry_mm, yc + s * (half_width - cfg.pad_entry_mm), z_entry),
        radius: cfg.default_radius_mm,
    };
    if screw.length() == 0.0 {
        return Err(PlanningError::DegenerateScrew);
    }
    Ok(screw)
}

/// Allowed real-screw sizes, both lists strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub diameters_mm: Vec<f64>,
    pub lengths_mm: Vec<f64>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self {
            diameters_mm: vec![4.5, 5.5, 6.5, 7.5],
            lengths_mm: vec![30.0, 35.0, 40.0, 45.0, 50.0, 55.0],
        }
    }
}

impl Catalog {
    pub fn validate(&self) -> Result<(), PlanningError> {
        for (name, list) in [("diameters_mm", &self.diameters_mm), ("lengths_mm", &self.lengths_mm)] {
            if list.is_empty() {
                return Err(PlanningError::InvalidCatalog(format!("{name} is empty")));
            }
            if list.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(PlanningError::InvalidCatalog(format!("{name} must hold positive values")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(PlanningError::InvalidCatalog(format!("{name} must be strictly ascending")));
            }
        }
        Ok(())
    }
}

/// Largest entry of an ascending list not exceeding `raw`.
pub fn snap_down(sorted: &[f64], raw: f64) -> Option<f64> {
    sorted.iter().rev().copied().find(|&v| v <= raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrewSpec {
    pub length_mm: f64,
    pub diameter_mm: f64,
    /// `None` only when the planned size is below the whole catalog.
    pub catalog_length_mm: Option<f64>,
    pub catalog_diameter_mm: Option<f64>,
}

fn snap_quantity(
    list: &[f64],
    raw: f64,
    quantity: Quantity,
    warnings: &mut Vec<Warning>,
) -> Result<f64, PlanningError> {
    let snapped = snap_down(list, raw).ok_or(PlanningError::CatalogUnderflow {
        quantity,
        raw_mm: raw,
        catalog_min_mm: list[0],
    })?;
    let max = list[list.len() - 1];
    if raw > max {
        warnings.push(Warning::OutOfRange { quantity, raw_mm: raw, catalog_max_mm: max });
    }
    Ok(snapped)
}

/// Planned length and diameter, rounded down to catalog sizes.
pub fn compute_screw_spec(
    screw: &Screw3D,
    catalog: &Catalog,
) -> Result<(ScrewSpec, Vec<Warning>), PlanningError> {
    catalog.validate()?;
    let length_mm = screw.length();
    let diameter_mm = 2.0 * screw.radius;
    let mut warnings = Vec::new();
    let catalog_length_mm = snap_quantity(&catalog.lengths_mm, length_mm, Quantity::Length, &mut warnings)?;
    let catalog_diameter_mm =
        snap_quantity(&catalog.diameters_mm, diameter_mm, Quantity::Diameter, &mut warnings)?;
    Ok((
        ScrewSpec {
            length_mm,
            diameter_mm,
            catalog_length_mm: Some(catalog_length_mm),
            catalog_diameter_mm: Some(catalog_diameter_mm),
        },
        warnings,
    ))
}

/// Like [`compute_screw_spec`], but an undersized screw is reported as a
/// warning with no catalog match instead of failing.
pub fn screw_report(screw: &Screw3D, catalog: &Catalog) -> Result<(ScrewSpec, Vec<Warning>), PlanningError> {
    catalog.validate()?;
    let length_mm = screw.length();
    let diameter_mm = 2.0 * screw.radius;
    let mut warnings = Vec::new();
    let mut snap = |list: &[f64], raw: f64, quantity| match snap_quantity(list, raw, quantity, &mut warnings) {
        Ok(v) => Some(v),
        Err(_) => {
            warnings.push(Warning::CatalogUnderflow { quantity, raw_mm: raw, catalog_min_mm: list[0] });
            None
        }
    };
    let catalog_length_mm = snap(&catalog.lengths_mm, length_mm, Quantity::Length);
    let catalog_diameter_mm = snap(&catalog.diameters_mm, diameter_mm, Quantity::Diameter);
    Ok((ScrewSpec { length_mm, diameter_mm, catalog_length_mm, catalog_diameter_mm }, warnings))
}

/// Warnings for every endpoint that leaves its placement region in either view.
pub fn validate_containment(
    screw: &Screw3D,
    pair: &VertebraPair,
    ivdl_mm: f64,
    calibs: &CalibrationPair,
) -> Vec<Warning> {
    let mut warnings = Vec::new();
    let (ap_region, lp_region) = match placement_regions(pair, screw.side, ivdl_mm, calibs) {
        Ok(r) => r,
        Err(e) => {
            warnings.push(Warning::DegenerateRegion {
                view: crate::geometry::ViewKind::Ap,
                reason: e.to_string(),
            });
            (split_half(&pair.ap_box, screw.side), pair.lp_box)
        }
    };
    for which in [Endpoint::Target, Endpoint::Entry] {
        let p = screw.endpoint(which);
        if !ap_region.contains(project_point(p, &calibs.ap), CONTAINMENT_TOL_PX) {
            warnings.push(Warning::ApOutOfBox { endpoint: which });
        }
        if !lp_region.contains(project_point(p, &calibs.lp), CONTAINMENT_TOL_PX) {
            warnings.push(Warning::LpOutOfBox { endpoint: which });
        }
    }
    warnings
}
