//! Synthetic lumbar cases with known screw corridors, and plan scoring.
//!
//! Each level is a rectangular vertebral body. Its box in both views spans the
//! body plus one disk height above and below, so neighbouring boxes overlap by
//! exactly the disk height. The truth corridor for each pedicle runs from a
//! posterolateral entry to an anteromedial target, both inset from the body
//! faces. Images are flat rectangles over Gaussian noise; the seed only
//! changes the noise.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::{BBox2D, IvdlMode, IvdlPolicy, Side, VertebraLabel};
use crate::geometry::{AnteriorAt, CalibrationPair, Point2, Point3, ViewCalibration, ViewKind};
use crate::io::{write_json, CaseFile, IoError, PlanDocument, SCHEMA_VERSION};
use crate::planning::{Catalog, PaddingConfig};

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    Spec(String),
    #[error("no truth corridor for {label}-{side}")]
    MissingTruth { label: VertebraLabel, side: Side },
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PhantomError {
    pub fn code(&self) -> &'static str {
        match self {
            PhantomError::Spec(_) => "SpecError",
            PhantomError::MissingTruth { .. } => "MissingTruth",
            PhantomError::Io(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub levels: usize,
    /// Mediolateral body width of the most cranial level.
    pub body_width_mm: f64,
    /// Craniocaudal body height of the most cranial level.
    pub body_height_mm: f64,
    /// Anteroposterior extent of the most cranial level.
    pub body_depth_mm: f64,
    /// Added to width, height and depth at each more caudal level.
    pub level_growth_mm: f64,
    pub disk_height_mm: f64,
    pub corridor_radius_mm: f64,
    /// Inset of the truth target from the anterior face and the midline.
    pub truth_target_inset_mm: f64,
    /// Inset of the truth entry from the posterior face and the lateral edge.
    pub truth_entry_inset_mm: f64,
    pub mm_per_px: f64,
    pub image_size_px: [u32; 2],
    /// Cranial margin above the first box.
    pub top_margin_mm: f64,
    /// Simulated LP craniocaudal distortion: `z_ap = gain * z_lp + offset`.
    pub lp_z_gain: f64,
    pub lp_z_offset_mm: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            levels: 2,
            body_width_mm: 46.0,
            body_height_mm: 28.0,
            body_depth_mm: 44.0,
            level_growth_mm: 2.0,
            disk_height_mm: 8.0,
            corridor_radius_mm: 8.0,
            truth_target_inset_mm: 6.0,
            truth_entry_inset_mm: 6.0,
            mm_per_px: 0.5,
            image_size_px: [512, 512],
            top_margin_mm: 20.0,
            lp_z_gain: 1.0,
            lp_z_offset_mm: 0.0,
            noise_sigma: 8.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn new(levels: usize, seed: u64) -> Self {
        Self { levels, seed, ..Self::default() }
    }

    pub fn labels(&self) -> &'static [VertebraLabel] {
        use VertebraLabel::*;
        match self.levels {
            1 => &[L4],
            2 => &[L4, L5],
            _ => &[L3, L4, L5],
        }
    }

    fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::Spec(m));
        if !(1..=3).contains(&self.levels) {
            return bad(format!("levels must be 1..=3, got {}", self.levels));
        }
        for (name, v) in [
            ("body_width_mm", self.body_width_mm),
            ("body_height_mm", self.body_height_mm),
            ("body_depth_mm", self.body_depth_mm),
            ("disk_height_mm", self.disk_height_mm),
            ("corridor_radius_mm", self.corridor_radius_mm),
            ("mm_per_px", self.mm_per_px),
            ("lp_z_gain", self.lp_z_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("level_growth_mm", self.level_growth_mm),
            ("truth_target_inset_mm", self.truth_target_inset_mm),
            ("truth_entry_inset_mm", self.truth_entry_inset_mm),
            ("top_margin_mm", self.top_margin_mm),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !self.lp_z_offset_mm.is_finite() {
            return bad("lp_z_offset_mm must be finite".into());
        }
        let inset = self.truth_target_inset_mm.max(self.truth_entry_inset_mm);
        if 2.0 * inset >= self.body_width_mm || inset >= self.body_depth_mm {
            return bad("truth insets do not fit inside the body".into());
        }
        if self.image_size_px[0] == 0 || self.image_size_px[1] == 0 {
            return bad("image_size_px must be positive".into());
        }
        Ok(())
    }
}

/// One level's body in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level {
    label: VertebraLabel,
    /// Mediolateral extent.
    y: (f64, f64),
    /// Body craniocaudal extent (without disks).
    z: (f64, f64),
    /// Anterior then posterior face.
    x: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScrew {
    pub label: VertebraLabel,
    pub side: Side,
    pub entry_mm: Point3,
    pub target_mm: Point3,
    pub corridor_radius_mm: f64,
}

impl TruthScrew {
    pub fn contains(&self, p: Point3) -> bool {
        p.distance_to_segment(self.entry_mm, self.target_mm) <= self.corridor_radius_mm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub screws: Vec<TruthScrew>,
}

impl TruthFile {
    pub fn find(&self, label: VertebraLabel, side: Side) -> Option<&TruthScrew> {
        self.screws.iter().find(|t| t.label == label && t.side == side)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub case: CaseFile,
    pub ap_image: image::GrayImage,
    pub lp_image: image::GrayImage,
    pub catalog: Catalog,
    pub truth: TruthFile,
}

pub const CASE_FILE: &str = "case.json";
pub const TRUTH_FILE: &str = "truth.json";

impl Phantom {
    /// Write images, catalog, case and truth into `dir`; returns the case path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, PhantomError> {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.to_owned(), source })?;
        for (img, name) in [(&self.ap_image, &self.case.ap_image), (&self.lp_image, &self.case.lp_image)] {
            let path = dir.join(name);
            img.save(&path).map_err(|e| IoError::Image { path: path.clone(), message: e.to_string() })?;
        }
        if let Some(cat) = &self.case.catalog {
            write_json(&self.catalog, &dir.join(cat))?;
        }
        write_json(&self.truth, &dir.join(TRUTH_FILE))?;
        let case_path = dir.join(CASE_FILE);
        write_json(&self.case, &case_path)?;
        Ok(case_path)
    }
}

fn levels(spec: &PhantomSpec) -> Vec<Level> {
    let midline = f64::from(spec.image_size_px[0]) * spec.mm_per_px / 2.0;
    let mut box_top = spec.top_margin_mm;
    spec.labels()
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let grow = spec.level_growth_mm * i as f64;
            let (w, h, d) = (spec.body_width_mm + grow, spec.body_height_mm + grow, spec.body_depth_mm + grow);
            let body_top = box_top + spec.disk_height_mm;
            let level = Level {
                label,
                y: (midline - w / 2.0, midline + w / 2.0),
                z: (body_top, body_top + h),
                x: (midline - d / 2.0, midline + d / 2.0),
            };
            // The next box opens at this body's bottom edge, one disk above this box's end.
            box_top = body_top + h;
            level
        })
        .collect()
}

fn fill_image(size: [u32; 2], rects: &[[f64; 4]], sigma: f64, rng: &mut ChaCha8Rng) -> image::GrayImage {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    image::GrayImage::from_fn(size[0], size[1], |u, v| {
        let (cu, cv) = (f64::from(u) + 0.5, f64::from(v) + 0.5);
        let inside = rects.iter().any(|r| cu >= r[0] && cu < r[2] && cv >= r[1] && cv < r[3]);
        let base = if inside { 150.0 } else { 40.0 };
        let n = if sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        image::Luma([(base + n).round().clamp(0.0, 255.0) as u8])
    })
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom, PhantomError> {
    spec.validate()?;
    let scale = spec.mm_per_px;
    let ap = ViewCalibration {
        view: ViewKind::Ap,
        mm_per_px_u: scale,
        mm_per_px_v: scale,
        origin_px: Point2::new(0.0, 0.0),
        image_size_px: spec.image_size_px,
        anterior_at: AnteriorAt::Left,
    };
    let lp = ViewCalibration { view: ViewKind::Lp, ..ap };
    let disk = spec.disk_height_mm;
    let lp_z = |z_ap: f64| (z_ap - spec.lp_z_offset_mm) / spec.lp_z_gain;

    let levels = levels(spec);
    let mut annotations = Vec::new();
    let mut truth = Vec::new();
    for lvl in &levels {
        let (z0, z1) = (lvl.z.0 - disk, lvl.z.1 + disk);
        annotations.push(BBox2D::new(
            ViewKind::Ap,
            lvl.label,
            ap.world_to_u(lvl.y.0),
            ap.world_to_v(z0),
            ap.world_to_u(lvl.y.1),
            ap.world_to_v(z1),
        ));
        annotations.push(BBox2D::new(
            ViewKind::Lp,
            lvl.label,
            lp.world_to_u(lvl.x.0),
            lp.world_to_v(lp_z(z0)),
            lp.world_to_u(lvl.x.1),
            lp.world_to_v(lp_z(z1)),
        ));
        let yc = (lvl.y.0 + lvl.y.1) / 2.0;
        let half_w = (lvl.y.1 - lvl.y.0) / 2.0;
        for side in [Side::L, Side::R] {
            let s = side.sign();
            truth.push(TruthScrew {
                label: lvl.label,
                side,
                target_mm: Point3::new(lvl.x.0 + spec.truth_target_inset_mm, yc + s * spec.truth_target_inset_mm, lvl.z.0),
                entry_mm: Point3::new(
                    lvl.x.1 - spec.truth_entry_inset_mm,
                    yc + s * (half_w - spec.truth_entry_inset_mm),
                    lvl.z.1,
                ),
                corridor_radius_mm: spec.corridor_radius_mm,
            });
        }
    }

    let (w, h) = (f64::from(spec.image_size_px[0]), f64::from(spec.image_size_px[1]));
    for b in &annotations {
        if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w || b.y_max > h {
            return Err(PhantomError::Spec(format!("{} {} box exceeds the image", b.view, b.label)));
        }
    }

    let rects = |view: ViewKind| -> Vec<[f64; 4]> {
        annotations
            .iter()
            .filter(|b| b.view == view)
            .map(|b| [b.x_min, b.y_min + (disk / scale) / 2.0, b.x_max, b.y_max - (disk / scale) / 2.0])
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ap_image = fill_image(spec.image_size_px, &rects(ViewKind::Ap), spec.noise_sigma, &mut rng);
    let lp_image = fill_image(spec.image_size_px, &rects(ViewKind::Lp), spec.noise_sigma, &mut rng);

    let case = CaseFile {
        schema: SCHEMA_VERSION.to_owned(),
        ap_image: PathBuf::from("ap.png"),
        lp_image: PathBuf::from("lp.png"),
        calibration: CalibrationPair { ap, lp },
        annotations,
        ivdl: IvdlPolicy { mode: IvdlMode::Overlap, fixed_mm: disk },
        padding: PaddingConfig::default(),
        catalog: Some(PathBuf::from("catalog.json")),
        discrepancy_correction: true,
    };
    Ok(Phantom { case, ap_image, lp_image, catalog: Catalog::default(), truth: TruthFile { screws: truth } })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanError {
    pub screw_id: u64,
    pub label: VertebraLabel,
    pub side: Side,
    pub entry_error_mm: f64,
    pub target_error_mm: f64,
    pub contained: bool,
}

/// Score each planned screw against its truth corridor.
pub fn evaluate_plan(plan: &PlanDocument, truth: &TruthFile) -> Result<Vec<PlanError>, PhantomError> {
    plan.screws
        .iter()
        .map(|p| {
            let s = &p.screw;
            let t = truth
                .find(s.label, s.side)
                .ok_or(PhantomError::MissingTruth { label: s.label, side: s.side })?;
            Ok(PlanError {
                screw_id: s.id,
                label: s.label,
                side: s.side,
                entry_error_mm: s.entry_c2.distance(t.entry_mm),
                target_error_mm: s.target_c1.distance(t.target_mm),
                contained: t.contains(s.entry_c2) && t.contains(s.target_c1),
            })
        })
        .collect()
}

/// Plain-text table of plan errors.
pub fn format_errors(errors: &[PlanError]) -> String {
    let mut out = format!(
        "{:<6} {:<6} {:<4} {:>14} {:>15} {:>9}\n",
        "screw", "level", "side", "entry_err_mm", "target_err_mm", "contained"
    );
    for e in errors {
        out.push_str(&format!(
            "{:<6} {:<6} {:<4} {:>14.3} {:>15.3} {:>9}\n",
            e.screw_id,
            e.label.to_string(),
            e.side.to_string(),
            e.entry_error_mm,
            e.target_error_mm,
            e.contained
        ));
    }
    out
}
