//! Case, plan and catalog files.
//!
//! All formats are JSON carrying `"schema": "1"`. Units are part of every
//! numeric field name (`_mm`, `_px`). Paths inside a case file are resolved
//! relative to the case file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::{pair_views, resolve_ivdl, BBox2D, IvdlMode, IvdlPolicy, VertebraPair};
use crate::geometry::{CalibrationPair, ViewKind, ViewProjections};
use crate::planning::{Catalog, PaddingConfig, Screw3D, ScrewSpec};
use crate::sync::{apply_discrepancy, edge_correspondences, fit_discrepancy, DiscrepancyModel};
use crate::warning::Warning;

pub const SCHEMA_VERSION: &str = "1";

/// Stored projections further than this from a recomputation are replaced.
pub const STALE_PROJECTION_TOL_PX: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("unsupported schema version {found:?} (expected {SCHEMA_VERSION:?})")]
    SchemaVersion { found: String },
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "IoError",
            IoError::Parse { .. } => "ParseError",
            IoError::Validation { .. } => "ValidationError",
            IoError::Image { .. } => "ImageError",
            IoError::SchemaVersion { .. } => "SchemaVersionError",
        }
    }

    fn validation(field: impl Into<String>, message: impl ToString) -> Self {
        IoError::Validation { field: field.into(), message: message.to_string() }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Io { path: path.to_owned(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::Parse { path: path.to_owned(), message: e.to_string() })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

/// Parse a versioned document, rejecting unknown schema values before field decoding.
fn read_versioned<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let value: serde_json::Value = read_json(path)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => return Err(IoError::SchemaVersion { found: other.to_owned() }),
        None => return Err(IoError::validation("schema", "missing or not a string")),
    }
    serde_json::from_value(value).map_err(|e| IoError::Parse { path: path.to_owned(), message: e.to_string() })
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_owned()
}

fn default_true() -> bool {
    true
}

/// On-disk case description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub ap_image: PathBuf,
    pub lp_image: PathBuf,
    pub calibration: CalibrationPair,
    pub annotations: Vec<BBox2D>,
    pub ivdl: IvdlPolicy,
    #[serde(default)]
    pub padding: PaddingConfig,
    /// Catalog file; the built-in catalog is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Fit and apply the LP craniocaudal correction at load time.
    #[serde(default = "default_true")]
    pub discrepancy_correction: bool,
}

/// A decoded single-channel image, widened to 16 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub pixels: Vec<u16>,
}

pub fn load_gray_image(path: &Path) -> Result<GrayImage, IoError> {
    let err = |message: String| IoError::Image { path: path.to_owned(), message };
    let reader = image::ImageReader::open(path)
        .map_err(|source| IoError::Io { path: path.to_owned(), source })?
        .with_guessed_format()
        .map_err(|e| err(e.to_string()))?;
    let img = reader.decode().map_err(|e| err(e.to_string()))?;
    let (width, height) = (img.width(), img.height());
    match img {
        image::DynamicImage::ImageLuma8(buf) => Ok(GrayImage {
            width,
            height,
            bit_depth: 8,
            pixels: buf.into_raw().into_iter().map(u16::from).collect(),
        }),
        image::DynamicImage::ImageLuma16(buf) => {
            Ok(GrayImage { width, height, bit_depth: 16, pixels: buf.into_raw() })
        }
        other => Err(err(format!("expected 8- or 16-bit grayscale, got {:?}", other.color()))),
    }
}

/// A validated case, with LP annotations already corrected into the AP frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub path: PathBuf,
    pub file: CaseFile,
    pub ap_image: GrayImage,
    pub lp_image: GrayImage,
    pub catalog: Catalog,
    pub discrepancy: DiscrepancyModel,
    /// Annotations after discrepancy correction.
    pub annotations: Vec<BBox2D>,
    pub pairs: Vec<VertebraPair>,
    pub warnings: Vec<Warning>,
}

impl Case {
    pub fn calibration(&self) -> &CalibrationPair {
        &self.file.calibration
    }

    pub fn pair(&self, label: crate::anatomy::VertebraLabel) -> Option<&VertebraPair> {
        self.pairs.iter().find(|p| p.label == label)
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

pub fn load_case(path: &Path) -> Result<Case, IoError> {
    let file: CaseFile = read_versioned(path)?;
    let base = path.parent().unwrap_or(Path::new("."));

    file.calibration
        .validate()
        .map_err(|e| IoError::validation("calibration", e))?;
    for (i, b) in file.annotations.iter().enumerate() {
        b.validate().map_err(|e| IoError::validation(format!("annotations[{i}]"), e))?;
    }
    file.ivdl.validate().map_err(|e| IoError::validation("ivdl.fixed_mm", e))?;
    file.padding.validate().map_err(|e| IoError::validation("padding", e))?;
    let pairs = pair_views(&file.annotations).map_err(|e| IoError::validation("annotations", e))?;

    let catalog = match &file.catalog {
        Some(p) => read_json::<Catalog>(&resolve(base, p))?,
        None => Catalog::default(),
    };
    catalog.validate().map_err(|e| IoError::validation("catalog", e))?;

    let ap_image = load_gray_image(&resolve(base, &file.ap_image))?;
    let lp_image = load_gray_image(&resolve(base, &file.lp_image))?;
    for (name, img, calib) in [
        ("calibration.ap.image_size_px", &ap_image, &file.calibration.ap),
        ("calibration.lp.image_size_px", &lp_image, &file.calibration.lp),
    ] {
        if [img.width, img.height] != calib.image_size_px {
            return Err(IoError::validation(
                name,
                format!(
                    "image is {}x{} px but calibration declares {}x{}",
                    img.width, img.height, calib.image_size_px[0], calib.image_size_px[1]
                ),
            ));
        }
    }

    let discrepancy = if file.discrepancy_correction && !pairs.is_empty() {
        fit_discrepancy(&edge_correspondences(&pairs, &file.calibration))
            .map_err(|e| IoError::validation("annotations", format!("discrepancy fit: {e}")))?
    } else {
        DiscrepancyModel::IDENTITY
    };
    let annotations = apply_discrepancy(&discrepancy, &file.annotations, &file.calibration.lp);
    let pairs = pair_views(&annotations).map_err(|e| IoError::validation("annotations", e))?;

    let mut warnings = Vec::new();
    if file.ivdl.mode == IvdlMode::Overlap {
        for p in &pairs {
            let est = resolve_ivdl(&pairs, p.label, &file.ivdl, &file.calibration.ap);
            if let Some(reason) = est.fallback_reason {
                warnings.push(Warning::IvdlFallback { label: p.label, fixed_mm: file.ivdl.fixed_mm, reason });
            }
        }
    }

    Ok(Case {
        path: path.to_owned(),
        file,
        ap_image,
        lp_image,
        catalog,
        discrepancy,
        annotations,
        pairs,
        warnings,
    })
}

/// One planned screw with its cached overlays and report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedScrew {
    pub screw: Screw3D,
    pub spec: ScrewSpec,
    pub projections: ViewProjections,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub schema: String,
    /// Path of the case file the plan was made on.
    pub case: String,
    /// Copied from the case so projections can be recomputed from the plan alone.
    pub calibration: CalibrationPair,
    pub discrepancy: DiscrepancyModel,
    pub screws: Vec<PlannedScrew>,
    pub revision: u64,
    pub created_at: DateTime<Utc>,
}

impl PlanDocument {
    pub fn new(case: String, calibration: CalibrationPair, discrepancy: DiscrepancyModel, revision: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION.to_owned(),
            case,
            calibration,
            discrepancy,
            screws: Vec::new(),
            revision,
            created_at: Utc::now(),
        }
    }
}

pub fn save_plan(doc: &PlanDocument, path: &Path) -> Result<(), IoError> {
    write_json(doc, path)
}

/// Load a plan, recomputing every cached projection from its screw.
pub fn load_plan(path: &Path) -> Result<(PlanDocument, Vec<Warning>), IoError> {
    let mut doc: PlanDocument = read_versioned(path)?;
    doc.calibration.validate().map_err(|e| IoError::validation("calibration", e))?;
    let mut warnings = Vec::new();
    for (i, planned) in doc.screws.iter_mut().enumerate() {
        planned
            .screw
            .validate()
            .map_err(|e| IoError::validation(format!("screws[{i}].screw"), e))?;
        let fresh = ViewProjections::of(&planned.screw, &doc.calibration)
            .map_err(|e| IoError::validation(format!("screws[{i}].projections"), e))?;
        for view in ViewKind::BOTH {
            let stored = planned.projections.get(view);
            let dev = stored.max_deviation(fresh.get(view));
            if dev > STALE_PROJECTION_TOL_PX || stored.view != view {
                warnings.push(Warning::StaleProjection { screw_id: planned.screw.id, view, max_error_px: dev });
            }
        }
        planned.projections = fresh;
    }
    Ok((doc, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anatomy::VertebraLabel;
    use crate::geometry::{Point3, ViewCalibration};

    fn calibs() -> CalibrationPair {
        CalibrationPair {
            ap: ViewCalibration::identity(ViewKind::Ap, [64, 64]),
            lp: ViewCalibration::identity(ViewKind::Lp, [64, 64]),
        }
    }

    #[test]
    fn schema_gate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plan.json");
        fs::write(&p, r#"{"schema":"99"}"#).unwrap();
        assert!(matches!(load_plan(&p), Err(IoError::SchemaVersion { found }) if found == "99"));
        fs::write(&p, "{not json").unwrap();
        assert_eq!(load_plan(&p).unwrap_err().code(), "ParseError");
        assert_eq!(load_plan(&dir.path().join("missing.json")).unwrap_err().code(), "IoError");
    }

    #[test]
    fn stale_projection_is_recomputed() {
        let screw = Screw3D {
            id: 3,
            label: VertebraLabel::L4,
            side: crate::anatomy::Side::L,
            target_c1: Point3::new(20.0, 30.0, 10.0),
            entry_c2: Point3::new(50.0, 20.0, 30.0),
            radius: 3.0,
        };
        let projections = ViewProjections::of(&screw, &calibs()).unwrap();
        let mut doc = PlanDocument::new("case.json".into(), calibs(), DiscrepancyModel::IDENTITY, 4);
        let mut stale = projections;
        stale.lp.entry_px.v += 1e-3;
        doc.screws.push(PlannedScrew {
            screw,
            spec: ScrewSpec { length_mm: screw.length(), diameter_mm: 6.0, catalog_length_mm: None, catalog_diameter_mm: None },
            projections: stale,
            warnings: vec![],
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plan.json");
        save_plan(&doc, &p).unwrap();
        let (loaded, warnings) = load_plan(&p).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(matches!(warnings[0], Warning::StaleProjection { screw_id: 3, view: ViewKind::Lp, .. }));
        assert_eq!(loaded.screws[0].projections, projections);
    }

    #[test]
    fn rejects_non_grayscale_image() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        image::RgbImage::new(4, 4).save(&p).unwrap();
        assert_eq!(load_gray_image(&p).unwrap_err().code(), "ImageError");
        let p16 = dir.path().join("g16.png");
        image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(3, 2, image::Luma([4000])).save(&p16).unwrap();
        let g = load_gray_image(&p16).unwrap();
        assert_eq!((g.width, g.height, g.bit_depth, g.pixels[0]), (3, 2, 16, 4000));
    }
}
