//! Intraoperative pedicle-screw planning on biplanar (AP + lateral) fluoroscopy.
//!
//! A screw is initialized from a vertebra's bounding boxes in both views and
//! held as one 3D segment; edits made in either view are lifted onto it so the
//! two overlays always agree.
//!
//! Module map:
//! - [`geometry`]: world frame, calibration, projection and backprojection
//! - [`anatomy`]: vertebra boxes, pairing, disk-height estimation
//! - [`planning`]: screw initialization, sizing, containment
//! - [`sync`]: gesture hit-testing, edit lifting, discrepancy correction
//! - [`io`]: case/plan/truth files
//! - [`service`]: message-driven planning sessions
//! - [`phantom`]: synthetic cases with ground truth and plan scoring

// `!(a < b)` comparisons are deliberate: they reject NaN along with out-of-order values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anatomy;
pub mod geometry;
pub mod io;
pub mod phantom;
pub mod planning;
pub mod service;
pub mod sync;
pub mod warning;

pub use anatomy::{BBox2D, IvdlPolicy, Side, VertebraLabel, VertebraPair};
pub use geometry::{CalibrationPair, Point2, Point3, ScrewProjection2D, ViewCalibration, ViewKind, ViewProjections};
pub use planning::{Catalog, Endpoint, PaddingConfig, Screw3D, ScrewSpec};
pub use sync::{DiscrepancyModel, EditOp, HitRegion};
pub use warning::Warning;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Anatomy(#[from] anatomy::AnatomyError),
    #[error(transparent)]
    Planning(#[from] planning::PlanningError),
    #[error(transparent)]
    Sync(#[from] sync::SyncError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Phantom(#[from] phantom::PhantomError),
}

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Validation = 2,
    Io = 3,
    Geometry = 4,
}

impl Error {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        use anatomy::AnatomyError as A;
        use planning::PlanningError as P;
        use sync::SyncError as S;
        match self {
            Error::Geometry(geometry::GeometryError::InvalidCalibration(_)) => "InvalidCalibration",
            Error::Geometry(geometry::GeometryError::DegenerateProjection(_)) => "DegenerateProjection",
            Error::Anatomy(e) | Error::Planning(P::Anatomy(e)) => match e {
                A::UnpairedLabel(_) => "UnpairedLabel",
                A::TooManyVertebrae(_) => "TooManyVertebrae",
                A::DuplicateLabel { .. } => "DuplicateLabel",
                A::NoHit(_) => "NoHit",
                A::NoOverlap => "NoOverlap",
                A::ViewMismatch => "ViewMismatch",
                A::NotCraniocaudal => "NotCraniocaudal",
                A::DegenerateTrim { .. } => "DegenerateTrim",
                A::InvalidBox(_) => "InvalidBox",
            },
            Error::Planning(e) => match e {
                P::Anatomy(_) => unreachable!(),
                P::PadTooLarge { .. } => "PadTooLarge",
                P::InvalidConfig(_) => "InvalidConfig",
                P::DegenerateScrew => "DegenerateScrew",
                P::CatalogUnderflow { .. } => "CatalogUnderflow",
                P::InvalidCatalog(_) => "InvalidCatalog",
            },
            Error::Sync(e) => match e {
                S::DegenerateScrew => "DegenerateScrew",
                S::InvalidEdit(_) => "InvalidEdit",
                S::InsufficientCorrespondences(_) => "InsufficientCorrespondences",
                S::DegenerateFit => "DegenerateFit",
                S::NonPositiveGain(_) => "NonPositiveGain",
            },
            Error::Io(e) => e.code(),
            Error::Phantom(e) => e.code(),
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self.code() {
            "DegenerateProjection" | "DegenerateScrew" | "DegenerateTrim" | "NoOverlap" | "PadTooLarge"
            | "DegenerateFit" | "NonPositiveGain" | "InsufficientCorrespondences" => ExitClass::Geometry,
            "IoError" | "ImageError" => ExitClass::Io,
            _ => ExitClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
