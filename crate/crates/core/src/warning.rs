use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anatomy::VertebraLabel;
use crate::geometry::ViewKind;
use crate::planning::Endpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Length,
    Diameter,
}

/// Non-fatal findings attached to screws, cases and plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code")]
pub enum Warning {
    ApOutOfBox { endpoint: Endpoint },
    LpOutOfBox { endpoint: Endpoint },
    /// Planned size exceeds the largest catalog entry; the largest entry was reported.
    OutOfRange { quantity: Quantity, raw_mm: f64, catalog_max_mm: f64 },
    CatalogUnderflow { quantity: Quantity, raw_mm: f64, catalog_min_mm: f64 },
    IvdlFallback { label: VertebraLabel, fixed_mm: f64, reason: String },
    DegenerateRegion { view: ViewKind, reason: String },
    StaleProjection { screw_id: u64, view: ViewKind, max_error_px: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ApOutOfBox { endpoint } => {
                write!(f, "{endpoint} lies outside the AP half-box")
            }
            Warning::LpOutOfBox { endpoint } => {
                write!(f, "{endpoint} lies outside the trimmed LP box")
            }
            Warning::OutOfRange { quantity, raw_mm, catalog_max_mm } => write!(
                f,
                "planned {quantity:?} {raw_mm:.2} mm exceeds catalog maximum {catalog_max_mm} mm"
            ),
            Warning::CatalogUnderflow { quantity, raw_mm, catalog_min_mm } => write!(
                f,
                "planned {quantity:?} {raw_mm:.2} mm is below catalog minimum {catalog_min_mm} mm"
            ),
            Warning::IvdlFallback { label, fixed_mm, reason } => {
                write!(f, "{label}: using fixed disk height {fixed_mm} mm ({reason})")
            }
            Warning::DegenerateRegion { view, reason } => {
                write!(f, "{view} placement region is degenerate: {reason}")
            }
            Warning::StaleProjection { screw_id, view, max_error_px } => write!(
                f,
                "screw {screw_id}: stored {view} projection off by {max_error_px:.3e} px, recomputed"
            ),
        }
    }
}
