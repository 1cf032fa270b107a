#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fluoroplan::io::{write_json, CaseFile};
use fluoroplan::planning::ZPolicy;
use fluoroplan::{BBox2D, CalibrationPair, IvdlPolicy, PaddingConfig, VertebraLabel, ViewCalibration, ViewKind};

pub const IMAGE_PX: u32 = 512;

pub fn identity_calibs() -> CalibrationPair {
    CalibrationPair {
        ap: ViewCalibration::identity(ViewKind::Ap, [IMAGE_PX, IMAGE_PX]),
        lp: ViewCalibration::identity(ViewKind::Lp, [IMAGE_PX, IMAGE_PX]),
    }
}

/// L4 boxes of the hand-worked example plus an L5 below it, identity calibration,
/// fixed 8 mm disk height and 6 mm pads.
pub fn worked_case_file() -> CaseFile {
    use VertebraLabel::*;
    CaseFile {
        schema: "1".into(),
        ap_image: "ap.png".into(),
        lp_image: "lp.png".into(),
        calibration: identity_calibs(),
        annotations: vec![
            BBox2D::new(ViewKind::Ap, L4, 100.0, 50.0, 180.0, 110.0),
            BBox2D::new(ViewKind::Lp, L4, 200.0, 50.0, 280.0, 110.0),
            BBox2D::new(ViewKind::Ap, L5, 98.0, 150.0, 182.0, 215.0),
            BBox2D::new(ViewKind::Lp, L5, 198.0, 150.0, 282.0, 215.0),
        ],
        ivdl: IvdlPolicy { mode: fluoroplan::anatomy::IvdlMode::Fixed, fixed_mm: 8.0 },
        padding: PaddingConfig {
            pad_target_mm: 6.0,
            pad_entry_mm: 6.0,
            z_policy: ZPolicy::Sloped,
            default_radius_mm: 3.25,
        },
        catalog: None,
        discrepancy_correction: true,
    }
}

pub fn write_images(dir: &Path) {
    let img = image::GrayImage::from_pixel(IMAGE_PX, IMAGE_PX, image::Luma([40]));
    img.save(dir.join("ap.png")).unwrap();
    img.save(dir.join("lp.png")).unwrap();
}

pub fn write_case(dir: &Path, case: &CaseFile) -> PathBuf {
    write_images(dir);
    let path = dir.join("case.json");
    write_json(case, &path).unwrap();
    path
}
