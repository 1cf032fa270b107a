//! Interactive planning on a synthetic two-view case, compiled to WebAssembly
//! for `www/index.html`.
//!
//! [`Demo`] holds the whole state and is usable natively; [`WasmDemo`] wraps
//! it for JavaScript, exchanging JSON strings.

use std::collections::BTreeMap;

use fluoroplan::anatomy::{pair_views, resolve_ivdl};
use fluoroplan::geometry::project_point;
use fluoroplan::io::PlannedScrew;
use fluoroplan::phantom::{generate_phantom, PhantomSpec, TruthScrew};
use fluoroplan::planning::{init_screw, screw_report, validate_containment};
use fluoroplan::sync::{apply_discrepancy, apply_edit, edge_correspondences, fit_discrepancy, hit_test_screw, DEFAULT_GRAB_PX};
use fluoroplan::{
    BBox2D, CalibrationPair, Catalog, DiscrepancyModel, EditOp, Endpoint, HitRegion, IvdlPolicy, PaddingConfig,
    Point2, Screw3D, Side, VertebraLabel, VertebraPair, ViewKind, ViewProjections,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Synthetic case parameters chosen in the page.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub levels: usize,
    pub seed: u64,
    /// LP craniocaudal distortion, `z_ap = gain * z_lp + offset`.
    pub lp_gain: f64,
    pub lp_offset_mm: f64,
    pub correct_discrepancy: bool,
}

#[derive(Debug, Clone, Copy)]
struct Drag {
    screw_id: u64,
    view: ViewKind,
    region: HitRegion,
    last: Point2,
}

#[derive(Debug, Clone)]
pub struct Demo {
    calibs: CalibrationPair,
    /// Boxes as annotated, before any LP correction.
    raw_annotations: Vec<BBox2D>,
    annotations: Vec<BBox2D>,
    pairs: Vec<VertebraPair>,
    discrepancy: DiscrepancyModel,
    ivdl: IvdlPolicy,
    padding: PaddingConfig,
    catalog: Catalog,
    truth: Vec<TruthScrew>,
    screws: BTreeMap<u64, Screw3D>,
    next_id: u64,
    drag: Option<Drag>,
}

#[derive(Serialize)]
struct StateView<'a> {
    calibration: &'a CalibrationPair,
    raw_annotations: &'a [BBox2D],
    annotations: &'a [BBox2D],
    discrepancy: DiscrepancyModel,
    truth: Vec<TruthOverlay>,
    screws: Vec<ScrewView>,
}

#[derive(Serialize)]
struct TruthOverlay {
    label: VertebraLabel,
    side: Side,
    projections: ViewProjections,
}

#[derive(Serialize)]
struct ScrewView {
    #[serde(flatten)]
    planned: PlannedScrew,
    in_corridor: bool,
}

impl Demo {
    pub fn new(scene: Scene) -> Result<Self, String> {
        let spec = PhantomSpec {
            lp_z_gain: scene.lp_gain,
            lp_z_offset_mm: scene.lp_offset_mm,
            noise_sigma: 0.0,
            ..PhantomSpec::new(scene.levels, scene.seed)
        };
        let phantom = generate_phantom(&spec).map_err(|e| e.to_string())?;
        let case = phantom.case;
        let raw_pairs = pair_views(&case.annotations).map_err(|e| e.to_string())?;
        let (discrepancy, annotations) = if scene.correct_discrepancy && !raw_pairs.is_empty() {
            let model = fit_discrepancy(&edge_correspondences(&raw_pairs, &case.calibration)).map_err(|e| e.to_string())?;
            (model, apply_discrepancy(&model, &case.annotations, &case.calibration.lp))
        } else {
            (DiscrepancyModel::IDENTITY, case.annotations.clone())
        };
        let pairs = pair_views(&annotations).map_err(|e| e.to_string())?;
        Ok(Self {
            calibs: case.calibration,
            raw_annotations: case.annotations,
            annotations,
            pairs,
            discrepancy,
            ivdl: case.ivdl,
            padding: case.padding,
            catalog: phantom.catalog,
            truth: phantom.truth.screws,
            screws: BTreeMap::new(),
            next_id: 1,
            drag: None,
        })
    }

    pub fn labels(&self) -> Vec<VertebraLabel> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    pub fn screws(&self) -> impl Iterator<Item = &Screw3D> {
        self.screws.values()
    }

    pub fn calibration(&self) -> &CalibrationPair {
        &self.calibs
    }

    pub fn discrepancy(&self) -> DiscrepancyModel {
        self.discrepancy
    }

    /// Place (or re-place) the screw for one side of a vertebra; returns its id.
    pub fn init_screw(&mut self, label: VertebraLabel, side: Side) -> Result<u64, String> {
        let pair = self.pairs.iter().find(|p| p.label == label).ok_or(format!("{label} is not in this case"))?;
        let ivdl = resolve_ivdl(&self.pairs, label, &self.ivdl, &self.calibs.ap);
        let mut screw = init_screw(pair, side, ivdl.ivdl_mm, &self.padding, &self.calibs).map_err(|e| e.to_string())?;
        self.screws.retain(|_, s| !(s.label == label && s.side == side));
        screw.id = self.next_id;
        self.next_id += 1;
        self.screws.insert(screw.id, screw);
        Ok(screw.id)
    }

    pub fn init_all(&mut self) -> Result<(), String> {
        for label in self.labels() {
            for side in [Side::L, Side::R] {
                self.init_screw(label, side)?;
            }
        }
        Ok(())
    }

    /// Topmost screw part under the pointer in one view.
    pub fn hit(&self, view: ViewKind, at: Point2) -> Option<(u64, HitRegion)> {
        self.screws.values().rev().find_map(|s| {
            let proj = fluoroplan::geometry::project_screw(s, self.calibs.get(view)).ok()?;
            match hit_test_screw(at, &proj, DEFAULT_GRAB_PX) {
                HitRegion::None => None,
                region => Some((s.id, region)),
            }
        })
    }

    pub fn pointer_down(&mut self, view: ViewKind, at: Point2) -> HitRegion {
        self.drag = self.hit(view, at).map(|(screw_id, region)| Drag { screw_id, view, region, last: at });
        self.drag.map_or(HitRegion::None, |d| d.region)
    }

    /// Continue a drag. Body drags translate, endpoint drags move the endpoint.
    /// Edits that would collapse the screw are ignored.
    pub fn pointer_move(&mut self, at: Point2) -> bool {
        let Some(drag) = self.drag.as_mut() else {
            return false;
        };
        let op = match drag.region {
            HitRegion::Body => EditOp::Translate { view: drag.view, du_px: at.u - drag.last.u, dv_px: at.v - drag.last.v },
            HitRegion::TargetEndpoint => EditOp::MoveEndpoint { view: drag.view, endpoint: Endpoint::Target, new_px: at },
            HitRegion::EntryEndpoint => EditOp::MoveEndpoint { view: drag.view, endpoint: Endpoint::Entry, new_px: at },
            HitRegion::None => return false,
        };
        let id = drag.screw_id;
        drag.last = at;
        self.edit(id, &op)
    }

    pub fn pointer_up(&mut self) {
        self.drag = None;
    }

    /// Step the radius of the screw under the pointer by `step_mm`.
    pub fn wheel(&mut self, view: ViewKind, at: Point2, step_mm: f64) -> bool {
        let Some((id, _)) = self.hit(view, at) else {
            return false;
        };
        let new_radius_mm = (self.screws[&id].radius + step_mm).clamp(1.0, 6.0);
        self.edit(id, &EditOp::Resize { new_radius_mm })
    }

    fn edit(&mut self, id: u64, op: &EditOp) -> bool {
        let Some(current) = self.screws.get(&id) else {
            return false;
        };
        match apply_edit(current, op, &self.calibs) {
            Ok(next) if ViewProjections::of(&next, &self.calibs).is_ok() => {
                self.screws.insert(id, next);
                true
            }
            _ => false,
        }
    }

    fn planned(&self, screw: &Screw3D) -> Result<PlannedScrew, String> {
        let projections = ViewProjections::of(screw, &self.calibs).map_err(|e| e.to_string())?;
        let (spec, mut warnings) = screw_report(screw, &self.catalog).map_err(|e| e.to_string())?;
        if let Some(pair) = self.pairs.iter().find(|p| p.label == screw.label) {
            let ivdl = resolve_ivdl(&self.pairs, screw.label, &self.ivdl, &self.calibs.ap);
            let mut all = validate_containment(screw, pair, ivdl.ivdl_mm, &self.calibs);
            all.append(&mut warnings);
            warnings = all;
        }
        Ok(PlannedScrew { screw: *screw, spec, projections, warnings })
    }

    pub fn state_json(&self) -> Result<String, String> {
        let screws = self
            .screws
            .values()
            .map(|s| {
                let in_corridor = self
                    .truth
                    .iter()
                    .find(|t| t.label == s.label && t.side == s.side)
                    .is_some_and(|t| t.contains(s.entry_c2) && t.contains(s.target_c1));
                Ok(ScrewView { planned: self.planned(s)?, in_corridor })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let truth = self
            .truth
            .iter()
            .filter_map(|t| {
                let seg = Screw3D {
                    id: 0,
                    label: t.label,
                    side: t.side,
                    target_c1: t.target_mm,
                    entry_c2: t.entry_mm,
                    radius: t.corridor_radius_mm,
                };
                let projections = ViewProjections::of(&seg, &self.calibs).ok()?;
                Some(TruthOverlay { label: t.label, side: t.side, projections })
            })
            .collect();
        let view = StateView {
            calibration: &self.calibs,
            raw_annotations: &self.raw_annotations,
            annotations: &self.annotations,
            discrepancy: self.discrepancy,
            truth,
            screws,
        };
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }

    /// Pixel position of a screw endpoint in one view.
    pub fn endpoint_px(&self, id: u64, view: ViewKind, which: Endpoint) -> Option<Point2> {
        self.screws.get(&id).map(|s| project_point(s.endpoint(which), self.calibs.get(view)))
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// JavaScript handle on a [`Demo`].
#[wasm_bindgen]
pub struct WasmDemo {
    inner: Demo,
}

#[wasm_bindgen]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(levels: usize, seed: u64, lp_gain: f64, lp_offset_mm: f64, correct: bool) -> Result<WasmDemo, JsError> {
        let scene = Scene { levels, seed, lp_gain, lp_offset_mm, correct_discrepancy: correct };
        Ok(WasmDemo { inner: Demo::new(scene).map_err(js_err)? })
    }

    #[wasm_bindgen(js_name = initScrew)]
    pub fn init_screw(&mut self, label: &str, side: &str) -> Result<u64, JsError> {
        self.inner.init_screw(label.parse().map_err(js_err)?, side.parse().map_err(js_err)?).map_err(js_err)
    }

    #[wasm_bindgen(js_name = initAll)]
    pub fn init_all(&mut self) -> Result<(), JsError> {
        self.inner.init_all().map_err(js_err)
    }

    #[wasm_bindgen(js_name = pointerDown)]
    pub fn pointer_down(&mut self, view: &str, u: f64, v: f64) -> Result<String, JsError> {
        let region = self.inner.pointer_down(view.parse().map_err(js_err)?, Point2::new(u, v));
        Ok(serde_json::to_value(region).map_err(js_err)?.as_str().unwrap_or_default().to_owned())
    }

    #[wasm_bindgen(js_name = pointerMove)]
    pub fn pointer_move(&mut self, u: f64, v: f64) -> bool {
        self.inner.pointer_move(Point2::new(u, v))
    }

    #[wasm_bindgen(js_name = pointerUp)]
    pub fn pointer_up(&mut self) {
        self.inner.pointer_up();
    }

    pub fn wheel(&mut self, view: &str, u: f64, v: f64, step_mm: f64) -> Result<bool, JsError> {
        Ok(self.inner.wheel(view.parse().map_err(js_err)?, Point2::new(u, v), step_mm))
    }

    /// Region under the pointer without starting a drag, for cursor feedback.
    pub fn hover(&self, view: &str, u: f64, v: f64) -> Result<String, JsError> {
        let region = self.inner.hit(view.parse().map_err(js_err)?, Point2::new(u, v)).map_or(HitRegion::None, |h| h.1);
        Ok(serde_json::to_value(region).map_err(js_err)?.as_str().unwrap_or_default().to_owned())
    }

    pub fn state(&self) -> Result<String, JsError> {
        self.inner.state_json().map_err(js_err)
    }
}
