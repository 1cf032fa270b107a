//! Planning sessions driven by JSON messages.
//!
//! Each request is one JSON object with a `type`, an optional client `req` id
//! (echoed back verbatim) and an optional `expected_revision`. Every reply
//! carries `ok`, `req` and the session `revision`. State-changing messages bump
//! the revision by exactly one; failed messages leave the session untouched.
//!
//! [`run_ndjson`] serves one session over any newline-delimited byte stream.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::anatomy::{hit_test_vertebra, resolve_ivdl, Side, VertebraLabel};
use crate::geometry::{Point2, ViewKind, ViewProjections};
use crate::io::{load_case, save_plan, Case, PlanDocument, PlannedScrew};
use crate::planning::{init_screw, screw_report, validate_containment, Screw3D};
use crate::sync::{apply_edit, EditOp, DEFAULT_GRAB_PX};
use crate::warning::Warning;
use crate::{Error as CoreError, ExitClass};

/// Restricts `open_case` paths to a directory tree.
pub const CASE_ROOT_ENV: &str = "FLUOROPLAN_CASE_ROOT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no screw with id {0}")]
    UnknownScrew(u64),
    #[error("vertebra {0} is not paired in this case")]
    UnknownLabel(VertebraLabel),
    #[error("expected revision {expected}, session is at {actual}")]
    StaleRevision { expected: u64, actual: u64 },
    #[error("no case is open")]
    NoCase,
    #[error("a case is already open in this session")]
    CaseAlreadyOpen,
    #[error("path {0} is outside the case root")]
    PathNotAllowed(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{label}-{side} already has a screw")]
    DuplicateScrew { label: VertebraLabel, side: Side },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownScrew(_) => "UnknownScrew",
            ServiceError::UnknownLabel(_) => "UnknownLabel",
            ServiceError::StaleRevision { .. } => "StaleRevision",
            ServiceError::NoCase => "NoCase",
            ServiceError::CaseAlreadyOpen => "CaseAlreadyOpen",
            ServiceError::PathNotAllowed(_) => "PathNotAllowed",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::DuplicateScrew { .. } => "DuplicateScrew",
            ServiceError::Core(e) => e.code(),
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            ServiceError::Core(e) => e.exit_class(),
            _ => ExitClass::Validation,
        }
    }
}

macro_rules! core_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for ServiceError {
            fn from(e: $ty) -> Self {
                ServiceError::Core(CoreError::from(e))
            }
        }
    )*};
}

core_error!(
    crate::geometry::GeometryError,
    crate::anatomy::AnatomyError,
    crate::planning::PlanningError,
    crate::sync::SyncError,
    crate::io::IoError
);

type ServiceResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub case_root: Option<PathBuf>,
    pub grab_px: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { case_root: None, grab_px: DEFAULT_GRAB_PX }
    }
}

impl ServiceConfig {
    /// Defaults, with the case root taken from the environment when set.
    pub fn from_env() -> Self {
        Self {
            case_root: std::env::var_os(CASE_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
            ..Self::default()
        }
    }
}

/// The message catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    OpenCase { path: String },
    SelectVertebra { view: ViewKind, point_px: Point2 },
    InitScrew { label: VertebraLabel, side: Side },
    Edit { screw_id: u64, edit: EditOp },
    DeleteScrew { screw_id: u64 },
    GetState {},
    ExportPlan { path: String },
}

impl Request {
    pub fn changes_state(&self) -> bool {
        !matches!(self, Request::GetState {} | Request::ExportPlan { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub view: ViewKind,
    pub point_px: Point2,
    pub label: VertebraLabel,
}

/// One planning session over one case.
#[derive(Debug)]
pub struct Session {
    config: ServiceConfig,
    case: Option<Case>,
    case_ref: String,
    screws: BTreeMap<u64, Screw3D>,
    next_screw_id: u64,
    revision: u64,
    selection: Vec<Selection>,
}

impl Session {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            case: None,
            case_ref: String::new(),
            screws: BTreeMap::new(),
            next_screw_id: 1,
            revision: 0,
            selection: Vec::new(),
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn case(&self) -> Option<&Case> {
        self.case.as_ref()
    }

    pub fn screws(&self) -> impl Iterator<Item = &Screw3D> {
        self.screws.values()
    }

    /// Handle one raw JSON message and produce the serialized reply.
    pub fn handle_line(&mut self, line: &str) -> String {
        let reply = match serde_json::from_str::<Value>(line) {
            Ok(v) => self.handle_value(v),
            Err(e) => self.error_reply(Value::Null, &ServiceError::BadRequest(e.to_string())),
        };
        serde_json::to_string(&reply).expect("reply serializes")
    }

    pub fn handle_value(&mut self, msg: Value) -> Value {
        let req = msg.get("req").cloned().unwrap_or(Value::Null);
        let expected = msg.get("expected_revision").cloned();
        let result = (|| -> ServiceResult<Map<String, Value>> {
            if let Some(expected) = expected.filter(|v| !v.is_null()) {
                let expected = expected
                    .as_u64()
                    .ok_or_else(|| ServiceError::BadRequest("expected_revision must be an integer".into()))?;
                if expected != self.revision {
                    return Err(ServiceError::StaleRevision { expected, actual: self.revision });
                }
            }
            let request: Request =
                serde_json::from_value(msg).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            self.handle(request)
        })();
        match result {
            Ok(mut body) => {
                body.insert("ok".into(), Value::Bool(true));
                body.insert("req".into(), req);
                body.insert("revision".into(), json!(self.revision));
                Value::Object(body)
            }
            Err(e) => self.error_reply(req, &e),
        }
    }

    fn error_reply(&self, req: Value, e: &ServiceError) -> Value {
        json!({
            "ok": false,
            "req": req,
            "revision": self.revision,
            "error": { "code": e.code(), "message": e.to_string() },
        })
    }

    /// Apply a typed request. On error the session is unchanged.
    pub fn handle(&mut self, request: Request) -> ServiceResult<Map<String, Value>> {
        let changes = request.changes_state();
        let body = match request {
            Request::OpenCase { path } => self.open_case(&path)?,
            Request::SelectVertebra { view, point_px } => self.select_vertebra(view, point_px)?,
            Request::InitScrew { label, side } => self.init_screw(label, side)?,
            Request::Edit { screw_id, edit } => self.edit(screw_id, &edit)?,
            Request::DeleteScrew { screw_id } => {
                self.require_case()?;
                self.screws.remove(&screw_id).ok_or(ServiceError::UnknownScrew(screw_id))?;
                Map::new()
            }
            Request::GetState {} => to_map(self.snapshot()?),
            Request::ExportPlan { path } => self.export_plan(&path)?,
        };
        if changes {
            self.revision += 1;
        }
        Ok(body)
    }

    fn require_case(&self) -> ServiceResult<&Case> {
        self.case.as_ref().ok_or(ServiceError::NoCase)
    }

    fn resolve_case_path(&self, path: &str) -> ServiceResult<PathBuf> {
        let Some(root) = &self.config.case_root else {
            return Ok(PathBuf::from(path));
        };
        let root = root
            .canonicalize()
            .map_err(|_| ServiceError::PathNotAllowed(format!("case root {} is not accessible", root.display())))?;
        let joined = root.join(path);
        let resolved = joined.canonicalize().map_err(|source| {
            CoreError::Io(crate::io::IoError::Io { path: joined.clone(), source })
        })?;
        if !resolved.starts_with(&root) {
            return Err(ServiceError::PathNotAllowed(path.to_owned()));
        }
        Ok(resolved)
    }

    fn resolve_output_path(&self, case: &Case, path: &str) -> ServiceResult<PathBuf> {
        let p = Path::new(path);
        let resolved = if p.is_absolute() { p.to_owned() } else { case.base_dir().join(p) };
        if let Some(root) = &self.config.case_root {
            let root = root.canonicalize().map_err(|_| ServiceError::PathNotAllowed(path.to_owned()))?;
            let parent = resolved
                .parent()
                .and_then(|d| d.canonicalize().ok())
                .ok_or_else(|| ServiceError::PathNotAllowed(path.to_owned()))?;
            if !parent.starts_with(&root) {
                return Err(ServiceError::PathNotAllowed(path.to_owned()));
            }
        }
        Ok(resolved)
    }

    fn open_case(&mut self, path: &str) -> ServiceResult<Map<String, Value>> {
        if self.case.is_some() {
            return Err(ServiceError::CaseAlreadyOpen);
        }
        let resolved = self.resolve_case_path(path)?;
        let case = load_case(&resolved)?;
        self.case_ref = path.to_owned();
        self.case = Some(case);
        Ok(to_map(self.case_summary()?))
    }

    fn case_summary(&self) -> ServiceResult<Value> {
        let case = self.require_case()?;
        Ok(json!({
            "case": self.case_ref,
            "labels": case.pairs.iter().map(|p| p.label).collect::<Vec<_>>(),
            "pairs": case.pairs,
            "annotations": case.annotations,
            "calibration": case.file.calibration,
            "image_sizes_px": {
                "ap": [case.ap_image.width, case.ap_image.height],
                "lp": [case.lp_image.width, case.lp_image.height],
            },
            "discrepancy": case.discrepancy,
            "grab_px": self.config.grab_px,
            "warnings": case.warnings,
        }))
    }

    fn select_vertebra(&mut self, view: ViewKind, point_px: Point2) -> ServiceResult<Map<String, Value>> {
        let case = self.require_case()?;
        let label = hit_test_vertebra(point_px, view, &case.annotations)?;
        self.selection.retain(|s| !(s.view == view && s.label == label));
        self.selection.push(Selection { view, point_px, label });
        Ok(to_map(json!({ "label": label })))
    }

    /// Projections, size report and warnings for a screw against the open case.
    fn planned(&self, screw: &Screw3D) -> ServiceResult<PlannedScrew> {
        let case = self.require_case()?;
        let calibs = case.calibration();
        let projections = ViewProjections::of(screw, calibs)?;
        let (spec, mut warnings) = screw_report(screw, &case.catalog)?;
        if let Some(pair) = case.pair(screw.label) {
            let ivdl = resolve_ivdl(&case.pairs, screw.label, &case.file.ivdl, &calibs.ap);
            let mut all = validate_containment(screw, pair, ivdl.ivdl_mm, calibs);
            if let Some(reason) = ivdl.fallback_reason {
                all.push(Warning::IvdlFallback { label: screw.label, fixed_mm: case.file.ivdl.fixed_mm, reason });
            }
            all.append(&mut warnings);
            warnings = all;
        }
        Ok(PlannedScrew { screw: *screw, spec, projections, warnings })
    }

    fn screw_reply(planned: &PlannedScrew) -> Map<String, Value> {
        let mut body = to_map(serde_json::to_value(planned).expect("serializable"));
        body.insert("screw_id".into(), json!(planned.screw.id));
        body
    }

    fn init_screw(&mut self, label: VertebraLabel, side: Side) -> ServiceResult<Map<String, Value>> {
        let case = self.require_case()?;
        let pair = case.pair(label).ok_or(ServiceError::UnknownLabel(label))?;
        if self.screws.values().any(|s| s.label == label && s.side == side) {
            return Err(ServiceError::DuplicateScrew { label, side });
        }
        let ivdl = resolve_ivdl(&case.pairs, label, &case.file.ivdl, &case.calibration().ap);
        let mut screw = init_screw(pair, side, ivdl.ivdl_mm, &case.file.padding, case.calibration())?;
        screw.id = self.next_screw_id;
        let planned = self.planned(&screw)?;
        self.next_screw_id += 1;
        self.screws.insert(screw.id, screw);
        Ok(Self::screw_reply(&planned))
    }

    fn edit(&mut self, screw_id: u64, op: &EditOp) -> ServiceResult<Map<String, Value>> {
        let case = self.require_case()?;
        let current = self.screws.get(&screw_id).ok_or(ServiceError::UnknownScrew(screw_id))?;
        let edited = apply_edit(current, op, case.calibration())?;
        let planned = self.planned(&edited)?;
        self.screws.insert(screw_id, edited);
        Ok(Self::screw_reply(&planned))
    }

    /// Full, deterministic session state.
    pub fn snapshot(&self) -> ServiceResult<Value> {
        let screws = self.screws.values().map(|s| self.planned(s)).collect::<ServiceResult<Vec<_>>>()?;
        let case = if self.case.is_some() { self.case_summary()? } else { Value::Null };
        Ok(json!({
            "case": case,
            "screws": screws,
            "selection": self.selection,
            "next_screw_id": self.next_screw_id,
        }))
    }

    pub fn plan_document(&self) -> ServiceResult<PlanDocument> {
        let case = self.require_case()?;
        let mut doc = PlanDocument::new(self.case_ref.clone(), *case.calibration(), case.discrepancy, self.revision);
        doc.screws = self.screws.values().map(|s| self.planned(s)).collect::<ServiceResult<_>>()?;
        Ok(doc)
    }

    fn export_plan(&self, path: &str) -> ServiceResult<Map<String, Value>> {
        let case = self.require_case()?;
        let out = self.resolve_output_path(case, path)?;
        save_plan(&self.plan_document()?, &out)?;
        Ok(to_map(json!({ "path": out.display().to_string() })))
    }
}

fn to_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

/// Serve one session over a newline-delimited JSON stream until EOF.
/// Blank lines are skipped.
pub fn run_ndjson<R: BufRead, W: Write>(session: &mut Session, reader: R, mut writer: W) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = session.handle_line(&line);
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}
