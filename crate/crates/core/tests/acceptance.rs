//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fluoroplan::anatomy::ivdl_from_overlap;
use fluoroplan::geometry::{backproject_point, project_point, project_screw, AnteriorAt};
use fluoroplan::io::{load_case, load_plan, save_plan, PlanDocument, PlannedScrew};
use fluoroplan::phantom::{evaluate_plan, generate_phantom, PhantomSpec};
use fluoroplan::planning::{init_screw, screw_report, validate_containment, VertebraExtents};
use fluoroplan::service::{ServiceConfig, Session};
use fluoroplan::sync::{apply_edit, fit_discrepancy};
use fluoroplan::{
    BBox2D, CalibrationPair, DiscrepancyModel, EditOp, Endpoint, PaddingConfig, Point2, Point3, Screw3D, Side,
    VertebraLabel, VertebraPair, ViewCalibration, ViewKind, ViewProjections,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn random_calib(rng: &mut ChaCha8Rng, view: ViewKind) -> ViewCalibration {
    ViewCalibration {
        view,
        mm_per_px_u: rng.random_range(0.05..2.0),
        mm_per_px_v: rng.random_range(0.05..2.0),
        origin_px: Point2::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)),
        image_size_px: [rng.random_range(64..2048), rng.random_range(64..2048)],
        anterior_at: if rng.random_bool(0.5) { AnteriorAt::Right } else { AnteriorAt::Left },
    }
}

fn random_point(rng: &mut ChaCha8Rng, span: f64) -> Point3 {
    Point3::new(rng.random_range(-span..span), rng.random_range(-span..span), rng.random_range(-span..span))
}

fn projection_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        for view in ViewKind::BOTH {
            let calib = random_calib(&mut rng, view);
            let p = random_point(&mut rng, 400.0);
            let hidden = view.hidden_axis().get(&p);
            let back = backproject_point(project_point(p, &calib), &calib, hidden);
            worst = worst.max(back.distance(p));
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("max error {worst:.3e} mm, {} ms", elapsed.as_millis());
    if worst <= 1e-9 && elapsed < Duration::from_secs(1) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Calibration pair whose vertical mapping is shared, as after discrepancy correction.
fn shared_v_calibs(rng: &mut ChaCha8Rng) -> CalibrationPair {
    let ap = random_calib(rng, ViewKind::Ap);
    let lp = ViewCalibration {
        mm_per_px_v: ap.mm_per_px_v,
        origin_px: Point2::new(rng.random_range(-500.0..500.0), ap.origin_px.v),
        ..random_calib(rng, ViewKind::Lp)
    };
    CalibrationPair { ap, lp }
}

fn random_screw(rng: &mut ChaCha8Rng) -> Screw3D {
    let target = random_point(rng, 200.0);
    let mut entry = random_point(rng, 200.0);
    // Keep the screw visible as a segment in both views.
    entry.x = target.x + rng.random_range(10.0..60.0);
    entry.y = target.y + rng.random_range(10.0..60.0);
    Screw3D {
        id: 1,
        label: VertebraLabel::L4,
        side: Side::L,
        target_c1: target,
        entry_c2: entry,
        radius: rng.random_range(1.0..5.0),
    }
}

fn random_edit(rng: &mut ChaCha8Rng, view: ViewKind, screw: &Screw3D, calibs: &CalibrationPair) -> EditOp {
    match rng.random_range(0..3) {
        0 => EditOp::Translate { view, du_px: rng.random_range(-20.0..20.0), dv_px: rng.random_range(-20.0..20.0) },
        1 => {
            let endpoint = if rng.random_bool(0.5) { Endpoint::Target } else { Endpoint::Entry };
            let at = project_point(screw.endpoint(endpoint), calibs.get(view));
            let new_px = Point2::new(at.u + rng.random_range(-15.0..15.0), at.v + rng.random_range(-15.0..15.0));
            EditOp::MoveEndpoint { view, endpoint, new_px }
        }
        _ => EditOp::Resize { new_radius_mm: rng.random_range(1.0..5.0) },
    }
}

fn sync_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut applied, mut rejected) = (0usize, 0usize);
    for s in 0..200 {
        let calibs = shared_v_calibs(&mut rng);
        let mut screw = random_screw(&mut rng);
        for e in 0..50 {
            let view = if e % 2 == 0 { ViewKind::Ap } else { ViewKind::Lp };
            let op = random_edit(&mut rng, view, &screw, &calibs);
            let next = match apply_edit(&screw, &op, &calibs) {
                Ok(n) => n,
                Err(_) => {
                    rejected += 1;
                    continue;
                }
            };
            let Ok(projs) = ViewProjections::of(&next, &calibs) else {
                rejected += 1;
                continue;
            };
            let hidden = view.hidden_axis();
            for which in [Endpoint::Target, Endpoint::Entry] {
                let (before, after) = (screw.endpoint(which), next.endpoint(which));
                let keeps_hidden = match op {
                    EditOp::Resize { .. } => before == after,
                    _ => hidden.get(&before) == hidden.get(&after),
                };
                if !keeps_hidden {
                    return Err(format!("screw {s} edit {e}: hidden axis changed on {which:?}"));
                }
            }
            let (ap, lp) = (&projs.ap, &projs.lp);
            if ap.target_px.v != lp.target_px.v || ap.entry_px.v != lp.entry_px.v {
                return Err(format!("screw {s} edit {e}: v differs across views"));
            }
            screw = next;
            applied += 1;
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("{applied} edits applied, {rejected} rejected as degenerate, {} ms", elapsed.as_millis());
    if elapsed < Duration::from_secs(5) && applied > 9000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (VertebraPair, CalibrationPair) {
    let calibs = CalibrationPair { ap: random_calib(rng, ViewKind::Ap), lp: random_calib(rng, ViewKind::Lp) };
    // Build the body in world space, then project it so both boxes share Z extents.
    let y0 = rng.random_range(-100.0..100.0);
    let x0 = rng.random_range(-100.0..100.0);
    let z0 = rng.random_range(-100.0..100.0);
    let (w, d, h) = (rng.random_range(30.0..60.0), rng.random_range(30.0..60.0), rng.random_range(25.0..45.0));
    let corner = |x: f64, y: f64, z: f64, c: &ViewCalibration| project_point(Point3::new(x, y, z), c);
    let bbox = |view, a: Point2, b: Point2| {
        BBox2D::new(view, VertebraLabel::L4, a.u.min(b.u), a.v.min(b.v), a.u.max(b.u), a.v.max(b.v))
    };
    let ap_box = bbox(ViewKind::Ap, corner(x0, y0, z0, &calibs.ap), corner(x0, y0 + w, z0 + h, &calibs.ap));
    let lp_box = bbox(ViewKind::Lp, corner(x0, y0, z0, &calibs.lp), corner(x0 + d, y0, z0 + h, &calibs.lp));
    (VertebraPair { label: VertebraLabel::L4, ap_box, lp_box }, calibs)
}

fn algorithm_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = PaddingConfig::default();
    for i in 0..100 {
        let (pair, calibs) = random_pair(&mut rng);
        let ivdl = rng.random_range(0.0..10.0);
        let l = init_screw(&pair, Side::L, ivdl, &cfg, &calibs).map_err(|e| format!("pair {i}: {e}"))?;
        let r = init_screw(&pair, Side::R, ivdl, &cfg, &calibs).map_err(|e| format!("pair {i}: {e}"))?;
        for s in [&l, &r] {
            let w = validate_containment(s, &pair, ivdl, &calibs);
            if !w.is_empty() {
                return Err(format!("pair {i} {:?}: {w:?}", s.side));
            }
        }
        let ext = VertebraExtents::of(&pair, &calibs);
        let yc = ext.y_center();
        let entry_off = ext.width() / 2.0 - cfg.pad_entry_mm;
        let mirrored = (l.target_c1.y, r.target_c1.y) == (yc - cfg.pad_target_mm, yc + cfg.pad_target_mm)
            && (l.entry_c2.y, r.entry_c2.y) == (yc - entry_off, yc + entry_off)
            && (l.target_c1.x, l.target_c1.z, l.entry_c2.x, l.entry_c2.z)
                == (r.target_c1.x, r.target_c1.z, r.entry_c2.x, r.entry_c2.z);
        if !mirrored {
            return Err(format!("pair {i}: L/R not mirrored about Yc"));
        }
    }
    Ok("100 pairs contained, mirror exact".into())
}

fn ivdl_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let calib = ViewCalibration::identity(ViewKind::Ap, [512, 512]);
    let mut touching = 0;
    for i in 0..10_000 {
        let top_u = rng.random_range(0..200i32);
        let h_u = rng.random_range(1..60i32);
        let top_l = rng.random_range(top_u + 1..top_u + 80);
        // Force the shared-edge boundary regularly.
        let top_l = if i % 10 == 0 { top_u + h_u } else { top_l };
        let h_l = rng.random_range(1..60i32);
        let upper = BBox2D::new(ViewKind::Ap, VertebraLabel::L4, 0.0, top_u.into(), 10.0, (top_u + h_u).into());
        let lower = BBox2D::new(ViewKind::Ap, VertebraLabel::L5, 0.0, top_l.into(), 10.0, (top_l + h_l).into());
        let brute = (top_l..top_l + h_l).filter(|row| (top_u..top_u + h_u).contains(row)).count();
        let got = ivdl_from_overlap(&upper, &lower, &calib);
        let ok = match got {
            Ok(mm) => brute > 0 && mm == brute as f64,
            Err(fluoroplan::anatomy::AnatomyError::NoOverlap) => {
                if top_l == top_u + h_u {
                    touching += 1;
                }
                brute == 0
            }
            Err(_) => false,
        };
        if !ok {
            return Err(format!("case {i}: upper [{top_u},{}) lower [{top_l},{}) got {got:?}, brute {brute}", top_u + h_u, top_l + h_l));
        }
    }
    Ok(format!("10000 pairs exact, {touching} touching boxes reported NoOverlap"))
}

fn discrepancy_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_param, mut worst_landmark) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let a = rng.random_range(0.9..1.1);
        let b = rng.random_range(-10.0..10.0);
        let n = rng.random_range(4..12);
        let corr: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let z_ap: f64 = rng.random_range(0.0..250.0);
                (z_ap, (z_ap - b) / a)
            })
            .collect();
        let model: DiscrepancyModel = fit_discrepancy(&corr).map_err(|e| e.to_string())?;
        worst_param = worst_param.max((model.gain_a - a).abs()).max((model.offset_b_mm - b).abs());
        for &(z_ap, z_lp) in &corr {
            worst_landmark = worst_landmark.max((model.correct(z_lp) - z_ap).abs());
        }
    }
    let detail = format!("max parameter error {worst_param:.3e}, max landmark mismatch {worst_landmark:.3e} mm");
    if worst_param <= 1e-9 && worst_landmark <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn plan_every_screw(case_path: &Path) -> Result<Session, String> {
    let mut s = Session::new(ServiceConfig::default());
    let case = load_case(case_path).map_err(|e| e.to_string())?;
    let mut send = |m: Value| -> Result<Value, String> {
        let r: Value = serde_json::from_str(&s.handle_line(&m.to_string())).map_err(|e| e.to_string())?;
        if r["ok"] == true { Ok(r) } else { Err(r.to_string()) }
    };
    send(json!({"type": "open_case", "path": case_path}))?;
    for pair in &case.pairs {
        for side in ["L", "R"] {
            send(json!({"type": "init_screw", "label": pair.label, "side": side}))?;
        }
    }
    send(json!({"type": "export_plan", "path": "plan.json"}))?;
    Ok(s)
}

fn end_to_end_phantom() -> Outcome {
    let mut screws = 0;
    for seed in 0..30u64 {
        let levels = 1 + (seed % 3) as usize;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ph = generate_phantom(&PhantomSpec::new(levels, seed)).map_err(|e| e.to_string())?;
        let case_path = ph.write(dir.path()).map_err(|e| e.to_string())?;
        plan_every_screw(&case_path).map_err(|e| format!("seed {seed}: {e}"))?;
        let (plan, _) = load_plan(&dir.path().join("plan.json")).map_err(|e| e.to_string())?;
        let errors = evaluate_plan(&plan, &ph.truth).map_err(|e| e.to_string())?;
        if errors.len() != 2 * levels {
            return Err(format!("seed {seed}: {} screws scored", errors.len()));
        }
        for (e, planned) in errors.iter().zip(&plan.screws) {
            let t = ph.truth.find(e.label, e.side).ok_or("missing truth")?;
            let norm = |a: Point3, b: Point3| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
            let (s, t_entry, t_target) = (&planned.screw, t.entry_mm, t.target_mm);
            if !e.contained {
                return Err(format!("seed {seed}: {e:?} not contained"));
            }
            if (e.entry_error_mm - norm(s.entry_c2, t_entry)).abs() > 1e-9
                || (e.target_error_mm - norm(s.target_c1, t_target)).abs() > 1e-9
            {
                return Err(format!("seed {seed}: {e:?} disagrees with hand-computed norms"));
            }
            screws += 1;
        }
    }
    Ok(format!("30 phantoms, {screws} screws, all contained"))
}

fn transcript(case: &Path) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut msgs = vec![json!({"req": 0, "type": "open_case", "path": case})];
    let labels = ["L4", "L5", "L3"];
    while msgs.len() < 100 {
        let req = msgs.len();
        let id = rng.random_range(1..6);
        let view = if rng.random_bool(0.5) { "AP" } else { "LP" };
        let m = match rng.random_range(0..10) {
            0 | 1 => json!({"type": "init_screw", "label": labels[rng.random_range(0..3)], "side": if rng.random_bool(0.5) { "L" } else { "R" }}),
            2 => json!({"type": "select_vertebra", "view": view, "point_px": [rng.random_range(80..300), rng.random_range(40..230)]}),
            3 => json!({"type": "delete_screw", "screw_id": id}),
            4 => json!({"type": "get_state"}),
            5 => json!({"type": "edit", "screw_id": id, "edit": {"op": "resize", "new_radius_mm": rng.random_range(1.5..4.0)}}),
            6 | 7 => json!({"type": "edit", "screw_id": id, "edit": {"op": "translate", "view": view, "du_px": rng.random_range(-5.0..5.0), "dv_px": rng.random_range(-5.0..5.0)}}),
            _ => json!({"type": "edit", "screw_id": id, "edit": {"op": "move_endpoint", "view": view, "endpoint": if rng.random_bool(0.5) { "target" } else { "entry" }, "new_px": [rng.random_range(100.0..280.0), rng.random_range(50.0..215.0)]}}),
        };
        let mut m = m;
        m["req"] = json!(req);
        msgs.push(m);
    }
    msgs.push(json!({"req": "final", "type": "get_state"}));
    msgs.iter().map(Value::to_string).collect()
}

fn protocol_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let case = common::write_case(dir.path(), &common::worked_case_file());
    let lines = transcript(&case);
    let record = |lines: &[String]| -> Vec<String> {
        let mut s = Session::new(ServiceConfig::default());
        lines.iter().map(|l| s.handle_line(l)).collect()
    };
    let recorded = record(&lines);
    let replayed = record(&lines);
    let ok_count = recorded.iter().filter(|r| r.contains("\"ok\":true")).count();
    let (a, b) = (recorded.last().unwrap(), replayed.last().unwrap());
    let detail = format!("{} messages, {ok_count} accepted, final state {} bytes", lines.len() - 1, a.len());
    if a == b && recorded == replayed && a.contains("\"ok\":true") {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn plan_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for trial in 0..20 {
        let calibs = CalibrationPair { ap: random_calib(&mut rng, ViewKind::Ap), lp: random_calib(&mut rng, ViewKind::Lp) };
        let mut doc = PlanDocument::new("case.json".into(), calibs, DiscrepancyModel { gain_a: rng.random_range(0.9..1.1), offset_b_mm: rng.random_range(-10.0..10.0) }, trial);
        for id in 0..rng.random_range(1..6) {
            let screw = Screw3D { id, ..random_screw(&mut rng) };
            let (spec, warnings) = screw_report(&screw, &Default::default()).map_err(|e| e.to_string())?;
            let projections = ViewProjections::of(&screw, &calibs).map_err(|e| e.to_string())?;
            doc.screws.push(PlannedScrew { screw, spec, projections, warnings });
        }
        let path = dir.path().join(format!("plan{trial}.json"));
        save_plan(&doc, &path).map_err(|e| e.to_string())?;
        let (back, stale) = load_plan(&path).map_err(|e| e.to_string())?;
        if !stale.is_empty() {
            return Err(format!("trial {trial}: {stale:?}"));
        }
        let floats = |d: &PlanDocument| -> Vec<f64> {
            let mut v = Vec::new();
            collect_floats(&serde_json::to_value(d).unwrap(), &mut v);
            v
        };
        let (fa, fb) = (floats(&doc), floats(&back));
        let strip = |d: &PlanDocument| {
            let mut v = serde_json::to_value(d).unwrap();
            zero_floats(&mut v);
            v
        };
        if fa.len() != fb.len() || !fa.iter().zip(&fb).all(|(a, b)| close(*a, *b)) || strip(&doc) != strip(&back) {
            return Err(format!("trial {trial}: plan changed across save/load"));
        }
        for (p, q) in doc.screws.iter().zip(&back.screws) {
            for view in ViewKind::BOTH {
                let fresh = project_screw(&q.screw, calibs.get(view)).map_err(|e| e.to_string())?;
                if fresh.max_deviation(p.projections.get(view)) > 1e-9 {
                    return Err(format!("trial {trial}: projections drifted"));
                }
            }
        }
    }
    Ok("20 plans lossless at 1e-12 relative".into())
}

fn collect_floats(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| collect_floats(x, out)),
        Value::Object(m) => m.values().for_each(|x| collect_floats(x, out)),
        _ => {}
    }
}

fn zero_floats(v: &mut Value) {
    match v {
        Value::Number(_) => *v = json!(0),
        Value::Array(a) => a.iter_mut().for_each(zero_floats),
        Value::Object(m) => m.values_mut().for_each(zero_floats),
        _ => {}
    }
}

fn main() -> ExitCode {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 8] = [
        ("projection round-trip", projection_round_trip),
        ("synchronization exactness", sync_exactness),
        ("screw initialization conformance", algorithm_conformance),
        ("disk-height overlap oracle", ivdl_oracle),
        ("discrepancy recovery", discrepancy_recovery),
        ("end-to-end phantom", end_to_end_phantom),
        ("protocol replay", protocol_replay),
        ("plan round-trip", plan_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
