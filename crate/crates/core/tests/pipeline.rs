use std::path::PathBuf;
use std::sync::Arc;

use decor_core::compiler::compile_plan;
use decor_core::geometry::{footprint_contained, Rect, Surface};
use decor_core::llm::{RuleBasedStub, ScriptedStub};
use decor_core::metrics::{scene_bbl_m3, scene_out_of_bounds};
use decor_core::optimizer::check_hard;
use decor_core::pipeline::{apply_ops, export_svg, EditOp, EditRequest, Engine, JobRequest, JobState, JobStore, PipelineError};
use decor_core::scene::{
    footprint, AssetSpec, DecorScene, Furniture, Layout, Orientation, Placement, PlanDirective, PositionRelation, Provenance,
    SCENE_SCHEMA_VERSION,
};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn rule_engine() -> Engine {
    Engine::new(Arc::new(RuleBasedStub))
}

fn hard_violations(scene: &DecorScene) -> usize {
    let cs = compile_plan(&scene.directives, &scene.assets, &scene.furniture.surfaces).unwrap();
    let mut p = scene.provenance.solver.clone();
    p.seed = scene.provenance.seed;
    check_hard(&scene.layout, &cs, &scene.furniture.surfaces, &p).len()
}

fn asset(id: &str, w: f64, d: f64, h: f64) -> AssetSpec {
    AssetSpec {
        id: id.into(),
        name: id.into(),
        width_cm: w,
        depth_cm: d,
        height_cm: h,
        surface_index: 0,
        style: String::new(),
        material: String::new(),
    }
}

#[test]
fn scripted_trio_job_places_a_desk_set() {
    let stub = ScriptedStub::from_dir(data("data/stub_trio")).unwrap();
    let engine = Engine::new(Arc::new(stub));
    let scene = engine.decorate(&JobRequest::new("fixture:flat_desk", "a tidy computer desk", 3, 0)).unwrap();
    let place = |id: &str| scene.layout.get(id).unwrap().clone();
    let rect = |id: &str| {
        let p = place(id);
        footprint(scene.asset(id).unwrap(), p.x_cm, p.y_cm, p.orientation)
    };
    let (monitor, keyboard, mouse) = (rect("monitor-1"), rect("keyboard-1"), rect("computer_mouse-1"));
    assert!(keyboard.max_y <= monitor.min_y + 1e-9, "keyboard in front of the monitor");
    assert!(mouse.min_x >= monitor.max_x - 1e-9, "mouse right of the monitor");
    assert!(mouse.gap(&monitor) < 15.0);
    assert_eq!(hard_violations(&scene), 0);

    // The fourth scripted reply is the edit.
    let next = engine.edit(&scene, &EditRequest::Instruction { instruction: "add a vase of sunflower".into() }).unwrap();
    let vase = next.asset("vase_of_sunflower-1").expect("inserted");
    assert_eq!((vase.style.as_str(), vase.material.as_str()), ("Rustic", "glass"));
    assert_eq!(hard_violations(&next), 0);
    assert_eq!(next.layout.len(), 4);
}

#[test]
fn eight_asset_desk_job_is_feasible() {
    let s = rule_engine().decorate(&JobRequest::new("fixture:desk_with_shelf", "study corner", 8, 1)).unwrap();
    assert_eq!(s.layout.len(), 8);
    assert!(!scene_out_of_bounds(&s));
    assert_eq!(scene_bbl_m3(&s), 0.0);
}

#[test]
fn single_asset_on_single_surface() {
    let s = rule_engine().decorate(&JobRequest::new("fixture:nightstand", "bedside", 1, 4)).unwrap();
    assert_eq!(s.assets.len(), 1);
    assert_eq!(s.furniture.surfaces.len(), 1);
    assert_eq!(hard_violations(&s), 0);
}

#[test]
fn removing_one_of_eight_keeps_other_surfaces() {
    let e = rule_engine();
    let s = e.decorate(&JobRequest::new("fixture:desk_with_shelf", "study corner", 8, 2)).unwrap();
    let victim = s.assets.iter().find(|a| a.surface_index == 1).unwrap().clone();
    let next = e.apply_edit(&s, &[EditOp::Remove { target: victim.id.clone() }]).unwrap();
    assert_eq!(next.assets.len(), 7);
    for a in s.assets.iter().filter(|a| a.surface_index == 0) {
        assert_eq!(s.layout.get(&a.id), next.layout.get(&a.id), "{}", a.id);
    }
    assert_eq!(hard_violations(&next), 0);
    assert_eq!(next.bindings.len(), 7);
}

#[test]
fn rotating_in_open_space_keeps_position() {
    let surfaces = vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 100.0, 100.0), 75.0, 1.0)];
    let mut layout = Layout::default();
    layout.insert("box", Placement { x_cm: 50.0, y_cm: 50.0, orientation: Orientation::default(), stack_base: None, z_cm: 75.0 });
    let scene = DecorScene {
        schema_version: SCENE_SCHEMA_VERSION,
        revision: 0,
        furniture: Furniture { mesh: "test".into(), surfaces },
        assets: vec![asset("box", 30.0, 10.0, 10.0)],
        directives: vec![],
        layout,
        bindings: Default::default(),
        provenance: Provenance::default(),
    };
    let next = apply_ops(&scene, &[EditOp::Rotate { target: "box".into(), orientation: Orientation::from_quarter_turns(1) }], None, 10).unwrap();
    let p = next.layout.get("box").unwrap();
    assert_eq!((p.x_cm, p.y_cm), (50.0, 50.0));
    assert_eq!(p.orientation.yaw_deg(), 90);
    assert_eq!(hard_violations(&next), 0);
    assert_eq!(next.revision, 1);
}

#[test]
fn bad_targets_and_payloads_are_rejected() {
    let e = rule_engine();
    let s = e.decorate(&JobRequest::new("fixture:flat_desk", "desk", 3, 0)).unwrap();
    let err = e.apply_edit(&s, &[EditOp::Remove { target: "piano-1".into() }]).unwrap_err();
    assert!(matches!(&err, PipelineError::InvalidEdit(r) if r.has("unknown_target")));
    let id = s.assets[0].id.clone();
    let err = e.apply_edit(&s, &[EditOp::Resize { target: id.clone(), width_cm: -1.0, depth_cm: 5.0, height_cm: 5.0 }]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let other = s.assets[1].id.clone();
    let stack = PlanDirective::RelativePosition { subject: other.clone(), reference: other, relation: PositionRelation::OnTopOf };
    let err = e.apply_edit(&s, &[EditOp::Reposition { target: id, directives: vec![stack] }]).unwrap_err();
    assert!(matches!(&err, PipelineError::InvalidEdit(r) if r.has("bad_subject")));
}

#[test]
fn oversize_resize_is_infeasible_and_atomic() {
    let e = rule_engine();
    let s = e.decorate(&JobRequest::new("fixture:flat_desk", "desk", 4, 0)).unwrap();
    let before = s.to_json();
    let id = s.assets[0].id.clone();
    let err = e.apply_edit(&s, &[EditOp::Resize { target: id, width_cm: 130.0, depth_cm: 70.0, height_cm: 5.0 }]).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    assert_eq!(s.to_json(), before);
}

#[test]
fn svg_golden() {
    let s = rule_engine().decorate(&JobRequest::new("fixture:desk_with_shelf", "study corner", 8, 3)).unwrap();
    let path = data("golden/desk_with_shelf_8_surface0.svg");
    let svg = export_svg(&s, 0).unwrap();
    if std::env::var_os("DECOR_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden file present; set DECOR_UPDATE_GOLDEN=1 to create it");
    assert_eq!(svg, want);
}

#[test]
fn svg_empty_surface_and_stacked_lamp() {
    let surfaces = vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 80.0, 40.0), 75.0, 1.0)];
    let mut scene = DecorScene {
        schema_version: SCENE_SCHEMA_VERSION,
        revision: 0,
        furniture: Furniture { mesh: "test".into(), surfaces },
        assets: vec![],
        directives: vec![],
        layout: Layout::default(),
        bindings: Default::default(),
        provenance: Provenance::default(),
    };
    let empty = export_svg(&scene, 0).unwrap();
    assert_eq!(empty.matches("<polygon").count(), 1);
    assert_eq!(empty.matches("region-grid").count(), 4);
    assert_eq!(empty.matches("<rect").count(), 0);

    scene.assets = vec![asset("box", 20.0, 20.0, 10.0), asset("lamp", 10.0, 10.0, 30.0)];
    scene.layout.insert("box", Placement { x_cm: 40.0, y_cm: 20.0, orientation: Orientation::default(), stack_base: None, z_cm: 75.0 });
    scene.layout.insert(
        "lamp",
        Placement { x_cm: 40.0, y_cm: 20.0, orientation: Orientation::default(), stack_base: Some("box".into()), z_cm: 85.0 },
    );
    let svg = export_svg(&scene, 0).unwrap();
    let lamp = svg.split(r#"data-id="lamp""#).nth(1).unwrap();
    assert!(lamp.contains(r##"fill="#e53935""##));
    assert!(lamp.contains(r#"<rect x="40.00" y="20.00" width="10.00" height="10.00""#));
    let base = svg.split(r#"data-id="box""#).nth(1).unwrap();
    assert!(base.contains(r#"<rect x="35.00" y="15.00" width="20.00" height="20.00""#));
    assert!(footprint_contained(&scene.furniture.surfaces[0], &Rect::new(30.0, 10.0, 50.0, 30.0)));
}

#[test]
fn job_store_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = JobStore::open(dir.path()).unwrap();
    let req = JobRequest::new("fixture:flat_desk", "desk", 3, 9);
    let id = store.create(&req).unwrap();
    let (scene, transcripts) = rule_engine().decorate_traced(&req);
    let scene = scene.unwrap();
    store.append_transcripts(&id, &transcripts).unwrap();
    store.save_scene(&id, &scene).unwrap();
    assert_eq!(store.scene(&id).unwrap(), scene);
    assert_eq!(store.revision(&id, 0).unwrap(), scene);
    assert_eq!(store.transcripts(&id).unwrap(), transcripts);
    assert_eq!(store.metrics(&id).unwrap().oob_rate, 0.0);
    let mut st = store.status(&id).unwrap();
    assert_eq!(st.state, JobState::Pending);
    st.state = JobState::Done;
    store.set_status(&st).unwrap();
    assert_eq!(store.status(&id).unwrap().state, JobState::Done);
    for f in ["request.json", "scene.json", "metrics.json", "status.json", "transcripts.jsonl", "revisions/rev-0000.json"] {
        assert!(dir.path().join(&id).join(f).is_file(), "{f}");
    }
}
