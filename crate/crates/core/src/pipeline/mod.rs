//! End-to-end orchestration: mesh to decorated scene, edits, exports and job
//! persistence.

mod edit;
mod store;
mod svg;

pub use edit::{apply_ops, check_ops, EditOp, EditReply, EditRequest, NEW_ASSET};
pub use store::{write_atomic, JobState, JobStatus, JobStore};
pub use svg::export_svg;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::validate::{extract_json, ValidationReport, Violation};
use crate::agents::{plan, run_stage_with, select_assets, stylize, AgentConfig, AgentError, Stage, StageContext, TranscriptEntry};
use crate::compiler::{compile_plan, CompileError};
use crate::fixtures::{self, FIXTURE_PREFIX};
use crate::geometry::{extract_surfaces, ExtractOptions, GeometryError, Mesh};
use crate::llm::ChatClient;
use crate::optimizer::{check_hard, solve, OptimizerError, SolverParams};
use crate::retrieval::{bind_all, builtin_catalog, Catalog, RetrievalError, DEFAULT_TOP_K};
use crate::scene::{AssetSpec, DecorScene, Furniture, Provenance, SCENE_SCHEMA_VERSION};

/// Largest asset count a job may ask for.
pub const MAX_ASSETS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    /// OBJ path, or `fixture:<name>` for a built-in mesh.
    pub mesh: String,
    pub prompt: String,
    pub n_assets: usize,
    #[serde(default)]
    pub seed: u64,
    /// Solver overrides; its `seed` field is replaced by the request seed.
    #[serde(default)]
    pub solver: SolverParams,
}

impl JobRequest {
    pub fn new(mesh: impl Into<String>, prompt: impl Into<String>, n_assets: usize, seed: u64) -> Self {
        Self { mesh: mesh.into(), prompt: prompt.into(), n_assets, seed, solver: SolverParams::default() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.prompt.trim().is_empty() {
            return Err(PipelineError::InvalidRequest("prompt is empty".into()));
        }
        if self.n_assets == 0 || self.n_assets > MAX_ASSETS {
            return Err(PipelineError::InvalidRequest(format!("n_assets must be in 1..={MAX_ASSETS}")));
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// Coarse error classes used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Infeasible,
    Backend,
    NotFound,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown mesh `{0}`")]
    UnknownMesh(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("plan does not compile: {0}")]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Solver(#[from] OptimizerError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("invalid edit: {}", summary(.0))]
    InvalidEdit(ValidationReport),
    #[error("could not resolve: {}", .0.join(", "))]
    UnresolvableTarget(Vec<String>),
    #[error("surface {0} does not exist")]
    UnknownSurface(usize),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("store error: {0}")]
    Store(String),
}

fn summary(r: &ValidationReport) -> String {
    r.violations.iter().map(|v| format!("[{}] {}", v.code, v.message)).collect::<Vec<_>>().join("; ")
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Agent(AgentError::Client { .. }) | PipelineError::Store(_) => ErrorClass::Backend,
            PipelineError::Retrieval(RetrievalError::Io { .. }) => ErrorClass::Backend,
            PipelineError::Solver(OptimizerError::Infeasible { .. } | OptimizerError::Unsafe(_) | OptimizerError::TooLarge(_)) => {
                ErrorClass::Infeasible
            }
            PipelineError::NotFound(_) => ErrorClass::NotFound,
            _ => ErrorClass::Validation,
        }
    }

    /// Process exit code: 2 validation, 3 infeasible, 4 backend.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation | ErrorClass::NotFound => 2,
            ErrorClass::Infeasible => 3,
            ErrorClass::Backend => 4,
        }
    }
}

/// Loads `fixture:<name>` or an OBJ file.
pub fn resolve_mesh(spec: &str) -> Result<Mesh, PipelineError> {
    match spec.strip_prefix(FIXTURE_PREFIX) {
        Some(name) => fixtures::by_name(name).ok_or_else(|| PipelineError::UnknownMesh(spec.to_string())),
        None => Ok(Mesh::load_obj(spec)?),
    }
}

/// The decoration engine: one chat backend, one catalog, fixed settings.
/// Calls block; share it behind an `Arc` across threads.
pub struct Engine {
    client: Arc<dyn ChatClient>,
    catalog: Catalog,
    agent: AgentConfig,
    extract: ExtractOptions,
    top_k: usize,
}

impl Engine {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        Self { client, catalog: builtin_catalog(), agent: AgentConfig::default(), extract: ExtractOptions::default(), top_k: DEFAULT_TOP_K }
    }

    pub fn with_catalog(mut self, catalog: Catalog) -> Self {
        self.catalog = catalog;
        self
    }

    pub fn with_agent_config(mut self, cfg: AgentConfig) -> Self {
        self.agent = cfg;
        self
    }

    pub fn with_extract_options(mut self, opts: ExtractOptions) -> Self {
        self.extract = opts;
        self
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k.max(1);
        self
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn decorate(&self, req: &JobRequest) -> Result<DecorScene, PipelineError> {
        self.decorate_traced(req).0
    }

    /// Like [`Engine::decorate`], but also returns the agent transcripts
    /// gathered before any failure.
    pub fn decorate_traced(&self, req: &JobRequest) -> (Result<DecorScene, PipelineError>, Vec<TranscriptEntry>) {
        let mut transcripts = Vec::new();
        let r = self.run(req, &mut transcripts);
        (r, transcripts)
    }

    fn run(&self, req: &JobRequest, transcripts: &mut Vec<TranscriptEntry>) -> Result<DecorScene, PipelineError> {
        req.validate()?;
        let mesh = resolve_mesh(&req.mesh)?;
        let surfaces = extract_surfaces(&mesh, &self.extract)?;
        let client = &*self.client;
        let keep = |e: AgentError, t: &mut Vec<TranscriptEntry>| {
            t.extend_from_slice(e.transcript());
            PipelineError::Agent(e)
        };

        let ctx = StageContext::new(req.prompt.clone(), req.n_assets, &surfaces, req.seed);
        let selected = select_assets(&ctx, client, &self.agent).map_err(|e| keep(e, transcripts))?;
        transcripts.extend(selected.transcript);
        let ctx = ctx.with_assets(selected.output);
        let styled = stylize(&ctx, client, &self.agent).map_err(|e| keep(e, transcripts))?;
        transcripts.extend(styled.transcript);
        let ctx = ctx.with_assets(styled.output);
        let planned = plan(&ctx, client, &self.agent).map_err(|e| keep(e, transcripts))?;
        transcripts.extend(planned.transcript);

        let cs = compile_plan(&planned.output, &ctx.assets, &surfaces)?;
        let params = SolverParams { seed: req.seed, ..req.solver.clone() };
        let layout = solve(&cs, &surfaces, &params)?;
        let violations = check_hard(&layout, &cs, &surfaces, &params);
        if !violations.is_empty() {
            return Err(OptimizerError::Unsafe(violations).into());
        }
        let bindings = bind_all(&ctx.assets, &self.catalog, self.top_k, req.seed)?;
        Ok(DecorScene {
            schema_version: SCENE_SCHEMA_VERSION,
            revision: 0,
            furniture: Furniture { mesh: req.mesh.clone(), surfaces: surfaces.clone() },
            assets: ctx.assets,
            directives: planned.output,
            layout,
            bindings,
            provenance: Provenance {
                prompt: req.prompt.clone(),
                n_assets: req.n_assets,
                seed: req.seed,
                solver: params,
                transcripts: transcripts.clone(),
            },
        })
    }

    /// Asks the edit stage to turn `instruction` into operations.
    pub fn interpret_edit(&self, scene: &DecorScene, instruction: &str) -> Result<(Vec<EditOp>, Vec<TranscriptEntry>), PipelineError> {
        let surfaces = &scene.furniture.surfaces;
        let mut ctx = StageContext::new(scene.provenance.prompt.clone(), scene.assets.len().max(1), surfaces, scene.provenance.seed)
            .with_assets(scene.assets.clone());
        ctx.directives = scene.directives.clone();
        ctx.layout = scene.layout.clone();
        ctx.instruction = Some(instruction.to_string());
        let accept = |content: &str| -> Result<EditReply, ValidationReport> {
            let v = extract_json(content).map_err(ValidationReport::single)?;
            let reply: EditReply = serde_json::from_value(v)
                .map_err(|e| ValidationReport::single(Violation::new("schema", format!("does not match edit_ops: {e}"))))?;
            if !reply.unresolved.is_empty() {
                return Ok(reply);
            }
            let report = check_ops(scene, &reply.ops);
            if report.ok { Ok(reply) } else { Err(report) }
        };
        let out = run_stage_with(Stage::Edit, &ctx, &*self.client, &self.agent, accept)?;
        if !out.output.unresolved.is_empty() {
            return Err(PipelineError::UnresolvableTarget(out.output.unresolved));
        }
        if out.output.ops.is_empty() {
            return Err(PipelineError::UnresolvableTarget(vec![instruction.to_string()]));
        }
        Ok((out.output.ops, out.transcript))
    }

    /// Fills in missing style and material of inserted or replacing assets.
    fn stylize_drafts(&self, scene: &DecorScene, ops: &mut [EditOp]) -> Result<Vec<TranscriptEntry>, PipelineError> {
        let mut temp = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            let (draft, k) = match op {
                EditOp::Insert { asset, .. } => (asset, asset.surface_index),
                EditOp::Replace { target, asset } => (asset, scene.asset(target).map_or(asset.surface_index, |a| a.surface_index)),
                _ => continue,
            };
            if draft.style.is_none() || draft.material.is_none() {
                temp.push(AssetSpec {
                    id: format!("draft-{i}"),
                    name: draft.name.clone(),
                    width_cm: draft.width_cm,
                    depth_cm: draft.depth_cm,
                    height_cm: draft.height_cm,
                    surface_index: k,
                    style: String::new(),
                    material: String::new(),
                });
            }
        }
        if temp.is_empty() {
            return Ok(Vec::new());
        }
        let ctx = StageContext::new(scene.provenance.prompt.clone(), temp.len(), &scene.furniture.surfaces, scene.provenance.seed)
            .with_assets(temp);
        let out = stylize(&ctx, &*self.client, &self.agent)?;
        for a in out.output {
            let i: usize = a.id["draft-".len()..].parse().expect("temporary id");
            if let EditOp::Insert { asset, .. } | EditOp::Replace { asset, .. } = &mut ops[i] {
                asset.style.get_or_insert(a.style);
                asset.material.get_or_insert(a.material);
            }
        }
        Ok(out.transcript)
    }

    /// Applies structured operations; see [`apply_ops`].
    pub fn apply_edit(&self, scene: &DecorScene, ops: &[EditOp]) -> Result<DecorScene, PipelineError> {
        apply_ops(scene, ops, Some(&self.catalog), self.top_k)
    }

    /// Runs an edit request against `scene` and returns the next revision.
    /// The input scene is never modified.
    pub fn edit(&self, scene: &DecorScene, req: &EditRequest) -> Result<DecorScene, PipelineError> {
        let (mut ops, mut transcript) = match req {
            EditRequest::Ops { ops } => (ops.clone(), Vec::new()),
            EditRequest::Instruction { instruction } => self.interpret_edit(scene, instruction)?,
        };
        let report = check_ops(scene, &ops);
        if !report.ok {
            return Err(PipelineError::InvalidEdit(report));
        }
        transcript.extend(self.stylize_drafts(scene, &mut ops)?);
        let mut next = self.apply_edit(scene, &ops)?;
        next.provenance.transcripts.extend(transcript);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{RuleBasedStub, ScriptedStub};

    fn engine() -> Engine {
        Engine::new(Arc::new(RuleBasedStub))
    }

    fn quick(mesh: &str, n: usize, seed: u64) -> JobRequest {
        let mut r = JobRequest::new(mesh, "a cozy reading corner", n, seed);
        r.solver.anneal_iters = 2000;
        r
    }

    #[test]
    fn decorates_a_desk() {
        let s = engine().decorate(&quick("fixture:desk_with_shelf", 8, 3)).unwrap();
        assert_eq!(s.assets.len(), 8);
        assert_eq!(s.layout.len(), 8);
        assert_eq!(s.bindings.len(), 8);
        assert!(!s.provenance.transcripts.is_empty());
        assert!(!crate::metrics::scene_out_of_bounds(&s));
        assert_eq!(crate::metrics::scene_bbl_m3(&s), 0.0);
    }

    #[test]
    fn request_validation_comes_first() {
        let stub = Arc::new(ScriptedStub::new(Vec::<String>::new()));
        let e = Engine::new(stub.clone());
        let err = e.decorate(&JobRequest::new("fixture:flat_desk", "x", 0, 0)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = e.decorate(&JobRequest::new("fixture:piano", "x", 3, 0)).unwrap_err();
        assert!(matches!(err, PipelineError::UnknownMesh(_)));
        assert_eq!(stub.calls(), 0);
    }

    #[test]
    fn mesh_without_surfaces_fails_before_any_call() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wall.obj");
        // A vertical quad only.
        std::fs::write(&p, "v 0 0 0\nv 100 0 0\nv 100 0 100\nv 0 0 100\nf 1 2 3\nf 1 3 4\n").unwrap();
        let stub = Arc::new(ScriptedStub::new(Vec::<String>::new()));
        let err = Engine::new(stub.clone()).decorate(&JobRequest::new(p.to_string_lossy(), "x", 3, 0)).unwrap_err();
        assert!(matches!(err, PipelineError::Geometry(GeometryError::NoSurface)), "{err}");
        assert_eq!(err.exit_code(), 2);
        assert_eq!(stub.calls(), 0);
    }

    #[test]
    fn unresolvable_edit_leaves_scene_alone() {
        let e = engine();
        let s = e.decorate(&quick("fixture:flat_desk", 4, 1)).unwrap();
        let err = e.edit(&s, &EditRequest::Instruction { instruction: "remove the grand piano".into() }).unwrap_err();
        assert!(matches!(err, PipelineError::UnresolvableTarget(_)), "{err}");
    }

    #[test]
    fn instruction_edit_removes_an_asset() {
        let e = engine();
        let s = e.decorate(&quick("fixture:flat_desk", 4, 1)).unwrap();
        let victim = s.assets[0].clone();
        let next = e.edit(&s, &EditRequest::Instruction { instruction: format!("remove the {}", victim.name) }).unwrap();
        assert_eq!(next.revision, 1);
        assert_eq!(next.assets.len(), 3);
        assert!(next.layout.get(&victim.id).is_none());
        assert!(next.provenance.transcripts.len() > s.provenance.transcripts.len());
    }

    #[test]
    fn inserted_assets_get_styled_and_bound() {
        let e = engine();
        let s = e.decorate(&quick("fixture:flat_desk", 3, 2)).unwrap();
        let ops: Vec<EditOp> = serde_json::from_value(serde_json::json!([
            {"kind": "insert", "asset": {"name": "small vase", "width_cm": 10, "depth_cm": 10, "height_cm": 20, "surface_index": 0}}
        ]))
        .unwrap();
        let next = e.edit(&s, &EditRequest::Ops { ops }).unwrap();
        let v = next.assets.iter().find(|a| a.name == "small vase").unwrap();
        assert_eq!(v.id, "small_vase-1");
        assert!(!v.style.is_empty() && !v.material.is_empty());
        assert!(next.bindings.contains_key(&v.id));
        assert!(next.layout.get(&v.id).is_some());
    }

    #[test]
    fn exit_codes() {
        let inf = PipelineError::Solver(OptimizerError::Infeasible { asset: "a".into(), surface: 0, reasons: vec![] });
        assert_eq!(inf.exit_code(), 3);
        assert_eq!(PipelineError::Store("x".into()).exit_code(), 4);
        assert_eq!(PipelineError::InvalidRequest("x".into()).exit_code(), 2);
    }
}
