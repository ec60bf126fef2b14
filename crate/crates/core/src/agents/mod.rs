//! The language-model stages and the validator-driven revision loop.
//!
//! Every stage sends a system prompt plus a user message that embeds the
//! stage context as `<context>{json}</context>`, parses the reply, and runs
//! the stage's validator. Rejected replies are answered with a revision
//! request listing the violations until a reply passes or the attempt budget
//! is spent.

pub mod banks;
pub mod generator;
mod prompts;
pub mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Surface;
use crate::llm::{ChatClient, ChatMessage, ChatRequest, LlmError, Role};
use crate::scene::{next_asset_id, AssetSpec, Layout, PlanDirective};

pub use banks::{Bank, MATERIALS, STYLES};
pub use validate::{StyleAssignment, ValidationReport, Violation};

pub const DEFAULT_MAX_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Select,
    Stylize,
    Plan,
    Edit,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Select => "select",
            Stage::Stylize => "stylize",
            Stage::Plan => "plan",
            Stage::Edit => "edit",
        }
    }

    /// Title of the stage's response schema.
    pub fn schema_title(self) -> &'static str {
        match self {
            Stage::Select => "asset_proposal",
            Stage::Stylize => "style_assignment",
            Stage::Plan => "plan_directives",
            Stage::Edit => "edit_ops",
        }
    }

    pub fn from_schema_title(title: &str) -> Option<Self> {
        [Stage::Select, Stage::Stylize, Stage::Plan, Stage::Edit].into_iter().find(|s| s.schema_title() == title)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One message of a stage conversation, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub attempt: usize,
    pub role: Role,
    pub content: String,
}

/// What the model is told about a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub index: usize,
    pub height_cm: f64,
    pub area_cm2: f64,
    pub width_cm: f64,
    pub depth_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance_cm: Option<f64>,
    pub boundary: Vec<[f64; 2]>,
}

impl From<&Surface> for SurfaceSummary {
    fn from(s: &Surface) -> Self {
        let r = |v: f64| (v * 100.0).round() / 100.0;
        Self {
            index: s.index,
            height_cm: r(s.height_cm),
            area_cm2: r(s.area_cm2),
            width_cm: r(s.bbox.width()),
            depth_cm: r(s.bbox.depth()),
            clearance_cm: s.clearance_cm.map(r),
            boundary: s.boundary.iter().map(|p| [r(p[0] - s.bbox.min_x), r(p[1] - s.bbox.min_y)]).collect(),
        }
    }
}

/// Everything a stage needs to build its request and validate the reply.
#[derive(Debug, Clone)]
pub struct StageContext<'a> {
    pub prompt: String,
    pub n_assets: usize,
    pub surfaces: &'a [Surface],
    /// Assets fixed by earlier stages.
    pub assets: Vec<AssetSpec>,
    /// Current directives (edit stage only).
    pub directives: Vec<PlanDirective>,
    /// Current placements (edit stage only).
    pub layout: Layout,
    /// Free-form edit instruction (edit stage only).
    pub instruction: Option<String>,
    pub seed: u64,
}

impl<'a> StageContext<'a> {
    pub fn new(prompt: impl Into<String>, n_assets: usize, surfaces: &'a [Surface], seed: u64) -> Self {
        Self {
            prompt: prompt.into(),
            n_assets,
            surfaces,
            assets: Vec::new(),
            directives: Vec::new(),
            layout: Layout::default(),
            instruction: None,
            seed,
        }
    }

    pub fn with_assets(mut self, assets: Vec<AssetSpec>) -> Self {
        self.assets = assets;
        self
    }

    pub fn summaries(&self) -> Vec<SurfaceSummary> {
        self.surfaces.iter().map(SurfaceSummary::from).collect()
    }

    fn check(&self) -> Result<(), AgentError> {
        if self.n_assets == 0 {
            return Err(AgentError::InvalidContext("n_assets must be at least 1".into()));
        }
        if self.surfaces.is_empty() {
            return Err(AgentError::InvalidContext("no surfaces".into()));
        }
        Ok(())
    }

    /// The JSON block embedded in the user message.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "prompt": self.prompt,
            "n_assets": self.n_assets,
            "seed": self.seed,
            "surfaces": self.summaries(),
        });
        if !self.assets.is_empty() {
            v["assets"] = serde_json::to_value(&self.assets).expect("assets serialize");
        }
        if !self.directives.is_empty() {
            v["directives"] = serde_json::to_value(&self.directives).expect("directives serialize");
        }
        if !self.layout.is_empty() {
            v["layout"] = serde_json::to_value(&self.layout).expect("layout serializes");
        }
        if let Some(i) = &self.instruction {
            v["instruction"] = serde_json::Value::String(i.clone());
        }
        v
    }
}

/// Pulls the last `<context>` block out of a request.
pub fn context_of(request: &ChatRequest) -> Option<serde_json::Value> {
    request.messages.iter().rev().find_map(|m| {
        let start = m.content.find("<context>")? + "<context>".len();
        let end = m.content[start..].find("</context>")? + start;
        serde_json::from_str(&m.content[start..end]).ok()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    /// Total attempts per stage, first try included.
    pub max_attempts: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self { model: String::new(), temperature: 0.2, timeout_s: 60.0, max_attempts: DEFAULT_MAX_ATTEMPTS }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid stage context: {0}")]
    InvalidContext(String),
    #[error("{stage} stage gave up after {attempts} attempts; last violations: {}", summarize(.report))]
    ExhaustedRetries { stage: Stage, attempts: usize, report: ValidationReport, transcript: Vec<TranscriptEntry> },
    #[error("{stage} stage: {source}")]
    Client { stage: Stage, #[source] source: LlmError, transcript: Vec<TranscriptEntry> },
}

impl AgentError {
    pub fn transcript(&self) -> &[TranscriptEntry] {
        match self {
            AgentError::ExhaustedRetries { transcript, .. } | AgentError::Client { transcript, .. } => transcript,
            AgentError::InvalidContext(_) => &[],
        }
    }
}

fn summarize(r: &ValidationReport) -> String {
    r.violations.iter().map(|v| v.code.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome<T> {
    pub output: T,
    /// Client calls made, first try included.
    pub attempts: usize,
    pub transcript: Vec<TranscriptEntry>,
}

impl<T> StageOutcome<T> {
    pub fn revisions(&self) -> usize {
        self.attempts.saturating_sub(1)
    }
}

/// Output of [`run_stage`].
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutput {
    Assets(Vec<AssetSpec>),
    Plan(Vec<PlanDirective>),
}

/// Runs one stage: request, validate, and ask for revisions until a reply
/// passes `accept` or `cfg.max_attempts` calls have been made.
pub fn run_stage_with<T>(
    stage: Stage,
    ctx: &StageContext<'_>,
    client: &dyn ChatClient,
    cfg: &AgentConfig,
    accept: impl Fn(&str) -> Result<T, ValidationReport>,
) -> Result<StageOutcome<T>, AgentError> {
    let system = prompts::system_prompt(stage);
    let user = format!(
        "{}\n\n<context>{}</context>",
        prompts::task_line(stage),
        serde_json::to_string(&ctx.to_json()).expect("context serializes")
    );
    let mut messages = vec![ChatMessage::system(system), ChatMessage::user(user)];
    let mut transcript: Vec<TranscriptEntry> = messages
        .iter()
        .map(|m| TranscriptEntry { stage, attempt: 1, role: m.role, content: m.content.clone() })
        .collect();
    let attempts = cfg.max_attempts.max(1);
    let mut last = ValidationReport::default();
    for attempt in 1..=attempts {
        let request = ChatRequest {
            model: cfg.model.clone(),
            messages: messages.clone(),
            response_schema: prompts::schema(stage).to_string(),
            temperature: cfg.temperature,
            seed: Some(ctx.seed),
            timeout_s: cfg.timeout_s,
        };
        let reply = match client.complete(&request) {
            Ok(r) => r.content,
            Err(source) => return Err(AgentError::Client { stage, source, transcript }),
        };
        transcript.push(TranscriptEntry { stage, attempt, role: Role::Assistant, content: reply.clone() });
        match accept(&reply) {
            Ok(output) => return Ok(StageOutcome { output, attempts: attempt, transcript }),
            Err(report) => {
                log::debug!("{stage} attempt {attempt} rejected: {}", summarize(&report));
                let revision = report.revision_request();
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(revision.clone()));
                if attempt < attempts {
                    transcript.push(TranscriptEntry { stage, attempt: attempt + 1, role: Role::User, content: revision });
                }
                last = report;
            }
        }
    }
    Err(AgentError::ExhaustedRetries { stage, attempts, report: last, transcript })
}

/// Asset Selector: proposes `ctx.n_assets` assets and assigns ids.
pub fn select_assets(ctx: &StageContext<'_>, client: &dyn ChatClient, cfg: &AgentConfig) -> Result<StageOutcome<Vec<AssetSpec>>, AgentError> {
    ctx.check()?;
    run_stage_with(Stage::Select, ctx, client, cfg, |reply| {
        let drafts = validate::parse_asset_proposal(reply)?;
        let report = validate::validate_assets(&drafts, ctx.surfaces, ctx.n_assets);
        if !report.ok {
            return Err(report);
        }
        Ok(assign_ids(drafts, &[]))
    })
}

/// Turns drafts into specs with fresh `slug-N` ids that avoid `existing`.
pub fn assign_ids(drafts: Vec<crate::scene::AssetDraft>, existing: &[AssetSpec]) -> Vec<AssetSpec> {
    let mut taken: Vec<String> = existing.iter().map(|a| a.id.clone()).collect();
    drafts
        .into_iter()
        .map(|d| {
            let id = next_asset_id(&d.name, taken.iter().map(String::as_str));
            taken.push(id.clone());
            AssetSpec {
                id,
                name: d.name.trim().to_string(),
                width_cm: d.width_cm,
                depth_cm: d.depth_cm,
                height_cm: d.height_cm,
                surface_index: d.surface_index,
                style: d.style.unwrap_or_default(),
                material: d.material.unwrap_or_default(),
            }
        })
        .collect()
}

/// Stylist: gives each asset of `ctx.assets` a style and material from the banks.
pub fn stylize(ctx: &StageContext<'_>, client: &dyn ChatClient, cfg: &AgentConfig) -> Result<StageOutcome<Vec<AssetSpec>>, AgentError> {
    ctx.check()?;
    let (styles, materials) = (Bank::styles(), Bank::materials());
    run_stage_with(Stage::Stylize, ctx, client, cfg, |reply| {
        let assignments = validate::parse_style_assignment(reply)?;
        let report = validate::validate_styles(&assignments, &ctx.assets, &styles, &materials);
        if !report.ok {
            return Err(report);
        }
        let mut out = ctx.assets.clone();
        for a in &mut out {
            let p = assignments.iter().find(|p| p.id == a.id).expect("validated");
            a.style = styles.lookup(&p.style).expect("validated").to_string();
            a.material = materials.lookup(&p.material).expect("validated").to_string();
        }
        Ok(out)
    })
}

/// Planner: emits the scene graph over `ctx.assets`.
pub fn plan(ctx: &StageContext<'_>, client: &dyn ChatClient, cfg: &AgentConfig) -> Result<StageOutcome<Vec<PlanDirective>>, AgentError> {
    ctx.check()?;
    run_stage_with(Stage::Plan, ctx, client, cfg, |reply| {
        let directives = validate::parse_plan(reply)?;
        let mut report = validate::validate_plan(&directives, &ctx.assets);
        report.violations.extend(validate::validate_stack_clearance(&directives, &ctx.assets, ctx.surfaces).violations);
        report.ok = report.violations.is_empty();
        if !report.ok {
            return Err(report);
        }
        Ok(directives)
    })
}

/// Runs one of the three decoration stages with the given attempt budget.
pub fn run_stage(
    stage: Stage,
    ctx: &StageContext<'_>,
    client: &dyn ChatClient,
    max_attempts: usize,
) -> Result<StageOutcome<StageOutput>, AgentError> {
    let cfg = AgentConfig { max_attempts, ..AgentConfig::default() };
    let wrap = |o: StageOutcome<Vec<AssetSpec>>| StageOutcome { output: StageOutput::Assets(o.output), attempts: o.attempts, transcript: o.transcript };
    match stage {
        Stage::Select => select_assets(ctx, client, &cfg).map(wrap),
        Stage::Stylize => stylize(ctx, client, &cfg).map(wrap),
        Stage::Plan => plan(ctx, client, &cfg)
            .map(|o| StageOutcome { output: StageOutput::Plan(o.output), attempts: o.attempts, transcript: o.transcript }),
        Stage::Edit => Err(AgentError::InvalidContext("the edit stage is driven by the pipeline".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::llm::{FaultInjectingStub, RuleBasedStub, ScriptedStub};

    fn surfaces() -> Vec<Surface> {
        vec![Surface::rectangle(0, Rect::new(0.0, 0.0, 120.0, 60.0), 75.0, 1.0)]
    }

    const VALID: &str = r#"{"assets": [{"name": "desk lamp", "width_cm": 15, "depth_cm": 15, "height_cm": 40, "surface_index": 0}]}"#;
    const INVALID: &str = r#"{"assets": [{"name": "desk lamp", "width_cm": 150, "depth_cm": 15, "height_cm": 40, "surface_index": 0}]}"#;

    #[test]
    fn valid_first_try_makes_one_call() {
        let s = surfaces();
        let ctx = StageContext::new("a lamp", 1, &s, 0);
        let stub = ScriptedStub::new([VALID]);
        let out = select_assets(&ctx, &stub, &AgentConfig::default()).unwrap();
        assert_eq!(out.attempts, 1);
        assert_eq!(out.revisions(), 0);
        assert_eq!(stub.calls(), 1);
        assert_eq!(out.output[0].id, "desk_lamp-1");
    }

    #[test]
    fn invalid_then_valid_records_both() {
        let s = surfaces();
        let ctx = StageContext::new("a lamp", 1, &s, 0);
        let out = select_assets(&ctx, &ScriptedStub::new([INVALID, VALID]), &AgentConfig::default()).unwrap();
        assert_eq!(out.revisions(), 1);
        let replies: Vec<_> = out.transcript.iter().filter(|t| t.role == Role::Assistant).collect();
        assert_eq!(replies.len(), 2);
        assert_eq!(replies[0].content, INVALID);
        assert!(out.transcript.iter().any(|t| t.role == Role::User && t.content.contains("[oversize]")));
    }

    #[test]
    fn always_invalid_exhausts_after_five_attempts() {
        let s = surfaces();
        let ctx = StageContext::new("a lamp", 1, &s, 0);
        let stub = ScriptedStub::new([INVALID]).cycling();
        let err = select_assets(&ctx, &stub, &AgentConfig::default()).unwrap_err();
        match err {
            AgentError::ExhaustedRetries { attempts, report, .. } => {
                assert_eq!(attempts, 5);
                assert!(report.has("oversize"));
            }
            other => panic!("{other}"),
        }
        assert_eq!(stub.calls(), 5);
    }

    #[test]
    fn client_errors_propagate() {
        let s = surfaces();
        let ctx = StageContext::new("a lamp", 1, &s, 0);
        let err = select_assets(&ctx, &ScriptedStub::new(Vec::<String>::new()), &AgentConfig::default()).unwrap_err();
        assert!(matches!(err, AgentError::Client { stage: Stage::Select, .. }));
    }

    #[test]
    fn context_round_trips_through_the_request() {
        let s = surfaces();
        let ctx = StageContext::new("cozy", 3, &s, 9);
        let req = ChatRequest {
            model: String::new(),
            messages: vec![ChatMessage::user(format!("go\n<context>{}</context>", ctx.to_json()))],
            response_schema: "{}".into(),
            temperature: 0.0,
            seed: None,
            timeout_s: 1.0,
        };
        let v = context_of(&req).unwrap();
        assert_eq!(v["n_assets"], 3);
        assert_eq!(v["surfaces"][0]["width_cm"], 120.0);
    }

    #[test]
    fn rule_based_stages_pass_on_first_try() {
        let s = surfaces();
        let cfg = AgentConfig::default();
        let ctx = StageContext::new("a tidy office desk", 4, &s, 1);
        let sel = select_assets(&ctx, &RuleBasedStub, &cfg).unwrap();
        assert_eq!(sel.attempts, 1);
        let ctx = ctx.with_assets(sel.output);
        let sty = stylize(&ctx, &RuleBasedStub, &cfg).unwrap();
        assert_eq!(sty.attempts, 1);
        assert!(sty.output.iter().all(|a| !a.style.is_empty() && !a.material.is_empty()));
        let ctx = ctx.with_assets(sty.output);
        let pl = plan(&ctx, &RuleBasedStub, &cfg).unwrap();
        assert_eq!(pl.attempts, 1);
        assert!(!pl.output.is_empty());
    }

    #[test]
    fn faults_trigger_revisions_but_never_leak() {
        let s = surfaces();
        let ctx = StageContext::new("office", 3, &s, 2);
        let stub = FaultInjectingStub::new(RuleBasedStub, 0.5, 3);
        let mut revised = 0;
        for _ in 0..50 {
            if let Ok(out) = select_assets(&ctx, &stub, &AgentConfig::default()) {
                assert!(validate::validate_assets(
                    &out.output.iter().map(|a| crate::scene::AssetDraft {
                        name: a.name.clone(),
                        width_cm: a.width_cm,
                        depth_cm: a.depth_cm,
                        height_cm: a.height_cm,
                        surface_index: a.surface_index,
                        style: None,
                        material: None
                    }).collect::<Vec<_>>(),
                    &s,
                    3
                )
                .ok);
                revised += usize::from(out.revisions() > 0);
            }
        }
        assert!(revised > 10);
    }
}
