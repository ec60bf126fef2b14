//! Furniture decoration engine: surface extraction, a validated multi-stage
//! language-model pipeline, scene-graph compilation and constrained layout
//! optimization.

pub mod agents;
pub mod compiler;
pub mod geometry;
pub mod llm;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod retrieval;
pub mod scene;
pub mod fixtures;

pub use agents::{AgentConfig, AgentError, TranscriptEntry};
pub use geometry::{extract_surfaces, ExtractOptions, Mesh, Rect, Surface};
pub use llm::{ChatClient, HttpChatClient, RuleBasedStub, ScriptedStub};
pub use metrics::MetricsReport;
pub use optimizer::SolverParams;
pub use pipeline::{export_svg, EditOp, EditRequest, Engine, JobRequest, JobStore, PipelineError};
pub use retrieval::{Binding, Catalog, CatalogEntry};
pub use scene::{AssetSpec, DecorScene, Layout, Orientation, PlanDirective, Placement};
