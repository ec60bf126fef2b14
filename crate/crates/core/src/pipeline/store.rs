//! On-disk job directories. Every file is written to a temporary name and
//! renamed into place, so readers never see partial JSON.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::TranscriptEntry;
use crate::metrics::{report, MetricsReport};
use crate::scene::DecorScene;

use super::{JobRequest, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct JobStore {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Store(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(bytes).and_then(|_| tmp.1.sync_all()).map_err(|e| io_err(&tmp.0, e))?;
    drop(tmp.1);
    fs::rename(&tmp.0, path).map_err(|e| io_err(path, e))
}

fn tempfile_in(dir: &Path, target: &Path) -> Result<(PathBuf, fs::File), PipelineError> {
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for n in 0..1000 {
        let p = dir.join(format!(".{name}.{}.{n}.tmp", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(f) => return Ok((p, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_err(&p, e)),
        }
    }
    Err(PipelineError::Store(format!("no free temporary name in {}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| io_err(path, e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let s = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(PipelineError::NotFound(path.display().to_string())),
        Err(e) => return Err(io_err(path, e)),
    };
    serde_json::from_str(&s).map_err(|e| io_err(path, e))
}

fn valid_id(id: &str) -> bool {
    id.strip_prefix("job-").is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn job_dir(&self, id: &str) -> Result<PathBuf, PipelineError> {
        if !valid_id(id) {
            return Err(PipelineError::NotFound(format!("job `{id}`")));
        }
        let dir = self.root.join(id);
        if !dir.is_dir() {
            return Err(PipelineError::NotFound(format!("job `{id}`")));
        }
        Ok(dir)
    }

    /// Reserves the next `job-NNNNNN` directory and records the request.
    pub fn create(&self, request: &JobRequest) -> Result<String, PipelineError> {
        let mut n = self.ids()?.last().and_then(|id| id[4..].parse::<u64>().ok()).unwrap_or(0);
        loop {
            n += 1;
            let id = format!("job-{n:06}");
            let dir = self.root.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => {
                    fs::create_dir(dir.join("revisions")).map_err(|e| io_err(&dir, e))?;
                    write_json(&dir.join("request.json"), request)?;
                    self.set_status(&JobStatus { id: id.clone(), state: JobState::Pending, error: None, exit_code: None, revision: None })?;
                    return Ok(id);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io_err(&dir, e)),
            }
        }
    }

    /// Job ids in creation order.
    pub fn ids(&self) -> Result<Vec<String>, PipelineError> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)
            .map_err(|e| io_err(&self.root, e))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter(|n| valid_id(n))
            .collect();
        ids.sort_by_key(|id| id[4..].parse::<u64>().unwrap_or(0));
        Ok(ids)
    }

    pub fn set_status(&self, status: &JobStatus) -> Result<(), PipelineError> {
        write_json(&self.root.join(&status.id).join("status.json"), status)
    }

    pub fn status(&self, id: &str) -> Result<JobStatus, PipelineError> {
        read_json(&self.job_dir(id)?.join("status.json"))
    }

    pub fn request(&self, id: &str) -> Result<JobRequest, PipelineError> {
        read_json(&self.job_dir(id)?.join("request.json"))
    }

    pub fn append_transcripts(&self, id: &str, entries: &[TranscriptEntry]) -> Result<(), PipelineError> {
        let path = self.job_dir(id)?.join("transcripts.jsonl");
        let mut body = fs::read_to_string(&path).unwrap_or_default();
        for e in entries {
            body.push_str(&serde_json::to_string(e).map_err(|e| io_err(&path, e))?);
            body.push('\n');
        }
        write_atomic(&path, body.as_bytes())
    }

    pub fn transcripts(&self, id: &str) -> Result<Vec<TranscriptEntry>, PipelineError> {
        let path = self.job_dir(id)?.join("transcripts.jsonl");
        let body = fs::read_to_string(&path).unwrap_or_default();
        body.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(|e| io_err(&path, e))).collect()
    }

    /// Stores `scene` as the current revision together with its metrics.
    pub fn save_scene(&self, id: &str, scene: &DecorScene) -> Result<(), PipelineError> {
        let dir = self.job_dir(id)?;
        write_json(&dir.join("revisions").join(format!("rev-{:04}.json", scene.revision)), scene)?;
        let m = report(std::slice::from_ref(scene)).expect("one scene");
        write_json(&dir.join("metrics.json"), &m)?;
        write_json(&dir.join("scene.json"), scene)
    }

    pub fn scene(&self, id: &str) -> Result<DecorScene, PipelineError> {
        read_json(&self.job_dir(id)?.join("scene.json"))
    }

    pub fn revision(&self, id: &str, revision: u32) -> Result<DecorScene, PipelineError> {
        read_json(&self.job_dir(id)?.join("revisions").join(format!("rev-{revision:04}.json")))
    }

    pub fn metrics(&self, id: &str) -> Result<MetricsReport, PipelineError> {
        read_json(&self.job_dir(id)?.join("metrics.json"))
    }
}
