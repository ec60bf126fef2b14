//! Offline chat backends.

use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChatClient, ChatRequest, ChatResponse, LlmError};

/// Replays a fixed list of replies in order, regardless of the request.
#[derive(Debug)]
pub struct ScriptedStub {
    replies: Vec<String>,
    cursor: Mutex<usize>,
    cycle: bool,
}

impl ScriptedStub {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { replies: replies.into_iter().map(Into::into).collect(), cursor: Mutex::new(0), cycle: false }
    }

    /// Loads every `*.json` file of `dir`, ordered by file name
    /// (`0001.json`, `0002.json`, …). Each file holds one reply verbatim.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let dir = dir.as_ref();
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| LlmError::Stub(format!("{}: {e}", dir.display())))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(LlmError::Stub(format!("no reply files in {}", dir.display())));
        }
        let replies = files
            .iter()
            .map(|p| std::fs::read_to_string(p).map_err(|e| LlmError::Stub(format!("{}: {e}", p.display()))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(replies))
    }

    /// Restart from the first reply once the script runs out.
    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }

    /// Number of replies served so far.
    pub fn calls(&self) -> usize {
        *self.cursor.lock().expect("stub cursor poisoned")
    }
}

impl ChatClient for ScriptedStub {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let mut cursor = self.cursor.lock().expect("stub cursor poisoned");
        let idx = if self.cycle && !self.replies.is_empty() { *cursor % self.replies.len() } else { *cursor };
        let reply = self
            .replies
            .get(idx)
            .ok_or_else(|| LlmError::Stub(format!("script exhausted after {} replies", self.replies.len())))?;
        *cursor += 1;
        Ok(ChatResponse::stop(reply.clone()))
    }
}

/// Produces valid proposals for every stage from built-in templates, reading
/// the stage context embedded in the request. Stateless and deterministic.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBasedStub;

impl ChatClient for RuleBasedStub {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        crate::agents::generator::respond(request).map(ChatResponse::stop).map_err(LlmError::Stub)
    }
}

/// Wraps another backend and, with probability `p` per call, replaces its
/// reply with malformed output that no stage validator accepts.
pub struct FaultInjectingStub<C> {
    inner: C,
    probability: f64,
    rng: Mutex<ChaCha8Rng>,
    injected: Mutex<usize>,
}

const MALFORMED: [&str; 4] = [
    "Sure! Here is my suggestion for the decoration.",
    "{\"assets\": [{\"name\": \"lamp\", \"width_cm\": 12",
    "{\"unexpected\": true}",
    "[1, 2, 3]",
];

impl<C: ChatClient> FaultInjectingStub<C> {
    pub fn new(inner: C, probability: f64, seed: u64) -> Self {
        Self {
            inner,
            probability: probability.clamp(0.0, 1.0),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            injected: Mutex::new(0),
        }
    }

    pub fn injected(&self) -> usize {
        *self.injected.lock().expect("fault counter poisoned")
    }
}

impl<C: ChatClient> ChatClient for FaultInjectingStub<C> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let (fault, which) = {
            let mut rng = self.rng.lock().expect("fault rng poisoned");
            (rng.random_bool(self.probability), rng.random_range(0..MALFORMED.len()))
        };
        if fault {
            request.validate()?;
            *self.injected.lock().expect("fault counter poisoned") += 1;
            return Ok(ChatResponse::stop(MALFORMED[which]));
        }
        self.inner.complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ChatMessage;

    fn req() -> ChatRequest {
        ChatRequest {
            model: "stub".into(),
            messages: vec![ChatMessage::user("hello")],
            response_schema: "{}".into(),
            temperature: 0.0,
            seed: None,
            timeout_s: 1.0,
        }
    }

    #[test]
    fn scripted_returns_replies_verbatim_in_order() {
        let s = ScriptedStub::new(["{\"a\":1}", "{\"b\":2}"]);
        assert_eq!(s.complete(&req()).unwrap().content, "{\"a\":1}");
        assert_eq!(s.complete(&req()).unwrap().content, "{\"b\":2}");
        assert!(matches!(s.complete(&req()), Err(LlmError::Stub(_))));
        assert_eq!(s.calls(), 2);
    }

    #[test]
    fn scripted_from_dir_orders_by_name() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("0002.json"), "second").unwrap();
        std::fs::write(dir.path().join("0001.json"), "first").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let s = ScriptedStub::from_dir(dir.path()).unwrap();
        assert_eq!(s.complete(&req()).unwrap().content, "first");
        assert_eq!(s.complete(&req()).unwrap().content, "second");
    }

    #[test]
    fn empty_messages_are_rejected() {
        let s = ScriptedStub::new(["x"]);
        let mut r = req();
        r.messages.clear();
        assert!(matches!(s.complete(&r), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn fault_rate_matches_probability() {
        let s = FaultInjectingStub::new(ScriptedStub::new(["ok"]).cycling(), 0.3, 11);
        let n = 2000;
        let bad = (0..n).filter(|_| s.complete(&req()).unwrap().content != "ok").count();
        let rate = bad as f64 / n as f64;
        assert!((rate - 0.3).abs() < 0.05, "rate {rate}");
        assert_eq!(bad, s.injected());
    }

    #[test]
    fn malformed_replies_never_parse_as_stage_objects() {
        for m in MALFORMED {
            let v: Option<serde_json::Value> = serde_json::from_str(m).ok();
            let usable = v.as_ref().and_then(|v| v.as_object()).is_some_and(|o| {
                ["assets", "assignments", "directives", "ops"].iter().any(|k| o.contains_key(*k))
            });
            assert!(!usable, "{m}");
        }
    }
}
