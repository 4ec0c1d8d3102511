use serde::{Deserialize, Serialize};

use crate::scenario::ActionId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub t_ms: u64,
    pub action_id: ActionId,
}

/// Timed actions for headless replay.
///
/// On disk this is a JSON array of `{"t_ms", "action_id"}` objects,
/// optionally ending with a single `{"final_t_ms"}` object.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActionScript {
    pub steps: Vec<ScriptStep>,
    pub final_t_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("invalid script JSON: {0}")]
    Json(String),
    #[error("step {index}: t_ms must be strictly increasing")]
    NotIncreasing { index: usize },
    #[error("final_t_ms must appear once, as the last element")]
    MisplacedFinal,
    #[error("final_t_ms {final_t_ms} is before the last action at {last} ms")]
    FinalBeforeLastStep { final_t_ms: u64, last: u64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Item {
    Step(ScriptStep),
    Final(FinalMarker),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalMarker {
    final_t_ms: u64,
}

impl ActionScript {
    pub fn new(steps: Vec<ScriptStep>, final_t_ms: Option<u64>) -> Result<Self, ScriptError> {
        for (i, w) in steps.windows(2).enumerate() {
            if w[1].t_ms <= w[0].t_ms {
                return Err(ScriptError::NotIncreasing { index: i + 1 });
            }
        }
        if let (Some(f), Some(last)) = (final_t_ms, steps.last()) {
            if f < last.t_ms {
                return Err(ScriptError::FinalBeforeLastStep { final_t_ms: f, last: last.t_ms });
            }
        }
        Ok(Self { steps, final_t_ms })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, ScriptError> {
        let items: Vec<Item> =
            serde_json::from_slice(bytes).map_err(|e| ScriptError::Json(e.to_string()))?;
        let n = items.len();
        let mut steps = Vec::with_capacity(n);
        let mut final_t_ms = None;
        for (i, item) in items.into_iter().enumerate() {
            match item {
                Item::Step(s) => steps.push(s),
                Item::Final(f) if i + 1 == n => final_t_ms = Some(f.final_t_ms),
                Item::Final(_) => return Err(ScriptError::MisplacedFinal),
            }
        }
        Self::new(steps, final_t_ms)
    }

    pub fn to_json(&self) -> String {
        let mut items: Vec<Item> = self.steps.iter().cloned().map(Item::Step).collect();
        if let Some(f) = self.final_t_ms {
            items.push(Item::Final(FinalMarker { final_t_ms: f }));
        }
        serde_json::to_string(&items).expect("scripts always serialize")
    }
}
