use serde::{Deserialize, Serialize};

use crate::lm::GenerationParams;
use crate::verifier::TEMPLATE_IDS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Naive,
    KnowledgeAugmented,
    AdaptiveConfidence,
    AugmenterKf1,
    AugmenterConfidence,
    Kalmv,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Naive,
        Mode::KnowledgeAugmented,
        Mode::AdaptiveConfidence,
        Mode::AugmenterKf1,
        Mode::AugmenterConfidence,
        Mode::Kalmv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::KnowledgeAugmented => "knowledge_augmented",
            Self::AdaptiveConfidence => "adaptive_confidence",
            Self::AugmenterKf1 => "augmenter_kf1",
            Self::AugmenterConfidence => "augmenter_confidence",
            Self::Kalmv => "kalmv",
        }
    }

    pub fn uses_retrieval(self) -> bool {
        !matches!(self, Self::Naive)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Rectification actions allowed after the first answer.
    pub max_rectify_steps: u32,
    pub confidence_threshold: f64,
    pub kf1_threshold: f64,
    pub first_generation: GenerationParams,
    pub resample_generation: GenerationParams,
    pub template_ids: Vec<u8>,
    /// Adds per-step wall-clock times to traces (makes them non-reproducible).
    pub record_timing: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Kalmv,
            max_rectify_steps: 2,
            confidence_threshold: 0.5,
            kf1_threshold: 0.2,
            first_generation: GenerationParams::greedy(),
            resample_generation: GenerationParams::top_k(),
            template_ids: TEMPLATE_IDS.to_vec(),
            record_timing: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_max_rectify_steps(mut self, steps: u32) -> Self {
        self.max_rectify_steps = steps;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("confidence_threshold", self.confidence_threshold), ("kf1_threshold", self.kf1_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.template_ids.is_empty() {
            return Err("template_ids must be non-empty".into());
        }
        if let Some(bad) = self.template_ids.iter().find(|id| !TEMPLATE_IDS.contains(id)) {
            return Err(format!("template id {bad} not in 1..=5"));
        }
        self.first_generation.validate().map_err(|e| e.to_string())?;
        self.resample_generation.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}
