use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Backend, Completion, CompletionRequest, LanguageModel, LmError};
use crate::http::HttpTransport;

/// JSON body POSTed to the completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequestBody {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<u32>,
    pub seed: u64,
}

/// JSON body expected back. `first_token_logprobs` maps candidate token text
/// to log-probability and is only read when `logprobs` was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmResponseBody {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_token_logprobs: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_logprob: Option<f64>,
}

/// Completion endpoint client. Does not support continuation scoring, so
/// confidence-based baselines need the mock backend or a different client.
#[derive(Debug, Clone)]
pub struct HttpLm {
    transport: HttpTransport,
}

impl HttpLm {
    pub fn new(transport: HttpTransport) -> Self {
        Self { transport }
    }
}

impl LanguageModel for HttpLm {
    fn backend(&self) -> Backend {
        Backend::Http
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LmError> {
        let body = LmRequestBody {
            prompt: req.prompt.to_owned(),
            max_tokens: req.max_tokens,
            temperature: req.temperature,
            top_k: req.top_k,
            logprobs: req.logprobs,
            seed: req.seed,
        };
        let resp: LmResponseBody = self.transport.post_json(&body)?;
        Ok(Completion {
            text: resp.text,
            first_token_logprobs: req.logprobs.and(resp.first_token_logprobs),
            sequence_logprob: resp.sequence_logprob.map(|lp| lp.min(0.0)),
        })
    }
}
