//! Verification and rectification for knowledge-augmented question answering.
//!
//! A generation LM answers a question from retrieved knowledge; a verifier LM
//! classifies each (question, knowledge, answer) triple as a retrieval error,
//! a grounding error or correct. Errors are rectified by retrieving the next
//! unused knowledge item or by re-sampling the answer, up to a step budget,
//! after which the answer is withheld.

pub mod corpus;
pub mod eval;
pub mod http;
pub mod labeler;
pub mod lm;
pub mod pipeline;
pub mod retrieval;
pub mod verifier;

/// Lowercase hex SHA-256 of a prompt; keys mock fixtures and trace steps.
pub fn prompt_digest(prompt: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
