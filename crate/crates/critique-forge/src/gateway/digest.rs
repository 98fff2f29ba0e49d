//! Stable request digests for cassette keying.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::model::GenerationParams;

use super::ChatMessage;

/// Canonical wire-independent view of a request. Field order is fixed by
/// this struct, so the serialized form (and therefore the digest) does not
/// depend on any backend's payload layout.
#[derive(Serialize)]
struct CanonicalRequest<'a> {
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

/// SHA-256 over the canonical serialization of (messages, sampling params).
/// Identical logical requests always collide; any change to message order,
/// content, or params produces a new digest.
pub fn request_digest(messages: &[ChatMessage], params: &GenerationParams) -> String {
    let canonical = CanonicalRequest {
        messages,
        temperature: params.temperature,
        top_p: params.top_p,
        max_tokens: params.max_tokens,
    };
    let json = serde_json::to_string(&canonical).expect("canonical request serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn params() -> GenerationParams {
        GenerationParams::text()
    }

    #[test]
    fn identical_requests_collide() {
        let msgs = vec![ChatMessage::system("a"), ChatMessage::user("b")];
        assert_eq!(request_digest(&msgs, &params()), request_digest(&msgs, &params()));
    }

    #[test]
    fn message_order_changes_the_digest() {
        let ab = vec![ChatMessage::user("a"), ChatMessage::user("b")];
        let ba = vec![ChatMessage::user("b"), ChatMessage::user("a")];
        assert_ne!(request_digest(&ab, &params()), request_digest(&ba, &params()));
    }

    #[test]
    fn params_change_the_digest() {
        let msgs = vec![ChatMessage::user("a")];
        assert_ne!(
            request_digest(&msgs, &GenerationParams::text()),
            request_digest(&msgs, &GenerationParams::code())
        );
    }

    #[test]
    fn whitespace_matters_in_content() {
        let a = vec![ChatMessage::user("a ")];
        let b = vec![ChatMessage::user("a")];
        assert_ne!(request_digest(&a, &params()), request_digest(&b, &params()));
    }
}
