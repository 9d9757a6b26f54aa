use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use sha2::{Digest, Sha256};

/// obs-websocket v5 authentication string:
/// `base64(sha256(base64(sha256(password + salt)) + challenge))`.
pub fn compute_auth(password: &str, salt: &str, challenge: &str) -> String {
    let secret = STANDARD.encode(Sha256::new().chain_update(password).chain_update(salt).finalize());
    STANDARD.encode(Sha256::new().chain_update(secret).chain_update(challenge).finalize())
}
