use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Short content hash of the canonical JSON encoding of `value`.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize infallibly");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}

/// Where a reported number came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
}
