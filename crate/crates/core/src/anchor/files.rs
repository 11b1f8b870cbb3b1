//! The three content-addressed files behind every anchored batch.
//!
//! A transaction embeds the core index id; the core index names the
//! provisional index; the provisional index names the chunk file holding the
//! operations. All three use the canonical text serialization.

use serde::{Deserialize, Serialize};

use crate::canonical::{from_canonical, to_canonical, CanonicalError};
use crate::didcore::DidOperation;
use crate::registry::ContentId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkFile {
    pub operations: Vec<DidOperation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ProvisionalIndexFile {
    pub chunk_cid: ContentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CoreIndexFile {
    pub operation_count: u64,
    pub provisional_cid: ContentId,
}

macro_rules! canonical_file {
    ($t:ty) => {
        impl $t {
            pub fn to_bytes(&self) -> Vec<u8> {
                to_canonical(self).expect("index files are canonicalizable")
            }

            pub fn from_bytes(bytes: &[u8]) -> Result<Self, CanonicalError> {
                from_canonical(bytes)
            }
        }
    };
}

canonical_file!(ChunkFile);
canonical_file!(ProvisionalIndexFile);
canonical_file!(CoreIndexFile);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::sha256;

    #[test]
    fn index_file_text_form() {
        let p = ProvisionalIndexFile {
            chunk_cid: ContentId(sha256(b"")),
        };
        assert_eq!(
            String::from_utf8(p.to_bytes()).unwrap(),
            r#"{"chunkCid":"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"}"#
        );
        let c = CoreIndexFile {
            operation_count: 3,
            provisional_cid: ContentId(sha256(b"")),
        };
        assert_eq!(
            String::from_utf8(c.to_bytes()).unwrap(),
            r#"{"operationCount":3,"provisionalCid":"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"}"#
        );
        assert_eq!(CoreIndexFile::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn non_canonical_rejected() {
        let text =
            br#"{"chunkCid": "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"}"#;
        assert!(ProvisionalIndexFile::from_bytes(text).is_err());
        let extra = br#"{"chunkCid":"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855","x":1}"#;
        assert!(ProvisionalIndexFile::from_bytes(extra).is_err());
    }
}
