//! Operator key store: a JSON file of named identities and pending
//! enrollments (subjects that have keys but no DID yet).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustchain_core::attestation::{Enrollment, Identity};
use trustchain_core::didcore::{KeyPair, Secret};
use trustchain_core::{Did, DidDocument};

use crate::error::WireError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PendingEnrollment {
    pub document: DidDocument,
    pub keys: Vec<KeyPair>,
    pub recovery_secret: Secret,
}

impl From<&PendingEnrollment> for Enrollment {
    fn from(p: &PendingEnrollment) -> Self {
        Enrollment { document: p.document.clone(), keys: p.keys.clone(), recovery_secret: p.recovery_secret.clone() }
    }
}

impl From<&Enrollment> for PendingEnrollment {
    fn from(e: &Enrollment) -> Self {
        PendingEnrollment { document: e.document.clone(), keys: e.keys.clone(), recovery_secret: e.recovery_secret.clone() }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Keystore {
    #[serde(default)]
    pub identities: BTreeMap<String, Identity>,
    #[serde(default)]
    pub enrollments: BTreeMap<String, PendingEnrollment>,
    #[serde(skip)]
    path: PathBuf,
}

impl Keystore {
    pub fn open(path: &Path) -> Result<Self, WireError> {
        let mut store: Keystore = match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| WireError::new("keystore", format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Keystore::default(),
            Err(e) => return Err(e.into()),
        };
        store.path = path.to_owned();
        Ok(store)
    }

    pub fn save(&self) -> Result<(), WireError> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = self.path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self).expect("keystore is plain data"))?;
        std::fs::rename(tmp, &self.path)?;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Identity, WireError> {
        self.identities.get(name).ok_or_else(|| WireError::new("unknown-identity", format!("no identity named {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Identity, WireError> {
        self.identities.get_mut(name).ok_or_else(|| WireError::new("unknown-identity", format!("no identity named {name:?}")))
    }

    /// Two distinct identities, mutably.
    pub fn pair_mut(&mut self, a: &str, b: &str) -> Result<(&mut Identity, &mut Identity), WireError> {
        if a == b {
            return Err(WireError::new("usage", "the two identities must differ"));
        }
        self.get(a)?;
        self.get(b)?;
        let mut it = self.identities.iter_mut().filter(|(k, _)| *k == a || *k == b);
        let (k1, v1) = it.next().expect("checked");
        let (_, v2) = it.next().expect("checked");
        Ok(if k1 == a { (v1, v2) } else { (v2, v1) })
    }

    pub fn insert(&mut self, name: &str, identity: Identity) -> Result<(), WireError> {
        if self.identities.contains_key(name) {
            return Err(WireError::new("identity-exists", format!("identity {name:?} already exists")));
        }
        self.identities.insert(name.to_owned(), identity);
        Ok(())
    }

    /// The name of the identity holding the update secret for `did`.
    pub fn holder_of(&self, did: &Did) -> Option<&str> {
        self.identities.iter().find(|(_, id)| id.issued.contains_key(did)).map(|(k, _)| k.as_str())
    }
}
