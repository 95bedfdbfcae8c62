//! Subscriber provisioning: file format, validation, and deterministic
//! synthesis for generated load.
//!
//! A provisioning file is a JSON array of entries. Keys are 32 hex
//! characters (16 bytes). Loading is strict: any malformed entry fails the
//! whole file, since a partially provisioned subscriber base makes run
//! results meaningless.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::statestore::Store;

use super::types::{subscriber_key, Snssai, SubscriberRecord};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvisionEntry {
    pub supi: String,
    pub k: String,
    pub allowed_snssai: Vec<Snssai>,
    pub default_dnn: String,
}

#[derive(Debug, Error)]
pub enum ProvisionError {
    #[error("cannot read provisioning file: {0}")]
    Io(#[from] std::io::Error),
    #[error("provisioning file is not a JSON array of entries: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("subscriber {supi}: key must be 32 hex characters")]
    BadKey { supi: String },
    #[error("subscriber {supi}: at least one allowed slice is required")]
    NoSlices { supi: String },
    #[error("duplicate subscriber {supi}")]
    Duplicate { supi: String },
    #[error("subscriber entry has an empty supi")]
    EmptySupi,
}

impl ProvisionEntry {
    pub fn key_bytes(&self) -> Result<[u8; 16], ProvisionError> {
        let bytes = hex::decode(&self.k).map_err(|_| ProvisionError::BadKey {
            supi: self.supi.clone(),
        })?;
        bytes.try_into().map_err(|_| ProvisionError::BadKey {
            supi: self.supi.clone(),
        })
    }

    pub fn validate(&self) -> Result<(), ProvisionError> {
        if self.supi.is_empty() {
            return Err(ProvisionError::EmptySupi);
        }
        self.key_bytes()?;
        if self.allowed_snssai.is_empty() {
            return Err(ProvisionError::NoSlices {
                supi: self.supi.clone(),
            });
        }
        Ok(())
    }
}

pub fn load_file(path: &std::path::Path) -> Result<Vec<ProvisionEntry>, ProvisionError> {
    let text = std::fs::read_to_string(path)?;
    let entries: Vec<ProvisionEntry> = serde_json::from_str(&text)?;
    let mut seen = std::collections::BTreeSet::new();
    for entry in &entries {
        entry.validate()?;
        if !seen.insert(entry.supi.clone()) {
            return Err(ProvisionError::Duplicate {
                supi: entry.supi.clone(),
            });
        }
    }
    Ok(entries)
}

/// Writes subscriber records for every entry. Returns how many were
/// provisioned.
pub fn apply(store: &mut Store, entries: &[ProvisionEntry]) -> Result<usize, ProvisionError> {
    for entry in entries {
        entry.validate()?;
        let record = SubscriberRecord {
            supi: entry.supi.clone(),
            k: entry.key_bytes()?,
            sqn: 0,
            allowed_snssai: entry.allowed_snssai.clone(),
            default_dnn: entry.default_dnn.clone(),
        };
        let bytes = serde_json::to_vec(&record).expect("records serialize");
        store
            .put(&subscriber_key(&entry.supi), bytes)
            .expect("supi lengths are validated by callers");
    }
    Ok(entries.len())
}

/// Permanent key for a generated subscriber, derived from its identifier
/// so re-running a scenario provisions identical credentials.
pub fn derived_key(supi: &str) -> [u8; 16] {
    let digest = Sha256::digest(format!("subscriber-key:{supi}").as_bytes());
    digest[..16].try_into().expect("digest is 32 bytes")
}

/// `count` generated subscribers named by a zero-padded index, all allowed
/// onto the default slice.
pub fn synthesize(count: usize) -> Vec<ProvisionEntry> {
    (0..count)
        .map(|i| {
            let supi = format!("imsi-20893{:010}", i + 1);
            let k = hex::encode(derived_key(&supi));
            ProvisionEntry {
                supi,
                k,
                allowed_snssai: vec![Snssai::new(1, 1)],
                default_dnn: "internet".to_string(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesized_entries_are_valid_and_deterministic() {
        let a = synthesize(3);
        let b = synthesize(3);
        for (x, y) in a.iter().zip(&b) {
            x.validate().unwrap();
            assert_eq!(x.supi, y.supi);
            assert_eq!(x.k, y.k);
        }
        assert_eq!(a[0].supi, "imsi-208930000000001");
        assert_ne!(a[0].k, a[1].k);
    }

    #[test]
    fn apply_writes_records_with_zero_sqn() {
        let mut store = Store::new();
        let n = apply(&mut store, &synthesize(2)).unwrap();
        assert_eq!(n, 2);
        let rec = store.get(&subscriber_key("imsi-208930000000001")).unwrap();
        let sub: SubscriberRecord = serde_json::from_slice(&rec.value).unwrap();
        assert_eq!(sub.sqn, 0);
        assert_eq!(sub.default_dnn, "internet");
    }

    #[test]
    fn load_file_rejects_bad_keys_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("subs.json");

        std::fs::write(
            &path,
            r#"[{"supi": "imsi-1", "k": "zz", "allowed_snssai": [{"sst":1,"sd":1}], "default_dnn": "internet"}]"#,
        )
        .unwrap();
        assert!(matches!(
            load_file(&path),
            Err(ProvisionError::BadKey { .. })
        ));

        let k = "00112233445566778899aabbccddeeff";
        std::fs::write(
            &path,
            format!(
                r#"[{{"supi": "imsi-1", "k": "{k}", "allowed_snssai": [{{"sst":1,"sd":1}}], "default_dnn": "a"}},
                    {{"supi": "imsi-1", "k": "{k}", "allowed_snssai": [{{"sst":1,"sd":1}}], "default_dnn": "b"}}]"#
            ),
        )
        .unwrap();
        assert!(matches!(
            load_file(&path),
            Err(ProvisionError::Duplicate { .. })
        ));
    }
}
