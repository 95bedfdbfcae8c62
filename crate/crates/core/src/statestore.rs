//! Versioned key-value store with optimistic concurrency.
//!
//! Models the shared unstructured-data layer the network functions keep
//! their state in: every record carries a version counter that bumps by one
//! per write, prefix scans return records in key order, and multi-key
//! transactions commit only when every version check still matches the state
//! the caller observed (watch/multi/exec semantics). Conflicts are a result,
//! not an error, so callers can re-read and retry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Keys longer than this are rejected outright.
pub const MAX_KEY_BYTES: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("key exceeds {MAX_KEY_BYTES} bytes ({0} bytes)")]
    KeyTooLong(usize),
    #[error("key is empty")]
    EmptyKey,
}

/// Namespaces the store recognizes. Classification is advisory: the store
/// accepts any valid key, and `Unclassified` marks keys outside the known
/// layouts (tests use it to catch typos in key construction).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeySchema {
    /// `ue:{supi}` registration context
    UeContext,
    /// `pdu:{session-id}` PDU session records
    PduSession,
    /// `charging-sessions/{id}`
    ChargingSession,
    /// `nsacf-counters/{sst}-{sd}`
    SliceCounters,
    /// `bsf-bindings/{id}`
    Binding,
    /// `pcf-policies/{id}`
    Policy,
    /// `nwdaf-subs/{id}`
    AnalyticsSubscription,
    /// `nrf/{nf-type}/{instance-id}` service registry profiles
    NfProfile,
    /// `nrf-subs/{id}` registry status subscriptions
    NfStatusSubscription,
    /// `udr/{key}` raw subscriber-data namespace
    UdrData,
    /// `auth:{supi}` transient challenge vectors
    PendingAuth,
    /// `n4:{session-id}` user-plane setup stubs
    N4Stub,
}

/// Validated store key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StoreKey(String);

impl StoreKey {
    pub fn parse(raw: impl Into<String>) -> Result<Self, StoreError> {
        let raw = raw.into();
        if raw.is_empty() {
            return Err(StoreError::EmptyKey);
        }
        if raw.len() > MAX_KEY_BYTES {
            return Err(StoreError::KeyTooLong(raw.len()));
        }
        Ok(StoreKey(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn schema(&self) -> Option<KeySchema> {
        let k = self.0.as_str();
        let tail_nonempty = |prefix: &str| k.len() > prefix.len();
        if k.starts_with("ue:") && tail_nonempty("ue:") {
            Some(KeySchema::UeContext)
        } else if k.starts_with("pdu:") && tail_nonempty("pdu:") {
            Some(KeySchema::PduSession)
        } else if k.starts_with("charging-sessions/") && tail_nonempty("charging-sessions/") {
            Some(KeySchema::ChargingSession)
        } else if let Some(tail) = k.strip_prefix("nsacf-counters/") {
            let mut parts = tail.splitn(2, '-');
            let sst = parts.next().unwrap_or("");
            let sd = parts.next().unwrap_or("");
            if !sst.is_empty()
                && !sd.is_empty()
                && sst.bytes().all(|b| b.is_ascii_digit())
                && sd.bytes().all(|b| b.is_ascii_hexdigit())
            {
                Some(KeySchema::SliceCounters)
            } else {
                None
            }
        } else if k.starts_with("bsf-bindings/") && tail_nonempty("bsf-bindings/") {
            Some(KeySchema::Binding)
        } else if k.starts_with("pcf-policies/") && tail_nonempty("pcf-policies/") {
            Some(KeySchema::Policy)
        } else if k.starts_with("nwdaf-subs/") && tail_nonempty("nwdaf-subs/") {
            Some(KeySchema::AnalyticsSubscription)
        } else if let Some(tail) = k.strip_prefix("nrf/") {
            let mut parts = tail.splitn(2, '/');
            match (parts.next(), parts.next()) {
                (Some(t), Some(i)) if !t.is_empty() && !i.is_empty() => Some(KeySchema::NfProfile),
                _ => None,
            }
        } else if k.starts_with("nrf-subs/") && tail_nonempty("nrf-subs/") {
            Some(KeySchema::NfStatusSubscription)
        } else if k.starts_with("udr/") && tail_nonempty("udr/") {
            Some(KeySchema::UdrData)
        } else if k.starts_with("auth:") && tail_nonempty("auth:") {
            Some(KeySchema::PendingAuth)
        } else if k.starts_with("n4:") && tail_nonempty("n4:") {
            Some(KeySchema::N4Stub)
        } else {
            None
        }
    }
}

impl TryFrom<String> for StoreKey {
    type Error = StoreError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        StoreKey::parse(value)
    }
}

impl From<StoreKey> for String {
    fn from(key: StoreKey) -> String {
        key.0
    }
}

impl std::fmt::Display for StoreKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A stored record. Versions start at 1 on first write and increase by
/// exactly one per subsequent write to the same key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub key: String,
    pub value: Vec<u8>,
    pub version: u64,
}

/// One step of a multi-key transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxnOp {
    /// Commit only if `key` currently holds exactly `expected_version`.
    /// A check against an absent key always conflicts.
    CheckVersion { key: StoreKey, expected_version: u64 },
    Put { key: StoreKey, value: Vec<u8> },
    Delete { key: StoreKey },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxnResult {
    Committed,
    /// First key (in op order) whose version check failed. Nothing was written.
    Conflict { key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Slot {
    value: Vec<u8>,
    version: u64,
}

/// In-memory versioned store. Iteration order is key order, which keeps
/// scans and debug dumps deterministic.
#[derive(Debug, Clone, Default)]
pub struct Store {
    map: BTreeMap<String, Slot>,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    /// Write `value`, returning the new version (1 for a fresh key).
    pub fn put(&mut self, key: &str, value: impl Into<Vec<u8>>) -> Result<u64, StoreError> {
        let key = StoreKey::parse(key)?;
        let slot = self.map.entry(key.0).or_insert(Slot {
            value: Vec::new(),
            version: 0,
        });
        slot.value = value.into();
        slot.version += 1;
        Ok(slot.version)
    }

    pub fn get(&self, key: &str) -> Option<Record> {
        self.map.get(key).map(|slot| Record {
            key: key.to_string(),
            value: slot.value.clone(),
            version: slot.version,
        })
    }

    pub fn version_of(&self, key: &str) -> Option<u64> {
        self.map.get(key).map(|slot| slot.version)
    }

    /// Remove a key. Returns whether it existed. Re-creating the key later
    /// starts a fresh version counter at 1.
    pub fn delete(&mut self, key: &str) -> bool {
        self.map.remove(key).is_some()
    }

    /// All records whose key starts with `prefix`, in key order.
    pub fn scan_prefix(&self, prefix: &str) -> Vec<Record> {
        self.map
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, slot)| Record {
                key: k.clone(),
                value: slot.value.clone(),
                version: slot.version,
            })
            .collect()
    }

    /// Atomically apply `ops`: every version check is evaluated against the
    /// pre-transaction state, and writes land only if all checks pass.
    pub fn transact(&mut self, ops: &[TxnOp]) -> TxnResult {
        debug_assert!(!ops.is_empty(), "empty transaction");
        for op in ops {
            if let TxnOp::CheckVersion {
                key,
                expected_version,
            } = op
            {
                if self.version_of(key.as_str()) != Some(*expected_version) {
                    return TxnResult::Conflict {
                        key: key.as_str().to_string(),
                    };
                }
            }
        }
        for op in ops {
            match op {
                TxnOp::CheckVersion { .. } => {}
                TxnOp::Put { key, value } => {
                    self.put(key.as_str(), value.clone())
                        .expect("validated key");
                }
                TxnOp::Delete { key } => {
                    self.delete(key.as_str());
                }
            }
        }
        TxnResult::Committed
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|k| k.as_str())
    }

    /// Debug dump with keys sorted. Values that hold UTF-8 JSON are embedded
    /// as JSON; anything else is hex-encoded under `{"hex": ...}`.
    pub fn dump_json(&self) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        for (key, slot) in &self.map {
            let value = match serde_json::from_slice::<serde_json::Value>(&slot.value) {
                Ok(v) => v,
                Err(_) => serde_json::json!({ "hex": hex::encode(&slot.value) }),
            };
            out.insert(
                key.clone(),
                serde_json::json!({ "version": slot.version, "value": value }),
            );
        }
        serde_json::Value::Object(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(s: &str) -> StoreKey {
        StoreKey::parse(s).unwrap()
    }

    #[test]
    fn versions_start_at_one_and_increment() {
        let mut store = Store::new();
        assert_eq!(store.put("ue:imsi-1", b"a".to_vec()).unwrap(), 1);
        assert_eq!(store.put("ue:imsi-1", b"b".to_vec()).unwrap(), 2);
        let rec = store.get("ue:imsi-1").unwrap();
        assert_eq!(rec.value, b"b");
        assert_eq!(rec.version, 2);
    }

    #[test]
    fn delete_then_recreate_restarts_versioning() {
        let mut store = Store::new();
        store.put("pdu:s1", b"x".to_vec()).unwrap();
        store.put("pdu:s1", b"y".to_vec()).unwrap();
        assert!(store.delete("pdu:s1"));
        assert!(!store.delete("pdu:s1"));
        assert_eq!(store.put("pdu:s1", b"z".to_vec()).unwrap(), 1);
    }

    #[test]
    fn oversized_and_empty_keys_are_rejected() {
        let mut store = Store::new();
        let long = "k".repeat(257);
        assert_eq!(
            store.put(&long, b"v".to_vec()),
            Err(StoreError::KeyTooLong(257))
        );
        assert_eq!(store.put("", b"v".to_vec()), Err(StoreError::EmptyKey));
        let edge = "k".repeat(256);
        assert!(store.put(&edge, b"v".to_vec()).is_ok());
    }

    #[test]
    fn scan_prefix_returns_key_ordered_matches() {
        let mut store = Store::new();
        for key in ["pdu:c", "pdu:a", "ue:x", "pdu:b", "pd"] {
            store.put(key, b"v".to_vec()).unwrap();
        }
        let keys: Vec<String> = store
            .scan_prefix("pdu:")
            .into_iter()
            .map(|r| r.key)
            .collect();
        assert_eq!(keys, vec!["pdu:a", "pdu:b", "pdu:c"]);
        assert!(store.scan_prefix("zz:").is_empty());
    }

    #[test]
    fn transact_commits_when_all_checks_pass() {
        let mut store = Store::new();
        store.put("ue:1", b"ctx".to_vec()).unwrap();
        let result = store.transact(&[
            TxnOp::CheckVersion {
                key: k("ue:1"),
                expected_version: 1,
            },
            TxnOp::Put {
                key: k("ue:1"),
                value: b"ctx2".to_vec(),
            },
            TxnOp::Put {
                key: k("pdu:1"),
                value: b"sess".to_vec(),
            },
        ]);
        assert_eq!(result, TxnResult::Committed);
        assert_eq!(store.get("ue:1").unwrap().version, 2);
        assert_eq!(store.get("pdu:1").unwrap().version, 1);
    }

    #[test]
    fn transact_conflict_leaves_store_untouched() {
        let mut store = Store::new();
        store.put("ue:1", b"ctx".to_vec()).unwrap();
        store.put("ue:1", b"ctx2".to_vec()).unwrap();
        let before: Vec<Record> = store.scan_prefix("");
        let result = store.transact(&[
            TxnOp::Put {
                key: k("pdu:9"),
                value: b"never".to_vec(),
            },
            TxnOp::CheckVersion {
                key: k("ue:1"),
                expected_version: 1,
            },
        ]);
        assert_eq!(
            result,
            TxnResult::Conflict {
                key: "ue:1".to_string()
            }
        );
        assert_eq!(store.scan_prefix(""), before);
    }

    #[test]
    fn check_against_absent_key_conflicts() {
        let mut store = Store::new();
        let result = store.transact(&[TxnOp::CheckVersion {
            key: k("ue:ghost"),
            expected_version: 1,
        }]);
        assert_eq!(
            result,
            TxnResult::Conflict {
                key: "ue:ghost".to_string()
            }
        );
    }

    #[test]
    fn sequential_cas_pair_second_conflicts() {
        // Two writers read version 1, then race the same check+put.
        let mut store = Store::new();
        store.put("nsacf-counters/1-000001", b"0".to_vec()).unwrap();
        let txn = |v: u64| {
            vec![
                TxnOp::CheckVersion {
                    key: k("nsacf-counters/1-000001"),
                    expected_version: v,
                },
                TxnOp::Put {
                    key: k("nsacf-counters/1-000001"),
                    value: b"1".to_vec(),
                },
            ]
        };
        assert_eq!(store.transact(&txn(1)), TxnResult::Committed);
        assert_eq!(
            store.transact(&txn(1)),
            TxnResult::Conflict {
                key: "nsacf-counters/1-000001".to_string()
            }
        );
    }

    #[test]
    fn schema_classifier_recognizes_documented_layouts() {
        let cases = [
            ("ue:imsi-000000000000001", Some(KeySchema::UeContext)),
            ("pdu:imsi-000000000000001/1", Some(KeySchema::PduSession)),
            ("charging-sessions/abc", Some(KeySchema::ChargingSession)),
            ("nsacf-counters/1-000001", Some(KeySchema::SliceCounters)),
            ("bsf-bindings/abc", Some(KeySchema::Binding)),
            ("pcf-policies/p1", Some(KeySchema::Policy)),
            ("nwdaf-subs/s1", Some(KeySchema::AnalyticsSubscription)),
            ("nrf/amf/instance-1", Some(KeySchema::NfProfile)),
            ("nrf-subs/w1", Some(KeySchema::NfStatusSubscription)),
            ("udr/imsi-000000000000001", Some(KeySchema::UdrData)),
            ("auth:imsi-000000000000001", Some(KeySchema::PendingAuth)),
            ("n4:imsi-000000000000001/1", Some(KeySchema::N4Stub)),
            ("nrf/amf", None),
            ("nsacf-counters/x", None),
            ("random-key", None),
        ];
        for (key, expected) in cases {
            assert_eq!(k(key).schema(), expected, "key {key}");
        }
    }

    #[test]
    fn dump_embeds_json_values_and_hexes_the_rest() {
        let mut store = Store::new();
        store.put("ue:1", br#"{"state":"Registered"}"#.to_vec()).unwrap();
        store.put("blob", vec![0xde, 0xad]).unwrap();
        let dump = store.dump_json();
        assert_eq!(dump["ue:1"]["value"]["state"], "Registered");
        assert_eq!(dump["blob"]["value"]["hex"], "dead");
        let keys: Vec<&String> = dump.as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["blob", "ue:1"]);
    }
}
