//! Challenge/response material for UE authentication.
//!
//! The construction is deliberately simple: every derived quantity is a
//! keyed MAC over the challenge nonce, truncated to 16 bytes. The expected
//! response binds the nonce, the network token additionally binds the
//! subscriber's sequence number so a replayed challenge is detectable, and
//! the session anchor key binds a domain separator. Verification recomputes
//! the whole vector from the stored subscriber key, so two parties agree
//! exactly when they hold the same key.

use sha2::{Digest, Sha256};

use super::types::AuthVector;

const BLOCK_LEN: usize = 64;

/// HMAC-SHA256 over the concatenation of `parts` (RFC 2104 with a 64-byte
/// block).
pub fn hmac_sha256(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut block = [0u8; BLOCK_LEN];
    if key.len() > BLOCK_LEN {
        let digest = Sha256::digest(key);
        block[..32].copy_from_slice(&digest);
    } else {
        block[..key.len()].copy_from_slice(key);
    }

    let mut inner = Sha256::new();
    let ipad: Vec<u8> = block.iter().map(|b| b ^ 0x36).collect();
    inner.update(&ipad);
    for part in parts {
        inner.update(part);
    }
    let inner_digest = inner.finalize();

    let mut outer = Sha256::new();
    let opad: Vec<u8> = block.iter().map(|b| b ^ 0x5C).collect();
    outer.update(&opad);
    outer.update(inner_digest);
    outer.finalize().into()
}

/// First 16 bytes of [`hmac_sha256`].
pub fn mac16(key: &[u8; 16], parts: &[&[u8]]) -> [u8; 16] {
    let full = hmac_sha256(key, parts);
    full[..16].try_into().expect("digest is 32 bytes")
}

/// Derives the full vector for one challenge. `sqn` is folded in as its
/// low 48 bits, big-endian, matching the usual sequence-number width.
pub fn compute_vector(k: &[u8; 16], rand: [u8; 16], sqn: u64) -> AuthVector {
    let sqn_be = sqn.to_be_bytes();
    AuthVector {
        rand,
        xres: mac16(k, &[&rand]),
        autn: mac16(k, &[&rand, &sqn_be[2..8]]),
        kseaf: mac16(k, &[&rand, b"seaf"]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hmac_matches_rfc4231_case_2() {
        let mac = hmac_sha256(b"Jefe", &[b"what do ya want ", b"for nothing?"]);
        assert_eq!(
            hex::encode(mac),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }

    #[test]
    fn hmac_matches_rfc4231_case_1() {
        let key = [0x0B; 20];
        let mac = hmac_sha256(&key, &[b"Hi There"]);
        assert_eq!(
            hex::encode(mac),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"
        );
    }

    #[test]
    fn long_keys_are_hashed_down_first() {
        let key = [0xAA; 131];
        let mac = hmac_sha256(
            &key,
            &[b"Test Using Larger Than Block-Size Key - Hash Key First"],
        );
        assert_eq!(
            hex::encode(mac),
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54"
        );
    }

    #[test]
    fn vector_is_deterministic_in_key_rand_and_sqn() {
        let k = [0x11; 16];
        let rand = [0x22; 16];
        let a = compute_vector(&k, rand, 5);
        let b = compute_vector(&k, rand, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn vector_components_differ_and_bind_their_inputs() {
        let k = [0x11; 16];
        let rand = [0x22; 16];
        let v = compute_vector(&k, rand, 5);
        assert_ne!(v.xres, v.autn);
        assert_ne!(v.xres, v.kseaf);
        assert_ne!(v.autn, v.kseaf);

        let other_key = compute_vector(&[0x12; 16], rand, 5);
        assert_ne!(other_key.xres, v.xres);

        let other_sqn = compute_vector(&k, rand, 6);
        assert_eq!(other_sqn.xres, v.xres);
        assert_ne!(other_sqn.autn, v.autn);
    }
}
