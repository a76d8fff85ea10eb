//! Small shared helpers: stable hashing, seed derivation, fingerprints.

/// FNV-1a over a byte slice. Stable across platforms and releases, which is
/// what the seed-derivation and fingerprint code needs (std's `DefaultHasher`
/// makes no such promise).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive a child seed from a base seed and a list of string tags.
///
/// Every seeded component (per-topic split shuffles, per-stratum subsample
/// shuffles, per-epoch batch streams, backend init) derives its RNG through
/// this so that streams are independent and insensitive to iteration order.
pub fn derive_seed(base: u64, tags: &[&str]) -> u64 {
    let mut hash = fnv1a64(&base.to_le_bytes());
    for tag in tags {
        hash = fnv1a64(&hash.to_le_bytes()) ^ fnv1a64(tag.as_bytes());
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hex fingerprint of a list of canonical record strings.
///
/// Used to stamp checkpoints and run manifests with the identity of the
/// corpus they were produced from.
pub fn fingerprint<I, S>(records: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut count: u64 = 0;
    for rec in records {
        hash ^= fnv1a64(rec.as_ref().as_bytes());
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        count += 1;
    }
    format!("{hash:016x}-{count}")
}

/// Current UTC timestamp as RFC 3339 with second precision.
pub fn timestamp_now() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}
