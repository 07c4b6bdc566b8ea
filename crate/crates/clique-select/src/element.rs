//! Ordered input elements.

use std::fmt;

/// One element of the input set: a 64-bit key plus an `(origin, seq)` tag.
///
/// The tag makes the comparison order a strict total order even when keys
/// repeat: ordering is lexicographic on `(key, origin, seq)` and `(origin,
/// seq)` pairs are unique within an instance, so every rank `1..=n` is held
/// by exactly one element.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaggedElement {
    pub key: i64,
    /// Node id (`0..p-1`) the element was assigned to at generation time.
    pub origin: u32,
    /// Per-origin sequence number.
    pub seq: u32,
}

impl TaggedElement {
    pub fn new(key: i64, origin: u32, seq: u32) -> Self {
        Self { key, origin, seq }
    }
}

impl fmt::Debug for TaggedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}:{}", self.key, self.origin, self.seq)
    }
}
