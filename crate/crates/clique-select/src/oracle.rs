//! Ground-truth sequential oracle and deterministic instance generators.
//!
//! The oracle is an independent implementation path (full sort, then index)
//! against which every distributed algorithm is verified. Generators are
//! pure functions of their spec, so any benchmark row can be reproduced
//! from its flags alone.

use crate::element::TaggedElement;
use crate::rng::SplitMix64;
use crate::sampling::RankSet;
use crate::Result;

/// Key layout of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    UniformRandom,
    Sorted,
    Reversed,
    AllEqualKeys,
    /// Keys drawn uniformly from `d` distinct values.
    FewDistinct(u64),
    /// Ascending low keys in the first half of generation order, descending
    /// high keys in the second; round-robin placement gives every node a
    /// slice of both.
    AdversarialHalves,
}

impl Distribution {
    pub fn label(&self) -> String {
        match self {
            Distribution::UniformRandom => "uniform".into(),
            Distribution::Sorted => "sorted".into(),
            Distribution::Reversed => "reversed".into(),
            Distribution::AllEqualKeys => "equal".into(),
            Distribution::FewDistinct(d) => format!("few:{d}"),
            Distribution::AdversarialHalves => "halves".into(),
        }
    }
}

/// A reproducible problem instance: `n` elements for `p` nodes.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub n: u64,
    pub p: usize,
    pub distribution: Distribution,
    pub seed: u64,
}

/// Generate the element list. Tags follow generation order: element `i`
/// carries `(origin, seq) = (i mod p, i div p)`, matching its round-robin
/// placement at load time.
pub fn generate(spec: &InstanceSpec) -> Vec<TaggedElement> {
    let n = spec.n;
    let p = spec.p as u64;
    let mut rng = SplitMix64::new(spec.seed);
    (0..n)
        .map(|i| {
            let key = match spec.distribution {
                Distribution::UniformRandom => (rng.next_u64() >> 1) as i64,
                Distribution::Sorted => i as i64,
                Distribution::Reversed => (n - 1 - i) as i64,
                Distribution::AllEqualKeys => 42,
                Distribution::FewDistinct(d) => rng.next_below(d.max(1)) as i64,
                Distribution::AdversarialHalves => {
                    let half = n / 2;
                    if i < half {
                        i as i64
                    } else {
                        (2 * n - (i - half)) as i64
                    }
                }
            };
            TaggedElement::new(key, (i % p) as u32, (i / p) as u32)
        })
        .collect()
}

/// Sort-then-index ground truth for multiple selection.
pub fn oracle_multiselect(
    elements: &[TaggedElement],
    targets: &RankSet,
) -> Result<Vec<(u64, TaggedElement)>> {
    targets.check_against(elements.len() as u64)?;
    let mut sorted = elements.to_vec();
    sorted.sort_unstable();
    Ok(targets
        .ranks()
        .iter()
        .map(|&k| (k, sorted[(k - 1) as usize]))
        .collect())
}
