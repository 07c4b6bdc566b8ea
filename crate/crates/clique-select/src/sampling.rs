//! Sequential building blocks shared by the distributed algorithms:
//! multi-rank selection in `O(n log h)` counted comparisons, regular-sample
//! extraction, the sample-of-samples merge with its gap certificate,
//! interval counting against a sample, active-interval location, and the
//! tower-recurrence iteration count.
//!
//! Every function that inspects element order threads an operation counter:
//! one unit per key comparison. The distributed layer adds one unit per
//! word sent or received, so per-node totals are a machine-independent
//! proxy for local computation time.

use std::cmp::Ordering;
use std::ops::Bound;

use crate::element::TaggedElement;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Rank sets
// ---------------------------------------------------------------------------

/// Sorted, strictly increasing target ranks (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSet {
    ranks: Vec<u64>,
}

impl RankSet {
    /// Build a rank set from arbitrary input: sorts, deduplicates, and
    /// rejects rank 0. Upper bounds are checked against a concrete set size
    /// by the operations that consume the ranks.
    pub fn new(mut ranks: Vec<u64>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Config("empty rank set".into()));
        }
        ranks.sort_unstable();
        ranks.dedup();
        if ranks[0] == 0 {
            return Err(Error::Rank { rank: 0, size: 0 });
        }
        Ok(Self { ranks })
    }

    pub fn singleton(k: u64) -> Result<Self> {
        Self::new(vec![k])
    }

    pub fn ranks(&self) -> &[u64] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn max(&self) -> u64 {
        *self.ranks.last().expect("rank set is never empty")
    }

    /// Error unless every rank fits a set of `size` elements.
    pub fn check_against(&self, size: u64) -> Result<()> {
        if self.max() > size {
            return Err(Error::Rank {
                rank: self.max(),
                size,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Counted comparison primitives
// ---------------------------------------------------------------------------

#[inline]
fn cmp_counted(a: &TaggedElement, b: &TaggedElement, ops: &mut u64) -> Ordering {
    *ops += 1;
    a.cmp(b)
}

/// Stable merge sort with counted comparisons. Used where a node really
/// sorts locally (explicit distributed sort fallback, final indexing).
pub(crate) fn sort_counted(items: &mut Vec<TaggedElement>, ops: &mut u64) {
    let n = items.len();
    if n <= 1 {
        return;
    }
    let mut buf = items.clone();
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = usize::min(lo + width, n);
            let hi = usize::min(lo + 2 * width, n);
            merge_runs(&items[lo..mid], &items[mid..hi], &mut buf[lo..hi], ops);
            lo = hi;
        }
        std::mem::swap(items, &mut buf);
        width *= 2;
    }
}

fn merge_runs(
    left: &[TaggedElement],
    right: &[TaggedElement],
    out: &mut [TaggedElement],
    ops: &mut u64,
) {
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        if i < left.len()
            && (j >= right.len() || cmp_counted(&left[i], &right[j], ops) != Ordering::Greater)
        {
            *slot = left[i];
            i += 1;
        } else {
            *slot = right[j];
            j += 1;
        }
    }
}

fn insertion_sort_counted(items: &mut [TaggedElement], ops: &mut u64) {
    for i in 1..items.len() {
        let x = items[i];
        let mut j = i;
        while j > 0 && cmp_counted(&items[j - 1], &x, ops) == Ordering::Greater {
            items[j] = items[j - 1];
            j -= 1;
        }
        items[j] = x;
    }
}

/// Number of sample items `<= z`, by counted binary search.
fn count_le(items: &[TaggedElement], z: &TaggedElement, ops: &mut u64) -> usize {
    let (mut lo, mut hi) = (0usize, items.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match cmp_counted(&items[mid], z, ops) {
            Ordering::Greater => hi = mid,
            _ => lo = mid + 1,
        }
    }
    lo
}

// ---------------------------------------------------------------------------
// Multi-rank selection
// ---------------------------------------------------------------------------

const SMALL_SEGMENT: usize = 16;

/// Select the elements at the requested ranks without sorting the whole set.
///
/// Quickselect that recurses only into partition sides containing requested
/// ranks, so the counted cost is `O(|set| log(r+1))`. Pivots are
/// median-of-three; when a recursion-depth budget of `4 log2 |set|` is
/// exhausted the pivot switches to an exact median of medians, which keeps
/// the bound deterministic on adversarial inputs.
pub fn local_multiselect(
    set: &[TaggedElement],
    ranks: &RankSet,
    ops: &mut u64,
) -> Result<Vec<TaggedElement>> {
    ranks.check_against(set.len() as u64)?;
    let mut buf = set.to_vec();
    let mut out: Vec<(u64, TaggedElement)> = Vec::with_capacity(ranks.len());
    let budget = 4 * ceil_log2(set.len() as u64 + 1) + 4;
    multiselect_rec(&mut buf, 0, ranks.ranks(), budget, &mut out, ops);
    out.sort_unstable_by_key(|&(r, _)| r);
    debug_assert_eq!(out.len(), ranks.len());
    Ok(out.into_iter().map(|(_, e)| e).collect())
}

/// `buf` holds the elements with global 1-based ranks
/// `base+1 ..= base+buf.len()`; `ranks` is the sorted subset of requested
/// ranks falling in that window.
fn multiselect_rec(
    buf: &mut [TaggedElement],
    base: u64,
    ranks: &[u64],
    depth_budget: u32,
    out: &mut Vec<(u64, TaggedElement)>,
    ops: &mut u64,
) {
    if ranks.is_empty() {
        return;
    }
    if buf.len() <= SMALL_SEGMENT {
        insertion_sort_counted(buf, ops);
        for &r in ranks {
            out.push((r, buf[(r - base - 1) as usize]));
        }
        return;
    }

    let pivot = if depth_budget > 0 {
        median_of_three(buf, ops)
    } else {
        median_of_medians(buf, ops)
    };

    // Partition around the pivot value; elements are pairwise distinct so
    // exactly one compares equal.
    let mut less: Vec<TaggedElement> = Vec::new();
    let mut greater: Vec<TaggedElement> = Vec::new();
    for &x in buf.iter() {
        match cmp_counted(&x, &pivot, ops) {
            Ordering::Less => less.push(x),
            Ordering::Greater => greater.push(x),
            Ordering::Equal => {}
        }
    }
    let pivot_rank = base + less.len() as u64 + 1;
    let split = ranks.partition_point(|&r| r < pivot_rank);
    let (left_ranks, rest) = ranks.split_at(split);
    let right_start = rest.partition_point(|&r| r == pivot_rank);
    if right_start > 0 {
        out.push((pivot_rank, pivot));
    }
    let right_ranks = &rest[right_start..];

    let less_len = less.len();
    buf[..less_len].copy_from_slice(&less);
    buf[less_len] = pivot;
    buf[less_len + 1..].copy_from_slice(&greater);

    let next_budget = depth_budget.saturating_sub(1);
    multiselect_rec(
        &mut buf[..less_len],
        base,
        left_ranks,
        next_budget,
        out,
        ops,
    );
    multiselect_rec(
        &mut buf[less_len + 1..],
        pivot_rank,
        right_ranks,
        next_budget,
        out,
        ops,
    );
}

fn median_of_three(buf: &[TaggedElement], ops: &mut u64) -> TaggedElement {
    let a = buf[0];
    let b = buf[buf.len() / 2];
    let c = buf[buf.len() - 1];
    let (lo, hi) = if cmp_counted(&a, &b, ops) == Ordering::Less {
        (a, b)
    } else {
        (b, a)
    };
    if cmp_counted(&c, &lo, ops) == Ordering::Less {
        lo
    } else if cmp_counted(&c, &hi, ops) == Ordering::Less {
        c
    } else {
        hi
    }
}

/// Exact median-of-medians pivot: groups of five, insertion-sorted, then the
/// median of the group medians. Deterministic and linear.
fn median_of_medians(buf: &[TaggedElement], ops: &mut u64) -> TaggedElement {
    let mut current = buf.to_vec();
    while current.len() > 5 {
        let mut medians = Vec::with_capacity(current.len() / 5 + 1);
        for chunk in current.chunks_mut(5) {
            insertion_sort_counted(chunk, ops);
            medians.push(chunk[(chunk.len() - 1) / 2]);
        }
        current = medians;
    }
    insertion_sort_counted(&mut current, ops);
    current[(current.len() - 1) / 2]
}

// ---------------------------------------------------------------------------
// Regular samples
// ---------------------------------------------------------------------------

/// A regular sample: `h` elements drawn from a source set so that every
/// segment between consecutive sample items (and before the first item)
/// holds at most `gap_bound` source elements, with each sampled item closing
/// its preceding segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularSample {
    /// Strictly increasing under the element order.
    pub items: Vec<TaggedElement>,
    /// Size of the set the items were drawn from.
    pub source_size: u64,
    pub h: u64,
    /// Certified gap. `ceil(source_size / h)` for a local sample; for a
    /// merged sample the certificate refers to the union of the original
    /// local sets, not to `source_size`.
    pub gap_bound: u64,
}

/// Draw the regular sample of `set` at ranks `ceil(j * m / h)`, `j = 1..=h`,
/// so the maximum is always included. Costs one `local_multiselect` of `h`
/// ranks.
pub fn local_regular_sample(set: &[TaggedElement], h: u64, ops: &mut u64) -> Result<RegularSample> {
    let m = set.len() as u64;
    if h == 0 || h > m {
        return Err(Error::Sample {
            requested: h,
            available: m,
        });
    }
    let ranks: Vec<u64> = (1..=h).map(|j| div_ceil(j * m, h)).collect();
    let ranks = RankSet::new(ranks)?;
    debug_assert_eq!(ranks.len() as u64, h, "sample ranks must be distinct");
    let items = local_multiselect(set, &ranks, ops)?;
    Ok(RegularSample {
        items,
        source_size: m,
        h,
        gap_bound: div_ceil(m, h),
    })
}

/// Regular sample of the sorted union `h_prime` of `p` local regular
/// samples, each certified with gap at most `per_node_gap`.
///
/// The result's certificate covers the union of the original local sets:
/// any segment between consecutive picks holds at most `3 * p *
/// per_node_gap` original elements: each union item inside the segment
/// accounts for at most `2 * per_node_gap` elements of its source set, at
/// most `p` union items sit inside a segment (which needs `h` at least the
/// local sample size), and nodes with no item in the segment contribute at
/// most `per_node_gap` each.
pub fn merge_samples(
    h_prime: &[TaggedElement],
    h: u64,
    per_node_gap: u64,
    p: usize,
    ops: &mut u64,
) -> Result<RegularSample> {
    debug_assert!(
        h_prime.windows(2).all(|w| w[0] < w[1]),
        "union must be sorted"
    );
    let mut sample = local_regular_sample(h_prime, h, ops)?;
    sample.gap_bound = 3 * p as u64 * per_node_gap;
    Ok(sample)
}

// ---------------------------------------------------------------------------
// Interval counting
// ---------------------------------------------------------------------------

/// Element counts of the `h + 1` half-open intervals induced by a sample:
/// `I_0 = (-inf, y_1)`, `I_j = [y_j, y_{j+1})`, `I_h = [y_h, +inf)`.
/// A boundary element belongs to the interval it opens, so the counts of a
/// counted set always sum to its size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalCounts {
    pub boundaries: RegularSample,
    pub counts: Vec<u64>,
}

impl IntervalCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bucket every element of `set` into the intervals induced by
/// `boundaries`, via counted binary search (`O(|set| log(h+1))`).
pub fn count_in_intervals(
    set: &[TaggedElement],
    boundaries: &RegularSample,
    ops: &mut u64,
) -> IntervalCounts {
    let h = boundaries.items.len();
    let mut counts = vec![0u64; h + 1];
    for z in set {
        counts[count_le(&boundaries.items, z, ops)] += 1;
    }
    IntervalCounts {
        boundaries: boundaries.clone(),
        counts,
    }
}

// ---------------------------------------------------------------------------
// Active intervals
// ---------------------------------------------------------------------------

/// A half-open key range surviving a phase, with the ranks it must still
/// answer relative to its own elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveInterval {
    /// Which of the `h + 1` induced intervals this is.
    pub index: usize,
    /// `Included(y_j)`, or `Unbounded` for the leftmost interval.
    pub low: Bound<TaggedElement>,
    /// `Excluded(y_{j+1})`, or `Unbounded` for the rightmost interval.
    pub high: Bound<TaggedElement>,
    /// Requested ranks rebased to this interval (1-based).
    pub residual_ranks: RankSet,
    /// Element count of the interval.
    pub size: u64,
    /// Cumulative count of all elements left of the interval.
    pub preceding: u64,
}

impl ActiveInterval {
    /// Membership test with counted key comparisons.
    pub fn contains(&self, z: &TaggedElement, ops: &mut u64) -> bool {
        let above_low = match &self.low {
            Bound::Unbounded => true,
            Bound::Included(y) => cmp_counted(y, z, ops) != Ordering::Greater,
            Bound::Excluded(y) => cmp_counted(y, z, ops) == Ordering::Less,
        };
        if !above_low {
            return false;
        }
        match &self.high {
            Bound::Unbounded => true,
            Bound::Excluded(y) => cmp_counted(z, y, ops) == Ordering::Less,
            Bound::Included(y) => cmp_counted(z, y, ops) != Ordering::Greater,
        }
    }
}

/// For each target rank `k`, locate the unique interval whose cumulative
/// count bracket satisfies `c_{j-1} < k <= c_j`, and emit the deduplicated
/// intervals with their residual ranks `k - c_{j-1}`.
pub fn find_active_intervals(
    counts: &IntervalCounts,
    targets: &RankSet,
) -> Result<Vec<ActiveInterval>> {
    let total = counts.total();
    targets.check_against(total)?;

    let mut cumulative = Vec::with_capacity(counts.counts.len());
    let mut acc = 0u64;
    for &c in &counts.counts {
        acc += c;
        cumulative.push(acc);
    }

    let items = &counts.boundaries.items;
    let mut actives: Vec<ActiveInterval> = Vec::new();
    for &k in targets.ranks() {
        let j = cumulative.partition_point(|&c| c < k);
        let preceding = if j == 0 { 0 } else { cumulative[j - 1] };
        let residual = k - preceding;
        match actives.last_mut() {
            Some(last) if last.index == j => {
                // Ranks arrive in increasing order, so residuals within one
                // interval stay strictly increasing.
                let mut ranks = last.residual_ranks.ranks().to_vec();
                ranks.push(residual);
                last.residual_ranks = RankSet::new(ranks)?;
            }
            _ => {
                let low = if j == 0 {
                    Bound::Unbounded
                } else {
                    Bound::Included(items[j - 1])
                };
                let high = if j == items.len() {
                    Bound::Unbounded
                } else {
                    Bound::Excluded(items[j])
                };
                actives.push(ActiveInterval {
                    index: j,
                    low,
                    high,
                    residual_ranks: RankSet::singleton(residual)?,
                    size: counts.counts[j],
                    preceding,
                });
            }
        }
    }
    Ok(actives)
}

/// Ranks of the flattened residuals relative to the surviving union of the
/// active intervals, in the same (ascending) order as the inputs.
pub fn project_ranks(actives: &[ActiveInterval]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for interval in actives {
        for &r in interval.residual_ranks.ranks() {
            out.push(offset + r);
        }
        offset += interval.size;
    }
    out
}

/// Locate the active interval containing `z`, if any. Counted binary search
/// over the (disjoint, sorted) intervals.
pub fn locate_containing(
    actives: &[ActiveInterval],
    z: &TaggedElement,
    ops: &mut u64,
) -> Option<usize> {
    // Last interval whose low bound is <= z.
    let mut lo = 0usize;
    let mut hi = actives.len();
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let low_le = match &actives[mid].low {
            Bound::Unbounded => true,
            Bound::Included(y) => cmp_counted(y, z, ops) != Ordering::Greater,
            Bound::Excluded(y) => cmp_counted(y, z, ops) == Ordering::Less,
        };
        if low_le {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        return None;
    }
    let idx = lo - 1;
    let inside_high = match &actives[idx].high {
        Bound::Unbounded => true,
        Bound::Excluded(y) => cmp_counted(z, y, ops) == Ordering::Less,
        Bound::Included(y) => cmp_counted(z, y, ops) != Ordering::Greater,
    };
    inside_high.then_some(idx)
}

// ---------------------------------------------------------------------------
// Tower recurrences
// ---------------------------------------------------------------------------

/// Which tower recurrence `log_star` iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogStarMode {
    /// `f_0 = 1, f_i = base^(f_{i-1})`
    Power,
    /// `f_0 = base, f_i = base^(f_{i-1} - 1)`
    ShiftedPower,
}

/// Smallest `i` with `f_i >= n` for the selected recurrence, with
/// overflow-safe saturation.
pub fn log_star(mode: LogStarMode, base: u64, n: u64) -> u32 {
    assert!(base >= 2, "tower base must be at least 2");
    assert!(n >= 1);
    let n = n as u128;
    let mut f: u128 = match mode {
        LogStarMode::Power => 1,
        LogStarMode::ShiftedPower => base as u128,
    };
    let mut i = 0u32;
    while f < n {
        let exponent = match mode {
            LogStarMode::Power => f,
            LogStarMode::ShiftedPower => f - 1,
        };
        f = pow_saturating(base as u128, exponent, n);
        i += 1;
    }
    i
}

/// `base^exp`, saturating at `cap.max(base^exp)`; exits as soon as the
/// partial product reaches `cap`, so enormous exponents are safe.
pub(crate) fn pow_saturating(base: u128, exp: u128, cap: u128) -> u128 {
    debug_assert!(base >= 2);
    let mut acc: u128 = 1;
    let mut left = exp;
    while left > 0 {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
        if acc >= cap {
            return acc;
        }
        left -= 1;
    }
    acc
}

/// Exact `min { t : base^t >= x }`, the integer ceiling of `log_base(x)`.
pub fn ceil_log_base(base: u64, x: u64) -> u32 {
    assert!(base >= 2);
    assert!(x >= 1);
    let mut t = 0u32;
    let mut v: u128 = 1;
    while v < x as u128 {
        v = v.saturating_mul(base as u128);
        t += 1;
    }
    t
}

/// Exact `min { t : (4/3)^t >= x }`, i.e. the integer ceiling of
/// `log_{4/3}(x)`, by comparing `4^t >= x * 3^t` in full precision.
/// Supports `x` up to `2^26`, far beyond any simulated instance.
pub fn ceil_log_four_thirds(x: u64) -> u32 {
    assert!(x >= 1);
    assert!(x <= 1 << 26, "exact 4/3-log supported up to 2^26");
    let x = x as u128;
    let mut t = 0u32;
    let mut pow4: u128 = 1;
    let mut pow3: u128 = 1;
    while pow4 < x * pow3 {
        pow4 *= 4;
        pow3 *= 3;
        t += 1;
    }
    t
}

pub(crate) fn ceil_log2(x: u64) -> u32 {
    ceil_log_base(2, x.max(1))
}

pub(crate) fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn elems(keys: &[i64]) -> Vec<TaggedElement> {
        keys.iter()
            .enumerate()
            .map(|(i, &k)| TaggedElement::new(k, 0, i as u32))
            .collect()
    }

    fn keys(items: &[TaggedElement]) -> Vec<i64> {
        items.iter().map(|e| e.key).collect()
    }

    fn random_elems(rng: &mut SplitMix64, n: usize, key_space: u64) -> Vec<TaggedElement> {
        (0..n)
            .map(|i| TaggedElement::new(rng.next_below(key_space) as i64, 0, i as u32))
            .collect()
    }

    /// Independent oracle: full sort, then index.
    fn sort_then_index(set: &[TaggedElement], ranks: &RankSet) -> Vec<TaggedElement> {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        ranks
            .ranks()
            .iter()
            .map(|&r| sorted[(r - 1) as usize])
            .collect()
    }

    #[test]
    fn multiselect_small_example() {
        let set = elems(&[5, 3, 8, 1, 9]);
        let ranks = RankSet::new(vec![1, 3]).unwrap();
        let mut ops = 0;
        let picked = local_multiselect(&set, &ranks, &mut ops).unwrap();
        assert_eq!(keys(&picked), vec![1, 5]);
        assert!(ops > 0);
    }

    #[test]
    fn multiselect_singleton() {
        let set = elems(&[7]);
        let ranks = RankSet::singleton(1).unwrap();
        let mut ops = 0;
        let picked = local_multiselect(&set, &ranks, &mut ops).unwrap();
        assert_eq!(keys(&picked), vec![7]);
    }

    #[test]
    fn multiselect_rank_out_of_range() {
        let set = elems(&[1, 2]);
        let ranks = RankSet::new(vec![3]).unwrap();
        let mut ops = 0;
        assert!(matches!(
            local_multiselect(&set, &ranks, &mut ops),
            Err(Error::Rank { rank: 3, size: 2 })
        ));
    }

    #[test]
    fn multiselect_matches_sort_oracle_on_random_corpus() {
        let mut rng = SplitMix64::new(0x5EED);
        for _ in 0..200 {
            let n = 1 + rng.next_below(64) as usize;
            let set = random_elems(&mut rng, n, 40); // duplicates likely
            let r = 1 + rng.next_below(6) as usize;
            let ranks: Vec<u64> = (0..r).map(|_| 1 + rng.next_below(n as u64)).collect();
            let ranks = RankSet::new(ranks).unwrap();
            let mut ops = 0;
            let picked = local_multiselect(&set, &ranks, &mut ops).unwrap();
            assert_eq!(picked, sort_then_index(&set, &ranks));
        }
    }

    #[test]
    fn multiselect_survives_sorted_and_reversed_inputs() {
        // Median-of-three handles these; the depth-budget fallback guards
        // anything worse.
        let asc = elems(&(0..512).collect::<Vec<i64>>());
        let desc = elems(&(0..512).rev().collect::<Vec<i64>>());
        let ranks = RankSet::new(vec![1, 256, 512]).unwrap();
        for set in [&asc, &desc] {
            let mut ops = 0;
            let picked = local_multiselect(set, &ranks, &mut ops).unwrap();
            assert_eq!(picked, sort_then_index(set, &ranks));
            // Counted cost stays within the n log r regime.
            assert!(ops < 40 * 512, "ops = {ops}");
        }
    }

    #[test]
    fn regular_sample_of_ten_by_two() {
        let set = elems(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let mut ops = 0;
        let s = local_regular_sample(&set, 2, &mut ops).unwrap();
        assert_eq!(keys(&s.items), vec![5, 10]);
        assert_eq!(s.gap_bound, 5);
    }

    #[test]
    fn regular_sample_full_set() {
        let set = elems(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        let mut ops = 0;
        let s = local_regular_sample(&set, 10, &mut ops).unwrap();
        assert_eq!(keys(&s.items), (1..=10).collect::<Vec<i64>>());
        assert_eq!(s.gap_bound, 1);
    }

    #[test]
    fn regular_sample_rejects_oversized_h() {
        let set = elems(&[1, 2]);
        let mut ops = 0;
        assert!(matches!(
            local_regular_sample(&set, 3, &mut ops),
            Err(Error::Sample {
                requested: 3,
                available: 2
            })
        ));
    }

    /// Exact gap count: elements strictly between consecutive sample items,
    /// plus the segment before the first item; each sampled item closes its
    /// preceding segment.
    fn max_gap(source: &[TaggedElement], sample: &[TaggedElement]) -> u64 {
        let mut sorted = source.to_vec();
        sorted.sort_unstable();
        let mut max = 0u64;
        let mut prev_pos = 0usize; // elements consumed so far (closing item included)
        for y in sample {
            let pos = sorted.partition_point(|e| e < y);
            max = max.max((pos - prev_pos) as u64);
            prev_pos = pos + 1;
        }
        max = max.max((sorted.len() - prev_pos) as u64);
        max
    }

    #[test]
    fn local_sample_gap_bound_holds_exactly() {
        let mut rng = SplitMix64::new(42);
        let set = random_elems(&mut rng, 100, 1 << 32);
        let mut ops = 0;
        let s = local_regular_sample(&set, 4, &mut ops).unwrap();
        assert_eq!(s.gap_bound, 25);
        assert!(max_gap(&set, &s.items) <= 25);
    }

    #[test]
    fn merge_samples_spec_example() {
        // Two interleaved arithmetic samples, 20 items total, h = 4 picks
        // ranks 5, 10, 15, 20 of the sorted union.
        let mut union: Vec<TaggedElement> = (1..=10)
            .map(|j| TaggedElement::new(10 * j, 0, j as u32))
            .chain((0..10).map(|j| TaggedElement::new(5 + 10 * j, 1, j as u32)))
            .collect();
        union.sort_unstable();
        let mut ops = 0;
        let merged = merge_samples(&union, 4, 3, 2, &mut ops).unwrap();
        assert_eq!(keys(&merged.items), vec![25, 50, 75, 100]);
        assert_eq!(merged.gap_bound, 3 * 2 * 3);
    }

    #[test]
    fn merge_of_single_node_equals_local_sample() {
        let mut rng = SplitMix64::new(9);
        let mut set = random_elems(&mut rng, 50, 1 << 20);
        set.sort_unstable();
        let mut ops = 0;
        let local = local_regular_sample(&set, 5, &mut ops).unwrap();
        let merged = merge_samples(&set, 5, local.gap_bound, 1, &mut ops).unwrap();
        assert_eq!(merged.items, local.items);
    }

    #[test]
    fn merged_gap_certificate_holds_by_brute_force() {
        let mut rng = SplitMix64::new(1234);
        let p = 4usize;
        let h = 8u64;
        let mut union: Vec<TaggedElement> = Vec::new();
        let mut sample_union: Vec<TaggedElement> = Vec::new();
        let mut per_node_gap = 0u64;
        for v in 0..p {
            let set: Vec<TaggedElement> = (0..64)
                .map(|i| TaggedElement::new(rng.next_below(1 << 40) as i64, v as u32, i))
                .collect();
            let mut ops = 0;
            let s = local_regular_sample(&set, h, &mut ops).unwrap();
            per_node_gap = per_node_gap.max(s.gap_bound);
            sample_union.extend_from_slice(&s.items);
            union.extend_from_slice(&set);
        }
        sample_union.sort_unstable();
        let mut ops = 0;
        let merged = merge_samples(&sample_union, h, per_node_gap, p, &mut ops).unwrap();
        assert_eq!(merged.gap_bound, 3 * p as u64 * 8);
        assert!(max_gap(&union, &merged.items) <= merged.gap_bound);
    }

    #[test]
    fn interval_counts_basic() {
        let set = elems(&[1, 4, 7, 9]);
        let boundaries = RegularSample {
            items: elems(&[3, 8]),
            source_size: 4,
            h: 2,
            gap_bound: 2,
        };
        let mut ops = 0;
        let counts = count_in_intervals(&set, &boundaries, &mut ops);
        assert_eq!(counts.counts, vec![1, 2, 1]);
    }

    #[test]
    fn interval_counts_empty_set() {
        let boundaries = RegularSample {
            items: elems(&[3, 8]),
            source_size: 0,
            h: 2,
            gap_bound: 1,
        };
        let mut ops = 0;
        let counts = count_in_intervals(&[], &boundaries, &mut ops);
        assert_eq!(counts.counts, vec![0, 0, 0]);
    }

    #[test]
    fn boundary_items_count_into_the_interval_they_open() {
        let items = elems(&[2, 5, 9]);
        let boundaries = RegularSample {
            items: items.clone(),
            source_size: 3,
            h: 3,
            gap_bound: 1,
        };
        let mut ops = 0;
        let counts = count_in_intervals(&items, &boundaries, &mut ops);
        assert_eq!(counts.counts, vec![0, 1, 1, 1]);
    }

    fn counts_fixture(counts: Vec<u64>, boundary_keys: &[i64]) -> IntervalCounts {
        IntervalCounts {
            boundaries: RegularSample {
                items: elems(boundary_keys),
                source_size: counts.iter().sum(),
                h: boundary_keys.len() as u64,
                gap_bound: 0,
            },
            counts,
        }
    }

    #[test]
    fn active_intervals_two_targets_two_intervals() {
        let counts = counts_fixture(vec![3, 5, 2], &[10, 20]);
        let targets = RankSet::new(vec![4, 9]).unwrap();
        let actives = find_active_intervals(&counts, &targets).unwrap();
        assert_eq!(actives.len(), 2);
        assert_eq!(actives[0].index, 1);
        assert_eq!(actives[0].residual_ranks.ranks(), &[1]);
        assert_eq!(actives[1].index, 2);
        assert_eq!(actives[1].residual_ranks.ranks(), &[1]);
    }

    #[test]
    fn active_interval_leftmost() {
        let counts = counts_fixture(vec![3, 5, 2], &[10, 20]);
        let targets = RankSet::new(vec![3]).unwrap();
        let actives = find_active_intervals(&counts, &targets).unwrap();
        assert_eq!(actives.len(), 1);
        assert_eq!(actives[0].index, 0);
        assert!(matches!(actives[0].low, Bound::Unbounded));
        assert_eq!(actives[0].residual_ranks.ranks(), &[3]);
    }

    #[test]
    fn active_intervals_deduplicate() {
        let counts = counts_fixture(vec![3, 5, 2], &[10, 20]);
        let targets = RankSet::new(vec![4, 5]).unwrap();
        let actives = find_active_intervals(&counts, &targets).unwrap();
        assert_eq!(actives.len(), 1);
        assert_eq!(actives[0].index, 1);
        assert_eq!(actives[0].residual_ranks.ranks(), &[1, 2]);
        assert_eq!(project_ranks(&actives), vec![1, 2]);
    }

    #[test]
    fn active_interval_rank_beyond_total_is_rejected() {
        let counts = counts_fixture(vec![3, 5, 2], &[10, 20]);
        let targets = RankSet::new(vec![11]).unwrap();
        assert!(matches!(
            find_active_intervals(&counts, &targets),
            Err(Error::Rank { rank: 11, size: 10 })
        ));
    }

    #[test]
    fn project_ranks_offsets_by_interval_sizes() {
        let counts = counts_fixture(vec![4, 6, 5], &[10, 20]);
        let targets = RankSet::new(vec![2, 5, 12]).unwrap();
        let actives = find_active_intervals(&counts, &targets).unwrap();
        // Survivors are the three active intervals in order: sizes 4, 6, 5.
        assert_eq!(project_ranks(&actives), vec![2, 4 + 1, 4 + 6 + 2]);
    }

    #[test]
    fn log_star_power_base_two() {
        // f: 1, 2, 4, 16, 65536, ...
        assert_eq!(log_star(LogStarMode::Power, 2, 65536), 4);
        assert_eq!(log_star(LogStarMode::Power, 2, 1 << 20), 5);
        assert_eq!(log_star(LogStarMode::Power, 2, 1), 0);
        assert_eq!(log_star(LogStarMode::Power, 2, 2), 1);
        assert_eq!(log_star(LogStarMode::Power, 2, 16), 3);
        assert_eq!(log_star(LogStarMode::Power, 2, 17), 4);
    }

    #[test]
    fn log_star_shifted_base_nine() {
        // f_0 = 9, f_1 = 9^8 = 43046721.
        assert_eq!(log_star(LogStarMode::ShiftedPower, 9, 1 << 20), 1);
        assert_eq!(log_star(LogStarMode::ShiftedPower, 9, 9), 0);
        assert_eq!(log_star(LogStarMode::ShiftedPower, 9, 43_046_722), 2);
    }

    #[test]
    fn ceil_logs_are_exact() {
        assert_eq!(ceil_log_base(2, 1), 0);
        assert_eq!(ceil_log_base(2, 16), 4);
        assert_eq!(ceil_log_base(2, 17), 5);
        assert_eq!(ceil_log_base(9, 2), 1);
        // (4/3)^5 ≈ 4.21 < 5 <= (4/3)^6 ≈ 5.62
        assert_eq!(ceil_log_four_thirds(5), 6);
        assert_eq!(ceil_log_four_thirds(1), 0);
        assert_eq!(ceil_log_four_thirds(2), 3);
        assert_eq!(ceil_log_four_thirds(65536), 39);
    }

    #[test]
    fn multiselect_work_bound_is_stable_across_doubling() {
        // C = ops / (n * (1 + log2(r+1))) reported and required stable
        // within 2x across doubling n.
        let mut rng = SplitMix64::new(77);
        let mut last_c: Option<f64> = None;
        for n in [1024usize, 2048, 4096] {
            let set = random_elems(&mut rng, n, 1 << 48);
            let ranks: Vec<u64> = (0..15).map(|_| 1 + rng.next_below(n as u64)).collect();
            let ranks = RankSet::new(ranks).unwrap();
            let r = ranks.len() as f64;
            let mut ops = 0;
            local_multiselect(&set, &ranks, &mut ops).unwrap();
            let c = ops as f64 / (n as f64 * (1.0 + (r + 1.0).log2()));
            println!("multiselect work constant at n={n}: C = {c:.3}");
            assert!(c < 16.0, "C = {c}");
            if let Some(prev) = last_c {
                assert!(c / prev < 2.0 && prev / c < 2.0, "unstable: {prev} vs {c}");
            }
            last_c = Some(c);
        }
    }

    #[test]
    fn sort_counted_sorts_and_counts() {
        let mut rng = SplitMix64::new(3);
        let mut items = random_elems(&mut rng, 257, 64);
        let mut expected = items.clone();
        expected.sort_unstable();
        let mut ops = 0;
        sort_counted(&mut items, &mut ops);
        assert_eq!(items, expected);
        assert!(ops > 0 && ops < 257 * 9 + 257);
    }
}
