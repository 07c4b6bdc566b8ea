//! The distributed selection algorithms, written as straight-line round
//! programs over the clique runtime:
//!
//! * [`mom_select`]: parallel median of medians: one local median per node
//!   per phase, halving-style shrink, `O(log n)` phases.
//! * [`rs_select`]: selection by regular sampling with tower-growing
//!   sample sizes; the inefficiency exponent `phi` trades per-node work for
//!   fewer phases (sampling base `2^phi`).
//! * [`select_optimal`]: median-of-medians preprocessing for
//!   `ceil(log_{4/3} log* n)` phases, then regular sampling against the
//!   original work budget; per-node work stays `O(n/p)`.
//! * [`multiselect`]: multiple selection: up to `|K|` active intervals per
//!   phase, sampling base `|K| + 1`, preprocessing with a
//!   `4 (|K|+1)^2`-point sample; delegates to a full sort when the rank set
//!   rivals a node's share.
//!
//! Every phase is audited: the surviving multiset, interval counts, and
//! rank projections are recorded so the replay checks
//! ([`mom_phase_shrink_check`], [`rank_of_boundary_consistency`]) can
//! validate a finished run against the shrink and rank-bracket guarantees.

use crate::element::TaggedElement;
use crate::runtime::{CliqueState, Word};
use crate::sampling::{
    ceil_log2, ceil_log_base, ceil_log_four_thirds, count_in_intervals, div_ceil,
    find_active_intervals, local_multiselect, local_regular_sample, locate_containing, log_star,
    pow_saturating, project_ranks, IntervalCounts, LogStarMode, RankSet, RegularSample,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Phase records
// ---------------------------------------------------------------------------

/// Scheduled parameters of one phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub phase_index: usize,
    /// `|S_i|` at phase start.
    pub set_size: u64,
    /// Scheduled global sample size (0 for a median-of-medians phase).
    pub sample_size: u64,
    /// Sampling base (0 for a median-of-medians phase).
    pub base: u64,
}

/// Where a phase sits in its algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Preprocess,
    Main,
}

/// How a phase shrinks the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMechanism {
    /// Filter against the median of local medians.
    MedianHalving,
    /// Filter against the active intervals of a regular sample.
    RegularSampling,
}

/// Everything recorded about one executed phase. `set_before` is a sorted
/// snapshot of the surviving multiset at phase start, kept for the replay
/// checks (it is audit data, not part of the simulated protocol).
#[derive(Debug, Clone)]
pub struct PhaseAudit {
    pub kind: PhaseKind,
    pub mechanism: PhaseMechanism,
    pub schedule: PhaseSchedule,
    /// Sample items (median-of-medians phases record the single pivot).
    pub boundaries: Vec<TaggedElement>,
    /// Global interval counts (for halving phases: elements `<=` pivot,
    /// elements `>` pivot).
    pub counts: Vec<u64>,
    /// Target ranks before and after the phase, aligned.
    pub ranks_in: Vec<u64>,
    pub ranks_out: Vec<u64>,
    pub set_before: Vec<TaggedElement>,
    pub survivors: u64,
    pub rounds: u64,
    pub max_ops_delta: u64,
}

/// Output of one algorithm run.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// `(requested rank, element)` pairs, ascending by rank.
    pub answers: Vec<(u64, TaggedElement)>,
    pub metrics: crate::runtime::CliqueMetrics,
    pub phase_log: Vec<PhaseAudit>,
    /// Sorted survivors after the last phase (the set the finish step
    /// indexed into).
    pub final_set: Vec<TaggedElement>,
}

impl SelectionResult {
    pub fn main_phases(&self) -> usize {
        self.phase_log
            .iter()
            .filter(|a| a.kind == PhaseKind::Main)
            .count()
    }

    pub fn preprocess_phases(&self) -> usize {
        self.phase_log
            .iter()
            .filter(|a| a.kind == PhaseKind::Preprocess)
            .count()
    }
}

/// A failed replay check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: String,
    pub phase: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "invariant `{}` failed at phase {}: {}",
            self.invariant, self.phase, self.detail
        )
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Target ranks relative to the current surviving set, aligned with the
/// ranks originally requested.
struct RankTracking {
    current: Vec<u64>,
    original: Vec<u64>,
}

impl RankTracking {
    fn new(targets: &RankSet) -> Self {
        Self {
            current: targets.ranks().to_vec(),
            original: targets.ranks().to_vec(),
        }
    }
}

fn snapshot_sorted(st: &CliqueState) -> Vec<TaggedElement> {
    let mut all: Vec<TaggedElement> = st
        .nodes
        .iter()
        .flat_map(|n| n.local_set.iter().copied())
        .collect();
    all.sort_unstable();
    all
}

fn invariant_err(st: &CliqueState, invariant: &str, detail: String) -> Error {
    Error::Invariant {
        invariant: format!("{invariant}: {detail}"),
        phase: st.phase().to_string(),
    }
}

/// Sample size for phase `i` of a sampling main loop:
/// `min(|S_i|, h_cap, max(2, base^(n_0 / |S_i|)))`, overflow-safe. `n_0` is
/// the budget the work analysis is charged against (the original input
/// size), `h_cap = B * p * (p-1)` keeps one phase's sample exchanges within
/// a bounded number of rounds.
fn schedule_sample_size(n0: u64, set_size: u64, base: u64, h_cap: u64) -> u64 {
    debug_assert!(set_size >= 1);
    let g = n0 / set_size;
    let cap = u128::from(h_cap.max(2));
    let raw = pow_saturating(u128::from(base), u128::from(g), cap);
    let raw = u64::try_from(raw).unwrap_or(u64::MAX);
    set_size.min(h_cap).min(raw.max(2))
}

// ---------------------------------------------------------------------------
// Redistribution
// ---------------------------------------------------------------------------

/// Rebalance the surviving elements so all loads differ by at most one.
///
/// Round 1: every node broadcasts its local count; prefix sums are then
/// known everywhere. Round 2: node `v` sends its `i`-th element to node
/// `(y_v + i) mod p`, where `y_v` is the count held by lower ids, batching
/// into sub-rounds when a link needs more than `B` words. Returns the
/// rounds consumed (exactly 2 whenever the bandwidth covers the per-link
/// demand).
pub fn redistribute(st: &mut CliqueState) -> Result<u64> {
    let p = st.config.p;
    let rounds_before = st.rounds_total();
    let total_before = st.total_elements();

    let counts: Vec<u64> = st.node_sizes().iter().map(|&s| s as u64).collect();
    let words: Vec<Vec<Word>> = counts.iter().map(|&c| vec![Word::Counter(c)]).collect();
    st.broadcast_words(words)?;

    let mut prefix = vec![0u64; p];
    for v in 1..p {
        prefix[v] = prefix[v - 1] + counts[v - 1];
    }

    let mut outgoing: Vec<Vec<(usize, Word)>> = vec![Vec::new(); p];
    let mut keep: Vec<Vec<TaggedElement>> = vec![Vec::new(); p];
    for (v, node) in st.nodes.iter_mut().enumerate() {
        let set = std::mem::take(&mut node.local_set);
        for (i, e) in set.into_iter().enumerate() {
            let dst = ((prefix[v] + i as u64) % p as u64) as usize;
            if dst == v {
                keep[v].push(e);
            } else {
                outgoing[v].push((dst, Word::Element(e)));
            }
        }
    }
    let data_rounds = st.exchange_batched(outgoing)?;
    if data_rounds == 0 {
        // The placement round happens even when every element stays put.
        st.exchange(vec![Vec::new(); p])?;
    }

    for (node, kept) in st.nodes.iter_mut().zip(keep) {
        let mut set = kept;
        for queue in &mut node.inbox {
            while let Some(w) = queue.pop_front() {
                match w {
                    Word::Element(e) => set.push(e),
                    other => panic!("unexpected word during redistribution: {other:?}"),
                }
            }
        }
        node.local_set = set;
    }

    let sizes = st.node_sizes();
    let min = *sizes.iter().min().expect("p >= 2");
    let max = *sizes.iter().max().expect("p >= 2");
    if max - min > 1 {
        return Err(invariant_err(
            st,
            "redistribute-balance",
            format!("loads {sizes:?} differ by more than one"),
        ));
    }
    if st.total_elements() != total_before {
        return Err(invariant_err(
            st,
            "element-conservation",
            format!("{} elements in, {} out", total_before, st.total_elements()),
        ));
    }
    Ok(st.rounds_total() - rounds_before)
}

// ---------------------------------------------------------------------------
// Median-of-medians phase
// ---------------------------------------------------------------------------

fn mom_phase(
    st: &mut CliqueState,
    k: &mut u64,
    phase_index: usize,
    kind: PhaseKind,
) -> Result<PhaseAudit> {
    let p = st.config.p;
    let rounds_before = st.rounds_total();
    let ops_before = st.max_ops();
    let set_size = st.total_elements();
    let set_before = snapshot_sorted(st);
    let k_in = *k;

    // Each non-empty node picks its lower median and broadcasts it.
    let mut words: Vec<Vec<Word>> = vec![Vec::new(); p];
    for (v, node) in st.nodes.iter_mut().enumerate() {
        let m = node.local_set.len() as u64;
        if m == 0 {
            continue;
        }
        let ranks = RankSet::singleton(div_ceil(m, 2))?;
        let med = local_multiselect(&node.local_set, &ranks, &mut node.ops)?[0];
        words[v] = vec![Word::Element(med)];
    }
    let union = st.broadcast_words(words)?;
    let medians: Vec<TaggedElement> = union
        .iter()
        .map(|(_, w)| match w {
            Word::Element(e) => *e,
            other => panic!("expected a median element, got {other:?}"),
        })
        .collect();

    // Every node computes the same median of the received medians; the
    // simulator evaluates it once and charges everyone the counted cost.
    let mut shared = 0u64;
    let ranks = RankSet::singleton(div_ceil(medians.len() as u64, 2))?;
    let pivot = local_multiselect(&medians, &ranks, &mut shared)?[0];
    st.charge_all(shared);

    // Every node counts its elements strictly below the pivot and
    // broadcasts the count; the pivot is itself an element of the set, so
    // its rank is the total strictly-below count plus one.
    let mut count_words: Vec<Vec<Word>> = vec![Vec::new(); p];
    for (v, node) in st.nodes.iter_mut().enumerate() {
        let mut below = 0u64;
        let mut ops = 0u64;
        for z in &node.local_set {
            ops += 1;
            if *z < pivot {
                below += 1;
            }
        }
        node.ops += ops;
        count_words[v] = vec![Word::Counter(below)];
    }
    let union = st.broadcast_words(count_words)?;
    let below_total: u64 = union
        .iter()
        .map(|(_, w)| match w {
            Word::Counter(c) => *c,
            other => panic!("expected a count, got {other:?}"),
        })
        .sum();
    let pivot_rank = below_total + 1;

    // Keep the half that still contains the target rank.
    let keep_upper = *k > pivot_rank;
    let mut survivors = 0u64;
    for v in 0..p {
        let node = &mut st.nodes[v];
        let mut ops = 0u64;
        let mut kept = Vec::with_capacity(node.local_set.len());
        for &z in node.local_set.iter() {
            ops += 1;
            let le_pivot = z <= pivot;
            if keep_upper {
                if !le_pivot {
                    kept.push(z);
                }
            } else if le_pivot {
                kept.push(z);
            }
        }
        node.ops += ops;
        survivors += kept.len() as u64;
        node.local_set = kept;
    }
    if keep_upper {
        *k -= pivot_rank;
    }
    let expected = if keep_upper {
        set_size - pivot_rank
    } else {
        pivot_rank
    };
    if survivors != expected {
        return Err(invariant_err(
            st,
            "mom-filter-conservation",
            format!("expected {expected} survivors, kept {survivors}"),
        ));
    }

    redistribute(st)?;

    Ok(PhaseAudit {
        kind,
        mechanism: PhaseMechanism::MedianHalving,
        schedule: PhaseSchedule {
            phase_index,
            set_size,
            sample_size: 0,
            base: 0,
        },
        boundaries: vec![pivot],
        counts: vec![pivot_rank, set_size - pivot_rank],
        ranks_in: vec![k_in],
        ranks_out: vec![*k],
        set_before,
        survivors,
        rounds: st.rounds_total() - rounds_before,
        max_ops_delta: st.max_ops() - ops_before,
    })
}

// ---------------------------------------------------------------------------
// Regular-sampling phase
// ---------------------------------------------------------------------------

fn sampling_phase(
    st: &mut CliqueState,
    tracking: &mut RankTracking,
    h_target: u64,
    base: u64,
    phase_index: usize,
    kind: PhaseKind,
) -> Result<PhaseAudit> {
    let p = st.config.p;
    let rounds_before = st.rounds_total();
    let ops_before = st.max_ops();
    let set_size = st.total_elements();
    let set_before = snapshot_sorted(st);
    let ranks_in = tracking.current.clone();

    // 1. Local regular samples.
    let mut per_node_gap = 1u64;
    let mut sample_items: Vec<Vec<TaggedElement>> = vec![Vec::new(); p];
    for (v, node) in st.nodes.iter_mut().enumerate() {
        let m = node.local_set.len() as u64;
        if m == 0 {
            continue;
        }
        let h_local = h_target.min(m);
        let s = local_regular_sample(&node.local_set, h_local, &mut node.ops)?;
        per_node_gap = per_node_gap.max(s.gap_bound);
        sample_items[v] = s.items;
    }

    // 2. Sort the sample union across the clique.
    let blocks = st.distributed_sort(sample_items)?;
    let union_size: u64 = blocks.iter().map(|b| b.len() as u64).sum();

    // 3. Regular sample of the sorted union. The block layout is global
    //    knowledge (it is a function of the announced sizes), so the holder
    //    of each target rank extracts it and broadcasts it; the broadcast
    //    arrives in block order, i.e. already sorted.
    let h_glob = h_target.min(union_size);
    let target_ranks: Vec<u64> = (1..=h_glob)
        .map(|j| div_ceil(j * union_size, h_glob))
        .collect();
    let mut to_broadcast: Vec<Vec<Word>> = vec![Vec::new(); p];
    {
        let mut start = 0u64;
        let mut next = target_ranks.iter().peekable();
        for v in 0..p {
            let len = blocks[v].len() as u64;
            while let Some(&&r) = next.peek() {
                if r <= start + len {
                    to_broadcast[v].push(Word::Element(blocks[v][(r - start - 1) as usize]));
                    st.nodes[v].ops += 1;
                    next.next();
                } else {
                    break;
                }
            }
            start += len;
        }
    }
    let union = st.broadcast_words(to_broadcast)?;
    let boundary_items: Vec<TaggedElement> = union
        .iter()
        .map(|(_, w)| match w {
            Word::Element(e) => *e,
            other => panic!("expected a sample element, got {other:?}"),
        })
        .collect();
    let sample = RegularSample {
        items: boundary_items,
        source_size: set_size,
        h: h_glob,
        gap_bound: 3 * p as u64 * per_node_gap,
    };
    #[cfg(debug_assertions)]
    {
        let sorted_union: Vec<TaggedElement> = blocks.iter().flatten().copied().collect();
        let mut scratch = 0u64;
        let merged =
            crate::sampling::merge_samples(&sorted_union, h_glob, per_node_gap, p, &mut scratch)
                .expect("merged sample");
        debug_assert_eq!(merged.items, sample.items);
    }

    // 4. Per-node interval counts against the sample.
    let per_node_counts: Vec<Vec<u64>> = (0..p)
        .map(|v| {
            let node = &mut st.nodes[v];
            count_in_intervals(&node.local_set, &sample, &mut node.ops).counts
        })
        .collect();

    // 5. Interval j is aggregated at node (j mod p): each node sends its
    //    counts for that node's intervals in increasing-j order, so the
    //    aggregator pairs words with intervals positionally.
    let intervals = h_glob as usize + 1;
    let mut outgoing: Vec<Vec<(usize, Word)>> = vec![Vec::new(); p];
    for (v, counts) in per_node_counts.iter().enumerate() {
        for (j, &c) in counts.iter().enumerate() {
            let dst = j % p;
            if dst != v {
                outgoing[v].push((dst, Word::Counter(c)));
            }
        }
    }
    st.exchange_batched(outgoing)?;
    let mut sums: Vec<Vec<u64>> = Vec::with_capacity(p);
    for (a, node) in st.nodes.iter_mut().enumerate() {
        let owned: Vec<usize> = (a..intervals).step_by(p).collect();
        let mut acc: Vec<u64> = owned.iter().map(|&j| per_node_counts[a][j]).collect();
        for (src, queue) in node.inbox.iter_mut().enumerate() {
            if src == a {
                continue;
            }
            let mut t = 0usize;
            while let Some(w) = queue.pop_front() {
                match w {
                    Word::Counter(c) => {
                        acc[t] += c;
                        t += 1;
                    }
                    other => panic!("expected an interval count, got {other:?}"),
                }
            }
            debug_assert_eq!(t, owned.len());
        }
        sums.push(acc);
    }

    // 6. Aggregators broadcast their sums; everyone reassembles the global
    //    interval counts (sum t from aggregator a is interval t*p + a).
    let words: Vec<Vec<Word>> = sums
        .iter()
        .map(|s| s.iter().map(|&c| Word::Counter(c)).collect())
        .collect();
    let union = st.broadcast_words(words)?;
    let mut global_counts = vec![0u64; intervals];
    let mut position = vec![0usize; p];
    for (src, w) in union {
        let c = match w {
            Word::Counter(c) => c,
            other => panic!("expected an aggregated count, got {other:?}"),
        };
        global_counts[position[src] * p + src] = c;
        position[src] += 1;
    }
    let grand_total: u64 = global_counts.iter().sum();
    if grand_total != set_size {
        return Err(invariant_err(
            st,
            "interval-count-conservation",
            format!("counts sum to {grand_total}, set holds {set_size}"),
        ));
    }

    // 7. Active intervals and rank projection, identical at every node.
    let counts = IntervalCounts {
        boundaries: sample.clone(),
        counts: global_counts.clone(),
    };
    let targets = RankSet::new(tracking.current.clone())?;
    let actives = find_active_intervals(&counts, &targets)?;
    st.charge_all(targets.len() as u64 * u64::from(ceil_log2(h_glob + 2)));
    tracking.current = project_ranks(&actives);
    let ranks_out = tracking.current.clone();

    // 8. Filter every local set to the union of the active intervals.
    let mut survivors = 0u64;
    for v in 0..p {
        let node = &mut st.nodes[v];
        let mut ops = 0u64;
        let mut kept = Vec::new();
        for &z in node.local_set.iter() {
            if locate_containing(&actives, &z, &mut ops).is_some() {
                kept.push(z);
            }
        }
        node.ops += ops;
        survivors += kept.len() as u64;
        node.local_set = kept;
    }
    let expected: u64 = actives.iter().map(|a| a.size).sum();
    if survivors != expected {
        return Err(invariant_err(
            st,
            "active-filter-conservation",
            format!("expected {expected} survivors, kept {survivors}"),
        ));
    }

    // 9. Rebalance for the next phase.
    redistribute(st)?;

    Ok(PhaseAudit {
        kind,
        mechanism: PhaseMechanism::RegularSampling,
        schedule: PhaseSchedule {
            phase_index,
            set_size,
            sample_size: h_target,
            base,
        },
        boundaries: sample.items,
        counts: global_counts,
        ranks_in,
        ranks_out,
        set_before,
        survivors,
        rounds: st.rounds_total() - rounds_before,
        max_ops_delta: st.max_ops() - ops_before,
    })
}

/// Main sampling loop shared by `rs_select`, `select_optimal`, and
/// `multiselect`: iterate while the set is larger than both
/// `n_0 / log2(n_0)` and the cheap-finish cut `B * p * (p-1)` (below which
/// the final sort answers directly).
fn run_sampling_loop(
    st: &mut CliqueState,
    tracking: &mut RankTracking,
    n0: u64,
    base: u64,
    log: &mut Vec<PhaseAudit>,
    first_index: usize,
) -> Result<()> {
    let p = st.config.p as u64;
    let cut = p * (p - 1) * st.config.bandwidth;
    let h_cap = cut;
    let threshold = n0 as f64 / (n0 as f64).log2();
    st.set_phase("main");
    let mut idx = first_index;
    loop {
        let s = st.total_elements();
        if s <= cut || (s as f64) <= threshold {
            break;
        }
        let h = schedule_sample_size(n0, s, base, h_cap);
        log.push(sampling_phase(st, tracking, h, base, idx, PhaseKind::Main)?);
        idx += 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Finish steps
// ---------------------------------------------------------------------------

/// Answer pairs plus the sorted survivor set they were indexed from.
type FinishOutcome = (Vec<(u64, TaggedElement)>, Vec<TaggedElement>);

/// Sort the survivors across the clique and index the target ranks: the
/// holder of each rank sends `(rank, element)` to node 0, which then knows
/// every answer.
fn sort_and_answer(st: &mut CliqueState, tracking: &RankTracking) -> Result<FinishOutcome> {
    let p = st.config.p;
    let per_node: Vec<Vec<TaggedElement>> = st
        .nodes
        .iter_mut()
        .map(|n| std::mem::take(&mut n.local_set))
        .collect();
    let blocks = st.distributed_sort(per_node)?;
    for (v, block) in blocks.iter().enumerate() {
        st.nodes[v].local_set = block.clone();
    }

    let sizes: Vec<u64> = blocks.iter().map(|b| b.len() as u64).collect();
    let mut answers: Vec<(u64, TaggedElement)> = Vec::new();
    let mut outgoing: Vec<Vec<(usize, Word)>> = vec![Vec::new(); p];
    let mut start = 0u64;
    let mut holder = 0usize;
    for (i, &cur) in tracking.current.iter().enumerate() {
        let orig = tracking.original[i];
        while cur > start + sizes[holder] {
            start += sizes[holder];
            holder += 1;
        }
        let elem = blocks[holder][(cur - start - 1) as usize];
        st.nodes[holder].ops += 1;
        if holder == 0 {
            answers.push((orig, elem));
        } else {
            outgoing[holder].push((0, Word::Rank(orig)));
            outgoing[holder].push((0, Word::Element(elem)));
        }
    }
    st.exchange_batched(outgoing)?;
    for src in 1..p {
        while let Some(w) = st.nodes[0].inbox[src].pop_front() {
            let rank = match w {
                Word::Rank(r) => r,
                other => panic!("expected an answer rank, got {other:?}"),
            };
            let elem = match st.nodes[0].inbox[src].pop_front() {
                Some(Word::Element(e)) => e,
                other => panic!("expected an answer element, got {other:?}"),
            };
            answers.push((rank, elem));
        }
    }
    answers.sort_unstable_by_key(|&(r, _)| r);
    let final_sorted: Vec<TaggedElement> = blocks.into_iter().flatten().collect();
    Ok((answers, final_sorted))
}

/// Gather the (at most `p`) survivors at node 0 and select locally.
fn gather_and_answer(st: &mut CliqueState, k_cur: u64, k_orig: u64) -> Result<FinishOutcome> {
    let p = st.config.p;
    let outgoing: Vec<Vec<(usize, Word)>> = st
        .nodes
        .iter()
        .map(|node| {
            if node.id == 0 {
                Vec::new()
            } else {
                node.local_set
                    .iter()
                    .map(|&e| (0, Word::Element(e)))
                    .collect()
            }
        })
        .collect();
    st.exchange_batched(outgoing)?;
    let mut pool: Vec<TaggedElement> = st.nodes[0].local_set.clone();
    for src in 1..p {
        while let Some(w) = st.nodes[0].inbox[src].pop_front() {
            match w {
                Word::Element(e) => pool.push(e),
                other => panic!("expected a survivor element, got {other:?}"),
            }
        }
    }
    let ranks = RankSet::singleton(k_cur)?;
    let node0 = &mut st.nodes[0];
    let answer = local_multiselect(&pool, &ranks, &mut node0.ops)?[0];
    pool.sort_unstable();
    Ok((vec![(k_orig, answer)], pool))
}

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

fn check_rank(k: u64, n: u64) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Rank { rank: k, size: n });
    }
    Ok(())
}

/// Parallel median of medians: per phase, broadcast local medians, filter
/// against the median of medians, rebalance; loop while more than `p`
/// elements survive, then gather at node 0 and select locally.
pub fn mom_select(st: &mut CliqueState, k: u64) -> Result<SelectionResult> {
    let n = st.total_elements();
    check_rank(k, n)?;
    let p = st.config.p as u64;
    let mut k_cur = k;
    let mut log: Vec<PhaseAudit> = Vec::new();
    st.set_phase("mom");
    let mut idx = 0usize;
    while st.total_elements() > p {
        log.push(mom_phase(st, &mut k_cur, idx, PhaseKind::Main)?);
        idx += 1;
    }
    st.set_phase("finish");
    let (answers, final_set) = gather_and_answer(st, k_cur, k)?;
    Ok(SelectionResult {
        answers,
        metrics: st.metrics_snapshot(),
        phase_log: log,
        final_set,
    })
}

/// Selection by regular sampling. `phi >= 1` is the inefficiency exponent:
/// sampling base `2^phi` buys fewer phases for `phi` times the per-node
/// work budget.
pub fn rs_select(st: &mut CliqueState, k: u64, phi: u32) -> Result<SelectionResult> {
    if phi < 1 {
        return Err(Error::Config("phi must be at least 1".into()));
    }
    if phi > 48 {
        return Err(Error::Config("phi larger than 48 is not meaningful".into()));
    }
    let n = st.total_elements();
    check_rank(k, n)?;
    let base = 1u64 << phi;
    let targets = RankSet::singleton(k)?;
    let mut tracking = RankTracking::new(&targets);
    let mut log = Vec::new();
    run_sampling_loop(st, &mut tracking, n, base, &mut log, 0)?;
    st.set_phase("finish");
    let (answers, final_set) = sort_and_answer(st, &tracking)?;
    Ok(SelectionResult {
        answers,
        metrics: st.metrics_snapshot(),
        phase_log: log,
        final_set,
    })
}

/// Round-optimal selection: exactly `ceil(log_{4/3} max(2, log* n))`
/// median-of-medians phases shrink the set to `O(n / log* n)`, then the
/// regular-sampling loop runs against the original budget `n_0 = n`, so
/// per-phase work stays `O(n/p)` and the whole run is `O(log* n)` phases.
pub fn select_optimal(st: &mut CliqueState, k: u64) -> Result<SelectionResult> {
    let n = st.total_elements();
    check_rank(k, n)?;
    let p = st.config.p as u64;
    let targets = RankSet::singleton(k)?;
    let mut tracking = RankTracking::new(&targets);
    let mut log = Vec::new();
    if n > p {
        let l = log_star(LogStarMode::Power, 2, n);
        let t = ceil_log_four_thirds(u64::from(l.max(2)));
        st.set_phase("preprocess");
        let mut k_cur = tracking.current[0];
        for i in 0..t {
            log.push(mom_phase(
                st,
                &mut k_cur,
                i as usize,
                PhaseKind::Preprocess,
            )?);
        }
        tracking.current[0] = k_cur;
        run_sampling_loop(st, &mut tracking, n, 2, &mut log, t as usize)?;
    }
    st.set_phase("finish");
    let (answers, final_set) = sort_and_answer(st, &tracking)?;
    Ok(SelectionResult {
        answers,
        metrics: st.metrics_snapshot(),
        phase_log: log,
        final_set,
    })
}

/// Multiple selection by regular sampling: up to `|K|` active intervals per
/// phase and sampling base `|K| + 1`. Preprocessing shrinks the set by a
/// factor of about `|K| + 1` per phase using a `4 (|K|+1)^2`-point sample.
/// When `|K| >= n/p` the whole instance is simply sorted and indexed.
pub fn multiselect(st: &mut CliqueState, targets: &RankSet) -> Result<SelectionResult> {
    let n = st.total_elements();
    targets.check_against(n)?;
    let p = st.config.p as u64;
    let r = targets.len() as u64;
    let mut tracking = RankTracking::new(targets);
    let mut log = Vec::new();
    if r < n / p {
        let base = r + 1;
        let l = log_star(LogStarMode::ShiftedPower, base, n);
        let t = ceil_log_base(base, u64::from(l.max(2)));
        let h_pre = 4u64.saturating_mul((r + 1).saturating_mul(r + 1));
        st.set_phase("preprocess");
        for i in 0..t {
            let s = st.total_elements();
            let h = h_pre.min(s);
            log.push(sampling_phase(
                st,
                &mut tracking,
                h,
                base,
                i as usize,
                PhaseKind::Preprocess,
            )?);
        }
        run_sampling_loop(st, &mut tracking, n, base, &mut log, t as usize)?;
    }
    st.set_phase("finish");
    let (answers, final_set) = sort_and_answer(st, &tracking)?;
    Ok(SelectionResult {
        answers,
        metrics: st.metrics_snapshot(),
        phase_log: log,
        final_set,
    })
}

// ---------------------------------------------------------------------------
// Replay checks
// ---------------------------------------------------------------------------

/// Check the halving guarantee `|S_{i+1}| <= 3 |S_i| / 4 + p` on every
/// median-of-medians phase of a finished run (exact integer form
/// `4 |S_{i+1}| <= 3 |S_i| + 4p`).
pub fn mom_phase_shrink_check(
    result: &SelectionResult,
    p: usize,
) -> std::result::Result<(), Violation> {
    for audit in &result.phase_log {
        if audit.mechanism != PhaseMechanism::MedianHalving {
            continue;
        }
        if 4 * audit.survivors > 3 * audit.schedule.set_size + 4 * p as u64 {
            return Err(Violation {
                invariant: "mom-shrink".into(),
                phase: audit.schedule.phase_index.to_string(),
                detail: format!(
                    "{} -> {} survivors exceeds 3/4 bound (+{p})",
                    audit.schedule.set_size, audit.survivors
                ),
            });
        }
    }
    Ok(())
}

/// Replay a finished run's phase log and verify, for every phase and every
/// target rank: the rank fell strictly inside the cumulative-count bracket
/// of its active interval, the projected residual matches what the run
/// recorded, and the rank maps to the same element before and after the
/// phase.
pub fn rank_of_boundary_consistency(
    result: &SelectionResult,
) -> std::result::Result<(), Violation> {
    let log = &result.phase_log;
    for (i, audit) in log.iter().enumerate() {
        let phase = audit.schedule.phase_index.to_string();
        let next_set: &[TaggedElement] = if i + 1 < log.len() {
            &log[i + 1].set_before
        } else {
            &result.final_set
        };
        if audit.ranks_in.len() != audit.ranks_out.len() {
            return Err(Violation {
                invariant: "rank-projection".into(),
                phase,
                detail: "rank lists changed length".into(),
            });
        }

        let mut cumulative: Vec<u64> = Vec::with_capacity(audit.counts.len());
        let mut acc = 0u64;
        for &c in &audit.counts {
            acc += c;
            cumulative.push(acc);
        }

        // Recompute each rank's interval and projected residual from the
        // recorded counts alone.
        let mut seen: Vec<(usize, u64)> = Vec::new(); // (interval, size) in order
        for (&k_in, &k_out) in audit.ranks_in.iter().zip(&audit.ranks_out) {
            let j = cumulative.partition_point(|&c| c < k_in);
            if j >= audit.counts.len() {
                return Err(Violation {
                    invariant: "rank-bracket".into(),
                    phase,
                    detail: format!("rank {k_in} beyond total count {acc}"),
                });
            }
            let before = if j == 0 { 0 } else { cumulative[j - 1] };
            if !(before < k_in && k_in <= cumulative[j]) {
                return Err(Violation {
                    invariant: "rank-bracket".into(),
                    phase,
                    detail: format!("rank {k_in} outside bracket of interval {j}"),
                });
            }
            if seen.last().map(|&(last, _)| last) != Some(j) {
                seen.push((j, audit.counts[j]));
            }
            let offset: u64 = seen[..seen.len() - 1].iter().map(|&(_, s)| s).sum();
            let expected = offset + (k_in - before);
            if expected != k_out {
                return Err(Violation {
                    invariant: "rank-projection".into(),
                    phase,
                    detail: format!("rank {k_in}: recorded {k_out}, recomputed {expected}"),
                });
            }

            // The element the rank named must survive as the same element.
            let elem_in = audit.set_before.get(k_in as usize - 1);
            let elem_out = next_set.get(k_out as usize - 1);
            match (elem_in, elem_out) {
                (Some(a), Some(b)) if a == b => {}
                _ => {
                    return Err(Violation {
                        invariant: "element-chain".into(),
                        phase,
                        detail: format!("rank {k_in} -> {k_out} does not map to the same element"),
                    });
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
