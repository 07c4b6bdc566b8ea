//! Synchronous round-based simulator of a congested clique: `p` fully
//! connected nodes exchanging bounded-size words per round, with exact
//! accounting of rounds, per-link words, and per-node local operations.
//!
//! The runtime is single-threaded and deterministic. Node-local steps are
//! driven in id order by the algorithm layer; [`CliqueState::exchange`] is
//! the synchronous barrier between rounds. Helpers that need more than one
//! word per link per round batch themselves into sub-rounds instead of
//! oversubscribing a link, so in strict mode a bandwidth violation can only
//! come from a raw `exchange` call that genuinely oversends.

use std::collections::VecDeque;

use crate::element::TaggedElement;
use crate::sampling::{ceil_log2, sort_counted};
use crate::{Error, Result};

/// Control payloads. The algorithms in this crate signal everything through
/// element and counter words; control words exist for protocols (and tests)
/// that need an explicit marker on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlWord {
    Done,
}

/// The unit of link bandwidth, modelling an `O(log n)`-bit message:
/// a single element, counter, rank, or control marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Word {
    Element(TaggedElement),
    Counter(u64),
    Rank(u64),
    Control(ControlWord),
}

/// How the distributed sort primitive is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMode {
    /// The sort is a black-box primitive charged at a fixed number of
    /// rounds (`c_sort`).
    Charged,
    /// Honest fallback: broadcast every item, sort locally, keep the own
    /// block; rounds and words are counted for real.
    Explicit,
}

impl SortMode {
    pub fn label(&self) -> &'static str {
        match self {
            SortMode::Charged => "charged",
            SortMode::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliqueConfig {
    /// Node count.
    pub p: usize,
    /// Words per directed link per round.
    pub bandwidth: u64,
    pub sort_mode: SortMode,
    /// Rounds charged per distributed sort in charged mode.
    pub c_sort: u64,
    /// Fail with [`Error::BandwidthViolation`] when a round oversubscribes
    /// a link; otherwise the excess is only recorded in the metrics.
    pub strict_bandwidth: bool,
}

impl CliqueConfig {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            bandwidth: 1,
            sort_mode: SortMode::Charged,
            c_sort: 3,
            strict_bandwidth: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::Config(format!(
                "need at least 2 nodes, got {}",
                self.p
            )));
        }
        if self.bandwidth < 1 {
            return Err(Error::Config("bandwidth must be at least 1 word".into()));
        }
        if self.c_sort < 1 {
            return Err(Error::Config("charged sort cost must be at least 1".into()));
        }
        Ok(())
    }
}

/// One clique node: its share of the input set, per-source inbox queues,
/// and its operation counter (one unit per key comparison and per word sent
/// or received; monotonically non-decreasing).
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub local_set: Vec<TaggedElement>,
    pub inbox: Vec<VecDeque<Word>>,
    pub ops: u64,
}

/// Snapshot of the run-wide accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CliqueMetrics {
    pub rounds_total: u64,
    /// Simulated rounds grouped by phase label, in first-use order.
    /// Charged-primitive rounds are kept separate, so
    /// `rounds_total == sum(rounds_by_phase) + charged_sort_rounds`.
    pub rounds_by_phase: Vec<(String, u64)>,
    pub charged_sort_rounds: u64,
    pub max_words_per_link_round: u64,
    pub words_sent_per_node: Vec<u64>,
    pub max_ops_per_node: u64,
}

/// One line of the per-round trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub round: u64,
    pub phase: String,
    pub max_link_words: u64,
    pub set_sizes: Vec<usize>,
}

impl TraceRow {
    pub fn to_tsv(&self) -> String {
        let sizes: Vec<String> = self.set_sizes.iter().map(|s| s.to_string()).collect();
        format!(
            "{}\t{}\t{}\t{}",
            self.round,
            self.phase,
            self.max_link_words,
            sizes.join(",")
        )
    }
}

/// The whole simulated clique.
#[derive(Debug, Clone)]
pub struct CliqueState {
    pub config: CliqueConfig,
    pub nodes: Vec<NodeState>,
    metrics: CliqueMetrics,
    phase: String,
    trace: Option<Vec<TraceRow>>,
}

impl CliqueState {
    /// Distribute `elements` round-robin (element `i` to node `i mod p`),
    /// so every node holds `floor(n/p)` or `ceil(n/p)` of them, and zero
    /// all metrics.
    pub fn load_instance(elements: Vec<TaggedElement>, config: CliqueConfig) -> Result<Self> {
        config.validate()?;
        if elements.is_empty() {
            return Err(Error::Instance("no elements".into()));
        }
        {
            let mut tags: Vec<(u32, u32)> = elements.iter().map(|e| (e.origin, e.seq)).collect();
            tags.sort_unstable();
            if tags.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Instance("duplicate (origin, seq) tag".into()));
            }
        }
        let p = config.p;
        let mut nodes: Vec<NodeState> = (0..p)
            .map(|id| NodeState {
                id,
                local_set: Vec::new(),
                inbox: (0..p).map(|_| VecDeque::new()).collect(),
                ops: 0,
            })
            .collect();
        for (i, e) in elements.into_iter().enumerate() {
            nodes[i % p].local_set.push(e);
        }
        Ok(Self {
            metrics: CliqueMetrics {
                words_sent_per_node: vec![0; p],
                ..CliqueMetrics::default()
            },
            config,
            nodes,
            phase: "init".into(),
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace_rows(&self) -> &[TraceRow] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn set_phase(&mut self, label: &str) {
        self.phase = label.to_string();
    }

    pub fn phase(&self) -> &str {
        &self.phase
    }

    pub fn rounds_total(&self) -> u64 {
        self.metrics.rounds_total
    }

    pub fn node_sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.local_set.len()).collect()
    }

    pub fn total_elements(&self) -> u64 {
        self.nodes.iter().map(|n| n.local_set.len() as u64).sum()
    }

    pub fn max_ops(&self) -> u64 {
        self.nodes.iter().map(|n| n.ops).max().unwrap_or(0)
    }

    /// Consistent copy of the metrics; does not mutate state.
    pub fn metrics_snapshot(&self) -> CliqueMetrics {
        let mut m = self.metrics.clone();
        m.max_ops_per_node = self.max_ops();
        m
    }

    /// Add the same local-computation cost to every node. Used when all
    /// nodes perform an identical computation on identical broadcast data,
    /// which the simulator evaluates once.
    pub fn charge_all(&mut self, cost: u64) {
        for node in &mut self.nodes {
            node.ops += cost;
        }
    }

    /// One synchronous communication round: every queued `(destination,
    /// word)` pair is delivered into the destination's per-source inbox,
    /// available from the next round on. `outgoing[v]` is what node `v`
    /// sends; self-sends are a programming error (a clique has no self
    /// links).
    ///
    /// In strict mode the round is rejected, with no state change, if any
    /// directed link would carry more than `bandwidth` words.
    pub fn exchange(&mut self, outgoing: Vec<Vec<(usize, Word)>>) -> Result<()> {
        let sender_ops: Vec<u64> = outgoing.iter().map(|l| l.len() as u64).collect();
        self.exchange_inner(outgoing, &sender_ops)
    }

    /// `sender_ops[v]` is the local-work charge for node `v`'s sends this
    /// round: one per word for point-to-point traffic, one per distinct
    /// word for a broadcast (preparing a word once is `O(1)` local work no
    /// matter how many links replicate it; the per-link occupancy still
    /// shows up in `words_sent_per_node` and the bandwidth check).
    fn exchange_inner(
        &mut self,
        outgoing: Vec<Vec<(usize, Word)>>,
        sender_ops: &[u64],
    ) -> Result<()> {
        let p = self.config.p;
        assert_eq!(outgoing.len(), p, "one outgoing list per node");
        let mut link_words = vec![0u64; p * p];
        for (src, list) in outgoing.iter().enumerate() {
            for &(dst, _) in list {
                assert!(dst < p, "destination {dst} out of range");
                assert_ne!(dst, src, "no self links in a clique");
                link_words[src * p + dst] += 1;
            }
        }
        let max_link = link_words.iter().copied().max().unwrap_or(0);
        if self.config.strict_bandwidth && max_link > self.config.bandwidth {
            let idx = link_words
                .iter()
                .position(|&w| w > self.config.bandwidth)
                .expect("an oversubscribed link exists");
            return Err(Error::BandwidthViolation {
                round: self.metrics.rounds_total + 1,
                from: idx / p,
                to: idx % p,
                words: link_words[idx],
                limit: self.config.bandwidth,
            });
        }

        self.metrics.rounds_total += 1;
        self.bump_phase_rounds(1);
        self.metrics.max_words_per_link_round = self.metrics.max_words_per_link_round.max(max_link);
        for (src, list) in outgoing.into_iter().enumerate() {
            self.metrics.words_sent_per_node[src] += list.len() as u64;
            self.nodes[src].ops += sender_ops[src];
            for (dst, word) in list {
                self.nodes[dst].ops += 1;
                self.nodes[dst].inbox[src].push_back(word);
            }
        }
        self.push_trace_row(max_link);
        Ok(())
    }

    /// Deliver an arbitrary batch of words, splitting it into as many
    /// rounds as the per-link budget requires (FIFO per link). Returns the
    /// number of rounds consumed (zero if nothing was queued).
    pub fn exchange_batched(&mut self, outgoing: Vec<Vec<(usize, Word)>>) -> Result<u64> {
        let p = self.config.p;
        let b = self.config.bandwidth;
        let mut queues: Vec<Vec<VecDeque<(usize, Word)>>> = outgoing
            .into_iter()
            .map(|list| {
                let mut per_dst: Vec<VecDeque<(usize, Word)>> =
                    (0..p).map(|_| VecDeque::new()).collect();
                for (dst, w) in list {
                    per_dst[dst].push_back((dst, w));
                }
                per_dst
            })
            .collect();
        let mut rounds = 0u64;
        loop {
            let mut round_out: Vec<Vec<(usize, Word)>> = vec![Vec::new(); p];
            let mut any = false;
            for (src, per_dst) in queues.iter_mut().enumerate() {
                for q in per_dst.iter_mut() {
                    for _ in 0..b {
                        if let Some(item) = q.pop_front() {
                            round_out[src].push(item);
                            any = true;
                        } else {
                            break;
                        }
                    }
                }
            }
            if !any {
                break;
            }
            self.exchange(round_out)?;
            rounds += 1;
        }
        Ok(rounds)
    }

    /// Make every node hold every queued word: node `v` sends its words to
    /// all `p - 1` peers, `bandwidth` of its own words per round, so the
    /// round cost is exactly `max_v ceil(m_v / B)`. Returns the union in
    /// `(source, queueing order)` order, which every node now holds.
    pub fn broadcast_words(&mut self, source_words: Vec<Vec<Word>>) -> Result<Vec<(usize, Word)>> {
        let p = self.config.p;
        assert_eq!(source_words.len(), p);
        let b = self.config.bandwidth as usize;
        let rounds = source_words
            .iter()
            .map(|w| w.len().div_ceil(b))
            .max()
            .unwrap_or(0);
        for r in 0..rounds {
            let mut round_out: Vec<Vec<(usize, Word)>> = vec![Vec::new(); p];
            let mut sender_ops = vec![0u64; p];
            for (src, words) in source_words.iter().enumerate() {
                let lo = r * b;
                if lo >= words.len() {
                    continue;
                }
                let hi = usize::min(lo + b, words.len());
                sender_ops[src] = (hi - lo) as u64;
                for &w in &words[lo..hi] {
                    for dst in 0..p {
                        if dst != src {
                            round_out[src].push((dst, w));
                        }
                    }
                }
            }
            self.exchange_inner(round_out, &sender_ops)?;
        }
        self.drain_inboxes();
        Ok(source_words
            .into_iter()
            .enumerate()
            .flat_map(|(src, words)| words.into_iter().map(move |w| (src, w)))
            .collect())
    }

    /// Globally sort the given per-node items and redistribute them into
    /// contiguous sorted blocks, node `i` holding the `i`-th block (block
    /// sizes differ by at most one, larger blocks first).
    ///
    /// Charged mode bills `c_sort` rounds to the primitive and charges each
    /// node `in_v * ceil(log2(m+1)) + out_v` operations for its share of the
    /// sorting work. Explicit mode is the honest fallback: broadcast every
    /// item (rounds and words counted for real), sort the union locally at
    /// every node, keep the own block. Both modes place items identically.
    pub fn distributed_sort(
        &mut self,
        per_node: Vec<Vec<TaggedElement>>,
    ) -> Result<Vec<Vec<TaggedElement>>> {
        let p = self.config.p;
        assert_eq!(per_node.len(), p);
        let m: usize = per_node.iter().map(|v| v.len()).sum();
        let in_sizes: Vec<usize> = per_node.iter().map(|v| v.len()).collect();

        let mut sorted: Vec<TaggedElement> = Vec::with_capacity(m);
        match self.config.sort_mode {
            SortMode::Charged => {
                for _ in 0..self.config.c_sort {
                    self.metrics.rounds_total += 1;
                    self.metrics.charged_sort_rounds += 1;
                    self.push_trace_row(0);
                }
                for items in &per_node {
                    sorted.extend_from_slice(items);
                }
                sorted.sort_unstable();
                let log_m = ceil_log2(m as u64 + 1) as u64;
                let out_sizes = block_sizes(m, p);
                for v in 0..p {
                    self.nodes[v].ops += in_sizes[v] as u64 * log_m + out_sizes[v] as u64;
                }
            }
            SortMode::Explicit => {
                let words: Vec<Vec<Word>> = per_node
                    .iter()
                    .map(|items| items.iter().map(|&e| Word::Element(e)).collect())
                    .collect();
                self.broadcast_words(words)?;
                for items in &per_node {
                    sorted.extend_from_slice(items);
                }
                // Every node sorts the broadcast union for itself.
                let mut scratch = sorted.clone();
                let mut cost = 0u64;
                sort_counted(&mut scratch, &mut cost);
                self.charge_all(cost);
                sorted = scratch;
            }
        }

        let mut blocks: Vec<Vec<TaggedElement>> = Vec::with_capacity(p);
        let mut offset = 0usize;
        for len in block_sizes(m, p) {
            blocks.push(sorted[offset..offset + len].to_vec());
            offset += len;
        }
        Ok(blocks)
    }

    /// Drain every inbox (words have been consumed by the protocol step
    /// that requested them).
    pub fn drain_inboxes(&mut self) {
        for node in &mut self.nodes {
            for q in &mut node.inbox {
                q.clear();
            }
        }
    }

    /// Words currently queued in `node`'s inbox from `source`.
    pub fn inbox_of(&self, node: usize, source: usize) -> &VecDeque<Word> {
        &self.nodes[node].inbox[source]
    }

    fn bump_phase_rounds(&mut self, by: u64) {
        if let Some(entry) = self
            .metrics
            .rounds_by_phase
            .iter_mut()
            .find(|(label, _)| *label == self.phase)
        {
            entry.1 += by;
        } else {
            self.metrics.rounds_by_phase.push((self.phase.clone(), by));
        }
    }

    fn push_trace_row(&mut self, max_link_words: u64) {
        if self.trace.is_none() {
            return;
        }
        let row = TraceRow {
            round: self.metrics.rounds_total,
            phase: self.phase.clone(),
            max_link_words,
            set_sizes: self.nodes.iter().map(|n| n.local_set.len()).collect(),
        };
        if let Some(rows) = &mut self.trace {
            rows.push(row);
        }
    }
}

/// Contiguous block sizes for `m` items over `p` nodes: the first `m mod p`
/// nodes take `ceil(m/p)`, the rest `floor(m/p)`.
pub(crate) fn block_sizes(m: usize, p: usize) -> Vec<usize> {
    let base = m / p;
    let rem = m % p;
    (0..p).map(|i| base + usize::from(i < rem)).collect()
}
