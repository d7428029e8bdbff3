//! Set partitions of {1..K} into even-cardinality blocks, per-block
//! traversals with ascent counts, and perfect matchings. These are the
//! combinatorial skeletons the diagram sums range over.
//!
//! Enumeration order is canonical and stable: the smallest unassigned
//! vertex anchors the next block, candidate blocks are tried in increasing
//! bitmask order, and traversal tails are emitted in lexicographic order.
//! Tests and the JSON export rely on this order, so it must not change.

use crate::error::{Error, Result};
use crate::Caps;

/// Hard width limit of the bitmask state machine.
const MAX_VERTICES: usize = 32;

/// Assignment of vertices 1..=K to the multiplier (factor slot) each one
/// expands. Vertices of one multiplier are contiguous: powers (q1, q2, ..)
/// label vertices 1..q1 with multiplier 1, the next q2 with 2, and so on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexLabeling {
    multiplier_of: Vec<usize>,
}

impl VertexLabeling {
    /// Build the labeling from per-multiplier vertex counts.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Invalid("labeling needs at least one multiplier".into()));
        }
        if let Some(pos) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Invalid(format!(
                "multiplier {} has no vertices",
                pos + 1
            )));
        }
        let mut multiplier_of = Vec::with_capacity(counts.iter().sum());
        for (m, &count) in counts.iter().enumerate() {
            multiplier_of.extend(std::iter::repeat(m + 1).take(count));
        }
        Ok(VertexLabeling { multiplier_of })
    }

    /// Total number of vertices K.
    pub fn total(&self) -> usize {
        self.multiplier_of.len()
    }

    pub fn num_multipliers(&self) -> usize {
        *self.multiplier_of.last().expect("labeling is nonempty")
    }

    /// Multiplier index (1-based) of a 1-based vertex.
    pub fn multiplier_of(&self, vertex: usize) -> usize {
        self.multiplier_of[vertex - 1]
    }
}

/// A partition of {1..K} whose blocks all have even cardinality. Blocks
/// are sorted ascending internally and ordered by their minimum element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EvenPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl EvenPartition {
    /// Validating constructor for partitions built outside the enumerator.
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen: Vec<usize> = Vec::new();
        let mut prev_min = 0;
        for block in &blocks {
            if block.len() % 2 != 0 || block.is_empty() {
                return Err(Error::OddBlockSize(block.len()));
            }
            if !block.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Invalid(format!("block {block:?} is not sorted")));
            }
            if block[0] <= prev_min {
                return Err(Error::Invalid("blocks are not ordered by minimum".into()));
            }
            prev_min = block[0];
            seen.extend_from_slice(block);
        }
        let k = seen.len();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &v)| v != i + 1) {
            return Err(Error::Invalid(format!(
                "blocks do not partition 1..={k}"
            )));
        }
        Ok(EvenPartition { blocks })
    }

    pub fn total(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

/// One way to walk a block: a permutation of its vertices starting at the
/// minimum, together with the count m of neighboring non-descents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Traversal {
    pub block: Vec<usize>,
    pub order: Vec<usize>,
    /// m = #{i : order[i] <= order[i+1]}; entries are distinct, so this
    /// counts strict ascents. Always >= 1 because order starts at the min.
    pub ascents: usize,
}

impl Traversal {
    /// The diagram weight (-1)^(m-1) carried by this traversal.
    pub fn sign(&self) -> i64 {
        if self.ascents % 2 == 1 {
            1
        } else {
            -1
        }
    }
}

/// A partition together with one chosen traversal per block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagram {
    pub partition: EvenPartition,
    pub traversals: Vec<Traversal>,
}

/// Stream every partition of {1..K} into even blocks, in canonical order.
/// When `exclude_same_multiplier` is set, partitions containing a block
/// whose vertices all share one multiplier label are omitted. Odd K yields
/// an empty stream; K beyond the cap is a capacity error.
pub fn enumerate_even_partitions(
    labeling: &VertexLabeling,
    exclude_same_multiplier: bool,
    caps: &Caps,
) -> Result<PartitionIter> {
    PartitionIter::new(labeling, exclude_same_multiplier, false, caps)
}

/// Stream the perfect matchings of {1..K}, i.e. the partitions with all
/// blocks of size 2, in the same canonical order and with the same
/// exclusion rule as [`enumerate_even_partitions`].
pub fn enumerate_pair_partitions(
    labeling: &VertexLabeling,
    exclude_same_multiplier: bool,
    caps: &Caps,
) -> Result<PartitionIter> {
    PartitionIter::new(labeling, exclude_same_multiplier, true, caps)
}

struct Frame {
    /// Vertices not yet covered when this block gets chosen.
    remaining: u32,
    /// Carry-rippler state: the last submask tried for this block's tail.
    sub: u32,
}

/// Depth-first enumerator over even-block partitions. Each stack frame
/// picks the block containing the smallest uncovered vertex by stepping a
/// submask of the other uncovered vertices through increasing values.
pub struct PartitionIter {
    labels: Vec<usize>,
    exclude: bool,
    pairs_only: bool,
    stack: Vec<Frame>,
}

impl PartitionIter {
    fn new(
        labeling: &VertexLabeling,
        exclude: bool,
        pairs_only: bool,
        caps: &Caps,
    ) -> Result<Self> {
        let k = labeling.total();
        let cap = caps.partition_k.min(MAX_VERTICES);
        if k > cap {
            return Err(Error::Capacity {
                what: "partition vertex count K",
                requested: k as u128,
                cap: cap as u128,
            });
        }
        let stack = if k % 2 == 0 {
            vec![Frame {
                remaining: if k == 32 { u32::MAX } else { (1u32 << k) - 1 },
                sub: 0,
            }]
        } else {
            Vec::new() // no even partition exists
        };
        Ok(PartitionIter {
            labels: labeling.multiplier_of.clone(),
            exclude,
            pairs_only,
            stack,
        })
    }

    fn monochromatic(&self, block: u32) -> bool {
        let first = self.labels[block.trailing_zeros() as usize];
        let mut bits = block;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            if self.labels[v] != first {
                return false;
            }
            bits &= bits - 1;
        }
        true
    }

    fn partition_from_stack(&self) -> EvenPartition {
        let blocks = self
            .stack
            .iter()
            .map(|frame| {
                let anchor = frame.remaining & frame.remaining.wrapping_neg();
                let mut bits = anchor | frame.sub;
                let mut block = Vec::with_capacity(bits.count_ones() as usize);
                while bits != 0 {
                    block.push(bits.trailing_zeros() as usize + 1);
                    bits &= bits - 1;
                }
                block
            })
            .collect();
        EvenPartition { blocks }
    }
}

impl Iterator for PartitionIter {
    type Item = EvenPartition;

    fn next(&mut self) -> Option<EvenPartition> {
        loop {
            let top = self.stack.last()?;
            let remaining = top.remaining;
            let anchor = remaining & remaining.wrapping_neg();
            let rest = remaining & !anchor;
            let mut sub = top.sub;
            let mut chosen = 0u32;
            loop {
                sub = sub.wrapping_sub(rest) & rest;
                if sub == 0 {
                    break; // submasks exhausted, wrapped back around
                }
                let tail = sub.count_ones();
                let size_ok = if self.pairs_only {
                    tail == 1
                } else {
                    tail % 2 == 1 // block = anchor + tail must be even
                };
                if !size_ok {
                    continue;
                }
                let block = anchor | sub;
                if self.exclude && self.monochromatic(block) {
                    continue;
                }
                chosen = block;
                break;
            }
            self.stack.last_mut().expect("frame still present").sub = sub;
            if chosen == 0 {
                self.stack.pop();
                continue;
            }
            let uncovered = remaining & !chosen;
            if uncovered == 0 {
                return Some(self.partition_from_stack());
            }
            self.stack.push(Frame {
                remaining: uncovered,
                sub: 0,
            });
        }
    }
}

/// Stream all (|block|-1)! traversals of a block: the minimum stays first
/// and the tail runs through its permutations in lexicographic order.
pub fn enumerate_traversals(block: &[usize]) -> TraversalIter {
    debug_assert!(block.len() >= 2 && block.len() % 2 == 0);
    debug_assert!(block.windows(2).all(|w| w[0] < w[1]));
    TraversalIter {
        block: block.to_vec(),
        tail: block[1..].to_vec(),
        fresh: true,
        done: false,
    }
}

pub struct TraversalIter {
    block: Vec<usize>,
    tail: Vec<usize>,
    fresh: bool,
    done: bool,
}

impl Iterator for TraversalIter {
    type Item = Traversal;

    fn next(&mut self) -> Option<Traversal> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
        } else if !next_permutation(&mut self.tail) {
            self.done = true;
            return None;
        }
        let mut order = Vec::with_capacity(self.block.len());
        order.push(self.block[0]);
        order.extend_from_slice(&self.tail);
        let ascents = order.windows(2).filter(|w| w[0] <= w[1]).count();
        Some(Traversal {
            block: self.block.clone(),
            order,
            ascents,
        })
    }
}

/// Advance to the lexicographically next permutation; false once the
/// sequence is descending (last permutation).
pub(crate) fn next_permutation(seq: &mut [usize]) -> bool {
    if seq.len() < 2 {
        return false;
    }
    let mut i = seq.len() - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = seq.len() - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}
