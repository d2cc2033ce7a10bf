//! Capacity-bounded union-find over building blocks.
//!
//! Set names are chosen by a pluggable naming function and kept apart from
//! the union-by-size forest, so path compression never renames a set.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::model::BlockId;

/// Supernode naming function: picks one of two set names.
#[derive(Clone, Copy)]
pub struct NamingFn(pub fn(BlockId, BlockId) -> BlockId);

impl PartialEq for NamingFn {
    fn eq(&self, other: &Self) -> bool {
        self.0 as usize == other.0 as usize
    }
}

impl Eq for NamingFn {}

fn pick_min(a: BlockId, b: BlockId) -> BlockId {
    a.min(b)
}

fn pick_max(a: BlockId, b: BlockId) -> BlockId {
    a.max(b)
}

impl NamingFn {
    /// Smaller name wins; the default.
    pub const MIN: NamingFn = NamingFn(pick_min);
    /// Larger name wins.
    pub const MAX: NamingFn = NamingFn(pick_max);

    pub fn name(&self, a: BlockId, b: BlockId) -> BlockId {
        (self.0)(a, b)
    }
}

impl Default for NamingFn {
    fn default() -> Self {
        NamingFn::MIN
    }
}

impl fmt::Debug for NamingFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == NamingFn::MIN {
            f.write_str("NamingFn::MIN")
        } else if *self == NamingFn::MAX {
            f.write_str("NamingFn::MAX")
        } else {
            f.write_str("NamingFn(custom)")
        }
    }
}

/// Failures of [`LocalComponents::union`].
#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
pub enum UnionError {
    #[error("union capacity of {capacity} exhausted")]
    CapacityExhausted { capacity: usize },
    #[error("blocks already share component {0}")]
    SameComponent(BlockId),
}

/// Local components of one processor.
#[derive(Clone, Debug)]
pub struct LocalComponents {
    capacity: usize,
    unions_used: usize,
    naming: NamingFn,
    index: HashMap<BlockId, usize>,
    blocks: Vec<BlockId>,
    weight: Vec<u64>,
    parent: Vec<usize>,
    rank: Vec<u32>,
    name: Vec<BlockId>,
    count: Vec<u64>,
    max_count: u64,
}

impl LocalComponents {
    pub fn new(capacity: usize, naming: NamingFn) -> Self {
        LocalComponents {
            capacity,
            unions_used: 0,
            naming,
            index: HashMap::new(),
            blocks: Vec::new(),
            weight: Vec::new(),
            parent: Vec::new(),
            rank: Vec::new(),
            name: Vec::new(),
            count: Vec::new(),
            max_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn unions_used(&self) -> usize {
        self.unions_used
    }

    pub fn naming(&self) -> NamingFn {
        self.naming
    }

    pub fn has_capacity(&self) -> bool {
        self.unions_used < self.capacity
    }

    /// Whether `b` was consumed here (its consumer is this processor).
    pub fn is_consumed(&self, b: BlockId) -> bool {
        self.index.contains_key(&b)
    }

    /// Number of consumed blocks.
    pub fn consumed_len(&self) -> usize {
        self.blocks.len()
    }

    fn root(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            let gp = self.parent[self.parent[i]];
            self.parent[i] = gp;
            i = gp;
        }
        i
    }

    fn root_ro(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Enclosing component name, or `b` itself if unknown here.
    pub fn find(&mut self, b: BlockId) -> BlockId {
        match self.index.get(&b) {
            Some(&i) => {
                let r = self.root(i);
                self.name[r]
            }
            None => b,
        }
    }

    /// Read-only [`find`](Self::find) without path compression.
    pub fn label(&self, b: BlockId) -> BlockId {
        match self.index.get(&b) {
            Some(&i) => self.name[self.root_ro(i)],
            None => b,
        }
    }

    /// The relabeling function: identity on blocks not consumed here.
    pub fn relabel(&mut self, b: BlockId) -> BlockId {
        self.find(b)
    }

    /// Vertex count of the component enclosing `b`, if consumed here.
    pub fn component_size(&self, b: BlockId) -> Option<u64> {
        self.index.get(&b).map(|&i| self.count[self.root_ro(i)])
    }

    /// Vertex count of `b` as a building block, if consumed here.
    pub fn block_weight(&self, b: BlockId) -> Option<u64> {
        self.index.get(&b).map(|&i| self.weight[i])
    }

    pub fn max_component_size(&self) -> u64 {
        self.max_count
    }

    fn consume(&mut self, b: BlockId, w: u64) -> usize {
        if let Some(&i) = self.index.get(&b) {
            return i;
        }
        let i = self.blocks.len();
        self.index.insert(b, i);
        self.blocks.push(b);
        self.weight.push(w);
        self.parent.push(i);
        self.rank.push(0);
        self.name.push(b);
        self.count.push(w);
        self.max_count = self.max_count.max(w);
        i
    }

    /// Merge with unit weights for new blocks.
    pub fn union(&mut self, bx: BlockId, by: BlockId) -> Result<BlockId, UnionError> {
        self.union_weighted(bx, 1, by, 1)
    }

    /// Merge the sets of `bx` and `by`; new blocks enter with the given weights.
    pub fn union_weighted(
        &mut self,
        bx: BlockId,
        sx: u64,
        by: BlockId,
        sy: u64,
    ) -> Result<BlockId, UnionError> {
        if !self.has_capacity() {
            return Err(UnionError::CapacityExhausted { capacity: self.capacity });
        }
        if let (Some(&i), Some(&j)) = (self.index.get(&bx), self.index.get(&by)) {
            let (ri, rj) = (self.root(i), self.root(j));
            if ri == rj {
                return Err(UnionError::SameComponent(self.name[ri]));
            }
        } else if bx == by {
            return Err(UnionError::SameComponent(bx));
        }
        let i = self.consume(bx, sx);
        let j = self.consume(by, sy);
        let (ri, rj) = (self.root(i), self.root(j));
        let new_name = self.naming.name(self.name[ri], self.name[rj]);
        let total = self.count[ri] + self.count[rj];
        let (hi, lo) = if self.rank[ri] >= self.rank[rj] { (ri, rj) } else { (rj, ri) };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        self.name[hi] = new_name;
        self.count[hi] = total;
        self.max_count = self.max_count.max(total);
        self.unions_used += 1;
        Ok(new_name)
    }

    /// Forget everything; capacity is restored.
    pub fn reset(&mut self) {
        let (capacity, naming) = (self.capacity, self.naming);
        *self = LocalComponents::new(capacity, naming);
    }

    /// `(block, label)` for consumed blocks that do not name their set,
    /// in consumption order.
    pub fn pairs(&self) -> Vec<(BlockId, BlockId)> {
        self.blocks
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| {
                let n = self.name[self.root_ro(i)];
                (n != b).then_some((b, n))
            })
            .collect()
    }

    /// Consumed blocks of weight one, with their labels.
    pub fn primitive_members(&self) -> Vec<(BlockId, BlockId)> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.weight[i] == 1)
            .map(|(i, &b)| (b, self.name[self.root_ro(i)]))
            .collect()
    }

    /// `(name, vertex count)` per set, ordered by the set's first block.
    pub fn components(&self) -> Vec<(BlockId, u64)> {
        (0..self.blocks.len())
            .filter(|&i| self.parent[i] == i)
            .map(|i| (self.name[i], self.count[i]))
            .collect()
    }

    /// Consumed blocks in consumption order.
    pub fn blocks(&self) -> &[BlockId] {
        &self.blocks
    }
}
