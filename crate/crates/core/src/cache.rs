//! The shared block cache that carries the channel.
//!
//! Files live on a [`Volume`] and are read block by block, in ascending
//! index order, through a fixed-capacity [`BlockCache`]. A read returns how
//! many blocks hit and missed and the resulting I/O time; jitter is the
//! caller's business.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timing::PhysicalParams;
use crate::units::{SimTime, BLOCK_SIZE_BYTES, MB_BYTES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CacheError {
    #[error("file size must be positive")]
    ZeroSize,
    #[error("file size {0} bytes is not a multiple of the {BLOCK_SIZE_BYTES}-byte block size")]
    NotBlockAligned(u64),
    #[error("volume full: {requested} bytes requested, {available} available")]
    VolumeFull { requested: u64, available: u64 },
    #[error("cache must hold at least one block")]
    ZeroCapacity,
    #[error("sender file has {file_blocks} blocks but the cache holds {capacity}; full eviction not guaranteed")]
    SenderFileTooSmall { file_blocks: u64, capacity: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompartmentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId {
    pub file: FileId,
    pub index: u64,
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}#{}", self.file.0, self.index)
    }
}

/// A file registered on a [`Volume`]. Only the volume hands these out, so a
/// `SimFile` is always non-empty and block aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimFile {
    id: FileId,
    size_bytes: u64,
    owner: CompartmentId,
}

impl SimFile {
    pub fn id(&self) -> FileId {
        self.id
    }

    pub fn owner(&self) -> CompartmentId {
        self.owner
    }

    pub fn size_bytes(&self) -> u64 {
        self.size_bytes
    }

    pub fn blocks(&self) -> u64 {
        self.size_bytes / BLOCK_SIZE_BYTES
    }

    pub fn block(&self, index: u64) -> BlockId {
        BlockId {
            file: self.id,
            index,
        }
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        (0..self.blocks()).map(move |i| self.block(i))
    }
}

/// Backing store on which compartments' files are allocated.
#[derive(Debug, Clone)]
pub struct Volume {
    capacity_bytes: u64,
    used_bytes: u64,
    next_id: u32,
}

impl Volume {
    pub fn new(capacity_bytes: u64) -> Self {
        Volume {
            capacity_bytes,
            used_bytes: 0,
            next_id: 0,
        }
    }

    /// A volume large enough for any realistic scenario (1 TiB).
    pub fn unbounded() -> Self {
        Volume::new(MB_BYTES << 20)
    }

    pub fn register(
        &mut self,
        owner: CompartmentId,
        size_bytes: u64,
    ) -> Result<SimFile, CacheError> {
        if size_bytes == 0 {
            return Err(CacheError::ZeroSize);
        }
        if !size_bytes.is_multiple_of(BLOCK_SIZE_BYTES) {
            return Err(CacheError::NotBlockAligned(size_bytes));
        }
        let available = self.capacity_bytes - self.used_bytes;
        if size_bytes > available {
            return Err(CacheError::VolumeFull {
                requested: size_bytes,
                available,
            });
        }
        self.used_bytes += size_bytes;
        let id = FileId(self.next_id);
        self.next_id += 1;
        Ok(SimFile {
            id,
            size_bytes,
            owner,
        })
    }

    pub fn register_blocks(
        &mut self,
        owner: CompartmentId,
        blocks: u64,
    ) -> Result<SimFile, CacheError> {
        self.register(owner, blocks * BLOCK_SIZE_BYTES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum EvictionPolicy {
    #[default]
    Lru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReadOutcome {
    pub hit_blocks: u64,
    pub miss_blocks: u64,
    /// I/O time before jitter.
    pub duration: SimTime,
}

impl ReadOutcome {
    pub fn blocks(&self) -> u64 {
        self.hit_blocks + self.miss_blocks
    }
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    capacity: u64,
    policy: EvictionPolicy,
    // block -> recency stamp, and stamp -> block (ascending = LRU first)
    stamps: HashMap<BlockId, u64>,
    order: BTreeMap<u64, BlockId>,
    clock: u64,
}

impl BlockCache {
    pub fn new(capacity_blocks: u64) -> Result<Self, CacheError> {
        if capacity_blocks == 0 {
            return Err(CacheError::ZeroCapacity);
        }
        Ok(BlockCache {
            capacity: capacity_blocks,
            policy: EvictionPolicy::Lru,
            stamps: HashMap::new(),
            order: BTreeMap::new(),
            clock: 0,
        })
    }

    /// Cache sized to `floor(c / block size)` blocks.
    pub fn for_params(params: &PhysicalParams) -> Result<Self, CacheError> {
        BlockCache::new(params.cache_blocks())
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn policy(&self) -> EvictionPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    /// Does not touch recency.
    pub fn is_resident(&self, block: BlockId) -> bool {
        self.stamps.contains_key(&block)
    }

    pub fn resident_blocks_of(&self, file: &SimFile) -> u64 {
        file.block_ids().filter(|b| self.is_resident(*b)).count() as u64
    }

    /// Resident blocks from least to most recently used.
    pub fn resident(&self) -> Vec<BlockId> {
        self.order.values().copied().collect()
    }

    /// Accesses one block, returning `true` on a hit. A miss inserts the
    /// block as most recently used, evicting the LRU block when full.
    pub fn touch(&mut self, block: BlockId) -> bool {
        self.clock += 1;
        let stamp = self.clock;
        if let Some(old) = self.stamps.insert(block, stamp) {
            self.order.remove(&old);
            self.order.insert(stamp, block);
            return true;
        }
        self.order.insert(stamp, block);
        if self.stamps.len() as u64 > self.capacity {
            let (_, victim) = self
                .order
                .pop_first()
                .expect("cache over capacity but empty");
            self.stamps.remove(&victim);
        }
        false
    }

    /// Reads every block of `file` in ascending index order.
    pub fn read_file(&mut self, file: &SimFile, params: &PhysicalParams) -> ReadOutcome {
        let mut hits = 0;
        let mut misses = 0;
        for block in file.block_ids() {
            if self.touch(block) {
                hits += 1;
            } else {
                misses += 1;
            }
        }
        ReadOutcome {
            hit_blocks: hits,
            miss_blocks: misses,
            duration: params.block_hit_time() * hits + params.block_miss_time() * misses,
        }
    }

    /// Reads a file at least as large as the cache, flushing every block
    /// that does not belong to it.
    pub fn evict_all_via_read(
        &mut self,
        sender_file: &SimFile,
        params: &PhysicalParams,
    ) -> Result<ReadOutcome, CacheError> {
        if sender_file.blocks() < self.capacity {
            return Err(CacheError::SenderFileTooSmall {
                file_blocks: sender_file.blocks(),
                capacity: self.capacity,
            });
        }
        Ok(self.read_file(sender_file, params))
    }
}
