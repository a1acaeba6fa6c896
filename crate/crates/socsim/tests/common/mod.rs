//! Brute-force reference cache models for oracle-equivalence checks.
//!
//! Each set is an explicit recency list, most recent first. Nothing here
//! shares code with the simulator's cache implementations; that is the
//! point.

/// Reference set-associative cache with an explicit per-set recency list.
pub struct RefCache {
    line_bytes: u64,
    num_sets: u64,
    ways: usize,
    /// sets[s] = (tag, dirty), most recently used first
    sets: Vec<Vec<(u64, bool)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefEviction {
    pub tag: u64,
    pub dirty: bool,
}

impl RefCache {
    pub fn new(line_bytes: u64, num_sets: u64, ways: usize) -> Self {
        Self {
            line_bytes,
            num_sets,
            ways,
            sets: vec![Vec::new(); num_sets as usize],
        }
    }

    pub fn split(&self, addr: u64) -> (u64, u64) {
        let line = addr / self.line_bytes;
        (line % self.num_sets, line / self.num_sets)
    }

    fn promote(set: &mut Vec<(u64, bool)>, idx: usize) {
        let entry = set.remove(idx);
        set.insert(0, entry);
    }

    /// Write-allocate / write-back access (LLC semantics). Returns
    /// (hit, eviction-of-a-valid-line).
    pub fn access_allocate(&mut self, addr: u64, is_write: bool) -> (bool, Option<RefEviction>) {
        let (set_idx, tag) = self.split(addr);
        let ways = self.ways;
        let set = &mut self.sets[set_idx as usize];
        if let Some(i) = set.iter().position(|&(t, _)| t == tag) {
            Self::promote(set, i);
            set[0].1 |= is_write;
            return (true, None);
        }
        set.insert(0, (tag, is_write));
        let evicted = if set.len() > ways {
            let (tag, dirty) = set.pop().unwrap();
            Some(RefEviction { tag, dirty })
        } else {
            None
        };
        (false, evicted)
    }

    /// Read with allocate, write-through without allocate (L1 semantics).
    /// Returns residency as the hit flag.
    pub fn access_write_through(&mut self, addr: u64, is_write: bool) -> bool {
        let (set_idx, tag) = self.split(addr);
        let ways = self.ways;
        let set = &mut self.sets[set_idx as usize];
        match set.iter().position(|&(t, _)| t == tag) {
            Some(i) => {
                Self::promote(set, i);
                true
            }
            None => {
                if !is_write {
                    set.insert(0, (tag, false));
                    if set.len() > ways {
                        set.pop();
                    }
                }
                false
            }
        }
    }

    pub fn line_addr(&self, tag: u64, set_idx: u64) -> u64 {
        (tag * self.num_sets + set_idx) * self.line_bytes
    }
}
