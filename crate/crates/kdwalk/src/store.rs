//! Canonical set store: a bucketed hash table with dyadic rank counters and
//! a hash-driven skip list, plus the collision counter v.
//!
//! The representation of a stored set depends only on the set and the hash
//! seeds, never on the operation history: entries live in bucket
//! h(i) = ⌊i·r/N⌋+1 sorted by index, the per-bucket dyadic counters are
//! determined by the bucket loads, and skip-list levels come from fixed
//! d-wise independent hash functions h₁..h_l_max (the level of i is the
//! number of leading 1s of h₁(i), h₂(i), …). Pointers store the successor's
//! index, not a memory location, so following one costs a bucket search.
//!
//! Every mutating operation runs under a step budget of c·⌈log₂(N+M)⌉⁴
//! elementary actions (entry comparisons, link traversals, counter
//! updates); exceeding it or overflowing a bucket rolls the store back and
//! raises the failure flag.

use crate::hash::{BoolMember, DWiseBoolFamily};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Capacity and seed choices for one store instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreParams {
    /// Index universe `[N]`.
    pub n: u64,
    /// Value universe `[M]`.
    pub m: u64,
    /// Bucket count, also the capacity in entries.
    pub r: u64,
    /// Collision arity tracked by the v counter.
    pub k: u32,
    /// Master seed for the level hash functions.
    pub seed: u64,
    /// Budget multiplier c in c·⌈log₂(N+M)⌉⁴.
    pub budget_c: f64,
}

impl StoreParams {
    pub fn new(n: u64, m: u64, r: u64, k: u32, seed: u64) -> Result<Self> {
        let p = StoreParams { n, m, r, k, seed, budget_c: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_budget_c(mut self, c: f64) -> Self {
        self.budget_c = c;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams("need N >= 2".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidParams("need M >= 1".into()));
        }
        if self.r < 1 || self.r > self.n {
            return Err(Error::InvalidParams(format!("need 1 <= r <= N, got r = {}", self.r)));
        }
        if self.k < 2 {
            return Err(Error::InvalidParams("need k >= 2".into()));
        }
        if !(self.budget_c > 0.0) {
            return Err(Error::InvalidParams("budget multiplier must be positive".into()));
        }
        Ok(())
    }

    fn default_budget(&self) -> u64 {
        let bits = 64 - (self.n + self.m - 1).leading_zeros() as u64; // ⌈log₂(N+M)⌉
        let quartic = (bits * bits * bits * bits) as f64;
        (self.budget_c * quartic).ceil() as u64
    }
}

/// Per-operation step accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepBudget {
    pub budget: u64,
    /// Steps used by the last operation.
    pub consumed: u64,
    /// Set when the last operation aborted (budget or overflow).
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    idx: u64,
    val: u64,
    level: u8,
    /// links[l] = index of the next entry in the level-l list, 0 = none.
    links: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Bucket {
    entries: Vec<Entry>,
    /// counters[l] counts entries in buckets (j − 2^l, j], present for
    /// every level l ≤ the counter cap with 2^l | j.
    counters: Vec<u64>,
}

/// The canonical store.
#[derive(Debug, Clone)]
pub struct CanonicalStore {
    pub params: StoreParams,
    l_max: u32,
    counter_cap: u32,
    bucket_cap: usize,
    buckets: Vec<Bucket>,
    start_links: Vec<u64>,
    v: u64,
    len: u64,
    level_fns: Vec<BoolMember>,
    pub budget: StepBudget,
}

impl PartialEq for CanonicalStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.buckets == other.buckets
            && self.start_links == other.start_links
            && self.v == other.v
    }
}

/// Snapshot of the mutable portion, for rollback.
struct Undo {
    buckets: Vec<Bucket>,
    start_links: Vec<u64>,
    v: u64,
    len: u64,
}

impl CanonicalStore {
    pub fn new(params: StoreParams) -> Result<Self> {
        params.validate()?;
        let l_max = 64 - (params.n - 1).leading_zeros(); // ⌈log₂ N⌉
        let counter_cap = 63 - params.r.leading_zeros(); // ⌊log₂ r⌋
        let bucket_cap = l_max as usize; // ⌈log₂ N⌉ entries per bucket
        // d = ⌈4·log₂N⌉+1, capped at n where the family degree saturates
        let d = ((4 * l_max + 1) as u64).min(params.n) as u32;
        let family = DWiseBoolFamily::new(params.n.max(2), d)?;
        let mut seeder = ChaCha20Rng::seed_from_u64(params.seed);
        let level_fns = (0..l_max).map(|_| family.sample_member(seeder.gen::<u64>())).collect();
        let mut buckets = vec![Bucket::default(); params.r as usize];
        for (j0, b) in buckets.iter_mut().enumerate() {
            let j = j0 as u64 + 1;
            let levels = (j.trailing_zeros()).min(counter_cap) + 1;
            b.counters = vec![0; levels as usize];
        }
        let budget = StepBudget { budget: params.default_budget(), consumed: 0, failed: false };
        Ok(CanonicalStore {
            params,
            l_max,
            counter_cap,
            bucket_cap,
            buckets,
            start_links: vec![0; l_max as usize + 1],
            v: 0,
            len: 0,
            level_fns,
            budget,
        })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of distinct values with ≥ k stored indices.
    pub fn collision_values(&self) -> u64 {
        self.v
    }

    pub fn has_k_collision(&self) -> bool {
        self.v > 0
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Bucket number of an index: ⌊i·r/N⌋ + 1, clamped to r for i = N
    /// (the formula's only out-of-range point).
    pub fn bucket_number(&self, i: u64) -> u64 {
        ((i * self.params.r) / self.params.n + 1).min(self.params.r)
    }

    /// Skip-list level of an index: leading 1s of h₁(i), h₂(i), ….
    pub fn level_of(&self, i: u64) -> u8 {
        let mut level = 0u8;
        for h in &self.level_fns {
            if h.eval(i).expect("index validated") == 1 {
                level += 1;
            } else {
                break;
            }
        }
        level
    }

    fn charge(&mut self, steps: u64) -> Result<()> {
        self.budget.consumed += steps;
        if self.budget.consumed > self.budget.budget {
            Err(Error::BudgetExceeded {
                consumed: self.budget.consumed,
                budget: self.budget.budget,
            })
        } else {
            Ok(())
        }
    }

    fn snapshot(&self) -> Undo {
        Undo {
            buckets: self.buckets.clone(),
            start_links: self.start_links.clone(),
            v: self.v,
            len: self.len,
        }
    }

    fn restore(&mut self, undo: Undo) {
        self.buckets = undo.buckets;
        self.start_links = undo.start_links;
        self.v = undo.v;
        self.len = undo.len;
    }

    /// Bucket position of an index, charging one step per comparison.
    fn locate(&mut self, i: u64) -> Result<Option<(usize, usize)>> {
        let b = (self.bucket_number(i) - 1) as usize;
        for pos in 0..self.buckets[b].entries.len() {
            self.charge(1)?;
            let idx = self.buckets[b].entries[pos].idx;
            if idx == i {
                return Ok(Some((b, pos)));
            }
            if idx > i {
                return Ok(None);
            }
        }
        Ok(None)
    }

    fn entry(&self, b: usize, pos: usize) -> &Entry {
        &self.buckets[b].entries[pos]
    }

    /// Sort key of a stored index; the lists are ordered by (value, index).
    fn key_at(&mut self, i: u64) -> Result<(u64, u64)> {
        let (b, pos) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
        let e = self.entry(b, pos);
        Ok((e.val, e.idx))
    }

    /// Level-l successor link of a node (None = start node).
    fn link_after(&mut self, node: Option<u64>, l: usize) -> Result<u64> {
        self.charge(1)?;
        match node {
            None => Ok(self.start_links[l]),
            Some(i) => {
                let (b, pos) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
                Ok(self.entry(b, pos).links[l])
            }
        }
    }

    fn set_link(&mut self, node: Option<u64>, l: usize, target: u64) -> Result<()> {
        self.charge(1)?;
        match node {
            None => self.start_links[l] = target,
            Some(i) => {
                let (b, pos) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
                self.buckets[b].entries[pos].links[l] = target;
            }
        }
        Ok(())
    }

    /// Top-down search: the last node strictly before `key` on every level.
    fn pred_search(&mut self, key: (u64, u64)) -> Result<Vec<Option<u64>>> {
        let levels = self.l_max as usize + 1;
        let mut preds = vec![None; levels];
        let mut cur: Option<u64> = None;
        for l in (0..levels).rev() {
            loop {
                let next = self.link_after(cur, l)?;
                if next == 0 {
                    break;
                }
                let next_key = self.key_at(next)?;
                if next_key < key {
                    cur = Some(next);
                } else {
                    break;
                }
            }
            preds[l] = cur;
        }
        Ok(preds)
    }

    /// Occurrences of a value, counted along the level-0 list, capped at
    /// k+1.
    fn count_value(&mut self, x: u64) -> Result<u64> {
        let preds = self.pred_search((x, 0))?;
        let mut cur = self.link_after(preds[0], 0)?;
        let mut count = 0u64;
        while cur != 0 && count <= self.params.k as u64 {
            let (val, idx) = self.key_at(cur)?;
            if val != x {
                break;
            }
            count += 1;
            let (b, pos) = self.locate(idx)?.ok_or(Error::MissingIndex(idx))?;
            cur = self.entry(b, pos).links[0];
            self.charge(1)?;
        }
        Ok(count)
    }

    /// Inserts (i, x). On budget overrun or bucket overflow the store is
    /// rolled back and the failure flag set.
    pub fn insert(&mut self, i: u64, x: u64) -> Result<()> {
        if i < 1 || i > self.params.n {
            return Err(Error::InvalidParams(format!(
                "index {i} outside [1, {}]",
                self.params.n
            )));
        }
        if x < 1 || x > self.params.m {
            return Err(Error::InvalidParams(format!(
                "value {x} outside [1, {}]",
                self.params.m
            )));
        }
        if self.len >= self.params.r {
            return Err(Error::InvalidParams("store at capacity".into()));
        }
        self.budget.consumed = 0;
        self.budget.failed = false;
        if self.locate(i)?.is_some() {
            return Err(Error::DuplicateIndex(i));
        }
        let undo = self.snapshot();
        match self.insert_inner(i, x) {
            Ok(()) => {
                #[cfg(debug_assertions)]
                self.assert_counters_consistent();
                Ok(())
            }
            Err(e @ (Error::BudgetExceeded { .. } | Error::BucketOverflow { .. })) => {
                self.restore(undo);
                self.budget.failed = true;
                Err(e)
            }
            Err(e) => {
                self.restore(undo);
                Err(e)
            }
        }
    }

    fn insert_inner(&mut self, i: u64, x: u64) -> Result<()> {
        // bucket placement, ascending by index
        let b = (self.bucket_number(i) - 1) as usize;
        if self.buckets[b].entries.len() >= self.bucket_cap {
            return Err(Error::BucketOverflow { bucket: b as u64 + 1 });
        }
        let mut pos = 0;
        while pos < self.buckets[b].entries.len() && self.buckets[b].entries[pos].idx < i {
            self.charge(1)?;
            pos += 1;
        }
        // one step per entry shifted to keep the bucket sorted
        let shifted = self.buckets[b].entries.len() - pos;
        self.charge(shifted as u64 + 1)?;
        let level = self.level_of(i);
        let links = vec![0u64; level as usize + 1];
        self.buckets[b].entries.insert(pos, Entry { idx: i, val: x, level, links });

        // dyadic counters over the aligned windows containing this bucket
        let j = b as u64 + 1;
        for l in 0..=self.counter_cap {
            let step = 1u64 << l;
            let window = j.div_ceil(step) * step;
            if window <= self.params.r {
                self.buckets[(window - 1) as usize].counters[l as usize] += 1;
                self.charge(1)?;
            }
        }

        // skip-list splice at levels 0..=level
        let preds = self.pred_search((x, i))?;
        for l in 0..=level as usize {
            let next = self.link_after(preds[l], l)?;
            let (bb, pp) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
            self.buckets[bb].entries[pp].links[l] = next;
            self.set_link(preds[l], l, i)?;
        }

        self.len += 1;
        if self.count_value(x)? == self.params.k as u64 {
            self.v += 1;
            self.charge(1)?;
        }
        Ok(())
    }

    /// Removes index i: the exact inverse of insert.
    pub fn remove(&mut self, i: u64) -> Result<()> {
        self.budget.consumed = 0;
        self.budget.failed = false;
        if self.locate(i)?.is_none() {
            return Err(Error::MissingIndex(i));
        }
        let undo = self.snapshot();
        match self.remove_inner(i) {
            Ok(()) => {
                #[cfg(debug_assertions)]
                self.assert_counters_consistent();
                Ok(())
            }
            Err(e @ Error::BudgetExceeded { .. }) => {
                self.restore(undo);
                self.budget.failed = true;
                Err(e)
            }
            Err(e) => {
                self.restore(undo);
                Err(e)
            }
        }
    }

    fn remove_inner(&mut self, i: u64) -> Result<()> {
        let (b, pos) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
        let (x, level) = {
            let e = self.entry(b, pos);
            (e.val, e.level)
        };
        if self.count_value(x)? == self.params.k as u64 {
            self.v -= 1;
            self.charge(1)?;
        }
        // unsplice top-down
        let preds = self.pred_search((x, i))?;
        for l in 0..=level as usize {
            let next = {
                let (bb, pp) = self.locate(i)?.ok_or(Error::MissingIndex(i))?;
                self.entry(bb, pp).links[l]
            };
            self.set_link(preds[l], l, next)?;
        }
        // counters
        let j = b as u64 + 1;
        for l in 0..=self.counter_cap {
            let step = 1u64 << l;
            let window = j.div_ceil(step) * step;
            if window <= self.params.r {
                self.buckets[(window - 1) as usize].counters[l as usize] -= 1;
                self.charge(1)?;
            }
        }
        // bucket removal
        let shifted = self.buckets[b].entries.len() - pos - 1;
        self.charge(shifted as u64 + 1)?;
        self.buckets[b].entries.remove(pos);
        self.len -= 1;
        Ok(())
    }

    /// Stored value of an index, if present. Read-only: meters its steps
    /// but never aborts or flips the failure flag.
    pub fn lookup(&mut self, i: u64) -> Option<u64> {
        if i < 1 || i > self.params.n {
            return None;
        }
        self.budget.consumed = 0;
        let b = (self.bucket_number(i) - 1) as usize;
        for e in &self.buckets[b].entries {
            self.budget.consumed += 1;
            if e.idx == i {
                return Some(e.val);
            }
            if e.idx > i {
                break;
            }
        }
        None
    }

    /// Rank f(y) = f₁(y) + f₂(y) ∈ {1..|S|}: entries in earlier buckets via
    /// the dyadic-counter descent, plus the position within bucket h(y).
    pub fn rank(&mut self, y: u64) -> Result<u64> {
        let (b, pos) = self.locate(y)?.ok_or(Error::MissingIndex(y))?;
        let h = b as u64 + 1;
        let mut f1 = 0u64;
        let mut at = 0u64;
        for l in (0..=self.counter_cap).rev() {
            let probe = at + (1u64 << l);
            if probe < h {
                f1 += self.buckets[(probe - 1) as usize].counters[l as usize];
                at = probe;
            }
        }
        let f2 = pos as u64 + 1;
        Ok(f1 + f2)
    }

    /// All stored indices in bucket order (the order rank enumerates).
    pub fn indices_in_rank_order(&self) -> Vec<u64> {
        self.buckets.iter().flat_map(|b| b.entries.iter().map(|e| e.idx)).collect()
    }

    /// Deterministic, content-addressed byte encoding: equal stores (same
    /// set, same seeds) serialize identically regardless of history.
    pub fn serialize_canonical(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"KDCSTOR1");
        out.extend_from_slice(&crate::hash::CONSTRUCTION_VERSION.to_be_bytes());
        out.extend_from_slice(&self.params.n.to_be_bytes());
        out.extend_from_slice(&self.params.m.to_be_bytes());
        out.extend_from_slice(&self.params.r.to_be_bytes());
        out.extend_from_slice(&self.params.k.to_be_bytes());
        out.extend_from_slice(&self.params.seed.to_be_bytes());
        out.extend_from_slice(&self.l_max.to_be_bytes());
        for b in &self.buckets {
            out.extend_from_slice(&(b.entries.len() as u32).to_be_bytes());
            for e in &b.entries {
                out.extend_from_slice(&e.idx.to_be_bytes());
                out.extend_from_slice(&e.val.to_be_bytes());
            }
        }
        for b in &self.buckets {
            for c in &b.counters {
                out.extend_from_slice(&c.to_be_bytes());
            }
        }
        for l in &self.start_links {
            out.extend_from_slice(&l.to_be_bytes());
        }
        for b in &self.buckets {
            for e in &b.entries {
                out.push(e.level);
                for l in &e.links {
                    out.extend_from_slice(&l.to_be_bytes());
                }
            }
        }
        out.extend_from_slice(&self.v.to_be_bytes());
        out
    }

    /// Rebuilds a store from its canonical encoding.
    pub fn deserialize_canonical(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0 };
        let magic = cur.take(8)?;
        if magic != b"KDCSTOR1" {
            return Err(Error::BadEncoding("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != crate::hash::CONSTRUCTION_VERSION {
            return Err(Error::BadEncoding(format!("unsupported version {version}")));
        }
        let n = cur.u64()?;
        let m = cur.u64()?;
        let r = cur.u64()?;
        let k = cur.u32()?;
        let seed = cur.u64()?;
        let l_max = cur.u32()?;
        let params = StoreParams::new(n, m, r, k, seed)?;
        let mut store = CanonicalStore::new(params)?;
        if store.l_max != l_max {
            return Err(Error::BadEncoding("level count mismatch".into()));
        }
        let mut sizes = Vec::with_capacity(r as usize);
        for b in 0..r as usize {
            let count = cur.u32()? as usize;
            if count > store.bucket_cap {
                return Err(Error::BadEncoding("bucket over capacity".into()));
            }
            sizes.push(count);
            for _ in 0..count {
                let idx = cur.u64()?;
                let val = cur.u64()?;
                store.buckets[b].entries.push(Entry { idx, val, level: 0, links: vec![] });
                store.len += 1;
            }
        }
        for b in 0..r as usize {
            for l in 0..store.buckets[b].counters.len() {
                store.buckets[b].counters[l] = cur.u64()?;
            }
        }
        for l in 0..store.start_links.len() {
            store.start_links[l] = cur.u64()?;
        }
        for b in 0..r as usize {
            for pos in 0..sizes[b] {
                let level = cur.u8()?;
                let links =
                    (0..=level as usize).map(|_| cur.u64()).collect::<Result<Vec<u64>>>()?;
                let e = &mut store.buckets[b].entries[pos];
                e.level = level;
                e.links = links;
            }
        }
        store.v = cur.u64()?;
        if cur.at != bytes.len() {
            return Err(Error::BadEncoding("trailing bytes".into()));
        }
        Ok(store)
    }

    /// Recount of every dyadic counter from the bucket loads.
    fn recount(&self) -> Vec<Vec<u64>> {
        let r = self.params.r as usize;
        let mut prefix = vec![0u64; r + 1];
        for j in 1..=r {
            prefix[j] = prefix[j - 1] + self.buckets[j - 1].entries.len() as u64;
        }
        (1..=r as u64)
            .map(|j| {
                let levels = (j.trailing_zeros()).min(self.counter_cap) + 1;
                (0..levels)
                    .map(|l| {
                        let lo = j - (1 << l);
                        prefix[j as usize] - prefix[lo as usize]
                    })
                    .collect()
            })
            .collect()
    }

    #[cfg(debug_assertions)]
    fn assert_counters_consistent(&self) {
        let expect = self.recount();
        for (b, want) in self.buckets.iter().zip(&expect) {
            debug_assert_eq!(&b.counters, want, "dyadic counters diverged");
        }
    }

    /// Full structural validation: counters, chain ordering, chain nesting,
    /// start links, and the v counter. Test support.
    pub fn validate(&self) -> Result<()> {
        let expect = self.recount();
        for (jb, (b, want)) in self.buckets.iter().zip(&expect).enumerate() {
            if &b.counters != want {
                return Err(Error::BadEncoding(format!("counters wrong in bucket {}", jb + 1)));
            }
            if !b.entries.windows(2).all(|w| w[0].idx < w[1].idx) {
                return Err(Error::BadEncoding(format!("bucket {} not sorted", jb + 1)));
            }
        }
        let mut keyed: Vec<(u64, u64, u8)> = self
            .buckets
            .iter()
            .flat_map(|b| b.entries.iter().map(|e| (e.val, e.idx, e.level)))
            .collect();
        keyed.sort_unstable();
        for l in 0..=self.l_max as usize {
            let expected_chain: Vec<u64> = keyed
                .iter()
                .filter(|(_, _, lev)| *lev as usize >= l)
                .map(|(_, idx, _)| *idx)
                .collect();
            let mut actual = Vec::new();
            let mut cur = self.start_links[l];
            while cur != 0 {
                actual.push(cur);
                let b = (self.bucket_number(cur) - 1) as usize;
                let e = self.buckets[b]
                    .entries
                    .iter()
                    .find(|e| e.idx == cur)
                    .ok_or_else(|| Error::BadEncoding(format!("dangling link to {cur}")))?;
                cur = e.links[l];
                if actual.len() > keyed.len() {
                    return Err(Error::BadEncoding(format!("cycle in level-{l} list")));
                }
            }
            if actual != expected_chain {
                return Err(Error::BadEncoding(format!("level-{l} chain mismatch")));
            }
        }
        let mut by_value = std::collections::HashMap::new();
        for (val, _, _) in &keyed {
            *by_value.entry(*val).or_insert(0u64) += 1;
        }
        let v_true = by_value.values().filter(|&&c| c >= self.params.k as u64).count() as u64;
        if v_true != self.v {
            return Err(Error::BadEncoding(format!("v = {} but recount = {v_true}", self.v)));
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::BadEncoding("truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Outcome of a random insert/remove workload.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FailureStats {
    pub ops: u64,
    pub failures: u64,
    pub fraction: f64,
    pub max_consumed: u64,
    pub budget: u64,
}

/// Runs `ops` random inserts/removes and reports the fraction that exceeded
/// the step budget or overflowed a bucket.
pub fn measure_failure_rate(
    params: StoreParams,
    ops: u64,
    workload_seed: u64,
) -> Result<FailureStats> {
    let mut store = CanonicalStore::new(params)?;
    let mut rng = ChaCha20Rng::seed_from_u64(workload_seed);
    let mut present: Vec<u64> = Vec::new();
    let target = (params.r * 3 / 4).max(1);
    let mut failures = 0u64;
    let mut max_consumed = 0u64;
    for _ in 0..ops {
        let insert =
            present.is_empty() || (present.len() < target as usize && rng.gen_bool(0.6));
        if insert {
            let i = loop {
                let cand = rng.gen_range(1..=params.n);
                if !present.contains(&cand) {
                    break cand;
                }
            };
            let x = rng.gen_range(1..=params.m);
            match store.insert(i, x) {
                Ok(()) => present.push(i),
                Err(Error::BudgetExceeded { .. } | Error::BucketOverflow { .. }) => failures += 1,
                Err(e) => return Err(e),
            }
        } else {
            let at = rng.gen_range(0..present.len());
            let i = present.swap_remove(at);
            match store.remove(i) {
                Ok(()) => {}
                Err(Error::BudgetExceeded { .. }) => {
                    failures += 1;
                    present.push(i);
                }
                Err(e) => return Err(e),
            }
        }
        max_consumed = max_consumed.max(store.budget.consumed);
    }
    Ok(FailureStats {
        ops,
        failures,
        fraction: failures as f64 / ops as f64,
        max_consumed,
        budget: store.budget.budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_store() -> CanonicalStore {
        CanonicalStore::new(StoreParams::new(64, 64, 8, 2, 7).unwrap()).unwrap()
    }

    #[test]
    fn bucket_formula_matches_hand_values() {
        // N = 12, r = 3: h(2) = 1, h(5) = 2, h(9) = 3
        let s = CanonicalStore::new(StoreParams::new(12, 12, 3, 2, 0).unwrap()).unwrap();
        assert_eq!(s.bucket_number(2), 1);
        assert_eq!(s.bucket_number(5), 2);
        assert_eq!(s.bucket_number(9), 3);
        // i = N would land past the last bucket; it is clamped
        assert_eq!(s.bucket_number(12), 3);
    }

    #[test]
    fn insert_then_lookup() {
        let mut s = small_store();
        s.insert(17, 3).unwrap();
        let blob = s.serialize_canonical();
        assert_eq!(s.lookup(17), Some(3));
        assert_eq!(s.lookup(18), None);
        assert_eq!(s.serialize_canonical(), blob); // lookups never mutate
        s.validate().unwrap();
    }

    #[test]
    fn duplicate_and_missing_are_errors() {
        let mut s = small_store();
        s.insert(17, 3).unwrap();
        assert!(matches!(s.insert(17, 5), Err(Error::DuplicateIndex(17))));
        assert!(matches!(s.remove(18), Err(Error::MissingIndex(18))));
        assert!(!s.budget.failed);
    }

    #[test]
    fn collision_counter_tracks_k_groups() {
        let mut s = small_store();
        s.insert(1, 9).unwrap();
        assert!(!s.has_k_collision());
        s.insert(20, 9).unwrap();
        assert!(s.has_k_collision());
        assert_eq!(s.collision_values(), 1);
        s.insert(40, 9).unwrap(); // third copy: still one distinct value
        assert_eq!(s.collision_values(), 1);
        s.remove(20).unwrap();
        assert!(s.has_k_collision()); // two copies remain
        s.remove(40).unwrap();
        assert!(!s.has_k_collision());
        s.validate().unwrap();
    }

    #[test]
    fn remove_restores_serialization() {
        let mut s = small_store();
        s.insert(5, 2).unwrap();
        s.insert(33, 4).unwrap();
        let before = s.serialize_canonical();
        s.insert(17, 4).unwrap();
        s.remove(17).unwrap();
        assert_eq!(s.serialize_canonical(), before);
    }

    #[test]
    fn insertion_order_is_invisible() {
        let items = [(3u64, 5u64), (1, 7), (2, 5), (40, 1), (22, 7), (9, 2)];
        let mut blobs = std::collections::HashSet::new();
        let orders: Vec<Vec<usize>> = vec![
            vec![0, 1, 2, 3, 4, 5],
            vec![5, 4, 3, 2, 1, 0],
            vec![2, 0, 5, 1, 4, 3],
            vec![3, 5, 0, 4, 2, 1],
        ];
        for order in orders {
            let mut s = small_store();
            for &o in &order {
                let (i, x) = items[o];
                s.insert(i, x).unwrap();
            }
            s.validate().unwrap();
            blobs.insert(s.serialize_canonical());
        }
        assert_eq!(blobs.len(), 1);
    }

    #[test]
    fn all_six_orders_of_three_inserts_agree() {
        let items = [(3u64, 9u64), (1, 9), (2, 4)];
        let perms =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut blobs = std::collections::HashSet::new();
        for perm in perms {
            let mut s = small_store();
            for p in perm {
                s.insert(items[p].0, items[p].1).unwrap();
            }
            blobs.insert(s.serialize_canonical());
        }
        assert_eq!(blobs.len(), 1);
    }

    #[test]
    fn different_seed_different_serialization() {
        let mut a = CanonicalStore::new(StoreParams::new(64, 64, 8, 2, 1).unwrap()).unwrap();
        let mut b = CanonicalStore::new(StoreParams::new(64, 64, 8, 2, 2).unwrap()).unwrap();
        for (i, x) in [(3u64, 5u64), (9, 5), (20, 1)] {
            a.insert(i, x).unwrap();
            b.insert(i, x).unwrap();
        }
        assert_ne!(a.serialize_canonical(), b.serialize_canonical());
    }

    #[test]
    fn serialization_roundtrips() {
        let mut s = small_store();
        for (i, x) in [(3u64, 5u64), (9, 5), (20, 1), (33, 60), (64, 2)] {
            s.insert(i, x).unwrap();
        }
        let blob = s.serialize_canonical();
        let back = CanonicalStore::deserialize_canonical(&blob).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.serialize_canonical(), blob);
        back.validate().unwrap();
        assert!(CanonicalStore::deserialize_canonical(&blob[..blob.len() - 1]).is_err());
        let mut bad_magic = blob.clone();
        bad_magic[0] ^= 0xff;
        assert!(CanonicalStore::deserialize_canonical(&bad_magic).is_err());
    }

    #[test]
    fn rank_is_identity_on_singleton_buckets() {
        // store {2, 5, 9} in N = 12, r = 3: one entry per bucket
        let mut s = CanonicalStore::new(StoreParams::new(12, 12, 3, 2, 0).unwrap()).unwrap();
        s.insert(2, 4).unwrap();
        s.insert(5, 9).unwrap();
        s.insert(9, 1).unwrap();
        assert_eq!(s.rank(2).unwrap(), 1);
        assert_eq!(s.rank(5).unwrap(), 2);
        assert_eq!(s.rank(9).unwrap(), 3);
    }

    #[test]
    fn rank_orders_within_bucket_by_index() {
        let mut s = small_store();
        // 17 and 18 share bucket ⌊i·8/64⌋+1 = 3
        s.insert(18, 1).unwrap();
        s.insert(17, 2).unwrap();
        assert!(s.rank(17).unwrap() < s.rank(18).unwrap());
    }

    #[test]
    fn ranks_form_a_bijection() {
        let mut s =
            CanonicalStore::new(StoreParams::new(256, 256, 16, 2, 3).unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut present = Vec::new();
        while present.len() < 14 {
            let i = rng.gen_range(1..=256);
            if !present.contains(&i) {
                s.insert(i, rng.gen_range(1..=256)).unwrap();
                present.push(i);
            }
        }
        let mut ranks: Vec<u64> = present.iter().map(|&i| s.rank(i).unwrap()).collect();
        ranks.sort_unstable();
        let expect: Vec<u64> = (1..=present.len() as u64).collect();
        assert_eq!(ranks, expect);
        // and the enumeration order agrees with rank
        let in_order = s.indices_in_rank_order();
        for (pos, &i) in in_order.iter().enumerate() {
            assert_eq!(s.rank(i).unwrap(), pos as u64 + 1);
        }
    }

    #[test]
    fn level_distribution_is_geometric() {
        let s =
            CanonicalStore::new(StoreParams::new(100_000, 100_000, 1024, 2, 11).unwrap())
                .unwrap();
        let samples = 100_000u64;
        let mut counts = [0u64; 4];
        for i in 1..=samples {
            let l = s.level_of(i);
            if (l as usize) < counts.len() {
                counts[l as usize] += 1;
            }
        }
        for (j, &c) in counts.iter().enumerate() {
            let p = 0.5f64.powi(j as i32 + 1);
            let mean = samples as f64 * p;
            let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
            let dev = (c as f64 - mean).abs();
            assert!(dev < 3.0 * sigma, "level {j}: count {c}, mean {mean:.1}, σ {sigma:.1}");
        }
    }

    #[test]
    fn tiny_budget_fails_and_rolls_back() {
        let params = StoreParams::new(64, 64, 8, 2, 7).unwrap().with_budget_c(1e-9);
        let mut s = CanonicalStore::new(params).unwrap();
        let before = s.serialize_canonical();
        let err = s.insert(17, 3).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert!(s.budget.failed);
        assert_eq!(s.serialize_canonical(), before);
        assert_eq!(s.lookup(17), None);
    }

    #[test]
    fn bucket_overflow_fails_and_rolls_back() {
        // N = 1024 → ⌈log₂N⌉ = 10 entries per bucket; with r = 32 a single
        // bucket covers 32 indices, so an adversarial set can overflow it.
        let params = StoreParams::new(1024, 1024, 32, 2, 7).unwrap();
        let mut s = CanonicalStore::new(params).unwrap();
        for i in 1..=10u64 {
            s.insert(i, i).unwrap(); // all land in bucket 1
        }
        let before = s.serialize_canonical();
        let err = s.insert(11, 11).unwrap_err();
        assert!(matches!(err, Error::BucketOverflow { bucket: 1 }));
        assert!(s.budget.failed);
        assert_eq!(s.serialize_canonical(), before);
    }

    #[test]
    fn failure_rate_zero_at_default_budget() {
        let params = StoreParams::new(1024, 1024, 128, 2, 42).unwrap();
        let stats = measure_failure_rate(params, 2000, 9).unwrap();
        assert_eq!(stats.failures, 0, "stats = {stats:?}");
        assert!(stats.max_consumed <= stats.budget);
    }

    #[test]
    fn failure_rate_monotone_in_budget() {
        let base = StoreParams::new(256, 256, 32, 2, 13).unwrap();
        let mut last = f64::INFINITY;
        for c in [1e-9, 2e-3, 5e-3, 1.0] {
            let stats = measure_failure_rate(base.with_budget_c(c), 500, 21).unwrap();
            assert!(
                stats.fraction <= last + 1e-12,
                "failure fraction rose from {last} to {} at c = {c}",
                stats.fraction
            );
            last = stats.fraction;
        }
        let tiny = measure_failure_rate(base.with_budget_c(1e-9), 500, 21).unwrap();
        assert!(tiny.fraction > 0.99);
    }
}
