//! Tagged atomic links and the instrumented atomic primitives used by the
//! graph algorithms.
//!
//! A link is one machine word holding a node address with the removal mark
//! stolen from the low bit. Nodes are at least 8-byte aligned, so the three
//! low bits of every address are free; bit 0 carries the mark and bits 1..=2
//! are reserved and always zero.

use std::cell::Cell;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, AtomicU8, AtomicUsize, Ordering};

const MARK_BIT: usize = 0b001;
const RESERVED_BITS: usize = 0b110;
const TAG_MASK: usize = MARK_BIT | RESERVED_BITS;

/// A snapshot of a [`TaggedLink`]: target address plus mark flag.
pub struct LinkWord<T> {
    raw: usize,
    _marker: PhantomData<*const T>,
}

// A plain word; dereferencing it is already `unsafe`.
unsafe impl<T> Send for LinkWord<T> {}
unsafe impl<T> Sync for LinkWord<T> {}

impl<T> Clone for LinkWord<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for LinkWord<T> {}

impl<T> PartialEq for LinkWord<T> {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl<T> Eq for LinkWord<T> {}

impl<T> std::fmt::Debug for LinkWord<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinkWord")
            .field("target", &self.as_ptr())
            .field("marked", &self.is_marked())
            .finish()
    }
}

impl<T> LinkWord<T> {
    pub const fn null() -> Self {
        Self {
            raw: 0,
            _marker: PhantomData,
        }
    }

    /// Builds an unmarked word for `ptr`.
    ///
    /// Panics if the pointer is not 8-byte aligned, since the tag bits would
    /// collide with the address.
    pub fn from_ptr(ptr: *const T) -> Self {
        let raw = ptr as usize;
        assert_eq!(raw & TAG_MASK, 0, "link target must be 8-byte aligned");
        Self {
            raw,
            _marker: PhantomData,
        }
    }

    #[inline]
    fn from_raw(raw: usize) -> Self {
        debug_assert_eq!(raw & RESERVED_BITS, 0, "reserved tag bits must stay zero");
        Self {
            raw,
            _marker: PhantomData,
        }
    }

    #[inline]
    pub fn raw(self) -> usize {
        self.raw
    }

    #[inline]
    pub fn as_ptr(self) -> *const T {
        (self.raw & !TAG_MASK) as *const T
    }

    #[inline]
    pub fn is_null(self) -> bool {
        self.as_ptr().is_null()
    }

    /// Dereferences the target.
    ///
    /// # Safety
    /// The target must be non-null and protected from reclamation for `'a`
    /// (in practice: read under a pinned epoch guard that outlives `'a`).
    #[inline]
    pub unsafe fn deref<'a>(self) -> &'a T {
        &*self.as_ptr()
    }
}

/// Same target, mark set.
#[inline]
pub fn mark_ref<T>(word: LinkWord<T>) -> LinkWord<T> {
    LinkWord::from_raw(word.raw | MARK_BIT)
}

/// Same target, mark cleared.
#[inline]
pub fn unmark_ref<T>(word: LinkWord<T>) -> LinkWord<T> {
    LinkWord::from_raw(word.raw & !MARK_BIT)
}

#[inline]
pub fn is_marked<T>(word: LinkWord<T>) -> bool {
    word.raw & MARK_BIT != 0
}

impl<T> LinkWord<T> {
    #[inline]
    pub fn is_marked(self) -> bool {
        is_marked(self)
    }

    #[inline]
    pub fn marked(self) -> Self {
        mark_ref(self)
    }

    #[inline]
    pub fn unmarked(self) -> Self {
        unmark_ref(self)
    }
}

/// An atomic cell holding a [`LinkWord`]; target and mark change together.
pub struct TaggedLink<T> {
    cell: AtomicUsize,
    _marker: PhantomData<*const T>,
}

// SAFETY: the cell only stores an address; access to the pointee is governed
// by the reclamation protocol, not by this type.
unsafe impl<T> Send for TaggedLink<T> {}
unsafe impl<T> Sync for TaggedLink<T> {}

impl<T> TaggedLink<T> {
    pub fn new(word: LinkWord<T>) -> Self {
        Self {
            cell: AtomicUsize::new(word.raw),
            _marker: PhantomData,
        }
    }

    pub fn null() -> Self {
        Self::new(LinkWord::null())
    }

    #[inline]
    pub fn load(&self) -> LinkWord<T> {
        LinkWord::from_raw(self.cell.load(Ordering::SeqCst))
    }

    /// Plain store, only legal before the owning node is published.
    #[inline]
    pub fn store_unpublished(&self, word: LinkWord<T>) {
        self.cell.store(word.raw, Ordering::SeqCst);
    }

    /// Compare-and-swap of the whole (target, mark) word.
    ///
    /// Callers must hold an epoch guard. A marked cell is terminal: in debug
    /// builds a CAS that expects a marked word trips an assertion.
    #[inline]
    pub fn cas(&self, expected: LinkWord<T>, desired: LinkWord<T>) -> bool {
        debug_assert!(
            !expected.is_marked(),
            "CAS against a marked (terminal) link"
        );
        chaos::point();
        count_cas();
        self.cell
            .compare_exchange(expected.raw, desired.raw, Ordering::SeqCst, Ordering::SeqCst)
            .is_ok()
    }
}

/// Free-function form of [`TaggedLink::cas`].
#[inline]
pub fn cas_link<T>(cell: &TaggedLink<T>, expected: LinkWord<T>, desired: LinkWord<T>) -> bool {
    cell.cas(expected, desired)
}

/// Counted CAS on a small state word.
#[inline]
pub(crate) fn cas_state(cell: &AtomicU8, expected: u8, desired: u8) -> bool {
    chaos::point();
    count_cas();
    cell.compare_exchange(expected, desired, Ordering::SeqCst, Ordering::SeqCst)
        .is_ok()
}

/// Fetch-and-add on an edge-modification counter; returns the previous value.
#[inline]
pub fn faa(counter: &AtomicU64, delta: u64) -> u64 {
    chaos::point();
    count_faa();
    counter.fetch_add(delta, Ordering::SeqCst)
}

thread_local! {
    static CAS_COUNT: Cell<u64> = const { Cell::new(0) };
    static FAA_COUNT: Cell<u64> = const { Cell::new(0) };
    static STEP_COUNT: Cell<u64> = const { Cell::new(0) };
}

#[inline]
fn count_cas() {
    CAS_COUNT.with(|c| c.set(c.get() + 1));
}

#[inline]
fn count_faa() {
    FAA_COUNT.with(|c| c.set(c.get() + 1));
}

/// Counts one node visited by a traversal; also a perturbation point.
#[inline]
pub(crate) fn count_step() {
    chaos::point();
    STEP_COUNT.with(|c| c.set(c.get() + 1));
}

/// Per-thread tallies of the atomic read-modify-write operations issued by the
/// graph algorithms, plus traversal steps. Only the calling thread's work is
/// counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub cas: u64,
    pub faa: u64,
    pub steps: u64,
}

impl OpCounters {
    pub fn current() -> Self {
        Self {
            cas: CAS_COUNT.with(Cell::get),
            faa: FAA_COUNT.with(Cell::get),
            steps: STEP_COUNT.with(Cell::get),
        }
    }

    /// Counts accumulated since `earlier`.
    pub fn since(self, earlier: OpCounters) -> OpCounters {
        OpCounters {
            cas: self.cas - earlier.cas,
            faa: self.faa - earlier.faa,
            steps: self.steps - earlier.steps,
        }
    }

    pub fn rmw(self) -> u64 {
        self.cas + self.faa
    }
}

/// Random scheduling perturbation for tests on machines with few cores.
///
/// When enabled on a thread, every CAS/FAA site and traversal step yields
/// the processor with the configured probability, which makes operations
/// overlap even when threads share a single core.
pub mod chaos {
    use std::cell::Cell;

    thread_local! {
        // per-mille yield probability; 0 disables
        static RATE: Cell<u32> = const { Cell::new(0) };
        static STATE: Cell<u64> = const { Cell::new(0x9E37_79B9_7F4A_7C15) };
    }

    /// Enables perturbation on the calling thread with the given per-mille
    /// rate; `seed` drives the yield decisions.
    pub fn enable(per_mille: u32, seed: u64) {
        RATE.with(|r| r.set(per_mille.min(1000)));
        STATE.with(|s| s.set(seed | 1));
    }

    pub fn disable() {
        RATE.with(|r| r.set(0));
    }

    #[inline]
    pub(crate) fn point() {
        let rate = RATE.with(Cell::get);
        if rate == 0 {
            return;
        }
        let roll = STATE.with(|s| {
            // xorshift64
            let mut x = s.get();
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            s.set(x);
            x
        });
        if (roll % 1000) < u64::from(rate) {
            std::thread::yield_now();
        }
    }
}
