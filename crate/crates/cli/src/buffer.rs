//! Rolling 24-hour window of cluster vectors with snapshot reads.

use std::sync::{Arc, RwLock};

use parkcast_core::preprocess::ClusterVector;

/// 24 hours of 15-minute ticks.
pub const BUFFER_STEPS: usize = 96;

/// Contiguous run of the most recent ticks, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub vectors: Vec<ClusterVector>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// The last `n` ticks, if that many are buffered.
    pub fn tail(&self, n: usize) -> Option<&[ClusterVector]> {
        self.vectors.len().checked_sub(n).map(|lo| &self.vectors[lo..])
    }
}

/// Single-writer, many-reader buffer. Readers get an immutable snapshot;
/// the writer swaps in a new one, so a reader never sees a half update.
#[derive(Debug, Default)]
pub struct RollingBuffer {
    current: RwLock<Arc<Snapshot>>,
}

/// What [`RollingBuffer::push`] did with a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pushed {
    Appended,
    /// A gap in step indices; the buffer restarted from this vector.
    Reset,
    /// At or before the newest buffered step; dropped.
    Stale,
}

impl RollingBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.current.read().expect("buffer lock poisoned"))
    }

    pub fn push(&self, v: ClusterVector) -> Pushed {
        let mut guard = self.current.write().expect("buffer lock poisoned");
        let (vectors, what) = match guard.vectors.last() {
            Some(last) if v.step_index <= last.step_index => return Pushed::Stale,
            Some(last) if v.step_index == last.step_index + 1 => {
                let keep = guard.vectors.len().min(BUFFER_STEPS - 1);
                let mut next = guard.vectors[guard.vectors.len() - keep..].to_vec();
                next.push(v);
                (next, Pushed::Appended)
            }
            Some(_) => (vec![v], Pushed::Reset),
            None => (vec![v], Pushed::Appended),
        };
        *guard = Arc::new(Snapshot { vectors });
        what
    }
}
