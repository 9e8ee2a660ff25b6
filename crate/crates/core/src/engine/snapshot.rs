//! Single-writer snapshot hand-off between the sensor and audio contexts.
//!
//! The writer takes a short lock to replace the value. The reader only ever
//! `try_lock`s: if the writer happens to hold the lock it keeps its previous
//! copy, so a read never blocks and never observes a partial update.

use std::sync::{Arc, Mutex, TryLockError};

pub fn snapshot_pair<T: Copy + Send>(initial: T) -> (SnapshotWriter<T>, SnapshotReader<T>) {
    let cell = Arc::new(Mutex::new(initial));
    (
        SnapshotWriter {
            cell: Arc::clone(&cell),
        },
        SnapshotReader {
            cell,
            cached: initial,
        },
    )
}

pub struct SnapshotWriter<T> {
    cell: Arc<Mutex<T>>,
}

impl<T: Copy> SnapshotWriter<T> {
    pub fn publish(&self, value: T) {
        let mut guard = self.cell.lock().unwrap_or_else(|e| e.into_inner());
        *guard = value;
    }
}

pub struct SnapshotReader<T> {
    cell: Arc<Mutex<T>>,
    cached: T,
}

impl<T: Copy> SnapshotReader<T> {
    /// Latest published value, or the previous one if a publish is in flight.
    pub fn read(&mut self) -> T {
        match self.cell.try_lock() {
            Ok(guard) => self.cached = *guard,
            Err(TryLockError::Poisoned(e)) => self.cached = *e.into_inner(),
            Err(TryLockError::WouldBlock) => {}
        }
        self.cached
    }
}
