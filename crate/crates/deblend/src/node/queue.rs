//! Bounded hand-off queue with a drop-oldest overflow policy: in a 3 ms
//! control loop a stale decision is worse than a missing one, so overload
//! evicts the front (oldest) entry, never the newest.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

#[derive(Debug)]
pub struct BoundedQueue<T> {
    inner: Mutex<VecDeque<T>>,
    available: Condvar,
    space: Condvar,
    capacity: usize,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            inner: Mutex::new(VecDeque::with_capacity(capacity)),
            available: Condvar::new(),
            space: Condvar::new(),
            capacity,
        }
    }

    /// Pushes without blocking; when full, evicts and returns the oldest
    /// entry to make room.
    pub fn force_push(&self, item: T) -> Option<T> {
        let mut q = self.inner.lock().unwrap();
        let evicted = if q.len() == self.capacity {
            q.pop_front()
        } else {
            None
        };
        q.push_back(item);
        self.available.notify_one();
        evicted
    }

    /// Blocks until there is room, then pushes. Used for control messages
    /// that must not evict data.
    pub fn push_wait(&self, item: T) {
        let mut q = self.inner.lock().unwrap();
        while q.len() == self.capacity {
            q = self.space.wait(q).unwrap();
        }
        q.push_back(item);
        self.available.notify_one();
    }

    /// Blocks until an item is available.
    pub fn pop_wait(&self) -> T {
        let mut q = self.inner.lock().unwrap();
        loop {
            if let Some(item) = q.pop_front() {
                self.space.notify_one();
                return item;
            }
            q = self.available.wait(q).unwrap();
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_push_evicts_oldest_never_newest() {
        let q = BoundedQueue::new(4);
        for i in 0..4 {
            assert!(q.force_push(i).is_none());
        }
        // full: pushing 4 evicts 0, pushing 5 evicts 1
        assert_eq!(q.force_push(4), Some(0));
        assert_eq!(q.force_push(5), Some(1));
        // remaining order is FIFO over the survivors
        let drained: Vec<i32> = (0..4).map(|_| q.pop_wait()).collect();
        assert_eq!(drained, vec![2, 3, 4, 5]);
    }

    #[test]
    fn pop_wait_blocks_until_push() {
        use std::sync::Arc;
        let q = Arc::new(BoundedQueue::new(2));
        let q2 = Arc::clone(&q);
        let handle = std::thread::spawn(move || q2.pop_wait());
        std::thread::sleep(std::time::Duration::from_millis(20));
        q.force_push(99);
        assert_eq!(handle.join().unwrap(), 99);
    }

    #[test]
    fn push_wait_respects_capacity() {
        use std::sync::Arc;
        let q = Arc::new(BoundedQueue::new(1));
        q.push_wait(1);
        let q2 = Arc::clone(&q);
        let handle = std::thread::spawn(move || {
            q2.push_wait(2); // blocks until the 1 is popped
        });
        std::thread::sleep(std::time::Duration::from_millis(20));
        assert_eq!(q.len(), 1);
        assert_eq!(q.pop_wait(), 1);
        handle.join().unwrap();
        assert_eq!(q.pop_wait(), 2);
    }
}
