//! Bounded producer/consumer queue that drops the oldest item on overflow.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Debug)]
struct Inner<T> {
    items: VecDeque<T>,
    closed: bool,
}

/// Cloneable handle; all clones share one queue.
#[derive(Debug)]
pub struct BoundedQueue<T> {
    inner: Arc<(Mutex<Inner<T>>, Condvar)>,
    drops: Arc<AtomicU64>,
    capacity: usize,
}

impl<T> Clone for BoundedQueue<T> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
            drops: Arc::clone(&self.drops),
            capacity: self.capacity,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Pop<T> {
    Item(T),
    TimedOut,
    Closed,
}

impl<T> BoundedQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            inner: Arc::new((
                Mutex::new(Inner {
                    items: VecDeque::with_capacity(capacity),
                    closed: false,
                }),
                Condvar::new(),
            )),
            drops: Arc::new(AtomicU64::new(0)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Never blocks. Returns false once the queue is closed.
    pub fn push(&self, item: T) -> bool {
        let (lock, cvar) = &*self.inner;
        let mut g = lock.lock().expect("queue mutex poisoned");
        if g.closed {
            return false;
        }
        if g.items.len() == self.capacity {
            g.items.pop_front();
            self.drops.fetch_add(1, Ordering::Relaxed);
        }
        g.items.push_back(item);
        cvar.notify_one();
        true
    }

    /// Blocks up to `timeout`. Items pushed before `close` are still drained.
    pub fn pop_timeout(&self, timeout: Duration) -> Pop<T> {
        let (lock, cvar) = &*self.inner;
        let g = lock.lock().expect("queue mutex poisoned");
        let (mut g, _) = cvar
            .wait_timeout_while(g, timeout, |q| q.items.is_empty() && !q.closed)
            .expect("queue mutex poisoned");
        match g.items.pop_front() {
            Some(v) => Pop::Item(v),
            None if g.closed => Pop::Closed,
            None => Pop::TimedOut,
        }
    }

    pub fn close(&self) {
        let (lock, cvar) = &*self.inner;
        lock.lock().expect("queue mutex poisoned").closed = true;
        cvar.notify_all();
    }

    pub fn len(&self) -> usize {
        self.inner.0.lock().expect("queue mutex poisoned").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn drop_count(&self) -> u64 {
        self.drops.load(Ordering::Relaxed)
    }
}
