//! Bounded blocking queue that evicts its oldest item when full.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pop<T> {
    Item(T),
    TimedOut,
    /// Closed and drained.
    Closed,
}

#[derive(Debug)]
struct Inner<T> {
    items: VecDeque<T>,
    closed: bool,
    evicted: u64,
}

#[derive(Debug)]
pub struct DropOldestQueue<T> {
    inner: Mutex<Inner<T>>,
    ready: Condvar,
    capacity: usize,
}

impl<T> DropOldestQueue<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        DropOldestQueue {
            inner: Mutex::new(Inner {
                items: VecDeque::with_capacity(capacity),
                closed: false,
                evicted: 0,
            }),
            ready: Condvar::new(),
            capacity,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner<T>> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Appends `item`, evicting the oldest entry if full. Returns the evicted
    /// item. Items pushed after [`close`](Self::close) are discarded.
    pub fn push(&self, item: T) -> Option<T> {
        let mut g = self.lock();
        if g.closed {
            return None;
        }
        let evicted = if g.items.len() == self.capacity {
            g.evicted += 1;
            g.items.pop_front()
        } else {
            None
        };
        g.items.push_back(item);
        self.ready.notify_one();
        evicted
    }

    pub fn pop_timeout(&self, timeout: Duration) -> Pop<T> {
        let g = self.lock();
        let (mut g, _) = self
            .ready
            .wait_timeout_while(g, timeout, |i| i.items.is_empty() && !i.closed)
            .unwrap_or_else(|p| p.into_inner());
        match g.items.pop_front() {
            Some(item) => Pop::Item(item),
            None if g.closed => Pop::Closed,
            None => Pop::TimedOut,
        }
    }

    /// Blocks until an item arrives or the queue is closed and drained.
    pub fn pop(&self) -> Option<T> {
        let g = self.lock();
        let mut g = self
            .ready
            .wait_while(g, |i| i.items.is_empty() && !i.closed)
            .unwrap_or_else(|p| p.into_inner());
        g.items.pop_front()
    }

    pub fn close(&self) {
        self.lock().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn len(&self) -> usize {
        self.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Items evicted by backpressure.
    pub fn evicted(&self) -> u64 {
        self.lock().evicted
    }
}
