use std::sync::{Arc, Mutex};

/// One published frequency field: `U^{stamp}(z_sender)`.
#[derive(Debug, Clone)]
pub struct Message {
    pub sender: usize,
    /// Sender's local iteration count when the value was produced; 0 is the
    /// transform of the initial data.
    pub stamp: u64,
    pub values: Arc<Vec<f64>>,
}

/// Single-slot latest-value register for one ordered worker pair.
///
/// Sending overwrites; a delivery carrying an older stamp than the current
/// content is dropped, so successive reads never go back in time.
#[derive(Debug, Clone)]
pub struct Mailbox {
    slot: Message,
}

impl Mailbox {
    pub fn new(initial: Message) -> Self {
        Mailbox { slot: initial }
    }

    /// Returns `true` when the message replaced the slot content.
    pub fn deliver(&mut self, msg: Message) -> bool {
        if msg.stamp > self.slot.stamp {
            self.slot = msg;
            true
        } else {
            false
        }
    }

    pub fn read(&self) -> &Message {
        &self.slot
    }

    pub fn stamp(&self) -> u64 {
        self.slot.stamp
    }
}

/// Thread-safe variant used by the concurrent engine. The lock only guards
/// a pointer swap.
#[derive(Debug)]
pub struct SharedMailbox {
    inner: Mutex<Mailbox>,
}

impl SharedMailbox {
    pub fn new(initial: Message) -> Self {
        SharedMailbox {
            inner: Mutex::new(Mailbox::new(initial)),
        }
    }

    pub fn deliver(&self, msg: Message) -> bool {
        self.inner.lock().expect("mailbox poisoned").deliver(msg)
    }

    pub fn read(&self) -> Message {
        self.inner.lock().expect("mailbox poisoned").read().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(stamp: u64, v: f64) -> Message {
        Message {
            sender: 1,
            stamp,
            values: Arc::new(vec![v]),
        }
    }

    #[test]
    fn keeps_newest_stamp() {
        let mut m = Mailbox::new(msg(0, 0.0));
        assert!(m.deliver(msg(3, 3.0)));
        assert!(!m.deliver(msg(2, 2.0)));
        assert!(!m.deliver(msg(3, 9.0)));
        assert_eq!(m.stamp(), 3);
        assert_eq!(m.read().values[0], 3.0);
        assert!(m.deliver(msg(5, 5.0)));
        assert_eq!(m.read().values[0], 5.0);
    }

    #[test]
    fn shared_mailbox_across_threads() {
        let m = SharedMailbox::new(msg(0, 0.0));
        std::thread::scope(|s| {
            for t in 1..=4u64 {
                let m = &m;
                s.spawn(move || {
                    for k in 0..50 {
                        m.deliver(msg(t * 100 + k, k as f64));
                    }
                });
            }
        });
        assert_eq!(m.read().stamp, 449);
    }
}
