use std::sync::{Condvar, Mutex};

/// Counting semaphore that admits waiters in arrival order.
#[derive(Debug)]
pub struct FairSemaphore {
    state: Mutex<Tickets>,
    cond: Condvar,
    permits: usize,
}

#[derive(Debug, Default)]
struct Tickets {
    next_ticket: u64,
    serving: u64,
    in_use: usize,
}

impl FairSemaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            state: Mutex::new(Tickets::default()),
            cond: Condvar::new(),
            permits: permits.max(1),
        }
    }

    pub fn permits(&self) -> usize {
        self.permits
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        let ticket = st.next_ticket;
        st.next_ticket += 1;
        while st.serving != ticket || st.in_use >= self.permits {
            st = self.cond.wait(st).unwrap();
        }
        st.serving += 1;
        st.in_use += 1;
        // the next ticket holder may also fit
        self.cond.notify_all();
        Permit { sem: self }
    }

    /// Number of permits currently held.
    pub fn in_use(&self) -> usize {
        self.state.lock().unwrap().in_use
    }
}

pub struct Permit<'a> {
    sem: &'a FairSemaphore,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.sem.state.lock().unwrap();
        st.in_use -= 1;
        self.sem.cond.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn never_exceeds_permits() {
        let sem = Arc::new(FairSemaphore::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let live = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let (sem, peak, live) = (sem.clone(), peak.clone(), live.clone());
                s.spawn(move || {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(std::time::Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(sem.in_use(), 0);
    }
}
