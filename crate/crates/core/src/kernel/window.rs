//! Sliding-window counter over real-packet timestamps.

use std::collections::VecDeque;

use crate::kernel::KernelError;
use crate::num::Scalar;

/// Counts the real packets seen in the trailing window `(t - window, t]`.
///
/// Drives the soft start/stop condition: a page load is considered live
/// while enough real packets appear in the window.
#[derive(Debug, Clone)]
pub struct WindowCounter<T> {
    window: T,
    events: VecDeque<T>,
    last: Option<T>,
}

impl<T: Scalar> WindowCounter<T> {
    pub fn new(window: T) -> Self {
        WindowCounter {
            window,
            events: VecDeque::new(),
            last: None,
        }
    }

    pub fn window(&self) -> T {
        self.window
    }

    fn advance(&mut self, t: T) -> Result<(), KernelError> {
        if let Some(last) = self.last {
            if t < last {
                return Err(KernelError::TimeRegression {
                    last: last.to_f64_lossy(),
                    got: t.to_f64_lossy(),
                });
            }
        }
        self.last = Some(t);
        Ok(())
    }

    /// Records a real packet at time `t`. Times must be non-decreasing.
    pub fn record(&mut self, t: T) -> Result<(), KernelError> {
        self.advance(t)?;
        self.events.push_back(t);
        Ok(())
    }

    /// Returns the count of recorded packets in `(t - window, t]`, evicting
    /// anything older.
    pub fn query(&mut self, t: T) -> Result<u32, KernelError> {
        self.advance(t)?;
        let cutoff = t - self.window;
        while matches!(self.events.front(), Some(&e) if e <= cutoff) {
            self.events.pop_front();
        }
        Ok(self.events.len() as u32)
    }

    /// Forgets all recorded packets, keeping the monotonic-time guard.
    pub fn clear(&mut self) {
        self.events.clear();
    }
}
