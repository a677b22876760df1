use std::collections::BTreeSet;
use std::time::Duration;

use crate::error::{Error, ErrorKind, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    max_attempts: u32,
    base_delay: Duration,
    backoff_multiplier: f64,
    retryable: BTreeSet<ErrorKind>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            backoff_multiplier: 2.0,
            retryable: [ErrorKind::BackendUnavailable].into_iter().collect(),
        }
    }
}

impl RetryPolicy {
    pub fn new(
        max_attempts: u32,
        base_delay: Duration,
        backoff_multiplier: f64,
        retryable: impl IntoIterator<Item = ErrorKind>,
    ) -> Result<Self> {
        if max_attempts == 0 {
            return Err(Error::domain("max_attempts must be >= 1"));
        }
        if !(backoff_multiplier >= 1.0 && backoff_multiplier.is_finite()) {
            return Err(Error::domain(format!(
                "backoff_multiplier must be >= 1, got {backoff_multiplier}"
            )));
        }
        Ok(Self {
            max_attempts,
            base_delay,
            backoff_multiplier,
            retryable: retryable.into_iter().collect(),
        })
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_attempts
    }

    pub fn is_retryable(&self, err: &Error) -> bool {
        self.retryable.contains(&err.kind())
    }

    /// Delay before attempt `attempt + 1`, where `attempt` counts from 1.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(attempt.saturating_sub(1) as i32);
        self.base_delay.mul_f64(factor)
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or
    /// `max_attempts` is spent. The last error is returned on failure.
    pub fn run<T>(
        &self,
        mut sleep: impl FnMut(Duration),
        mut op: impl FnMut(u32) -> Result<T>,
    ) -> Result<T> {
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.max_attempts && self.is_retryable(&e) => {
                    sleep(self.delay_after(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unavailable() -> Error {
        Error::BackendUnavailable {
            backend: "b".into(),
            reason: "down".into(),
        }
    }

    #[test]
    fn exponential_delays() {
        let p = RetryPolicy::new(4, Duration::from_millis(100), 2.0, []).unwrap();
        assert_eq!(p.delay_after(1), Duration::from_millis(100));
        assert_eq!(p.delay_after(2), Duration::from_millis(200));
        assert_eq!(p.delay_after(3), Duration::from_millis(400));
    }

    #[test]
    fn stops_after_max_attempts() {
        let p = RetryPolicy::default();
        let mut calls = 0;
        let mut slept = Vec::new();
        let r: Result<()> = p.run(
            |d| slept.push(d),
            |_| {
                calls += 1;
                Err(unavailable())
            },
        );
        assert!(r.is_err());
        assert_eq!(calls, 3);
        assert_eq!(slept.len(), 2);
    }

    #[test]
    fn recovers_before_exhaustion() {
        let p = RetryPolicy::default();
        let r = p.run(|_| {}, |attempt| if attempt < 3 { Err(unavailable()) } else { Ok(attempt) });
        assert_eq!(r.unwrap(), 3);
    }

    #[test]
    fn non_retryable_fails_fast() {
        let p = RetryPolicy::default();
        let mut calls = 0;
        let r: Result<()> = p.run(
            |_| {},
            |_| {
                calls += 1;
                Err(Error::LogprobsUnsupported { backend: "b".into() })
            },
        );
        assert!(r.is_err());
        assert_eq!(calls, 1);
    }

    #[test]
    fn validation() {
        assert!(RetryPolicy::new(0, Duration::ZERO, 1.0, []).is_err());
        assert!(RetryPolicy::new(1, Duration::ZERO, 0.5, []).is_err());
    }
}
