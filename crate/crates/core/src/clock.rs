use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

/// Session time in milliseconds since the session clock started.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;

    fn sleep_ms(&self, ms: u64);

    fn sleep_until(&self, at_ms: u64) {
        let now = self.now_ms();
        if at_ms > now {
            self.sleep_ms(at_ms - now);
        }
    }

    /// Real duration corresponding to `ms` of session time.
    fn real(&self, ms: u64) -> Duration;
}

/// Simulated clock: sleeping advances time instantly.
#[derive(Debug, Default)]
pub struct SimClock {
    now: AtomicU64,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(ms: u64) -> Self {
        Self { now: AtomicU64::new(ms) }
    }

    pub fn advance(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_ms(&self, ms: u64) {
        self.advance(ms);
    }

    fn real(&self, _ms: u64) -> Duration {
        Duration::ZERO
    }
}

/// Wall clock with a time scale; `scale = 0.1` runs ten times faster than
/// real time while reporting unscaled session milliseconds.
#[derive(Debug)]
pub struct WallClock {
    start: Instant,
    scale: f64,
}

impl WallClock {
    pub fn new(scale: f64) -> Self {
        assert!(scale > 0.0 && scale.is_finite(), "time scale must be positive");
        Self {
            start: Instant::now(),
            scale,
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        (self.start.elapsed().as_secs_f64() * 1000.0 / self.scale) as u64
    }

    fn sleep_ms(&self, ms: u64) {
        std::thread::sleep(self.real(ms));
    }

    fn real(&self, ms: u64) -> Duration {
        Duration::from_secs_f64(ms as f64 * self.scale / 1000.0)
    }
}
