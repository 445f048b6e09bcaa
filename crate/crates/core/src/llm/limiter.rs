use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket shared by every request to one provider.
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(rpm: u32) -> Self {
        let rpm = f64::from(rpm.max(1));
        Self {
            capacity: rpm,
            per_sec: rpm / 60.0,
            state: Mutex::new((rpm, Instant::now())),
        }
    }

    /// Takes one token, sleeping as needed. Returns false if the wait would
    /// exceed `patience`.
    pub fn acquire(&self, patience: Duration) -> bool {
        let deadline = Instant::now() + patience;
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_sec;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return true;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.per_sec)
            };
            if Instant::now() + wait > deadline {
                return false;
            }
            std::thread::sleep(wait);
        }
    }
}
