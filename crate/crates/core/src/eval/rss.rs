use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

/// Resident-set figures from `/proc/self/status`, in kB: (current, high-water mark).
pub fn read_rss_kb() -> Option<(u64, u64)> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let field = |name: &str| {
        status
            .lines()
            .find_map(|l| l.strip_prefix(name))
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|v| v.parse::<u64>().ok())
    };
    let rss = field("VmRSS:")?;
    Some((rss, field("VmHWM:").unwrap_or(rss)))
}

/// Background thread polling resident memory at a fixed cadence.
pub struct RssSampler {
    peak_kb: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl RssSampler {
    pub fn start(interval: Duration) -> Self {
        let peak_kb = Arc::new(AtomicU64::new(read_rss_kb().map_or(0, |r| r.0)));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (peak, stop) = (peak_kb.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    if let Some((rss, _)) = read_rss_kb() {
                        peak.fetch_max(rss, Ordering::Relaxed);
                    }
                    std::thread::sleep(interval);
                }
            })
        };
        Self { peak_kb, stop, handle: Some(handle) }
    }

    /// Highest sampled RSS so far, in MB.
    pub fn peak_mb(&self) -> f64 {
        self.peak_kb.load(Ordering::Relaxed) as f64 / 1024.0
    }

    /// Stops sampling; returns the larger of the sampled peak and the kernel's high-water mark, in MB.
    pub fn finish(mut self) -> f64 {
        self.shutdown();
        let hwm = read_rss_kb().map_or(0, |r| r.1);
        self.peak_kb.load(Ordering::Relaxed).max(hwm) as f64 / 1024.0
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RssSampler {
    fn drop(&mut self) {
        self.shutdown();
    }
}
