use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanOrder {
    /// Batches of whole rows, pixels left to right within a row.
    Row,
    /// Batches of whole columns, pixels top to bottom within a column.
    #[serde(alias = "col")]
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverflowPolicy {
    /// Rays that do not fit stay in their source buffer.
    Backpressure,
    /// Rays that do not fit are discarded and logged.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraPolicy {
    /// A new camera waits for a host sync with nothing in flight and the
    /// frame fully injected.
    #[serde(alias = "safe")]
    DeferredSafe,
    /// A new camera takes effect at the next host sync.
    #[serde(alias = "unsafe")]
    ImmediateUnsafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completion {
    /// Run until a host sync sees the frame injected and nothing in flight.
    Quiescence,
    /// Run exactly the scheduled iterations; leftovers are missing pixels.
    Budgeted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSchedule {
    pub scan: ScanOrder,
    /// Rows (row scan) or columns (column scan) per batch.
    pub batch_size: u32,
    pub idle_between_batches: u32,
    pub final_drain: u32,
    /// Compute/exchange iterations per host sync.
    pub rc: u32,
    pub camera_policy: CameraPolicy,
    pub overflow_policy: OverflowPolicy,
    pub completion: Completion,
    /// Hard stop for quiescence runs.
    pub max_iterations: u64,
}

impl Default for FrameSchedule {
    fn default() -> Self {
        FrameSchedule {
            scan: ScanOrder::Row,
            batch_size: 1,
            idle_between_batches: 0,
            final_drain: 200,
            rc: 20,
            camera_policy: CameraPolicy::DeferredSafe,
            overflow_policy: OverflowPolicy::Backpressure,
            completion: Completion::Quiescence,
            max_iterations: 1_000_000,
        }
    }
}

impl FrameSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if self.rc == 0 {
            return Err("rc must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        Ok(())
    }

    fn lines(&self, width: u32, height: u32) -> u32 {
        match self.scan {
            ScanOrder::Row => height,
            ScanOrder::Column => width,
        }
    }

    pub fn batch_count(&self, width: u32, height: u32) -> u64 {
        self.lines(width, height).div_ceil(self.batch_size.max(1)) as u64
    }

    /// Iterations at which a batch is released.
    pub fn injection_iterations(&self, width: u32, height: u32) -> u64 {
        self.batch_count(width, height)
    }

    /// Iteration at which batch `k` is released.
    pub fn release_iteration(&self, k: u64) -> u64 {
        k * (1 + self.idle_between_batches as u64)
    }

    /// Batches, the idle gaps between them, and the final drain.
    pub fn scheduled_iterations(&self, width: u32, height: u32) -> u64 {
        let n = self.batch_count(width, height);
        if n == 0 {
            return self.final_drain as u64;
        }
        n + (n - 1) * self.idle_between_batches as u64 + self.final_drain as u64
    }

    /// Host syncs for a run of `iterations` iterations; a trailing partial
    /// window still ends with a sync.
    pub fn host_syncs(&self, iterations: u64) -> u64 {
        iterations.div_ceil(self.rc.max(1) as u64)
    }

    /// Number of pixels in batch `k` and the scan position of its first one.
    pub fn batch_range(&self, k: u64, width: u32, height: u32) -> (usize, usize) {
        let per_line = match self.scan {
            ScanOrder::Row => width,
            ScanOrder::Column => height,
        } as usize;
        let lines = self.lines(width, height) as usize;
        let first = (k as usize * self.batch_size as usize).min(lines);
        let last = ((k as usize + 1) * self.batch_size as usize).min(lines);
        (first * per_line, last * per_line)
    }

    /// Pixel at scan position `i`.
    pub fn scan_pixel(&self, i: usize, width: u32, height: u32) -> (u32, u32) {
        match self.scan {
            ScanOrder::Row => ((i % width as usize) as u32, (i / width as usize) as u32),
            ScanOrder::Column => ((i / height as usize) as u32, (i % height as usize) as u32),
        }
    }
}
