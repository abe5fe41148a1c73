//! Summaries built from a finished frame and its run statistics.

use super::FrameOutput;
use crate::engine::{OverflowAction, OverflowPolicy, RunStats, TileMemory};
use crate::overlay::Role;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Counting convention used by the engine, printed with hop reports.
pub const HOP_CONVENTION: &str = "router hop = one link traversal of an unfinished ray (generator->root included, \
spill detours excluded); tracer hop = a traversal that lands on a tracer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopHistogram {
    /// `router[h]` pixels finished with `h` router hops.
    pub router: Vec<u64>,
    pub tracer: Vec<u64>,
    pub finished: u64,
    pub mean_router_hops: f64,
    pub mean_tracer_hops: f64,
    /// Mean router hops per mean tracer hop; 0 when nothing finished.
    pub ratio: f64,
}

fn histogram(values: impl Iterator<Item = u32>) -> Vec<u64> {
    let mut h = Vec::new();
    for v in values {
        let v = v as usize;
        if h.len() <= v {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}

/// Histograms over the pixels that reached the framebuffer.
pub fn hop_histogram(frame: &FrameOutput) -> HopHistogram {
    let done = || (0..frame.pixel_count()).filter(|&p| !frame.missing[p]);
    let router = histogram(done().map(|p| frame.router_hops[p]));
    let tracer = histogram(done().map(|p| frame.tracer_hops[p]));
    let finished = done().count() as u64;
    let sum_r: u64 = done().map(|p| frame.router_hops[p] as u64).sum();
    let sum_t: u64 = done().map(|p| frame.tracer_hops[p] as u64).sum();
    let (mean_r, mean_t) = if finished == 0 {
        (0.0, 0.0)
    } else {
        (sum_r as f64 / finished as f64, sum_t as f64 / finished as f64)
    };
    HopHistogram {
        router,
        tracer,
        finished,
        mean_router_hops: mean_r,
        mean_tracer_hops: mean_t,
        ratio: if mean_t > 0.0 { mean_r / mean_t } else { 0.0 },
    }
}

impl HopHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("hops,router_pixels,tracer_pixels\n");
        for h in 0..self.router.len().max(self.tracer.len()) {
            let _ = writeln!(
                s,
                "{h},{},{}",
                self.router.get(h).copied().unwrap_or(0),
                self.tracer.get(h).copied().unwrap_or(0)
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleSummary {
    pub role: Role,
    pub tiles: usize,
    pub max_bytes: usize,
    pub mean_bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub rows: Vec<TileMemory>,
    pub roles: Vec<RoleSummary>,
    pub max_bytes: usize,
}

pub fn memory_report(tiles: &[TileMemory]) -> MemoryReport {
    let roles = [Role::Tracer, Role::Router, Role::Generator]
        .into_iter()
        .filter_map(|role| {
            let t: Vec<usize> = tiles.iter().filter(|m| m.role == role).map(TileMemory::total).collect();
            (!t.is_empty()).then(|| RoleSummary {
                role,
                tiles: t.len(),
                max_bytes: t.iter().copied().max().unwrap_or(0),
                mean_bytes: t.iter().sum::<usize>() as f64 / t.len() as f64,
            })
        })
        .collect();
    MemoryReport {
        rows: tiles.to_vec(),
        roles,
        max_bytes: tiles.iter().map(TileMemory::total).max().unwrap_or(0),
    }
}

impl MemoryReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tile,role,shard_bytes,buffer_bytes,slice_bytes,misc_bytes,total_bytes\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:?},{},{},{},{},{}",
                r.tile,
                r.role,
                r.shard_bytes,
                r.buffer_bytes,
                r.slice_bytes,
                r.misc_bytes,
                r.total()
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationAudit {
    pub pass: bool,
    pub injected: u64,
    pub terminated: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub failures: Vec<String>,
}

/// Checks the ray ledger, the drop log and, when a frame is supplied, that
/// every pixel not accounted for as finished is flagged missing.
pub fn conservation_audit(stats: &RunStats, frame: Option<&FrameOutput>) -> ConservationAudit {
    let mut failures = Vec::new();
    if !stats.balanced() {
        failures.push(format!(
            "injected {} != terminated {} + dropped {} + in flight {}",
            stats.rays_injected, stats.rays_terminated, stats.rays_dropped, stats.rays_in_flight
        ));
    }
    if stats.overflow_policy == OverflowPolicy::Backpressure && stats.rays_dropped > 0 {
        failures.push(format!("{} rays dropped under backpressure", stats.rays_dropped));
    }
    let logged: u64 = stats
        .overflow_events
        .iter()
        .filter(|e| e.action == OverflowAction::Dropped)
        .map(|e| e.count as u64)
        .sum();
    if logged != stats.rays_dropped {
        failures.push(format!("drop log sums to {logged}, counter says {}", stats.rays_dropped));
    }
    if stats.finished_pixels != stats.rays_terminated {
        failures.push(format!(
            "{} pixels in the framebuffer, {} rays terminated",
            stats.finished_pixels, stats.rays_terminated
        ));
    }
    if let Some(f) = frame {
        let pixels = f.pixel_count() as u64;
        let missing = f.missing_count() as u64;
        if pixels - missing != stats.rays_terminated {
            failures.push(format!(
                "frame has {} finished pixels, {} rays terminated",
                pixels - missing,
                stats.rays_terminated
            ));
        }
        let never_injected = pixels.saturating_sub(stats.rays_injected);
        if missing != never_injected + stats.rays_dropped + stats.rays_in_flight {
            failures.push(format!(
                "{missing} missing pixels, expected {} dropped + {} in flight + {never_injected} never injected",
                stats.rays_dropped, stats.rays_in_flight
            ));
        }
    }
    ConservationAudit {
        pass: failures.is_empty(),
        injected: stats.rays_injected,
        terminated: stats.rays_terminated,
        dropped: stats.rays_dropped,
        in_flight: stats.rays_in_flight,
        failures,
    }
}

/// Plain-text report of the three tables.
pub fn render_report(stats: &RunStats, hops: &HopHistogram, memory: Option<&MemoryReport>) -> String {
    let mut s = String::new();
    let audit = conservation_audit(stats, None);
    let _ = writeln!(s, "conservation: {}", if audit.pass { "PASS" } else { "FAIL" });
    let _ = writeln!(
        s,
        "  injected {} terminated {} dropped {} in_flight {}",
        audit.injected, audit.terminated, audit.dropped, audit.in_flight
    );
    for f in &audit.failures {
        let _ = writeln!(s, "  {f}");
    }
    let _ = writeln!(
        s,
        "iterations {} (scheduled {}), host syncs {}, completed {}, stalled {}",
        stats.iterations_executed, stats.scheduled_iterations, stats.host_sync_count, stats.completed, stats.stalled
    );
    let _ = writeln!(s, "hops ({HOP_CONVENTION})");
    let _ = writeln!(
        s,
        "  finished {} mean router {:.3} mean tracer {:.3} ratio {:.3} max between tracers {}",
        hops.finished, hops.mean_router_hops, hops.mean_tracer_hops, hops.ratio, stats.max_router_hops_between_tracers
    );
    if let Some(m) = memory {
        let _ = writeln!(s, "memory (bytes)");
        for r in &m.roles {
            let _ = writeln!(
                s,
                "  {:?}: {} tiles, max {}, mean {:.0}",
                r.role, r.tiles, r.max_bytes, r.mean_bytes
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::OverflowEvent;
    use crate::payload::PayloadLayout;

    fn stats() -> RunStats {
        RunStats {
            levels: 1,
            layout: PayloadLayout::Default,
            overflow_policy: OverflowPolicy::Drop,
            partition_count: 1,
            width: 2,
            height: 2,
            iterations_executed: 10,
            scheduled_iterations: 10,
            injection_iterations: 2,
            rays_injected: 4,
            rays_terminated: 3,
            rays_dropped: 1,
            rays_in_flight: 0,
            rays_retained: 0,
            rays_spilled: 0,
            host_sync_count: 1,
            finished_pixels: 3,
            total_router_hops: 6,
            total_tracer_hops: 3,
            max_router_hops_between_tracers: 2,
            cells_marched: 9,
            f16_overflows: 0,
            peak_occupancy: vec![],
            overflow_events: vec![OverflowEvent {
                iteration: 3,
                tile: 4,
                phase: crate::engine::Phase::Exchange,
                action: OverflowAction::Dropped,
                count: 1,
            }],
            camera_switches: vec![],
            completed: true,
            stalled: false,
        }
    }

    fn frame() -> FrameOutput {
        let mut f = FrameOutput::new(2, 2);
        f.missing = vec![false, false, false, true];
        f.router_hops = vec![2, 2, 2, 0];
        f.tracer_hops = vec![1, 1, 1, 0];
        f
    }

    #[test]
    fn audit_passes_and_catches_tampering() {
        assert!(conservation_audit(&stats(), Some(&frame())).pass);
        let mut s = stats();
        s.rays_terminated = 4;
        assert!(!conservation_audit(&s, None).pass);
        let mut s = stats();
        s.overflow_policy = OverflowPolicy::Backpressure;
        assert!(!conservation_audit(&s, None).pass);
        let mut s = stats();
        s.overflow_events.clear();
        assert!(!conservation_audit(&s, None).pass);
    }

    #[test]
    fn histogram_counts_finished_pixels() {
        let h = hop_histogram(&frame());
        assert_eq!(h.finished, 3);
        assert_eq!(h.router, vec![0, 0, 3]);
        assert_eq!(h.tracer, vec![0, 3]);
        assert_eq!(h.ratio, 2.0);
        assert_eq!(h.router.iter().sum::<u64>(), 3);
        let empty = hop_histogram(&FrameOutput::new(0, 0));
        assert!(empty.router.is_empty() && empty.finished == 0);
    }

    #[test]
    fn memory_roles() {
        let rows = vec![
            TileMemory {
                tile: 0,
                role: Role::Tracer,
                shard_bytes: 100,
                buffer_bytes: 115_200,
                slice_bytes: 16,
                misc_bytes: 0,
            },
            TileMemory {
                tile: 1,
                role: Role::Router,
                shard_bytes: 0,
                buffer_bytes: 576_000,
                slice_bytes: 0,
                misc_bytes: 240,
            },
        ];
        let m = memory_report(&rows);
        assert_eq!(m.max_bytes, 576_240);
        assert_eq!(m.roles.len(), 2);
        assert!(memory_report(&[]).rows.is_empty());
        assert_eq!(memory_report(&[]).max_bytes, 0);
    }
}
