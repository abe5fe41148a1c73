use super::buffer::{RayBuffer, Shadow};
use super::schedule::FrameSchedule;
use crate::payload::{encode, CodecDiagnostics, PayloadLayout, RayState};

/// Ray source at the top of the overlay. Releases scan-ordered batches on
/// schedule and parks root-router overflow in its spill queue.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTile {
    pub output: RayBuffer,
    pub spill: RayBuffer,
    /// Next scan position to emit.
    pub cursor: usize,
    /// Scan positions below this have been released.
    pub released: usize,
    pub next_batch: u64,
    pub total: usize,
}

impl GeneratorTile {
    pub fn new(capacity: usize, layout: PayloadLayout) -> Self {
        GeneratorTile {
            output: RayBuffer::new(capacity, layout),
            spill: RayBuffer::new(capacity, layout),
            cursor: 0,
            released: 0,
            next_batch: 0,
            total: 0,
        }
    }

    pub fn reset(&mut self, total: usize) {
        self.output.clear();
        self.spill.clear();
        self.cursor = 0;
        self.released = 0;
        self.next_batch = 0;
        self.total = total;
    }

    pub fn occupancy(&self) -> usize {
        self.output.len() + self.spill.len()
    }

    pub fn injection_done(&self) -> bool {
        self.cursor == self.total
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorContext<'a> {
    pub schedule: &'a FrameSchedule,
    pub width: u32,
    pub height: u32,
    pub iteration: u64,
    pub layout: PayloadLayout,
    /// Partition and local cell containing the camera position.
    pub entry: (u16, u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GeneratorReport {
    pub injected: usize,
    pub reemitted: usize,
}

/// Releases the batch due at this iteration, then fills the output lane:
/// spilled rays first, fresh rays after. Rays that do not fit wait.
pub fn generator_step(gen: &mut GeneratorTile, ctx: &GeneratorContext) -> GeneratorReport {
    let s = ctx.schedule;
    if gen.next_batch < s.batch_count(ctx.width, ctx.height) && s.release_iteration(gen.next_batch) == ctx.iteration {
        gen.released = s.batch_range(gen.next_batch, ctx.width, ctx.height).1;
        gen.next_batch += 1;
    }
    let reemitted = gen.spill.transfer_to(&mut gen.output, usize::MAX);
    let mut injected = 0;
    let mut diag = CodecDiagnostics::default();
    while gen.cursor < gen.released && gen.output.free() > 0 {
        let (x, y) = s.scan_pixel(gen.cursor, ctx.width, ctx.height);
        let st = RayState {
            pixel_x: x as u16,
            pixel_y: y as u16,
            dest_shard: ctx.entry.0,
            dest_cell: ctx.entry.1,
            t: 0.0,
            transmittance: 1.0,
            color: [0.0; 3],
            depth16: None,
        };
        gen.output.push(&encode(&st, ctx.layout, &mut diag), Shadow::fresh());
        gen.cursor += 1;
        injected += 1;
    }
    GeneratorReport { injected, reemitted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::peek_pixel;

    #[test]
    fn batches_follow_schedule() {
        let sched = FrameSchedule {
            batch_size: 2,
            idle_between_batches: 1,
            ..Default::default()
        };
        let mut g = GeneratorTile::new(100, PayloadLayout::Default);
        g.reset(4 * 5);
        let mut per_iter = Vec::new();
        for it in 0..6 {
            let ctx = GeneratorContext {
                schedule: &sched,
                width: 4,
                height: 5,
                iteration: it,
                layout: PayloadLayout::Default,
                entry: (0, 0),
            };
            per_iter.push(generator_step(&mut g, &ctx).injected);
        }
        assert_eq!(per_iter, vec![8, 0, 8, 0, 4, 0]);
        assert!(g.injection_done());
        assert_eq!(peek_pixel(g.output.entry(5)), (1, 1));
    }

    #[test]
    fn full_lane_makes_rays_wait() {
        let sched = FrameSchedule {
            batch_size: 5,
            ..Default::default()
        };
        let mut g = GeneratorTile::new(3, PayloadLayout::Mixed);
        g.reset(10);
        let ctx = GeneratorContext {
            schedule: &sched,
            width: 2,
            height: 5,
            iteration: 0,
            layout: PayloadLayout::Mixed,
            entry: (0, 0),
        };
        assert_eq!(generator_step(&mut g, &ctx).injected, 3);
        g.output.clear();
        assert_eq!(generator_step(&mut g, &GeneratorContext { iteration: 1, ..ctx }).injected, 3);
        assert_eq!(g.cursor, 6);
    }
}
