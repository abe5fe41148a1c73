use crate::payload::{self, PayloadLayout, INVALID_SHARD};

/// Per-ray bookkeeping carried next to the payload but outside modeled SRAM.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shadow {
    pub router_hops: u32,
    pub tracer_hops: u32,
    /// Router hops since the last tracer arrival (or since injection).
    pub since_tracer: u32,
    /// Largest `since_tracer` observed at a tracer arrival.
    pub max_gap: u32,
    pub steps: u32,
    /// f32 depth for layouts without a depth slot; NaN when unset.
    pub depth: f32,
    /// Parked in the generator's spill queue; the round trip is not a hop.
    pub spilled: bool,
}

impl Shadow {
    pub fn fresh() -> Self {
        Shadow {
            depth: f32::NAN,
            ..Default::default()
        }
    }

    pub fn depth(&self) -> Option<f32> {
        (!self.depth.is_nan()).then_some(self.depth)
    }
}

/// Fixed-capacity array of encoded rays. Occupied slots are packed at the
/// front; every free slot carries the INVALID destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBuffer {
    bpr: usize,
    capacity: usize,
    len: usize,
    bytes: Vec<u8>,
    shadow: Vec<Shadow>,
}

impl RayBuffer {
    pub fn new(capacity: usize, layout: PayloadLayout) -> Self {
        let bpr = layout.bytes_per_ray();
        let mut bytes = vec![0u8; capacity * bpr];
        for slot in bytes.chunks_exact_mut(bpr) {
            slot[4..6].copy_from_slice(&INVALID_SHARD.to_le_bytes());
        }
        RayBuffer {
            bpr,
            capacity,
            len: 0,
            bytes,
            shadow: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn free(&self) -> usize {
        self.capacity - self.len
    }

    pub fn bytes_per_ray(&self) -> usize {
        self.bpr
    }

    /// Modeled storage in bytes.
    pub fn storage_bytes(&self) -> usize {
        self.bytes.len()
    }

    /// Slot `i`; slots at or past `len()` hold the INVALID sentinel.
    pub fn entry(&self, i: usize) -> &[u8] {
        &self.bytes[i * self.bpr..(i + 1) * self.bpr]
    }

    pub fn shadow(&self, i: usize) -> &Shadow {
        &self.shadow[i]
    }

    /// Number of leading slots before the first INVALID destination.
    pub fn scan_valid(&self) -> usize {
        (0..self.capacity)
            .find(|&i| payload::peek_dest(self.entry(i)).0 == INVALID_SHARD)
            .unwrap_or(self.capacity)
    }

    /// Appends one ray; returns false (and stores nothing) when full.
    pub fn push(&mut self, bytes: &[u8], shadow: Shadow) -> bool {
        if self.len == self.capacity {
            return false;
        }
        let at = self.len * self.bpr;
        self.bytes[at..at + self.bpr].copy_from_slice(bytes);
        self.shadow.push(shadow);
        self.len += 1;
        true
    }

    /// Keeps only the entries whose index is listed (ascending), compacting
    /// them to the front.
    pub fn retain_indices(&mut self, keep: &[usize]) {
        let old = self.len;
        for (dst, &src) in keep.iter().enumerate() {
            debug_assert!(src >= dst && src < old);
            if src != dst {
                self.bytes
                    .copy_within(src * self.bpr..(src + 1) * self.bpr, dst * self.bpr);
                self.shadow[dst] = self.shadow[src];
            }
        }
        self.set_len(keep.len(), old);
    }

    /// Removes the first `k` entries.
    pub fn pop_front(&mut self, k: usize) {
        let old = self.len;
        let k = k.min(old);
        self.bytes.copy_within(k * self.bpr..old * self.bpr, 0);
        self.shadow.drain(..k);
        self.set_len(old - k, old);
    }

    pub fn clear(&mut self) {
        let old = self.len;
        self.set_len(0, old);
    }

    fn set_len(&mut self, new: usize, old: usize) {
        for i in new..old {
            let at = i * self.bpr;
            self.bytes[at + 4..at + 6].copy_from_slice(&INVALID_SHARD.to_le_bytes());
        }
        self.shadow.truncate(new);
        self.len = new;
    }

    /// Moves up to `limit` leading entries to the end of `dst`. Returns how
    /// many moved.
    pub fn transfer_to(&mut self, dst: &mut RayBuffer, limit: usize) -> usize {
        let k = self.len.min(dst.free()).min(limit);
        for i in 0..k {
            let at = i * self.bpr;
            let s = self.shadow[i];
            let ok = dst.push(&self.bytes[at..at + self.bpr], s);
            debug_assert!(ok);
        }
        self.pop_front(k);
        k
    }

    /// Mutable shadow access for the exchange phase.
    pub(crate) fn shadow_mut(&mut self, i: usize) -> &mut Shadow {
        &mut self.shadow[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::{encode, CodecDiagnostics, RayState};

    fn ray(px: u16) -> Vec<u8> {
        let s = RayState {
            pixel_x: px,
            dest_shard: 1,
            ..Default::default()
        };
        encode(&s, PayloadLayout::Default, &mut CodecDiagnostics::default())
    }

    #[test]
    fn tail_stays_invalid() {
        let mut b = RayBuffer::new(4, PayloadLayout::Default);
        assert_eq!(b.scan_valid(), 0);
        for i in 0..5 {
            b.push(&ray(i), Shadow::fresh());
        }
        assert_eq!(b.len(), 4);
        assert_eq!(b.scan_valid(), 4);
        b.retain_indices(&[1, 3]);
        assert_eq!(b.scan_valid(), 2);
        assert_eq!(payload::peek_pixel(b.entry(1)).0, 3);
        b.pop_front(1);
        assert_eq!(b.scan_valid(), 1);
        assert_eq!(payload::peek_pixel(b.entry(0)).0, 3);
    }

    #[test]
    fn transfer_respects_free_space() {
        let mut a = RayBuffer::new(8, PayloadLayout::Default);
        let mut b = RayBuffer::new(3, PayloadLayout::Default);
        for i in 0..6 {
            a.push(&ray(i), Shadow::fresh());
        }
        b.push(&ray(99), Shadow::fresh());
        assert_eq!(a.transfer_to(&mut b, usize::MAX), 2);
        assert_eq!((a.len(), b.len()), (4, 3));
        assert_eq!(payload::peek_pixel(a.entry(0)).0, 2);
        assert_eq!(payload::peek_pixel(b.entry(2)).0, 1);
    }
}
