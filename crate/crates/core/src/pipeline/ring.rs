/// Fixed-length sample history fed one hop at a time. Starts zero-filled, so
/// early windows are zero-padded on the left.
#[derive(Debug, Clone)]
pub struct HopRing<T> {
    buf: Vec<T>,
    /// Index of the oldest sample.
    head: usize,
}

impl<T: Copy + Default> HopRing<T> {
    pub fn new(len: usize) -> Self {
        HopRing { buf: vec![T::default(); len], head: 0 }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Appends `samples`, dropping the oldest ones. Input longer than the ring
    /// keeps only its tail.
    pub fn push(&mut self, samples: &[T]) {
        let len = self.buf.len();
        let samples = &samples[samples.len().saturating_sub(len)..];
        for &s in samples {
            self.buf[self.head] = s;
            self.head = (self.head + 1) % len;
        }
    }

    /// Copies the contents oldest-first into `out`, which must have the ring's length.
    pub fn copy_to(&self, out: &mut [T]) {
        let tail = self.buf.len() - self.head;
        out[..tail].copy_from_slice(&self.buf[self.head..]);
        out[tail..].copy_from_slice(&self.buf[..self.head]);
    }
}
