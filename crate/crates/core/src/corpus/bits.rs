/// Fixed-length presence vector packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = Self::zeros(len);
        for i in ones {
            bits.set(i);
        }
        bits
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Self::from_indices(
            values.len(),
            values.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i),
        )
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Writes 0.0/1.0 values into `out`, which must have length `self.len()`.
    pub fn write_f64(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.len);
        out.fill(0.0);
        for i in self.iter_ones() {
            out[i] = 1.0;
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.write_f64(&mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_round_trip_across_word_boundary() {
        let idx = [0, 5, 63, 64, 65, 127, 200];
        let bits = BitVector::from_indices(201, idx);
        assert_eq!(bits.iter_ones().collect::<Vec<_>>(), idx);
        assert_eq!(bits.count_ones(), idx.len());
        assert!(bits.get(64));
        assert!(!bits.get(66));
    }

    #[test]
    #[should_panic]
    fn out_of_range_set_panics() {
        BitVector::zeros(3).set(3);
    }
}
