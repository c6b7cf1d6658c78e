//! Small fixed-capacity bitsets used by the search internals.
//!
//! Vertex and edge sets inside the decomposition engine are dense indices
//! into a [`crate::hypergraph::Hypergraph`], so a word-packed bitset beats
//! tree sets by a wide margin in the hot loops (component computation,
//! separator enumeration).

#[derive(Clone, Default)]
pub(crate) struct Bits {
    words: Vec<u64>,
}

// Equality and hashing ignore trailing zero words, so sets built with
// different capacities still compare by content.
impl PartialEq for Bits {
    fn eq(&self, other: &Self) -> bool {
        let n = self.words.len().max(other.words.len());
        (0..n).all(|i| {
            self.words.get(i).copied().unwrap_or(0) == other.words.get(i).copied().unwrap_or(0)
        })
    }
}

impl Eq for Bits {}

impl std::hash::Hash for Bits {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let last = self
            .words
            .iter()
            .rposition(|w| *w != 0)
            .map_or(0, |i| i + 1);
        self.words[..last].hash(state);
    }
}

impl Bits {
    pub fn new(capacity: usize) -> Self {
        Bits {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    pub fn set(&mut self, i: u32) {
        self.words[i as usize / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: u32) -> bool {
        let w = i as usize / 64;
        w < self.words.len() && self.words[w] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
        for a in self.words.iter_mut().skip(other.words.len()) {
            *a = 0;
        }
    }

    pub fn remove_all(&mut self, other: &Bits) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn intersects(&self, other: &Bits) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset_of(&self, other: &Bits) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, a)| *a & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn first(&self) -> Option<u32> {
        for (i, w) in self.words.iter().enumerate() {
            if *w != 0 {
                return Some((i * 64) as u32 + w.trailing_zeros());
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(i, w)| {
            let mut w = *w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some((i * 64) as u32 + bit)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.iter().collect()
    }
}

impl std::fmt::Debug for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<u32> for Bits {
    /// Capacity is derived from the maximum element; callers that need a
    /// specific capacity should use [`Bits::new`] and `set`.
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        let items: Vec<u32> = iter.into_iter().collect();
        let cap = items.iter().max().map_or(0, |m| *m as usize + 1);
        let mut b = Bits::new(cap);
        for i in items {
            b.set(i);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_ops() {
        let a: Bits = [1u32, 5, 64, 100].into_iter().collect();
        let b: Bits = [5u32, 100].into_iter().collect();
        assert!(b.is_subset_of(&a));
        assert!(!a.is_subset_of(&b));
        assert!(a.intersects(&b));
        assert_eq!(a.to_vec(), vec![1, 5, 64, 100]);
        assert_eq!(a.first(), Some(1));

        let mut c = a.clone();
        c.remove_all(&b);
        assert_eq!(c.to_vec(), vec![1, 64]);
        c.union_with(&b);
        assert_eq!(c.count(), 4);
        c.intersect_with(&b);
        assert_eq!(c.to_vec(), vec![5, 100]);
    }

    #[test]
    fn empty_and_mismatched_capacity() {
        let a = Bits::new(0);
        let b: Bits = [3u32].into_iter().collect();
        assert!(a.is_empty());
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(!a.intersects(&b));
    }
}
