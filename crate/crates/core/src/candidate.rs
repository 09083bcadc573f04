use std::fmt;

/// A set of candidate labels over `q` classes, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CandidateSet {
    q: usize,
    words: Vec<u64>,
}

impl CandidateSet {
    /// The empty set over `q` classes. Only valid as an intermediate value;
    /// datasets reject empty candidate sets.
    pub fn empty(q: usize) -> Self {
        CandidateSet {
            q,
            words: vec![0; q.div_ceil(64)],
        }
    }

    pub fn full(q: usize) -> Self {
        let mut s = Self::empty(q);
        for j in 0..q {
            s.insert(j);
        }
        s
    }

    pub fn singleton(q: usize, label: usize) -> Self {
        let mut s = Self::empty(q);
        s.insert(label);
        s
    }

    /// Builds a set from label indices. Returns `None` if an index is `>= q`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(q: usize, indices: I) -> Option<Self> {
        let mut s = Self::empty(q);
        for j in indices {
            if j >= q {
                return None;
            }
            s.insert(j);
        }
        Some(s)
    }

    /// Number of classes `q` the set ranges over.
    pub fn num_classes(&self) -> usize {
        self.q
    }

    pub fn insert(&mut self, label: usize) {
        assert!(label < self.q, "label {label} out of range for {} classes", self.q);
        self.words[label / 64] |= 1 << (label % 64);
    }

    pub fn remove(&mut self, label: usize) {
        if label < self.q {
            self.words[label / 64] &= !(1 << (label % 64));
        }
    }

    #[inline]
    pub fn contains(&self, label: usize) -> bool {
        label < self.q && self.words[label / 64] & (1 << (label % 64)) != 0
    }

    /// Cardinality |S|.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.q
    }

    /// Candidate labels in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.q).filter(move |&j| self.contains(j))
    }

    /// Labels outside the set (the complementary labels), increasing order.
    pub fn complement(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.q).filter(move |&j| !self.contains(j))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn is_subset_of(&self, other: &CandidateSet) -> bool {
        self.q == other.q && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Membership indicator as a dense 0/1 vector of length `q`.
    pub fn indicator(&self) -> Vec<f64> {
        (0..self.q).map(|j| if self.contains(j) { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
