use crate::kernel::Domain;

/// The tensor box `{-N, ..., N}^d` in lexicographic order, first axis slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub dim: usize,
    pub modes: usize,
}

impl Lattice {
    pub fn new(dim: usize, modes: usize) -> Self {
        Self { dim, modes }
    }

    pub fn of(domain: &Domain) -> Self {
        Self::new(domain.dim, domain.modes)
    }

    /// Points per axis, `2N + 1`.
    pub fn side(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: &[i64]) -> bool {
        let m = self.modes as i64;
        n.iter().all(|&c| (-m..=m).contains(&c))
    }

    /// Linear index of a multi-index inside the box.
    pub fn index(&self, n: &[i64]) -> Option<usize> {
        if n.len() != self.dim || !self.contains(n) {
            return None;
        }
        let side = self.side();
        let m = self.modes as i64;
        Some(n.iter().fold(0usize, |acc, &c| acc * side + (c + m) as usize))
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut out = vec![0i64; self.dim];
        for slot in out.iter_mut().rev() {
            *slot = (idx % side) as i64 - self.modes as i64;
            idx /= side;
        }
        out
    }

    /// Index of `-n` given the index of `n`.
    pub fn negated(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.multi_index(i))
    }
}

/// All multi-indices of the box lattice for `domain`, in storage order.
pub fn mode_lattice(domain: &Domain) -> Vec<Vec<i64>> {
    Lattice::of(domain).iter().collect()
}
