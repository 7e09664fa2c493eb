//! Lexicographic k-subset enumeration over 1-based event indices.

/// Iterator over all strictly increasing `k`-tuples from `1..=n`, in
/// lexicographic order. `k = 0` yields the single empty tuple; `k > n`
/// yields nothing.
pub fn k_subsets(n: usize, k: usize) -> KSubsets {
    let current: Vec<usize> = (1..=k).collect();
    KSubsets {
        n,
        k,
        current,
        done: k > n,
        fresh: true,
    }
}

#[derive(Debug, Clone)]
pub struct KSubsets {
    n: usize,
    k: usize,
    current: Vec<usize>,
    done: bool,
    fresh: bool,
}

impl Iterator for KSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            return Some(self.current.clone());
        }
        // advance: rightmost element that can still move up
        let mut i = self.k;
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.current[i] < self.n - (self.k - 1 - i) {
                break;
            }
        }
        self.current[i] += 1;
        for j in i + 1..self.k {
            self.current[j] = self.current[j - 1] + 1;
        }
        Some(self.current.clone())
    }
}

/// Bitmask for a canonical subset; bit `i-1` stands for event `i`.
pub fn mask_of(indices: &[usize]) -> u64 {
    indices.iter().fold(0u64, |m, &i| m | (1u64 << (i - 1)))
}

/// Sorted 1-based indices of a mask.
pub fn indices_of(mask: u64) -> Vec<usize> {
    (0..64)
        .filter(|b| mask & (1u64 << b) != 0)
        .map(|b| b + 1)
        .collect()
}
