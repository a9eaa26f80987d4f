use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest replica count the group machinery supports.
pub const MAX_REPLICAS: usize = 5;

/// Element of the symmetric group S_Q stored as its image array.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: [u8; MAX_REPLICAS],
    q: u8,
}

impl Permutation {
    pub fn identity(q: usize) -> Self {
        assert!((1..=MAX_REPLICAS).contains(&q));
        let mut images = [0u8; MAX_REPLICAS];
        for (i, x) in images.iter_mut().enumerate().take(q) {
            *x = i as u8;
        }
        Self { images, q: q as u8 }
    }

    /// Builds a permutation from `images[x] = g(x)`, rejecting non-bijections.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let q = images.len();
        if !(1..=MAX_REPLICAS).contains(&q) {
            return Err(Error::UnsupportedReplicaCount(q));
        }
        let mut seen = [false; MAX_REPLICAS];
        let mut out = [0u8; MAX_REPLICAS];
        for (i, &x) in images.iter().enumerate() {
            if x >= q || seen[x] {
                return Err(Error::InvalidParameter("image array is not a bijection"));
            }
            seen[x] = true;
            out[i] = x as u8;
        }
        Ok(Self { images: out, q: q as u8 })
    }

    /// Builds a permutation from disjoint cycles, e.g. `&[&[0, 1]]` for (01).
    pub fn from_cycles(q: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..q).collect();
        let mut touched = alloc::vec![false; q];
        for cycle in cycles {
            for (k, &x) in cycle.iter().enumerate() {
                if x >= q || touched[x] {
                    return Err(Error::InvalidParameter("cycles are not disjoint"));
                }
                touched[x] = true;
                images[x] = cycle[(k + 1) % cycle.len()];
            }
        }
        Self::from_images(&images)
    }

    pub fn q(&self) -> usize {
        self.q as usize
    }

    pub fn images(&self) -> &[u8] {
        &self.images[..self.q as usize]
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x] as usize
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(Error::ReplicaMismatch(self.q(), other.q()));
        }
        let mut images = [0u8; MAX_REPLICAS];
        for x in 0..self.q() {
            images[x] = self.images[other.images[x] as usize];
        }
        Ok(Self { images, q: self.q })
    }

    pub fn inverse(&self) -> Self {
        let mut images = [0u8; MAX_REPLICAS];
        for x in 0..self.q() {
            images[self.images[x] as usize] = x as u8;
        }
        Self { images, q: self.q }
    }

    /// Number of disjoint cycles, fixed points included.
    pub fn cycle_count(&self) -> usize {
        self.cycle_type().len()
    }

    /// Cycle lengths in non-increasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = [false; MAX_REPLICAS];
        let mut lengths = Vec::new();
        for start in 0..self.q() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.apply(x);
                len += 1;
            }
            lengths.push(len);
        }
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths
    }

    pub fn is_identity(&self) -> bool {
        (0..self.q()).all(|x| self.apply(x) == x)
    }

    pub fn is_transposition(&self) -> bool {
        self.cycle_count() + 1 == self.q()
    }

    pub fn is_involution(&self) -> bool {
        !self.is_identity() && (0..self.q()).all(|x| self.apply(self.apply(x)) == x)
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Cycle notation with fixed points, e.g. `(01)(2)`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut seen = [false; MAX_REPLICAS];
        for start in 0..self.q() {
            if seen[start] {
                continue;
            }
            f.write_str("(")?;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                write!(f, "{x}")?;
                x = self.apply(x);
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Enumerated S_Q with precomputed multiplication, inverse and cycle tables.
///
/// Elements are addressed by `u8` labels (the Potts spin values). For Q = 3
/// the labels follow the fixed order
/// {(0)(1)(2), (0)(12), (01)(2), (021), (012), (02)(1)} → {0..5};
/// other Q use lexicographic order of the image arrays.
#[derive(Debug, Clone)]
pub struct SymmetricGroup {
    q: usize,
    elements: Vec<Permutation>,
    mul: Vec<u8>,
    inv: Vec<u8>,
    cycles: Vec<u8>,
}

impl SymmetricGroup {
    pub fn new(q: usize) -> Result<Self> {
        if !(1..=MAX_REPLICAS).contains(&q) {
            return Err(Error::UnsupportedReplicaCount(q));
        }
        let elements = if q == 3 {
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [2, 0, 1], [1, 2, 0], [2, 1, 0]]
                .iter()
                .map(|im| Permutation::from_images(im))
                .collect::<Result<Vec<_>>>()?
        } else {
            lexicographic_permutations(q)
        };
        let n = elements.len();
        let find = |p: &Permutation| elements.iter().position(|e| e == p).expect("group is closed") as u8;
        let mut mul = alloc::vec![0u8; n * n];
        for a in 0..n {
            for b in 0..n {
                mul[a * n + b] = find(&elements[a].compose(&elements[b])?);
            }
        }
        let inv = elements.iter().map(|e| find(&e.inverse())).collect();
        let cycles = elements.iter().map(|e| e.cycle_count() as u8).collect();
        Ok(Self { q, elements, mul, inv, cycles })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn element(&self, label: u8) -> Permutation {
        self.elements[label as usize]
    }

    pub fn label(&self, p: &Permutation) -> Option<u8> {
        self.elements.iter().position(|e| e == p).map(|i| i as u8)
    }

    pub const IDENTITY: u8 = 0;

    /// Label of `a ∘ b`.
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.elements.len() + b as usize]
    }

    pub fn inv(&self, a: u8) -> u8 {
        self.inv[a as usize]
    }

    /// Label of `a⁻¹ ∘ b`.
    pub fn relative(&self, a: u8, b: u8) -> u8 {
        self.mul(self.inv(a), b)
    }

    pub fn cycle_count(&self, a: u8) -> usize {
        self.cycles[a as usize] as usize
    }

    /// Labels of the non-identity involutions.
    pub fn involutions(&self) -> Vec<u8> {
        (0..self.order() as u8).filter(|&a| self.elements[a as usize].is_involution()).collect()
    }
}

fn lexicographic_permutations(q: usize) -> Vec<Permutation> {
    let mut current: Vec<usize> = (0..q).collect();
    let mut out = Vec::new();
    loop {
        out.push(Permutation::from_images(&current).expect("valid permutation"));
        // Next permutation in lexicographic order.
        let Some(i) = (0..q.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..q).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}
