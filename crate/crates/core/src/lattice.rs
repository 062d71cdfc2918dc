//! Lattice cells `Z^{d1}_{>=0} x Z^{d2}` and cube specifications.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum supported lattice dimension.
pub const MAX_DIM: usize = 3;

/// Integer lattice vector of dimension `1..=MAX_DIM`, stored inline.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl LatticeVector {
    pub fn zero(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "lattice dimension {dim} unsupported"
        );
        LatticeVector {
            coords: [0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn new(coords: &[i64]) -> Self {
        let mut v = Self::zero(coords.len());
        v.coords[..coords.len()].copy_from_slice(coords);
        v
    }

    /// Unit vector `e_axis` in dimension `dim`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zero(dim);
        v.coords[axis] = 1;
        v
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.coords()[axis]
    }

    pub fn set(&mut self, axis: usize, value: i64) {
        assert!(axis < self.dim());
        self.coords[axis] = value;
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coords().iter().map(|&c| c as f64).collect()
    }

    pub fn l1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn sum(&self) -> i64 {
        self.coords().iter().sum()
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Add for LatticeVector {
    type Output = LatticeVector;
    fn add(self, rhs: LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for i in 0..self.dim() {
            out.coords[i] += rhs.coords[i];
        }
        out
    }
}

impl Sub for LatticeVector {
    type Output = LatticeVector;
    fn sub(self, rhs: LatticeVector) -> LatticeVector {
        self + (-rhs)
    }
}

impl Neg for LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        let mut out = self;
        for i in 0..self.dim() {
            out.coords[i] = -out.coords[i];
        }
        out
    }
}

impl Serialize for LatticeVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<i64> = Vec::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "lattice vector must have 1..={MAX_DIM} coordinates"
            )));
        }
        Ok(LatticeVector::new(&v))
    }
}

/// Splitting `d = d1 + d2`: the first `d1` coordinates are constrained to be
/// non-negative (half-lines), the remaining `d2` range over `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimSplit {
    pub d1: usize,
    pub d2: usize,
}

impl DimSplit {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        let d = d1 + d2;
        if d == 0 || d > MAX_DIM {
            return Err(Error::Argument(format!(
                "lattice dimension {d} must be in 1..={MAX_DIM}"
            )));
        }
        Ok(DimSplit { d1, d2 })
    }

    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn contains(&self, z: &LatticeVector) -> bool {
        z.dim() == self.dim() && z.coords()[..self.d1].iter().all(|&c| c >= 0)
    }

    pub fn check(&self, z: &LatticeVector) -> Result<()> {
        if z.dim() != self.dim() {
            return Err(Error::Argument(format!(
                "lattice vector {z} has dimension {}, expected {}",
                z.dim(),
                self.dim()
            )));
        }
        if !self.contains(z) {
            return Err(Error::Domain(format!(
                "lattice vector {z} has a negative coordinate among the first {} axes",
                self.d1
            )));
        }
        Ok(())
    }
}

/// Axis-aligned box of lattice cells `prod_i [lo_i, hi_i]` (inclusive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CubeSpec {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::Argument(
                "cube bounds must have equal dimension in 1..=3".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Argument(format!("empty cube lo={lo:?} hi={hi:?}")));
        }
        Ok(CubeSpec { lo, hi })
    }

    /// Cube of side `side` (cells per axis) centred at `center`.
    pub fn centered(center: &[i64], side: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::Argument("cube side must be positive".into()));
        }
        let s = side as i64;
        let lo: Vec<i64> = center.iter().map(|c| c - (s - 1) / 2).collect();
        let hi: Vec<i64> = lo.iter().map(|l| l + s - 1).collect();
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cell_count(&self) -> u64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as u64)
            .product()
    }

    pub fn contains(&self, z: &LatticeVector) -> bool {
        z.dim() == self.dim()
            && z.coords()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (l, h))| c >= l && c <= h)
    }

    /// Check that every cell of the cube lies in the lattice of `split`.
    pub fn check_within(&self, split: &DimSplit) -> Result<()> {
        if self.dim() != split.dim() {
            return Err(Error::Argument(format!(
                "cube has dimension {}, lattice has dimension {}",
                self.dim(),
                split.dim()
            )));
        }
        if self.lo[..split.d1].iter().any(|&l| l < 0) {
            return Err(Error::Domain(format!(
                "cube {:?}..{:?} leaves the half-lattice",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Cell with the given linear index in row-major order.
    pub fn cell(&self, mut index: u64) -> LatticeVector {
        let mut z = LatticeVector::zero(self.dim());
        for axis in (0..self.dim()).rev() {
            let w = (self.hi[axis] - self.lo[axis] + 1) as u64;
            z.set(axis, self.lo[axis] + (index % w) as i64);
            index /= w;
        }
        z
    }

    pub fn cells(&self) -> impl Iterator<Item = LatticeVector> + '_ {
        (0..self.cell_count()).map(|i| self.cell(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_norms() {
        let a = LatticeVector::new(&[1, -2, 3]);
        let b = LatticeVector::new(&[0, 5, -1]);
        assert_eq!((a + b).coords(), &[1, 3, 2]);
        assert_eq!((a - b).coords(), &[1, -7, 4]);
        assert_eq!(a.l1(), 6);
        assert_eq!(a.linf(), 3);
        assert_eq!(a.sum(), 2);
    }

    #[test]
    fn split_membership() {
        let s = DimSplit::new(1, 1).unwrap();
        assert!(s.contains(&LatticeVector::new(&[0, -4])));
        assert!(!s.contains(&LatticeVector::new(&[-1, 0])));
        assert!(s.check(&LatticeVector::new(&[2])).is_err());
        assert!(DimSplit::new(0, 0).is_err());
        assert!(DimSplit::new(2, 2).is_err());
    }

    #[test]
    fn cube_enumeration() {
        let c = CubeSpec::centered(&[0, 0], 3).unwrap();
        assert_eq!(c.lo, vec![-1, -1]);
        assert_eq!(c.cell_count(), 9);
        let cells: Vec<_> = c.cells().collect();
        assert_eq!(cells[0].coords(), &[-1, -1]);
        assert_eq!(cells[8].coords(), &[1, 1]);
        assert!(cells.iter().all(|z| c.contains(z)));
        let even = CubeSpec::centered(&[5], 4).unwrap();
        assert_eq!((even.lo[0], even.hi[0]), (4, 7));
    }

    #[test]
    fn cube_half_lattice_check() {
        let s = DimSplit::new(1, 0).unwrap();
        assert!(CubeSpec::new(vec![0], vec![9])
            .unwrap()
            .check_within(&s)
            .is_ok());
        assert!(CubeSpec::new(vec![-1], vec![9])
            .unwrap()
            .check_within(&s)
            .is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let a = LatticeVector::new(&[3, -1]);
        let js = serde_json::to_string(&a).unwrap();
        assert_eq!(js, "[3,-1]");
        let b: LatticeVector = serde_json::from_str(&js).unwrap();
        assert_eq!(a, b);
    }
}
