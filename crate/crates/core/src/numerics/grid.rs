use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Uniform tensor-product grid on a box in `ℝᵏ`.
///
/// Nodes are numbered row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let k = counts.len();
        if k == 0 {
            return Err(Error::GridError(
                "a grid needs at least one axis".to_string(),
            ));
        }
        if lo.len() != k || hi.len() != k {
            return Err(Error::GridError(format!(
                "{} lower and {} upper bounds for {k} axes",
                lo.len(),
                hi.len()
            )));
        }
        for a in 0..k {
            if counts[a] < 3 {
                return Err(Error::GridError(format!(
                    "axis {} has {} nodes; at least 3 are required",
                    a + 1,
                    counts[a]
                )));
            }
            if !(lo[a].is_finite() && hi[a].is_finite() && hi[a] > lo[a]) {
                return Err(Error::GridError(format!(
                    "axis {} has a degenerate range [{}, {}]",
                    a + 1,
                    lo[a],
                    hi[a]
                )));
            }
        }
        let mut strides = alloc::vec![1; k];
        for a in (0..k - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(Self {
            lo,
            hi,
            counts,
            strides,
        })
    }

    /// Same range and node count on every axis.
    pub fn uniform(k: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(
            alloc::vec![lo; k],
            alloc::vec![hi; k],
            alloc::vec![count; k],
        )
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.k()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn linear(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.k() || index.iter().zip(&self.counts).any(|(i, c)| i >= c) {
            return Err(Error::IndexError {
                index: index.to_vec(),
                counts: self.counts.clone(),
            });
        }
        Ok(index.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    pub fn multi(&self, linear: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| (linear / s) % c)
            .collect()
    }

    #[inline]
    pub fn axis_index(&self, linear: usize, axis: usize) -> usize {
        (linear / self.strides[axis]) % self.counts[axis]
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn point(&self, linear: usize) -> Vec<f64> {
        (0..self.k())
            .map(|a| self.coordinate(a, self.axis_index(linear, a)))
            .collect()
    }

    pub fn is_interior(&self, linear: usize) -> bool {
        (0..self.k()).all(|a| {
            let i = self.axis_index(linear, a);
            i > 0 && i + 1 < self.counts[a]
        })
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&l| self.is_interior(l)).collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Second-order derivative along `axis` of nodal values `f` at node `linear`.
    ///
    /// Central differences inside, one-sided three-point stencils on the boundary.
    pub fn derivative(&self, f: impl Fn(usize) -> f64, linear: usize, axis: usize) -> f64 {
        let h = self.spacing(axis);
        let s = self.strides[axis];
        let i = self.axis_index(linear, axis);
        let c = self.counts[axis];
        if i == 0 {
            (-3.0 * f(linear) + 4.0 * f(linear + s) - f(linear + 2 * s)) / (2.0 * h)
        } else if i + 1 == c {
            (3.0 * f(linear) - 4.0 * f(linear - s) + f(linear - 2 * s)) / (2.0 * h)
        } else {
            (f(linear + s) - f(linear - s)) / (2.0 * h)
        }
    }

    /// Lower-corner node, all indices zero.
    pub fn low_corner(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let g = Grid::new(
            alloc::vec![0.0, -1.0],
            alloc::vec![1.0, 1.0],
            alloc::vec![4, 5],
        )
        .unwrap();
        assert_eq!(g.len(), 20);
        for l in 0..g.len() {
            assert_eq!(g.linear(&g.multi(l)).unwrap(), l);
        }
        assert_eq!(g.linear(&[1, 2]).unwrap(), 7);
        assert_eq!(g.point(7), alloc::vec![1.0 / 3.0, 0.0]);
        assert!(matches!(g.linear(&[4, 0]), Err(Error::IndexError { .. })));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::uniform(2, 0.0, 1.0, 2).is_err());
        assert!(Grid::uniform(1, 1.0, 1.0, 5).is_err());
        assert!(Grid::new(alloc::vec![0.0], alloc::vec![1.0, 2.0], alloc::vec![5]).is_err());
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let g = Grid::uniform(1, -1.0, 2.0, 7).unwrap();
        let f = |l: usize| {
            let x = g.point(l)[0];
            x * x - 3.0 * x
        };
        for l in 0..g.len() {
            let x = g.point(l)[0];
            assert!((g.derivative(f, l, 0) - (2.0 * x - 3.0)).abs() < 1e-12);
        }
    }
}
