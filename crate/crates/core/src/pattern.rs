//! Sign patterns over state coordinates.
//!
//! A [`Cell`] fixes the sign (zero, positive, negative) of every coordinate.
//! Every region of an abstraction is a finite union of cells, so region-level
//! questions reduce to questions about cells. A linear map sends a cell to a
//! single cell whenever no row can cancel: all nonzero terms of the row carry
//! the same sign on that cell.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::StateDomain;

/// Largest dimension for which cells are enumerated exhaustively (3^d cells).
pub const MAX_CELL_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoordSign {
    Zero,
    Pos,
    Neg,
}

impl CoordSign {
    pub fn of(v: f64, eps: f64) -> Self {
        if v > eps {
            CoordSign::Pos
        } else if v < -eps {
            CoordSign::Neg
        } else {
            CoordSign::Zero
        }
    }

    fn mul(self, other: CoordSign) -> CoordSign {
        match (self, other) {
            (CoordSign::Zero, _) | (_, CoordSign::Zero) => CoordSign::Zero,
            (a, b) if a == b => CoordSign::Pos,
            _ => CoordSign::Neg,
        }
    }

    fn unit(self) -> f64 {
        match self {
            CoordSign::Zero => 0.0,
            CoordSign::Pos => 1.0,
            CoordSign::Neg => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell(pub Vec<CoordSign>);

impl Cell {
    pub fn of(x: &DVector<f64>, eps: f64) -> Self {
        Cell(x.iter().map(|v| CoordSign::of(*v, eps)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != CoordSign::Zero)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|s| *s == CoordSign::Zero)
    }

    pub fn in_domain(&self, domain: &StateDomain) -> bool {
        self.0.iter().enumerate().all(|(k, s)| domain.allows(k, *s))
    }

    /// Image cell under `m`, or `None` when some row may cancel.
    pub fn image(&self, m: &DMatrix<f64>) -> Option<Cell> {
        let mut out = Vec::with_capacity(m.nrows());
        for p in 0..m.nrows() {
            let mut row_sign = CoordSign::Zero;
            for (q, s) in self.0.iter().enumerate() {
                let term = CoordSign::of(m[(p, q)], 0.0).mul(*s);
                if term == CoordSign::Zero {
                    continue;
                }
                if row_sign == CoordSign::Zero {
                    row_sign = term;
                } else if row_sign != term {
                    return None;
                }
            }
            out.push(row_sign);
        }
        Some(Cell(out))
    }

    /// A point of the cell with every nonzero coordinate of magnitude
    /// `magnitude`, clipped to the domain bounds.
    pub fn representative(&self, domain: &StateDomain, magnitude: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.0.iter().enumerate().map(|(k, s)| {
                let (lo, hi) = domain.coord_range(k, *s);
                (s.unit() * magnitude).clamp(lo, hi)
            }),
        )
    }

    /// Vertices of the closure of the cell intersected with a box domain.
    /// Returns `None` when the domain is unbounded.
    pub fn box_vertices(&self, domain: &StateDomain) -> Option<Vec<DVector<f64>>> {
        if !domain.is_bounded() {
            return None;
        }
        let support = self.support();
        let mut out = Vec::with_capacity(1 << support.len());
        for mask in 0u32..(1u32 << support.len()) {
            let mut x = DVector::zeros(self.dim());
            for (bit, &k) in support.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    let (lo, hi) = domain.coord_range(k, self.0[k]);
                    x[k] = if self.0[k] == CoordSign::Pos { hi } else { lo };
                }
            }
            out.push(x);
        }
        Some(out)
    }
}

/// All cells of dimension `dim` allowed by the domain, in a fixed order.
pub fn domain_cells(dim: usize, domain: &StateDomain) -> Result<Vec<Cell>> {
    if dim > MAX_CELL_DIM {
        return Err(Error::DimensionTooLarge {
            dim,
            limit: MAX_CELL_DIM,
        });
    }
    let total = 3usize.pow(dim as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut signs = Vec::with_capacity(dim);
        for _ in 0..dim {
            signs.push(match code % 3 {
                0 => CoordSign::Zero,
                1 => CoordSign::Pos,
                _ => CoordSign::Neg,
            });
            code /= 3;
        }
        let cell = Cell(signs);
        if cell.in_domain(domain) {
            out.push(cell);
        }
    }
    Ok(out)
}

/// Returns whether `m` keeps every vertex of `cell` inside a box domain.
pub fn image_stays_in_box(m: &DMatrix<f64>, cell: &Cell, domain: &StateDomain, eps: f64) -> bool {
    match cell.box_vertices(domain) {
        None => true,
        Some(vs) => vs.iter().all(|v| domain.contains(&(m * v), eps)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoordSign::*;

    #[test]
    fn diagonal_preserves_cells() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -0.5]);
        assert_eq!(Cell(vec![Pos, Neg]).image(&m), Some(Cell(vec![Pos, Pos])));
        assert_eq!(Cell(vec![Zero, Neg]).image(&m), Some(Cell(vec![Zero, Pos])));
    }

    #[test]
    fn mixed_row_is_indeterminate() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(Cell(vec![Pos, Neg]).image(&m), None);
        assert_eq!(Cell(vec![Pos, Pos]).image(&m), Some(Cell(vec![Pos, Pos])));
    }

    #[test]
    fn orthant_cells() {
        use crate::system::OrthantSign::NonNegative;
        let dom = StateDomain::Orthant { signs: vec![NonNegative, NonNegative] };
        assert_eq!(domain_cells(2, &dom).unwrap().len(), 4);
        assert_eq!(domain_cells(2, &StateDomain::All).unwrap().len(), 9);
    }

    #[test]
    fn representative_is_clipped() {
        let dom = StateDomain::Box { lower: vec![-0.5, -10.0], upper: vec![10.0, 10.0] };
        let x = Cell(vec![Neg, Pos]).representative(&dom, 1.0);
        assert_eq!(x.as_slice(), &[-0.5, 1.0]);
    }

    #[test]
    fn box_vertices_cover_extremes() {
        let dom = StateDomain::Box { lower: vec![-1.0, -2.0], upper: vec![3.0, 4.0] };
        let vs = Cell(vec![Pos, Neg]).box_vertices(&dom).unwrap();
        assert_eq!(vs.len(), 4);
        assert!(vs.iter().any(|v| v.as_slice() == [3.0, -2.0]));
        assert!(Cell(vec![Pos, Neg]).box_vertices(&StateDomain::All).is_none());
    }
}
