use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

/// Which box points are unknowns.
#[derive(Debug, Clone, PartialEq)]
pub enum Mask {
    /// Every point off the box faces is interior.
    None,
    /// Only points strictly inside the ball are interior; the rest carry
    /// Dirichlet data (staircase boundary).
    Ball { center: Vec<f64>, radius: f64 },
}

/// Uniform tensor grid on an axis-aligned box in 2 or 3 dimensions.
///
/// Storage is row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: Vec<usize>,
    mask: Mask,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl GridDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>, mask: Mask) -> Result<Self> {
        let dim = lower.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::Argument(format!("grid dimension must be 2 or 3, got {dim}")));
        }
        if upper.len() != dim || cells.len() != dim {
            return Err(Error::Argument("corner and cell lists must have the same length".into()));
        }
        for a in 0..dim {
            if !(lower[a].is_finite() && upper[a].is_finite()) || upper[a] <= lower[a] {
                return Err(Error::Argument(format!(
                    "axis {a}: need finite lower < upper, got {} and {}",
                    lower[a], upper[a]
                )));
            }
            if cells[a] < MIN_CELLS {
                return Err(Error::Argument(format!(
                    "axis {a}: need at least {MIN_CELLS} cells, got {}",
                    cells[a]
                )));
            }
        }
        if let Mask::Ball { center, radius } = &mask {
            if center.len() != dim || !(*radius > 0.0) {
                return Err(Error::Argument("ball mask needs a center of the grid dimension and a positive radius".into()));
            }
        }
        let spacing: Vec<f64> = (0..dim)
            .map(|a| (upper[a] - lower[a]) / cells[a] as f64)
            .collect();
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * (cells[a + 1] + 1);
        }
        let len = cells.iter().map(|c| c + 1).product();
        Ok(GridDomain {
            dim,
            lower,
            upper,
            cells,
            mask,
            spacing,
            strides,
            len,
        })
    }

    /// Cube `[-r, r]^dim` with `cells` cells per axis.
    pub fn centered_box(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], vec![cells; dim], Mask::None)
    }

    /// Cube `[-r, r]^dim` whose interior is the open ball of radius `r`.
    pub fn centered_ball(dim: usize, radius: f64, cells: usize) -> Result<Self> {
        Self::new(
            vec![-radius; dim],
            vec![radius; dim],
            vec![cells; dim],
            Mask::Ball {
                center: vec![0.0; dim],
                radius,
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Points per axis.
    pub fn points(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c + 1).collect()
    }

    /// The largest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Single spacing shared by every axis, if there is one.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h0 = self.spacing[0];
        self.spacing
            .iter()
            .all(|h| (h - h0).abs() <= 1e-12 * h0)
            .then_some(h0)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim).map(|a| 0.5 * (self.lower[a] + self.upper[a])).collect()
    }

    /// Radius of the largest ball centered at [`Self::center`] inside the box
    /// (or the mask radius when masked).
    pub fn inscribed_radius(&self) -> f64 {
        match &self.mask {
            Mask::Ball { radius, .. } => *radius,
            Mask::None => (0..self.dim)
                .map(|a| 0.5 * (self.upper[a] - self.lower[a]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn off_faces(&self, multi: &[usize]) -> bool {
        multi.iter().zip(&self.cells).all(|(&i, &c)| i > 0 && i < c)
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        let m = self.multi_index(flat);
        if !self.off_faces(&m) {
            return false;
        }
        match &self.mask {
            Mask::None => true,
            Mask::Ball { center, radius } => {
                let x = self.position(flat);
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 < radius * radius
            }
        }
    }

    pub fn interior_points(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_interior(i)).collect()
    }

    /// Grid point closest to the domain center.
    pub fn nearest_to_center(&self) -> usize {
        let c = self.center();
        let multi: Vec<usize> = (0..self.dim)
            .map(|a| {
                let t = ((c[a] - self.lower[a]) / self.spacing[a]).round();
                (t.max(0.0) as usize).min(self.cells[a])
            })
            .collect();
        self.flat_index(&multi)
    }

    /// Same box refined by a factor of two on every axis.
    pub fn refined(&self) -> Result<Self> {
        let mask = match &self.mask {
            Mask::None => Mask::None,
            Mask::Ball { center, radius } => Mask::Ball {
                center: center.clone(),
                radius: *radius,
            },
        };
        Self::new(
            self.lower.clone(),
            self.upper.clone(),
            self.cells.iter().map(|c| 2 * c).collect(),
            mask,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_and_layout() {
        let g = GridDomain::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0], vec![8, 10, 12], Mask::None).unwrap();
        assert_eq!(g.len(), 9 * 11 * 13);
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(1), 13);
        for flat in [0, 1, 77, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        let x = g.position(g.flat_index(&[1, 2, 3]));
        assert!((x[0] - 0.125).abs() < 1e-15 && (x[1] - 0.4).abs() < 1e-15 && (x[2] - 0.75).abs() < 1e-15);
        assert_eq!(g.uniform_spacing(), None);
    }

    #[test]
    fn interior_counts() {
        let g = GridDomain::centered_box(2, 1.0, 8).unwrap();
        assert_eq!(g.interior_points().len(), 49);
        let b = GridDomain::centered_ball(2, 1.0, 8).unwrap();
        let n = b.interior_points().len();
        assert!(n < 49 && n > 20);
        assert!(b.is_interior(b.nearest_to_center()));
        assert_eq!(b.uniform_spacing(), Some(0.25));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDomain::centered_box(1, 1.0, 8).is_err());
        assert!(GridDomain::centered_box(4, 1.0, 8).is_err());
        assert!(GridDomain::centered_box(2, 1.0, 7).is_err());
        assert!(GridDomain::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![8, 8], Mask::None).is_err());
    }

    #[test]
    fn center_and_refinement() {
        let g = GridDomain::centered_box(3, 2.0, 8).unwrap();
        let c = g.nearest_to_center();
        assert_eq!(g.position(c), vec![0.0, 0.0, 0.0]);
        assert_eq!(g.inscribed_radius(), 2.0);
        let r = g.refined().unwrap();
        assert_eq!(r.cells(), &[16, 16, 16]);
        assert_eq!(r.h(), 0.25);
    }
}
