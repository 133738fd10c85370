//! Discrete environment: a rectangular lattice of square cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer cell coordinate. `x` grows along the main walking direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }
}

/// Offsets of the Moore neighbourhood, own cell first.
pub const MOORE: [(i32, i32); 9] = [
    (0, 0),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Walkable,
    Obstacle,
    Target,
    Spawn(u16),
}

impl CellKind {
    pub fn is_walkable(self) -> bool {
        !matches!(self, CellKind::Obstacle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<CellKind>,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl Environment {
    /// An all-walkable grid.
    pub fn new(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(Error::InvalidGeometry(format!(
                "grid dimensions {width}x{height} out of range"
            )));
        }
        Ok(Environment {
            width,
            height,
            cell_size,
            cells: vec![CellKind::Walkable; width * height],
            periodic_x: false,
            periodic_y: false,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.contains(c), "{c:?} outside grid");
        c.y as usize * self.width + c.x as usize
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn kind(&self, c: Cell) -> CellKind {
        self.cells[self.index(c)]
    }

    pub fn set(&mut self, c: Cell, kind: CellKind) {
        let i = self.index(c);
        self.cells[i] = kind;
    }

    /// Sets every cell of the half-open rectangle `[x0, x1) x [y0, y1)`.
    pub fn fill(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, kind: CellKind) {
        for y in y0..y1 {
            for x in x0..x1 {
                self.set(Cell::new(x, y), kind);
            }
        }
    }

    #[inline]
    pub fn is_walkable(&self, c: Cell) -> bool {
        self.contains(c) && self.cells[self.index(c)].is_walkable()
    }

    pub fn is_target(&self, c: Cell) -> bool {
        self.contains(c) && matches!(self.kind(c), CellKind::Target)
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, CellKind)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, &k)| (self.cell_at(i), k))
    }

    pub fn cells_of(&self, pred: impl Fn(CellKind) -> bool) -> Vec<Cell> {
        self.cells()
            .filter(|&(_, k)| pred(k))
            .map(|(c, _)| c)
            .collect()
    }

    pub fn walkable_count(&self) -> usize {
        self.cells.iter().filter(|k| k.is_walkable()).count()
    }

    /// Applies the periodic wrap to a raw coordinate. Returns `None` when the
    /// coordinate leaves a non-periodic axis.
    #[inline]
    pub fn wrap(&self, x: i32, y: i32) -> Option<Cell> {
        let (w, h) = (self.width as i32, self.height as i32);
        let x = if self.periodic_x {
            x.rem_euclid(w)
        } else if (0..w).contains(&x) {
            x
        } else {
            return None;
        };
        let y = if self.periodic_y {
            y.rem_euclid(h)
        } else if (0..h).contains(&y) {
            y
        } else {
            return None;
        };
        Some(Cell::new(x, y))
    }

    /// Cell reached from `from` by the offset `(dx, dy)`, if the step is
    /// legal: the destination is walkable, and a diagonal step does not cut
    /// the corner of an obstacle.
    #[inline]
    pub fn step_target(&self, from: Cell, dx: i32, dy: i32) -> Option<Cell> {
        let to = self.wrap(from.x + dx, from.y + dy)?;
        if !self.cells[self.index(to)].is_walkable() {
            return None;
        }
        if dx != 0 && dy != 0 {
            let side_a = self.wrap(from.x + dx, from.y)?;
            let side_b = self.wrap(from.x, from.y + dy)?;
            if !self.is_walkable(side_a) || !self.is_walkable(side_b) {
                return None;
            }
        }
        Some(to)
    }

    /// Minimum-image displacement `b - a` in cell units.
    #[inline]
    pub fn delta(&self, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let mut dx = b.0 - a.0;
        let mut dy = b.1 - a.1;
        if self.periodic_x {
            let w = self.width as f64;
            dx -= w * (dx / w).round();
        }
        if self.periodic_y {
            let h = self.height as f64;
            dy -= h * (dy / h).round();
        }
        (dx, dy)
    }

    /// Euclidean distance in meters between two continuous cell-coordinate
    /// points, wrapped on periodic axes.
    #[inline]
    pub fn distance_m(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (dx, dy) = self.delta(a, b);
        dx.hypot(dy) * self.cell_size
    }

    /// Minimum-image integer displacement between two cells.
    pub fn cell_delta(&self, from: Cell, to: Cell) -> (i32, i32) {
        let (dx, dy) = self.delta((from.x as f64, from.y as f64), (to.x as f64, to.y as f64));
        (dx as i32, dy as i32)
    }

    /// Center of a cell in meters (unwrapped).
    pub fn center_m(&self, c: Cell) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_size,
            (c.y as f64 + 0.5) * self.cell_size,
        )
    }
}
