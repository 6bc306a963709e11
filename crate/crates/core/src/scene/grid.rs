use crate::geometry::Point2;

/// Integer cell coordinates: `i` indexes columns (x), `j` rows (y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// Uniform free/occupied grid. Cell `(0, 0)` spans `[origin, origin + cell_size)`
/// on both axes; `j` grows with world y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    occupied: Vec<bool>,
    origin: Point2,
    cell_size: f64,
}

// relative slack for corner ties in the traversal
const TIE_EPS: f64 = 1e-12;

impl OccupancyGrid {
    /// `occupied` is row-major with row `j = 0` first.
    pub fn new(width: usize, height: usize, occupied: Vec<bool>, origin: Point2, cell_size: f64) -> Option<Self> {
        if width == 0 || height == 0 || occupied.len() != width * height || !(cell_size > 0.0) {
            return None;
        }
        Some(Self { width, height, occupied, origin, cell_size })
    }

    pub fn empty(width: usize, height: usize, origin: Point2, cell_size: f64) -> Option<Self> {
        Self::new(width, height, vec![false; width * height], origin, cell_size)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn index(&self, c: Cell) -> usize {
        c.j * self.width + c.i
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_occupied(c)
    }

    pub fn set_occupied(&mut self, c: Cell, occupied: bool) {
        let idx = self.index(c);
        self.occupied[idx] = occupied;
    }

    /// World extent `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        let max = Point2::new(
            self.origin.x + self.width as f64 * self.cell_size,
            self.origin.y + self.height as f64 * self.cell_size,
        );
        (self.origin, max)
    }

    /// Closed bounds check.
    pub fn contains_point(&self, p: Point2) -> bool {
        let (lo, hi) = self.bounds();
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    fn continuous(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.origin.x) / self.cell_size, (p.y - self.origin.y) / self.cell_size)
    }

    /// Cell containing `p`; points on the far edge belong to the last cell.
    pub fn cell_of(&self, p: Point2) -> Option<Cell> {
        if !self.contains_point(p) {
            return None;
        }
        let (gx, gy) = self.continuous(p);
        let i = (gx.floor() as usize).min(self.width - 1);
        let j = (gy.floor() as usize).min(self.height - 1);
        Some(Cell::new(i, j))
    }

    pub fn cell_center(&self, c: Cell) -> Point2 {
        Point2::new(
            self.origin.x + (c.i as f64 + 0.5) * self.cell_size,
            self.origin.y + (c.j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn is_free_point(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    /// Visits every cell whose closed square the segment `a`-`b` touches,
    /// stopping early when `visit` returns `false`. When the segment passes
    /// exactly through a cell corner both side cells are visited.
    ///
    /// The endpoints are put in canonical order first so the visited set does
    /// not depend on argument order. Both points must be inside the grid.
    pub fn supercover(&self, a: Point2, b: Point2, mut visit: impl FnMut(Cell) -> bool) -> Option<bool> {
        let (a, b) = if (a.x, a.y).partial_cmp(&(b.x, b.y)) == Some(std::cmp::Ordering::Greater) {
            (b, a)
        } else {
            (a, b)
        };
        let start = self.cell_of(a)?;
        let end = self.cell_of(b)?;
        let (ax, ay) = self.continuous(a);
        let (bx, by) = self.continuous(b);
        let (dx, dy) = (bx - ax, by - ay);

        let step_x: isize = if end.i > start.i { 1 } else { -1 };
        let step_y: isize = if end.j > start.j { 1 } else { -1 };
        let mut left_x = start.i.abs_diff(end.i);
        let mut left_y = start.j.abs_diff(end.j);

        let (t_delta_x, mut t_max_x) = axis_params(ax, dx, start.i);
        let (t_delta_y, mut t_max_y) = axis_params(ay, dy, start.j);

        let (mut i, mut j) = (start.i as isize, start.j as isize);
        if !visit(start) {
            return Some(false);
        }
        while left_x > 0 || left_y > 0 {
            let tie = left_x > 0
                && left_y > 0
                && (t_max_x - t_max_y).abs() <= TIE_EPS * t_max_x.abs().max(t_max_y.abs()).max(1.0);
            if tie {
                let side_a = Cell::new((i + step_x) as usize, j as usize);
                let side_b = Cell::new(i as usize, (j + step_y) as usize);
                if !visit(side_a) || !visit(side_b) {
                    return Some(false);
                }
                i += step_x;
                j += step_y;
                t_max_x += t_delta_x;
                t_max_y += t_delta_y;
                left_x -= 1;
                left_y -= 1;
            } else if left_y == 0 || (left_x > 0 && t_max_x < t_max_y) {
                i += step_x;
                t_max_x += t_delta_x;
                left_x -= 1;
            } else {
                j += step_y;
                t_max_y += t_delta_y;
                left_y -= 1;
            }
            if !visit(Cell::new(i as usize, j as usize)) {
                return Some(false);
            }
        }
        Some(true)
    }

    /// Cells touched by the segment, in traversal order.
    pub fn supercover_cells(&self, a: Point2, b: Point2) -> Option<Vec<Cell>> {
        let mut cells = Vec::new();
        self.supercover(a, b, |c| {
            cells.push(c);
            true
        })?;
        Some(cells)
    }

    /// `None` when either endpoint is outside the grid.
    pub fn line_of_sight(&self, a: Point2, b: Point2) -> Option<bool> {
        self.supercover(a, b, |c| self.is_free(c))
    }

    /// Line of sight that ignores occupied cells for which `transparent` holds.
    pub fn line_of_sight_except(&self, a: Point2, b: Point2, transparent: impl Fn(Cell) -> bool) -> Option<bool> {
        self.supercover(a, b, |c| self.is_free(c) || transparent(c))
    }

    /// Rows in picture order (highest y first), `.` free and `#` occupied.
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|j| {
                (0..self.width)
                    .map(|i| if self.is_occupied(Cell::new(i, j)) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|idx| self.cell_at(idx)).filter(|c| self.is_free(*c))
    }

    /// 8-connected neighbours in a fixed order.
    pub fn neighbours(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(di, dj)| {
            let i = c.i as isize + di;
            let j = c.j as isize + dj;
            (i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height)
                .then(|| Cell::new(i as usize, j as usize))
        })
    }
}

/// `(t_delta, t_max)` for one axis of the traversal, in units of the segment parameter.
fn axis_params(origin: f64, delta: f64, cell: usize) -> (f64, f64) {
    if delta > 0.0 {
        let next = cell as f64 + 1.0;
        (1.0 / delta, (next - origin) / delta)
    } else if delta < 0.0 {
        let next = cell as f64;
        (-1.0 / delta, (next - origin) / delta)
    } else {
        (f64::INFINITY, f64::INFINITY)
    }
}
