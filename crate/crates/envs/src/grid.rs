use std::f64::consts::PI;

/// Number of actions the agent can take.
pub const NUM_ACTIONS: usize = 4;
/// Previous-action index reported by the first observation of an episode.
pub const NOOP_ACTION: usize = NUM_ACTIONS;
/// View channels, one per [`CellType`].
pub const NUM_CHANNELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Forward = 0,
    TurnLeft = 1,
    TurnRight = 2,
    Interact = 3,
}

impl Action {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Action::Forward),
            1 => Some(Action::TurnLeft),
            2 => Some(Action::TurnRight),
            3 => Some(Action::Interact),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellType {
    Empty = 0,
    Wall = 1,
    Object = 2,
    Key = 3,
    Door = 4,
    Goal = 5,
}

impl CellType {
    pub fn channel(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn index(self, grid: usize) -> usize {
        self.y * grid + self.x
    }

    pub fn from_index(i: usize, grid: usize) -> Self {
        Self::new(i % grid, i / grid)
    }

    /// Neighbouring cell in `facing`, if it stays inside a `grid x grid` room.
    pub fn ahead(self, facing: Facing, grid: usize) -> Option<Pos> {
        let (dx, dy) = facing.delta();
        let nx = self.x as i64 + dx;
        let ny = self.y as i64 + dy;
        (nx >= 0 && ny >= 0 && (nx as usize) < grid && (ny as usize) < grid)
            .then(|| Pos::new(nx as usize, ny as usize))
    }
}

/// Heading on the grid; `y` grows southwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Facing {
    North,
    East,
    South,
    West,
}

impl Facing {
    pub const ALL: [Facing; 4] = [Facing::North, Facing::East, Facing::South, Facing::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Facing::North => (0, -1),
            Facing::East => (1, 0),
            Facing::South => (0, 1),
            Facing::West => (-1, 0),
        }
    }

    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

/// Result of casting the view rays.
pub(crate) struct View {
    /// Channel-major intensities, `NUM_CHANNELS x len`.
    pub data: Vec<f64>,
    pub hits: Vec<CellType>,
}

/// Fans `len` rays from the agent's cell centre across the forward
/// half-plane, left to right. Each ray stops at the first non-empty cell;
/// that cell's channel gets `1 / (1 + distance)` and the empty channel the
/// complement, so nearer hits are brighter.
pub(crate) fn cast_view(
    agent: Pos,
    facing: Facing,
    len: usize,
    cell_at: impl Fn(i64, i64) -> CellType,
) -> View {
    let mut data = vec![0.0; NUM_CHANNELS * len];
    let mut hits = Vec::with_capacity(len);
    let (fx, fy) = facing.delta();
    let (fx, fy) = (fx as f64, fy as f64);
    // right-hand perpendicular with y pointing south
    let (rx, ry) = (-fy, fx);
    for j in 0..len {
        let angle = if len == 1 {
            0.0
        } else {
            -PI / 2.0 + PI * j as f64 / (len - 1) as f64
        };
        let (c, s) = (angle.cos(), angle.sin());
        let dir = (c * fx + s * rx, c * fy + s * ry);
        let (cell, dist) = march(agent, dir, &cell_at);
        let near = 1.0 / (1.0 + dist);
        data[cell.channel() * len + j] = near;
        data[CellType::Empty.channel() * len + j] += 1.0 - near;
        hits.push(cell);
    }
    View { data, hits }
}

/// Grid traversal from the centre of `start` until a non-empty cell.
fn march(start: Pos, (dx, dy): (f64, f64), cell_at: &impl Fn(i64, i64) -> CellType) -> (CellType, f64) {
    let (ox, oy) = (start.x as f64 + 0.5, start.y as f64 + 0.5);
    let (mut cx, mut cy) = (start.x as i64, start.y as i64);
    let axis = |d: f64, o: f64, c: i64| -> (i64, f64, f64) {
        if d > 1e-12 {
            (1, ((c + 1) as f64 - o) / d, 1.0 / d)
        } else if d < -1e-12 {
            (-1, (c as f64 - o) / d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_max_x, dt_x) = axis(dx, ox, cx);
    let (step_y, mut t_max_y, dt_y) = axis(dy, oy, cy);
    loop {
        let t = if t_max_x < t_max_y {
            cx += step_x;
            let t = t_max_x;
            t_max_x += dt_x;
            t
        } else {
            cy += step_y;
            let t = t_max_y;
            t_max_y += dt_y;
            t
        };
        let cell = cell_at(cx, cy);
        if cell != CellType::Empty {
            return (cell, t);
        }
    }
}
