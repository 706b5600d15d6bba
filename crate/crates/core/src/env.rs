//! Deterministic gridworld maze: dynamics, goal mapping and sparse reward.
//!
//! Cells are addressed by `(x, y)` with `y = 0` on the first row of a maze
//! file. `Up` moves towards larger `y`. Moving into a wall or off the grid
//! leaves the agent in place.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Goal {
    pub x: usize,
    pub y: usize,
}

impl State {
    pub const fn new(x: usize, y: usize) -> Self {
        State { x, y }
    }
}

impl Goal {
    pub const fn new(x: usize, y: usize) -> Self {
        Goal { x, y }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, 1),
            Action::Down => (0, -1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

/// The known state-to-goal mapping: the goal occupying the same cell.
pub fn phi(s: State) -> Goal {
    Goal { x: s.x, y: s.y }
}

/// Sparse goal reward: `0` when `|phi(s) - g|^2 < delta`, `-1` otherwise.
pub fn reward<F: Scalar>(s: State, g: Goal, delta: F) -> F {
    if is_terminal(s, g, delta) {
        F::zero()
    } else {
        -F::one()
    }
}

pub fn is_terminal<F: Scalar>(s: State, g: Goal, delta: F) -> bool {
    let p = phi(s);
    let dx = p.x as f64 - g.x as f64;
    let dy = p.y as f64 - g.y as f64;
    F::of(dx * dx + dy * dy) < delta
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start_cells: Vec<State>,
}

impl Maze {
    /// Builds and validates a maze from explicit wall coordinates.
    pub fn new(
        width: usize,
        height: usize,
        walls: impl IntoIterator<Item = (usize, usize)>,
        start_cells: Vec<State>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || width * height < 2 {
            return Err(Error::InvalidMaze(format!("dimensions {width}x{height} too small")));
        }
        let mut grid = vec![false; width * height];
        for (x, y) in walls {
            if x >= width || y >= height {
                return Err(Error::InvalidMaze(format!("wall ({x}, {y}) outside grid")));
            }
            grid[y * width + x] = true;
        }
        let maze = Maze { width, height, walls: grid, start_cells };
        maze.validate()?;
        Ok(maze)
    }

    /// An obstacle-free grid.
    pub fn open(width: usize, height: usize, start_cells: Vec<State>) -> Result<Self> {
        Self::new(width, height, std::iter::empty(), start_cells)
    }

    fn validate(&self) -> Result<()> {
        if self.start_cells.is_empty() {
            return Err(Error::InvalidMaze("no start cells".into()));
        }
        for s in &self.start_cells {
            if !self.is_free(s.x as i64, s.y as i64) {
                return Err(Error::InvalidMaze(format!("start cell {s} is a wall or outside")));
            }
        }
        for s in self.free_states() {
            let has_neighbor = Action::ALL.iter().any(|&a| {
                let (dx, dy) = a.delta();
                self.is_free(s.x as i64 + dx, s.y as i64 + dy)
            });
            if !has_neighbor {
                return Err(Error::InvalidMaze(format!("cell {s} has no free neighbour")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn start_cells(&self) -> &[State] {
        &self.start_cells
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        x >= self.width || y >= self.height || self.walls[y * self.width + x]
    }

    fn is_free(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && !self.is_wall(x as usize, y as usize)
    }

    /// Validated constructor for a state.
    pub fn state(&self, x: i64, y: i64) -> Result<State> {
        if self.is_free(x, y) {
            Ok(State::new(x as usize, y as usize))
        } else {
            Err(Error::MalformedState { x, y })
        }
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        self.state(s.x as i64, s.y as i64).map(|_| ())
    }

    pub fn check_goal(&self, g: Goal) -> Result<()> {
        self.state(g.x as i64, g.y as i64).map(|_| ())
    }

    /// Row-major cell index, including wall cells.
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn free_states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width)
                .filter(move |&x| !self.walls[y * self.width + x])
                .map(move |x| State::new(x, y))
        })
    }

    pub fn n_free(&self) -> usize {
        self.walls.iter().filter(|w| !**w).count()
    }

    /// Deterministic blocking transition.
    pub fn step(&self, s: State, a: Action) -> Result<State> {
        self.check_state(s)?;
        Ok(self.step_unchecked(s, a))
    }

    /// `step` for states already known to be valid.
    pub fn step_unchecked(&self, s: State, a: Action) -> State {
        let (dx, dy) = a.delta();
        let (nx, ny) = (s.x as i64 + dx, s.y as i64 + dy);
        if self.is_free(nx, ny) {
            State::new(nx as usize, ny as usize)
        } else {
            s
        }
    }

    /// Shortest-path distances (in steps) from every free cell to `target`;
    /// `None` for walls and cells that cannot reach it.
    pub fn distances_to(&self, target: State) -> Vec<Option<usize>> {
        // Moves between free neighbours are symmetric, so a forward BFS from
        // the target yields distances towards it.
        let mut dist = vec![None; self.n_cells()];
        if self.check_state(target).is_err() {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(target.x, target.y)] = Some(0);
        queue.push_back(target);
        while let Some(s) = queue.pop_front() {
            let d = dist[self.index(s.x, s.y)].unwrap();
            for a in Action::ALL {
                let n = self.step_unchecked(s, a);
                let slot = &mut dist[self.index(n.x, n.y)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn distance(&self, from: State, to: State) -> Option<usize> {
        self.distances_to(to)[self.index(from.x, from.y)]
    }

    /// Parses the plain-text maze format: a `width height` line followed by
    /// `height` rows of `#` (wall), `.` (free) and `S` (start, free).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (lno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::parse(lno + 1, "expected `width height`"));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::parse(lno + 1, format!("bad dimension `{s}`: {e}")))
        };
        let (width, height) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        let mut walls = Vec::new();
        let mut starts = Vec::new();
        let mut rows = 0;
        for (lno, line) in lines {
            let line = line.trim_end();
            if rows == height {
                return Err(Error::parse(lno + 1, "more rows than declared height"));
            }
            if line.chars().count() != width {
                return Err(Error::parse(lno + 1, format!("row has {} cells, expected {width}", line.chars().count())));
            }
            for (x, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walls.push((x, rows)),
                    '.' => {}
                    'S' => starts.push(State::new(x, rows)),
                    other => return Err(Error::parse(lno + 1, format!("unexpected character `{other}`"))),
                }
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::parse(text.lines().count(), format!("found {rows} rows, expected {height}")));
        }
        Maze::new(width, height, walls, starts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; `parse(to_text())` reproduces the maze.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.width, self.height);
        for row in self.rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub(crate) fn rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| {
                        if self.walls[self.index(x, y)] {
                            '#'
                        } else if self.start_cells.contains(&State::new(x, y)) {
                            'S'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
