//! BS and user placement.

use rand::Rng;
use std::f64::consts::PI;

use super::ScenarioError;

/// Inner and outer radius of the user annulus around each BS (m).
pub const MIN_USER_DISTANCE: f64 = 35.0;
pub const MAX_USER_DISTANCE: f64 = 250.0;

/// Draw budget for filling the cells of a stochastic grid.
pub const STOCHASTIC_DRAW_CAP: usize = 1_000_000;

/// 2-D position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// BS positions and the `K` users served by each BS. `users[j][k]` is user
/// `k` of cell `j`; its serving BS is `bs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub bs: Vec<Point>,
    pub users: Vec<Vec<Point>>,
    /// Side of the deployment square for stochastic grids.
    pub area_side: Option<f64>,
}

impl NetworkLayout {
    pub fn cells(&self) -> usize {
        self.bs.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.users.first().map_or(0, Vec::len)
    }

    /// Distance from user `k` of cell `j` to BS `l`.
    pub fn distance(&self, l: usize, j: usize, k: usize) -> f64 {
        self.bs[l].distance(&self.users[j][k])
    }

    /// Index of the BS closest to `p` (lowest index on ties).
    pub fn nearest_bs(&self, p: &Point) -> usize {
        nearest(&self.bs, p)
    }

    /// The cell whose BS is closest to the centroid of all BSs. This is the
    /// cell probed under a symmetric square grid.
    pub fn central_cell(&self) -> usize {
        let n = self.bs.len() as f64;
        let cx = self.bs.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = self.bs.iter().map(|p| p.y).sum::<f64>() / n;
        self.nearest_bs(&Point::new(cx, cy))
    }
}

fn nearest(bs: &[Point], p: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, b) in bs.iter().enumerate() {
        let d = b.distance(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Uniform (in area) point in the annulus `[r_min, r_max]` around `center`.
fn annulus_point<R: Rng + ?Sized>(center: &Point, r_min: f64, r_max: f64, rng: &mut R) -> Point {
    let u: f64 = rng.random();
    let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + r * phi.cos(), center.y + r * phi.sin())
}

/// `√L×√L` grid of square cells with the BS at each centre and `K` users per
/// cell uniform in the 35–250 m annulus around their own BS. Users are not
/// clipped to the cell boundary and distances do not wrap around.
pub fn build_square_grid<R: Rng + ?Sized>(
    cells: usize,
    cell_side: f64,
    users: usize,
    rng: &mut R,
) -> Result<NetworkLayout, ScenarioError> {
    let side = (cells as f64).sqrt().round() as usize;
    if cells == 0 || side * side != cells {
        return Err(ScenarioError::InvalidCellCount(cells));
    }
    if cell_side <= 0.0 {
        return Err(ScenarioError::InvalidParameter(format!("cell side {cell_side}")));
    }
    let bs: Vec<Point> = (0..cells)
        .map(|l| {
            let (row, col) = (l / side, l % side);
            Point::new((col as f64 + 0.5) * cell_side, (row as f64 + 0.5) * cell_side)
        })
        .collect();
    let users = bs
        .iter()
        .map(|b| {
            (0..users)
                .map(|_| annulus_point(b, MIN_USER_DISTANCE, MAX_USER_DISTANCE, rng))
                .collect()
        })
        .collect();
    Ok(NetworkLayout {
        bs,
        users,
        area_side: None,
    })
}

/// `L` BSs uniform in an `area_side × area_side` square; users drawn
/// uniformly in the square and kept only if their nearest BS still has
/// room, until every cell holds exactly `K` users.
pub fn build_stochastic_grid<R: Rng + ?Sized>(
    cells: usize,
    area_side: f64,
    users: usize,
    rng: &mut R,
) -> Result<NetworkLayout, ScenarioError> {
    if cells == 0 || users == 0 {
        return Err(ScenarioError::InvalidParameter("cells and users must be positive".into()));
    }
    if area_side <= 0.0 {
        return Err(ScenarioError::InvalidParameter(format!("area side {area_side}")));
    }
    let uniform = |rng: &mut R| Point::new(area_side * rng.random::<f64>(), area_side * rng.random::<f64>());
    let bs: Vec<Point> = (0..cells).map(|_| uniform(rng)).collect();
    let mut placed: Vec<Vec<Point>> = vec![Vec::with_capacity(users); cells];
    let mut remaining = cells * users;
    for _ in 0..STOCHASTIC_DRAW_CAP {
        let p = uniform(rng);
        let cell = nearest(&bs, &p);
        if placed[cell].len() < users {
            placed[cell].push(p);
            remaining -= 1;
            if remaining == 0 {
                return Ok(NetworkLayout {
                    bs,
                    users: placed,
                    area_side: Some(area_side),
                });
            }
        }
    }
    Err(ScenarioError::Timeout {
        users,
        draws: STOCHASTIC_DRAW_CAP,
    })
}
