use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::SystemParams;
use crate::error::{Error, Result};

/// Absolute tolerance (m) for every constraint comparison on positions.
pub const POSITION_TOL: f64 = 1e-12;

/// User positions on the ground plane (z = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    positions: Vec<[f64; 2]>,
}

impl UserSet {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyUserSet);
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// (x, y) of user `k`.
    pub fn xy(&self, k: usize) -> [f64; 2] {
        self.positions[k]
    }

    /// Full 3-D position of user `k`; z is always zero.
    pub fn position(&self, k: usize) -> [f64; 3] {
        let [x, y] = self.positions[k];
        [x, y, 0.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.positions.iter().copied()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.positions.len() as f64;
        let (sx, sy) = self
            .positions
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }
}

/// Draws `params.users` users uniformly over the service region.
///
/// With one waveguide the strip is centered on it (y in [-Dy/2, Dy/2]);
/// otherwise users cover [0, Dx] x [0, Dy], the span of the waveguide grid.
pub fn sample_users(params: &SystemParams, seed: u64) -> UserSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_users_with(params, &mut rng)
}

pub fn sample_users_with<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> UserSet {
    let (y_lo, y_hi) = region_y_range(params);
    let positions = (0..params.users)
        .map(|_| [rng.gen_range(0.0..=params.dx), rng.gen_range(y_lo..=y_hi)])
        .collect();
    UserSet { positions }
}

/// y-extent of the user region under the waveguide-count convention.
pub fn region_y_range(params: &SystemParams) -> (f64, f64) {
    if params.waveguides == 1 {
        (-params.dy / 2.0, params.dy / 2.0)
    } else {
        (0.0, params.dy)
    }
}

/// y-coordinate at the middle of the user region.
pub fn region_y_center(params: &SystemParams) -> f64 {
    let (lo, hi) = region_y_range(params);
    0.5 * (lo + hi)
}

/// Placement of the waveguides across the region.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideLayout {
    pub y_coords: Vec<f64>,
    pub height: f64,
}

impl WaveguideLayout {
    pub fn new(params: &SystemParams) -> Self {
        let m = params.waveguides;
        let y_coords = if m == 1 {
            vec![params.single_waveguide_y]
        } else {
            let step = params.dy / (m - 1) as f64;
            (0..m).map(|i| i as f64 * step).collect()
        };
        Self {
            y_coords,
            height: params.height,
        }
    }

    pub fn len(&self) -> usize {
        self.y_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_coords.is_empty()
    }

    /// Feed point of waveguide `m`.
    pub fn feed_point(&self, m: usize) -> [f64; 3] {
        [0.0, self.y_coords[m], self.height]
    }
}

/// Euclidean distance from an antenna at `point` to a ground user.
pub fn distance(point: [f64; 3], user: [f64; 2]) -> f64 {
    let dx = point[0] - user[0];
    let dy = point[1] - user[1];
    (point[2] * point[2] + dx * dx + dy * dy).sqrt()
}

/// x-coordinates of every pinching antenna, one column per waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingLayout {
    columns: Vec<Vec<f64>>,
}

impl PinchingLayout {
    /// Builds a layout from columns; all columns must have equal length.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.first().map(Vec::len).unwrap_or(0);
        if columns.is_empty() || n == 0 {
            return Err(Error::InfeasibleLayout("layout must be non-empty".into()));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self { columns })
    }

    /// `n` antennas per waveguide spread evenly over [0, dx]. A single
    /// antenna sits at the middle.
    pub fn uniform(params: &SystemParams) -> Self {
        let n = params.pas_per_waveguide;
        let column: Vec<f64> = if n == 1 {
            vec![params.dx / 2.0]
        } else {
            (0..n)
                .map(|i| i as f64 * params.dx / (n - 1) as f64)
                .collect()
        };
        Self {
            columns: vec![column; params.waveguides],
        }
    }

    pub fn waveguides(&self) -> usize {
        self.columns.len()
    }

    pub fn per_waveguide(&self) -> usize {
        self.columns[0].len()
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.columns[m][n]
    }

    pub fn set(&mut self, m: usize, n: usize, x: f64) {
        self.columns[m][n] = x;
    }

    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Sorts every column ascending. Antenna labels within a waveguide are
    /// interchangeable, so this does not change any channel.
    pub fn sort_columns(&mut self) {
        for c in &mut self.columns {
            c.sort_by(f64::total_cmp);
        }
    }

    /// Frobenius distance between two layouts of equal shape.
    pub fn distance_to(&self, other: &Self) -> f64 {
        self.columns
            .iter()
            .flatten()
            .zip(other.columns.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Every violated bound or spacing constraint, with indices.
    pub fn validate(&self, params: &SystemParams) -> Vec<LayoutViolation> {
        let mut out = Vec::new();
        for (m, col) in self.columns.iter().enumerate() {
            for (n, &x) in col.iter().enumerate() {
                if !(x >= -POSITION_TOL && x <= params.dx + POSITION_TOL) {
                    out.push(LayoutViolation::OutOfBounds { m, n, x });
                }
            }
            let mut order: Vec<usize> = (0..col.len()).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            for pair in order.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let gap = col[b] - col[a];
                if gap == 0.0 {
                    out.push(LayoutViolation::Overlap { m, a, b });
                } else if gap < params.delta_min - POSITION_TOL {
                    out.push(LayoutViolation::Spacing { m, a, b, gap });
                }
            }
        }
        out
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        if self.waveguides() != params.waveguides || self.per_waveguide() != params.pas_per_waveguide
        {
            return Err(Error::InfeasibleLayout(format!(
                "layout is {}x{}, system expects {}x{}",
                self.per_waveguide(),
                self.waveguides(),
                params.pas_per_waveguide,
                params.waveguides
            )));
        }
        let v = self.validate(params);
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InfeasibleLayout(msg.join("; ")))
        }
    }
}

/// One violated layout constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutViolation {
    OutOfBounds { m: usize, n: usize, x: f64 },
    /// Two antennas on waveguide `m` closer than the minimum spacing.
    Spacing { m: usize, a: usize, b: usize, gap: f64 },
    /// Two antennas on waveguide `m` at the same position.
    Overlap { m: usize, a: usize, b: usize },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutOfBounds { m, n, x } => {
                write!(f, "antenna ({m},{n}) at x={x} lies outside the waveguide")
            }
            Self::Spacing { m, a, b, gap } => {
                write!(f, "antennas ({m},{a}) and ({m},{b}) are {gap} m apart")
            }
            Self::Overlap { m, a, b } => write!(f, "antennas ({m},{a}) and ({m},{b}) overlap"),
        }
    }
}
