//! Hill-slope runoff on an `m x n` square lattice.
//!
//! Every cell receives rain at rate `rho`, infiltrates an exponential amount
//! `J` with mean 1, and passes what is left to one of the three cells below
//! it: down-left, down or down-right with probabilities `delta`,
//! `1 - 2 delta` and `delta`. Row 0 is the top of the slope.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RngStream;

/// Largest grid [`simulate_lattice`] will allocate.
pub const MAX_CELLS: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub m: usize,
    pub n: usize,
    pub rho: f64,
    pub delta: f64,
    pub seed: RngStream,
}

impl LatticeParams {
    pub fn new(m: usize, n: usize, rho: f64, delta: f64, seed: RngStream) -> Result<Self> {
        let p = LatticeParams {
            m,
            n,
            rho,
            delta,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m", "need at least one row"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one column"));
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return Err(Error::invalid("rho", format!("{} is not a rate >= 0", self.rho)));
        }
        if !self.delta.is_finite() || !(0.0..=0.5).contains(&self.delta) {
            return Err(Error::invalid("delta", format!("{} is not in [0, 1/2]", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Down,
    Right,
}

impl Direction {
    fn offset(self) -> isize {
        match self {
            Direction::Left => -1,
            Direction::Down => 0,
            Direction::Right => 1,
        }
    }
}

/// Infiltration, flow directions and runoff, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub m: usize,
    pub n: usize,
    pub rho: f64,
    pub infiltration: Vec<f64>,
    pub direction: Vec<Direction>,
    pub runoff: Vec<f64>,
}

impl LatticeField {
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.runoff[i * self.n + j]
    }

    pub fn max_runoff(&self) -> f64 {
        self.runoff.iter().copied().fold(0.0, f64::max)
    }

    /// Inflow into each cell of row `i` from row `i - 1`.
    fn inflow(&self, i: usize) -> Vec<f64> {
        let mut inflow = vec![0.0; self.n];
        if i > 0 {
            add_inflow(
                &mut inflow,
                &self.runoff[(i - 1) * self.n..i * self.n],
                &self.direction[(i - 1) * self.n..i * self.n],
            );
        }
        inflow
    }
}

fn add_inflow(inflow: &mut [f64], w_above: &[f64], dir_above: &[Direction]) {
    for (k, (&w, &d)) in w_above.iter().zip(dir_above).enumerate() {
        inflow[(k as isize + d.offset()) as usize] += w;
    }
}

fn try_vec<T: Clone>(len: usize, fill: T) -> Result<Vec<T>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|e| Error::Resource(format!("cannot allocate {len} cells: {e}")))?;
    v.resize(len, fill);
    Ok(v)
}

/// Sample the field and compute the equilibrium runoff in one sweep down
/// the slope. For each cell the draws are the infiltration, then the
/// direction.
pub fn simulate_lattice(p: &LatticeParams) -> Result<LatticeField> {
    p.validate()?;
    let cells = (p.m as u64)
        .checked_mul(p.n as u64)
        .filter(|&c| c <= MAX_CELLS)
        .ok_or_else(|| {
            Error::Resource(format!("{} x {} grid exceeds {MAX_CELLS} cells", p.m, p.n))
        })? as usize;
    let mut infiltration = try_vec(cells, 0.0)?;
    let mut direction = try_vec(cells, Direction::Down)?;
    let mut runoff = try_vec(cells, 0.0)?;
    let mut rng = p.seed.rng();
    let mut inflow = vec![0.0; p.n];
    for i in 0..p.m {
        let row = i * p.n..(i + 1) * p.n;
        for j in 0..p.n {
            let c = i * p.n + j;
            let u: f64 = rng.random();
            infiltration[c] = -(1.0 - u).ln();
            let v: f64 = rng.random();
            let mut d = if v < p.delta {
                Direction::Left
            } else if v < 2.0 * p.delta {
                Direction::Right
            } else {
                Direction::Down
            };
            if (d == Direction::Left && j == 0) || (d == Direction::Right && j == p.n - 1) {
                d = Direction::Down;
            }
            direction[c] = d;
            runoff[c] = (p.rho - infiltration[c] + inflow[j]).max(0.0);
        }
        inflow.iter_mut().for_each(|x| *x = 0.0);
        add_inflow(&mut inflow, &runoff[row.clone()], &direction[row]);
    }
    Ok(LatticeField {
        m: p.m,
        n: p.n,
        rho: p.rho,
        infiltration,
        direction,
        runoff,
    })
}

/// Largest violation of `W = (rho - J + inflow) v 0` over the grid.
pub fn max_eq1_residual(f: &LatticeField) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..f.m {
        let inflow = f.inflow(i);
        for j in 0..f.n {
            let c = i * f.n + j;
            let expected = (f.rho - f.infiltration[c] + inflow[j]).max(0.0);
            worst = worst.max((f.runoff[c] - expected).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottomRowStats {
    pub wet_fraction: f64,
    pub mean_runoff: f64,
    pub max_runoff: f64,
}

pub fn bottom_row_stats(f: &LatticeField) -> BottomRowStats {
    let row = &f.runoff[(f.m - 1) * f.n..];
    let wet = row.iter().filter(|&&w| w > 0.0).count();
    BottomRowStats {
        wet_fraction: wet as f64 / f.n as f64,
        mean_runoff: row.iter().sum::<f64>() / f.n as f64,
        max_runoff: row.iter().copied().fold(0.0, f64::max),
    }
}

/// 8-bit grayscale, darker for more runoff: `255 (1 - W / W_max)`.
pub fn render_grayscale(f: &LatticeField) -> Vec<u8> {
    let w_max = f.max_runoff();
    if w_max <= 0.0 {
        return vec![255; f.runoff.len()];
    }
    f.runoff
        .iter()
        .map(|&w| (255.0 * (1.0 - w / w_max)).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary PGM (P5) encoding of a `width x height` 8-bit image.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count does not match image size");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}
