//! Exact solution operator for the 1D advection-diffusion-reaction equation
//! on a periodic grid, plus training-data generation.
//!
//! The PDE is du/dt + v du/dx = D d2u/dx2 - lambda u with periodic boundary
//! conditions and constant coefficients, so every Fourier mode evolves
//! independently: mode k is multiplied by exp((-D xi^2 - i v xi - lambda) T)
//! with xi = 2 pi k. That propagator is exact; there is no time-stepping
//! error to tune.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Coefficients of the ADR equation and the horizon the operator advances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrParams {
    pub diffusion: f64,
    pub velocity: f64,
    pub reaction: f64,
    pub horizon: f64,
}

impl AdrParams {
    pub fn new(diffusion: f64, velocity: f64, reaction: f64, horizon: f64) -> Result<Self> {
        let p = AdrParams { diffusion, velocity, reaction, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion >= 0.0) {
            return Err(Error::InvalidParam(format!("diffusion must be >= 0, got {}", self.diffusion)));
        }
        if !(self.reaction >= 0.0) {
            return Err(Error::InvalidParam(format!("reaction must be >= 0, got {}", self.reaction)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParam(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !self.velocity.is_finite() {
            return Err(Error::NonFinite("velocity".into()));
        }
        Ok(())
    }
}

/// Uniform sampling ranges for the per-example coefficient draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub diffusion: (f64, f64),
    pub velocity: (f64, f64),
    pub reaction: (f64, f64),
    pub horizon: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            diffusion: (0.01, 0.1),
            velocity: (-1.0, 1.0),
            reaction: (0.05, 0.5),
            horizon: 0.25,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("diffusion", self.diffusion),
            ("velocity", self.velocity),
            ("reaction", self.reaction),
        ] {
            if !(lo <= hi) {
                return Err(Error::InvalidParam(format!("empty {name} range [{lo}, {hi}]")));
            }
        }
        AdrParams::new(self.diffusion.0, self.velocity.0, self.reaction.0, self.horizon)?;
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> AdrParams {
        fn unif(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
            if lo == hi { lo } else { rng.gen_range(lo..hi) }
        }
        AdrParams {
            diffusion: unif(rng, self.diffusion),
            velocity: unif(rng, self.velocity),
            reaction: unif(rng, self.reaction),
            horizon: self.horizon,
        }
    }
}

/// Advance `u0` by `p.horizon` under the ADR equation, exactly.
///
/// The advection phase of the Nyquist mode reduces to its real part (the
/// travel direction of that mode is not determined by the grid samples);
/// all other modes use the full complex multiplier.
pub fn adr_propagate(u0: &Field, p: &AdrParams) -> Result<Field> {
    p.validate()?;
    let n = u0.grid().n();
    if u0.len() != n {
        return Err(Error::ShapeMismatch("field/grid length".into()));
    }
    let mut spec = dft::fft_real(u0.values());
    for (k, coeff) in spec.iter_mut().enumerate() {
        let k_signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = 2.0 * PI * k_signed / Grid::DOMAIN_LENGTH;
        let decay = (-(p.diffusion * xi * xi + p.reaction) * p.horizon).exp();
        let phase = Complex64::from_polar(1.0, -p.velocity * xi * p.horizon);
        *coeff *= decay * phase;
    }
    let out = dft::ifft(&spec);
    Field::new(u0.grid(), out.iter().map(|c| c.re).collect())
}

/// Random truncated Fourier series: modes 1..=N/4, amplitude falling as
/// 1/(1+k), affinely placed in [0.2, 2.0]. Smooth, positive, cheap.
pub fn random_smooth_field(grid: Grid, rng: &mut impl Rng) -> Field {
    random_fourier_field(grid, rng, 0.2, 2.0)
}

/// Random truncated Fourier series affinely mapped onto [lo, hi].
pub(crate) fn random_fourier_field(grid: Grid, rng: &mut impl Rng, lo: f64, hi: f64) -> Field {
    let n = grid.n();
    let modes = (n / 4).max(1);
    let coeffs: Vec<(f64, f64)> = (1..=modes)
        .map(|k| {
            let amp = gaussian(rng) / (1.0 + k as f64);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (amp, phase)
        })
        .collect();
    let mut values: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(idx, &(a, ph))| a * (2.0 * PI * (idx + 1) as f64 * x + ph).cos())
                .sum()
        })
        .collect();
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if vmax - vmin < 1e-12 {
        values = vec![(lo + hi) / 2.0; n];
    } else {
        for v in &mut values {
            *v = lo + (*v - vmin) / (vmax - vmin) * (hi - lo);
        }
    }
    Field::new(grid, values).expect("constructed with grid length")
}

/// Standard normal draw (Box-Muller; rand_distr is not needed for this).
pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// A training pair: input field and its propagated target.
pub type Pair = (Field, Field);

/// Generate `n_samples` (initial condition, solution) pairs. Each input is
/// paired with an independently drawn coefficient triple, so the learned
/// operator is an averaged, parameter-free one. Deterministic given `seed`.
pub fn gen_dataset(
    n_samples: usize,
    grid: Grid,
    ranges: &ParamRanges,
    seed: u64,
) -> Result<Vec<Pair>> {
    if n_samples == 0 {
        return Err(Error::InvalidParam("n_samples must be >= 1".into()));
    }
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let u0 = random_smooth_field(grid, &mut rng);
        let p = ranges.draw(&mut rng);
        let u1 = adr_propagate(&u0, &p)?;
        pairs.push((u0, u1));
    }
    Ok(pairs)
}

/// Portable dataset file: grid, seed, ranges, and all pairs as decimal arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub grid_n: usize,
    pub seed: u64,
    pub ranges: ParamRanges,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn generate(n_samples: usize, grid: Grid, ranges: &ParamRanges, seed: u64) -> Result<Self> {
        let pairs = gen_dataset(n_samples, grid, ranges, seed)?;
        Ok(Dataset {
            grid_n: grid.n(),
            seed,
            ranges: *ranges,
            inputs: pairs.iter().map(|(u, _)| u.values().to_vec()).collect(),
            targets: pairs.iter().map(|(_, w)| w.values().to_vec()).collect(),
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_n)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn pairs(&self) -> Result<Vec<Pair>> {
        let grid = self.grid()?;
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(u, w)| Ok((Field::new(grid, u.clone())?, Field::new(grid, w.clone())?)))
            .collect()
    }

    /// Mean of the input fields; the canonical frozen-encoding reference.
    pub fn mean_input(&self) -> Result<Field> {
        let grid = self.grid()?;
        if self.inputs.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let n = grid.n();
        let mut acc = vec![0.0; n];
        for u in &self.inputs {
            for (a, v) in acc.iter_mut().zip(u) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= self.inputs.len() as f64;
        }
        Field::new(grid, acc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ds: Dataset = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if ds.inputs.len() != ds.targets.len()
            || ds.inputs.iter().chain(&ds.targets).any(|v| v.len() != ds.grid_n)
        {
            return Err(Error::FileFormat {
                path: path.display().to_string(),
                reason: "inconsistent array lengths".into(),
            });
        }
        Ok(ds)
    }
}
