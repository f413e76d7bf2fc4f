//! The small Fourier neural operator: pointwise lifting, spectral
//! convolution via FFT with truncated mode mixing, pointwise bypass,
//! optional ReLU, pointwise projection. Plus lossless weight files.
//!
//! Spectral convolution convention: the forward DFT of each channel is
//! taken, the nonnegative-frequency bins 0..K-1 are mixed by learned
//! complex H x H matrices, remaining nonnegative bins are zeroed, the
//! negative-frequency bins are rebuilt by conjugate symmetry, and the real
//! part is taken after the inverse DFT. Taking the real part (rather than
//! constraining the stored weights) is what keeps the map well defined when
//! the mixed DC and Nyquist bins come out complex; the compiled dense
//! matrix must match this exact convention.
//!
//! Hidden states are vectorized grid-index-fastest: entry j*N + i holds
//! channel j at grid point i.

use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::field::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// Architecture hyperparameters of one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnoSpec {
    pub grid_n: usize,
    pub hidden_width: usize,
    pub depth: usize,
    pub modes_kept: usize,
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl FnoSpec {
    /// Default mode truncation: all nonnegative frequencies up to N = 16,
    /// a quarter of the grid above that.
    pub fn default_modes(grid_n: usize) -> usize {
        if grid_n <= 16 {
            grid_n / 2 + 1
        } else {
            grid_n / 4
        }
    }

    /// The paper-style grid point: depth 1 is linear, depth >= 2 puts ReLU
    /// on every hidden layer except the last.
    pub fn standard(grid_n: usize, depth: usize, seed: u64) -> Result<Self> {
        let mut activations = vec![Activation::Relu; depth];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Linear;
        }
        let spec = FnoSpec {
            grid_n,
            hidden_width: 2,
            depth,
            modes_kept: Self::default_modes(grid_n),
            activations,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid_n)?;
        if self.hidden_width == 0 || self.depth == 0 {
            return Err(Error::InvalidParam("hidden_width and depth must be >= 1".into()));
        }
        if self.modes_kept == 0 || self.modes_kept > self.grid_n / 2 + 1 {
            return Err(Error::InvalidParam(format!(
                "modes_kept must be in 1..={}, got {}",
                self.grid_n / 2 + 1,
                self.modes_kept
            )));
        }
        if self.activations.len() != self.depth {
            return Err(Error::ShapeMismatch(format!(
                "{} activation flags for depth {}",
                self.activations.len(),
                self.depth
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid_n).expect("validated")
    }

    /// Model name, e.g. "L1-N8-s42".
    pub fn name(&self) -> String {
        format!("L{}-N{}-s{}", self.depth, self.grid_n, self.seed)
    }

    pub fn has_relu(&self) -> bool {
        self.activations.contains(&Activation::Relu)
    }

    /// Exact learned-parameter count for these shapes.
    pub fn param_count(&self) -> usize {
        let h = self.hidden_width;
        let k = self.modes_kept;
        let lifting = h + h;
        let per_layer = 2 * h * h * k + h * h + h;
        let projection = h + 1;
        lifting + self.depth * per_layer + projection
    }
}

/// Complex H x H x K tensor of learned mode weights, indexed
/// (out-channel, in-channel, mode).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    h_out: usize,
    h_in: usize,
    modes: usize,
    data: Vec<Complex64>,
}

impl SpectralWeights {
    pub fn zeros(h: usize, modes: usize) -> Self {
        SpectralWeights { h_out: h, h_in: h, modes, data: vec![Complex64::new(0.0, 0.0); h * h * modes] }
    }

    /// Identity mixing on every stored mode: out channel j copies in
    /// channel j with weight 1.
    pub fn identity(h: usize, modes: usize) -> Self {
        let mut w = Self::zeros(h, modes);
        for j in 0..h {
            for k in 0..modes {
                *w.at_mut(j, j, k) = Complex64::new(1.0, 0.0);
            }
        }
        w
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn width(&self) -> usize {
        self.h_out
    }

    pub fn at(&self, out_ch: usize, in_ch: usize, mode: usize) -> Complex64 {
        self.data[(out_ch * self.h_in + in_ch) * self.modes + mode]
    }

    pub fn at_mut(&mut self, out_ch: usize, in_ch: usize, mode: usize) -> &mut Complex64 {
        &mut self.data[(out_ch * self.h_in + in_ch) * self.modes + mode]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.data.iter()
    }
}

/// One hidden layer's learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// Mode-mixing weights R, H x H x K complex.
    pub spectral: SpectralWeights,
    /// Pointwise bypass W, H x H row-major: out channel j mixes in
    /// channel m with bypass[j * H + m].
    pub bypass: Vec<f64>,
    pub bias: Vec<f64>,
}

/// All learned weights of one model, together with its spec.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoParams {
    pub spec: FnoSpec,
    /// Pointwise lifting R -> R^H: column weights plus bias.
    pub lifting_w: Vec<f64>,
    pub lifting_b: Vec<f64>,
    pub layers: Vec<HiddenLayer>,
    /// Pointwise projection R^H -> R: row weights plus bias.
    pub proj_w: Vec<f64>,
    pub proj_b: f64,
}

impl FnoParams {
    /// All-zero parameters for a spec; useful as a construction base.
    pub fn zeros(spec: FnoSpec) -> Result<Self> {
        spec.validate()?;
        let h = spec.hidden_width;
        let k = spec.modes_kept;
        Ok(FnoParams {
            lifting_w: vec![0.0; h],
            lifting_b: vec![0.0; h],
            layers: (0..spec.depth)
                .map(|_| HiddenLayer {
                    spectral: SpectralWeights::zeros(h, k),
                    bypass: vec![0.0; h * h],
                    bias: vec![0.0; h],
                })
                .collect(),
            proj_w: vec![0.0; h],
            proj_b: 0.0,
            spec,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let h = self.spec.hidden_width;
        let k = self.spec.modes_kept;
        let shape_ok = self.lifting_w.len() == h
            && self.lifting_b.len() == h
            && self.proj_w.len() == h
            && self.layers.len() == self.spec.depth
            && self.layers.iter().all(|l| {
                l.bypass.len() == h * h
                    && l.bias.len() == h
                    && l.spectral.h_out == h
                    && l.spectral.h_in == h
                    && l.spectral.modes == k
            });
        if !shape_ok {
            return Err(Error::ShapeMismatch("weight tensors inconsistent with spec".into()));
        }
        let finite = self
            .lifting_w
            .iter()
            .chain(&self.lifting_b)
            .chain(&self.proj_w)
            .chain(std::iter::once(&self.proj_b))
            .all(|x| x.is_finite())
            && self.layers.iter().all(|l| {
                l.bypass.iter().chain(&l.bias).all(|x| x.is_finite())
                    && l.spectral.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            });
        if !finite {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.spec.name()
    }
}

/// Hidden state: H channels of N values, vectorized with the grid index
/// fastest (entry j*N + i is channel j at point i).
#[derive(Debug, Clone, PartialEq)]
pub struct Hidden {
    pub n: usize,
    pub h: usize,
    pub data: Vec<f64>,
}

impl Hidden {
    pub fn zeros(n: usize, h: usize) -> Self {
        Hidden { n, h, data: vec![0.0; n * h] }
    }

    pub fn at(&self, point: usize, channel: usize) -> f64 {
        self.data[channel * self.n + point]
    }

    pub fn at_mut(&mut self, point: usize, channel: usize) -> &mut f64 {
        &mut self.data[channel * self.n + point]
    }
}

/// Apply one spectral convolution to a hidden state.
pub fn spectral_conv(r: &SpectralWeights, h: &Hidden) -> Result<Hidden> {
    if r.h_in != h.h {
        return Err(Error::ShapeMismatch(format!(
            "spectral weights expect {} channels, state has {}",
            r.h_in, h.h
        )));
    }
    let n = h.n;
    let half = n / 2 + 1;
    if r.modes > half {
        return Err(Error::ShapeMismatch(format!(
            "{} modes stored but the grid supports {half}",
            r.modes
        )));
    }
    // Nonnegative-frequency spectra per input channel.
    let mut spectra = Vec::with_capacity(h.h);
    for m in 0..h.h {
        let col = &h.data[m * n..(m + 1) * n];
        let mut full = dft::fft_real(col);
        full.truncate(half);
        spectra.push(full);
    }
    let mut out = Hidden::zeros(n, r.h_out);
    for j in 0..r.h_out {
        // Mix kept modes, zero the rest, rebuild negative bins by
        // conjugate symmetry, inverse transform, take the real part.
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..r.modes {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..r.h_in {
                acc += r.at(j, m, k) * spectra[m][k];
            }
            full[k] = acc;
            if k != 0 && k != n / 2 {
                full[n - k] = acc.conj();
            }
        }
        let y = dft::ifft(&full);
        for i in 0..n {
            *out.at_mut(i, j) = y[i].re;
        }
    }
    Ok(out)
}

/// Run the model forward on a field.
pub fn forward(params: &FnoParams, u: &Field) -> Result<Field> {
    let n = params.spec.grid_n;
    if u.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "input length {} vs model grid {n}",
            u.len()
        )));
    }
    let mut state = lift(params, u);
    for (layer, act) in params.layers.iter().zip(&params.spec.activations) {
        state = hidden_step(params, layer, *act, &state)?;
    }
    project(params, &state)
}

/// Lifting applied pointwise.
pub(crate) fn lift(params: &FnoParams, u: &Field) -> Hidden {
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let mut state = Hidden::zeros(n, h);
    for j in 0..h {
        for i in 0..n {
            *state.at_mut(i, j) = params.lifting_w[j] * u[i] + params.lifting_b[j];
        }
    }
    state
}

pub(crate) fn hidden_step(
    params: &FnoParams,
    layer: &HiddenLayer,
    act: Activation,
    state: &Hidden,
) -> Result<Hidden> {
    let n = state.n;
    let h = params.spec.hidden_width;
    let spec_out = spectral_conv(&layer.spectral, state)?;
    let mut next = Hidden::zeros(n, h);
    for j in 0..h {
        for i in 0..n {
            let mut z = spec_out.at(i, j) + layer.bias[j];
            for m in 0..h {
                z += layer.bypass[j * h + m] * state.at(i, m);
            }
            *next.at_mut(i, j) = match act {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            };
        }
    }
    Ok(next)
}

pub(crate) fn project(params: &FnoParams, state: &Hidden) -> Result<Field> {
    let n = state.n;
    let h = params.spec.hidden_width;
    let mut out = vec![params.proj_b; n];
    for i in 0..n {
        for j in 0..h {
            out[i] += params.proj_w[j] * state.at(i, j);
        }
    }
    Field::new(params.spec.grid(), out)
}

// ---------------------------------------------------------------------------
// Planted models with known closed-form behavior.

/// Planted models used as oracles: their verification verdicts are provable
/// by hand, independent of any training run.
pub mod planted {
    use super::*;

    fn base(n: usize, proj_weight: f64) -> FnoParams {
        let spec = FnoSpec {
            grid_n: n,
            hidden_width: 2,
            depth: 1,
            modes_kept: FnoSpec::default_modes(n),
            activations: vec![Activation::Linear],
            seed: 0,
        };
        let mut p = FnoParams::zeros(spec).expect("valid spec");
        // Channel 0 carries the signal through an identity bypass.
        p.lifting_w[0] = 1.0;
        p.layers[0].bypass[0] = 1.0;
        p.layers[0].bypass[3] = 1.0;
        p.proj_w[0] = proj_weight;
        p
    }

    /// forward(u) = u.
    pub fn identity(n: usize) -> FnoParams {
        base(n, 1.0)
    }

    /// forward(u) = 2u; violates mass non-increase everywhere.
    pub fn doubling(n: usize) -> FnoParams {
        base(n, 2.0)
    }

    /// forward(u) = -u; violates positivity everywhere.
    pub fn negation(n: usize) -> FnoParams {
        base(n, -1.0)
    }
}

// ---------------------------------------------------------------------------
// Lossless model files.

fn f64_to_hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn f64_from_hex(s: &str) -> Result<f64> {
    let bits = u64::from_str_radix(s, 16)
        .map_err(|_| Error::Parse(format!("bad f64 hex literal {s:?}")))?;
    Ok(f64::from_bits(bits))
}

fn vec_to_hex(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| f64_to_hex(x)).collect()
}

fn vec_from_hex(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| f64_from_hex(s)).collect()
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// Flattened (out, in, mode) complex entries as [re, im] hex pairs.
    spectral: Vec<[String; 2]>,
    bypass: Vec<String>,
    bias: Vec<String>,
}

/// On-disk model format: spec header plus bit-exact hex weight tensors.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    name: String,
    spec: FnoSpec,
    lifting_w: Vec<String>,
    lifting_b: Vec<String>,
    layers: Vec<LayerFile>,
    proj_w: Vec<String>,
    proj_b: String,
}

const MODEL_FORMAT: &str = "fno-model-v1";

pub fn save_model(params: &FnoParams, path: &Path) -> Result<()> {
    params.validate()?;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        name: params.name(),
        spec: params.spec.clone(),
        lifting_w: vec_to_hex(&params.lifting_w),
        lifting_b: vec_to_hex(&params.lifting_b),
        layers: params
            .layers
            .iter()
            .map(|l| LayerFile {
                spectral: l.spectral.iter().map(|c| [f64_to_hex(c.re), f64_to_hex(c.im)]).collect(),
                bypass: vec_to_hex(&l.bypass),
                bias: vec_to_hex(&l.bias),
            })
            .collect(),
        proj_w: vec_to_hex(&params.proj_w),
        proj_b: f64_to_hex(params.proj_b),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FnoParams> {
    let bad = |reason: String| Error::FileFormat { path: path.display().to_string(), reason };
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(bad(format!("unknown format {:?}", file.format)));
    }
    let spec = file.spec;
    spec.validate().map_err(|e| bad(e.to_string()))?;
    let h = spec.hidden_width;
    let k = spec.modes_kept;
    let mut layers = Vec::with_capacity(file.layers.len());
    for lf in &file.layers {
        if lf.spectral.len() != h * h * k {
            return Err(bad(format!(
                "spectral tensor has {} entries, spec wants {}",
                lf.spectral.len(),
                h * h * k
            )));
        }
        let mut spectral = SpectralWeights::zeros(h, k);
        for (slot, pair) in spectral.data.iter_mut().zip(&lf.spectral) {
            *slot = Complex64::new(f64_from_hex(&pair[0])?, f64_from_hex(&pair[1])?);
        }
        layers.push(HiddenLayer {
            spectral,
            bypass: vec_from_hex(&lf.bypass)?,
            bias: vec_from_hex(&lf.bias)?,
        });
    }
    let params = FnoParams {
        spec,
        lifting_w: vec_from_hex(&file.lifting_w)?,
        lifting_b: vec_from_hex(&file.lifting_b)?,
        layers,
        proj_w: vec_from_hex(&file.proj_w)?,
        proj_b: f64_from_hex(&file.proj_b)?,
    };
    params.validate().map_err(|e| bad(e.to_string()))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hidden(n: usize, h: usize, rng: &mut impl Rng) -> Hidden {
        let mut state = Hidden::zeros(n, h);
        for v in &mut state.data {
            *v = rng.gen_range(-2.0..2.0);
        }
        state
    }

    #[test]
    fn identity_mixing_on_all_modes_is_identity() {
        let (n, h) = (16, 2);
        let r = SpectralWeights::identity(h, n / 2 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let state = random_hidden(n, h, &mut rng);
            let out = spectral_conv(&r, &state).unwrap();
            for (a, b) in state.data.iter().zip(&out.data) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_mixing_gives_zero() {
        let r = SpectralWeights::zeros(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let state = random_hidden(8, 2, &mut rng);
        let out = spectral_conv(&r, &state).unwrap();
        assert!(out.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spectral_conv_is_homogeneous() {
        let (n, h) = (16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = SpectralWeights::zeros(h, n / 2 + 1);
        for j in 0..h {
            for m in 0..h {
                for k in 0..n / 2 + 1 {
                    *r.at_mut(j, m, k) =
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
        }
        for _ in 0..20 {
            let state = random_hidden(n, h, &mut rng);
            let alpha: f64 = rng.gen_range(-3.0..3.0);
            let mut scaled = state.clone();
            for v in &mut scaled.data {
                *v *= alpha;
            }
            let a = spectral_conv(&r, &scaled).unwrap();
            let b = spectral_conv(&r, &state).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - alpha * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_identity_reproduces_input() {
        let g = Grid::new(8).unwrap();
        let m = planted::identity(8);
        let u = Field::new(g, (0..8).map(|i| 0.3 * i as f64 + 0.1).collect()).unwrap();
        let out = forward(&m, &u).unwrap();
        assert_eq!(out.values(), u.values());
    }

    #[test]
    fn planted_doubling_doubles() {
        let g = Grid::new(8).unwrap();
        let m = planted::doubling(8);
        let u = Field::new(g, (0..8).map(|i| (i as f64).cos()).collect()).unwrap();
        let out = forward(&m, &u).unwrap();
        for (a, b) in out.values().iter().zip(u.values()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn linear_model_is_affine() {
        // forward(u) - forward(0) must be linear for a depth-1 linear model.
        let n = 16;
        let spec = FnoSpec::standard(n, 1, 99).unwrap();
        let params = crate::train::init_random(&spec).unwrap();
        let g = spec.grid();
        let zero_out = forward(&params, &Field::constant(g, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
            let fu = forward(&params, &Field::new(g, u).unwrap()).unwrap();
            let fw = forward(&params, &Field::new(g, w).unwrap()).unwrap();
            let fmix = forward(&params, &Field::new(g, mix).unwrap()).unwrap();
            for i in 0..n {
                let affine = a * (fu[i] - zero_out[i]) + b * (fw[i] - zero_out[i]) + zero_out[i];
                assert!((fmix[i] - affine).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn relu_forward_is_locally_affine() {
        // Inside a ball small enough not to flip any activation, the map is
        // affine: f(x + d1 + d2) - f(x) = [f(x+d1) - f(x)] + [f(x+d2) - f(x)].
        let spec = FnoSpec::standard(8, 2, 7).unwrap();
        let params = crate::train::init_random(&spec).unwrap();
        let g = spec.grid();
        let base: Vec<f64> = (0..8).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eps = 1e-7;
        for _ in 0..10 {
            let d1: Vec<f64> = (0..8).map(|_| rng.gen_range(-eps..eps)).collect();
            let d2: Vec<f64> = (0..8).map(|_| rng.gen_range(-eps..eps)).collect();
            let f = |v: Vec<f64>| forward(&params, &Field::new(g, v).unwrap()).unwrap();
            let f0 = f(base.clone());
            let f1 = f(base.iter().zip(&d1).map(|(a, b)| a + b).collect());
            let f2 = f(base.iter().zip(&d2).map(|(a, b)| a + b).collect());
            let f12 = f(base
                .iter()
                .zip(&d1)
                .zip(&d2)
                .map(|((a, b), c)| a + b + c)
                .collect());
            for i in 0..8 {
                let lhs = f12[i] - f0[i];
                let rhs = (f1[i] - f0[i]) + (f2[i] - f0[i]);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn param_count_matches_shapes() {
        let spec = FnoSpec::standard(8, 2, 1).unwrap();
        let p = FnoParams::zeros(spec.clone()).unwrap();
        let actual = p.lifting_w.len()
            + p.lifting_b.len()
            + p.layers
                .iter()
                .map(|l| 2 * l.spectral.data.len() + l.bypass.len() + l.bias.len())
                .sum::<usize>()
            + p.proj_w.len()
            + 1;
        assert_eq!(spec.param_count(), actual);
    }

    #[test]
    fn model_files_round_trip_bitwise() {
        let spec = FnoSpec::standard(8, 2, 42).unwrap();
        let params = crate::train::init_random(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&params, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(params, loaded);
        assert_eq!(params.name(), "L2-N8-s42");
    }

    #[test]
    fn truncated_tensor_is_rejected() {
        let spec = FnoSpec::standard(8, 1, 1).unwrap();
        let params = crate::train::init_random(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&params, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        // Drop one spectral entry.
        let idx = text.find("\"spectral\": [").unwrap();
        let entry_start = text[idx..].find('[').unwrap() + idx;
        let entry_end = text[entry_start + 1..].find(']').unwrap() + entry_start + 1;
        // Remove the first [re, im] pair and its trailing comma.
        let after = text[entry_end + 1..].find(',').unwrap() + entry_end + 1;
        text.replace_range(entry_start + 1..after + 1, "");
        let broken = dir.path().join("broken.json");
        std::fs::write(&broken, text).unwrap();
        let err = load_model(&broken);
        assert!(err.is_err());
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let m = planted::identity(8);
        let g = Grid::new(16).unwrap();
        let u = Field::constant(g, 1.0);
        assert!(forward(&m, &u).is_err());
    }
}
