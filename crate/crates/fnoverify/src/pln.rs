//! Exact compilation of an FNO into a stack of dense affine layers.
//!
//! The spectral convolution is linear once the weights are fixed, so it has
//! a real NH x NH matrix, recovered by probing with standard basis vectors.
//! Merging that matrix with the pointwise bypass turns every hidden layer
//! into a plain affine map; the lifting and projection are materialized as
//! (sparse-structured) dense maps too, so one encoder handles the whole
//! network.
//!
//! Vectorization order is grid-index fastest: vector slot j*N + i holds
//! channel j at grid point i, matching [`crate::fno::Hidden`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::fno::{forward, lift, spectral_conv, Activation, FnoParams, Hidden, SpectralWeights};
use crate::rational::{rat_from_f64, Rat};
use num_traits::Zero;

/// One dense affine layer with an activation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl AffineLayer {
    pub fn rows(&self) -> usize {
        self.weight.nrows()
    }

    pub fn cols(&self) -> usize {
        self.weight.ncols()
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weight.iter().filter(|&&x| x != 0.0).count()
    }
}

/// Where a compiled network came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    Frozen { u_ref: Vec<f64> },
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Frozen { .. } => "frozen",
        }
    }
}

/// A compiled piecewise-linear network: input and output are length-N
/// fields, hidden layers act on NH-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PlnNet {
    pub layers: Vec<AffineLayer>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub provenance: Provenance,
}

impl PlnNet {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Empty("layer stack"));
        }
        if self.layers[0].cols() != self.input_dim
            || self.layers.last().unwrap().rows() != self.output_dim
        {
            return Err(Error::ShapeMismatch("outer layer dimensions".into()));
        }
        for w in self.layers.windows(2) {
            if w[1].cols() != w[0].rows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer chain broken: {} rows feed {} cols",
                    w[0].rows(),
                    w[1].cols()
                )));
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.rows() {
                return Err(Error::ShapeMismatch("bias length".into()));
            }
            if l.weight.iter().any(|x| !x.is_finite()) || l.bias.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("compiled layer".into()));
            }
        }
        Ok(())
    }

    /// Hidden layers: everything between the lifting and the projection.
    pub fn hidden_layers(&self) -> &[AffineLayer] {
        &self.layers[1..self.layers.len() - 1]
    }
}

/// Dense matrix of a spectral convolution on grid size `n`, built by
/// applying it to each standard basis vector and stacking the outputs as
/// columns.
pub fn build_spectral_matrix(r: &SpectralWeights, n: usize) -> Result<DMatrix<f64>> {
    let h = r.width();
    let dim = n * h;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut probe = Hidden::zeros(n, h);
        probe.data[col] = 1.0;
        let out = spectral_conv(r, &probe)?;
        for row in 0..dim {
            m[(row, col)] = out.data[row];
        }
    }
    Ok(m)
}

fn lifting_layer(params: &FnoParams) -> AffineLayer {
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let mut weight = DMatrix::zeros(n * h, n);
    let mut bias = DVector::zeros(n * h);
    for j in 0..h {
        for i in 0..n {
            weight[(j * n + i, i)] = params.lifting_w[j];
            bias[j * n + i] = params.lifting_b[j];
        }
    }
    AffineLayer { weight, bias, activation: Activation::Linear }
}

fn projection_layer(params: &FnoParams) -> AffineLayer {
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let mut weight = DMatrix::zeros(n, n * h);
    let bias = DVector::from_element(n, params.proj_b);
    for i in 0..n {
        for j in 0..h {
            weight[(i, j * n + i)] = params.proj_w[j];
        }
    }
    AffineLayer { weight, bias, activation: Activation::Linear }
}

/// Expand the pointwise bypass into its NH x NH form under the fixed
/// vectorization: output (i, j) takes input (i, m) with weight bypass[j][m].
fn bypass_matrix(params: &FnoParams, layer_idx: usize) -> DMatrix<f64> {
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let bypass = &params.layers[layer_idx].bypass;
    let mut m = DMatrix::zeros(n * h, n * h);
    for j in 0..h {
        for mm in 0..h {
            let w = bypass[j * h + mm];
            for i in 0..n {
                m[(j * n + i, mm * n + i)] = w;
            }
        }
    }
    m
}

fn hidden_bias(params: &FnoParams, layer_idx: usize) -> DVector<f64> {
    let n = params.spec.grid_n;
    let h = params.spec.hidden_width;
    let mut bias = DVector::zeros(n * h);
    for j in 0..h {
        for i in 0..n {
            bias[j * n + i] = params.layers[layer_idx].bias[j];
        }
    }
    bias
}

/// Compile the full network exactly: every hidden layer's weight is the
/// spectral matrix plus the expanded bypass.
pub fn compile_exact(params: &FnoParams) -> Result<PlnNet> {
    params.validate()?;
    let n = params.spec.grid_n;
    let mut layers = vec![lifting_layer(params)];
    for (idx, layer) in params.layers.iter().enumerate() {
        let weight = build_spectral_matrix(&layer.spectral, n)? + bypass_matrix(params, idx);
        layers.push(AffineLayer {
            weight,
            bias: hidden_bias(params, idx),
            activation: params.spec.activations[idx],
        });
    }
    layers.push(projection_layer(params));
    let net = PlnNet { layers, input_dim: n, output_dim: n, provenance: Provenance::Exact };
    net.validate()?;
    Ok(net)
}

/// Compile with the spectral path frozen at a reference input: the layer's
/// spectral contribution is evaluated once along the reference trajectory
/// and folded into the bias, leaving only the bypass as input-dependent
/// weight. The result describes the frozen surrogate, not the original
/// model.
pub fn compile_frozen(params: &FnoParams, u_ref: &Field) -> Result<PlnNet> {
    params.validate()?;
    let n = params.spec.grid_n;
    if u_ref.len() != n {
        return Err(Error::ShapeMismatch("u_ref length vs model grid".into()));
    }
    let mut layers = vec![lifting_layer(params)];
    let mut state = lift(params, u_ref);
    for (idx, layer) in params.layers.iter().enumerate() {
        let spectral_const = spectral_conv(&layer.spectral, &state)?;
        let mut bias = hidden_bias(params, idx);
        for (slot, c) in bias.iter_mut().zip(&spectral_const.data) {
            *slot += c;
        }
        layers.push(AffineLayer {
            weight: bypass_matrix(params, idx),
            bias,
            activation: params.spec.activations[idx],
        });
        // Advance the reference trajectory through the original layer.
        state = crate::fno::hidden_step(params, layer, params.spec.activations[idx], &state)?;
    }
    layers.push(projection_layer(params));
    let net = PlnNet {
        layers,
        input_dim: n,
        output_dim: n,
        provenance: Provenance::Frozen { u_ref: u_ref.values().to_vec() },
    };
    net.validate()?;
    Ok(net)
}

/// Evaluate the compiled network in binary64; the reference semantics for
/// the SMT encoding.
pub fn eval_pln(net: &PlnNet, u: &Field) -> Result<Field> {
    if u.len() != net.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input length {} vs network input {}",
            u.len(),
            net.input_dim
        )));
    }
    let mut x = DVector::from_column_slice(u.values());
    for layer in &net.layers {
        let mut z = &layer.weight * x + &layer.bias;
        if layer.activation == Activation::Relu {
            z.apply(|v| *v = v.max(0.0));
        }
        x = z;
    }
    Field::new(u.grid(), x.iter().copied().collect())
}

/// Evaluate the compiled network in exact rational arithmetic, with each
/// binary64 weight converted exactly. This mirrors the SMT encoding's
/// semantics term for term.
pub fn eval_pln_rational(net: &PlnNet, u: &[Rat]) -> Result<Vec<Rat>> {
    if u.len() != net.input_dim {
        return Err(Error::ShapeMismatch("rational input length".into()));
    }
    let mut x: Vec<Rat> = u.to_vec();
    for layer in &net.layers {
        let mut next = Vec::with_capacity(layer.rows());
        for r in 0..layer.rows() {
            let mut acc = rat_from_f64(layer.bias[r])?;
            for c in 0..layer.cols() {
                let w = layer.weight[(r, c)];
                if w != 0.0 {
                    acc += rat_from_f64(w)? * &x[c];
                }
            }
            if layer.activation == Activation::Relu && acc < Rat::zero() {
                acc = Rat::zero();
            }
            next.push(acc);
        }
        x = next;
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Lossless network files (same hex scheme as model files).

#[derive(Serialize, Deserialize)]
struct PlnLayerFile {
    rows: usize,
    cols: usize,
    /// Row-major weight entries as bit-pattern hex.
    weight: Vec<String>,
    bias: Vec<String>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct PlnFile {
    format: String,
    input_dim: usize,
    output_dim: usize,
    provenance: Provenance,
    layers: Vec<PlnLayerFile>,
}

const PLN_FORMAT: &str = "pln-net-v1";

fn f64_to_hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn f64_from_hex(s: &str) -> Result<f64> {
    let bits = u64::from_str_radix(s, 16)
        .map_err(|_| Error::Parse(format!("bad f64 hex literal {s:?}")))?;
    Ok(f64::from_bits(bits))
}

pub fn save_pln(net: &PlnNet, path: &Path) -> Result<()> {
    net.validate()?;
    let file = PlnFile {
        format: PLN_FORMAT.into(),
        input_dim: net.input_dim,
        output_dim: net.output_dim,
        provenance: net.provenance.clone(),
        layers: net
            .layers
            .iter()
            .map(|l| PlnLayerFile {
                rows: l.rows(),
                cols: l.cols(),
                weight: l.weight.transpose().iter().map(|&x| f64_to_hex(x)).collect(),
                bias: l.bias.iter().map(|&x| f64_to_hex(x)).collect(),
                activation: l.activation,
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_pln(path: &Path) -> Result<PlnNet> {
    let bad = |reason: String| Error::FileFormat { path: path.display().to_string(), reason };
    let text = std::fs::read_to_string(path)?;
    let file: PlnFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if file.format != PLN_FORMAT {
        return Err(bad(format!("unknown format {:?}", file.format)));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for lf in &file.layers {
        if lf.weight.len() != lf.rows * lf.cols || lf.bias.len() != lf.rows {
            return Err(bad("weight/bias entry counts".into()));
        }
        let entries: Result<Vec<f64>> = lf.weight.iter().map(|s| f64_from_hex(s)).collect();
        let bias: Result<Vec<f64>> = lf.bias.iter().map(|s| f64_from_hex(s)).collect();
        layers.push(AffineLayer {
            weight: DMatrix::from_row_slice(lf.rows, lf.cols, &entries?),
            bias: DVector::from_vec(bias?),
            activation: lf.activation,
        });
    }
    let net = PlnNet {
        layers,
        input_dim: file.input_dim,
        output_dim: file.output_dim,
        provenance: file.provenance,
    };
    net.validate().map_err(|e| bad(e.to_string()))?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{sample_admissible, ConstraintSet};
    use crate::field::Grid;
    use crate::fno::planted;
    use crate::fno::FnoSpec;
    use crate::train::init_random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hidden(n: usize, h: usize, rng: &mut impl Rng) -> Hidden {
        let mut s = Hidden::zeros(n, h);
        for v in &mut s.data {
            *v = rng.gen_range(-2.0..2.0);
        }
        s
    }

    #[test]
    fn identity_mixing_compiles_to_identity_matrix() {
        let (n, h) = (8, 2);
        let r = SpectralWeights::identity(h, n / 2 + 1);
        let m = build_spectral_matrix(&r, n).unwrap();
        let eye = DMatrix::<f64>::identity(n * h, n * h);
        let dev = (&m - &eye).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(dev < 1e-13, "deviation {dev}");
    }

    #[test]
    fn zero_mixing_compiles_to_zero_matrix() {
        let r = SpectralWeights::zeros(2, 5);
        let m = build_spectral_matrix(&r, 8).unwrap();
        assert!(m.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spectral_matrix_matches_fft_path_on_random_states() {
        let (n, h) = (16, 2);
        let spec = FnoSpec::standard(n, 1, 21).unwrap();
        let params = init_random(&spec).unwrap();
        let r = &params.layers[0].spectral;
        let m = build_spectral_matrix(r, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let state = random_hidden(n, h, &mut rng);
            let dense = &m * DVector::from_column_slice(&state.data);
            let fft = spectral_conv(r, &state).unwrap();
            for (a, b) in dense.iter().zip(&fft.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probe_order_does_not_matter() {
        // Build the matrix probing columns in a shuffled order and compare
        // bitwise against the sequential construction.
        let (n, h) = (8, 2);
        let spec = FnoSpec::standard(n, 1, 5).unwrap();
        let params = init_random(&spec).unwrap();
        let r = &params.layers[0].spectral;
        let sequential = build_spectral_matrix(r, n).unwrap();
        let dim = n * h;
        let mut order: Vec<usize> = (0..dim).collect();
        // Fixed shuffle.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in (1..dim).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut permuted = DMatrix::zeros(dim, dim);
        for &col in &order {
            let mut probe = Hidden::zeros(n, h);
            probe.data[col] = 1.0;
            let out = spectral_conv(r, &probe).unwrap();
            for row in 0..dim {
                permuted[(row, col)] = out.data[row];
            }
        }
        assert_eq!(sequential, permuted);
    }

    #[test]
    fn planted_identity_compiles_to_identity_map() {
        let n = 8;
        let net = compile_exact(&planted::identity(n)).unwrap();
        let g = Grid::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = Field::new(g, (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
            let out = eval_pln(&net, &u).unwrap();
            assert!(out.max_abs_diff(&u) < 1e-12);
        }
    }

    #[test]
    fn exact_compilation_matches_forward() {
        for (n, depth) in [(8, 1), (8, 2), (16, 2)] {
            let spec = FnoSpec::standard(n, depth, 42).unwrap();
            let params = init_random(&spec).unwrap();
            let net = compile_exact(&params).unwrap();
            let g = spec.grid();
            let c = ConstraintSet::for_mass(g);
            for seed in 0..100 {
                let u = sample_admissible(&c, g, seed);
                let a = eval_pln(&net, &u).unwrap();
                let b = forward(&params, &u).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-10, "n={n} depth={depth} seed={seed}");
            }
        }
    }

    #[test]
    fn linear_model_collapses_to_single_affine_map() {
        // Compose the three linear layers by explicit matrix products and
        // check the mass gap of the collapsed map against forward().
        let spec = FnoSpec::standard(8, 1, 7).unwrap();
        let params = init_random(&spec).unwrap();
        let (fitted, _) = crate::train::fit_projection(
            &params,
            &crate::pde::gen_dataset(
                60,
                spec.grid(),
                &crate::pde::ParamRanges::default(),
                2,
            )
            .unwrap(),
        )
        .unwrap();
        let net = compile_exact(&fitted).unwrap();
        let mut a = net.layers[0].weight.clone();
        let mut d = net.layers[0].bias.clone();
        for layer in &net.layers[1..] {
            assert_eq!(layer.activation, Activation::Linear);
            d = &layer.weight * d + &layer.bias;
            a = &layer.weight * a;
        }
        let g = spec.grid();
        let n = g.n();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let u = Field::new(g, (0..n).map(|_| rng.gen_range(0.0..5.0)).collect()).unwrap();
            let x = DVector::from_column_slice(u.values());
            let collapsed = &a * &x + &d;
            let out = forward(&fitted, &u).unwrap();
            let mass_gap_collapsed = collapsed.iter().sum::<f64>() / n as f64 - u.mass();
            let mass_gap_forward = out.mass() - u.mass();
            assert!((mass_gap_collapsed - mass_gap_forward).abs() < 1e-10);
            for (i, v) in out.values().iter().enumerate() {
                assert!((collapsed[i] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frozen_net_is_exact_on_the_reference_input() {
        for depth in [1usize, 2] {
            let spec = FnoSpec::standard(16, depth, 42).unwrap();
            let params = init_random(&spec).unwrap();
            let g = spec.grid();
            let u_ref = sample_admissible(&ConstraintSet::for_mass(g), g, 77);
            let net = compile_frozen(&params, &u_ref).unwrap();
            let frozen_out = eval_pln(&net, &u_ref).unwrap();
            let original = forward(&params, &u_ref).unwrap();
            assert!(frozen_out.max_abs_diff(&original) < 1e-10);
        }
    }

    #[test]
    fn frozen_equals_exact_when_spectral_weights_vanish() {
        let n = 8;
        let mut params = init_random(&FnoSpec::standard(n, 1, 3).unwrap()).unwrap();
        for layer in &mut params.layers {
            layer.spectral = SpectralWeights::zeros(2, params.spec.modes_kept);
        }
        let g = params.spec.grid();
        let u_ref = Field::constant(g, 1.0);
        let frozen = compile_frozen(&params, &u_ref).unwrap();
        let exact = compile_exact(&params).unwrap();
        for (a, b) in frozen.layers.iter().zip(&exact.layers) {
            assert_eq!(a.bias, b.bias);
            let dev = (&a.weight - &b.weight).iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            assert!(dev < 1e-13);
        }
    }

    #[test]
    fn frozen_net_differs_away_from_the_reference() {
        let spec = FnoSpec::standard(16, 1, 42).unwrap();
        let mut params = init_random(&spec).unwrap();
        params.proj_w = vec![1.0, -0.5];
        let g = spec.grid();
        let c = ConstraintSet::for_mass(g);
        let u_ref = sample_admissible(&c, g, 1);
        let net = compile_frozen(&params, &u_ref).unwrap();
        let u = sample_admissible(&c, g, 2);
        let frozen_out = eval_pln(&net, &u).unwrap();
        let original = forward(&params, &u).unwrap();
        let gap = frozen_out.max_abs_diff(&original);
        assert!(gap > 1e-9, "expected a nonzero frozen gap, got {gap}");
    }

    #[test]
    fn nonzero_counts_follow_the_two_scalings() {
        let (n, h, depth) = (16usize, 2usize, 2usize);
        let spec = FnoSpec::standard(n, depth, 11).unwrap();
        let params = init_random(&spec).unwrap();
        let exact = compile_exact(&params).unwrap();
        let frozen = compile_frozen(&params, &Field::constant(spec.grid(), 1.0)).unwrap();
        for l in exact.hidden_layers() {
            let nz = l.nonzero_weights();
            assert!(nz <= (n * h) * (n * h));
            assert!(nz > n * h * h, "exact layer unexpectedly sparse: {nz}");
        }
        for l in frozen.hidden_layers() {
            assert_eq!(l.nonzero_weights(), n * h * h);
        }
    }

    #[test]
    fn relu_pln_layer_zeroes_nonnegative_input() {
        let n = 4;
        let g = Grid::new(n).unwrap();
        let net = PlnNet {
            layers: vec![AffineLayer {
                weight: -DMatrix::<f64>::identity(n, n),
                bias: DVector::zeros(n),
                activation: Activation::Relu,
            }],
            input_dim: n,
            output_dim: n,
            provenance: Provenance::Exact,
        };
        let u = Field::new(g, vec![0.5, 1.0, 0.0, 2.0]).unwrap();
        let out = eval_pln(&net, &u).unwrap();
        assert!(out.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rational_and_f64_evaluation_agree() {
        let spec = FnoSpec::standard(8, 2, 5).unwrap();
        let params = init_random(&spec).unwrap();
        let net = compile_exact(&params).unwrap();
        let g = spec.grid();
        let u = sample_admissible(&ConstraintSet::for_positivity(g), g, 3);
        let u_rat: Vec<Rat> = u.values().iter().map(|&x| rat_from_f64(x).unwrap()).collect();
        let exact_out = eval_pln_rational(&net, &u_rat).unwrap();
        let f64_out = eval_pln(&net, &u).unwrap();
        for (r, f) in exact_out.iter().zip(f64_out.values()) {
            let gap = (crate::rational::rat_to_f64(r) - f).abs();
            assert!(gap < 1e-9, "rational vs f64 gap {gap}");
        }
    }

    #[test]
    fn pln_files_round_trip() {
        let spec = FnoSpec::standard(8, 2, 9).unwrap();
        let params = init_random(&spec).unwrap();
        let net = compile_exact(&params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_pln(&net, &path).unwrap();
        let loaded = load_pln(&path).unwrap();
        assert_eq!(net, loaded);
    }
}
