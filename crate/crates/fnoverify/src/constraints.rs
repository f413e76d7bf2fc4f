//! Admissible input set: a value box intersected with cyclic
//! adjacent-difference bounds, with exact rational constants.
//!
//! The bounds are stored as rationals so the SMT encoder can emit them
//! exactly (the positivity floor is 1/10, not the binary64 neighbor of 0.1)
//! and so decoded counterexamples can be checked for feasibility in exact
//! arithmetic. The numeric side (sampler, projector, falsifiers) works with
//! binary64 renderings of the same bounds.

use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::pde::random_fourier_field;
use crate::rational::{rat, rat_int, rat_to_f64, Rat};

/// Box and smoothness constraints on input fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    lower: Rat,
    upper: Rat,
    slope_bound: Rat,
    // binary64 views, cached
    lower_f: f64,
    upper_f: f64,
    slope_f: f64,
}

impl ConstraintSet {
    pub fn new(lower: Rat, upper: Rat, slope_bound: Rat) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidParam(format!(
                "constraint box empty: lower {lower} >= upper {upper}"
            )));
        }
        if slope_bound.is_negative() {
            return Err(Error::InvalidParam("slope bound must be >= 0".into()));
        }
        let lower_f = rat_to_f64(&lower);
        let upper_f = rat_to_f64(&upper);
        let slope_f = rat_to_f64(&slope_bound);
        Ok(ConstraintSet { lower, upper, slope_bound, lower_f, upper_f, slope_f })
    }

    /// Mass queries: values in [0, 5], cyclic differences at most 15/N.
    pub fn for_mass(grid: Grid) -> Self {
        Self::new(rat_int(0), rat_int(5), rat(15, grid.n() as i64)).expect("valid")
    }

    /// Positivity queries: stronger floor, values in [1/10, 5].
    pub fn for_positivity(grid: Grid) -> Self {
        Self::new(rat(1, 10), rat_int(5), rat(15, grid.n() as i64)).expect("valid")
    }

    pub fn lower(&self) -> &Rat {
        &self.lower
    }

    pub fn upper(&self) -> &Rat {
        &self.upper
    }

    pub fn slope_bound(&self) -> &Rat {
        &self.slope_bound
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower_f
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper_f
    }

    pub fn slope_f64(&self) -> f64 {
        self.slope_f
    }

    /// Feasibility in binary64 arithmetic, no tolerance.
    pub fn is_feasible(&self, u: &Field) -> bool {
        let v = u.values();
        let n = v.len();
        v.iter().all(|&x| x >= self.lower_f && x <= self.upper_f)
            && (0..n).all(|i| (v[(i + 1) % n] - v[i]).abs() <= self.slope_f)
    }

    /// Feasibility in exact rational arithmetic (for decoded solver models).
    pub fn is_feasible_rational(&self, u: &[Rat]) -> bool {
        let n = u.len();
        u.iter().all(|x| *x >= self.lower && *x <= self.upper)
            && (0..n).all(|i| {
                let d = &u[(i + 1) % n] - &u[i];
                d.abs() <= self.slope_bound
            })
    }
}

/// Project a field onto the constraint set.
///
/// Feasible inputs are returned unchanged. Otherwise: clip to the box, then
/// Gauss-Seidel sweeps that pull each violating adjacent pair toward its
/// midpoint (midpoint stays in the box, so clipping never needs to be
/// redone), up to 50 passes. If the sweeps have not converged, fall back to
/// the constant field at the clamped mean, which satisfies every constraint.
pub fn project_feasible(u: &Field, c: &ConstraintSet) -> Field {
    if c.is_feasible(u) {
        return u.clone();
    }
    let n = u.len();
    let mut v = u.values().to_vec();
    for x in &mut v {
        *x = x.clamp(c.lower_f, c.upper_f);
    }
    // Shrink to slightly inside the bound so binary64 rounding in the
    // midpoint arithmetic cannot tip a pair back over it.
    let target = c.slope_f * 0.5 * (1.0 - 1e-9);
    for _pass in 0..50 {
        let mut changed = false;
        for i in 0..n {
            let j = (i + 1) % n;
            let d = v[j] - v[i];
            if d.abs() > c.slope_f {
                let m = 0.5 * (v[i] + v[j]);
                let s = d.signum();
                v[i] = m - s * target;
                v[j] = m + s * target;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let candidate = Field::new(u.grid(), v).expect("same grid");
    if c.is_feasible(&candidate) {
        return candidate;
    }
    let mean = u.mass().clamp(c.lower_f, c.upper_f);
    Field::constant(u.grid(), mean)
}

/// Draw an admissible field: a random smooth profile spanning the box, then
/// projected. Always succeeds; deterministic given the seed.
pub fn sample_admissible(c: &ConstraintSet, grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = random_fourier_field(grid, &mut rng, c.lower_f64(), c.upper_f64());
    let out = project_feasible(&draw, c);
    debug_assert!(c.is_feasible(&out));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_from_f64;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    /// Independent checker, written directly from the inequality list.
    fn check_independent(u: &Field, lower: f64, upper: f64, slope: f64) -> bool {
        let v = u.values();
        let n = v.len();
        for i in 0..n {
            if !(v[i] >= lower && v[i] <= upper) {
                return false;
            }
            let d = v[(i + 1) % n] - v[i];
            if d.abs() > slope {
                return false;
            }
        }
        true
    }

    #[test]
    fn positivity_set_has_exact_tenth_floor() {
        let c = ConstraintSet::for_positivity(grid(16));
        assert_eq!(*c.lower(), rat(1, 10));
        assert_eq!(*c.slope_bound(), rat(15, 16));
        // The f64 view of 1/10 rounds up, so f64-clipped values stay
        // feasible in exact arithmetic.
        assert!(rat_from_f64(c.lower_f64()).unwrap() >= rat(1, 10));
    }

    #[test]
    fn samples_satisfy_all_constraints() {
        for n in [8usize, 16, 32] {
            let g = grid(n);
            for c in [ConstraintSet::for_mass(g), ConstraintSet::for_positivity(g)] {
                for seed in 0..50 {
                    let u = sample_admissible(&c, g, seed);
                    assert!(check_independent(&u, c.lower_f64(), c.upper_f64(), c.slope_f64()));
                    let u_rat: Vec<Rat> =
                        u.values().iter().map(|&x| rat_from_f64(x).unwrap()).collect();
                    assert!(c.is_feasible_rational(&u_rat));
                }
            }
        }
    }

    #[test]
    fn degenerate_slope_bound_yields_constant_field() {
        let g = grid(8);
        let c = ConstraintSet::new(rat(1, 10), rat_int(5), rat_int(0)).unwrap();
        let u = sample_admissible(&c, g, 4);
        let first = u[0];
        assert!(u.values().iter().all(|&x| x == first));
        assert!(first >= c.lower_f64() && first <= c.upper_f64());
    }

    #[test]
    fn different_seeds_give_different_fields() {
        let g = grid(16);
        let c = ConstraintSet::for_mass(g);
        let a = sample_admissible(&c, g, 1);
        let b = sample_admissible(&c, g, 2);
        assert!(a.max_abs_diff(&b) > 1e-9);
    }

    #[test]
    fn projection_leaves_feasible_inputs_unchanged() {
        let g = grid(8);
        let c = ConstraintSet::for_mass(g);
        let u = Field::constant(g, 1.25);
        let p = project_feasible(&u, &c);
        assert_eq!(u.values(), p.values());
    }

    #[test]
    fn projection_clips_box_violations() {
        let g = grid(8);
        let c = ConstraintSet::for_positivity(g);
        let u = Field::constant(g, 9.0);
        let p = project_feasible(&u, &c);
        assert!(p.values().iter().all(|&x| x == 5.0));
    }

    #[test]
    fn projection_tames_spikes() {
        let g = grid(16);
        let c = ConstraintSet::for_positivity(g);
        let mut vals = vec![0.2; 16];
        vals[7] = 4.9;
        vals[11] = 0.10001;
        let u = Field::new(g, vals).unwrap();
        let p = project_feasible(&u, &c);
        assert!(check_independent(&p, c.lower_f64(), c.upper_f64(), c.slope_f64()));
    }

    #[test]
    fn empty_box_rejected() {
        assert!(ConstraintSet::new(rat_int(5), rat_int(5), rat_int(1)).is_err());
    }
}
