//! Reproducible random problems: conductance matrices, input vectors and
//! technology-node wire-resistance presets.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_G_MIN: f64 = 1e-5;
pub const DEFAULT_G_MAX: f64 = 1e-4;

/// Relative diagonal slack of dominant matrices: `G_ii = s * sum_j |G_ij|`
/// with `s` uniform in `[1 + MIN_SLACK, 1 + MAX_SLACK]`.
const MIN_SLACK: f64 = 0.01;
const MAX_SLACK: f64 = 0.1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a list of tags (circuit, size, trial, ...) into an
/// independent stream seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    PositiveDefinite,
    DiagDominantSymmetric,
}

impl MatrixKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::PositiveDefinite => "pd",
            Self::DiagDominantSymmetric => "dds",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd" | "positive_definite" => Ok(Self::PositiveDefinite),
            "dds" | "diag_dominant_symmetric" => Ok(Self::DiagDominantSymmetric),
            _ => Err(Error::Invalid(format!(
                "unknown matrix kind '{s}' (expected pd or dds)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub n: usize,
    pub kind: MatrixKind,
    pub g_min: f64,
    pub g_max: f64,
    pub seed: u64,
}

impl MatrixSpec {
    /// Default range `[10 uS, 100 uS]`. Strict dominance forces
    /// `G_ii >= (n - 1) g_min`, which does not fit under `g_max` once
    /// `n > 10`; for dominant matrices the lower bound is therefore lowered
    /// to the largest value that keeps the upper bound attainable.
    pub fn new(n: usize, kind: MatrixKind, seed: u64) -> Self {
        let mut g_min = DEFAULT_G_MIN;
        if kind == MatrixKind::DiagDominantSymmetric && n >= 2 {
            g_min = g_min.min(dominant_off_diagonal_cap(n, DEFAULT_G_MIN, DEFAULT_G_MAX) / 2.0);
        }
        Self {
            n,
            kind,
            g_min,
            g_max: DEFAULT_G_MAX,
            seed,
        }
    }

    /// Explicit range, used as given.
    pub fn with_range(n: usize, kind: MatrixKind, g_min: f64, g_max: f64, seed: u64) -> Self {
        Self {
            n,
            kind,
            g_min,
            g_max,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Generation(format!(
                "matrix size must be at least 2, got {}",
                self.n
            )));
        }
        if !(self.g_min > 0.0 && self.g_min < self.g_max && self.g_max.is_finite()) {
            return Err(Error::Generation(format!(
                "conductance range [{:e}, {:e}] must satisfy 0 < g_min < g_max",
                self.g_min, self.g_max
            )));
        }
        Ok(())
    }
}

/// Largest off-diagonal value for which a dominant row still fits below
/// `g_max`.
fn dominant_off_diagonal_cap(n: usize, g_min: f64, g_max: f64) -> f64 {
    let mid = 0.5 * (g_min + g_max);
    mid.min(g_max / ((1.0 + MAX_SLACK) * (n - 1) as f64))
}

pub fn gen_matrix(spec: &MatrixSpec) -> Result<Mat<f64>> {
    spec.validate()?;
    let mut r = rng(spec.seed);
    match spec.kind {
        MatrixKind::DiagDominantSymmetric => gen_dominant(spec, &mut r),
        MatrixKind::PositiveDefinite => gen_positive_definite(spec, &mut r),
    }
}

fn gen_dominant(spec: &MatrixSpec, r: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let n = spec.n;
    let hi = dominant_off_diagonal_cap(n, spec.g_min, spec.g_max);
    if hi <= spec.g_min {
        return Err(Error::Generation(format!(
            "a strictly diagonally dominant {n}x{n} matrix needs diagonal >= {:e} S, above g_max = {:e} S; \
             lower g_min below {:e} S",
            (n - 1) as f64 * spec.g_min * (1.0 + MIN_SLACK),
            spec.g_max,
            hi
        )));
    }
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = r.random_range(spec.g_min..=hi);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        let d = off * (1.0 + r.random_range(MIN_SLACK..=MAX_SLACK));
        g[(i, i)] = d.clamp(spec.g_min, spec.g_max);
    }
    Ok(g)
}

fn gen_positive_definite(spec: &MatrixSpec, r: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    let n = spec.n;
    for _ in 0..64 {
        // X = R R^T / n + I/2 is well conditioned and symmetric positive
        // definite; the affine map a X + c 11^T with a, c > 0 keeps it so.
        let rm = Mat::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
        let mut x = &rm * rm.transpose() * (1.0 / n as f64);
        for i in 0..n {
            x[(i, i)] += 0.5;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..n {
            for i in 0..n {
                lo = lo.min(x[(i, j)]);
                hi = hi.max(x[(i, j)]);
            }
        }
        let a = (spec.g_max - spec.g_min) / (hi - lo);
        let c = spec.g_min - a * lo;
        if c < 0.0 {
            continue;
        }
        let g = Mat::from_fn(n, n, |i, j| {
            (a * 0.5 * (x[(i, j)] + x[(j, i)]) + c).clamp(spec.g_min, spec.g_max)
        });
        if is_positive_definite(&g) {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no positive definite {n}x{n} matrix found in the range"
    )))
}

pub fn is_positive_definite(g: &Mat<f64>) -> bool {
    g.llt(Side::Lower).is_ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Uniform in `[1 uA, 10 uA]`.
    Current,
    /// Uniform in `[0.05 V, 0.2 V]`.
    Voltage,
}

impl InputKind {
    pub fn range(self) -> (f64, f64) {
        match self {
            Self::Current => (1e-6, 1e-5),
            Self::Voltage => (0.05, 0.2),
        }
    }
}

pub fn gen_input(n: usize, kind: InputKind, seed: u64) -> Vec<f64> {
    let (lo, hi) = kind.range();
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(lo..=hi)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechNodePreset {
    pub label: &'static str,
    pub r_wire: f64,
}

pub const PRESETS: [TechNodePreset; 4] = [
    TechNodePreset {
        label: "baseline",
        r_wire: 1.0,
    },
    TechNodePreset {
        label: "32nm",
        r_wire: 1.55,
    },
    TechNodePreset {
        label: "22nm",
        r_wire: 2.97,
    },
    TechNodePreset {
        label: "16nm",
        r_wire: 4.53,
    },
];

pub fn preset(label: &str) -> Result<TechNodePreset> {
    PRESETS
        .iter()
        .find(|p| p.label == label)
        .cloned()
        .ok_or_else(|| Error::UnknownPreset(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_bounds(g: &Mat<f64>, spec: &MatrixSpec) {
        for i in 0..spec.n {
            for j in 0..spec.n {
                assert!(
                    g[(i, j)] >= spec.g_min && g[(i, j)] <= spec.g_max,
                    "({i},{j}) = {:e}",
                    g[(i, j)]
                );
            }
        }
    }

    #[test]
    fn dominant_small_matrix() {
        let spec = MatrixSpec::new(4, MatrixKind::DiagDominantSymmetric, 1);
        assert_eq!(spec.g_min, DEFAULT_G_MIN);
        let g = gen_matrix(&spec).unwrap();
        check_bounds(&g, &spec);
        for i in 0..4 {
            let off: f64 = (0..4).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
            assert!(g[(i, i)] > off);
            for j in 0..4 {
                assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
        assert_eq!(g, gen_matrix(&spec).unwrap());
        assert!(is_positive_definite(&g));
    }

    #[test]
    fn dominant_default_range_adapts_to_size() {
        let spec = MatrixSpec::new(64, MatrixKind::DiagDominantSymmetric, 3);
        assert!(spec.g_min < DEFAULT_G_MIN);
        let g = gen_matrix(&spec).unwrap();
        check_bounds(&g, &spec);
        let strict = MatrixSpec::with_range(64, MatrixKind::DiagDominantSymmetric, 1e-5, 1e-4, 3);
        let err = gen_matrix(&strict).unwrap_err();
        assert!(matches!(err, Error::Generation(_)), "{err}");
    }

    #[test]
    fn positive_definite_has_positive_spectrum() {
        let spec = MatrixSpec::new(8, MatrixKind::PositiveDefinite, 5);
        let g = gen_matrix(&spec).unwrap();
        check_bounds(&g, &spec);
        let s = g.self_adjoint_eigen(Side::Lower).unwrap();
        assert!(s.S()[0] > 0.0);
    }

    #[test]
    fn inputs_and_presets() {
        let a = gen_input(16, InputKind::Current, 9);
        assert_eq!(a, gen_input(16, InputKind::Current, 9));
        assert!(a.iter().all(|v| (1e-6..=1e-5).contains(v)));
        let v = gen_input(16, InputKind::Voltage, 9);
        assert!(v.iter().all(|x| (0.05..=0.2).contains(x)));
        let t = std::time::Instant::now();
        let big = gen_input(1024, InputKind::Voltage, 1);
        assert_eq!(big.len(), 1024);
        assert!(t.elapsed().as_millis() < 10);
        assert_eq!(preset("16nm").unwrap().r_wire, 4.53);
        assert_eq!(preset("baseline").unwrap().r_wire, 1.0);
        assert_eq!(preset("22nm").unwrap().r_wire, 2.97);
        assert_eq!(preset("32nm").unwrap().r_wire, 1.55);
        assert!(matches!(preset("7nm"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn entry_bounds_hold_for_all_seeds(seed in any::<u64>(), n in 2usize..7, dominant in any::<bool>()) {
            let kind = if dominant { MatrixKind::DiagDominantSymmetric } else { MatrixKind::PositiveDefinite };
            let spec = MatrixSpec::new(n, kind, seed);
            let g = gen_matrix(&spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(g[(i, j)] >= spec.g_min && g[(i, j)] <= spec.g_max);
                    prop_assert_eq!(g[(i, j)], g[(j, i)]);
                }
            }
            prop_assert!(is_positive_definite(&g));
        }
    }
}
