//! Seeded generators for the canonical test distributions: bivariate normal,
//! Gaussian copula, deterministic functional dependence, and independence.
//!
//! Generation is a pure function of `(family, n, seed)`. The RNG is ChaCha8
//! (portable, seekable); where a family needs two independent uniform
//! sources the generator splits the seed across ChaCha streams 0 and 1.
//! Replicated experiments derive one seed per replicate with
//! [`derive_seed`], so parallel Monte Carlo stays reproducible regardless of
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{PairedSample, UnitSquareSample};

/// Functional dependence shapes for `v = f(u)`, rescaled into `(0, 1]`.
///
/// `Step` is a four-level staircase on shuffled levels: a measurable,
/// deliberately non-monotone choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuncKind {
    Identity,
    Square,
    Sine,
    Step,
}

impl FuncKind {
    pub fn name(self) -> &'static str {
        match self {
            FuncKind::Identity => "identity",
            FuncKind::Square => "square",
            FuncKind::Sine => "sine",
            FuncKind::Step => "step",
        }
    }

    /// Whether `f` pushes `Unif(0,1)` forward to `Unif(0,1)` again.
    fn preserves_uniform(self) -> bool {
        matches!(self, FuncKind::Identity)
    }
}

impl std::str::FromStr for FuncKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(FuncKind::Identity),
            "square" => Ok(FuncKind::Square),
            "sine" => Ok(FuncKind::Sine),
            "step" => Ok(FuncKind::Step),
            other => Err(Error::InvalidGeneratorSpec(format!(
                "unknown function {other:?}; expected identity|square|sine|step"
            ))),
        }
    }
}

/// Distribution family names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BivariateNormal,
    GaussianCopula,
    Functional,
    Independent,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bivariate_normal" => Ok(Family::BivariateNormal),
            "gaussian_copula" => Ok(Family::GaussianCopula),
            "functional" => Ok(Family::Functional),
            "independent" => Ok(Family::Independent),
            other => Err(Error::InvalidGeneratorSpec(format!(
                "unknown family {other:?}; expected \
                 bivariate_normal|gaussian_copula|functional|independent"
            ))),
        }
    }
}

/// JSON-serializable experiment config: `{family, rho, n, seed, f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FuncKind>,
}

impl GeneratorSpec {
    pub fn bivariate_normal(rho: f64, n: usize, seed: u64) -> Self {
        Self {
            family: Family::BivariateNormal,
            rho: Some(rho),
            n,
            seed,
            f: None,
        }
    }

    pub fn gaussian_copula(rho: f64, n: usize, seed: u64) -> Self {
        Self {
            family: Family::GaussianCopula,
            rho: Some(rho),
            n,
            seed,
            f: None,
        }
    }

    pub fn functional(f: FuncKind, n: usize, seed: u64) -> Self {
        Self {
            family: Family::Functional,
            rho: None,
            n,
            seed,
            f: Some(f),
        }
    }

    pub fn independent(n: usize, seed: u64) -> Self {
        Self {
            family: Family::Independent,
            rho: None,
            n,
            seed,
            f: None,
        }
    }

    /// With the correlation replaced (used by rho-sweeps).
    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    /// With the seed replaced (used by replicated runs).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InsufficientData { got: self.n });
        }
        match self.family {
            Family::BivariateNormal | Family::GaussianCopula => {
                let rho = self.rho.ok_or_else(|| {
                    Error::InvalidGeneratorSpec("family requires rho".into())
                })?;
                if !(rho.abs() <= 1.0) {
                    return Err(Error::InvalidCorrelation { value: rho });
                }
            }
            Family::Functional => {
                if self.f.is_none() {
                    return Err(Error::InvalidGeneratorSpec(
                        "functional family requires f".into(),
                    ));
                }
            }
            Family::Independent => {}
        }
        Ok(())
    }
}

/// Output of [`gen`]: raw pairs for the bivariate normal, unit-square pairs
/// for everything else.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedSample {
    Paired(PairedSample),
    Unit(UnitSquareSample),
}

impl GeneratedSample {
    /// The coordinates as a raw paired sample (identity for `Paired`).
    pub fn to_paired(&self) -> PairedSample {
        match self {
            GeneratedSample::Paired(p) => p.clone(),
            GeneratedSample::Unit(u) => u.to_paired(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GeneratedSample::Paired(p) => p.len(),
            GeneratedSample::Unit(u) => u.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_unit(&self) -> Option<&UnitSquareSample> {
        match self {
            GeneratedSample::Unit(u) => Some(u),
            GeneratedSample::Paired(_) => None,
        }
    }
}

/// Standard normal CDF via `erfc`; absolute error below 1e-14 over the whole
/// axis (the underlying `erfc` is accurate to a couple of ulp).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Derives the seed for replicate `index` from a master seed (splitmix-style
/// mixing). Distinct indices give statistically independent generators while
/// keeping the whole experiment a pure function of the master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(index.wrapping_add(1)))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `(0, 1]`.
fn unit_open_left(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Draws a sample from the spec. Deterministic given `(family, n, seed)`.
pub fn gen(spec: &GeneratorSpec) -> Result<GeneratedSample> {
    spec.validate()?;
    let n = spec.n;
    match spec.family {
        Family::BivariateNormal => {
            let rho = spec.rho.unwrap();
            let scale = (1.0 - rho * rho).sqrt();
            let mut rng = stream_rng(spec.seed, 0);
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = rng.sample(StandardNormal);
                let w: f64 = rng.sample(StandardNormal);
                xs.push(x);
                ys.push(rho * x + scale * w);
            }
            Ok(GeneratedSample::Paired(PairedSample::new(xs, ys)?))
        }
        Family::GaussianCopula => {
            let rho = spec.rho.unwrap();
            let scale = (1.0 - rho * rho).sqrt();
            let mut rng = stream_rng(spec.seed, 0);
            let mut us = Vec::with_capacity(n);
            let mut vs = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = rng.sample(StandardNormal);
                let w: f64 = rng.sample(StandardNormal);
                us.push(normal_cdf(x));
                vs.push(normal_cdf(rho * x + scale * w));
            }
            Ok(GeneratedSample::Unit(UnitSquareSample::new_uniform(us, vs)?))
        }
        Family::Functional => {
            let f = spec.f.unwrap();
            let mut rng = stream_rng(spec.seed, 0);
            let mut us = Vec::with_capacity(n);
            let mut vs = Vec::with_capacity(n);
            for _ in 0..n {
                let u = unit_open_left(&mut rng);
                us.push(u);
                vs.push(apply_func(f, u));
            }
            let sample = UnitSquareSample::new(us, vs)?;
            Ok(GeneratedSample::Unit(if f.preserves_uniform() {
                sample.assume_uniform_margins()
            } else {
                sample
            }))
        }
        Family::Independent => {
            let mut rng_u = stream_rng(spec.seed, 0);
            let mut rng_v = stream_rng(spec.seed, 1);
            let us = (0..n).map(|_| unit_open_left(&mut rng_u)).collect();
            let vs = (0..n).map(|_| unit_open_left(&mut rng_v)).collect();
            Ok(GeneratedSample::Unit(UnitSquareSample::new_uniform(us, vs)?))
        }
    }
}

/// Four-level staircase on shuffled levels; values in {1/4, 1/2, 3/4, 1}.
const STEP_LEVELS: [f64; 4] = [0.75, 0.25, 1.0, 0.5];

fn apply_func(f: FuncKind, u: f64) -> f64 {
    match f {
        FuncKind::Identity => u,
        FuncKind::Square => u * u,
        // Rescaled full sine period; the clamp keeps the open-left interval
        // in the measure-zero event sin = -1.
        FuncKind::Sine => (0.5 + 0.5 * (std::f64::consts::TAU * u).sin()).max(f64::MIN_POSITIVE),
        FuncKind::Step => {
            let q = ((u * 4.0).ceil() as usize).clamp(1, 4) - 1;
            STEP_LEVELS[q]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chatterjee::chatterjee_xi;
    use crate::epsresid::zeta_limit;

    /// Two-sided Kolmogorov-Smirnov statistic against Unif(0,1).
    fn ks_uniform(values: &[f64]) -> f64 {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut d: f64 = 0.0;
        for (i, &v) in sorted.iter().enumerate() {
            let hi = (i + 1) as f64 / n as f64 - v;
            let lo = v - i as f64 / n as f64;
            d = d.max(hi).max(lo);
        }
        d
    }

    #[test]
    fn normal_cdf_reference_values() {
        // 20-digit references from an independent high-precision evaluation.
        let cases = [
            (-8.0, 6.2209605742717841235e-16),
            (-6.0, 9.8658764503769814070e-10),
            (-5.0, 2.8665157187919391167e-7),
            (-4.0, 0.000031671241833119921254),
            (-3.0, 0.0013498980316300945267),
            (-2.5, 0.0062096653257761351670),
            (-2.0, 0.022750131948179207200),
            (-1.5, 0.066807201268858066004),
            (-1.0, 0.15865525393145705141),
            (-0.5, 0.30853753872598689636),
            (-0.1, 0.46017216272297101853),
            (0.1, 0.53982783727702898147),
            (0.25, 0.59870632568292372424),
            (0.5, 0.69146246127401310364),
            (1.0, 0.84134474606854294859),
            (1.5, 0.93319279873114193400),
            (2.0, 0.97724986805182079280),
            (2.5, 0.99379033467422386483),
            (3.0, 0.99865010196836990547),
            (4.0, 0.99996832875816688008),
            (5.0, 0.99999971334842812081),
            (6.0, 0.99999999901341235496),
            (8.0, 0.99999999999999937790),
        ];
        for (x, expect) in cases {
            let got = normal_cdf(x);
            assert!(
                (got - expect).abs() <= 1e-13,
                "Phi({x}) = {got}, expected {expect}"
            );
        }
        assert_eq!(normal_cdf(0.0), 0.5);
        // The 97.5% quantile.
        assert!((normal_cdf(1.959963985) - 0.975).abs() <= 1e-9);
    }

    #[test]
    fn normal_cdf_symmetry() {
        let mut x = -8.0;
        while x <= 8.0 {
            assert!(
                (normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-12,
                "asymmetry at {x}"
            );
            x += 0.0625;
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for spec in [
            GeneratorSpec::bivariate_normal(0.4, 64, 9),
            GeneratorSpec::gaussian_copula(-0.7, 64, 9),
            GeneratorSpec::functional(FuncKind::Sine, 64, 9),
            GeneratorSpec::independent(64, 9),
        ] {
            assert_eq!(gen(&spec).unwrap(), gen(&spec).unwrap());
            assert_ne!(
                gen(&spec).unwrap(),
                gen(&spec.clone().with_seed(10)).unwrap()
            );
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(matches!(
            gen(&GeneratorSpec::bivariate_normal(1.5, 10, 0)),
            Err(Error::InvalidCorrelation { .. })
        ));
        assert!(matches!(
            gen(&GeneratorSpec::bivariate_normal(f64::NAN, 10, 0)),
            Err(Error::InvalidCorrelation { .. })
        ));
        assert!(matches!(
            gen(&GeneratorSpec::independent(1, 0)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn degenerate_copula_is_exactly_diagonal() {
        let spec = GeneratorSpec::bivariate_normal(1.0, 128, 3);
        if let GeneratedSample::Paired(p) = gen(&spec).unwrap() {
            assert_eq!(p.xs(), p.ys());
        } else {
            panic!("expected paired output");
        }
        let spec = GeneratorSpec::gaussian_copula(1.0, 128, 3);
        if let GeneratedSample::Unit(u) = gen(&spec).unwrap() {
            assert_eq!(u.us(), u.vs());
            assert!(u.has_uniform_margins());
        } else {
            panic!("expected unit output");
        }
    }

    #[test]
    fn independent_copula_has_small_normal_correlation() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = 8192usize;
        let spec = GeneratorSpec::gaussian_copula(0.0, n, 14);
        let u = match gen(&spec).unwrap() {
            GeneratedSample::Unit(u) => u,
            _ => unreachable!(),
        };
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = u.us().iter().map(|&p| normal.inverse_cdf(p)).collect();
        let ys: Vec<f64> = u.vs().iter().map(|&p| normal.inverse_cdf(p)).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        let mut sxy = 0.0;
        for (&x, &y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "r = {r}");
    }

    #[test]
    fn copula_marginals_pass_ks_uniformity() {
        // 1% critical value 1.63 / sqrt(n); fixed seeds keep this deterministic.
        let n = 10_000usize;
        let crit = 1.63 / (n as f64).sqrt();
        for seed in 1..=20u64 {
            let spec = GeneratorSpec::gaussian_copula(0.6, n, seed);
            let u = match gen(&spec).unwrap() {
                GeneratedSample::Unit(u) => u,
                _ => unreachable!(),
            };
            assert!(ks_uniform(u.us()) < crit, "u marginal, seed {seed}");
            assert!(ks_uniform(u.vs()) < crit, "v marginal, seed {seed}");
        }
    }

    #[test]
    fn functional_identity_attains_monotone_maximum() {
        let spec = GeneratorSpec::functional(FuncKind::Identity, 500, 21);
        let s = gen(&spec).unwrap().to_paired();
        let xi = chatterjee_xi(&s, 0).unwrap().xi;
        assert_eq!(xi, 498.0 / 501.0);
    }

    #[test]
    fn step_function_drives_xi_to_one() {
        let spec = GeneratorSpec::functional(FuncKind::Step, 10_000, 8);
        let sample = gen(&spec).unwrap();
        let xi = chatterjee_xi(&sample.to_paired(), 0).unwrap().xi;
        assert!(xi >= 0.95, "xi = {xi}");
        let unit = sample.as_unit().unwrap();
        assert!(zeta_limit(unit).xi >= 0.95);
        // Step levels are genuinely non-monotone in u.
        assert!(STEP_LEVELS.windows(2).any(|w| w[0] > w[1]));
        assert!(!unit.has_uniform_margins());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = GeneratorSpec::gaussian_copula(0.25, 100, 7);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"family":"gaussian_copula","rho":0.25,"n":100,"seed":7}"#
        );
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), spec);
        let spec = GeneratorSpec::functional(FuncKind::Step, 10, 1);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"functional","n":10,"seed":1,"f":"step"}"#);
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), spec);
    }
}
