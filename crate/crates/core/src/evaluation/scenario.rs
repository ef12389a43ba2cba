//! Ground-truth step signals with additive noise of zero median.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal, StudentT};
use serde::Serialize;
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::error::{MuscleError, Result};
use crate::segmentation::TimeSeries;

/// Unscaled noise families, each with median zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    StudentT3,
    Cauchy,
    /// `chi2_3 - median(chi2_3)`.
    CenteredChiSq3,
}

/// Noise law on the 1-based positions up to and including `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisePiece {
    pub end: usize,
    pub kind: NoiseKind,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    /// Sample indices `t` after which the signal jumps; the new segment
    /// starts at `t + 1`, i.e. at `tau = t / n`.
    pub change_points: Vec<usize>,
    /// Signal value on each of the `change_points.len() + 1` segments.
    pub values: Vec<f64>,
    pub noise: Vec<NoisePiece>,
}

/// A generated series with its noiseless signal.
#[derive(Debug, Clone)]
pub struct Sample {
    pub series: TimeSeries,
    pub signal: Vec<f64>,
}

const BLOCKS_N: usize = 2048;
const BLOCKS_CHANGES: [usize; 11] = [205, 267, 308, 472, 512, 820, 902, 1332, 1557, 1598, 1659];
const BLOCKS_VALUES: [f64; 12] = [
    0.0, 14.64, -3.66, 7.32, -7.32, 10.98, -4.39, 3.29, 19.03, 7.68, 15.37, 0.0,
];
/// Last index of each noise regime in the heterogeneous blocks scenarios.
const REGIMES: [usize; 4] = [389, 666, 1445, 2048];

pub const SCENARIO_NAMES: [&str; 9] = [
    "E1", "E2", "E3", "E4", "E5", "teeth", "blocks", "windowing", "null",
];

impl Scenario {
    pub fn by_name(name: &str) -> Result<Scenario> {
        match name.to_ascii_lowercase().as_str() {
            "e1" => Ok(Scenario::e1()),
            "e2" => Ok(Scenario::e2()),
            "e3" => Ok(Scenario::e3()),
            "e4" => Ok(Scenario::e4()),
            "e5" => Ok(Scenario::e5()),
            "teeth" => Ok(Scenario::teeth()),
            "blocks" => Ok(Scenario::blocks()),
            "windowing" => Ok(Scenario::windowing()),
            "null" => Ok(Scenario::null(500)),
            _ => Err(MuscleError::invalid_input(format!(
                "unknown scenario '{name}' (expected one of {})",
                SCENARIO_NAMES.join(", ")
            ))),
        }
    }

    /// Two jumps at samples 986 and 1016 of 2000, levels -4, 0, 4, N(0, 0.9).
    pub fn e1() -> Scenario {
        Scenario::two_jumps(2000, 986, 1016)
    }

    /// E1 levels and noise with jumps after samples `a` and `b`.
    pub fn two_jumps(n: usize, a: usize, b: usize) -> Scenario {
        Scenario {
            name: if n == 2000 && a == 986 && b == 1016 {
                "E1".into()
            } else {
                format!("two_jumps_{n}")
            },
            n,
            change_points: vec![a, b],
            values: vec![-4.0, 0.0, 4.0],
            noise: vec![NoisePiece {
                end: n,
                kind: NoiseKind::Gaussian,
                scale: 0.9f64.sqrt(),
            }],
        }
    }

    /// Blocks with scaled t3 noise whose spread changes three times.
    pub fn e2() -> Scenario {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Scenario::blocks_with("E2", regime_noise(NoiseKind::StudentT3, [8.0 * s, 0.5 * s, 4.0 * s, s]))
    }

    pub fn e3() -> Scenario {
        Scenario::blocks_with("E3", regime_noise(NoiseKind::Cauchy, [0.6, 0.05, 0.6, 0.2]))
    }

    pub fn e4() -> Scenario {
        let s = 6f64.powf(-0.5);
        Scenario::blocks_with(
            "E4",
            regime_noise(NoiseKind::CenteredChiSq3, [6.0 * s, 0.5 * s, 6.0 * s, 2.0 * s]),
        )
    }

    /// A different noise family in each regime.
    pub fn e5() -> Scenario {
        let kinds = [
            (NoiseKind::Gaussian, 8.0),
            (NoiseKind::StudentT3, 1.0 / (2.0 * 3f64.sqrt())),
            (NoiseKind::CenteredChiSq3, 4.0 / 6f64.sqrt()),
            (NoiseKind::Cauchy, 0.1),
        ];
        let noise = REGIMES
            .iter()
            .zip(kinds)
            .map(|(&end, (kind, scale))| NoisePiece { end, kind, scale })
            .collect();
        Scenario::blocks_with("E5", noise)
    }

    /// Blocks with standard Gaussian noise.
    pub fn blocks() -> Scenario {
        Scenario::blocks_with(
            "blocks",
            vec![NoisePiece {
                end: BLOCKS_N,
                kind: NoiseKind::Gaussian,
                scale: 1.0,
            }],
        )
    }

    /// The blocks signal rescaled to `n` points with standard Gaussian noise.
    pub fn blocks_scaled(n: usize) -> Scenario {
        let mut s = Scenario::blocks();
        s.name = format!("blocks_{n}");
        s.n = n;
        s.change_points = BLOCKS_CHANGES
            .iter()
            .map(|&t| (t as f64 * n as f64 / BLOCKS_N as f64).round() as usize)
            .collect();
        s.noise[0].end = n;
        s
    }

    fn blocks_with(name: &str, noise: Vec<NoisePiece>) -> Scenario {
        Scenario {
            name: name.into(),
            n: BLOCKS_N,
            change_points: BLOCKS_CHANGES.to_vec(),
            values: BLOCKS_VALUES.to_vec(),
            noise,
        }
    }

    /// 81 equal segments alternating between 0 and 3 on 2000 points, t3
    /// noise with unit standard deviation.
    pub fn teeth() -> Scenario {
        let n = 2000;
        let k = 81;
        Scenario {
            name: "teeth".into(),
            n,
            change_points: (1..k).map(|j| (j as f64 * n as f64 / k as f64).round() as usize).collect(),
            values: (0..k).map(|j| if j % 2 == 0 { 0.0 } else { 3.0 }).collect(),
            noise: vec![NoisePiece {
                end: n,
                kind: NoiseKind::StudentT3,
                scale: 1.0 / 3f64.sqrt(),
            }],
        }
    }

    /// `2 on [0.05, 0.1), -2 on [0.6, 0.725), 1 on [0.725, 1)` over 400
    /// points; N(0, 1) noise for the first 100, `t3 / (2 sqrt 3)` after.
    pub fn windowing() -> Scenario {
        Scenario {
            name: "windowing".into(),
            n: 400,
            change_points: vec![20, 40, 240, 290],
            values: vec![0.0, 2.0, 0.0, -2.0, 1.0],
            noise: vec![
                NoisePiece {
                    end: 100,
                    kind: NoiseKind::Gaussian,
                    scale: 1.0,
                },
                NoisePiece {
                    end: 400,
                    kind: NoiseKind::StudentT3,
                    scale: 1.0 / (2.0 * 3f64.sqrt()),
                },
            ],
        }
    }

    /// Constant zero signal in standard Gaussian noise.
    pub fn null(n: usize) -> Scenario {
        Scenario {
            name: format!("null_{n}"),
            n,
            change_points: Vec::new(),
            values: vec![0.0],
            noise: vec![NoisePiece {
                end: n,
                kind: NoiseKind::Gaussian,
                scale: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(MuscleError::invalid_input("scenario length must be positive"));
        }
        if self.values.len() != self.change_points.len() + 1 {
            return Err(MuscleError::invalid_input("need one value per segment"));
        }
        let mut prev = 0;
        for &t in &self.change_points {
            if t <= prev || t >= self.n {
                return Err(MuscleError::invalid_input("change points must increase inside 1..n"));
            }
            prev = t;
        }
        if self.values.windows(2).any(|w| w[0] == w[1]) {
            return Err(MuscleError::invalid_input("adjacent segment values must differ"));
        }
        if self.noise.last().map(|p| p.end) != Some(self.n)
            || self.noise.windows(2).any(|w| w[0].end >= w[1].end)
        {
            return Err(MuscleError::invalid_input("noise pieces must tile 1..n"));
        }
        Ok(())
    }

    pub fn num_changes(&self) -> usize {
        self.change_points.len()
    }

    /// True change locations `t / n`.
    pub fn change_fractions(&self) -> Vec<f64> {
        self.change_points.iter().map(|&t| t as f64 / self.n as f64).collect()
    }

    /// Noiseless signal at every position.
    pub fn signal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        let mut seg = 0;
        for i in 1..=self.n {
            while seg < self.change_points.len() && i > self.change_points[seg] {
                seg += 1;
            }
            out.push(self.values[seg]);
        }
        out
    }

    /// True segment index of every position.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        let mut seg = 0;
        for i in 1..=self.n {
            while seg < self.change_points.len() && i > self.change_points[seg] {
                seg += 1;
            }
            out.push(seg);
        }
        out
    }

    pub fn generate(&self, seed: u64) -> Result<Sample> {
        self.generate_with(seed, true)
    }

    /// With `noisy == false` the series equals the signal exactly.
    pub fn generate_with(&self, seed: u64, noisy: bool) -> Result<Sample> {
        self.validate()?;
        let signal = self.signal();
        let mut values = signal.clone();
        if noisy {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sampler = NoiseSampler::new();
            let mut piece = 0;
            for (i, v) in values.iter_mut().enumerate() {
                while i + 1 > self.noise[piece].end {
                    piece += 1;
                }
                let p = self.noise[piece];
                *v += p.scale * sampler.draw(p.kind, &mut rng);
            }
        }
        Ok(Sample {
            series: TimeSeries::new(values)?,
            signal,
        })
    }
}

fn regime_noise(kind: NoiseKind, scales: [f64; 4]) -> Vec<NoisePiece> {
    REGIMES
        .iter()
        .zip(scales)
        .map(|(&end, scale)| NoisePiece { end, kind, scale })
        .collect()
}

/// Median of the chi-square law with 3 degrees of freedom.
pub fn chi_sq3_median() -> f64 {
    ChiSquaredLaw::new(3.0).expect("valid degrees of freedom").inverse_cdf(0.5)
}

pub(crate) struct NoiseSampler {
    t3: StudentT<f64>,
    cauchy: Cauchy<f64>,
    chi3: ChiSquared<f64>,
    chi3_median: f64,
}

impl NoiseSampler {
    pub(crate) fn new() -> Self {
        NoiseSampler {
            t3: StudentT::new(3.0).expect("valid degrees of freedom"),
            cauchy: Cauchy::new(0.0, 1.0).expect("valid scale"),
            chi3: ChiSquared::new(3.0).expect("valid degrees of freedom"),
            chi3_median: chi_sq3_median(),
        }
    }

    pub(crate) fn draw<R: rand::Rng + ?Sized>(&mut self, kind: NoiseKind, rng: &mut R) -> f64 {
        match kind {
            NoiseKind::Gaussian => StandardNormal.sample(rng),
            NoiseKind::StudentT3 => self.t3.sample(rng),
            NoiseKind::Cauchy => self.cauchy.sample(rng),
            NoiseKind::CenteredChiSq3 => self.chi3.sample(rng) - self.chi3_median,
        }
    }
}
