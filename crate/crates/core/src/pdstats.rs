//! Poisson–Dirichlet and GEM reference laws, and empirical comparisons of
//! measured loop-length partitions against them.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{Accumulator, Series};

/// Stick-breaking stops once the unallocated mass falls below this.
pub const GEM_TRUNCATION: f64 = 1e-9;

pub const DEFAULT_CUTOFF: f64 = 0.05;
pub const CUTOFF_SWEEP: [f64; 3] = [0.02, 0.05, 0.1];
pub const MIN_SAMPLES: usize = 100;

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("PD parameter must be positive, got {theta}")))
    }
}

/// One GEM(ϑ) sequence `(X₁, (1−X₁)X₂, …)` with `Xᵢ ~ Beta(1, ϑ)`, in
/// size-biased order.
pub fn gem_sequence<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_theta(theta)?;
    let beta = Beta::new(1.0, theta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rest = 1.0;
    let mut out = Vec::new();
    while rest >= GEM_TRUNCATION {
        let x: f64 = beta.sample(rng);
        out.push(rest * x);
        rest *= 1.0 - x;
    }
    Ok(out)
}

/// `count` GEM(ϑ) sequences.
pub fn sample_gem<R: Rng + ?Sized>(theta: f64, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    (0..count).map(|_| gem_sequence(theta, rng)).collect()
}

/// GEM sequences sorted into decreasing order, i.e. PD(ϑ) samples.
pub fn sample_pd<R: Rng + ?Sized>(theta: f64, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let mut v = sample_gem(theta, count, rng)?;
    for p in &mut v {
        p.sort_by(|a, b| b.total_cmp(a));
    }
    Ok(v)
}

/// `E[Σ pᵢ²]` under PD(ϑ): closed form and the stick-breaking series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumSquares {
    pub closed: f64,
    pub series: f64,
}

pub fn pd_sum_squares(theta: f64) -> Result<SumSquares> {
    check_theta(theta)?;
    let ratio = theta / (theta + 2.0);
    let first = 2.0 / ((theta + 1.0) * (theta + 2.0));
    let mut term = first;
    let mut series = 0.0;
    while term > first * 1e-18 {
        series += term;
        term *= ratio;
    }
    Ok(SumSquares { closed: 1.0 / (theta + 1.0), series })
}

/// A measured partition restricted to its macroscopic part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSample {
    /// Decreasing lengths normalized by the total mass.
    pub lengths: Vec<f64>,
    pub cutoff: f64,
    /// Mass carried by entries at or above the cutoff.
    pub nu_hat: f64,
}

impl PartitionSample {
    pub fn new(lengths: Vec<f64>, cutoff: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&cutoff) {
            return Err(Error::InvalidParameter(format!("cutoff must lie in [0, 1), got {cutoff}")));
        }
        if lengths.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("partition entries must be decreasing".into()));
        }
        if lengths.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter("partition entries must be non-negative".into()));
        }
        let total: f64 = lengths.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("partition entries sum to {total} > 1")));
        }
        let nu_hat = lengths.iter().filter(|&&x| x >= cutoff).sum();
        Ok(PartitionSample { lengths, cutoff, nu_hat })
    }

    fn macroscopic(&self) -> impl Iterator<Item = f64> + '_ {
        self.lengths.iter().copied().take_while(move |&x| x >= self.cutoff)
    }

    /// `Σ (pᵢ/ν̂)²` over macroscopic entries, `None` when `ν̂ = 0`.
    pub fn normalized_sum_squares(&self) -> Option<f64> {
        (self.nu_hat > 0.0).then(|| self.macroscopic().map(|x| (x / self.nu_hat).powi(2)).sum())
    }

    /// `Σ pᵢ²` over macroscopic entries: the chance that two uniform points
    /// fall in the same macroscopic loop.
    pub fn same_loop(&self) -> f64 {
        self.macroscopic().map(|x| x * x).sum()
    }
}

/// Mean and error of a comparison, with a signed z-score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    /// `(mean − expected)/stderr`; `None` when the error vanishes.
    pub z: Option<f64>,
}

fn compare(series: &Series, expected: f64) -> Comparison {
    let e = series.estimate();
    let z = (e.stderr > 0.0 && e.stderr.is_finite()).then(|| (e.mean - expected) / e.stderr);
    Comparison { mean: e.mean, stderr: e.stderr, expected, z }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub cutoff: f64,
    /// Samples with `ν̂ > 0`.
    pub used: usize,
    pub nu_hat: MeanEstimate,
    /// `Σ (pᵢ/ν̂)²` against `1/(ϑ+1)`.
    pub moment: Option<Comparison>,
    /// `Σ pᵢ² − ν̂²/(ϑ+1)` against `0`.
    pub same_loop: Option<Comparison>,
    pub inconclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conjecture2Report {
    pub theta_expected: f64,
    pub samples: usize,
    pub cutoffs: Vec<CutoffReport>,
    /// True when every cutoff is inconclusive.
    pub inconclusive: bool,
}

/// Compares measured partitions with PD(ϑ). Samples are taken in the order
/// given and errors use batch means, so chain output may be passed directly.
pub fn conjecture2_test(partitions: &[Vec<f64>], theta_expected: f64, cutoffs: &[f64]) -> Result<Conjecture2Report> {
    check_theta(theta_expected)?;
    if partitions.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} partitions, got {}",
            partitions.len()
        )));
    }
    let expected = 1.0 / (theta_expected + 1.0);
    let mut reports = Vec::with_capacity(cutoffs.len());
    for &cutoff in cutoffs {
        let batch = Accumulator::batch_size_for(partitions.len() as u64);
        let mut nu = Series::new(batch);
        let mut moment = Series::new(batch);
        let mut same = Series::new(batch);
        let mut used = 0;
        for p in partitions {
            let s = PartitionSample::new(p.clone(), cutoff)?;
            nu.push(s.nu_hat);
            same.push(s.same_loop() - s.nu_hat * s.nu_hat * expected);
            if let Some(m) = s.normalized_sum_squares() {
                moment.push(m);
                used += 1;
            }
        }
        let inconclusive = used == 0;
        reports.push(CutoffReport {
            cutoff,
            used,
            nu_hat: {
                let e = nu.estimate();
                MeanEstimate { mean: e.mean, stderr: e.stderr }
            },
            moment: (!inconclusive).then(|| compare(&moment, expected)),
            same_loop: (!inconclusive).then(|| compare(&same, 0.0)),
            inconclusive,
        });
    }
    let inconclusive = reports.iter().all(|r| r.inconclusive);
    Ok(Conjecture2Report { theta_expected, samples: partitions.len(), cutoffs: reports, inconclusive })
}

/// PD parameter suggested for loop fugacity `θ` and crossing weight `u`. For
/// `u = 0` the answer depends on whether the graph is bipartite.
pub fn expected_pd_parameter(theta: f64, u: f64, bipartite: bool) -> f64 {
    if u == 1.0 || (u == 0.0 && bipartite) {
        theta
    } else {
        theta / 2.0
    }
}

/// Split and merge rate constants `r_s`, `r_m` for loops of total mass `mass`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMergeRates {
    pub split: f64,
    pub merge: f64,
}

pub fn split_merge_rates(theta: f64, c1: f64, c2: f64, mass: f64) -> Result<SplitMergeRates> {
    check_theta(theta)?;
    if !(c1 + c2 > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidParameter("rate constants and mass must be positive".into()));
    }
    let common = (c1 + c2) / mass;
    Ok(SplitMergeRates { split: common * theta.sqrt(), merge: common / theta.sqrt() })
}

/// `r_s / r_m`, optionally from explicit `(c₁, c₂)`.
pub fn split_merge_ratio(theta: f64, constants: Option<(f64, f64)>) -> Result<f64> {
    let (c1, c2) = constants.unwrap_or((1.0, 0.0));
    let r = split_merge_rates(theta, c1, c2, 1.0)?;
    Ok(r.split / r.merge)
}
