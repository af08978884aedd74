use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obs {
    /// `1[E_{v, v+x, t}]`, averaged over base vertices `v`.
    Kappa,
    KappaPlus,
    KappaMinus,
    /// `1[E⁺] − 1[E⁻]`.
    KappaDiff,
    /// `Σ_x ∫ 1[E_{v,x,t}] dt` on a jittered time grid, averaged over `v`.
    KappaTilde,
    /// `Σ_x L_{(x,0)}`.
    LoopLengthSum,
    /// `|Λ|⁻¹ Σ_x L_{(x,0)} / (β|Λ|)`.
    MacroFraction,
    /// `Σ_γ (L_γ / β|Λ|)²`.
    SumSquares,
    CrossCount,
    BarCount,
    TransitionCount,
    LoopCount,
}

impl Obs {
    pub fn name(self) -> &'static str {
        match self {
            Obs::Kappa => "kappa",
            Obs::KappaPlus => "kappa_plus",
            Obs::KappaMinus => "kappa_minus",
            Obs::KappaDiff => "kappa_diff",
            Obs::KappaTilde => "kappa_tilde",
            Obs::LoopLengthSum => "loop_length_sum",
            Obs::MacroFraction => "macroscopic_fraction",
            Obs::SumSquares => "sum_squares",
            Obs::CrossCount => "cross_count",
            Obs::BarCount => "bar_count",
            Obs::TransitionCount => "transition_count",
            Obs::LoopCount => "loop_count",
        }
    }
}

/// Accumulator key: observable, displacement (a vertex index) and time index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key {
    pub obs: Obs,
    pub x: u32,
    pub t: u32,
}

impl Key {
    pub fn scalar(obs: Obs) -> Self {
        Key { obs, x: 0, t: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_batches: u64,
}

impl Estimate {
    /// `|self − value|` in units of the standard error (infinite if the
    /// error is zero and the values differ).
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    pub fn scale(&self, c: f64) -> Estimate {
        Estimate { mean: c * self.mean, stderr: c.abs() * self.stderr, ..*self }
    }
}

/// Running sums plus batch means of one scalar stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    n: u64,
    sum: f64,
    sumsq: f64,
    batch_size: u64,
    cur_n: u64,
    cur_sum: f64,
    batches: Vec<f64>,
}

impl Series {
    pub fn new(batch_size: u64) -> Self {
        Series { n: 0, sum: 0.0, sumsq: 0.0, batch_size: batch_size.max(1), cur_n: 0, cur_sum: 0.0, batches: Vec::new() }
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
        self.cur_n += 1;
        self.cur_sum += x;
        if self.cur_n == self.batch_size {
            self.batches.push(self.cur_sum / self.batch_size as f64);
            self.cur_n = 0;
            self.cur_sum = 0.0;
        }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Mean with a batch-means standard error. With fewer than two complete
    /// batches the samples are treated as independent.
    pub fn estimate(&self) -> Estimate {
        let nb = self.batches.len();
        let mean = self.mean();
        let stderr = if nb >= 2 {
            let bm = self.batches.iter().sum::<f64>() / nb as f64;
            let var = self.batches.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (nb - 1) as f64;
            (var / nb as f64).sqrt()
        } else if self.n >= 2 {
            let var = ((self.sumsq - self.n as f64 * mean * mean) / (self.n - 1) as f64).max(0.0);
            (var / self.n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Estimate { mean, stderr, n_samples: self.n, n_batches: nb as u64 }
    }

    /// Pools another stream. Its incomplete batch counts towards the mean but
    /// not towards the batch statistics.
    pub fn merge(&mut self, other: &Series) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self.batches.extend_from_slice(&other.batches);
    }
}

/// Keyed collection of [`Series`] sharing one batch size.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "AccumulatorRepr", into = "AccumulatorRepr")]
pub struct Accumulator {
    batch_size: u64,
    keys: Vec<Key>,
    series: Vec<Series>,
    index: HashMap<Key, usize>,
}

#[derive(Serialize, Deserialize)]
struct AccumulatorRepr {
    batch_size: u64,
    entries: Vec<(Key, Series)>,
}

impl From<AccumulatorRepr> for Accumulator {
    fn from(r: AccumulatorRepr) -> Self {
        let mut acc = Accumulator::new(r.batch_size);
        for (k, s) in r.entries {
            let i = acc.slot(k);
            acc.series[i] = s;
        }
        acc
    }
}

impl From<Accumulator> for AccumulatorRepr {
    fn from(a: Accumulator) -> Self {
        AccumulatorRepr { batch_size: a.batch_size, entries: a.keys.into_iter().zip(a.series).collect() }
    }
}

impl Accumulator {
    pub fn new(batch_size: u64) -> Self {
        Accumulator { batch_size: batch_size.max(1), keys: Vec::new(), series: Vec::new(), index: HashMap::new() }
    }

    /// Batch size giving at least 32 batches for `observations` samples.
    pub fn batch_size_for(observations: u64) -> u64 {
        (observations / 32).max(1)
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    /// Registers `key` if needed and returns its slot.
    pub fn slot(&mut self, key: Key) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.keys.push(key);
        self.series.push(Series::new(self.batch_size));
        self.index.insert(key, self.keys.len() - 1);
        self.keys.len() - 1
    }

    pub fn push(&mut self, slot: usize, x: f64) {
        self.series[slot].push(x);
    }

    pub fn push_key(&mut self, key: Key, x: f64) {
        let i = self.slot(key);
        self.series[i].push(x);
    }

    pub fn series(&self, key: &Key) -> Option<&Series> {
        self.index.get(key).map(|&i| &self.series[i])
    }

    pub fn estimate(&self, key: &Key) -> Option<Estimate> {
        self.series(key).filter(|s| !s.is_empty()).map(Series::estimate)
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> Vec<Key> {
        let mut k = self.keys.clone();
        k.sort();
        k
    }

    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if other.batch_size != self.batch_size {
            return Err(Error::InvalidParameter(format!(
                "cannot merge accumulators with batch sizes {} and {}",
                self.batch_size, other.batch_size
            )));
        }
        for (k, s) in other.keys.iter().zip(&other.series) {
            let i = self.slot(*k);
            self.series[i].merge(s);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_of_constant_stream() {
        let mut s = Series::new(4);
        for _ in 0..64 {
            s.push(0.5);
        }
        let e = s.estimate();
        assert_eq!(e.mean, 0.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_batches, 16);
    }

    #[test]
    fn iid_stderr_matches_formula() {
        let mut s = Series::new(1);
        let xs = [1.0, 2.0, 3.0, 4.0];
        for x in xs {
            s.push(x);
        }
        let e = s.estimate();
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, four samples
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn merge_pools_and_round_trips() {
        let mut a = Accumulator::new(2);
        let mut b = Accumulator::new(2);
        let k = Key { obs: Obs::Kappa, x: 3, t: 0 };
        for i in 0..10 {
            a.push_key(k, i as f64);
            b.push_key(k, 2.0 * i as f64);
        }
        b.push_key(Key::scalar(Obs::LoopCount), 7.0);
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        let (x, y) = (ab.estimate(&k).unwrap(), ba.estimate(&k).unwrap());
        assert!((x.mean - y.mean).abs() < 1e-12 && (x.stderr - y.stderr).abs() < 1e-12);
        assert_eq!(x.n_samples, 20);
        assert_eq!(ab.keys(), ba.keys());
        let json = serde_json::to_string(&ab).unwrap();
        let back: Accumulator = serde_json::from_str(&json).unwrap();
        assert_eq!(back.estimate(&k), ab.estimate(&k));
        assert!(a.merge(&Accumulator::new(3)).is_err());
    }
}
