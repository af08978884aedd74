//! Exact diagonalization on small graphs.
//!
//! States live in `(C^{2S+1})^{⊗|Λ|}` with the product basis of `S³`
//! eigenvectors. Site `0` is the most significant digit, and on each site
//! index `i` carries the magnetization `a = S − i`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::Spin;

pub type DenseOperator = DMatrix<Complex64>;

pub const DEFAULT_DIMENSION_CAP: usize = 4096;

const HERMITIAN_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(op: &DenseOperator) -> f64 {
    op.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a * b - b * a
}

pub fn hermiticity_residual(op: &DenseOperator) -> f64 {
    max_abs(&(op - op.adjoint()))
}

/// `(S¹, S², S³)` in the basis `|S⟩, |S−1⟩, …, |−S⟩`.
pub fn spin_matrices(s: Spin) -> [DenseOperator; 3] {
    let m = s.multiplicity();
    let sv = s.value();
    let a = |i: usize| sv - i as f64;
    let mut s1 = DenseOperator::zeros(m, m);
    let mut s2 = DenseOperator::zeros(m, m);
    let s3 = DenseOperator::from_fn(m, m, |i, j| if i == j { c(a(i)) } else { c(0.0) });
    // S⁺|a⟩ = √(S(S+1) − a(a+1)) |a+1⟩, and |a+1⟩ sits at index i−1.
    for i in 1..m {
        let amp = (sv * (sv + 1.0) - a(i) * (a(i) + 1.0)).sqrt();
        s1[(i - 1, i)] = c(amp / 2.0);
        s1[(i, i - 1)] = c(amp / 2.0);
        s2[(i - 1, i)] = Complex64::new(0.0, -amp / 2.0);
        s2[(i, i - 1)] = Complex64::new(0.0, amp / 2.0);
    }
    [s1, s2, s3]
}

/// Kronecker product `A ⊗ B` (first factor most significant).
pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kronecker(b)
}

/// Transposition, singlet-type `P` and its sign-free variant `Q` on two sites.
#[derive(Clone, Debug)]
pub struct PairOperators {
    pub t: DenseOperator,
    pub p: DenseOperator,
    pub q: DenseOperator,
}

pub fn build_tpq(s: Spin) -> PairOperators {
    let m = s.multiplicity();
    let d = m * m;
    let mut t = DenseOperator::zeros(d, d);
    let mut p = DenseOperator::zeros(d, d);
    let mut q = DenseOperator::zeros(d, d);
    for i in 0..m {
        for j in 0..m {
            t[(j * m + i, i * m + j)] = c(1.0);
        }
    }
    // |a, −a⟩ has indices (i, m−1−i); (−1)^{a−c} = (−1)^{k−i} for rows i, columns k.
    for i in 0..m {
        for k in 0..m {
            let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
            p[(i * m + (m - 1 - i), k * m + (m - 1 - k))] = c(sign);
            q[(i * m + i, k * m + k)] = c(1.0);
        }
    }
    PairOperators { t, p, q }
}

/// `S_x · S_y` on two sites.
pub fn pair_dot(s: Spin) -> DenseOperator {
    let sm = spin_matrices(s);
    let d = s.multiplicity().pow(2);
    sm.iter().fold(DenseOperator::zeros(d, d), |acc, si| acc + kron(si, si))
}

/// Which operator accompanies `T` with weight `1 − u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `H = −Σ (uT + (1−u)Q − 1)`.
    H,
    /// `H̃ = −Σ (uT + (1−u)P − 1)`.
    HTilde,
}

/// Hilbert-space dimension `(2S+1)^n`, refusing anything above `cap`.
pub fn dimension(sites: usize, s: Spin, cap: usize) -> Result<usize> {
    let m = s.multiplicity();
    let mut dim: usize = 1;
    for _ in 0..sites {
        dim = match dim.checked_mul(m) {
            Some(d) if d <= cap => d,
            _ => return Err(Error::DimensionCap { dim: dim.saturating_mul(m), cap }),
        };
    }
    Ok(dim)
}

/// Lifts a one-site operator to site `x` of `n` sites.
pub fn embed_site(op: &DenseOperator, x: usize, n: usize, m: usize) -> DenseOperator {
    let left = DenseOperator::identity(m.pow(x as u32), m.pow(x as u32));
    let right = DenseOperator::identity(m.pow((n - x - 1) as u32), m.pow((n - x - 1) as u32));
    kron(&kron(&left, op), &right)
}

/// Lifts a two-site operator (first factor on `x`) to sites `x ≠ y`.
pub fn embed_pair(op: &DenseOperator, x: usize, y: usize, n: usize, m: usize) -> DenseOperator {
    assert!(x != y && x < n && y < n);
    let dim = m.pow(n as u32);
    let wx = m.pow((n - 1 - x) as u32);
    let wy = m.pow((n - 1 - y) as u32);
    let mut out = DenseOperator::zeros(dim, dim);
    for col in 0..dim {
        let (cx, cy) = ((col / wx) % m, (col / wy) % m);
        let base = col - cx * wx - cy * wy;
        let src = cx * m + cy;
        for ax in 0..m {
            for ay in 0..m {
                let v = op[(ax * m + ay, src)];
                if v != Complex64::ZERO {
                    out[(base + ax * wx + ay * wy, col)] += v;
                }
            }
        }
    }
    out
}

/// Operators of a spin system on a fixed graph.
#[derive(Clone, Debug)]
pub struct SpinSystem {
    sites: usize,
    spin: Spin,
    dim: usize,
    edges: Vec<(usize, usize)>,
    coords: Vec<Option<Vec<usize>>>,
    spins: [DenseOperator; 3],
    pair: PairOperators,
}

impl SpinSystem {
    pub fn new(graph: &Graph, spin: Spin, cap: usize) -> Result<Self> {
        let sites = graph.vertex_count();
        let dim = dimension(sites, spin, cap)?;
        Ok(SpinSystem {
            sites,
            spin,
            dim,
            edges: graph.edges().to_vec(),
            coords: (0..sites).map(|v| graph.coords(v)).collect(),
            spins: spin_matrices(spin),
            pair: build_tpq(spin),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn pair_operators(&self) -> &PairOperators {
        &self.pair
    }

    pub fn site(&self, op: &DenseOperator, x: usize) -> DenseOperator {
        embed_site(op, x, self.sites, self.spin.multiplicity())
    }

    pub fn pair(&self, op: &DenseOperator, x: usize, y: usize) -> DenseOperator {
        embed_pair(op, x, y, self.sites, self.spin.multiplicity())
    }

    /// `Sⁱ_x` with `i ∈ {1, 2, 3}`.
    pub fn spin_op(&self, i: usize, x: usize) -> DenseOperator {
        self.site(&self.spins[i - 1], x)
    }

    /// `Σ_x S³_x`.
    pub fn magnetization(&self) -> DenseOperator {
        (0..self.sites).fold(DenseOperator::zeros(self.dim, self.dim), |acc, x| acc + self.spin_op(3, x))
    }

    /// `Σ_x e^{−ik·x} S³_x` on a periodic cube.
    pub fn fourier_s3(&self, k: &[f64]) -> Result<DenseOperator> {
        let mut out = DenseOperator::zeros(self.dim, self.dim);
        for x in 0..self.sites {
            let Some(cx) = &self.coords[x] else {
                return Err(Error::InvalidGraph("Fourier modes need a periodic cube".into()));
            };
            if cx.len() != k.len() {
                return Err(Error::InvalidParameter(format!("momentum has {} components, lattice has {}", k.len(), cx.len())));
            }
            let phase: f64 = cx.iter().zip(k).map(|(&xi, ki)| xi as f64 * ki).sum();
            out += self.spin_op(3, x) * Complex64::from_polar(1.0, -phase);
        }
        Ok(out)
    }

    pub fn hamiltonian(&self, u: f64, family: Family) -> Result<DenseOperator> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidParameter(format!("u must lie in [0, 1], got {u}")));
        }
        let d2 = self.pair.t.nrows();
        let other = match family {
            Family::H => &self.pair.q,
            Family::HTilde => &self.pair.p,
        };
        let local = -(&self.pair.t * c(u) + other * c(1.0 - u) - DenseOperator::identity(d2, d2));
        let mut h = DenseOperator::zeros(self.dim, self.dim);
        for &(x, y) in &self.edges {
            h += self.pair(&local, x, y);
        }
        Ok(h)
    }
}

/// `H^{(u)}` or `H̃^{(u)}` on `graph`.
pub fn build_hamiltonian(graph: &Graph, u: f64, s: Spin, family: Family, cap: usize) -> Result<DenseOperator> {
    SpinSystem::new(graph, s, cap)?.hamiltonian(u, family)
}

/// Spectral data of `e^{−βH}`. Energies are stored shifted by the ground
/// energy so that all Boltzmann weights lie in `(0, 1]`.
#[derive(Clone, Debug)]
pub struct Gibbs {
    beta: f64,
    ground: f64,
    shifted: Vec<f64>,
    weights: Vec<f64>,
    weight_sum: f64,
    vectors: DenseOperator,
}

impl Gibbs {
    pub fn new(h: &DenseOperator, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let r = hermiticity_residual(h);
        if r > HERMITIAN_TOL * (1.0 + max_abs(h)) {
            return Err(Error::NotHermitian(r));
        }
        let eig = SymmetricEigen::new(h.clone());
        let ground = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = eig.eigenvalues.iter().map(|l| l - ground).collect();
        let weights: Vec<f64> = shifted.iter().map(|l| (-beta * l).exp()).collect();
        let weight_sum = weights.iter().sum();
        Ok(Gibbs { beta, ground, shifted, weights, weight_sum, vectors: eig.eigenvectors })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Eigenvalues in increasing order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.shifted.iter().map(|l| l + self.ground).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn log_z(&self) -> f64 {
        self.weight_sum.ln() - self.beta * self.ground
    }

    pub fn z(&self) -> f64 {
        self.log_z().exp()
    }

    /// `V† A V` in the eigenbasis.
    fn rotate(&self, a: &DenseOperator) -> DenseOperator {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// `⟨A⟩ = Z⁻¹ Tr A e^{−βH}`.
    pub fn expectation(&self, a: &DenseOperator) -> Complex64 {
        let ar = self.rotate(a);
        self.weights.iter().enumerate().map(|(i, w)| ar[(i, i)] * *w).sum::<Complex64>() / self.weight_sum
    }

    /// `⟨A; B⟩(t) = Z⁻¹ Tr A e^{−(β−t)H} B e^{−tH}` for `t ∈ [0, β]`.
    pub fn schwinger(&self, a: &DenseOperator, b: &DenseOperator, t: f64) -> Result<Complex64> {
        if !(0.0..=self.beta).contains(&t) {
            return Err(Error::InvalidParameter(format!("time {t} outside [0, {}]", self.beta)));
        }
        let (ar, br) = (self.rotate(a), self.rotate(b));
        let n = self.shifted.len();
        let ex: Vec<f64> = self.shifted.iter().map(|l| (-t * l).exp()).collect();
        let ey: Vec<f64> = self.shifted.iter().map(|l| (-(self.beta - t) * l).exp()).collect();
        let mut sum = Complex64::ZERO;
        for i in 0..n {
            for j in 0..n {
                sum += ar[(i, j)] * br[(j, i)] * (ey[j] * ex[i]);
            }
        }
        Ok(sum / self.weight_sum)
    }

    /// Duhamel function `Z⁻¹ ∫₀^β Tr A† e^{−sH} B e^{−(β−s)H} ds`.
    pub fn duhamel(&self, a: &DenseOperator, b: &DenseOperator) -> Complex64 {
        let (ar, br) = (self.rotate(&a.adjoint()), self.rotate(b));
        let n = self.shifted.len();
        let mut sum = Complex64::ZERO;
        for i in 0..n {
            for j in 0..n {
                let k = self.kernel(i, j);
                if k != 0.0 {
                    sum += ar[(i, j)] * br[(j, i)] * k;
                }
            }
        }
        sum / self.weight_sum
    }

    /// `∫₀^β e^{−sλ_j − (β−s)λ_i} ds` with shifted energies.
    fn kernel(&self, i: usize, j: usize) -> f64 {
        let (li, lj) = (self.shifted[i], self.shifted[j]);
        let delta = lj - li;
        if delta == 0.0 {
            self.beta * self.weights[i]
        } else {
            self.weights[i] * -(-self.beta * delta).exp_m1() / delta
        }
    }
}

/// `Z = Tr e^{−βH}`.
pub fn partition_function(h: &DenseOperator, beta: f64) -> Result<f64> {
    Ok(Gibbs::new(h, beta)?.z())
}

/// `(A, B)_Duh` at inverse temperature `β`.
pub fn duhamel(a: &DenseOperator, b: &DenseOperator, h: &DenseOperator, beta: f64) -> Result<Complex64> {
    Ok(Gibbs::new(h, beta)?.duhamel(a, b))
}

/// Second `h`-derivative of `log Tr e^{−βH + βhM}` at `h = 0`, `M = Σ S³_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Susceptibility {
    /// Centered difference with step `h_step`.
    pub finite_difference: f64,
    /// The same with step `h_step / 2`.
    pub finite_difference_half: f64,
    /// `β (M, M)_Duh − β² ⟨M⟩²`.
    pub exact: f64,
    /// Centered first difference, zero by spin-flip symmetry.
    pub first_derivative: f64,
}

pub fn susceptibility_second_derivative(
    graph: &Graph,
    u: f64,
    s: Spin,
    family: Family,
    beta: f64,
    h_step: f64,
    cap: usize,
) -> Result<Susceptibility> {
    if !(h_step > 0.0) {
        return Err(Error::InvalidParameter(format!("h_step must be positive, got {h_step}")));
    }
    let sys = SpinSystem::new(graph, s, cap)?;
    let h = sys.hamiltonian(u, family)?;
    let m = sys.magnetization();
    let g0 = Gibbs::new(&h, beta)?;
    let f = |field: f64| -> Result<f64> { Ok(Gibbs::new(&(&h - &m * c(field)), beta)?.log_z()) };
    let f0 = g0.log_z();
    let second = |step: f64| -> Result<f64> { Ok((f(step)? - 2.0 * f0 + f(-step)?) / (step * step)) };
    let mean = g0.expectation(&m).re;
    Ok(Susceptibility {
        finite_difference: second(h_step)?,
        finite_difference_half: second(h_step / 2.0)?,
        exact: beta * g0.duhamel(&m, &m).re - beta * beta * mean * mean,
        first_derivative: (f(h_step)? - f(-h_step)?) / (2.0 * h_step),
    })
}

/// `T³³`, `Q³³` with the residuals of their double-commutator expressions.
#[derive(Clone, Debug)]
pub struct DoubleCommutators {
    pub t33: DenseOperator,
    pub q33: DenseOperator,
    /// Named `max |lhs − rhs|` values.
    pub residuals: Vec<(&'static str, f64)>,
}

pub fn double_commutators(s: Spin) -> DoubleCommutators {
    let m = s.multiplicity();
    let d = m * m;
    let sv = s.value();
    let a = |i: usize| sv - i as f64;
    let mut t33 = DenseOperator::zeros(d, d);
    let mut q33 = DenseOperator::zeros(d, d);
    for i in 0..m {
        for k in 0..m {
            let w = c((a(i) - a(k)).powi(2));
            q33[(i * m + i, k * m + k)] = w;
            // ⟨a,b|T³³|c,d⟩ = (a−c)² δ_ad δ_bc: column (c,d) = (k, i), row (a,b) = (i, k).
            t33[(i * m + k, k * m + i)] = w;
        }
    }
    let PairOperators { t, q, .. } = build_tpq(s);
    let [_, _, s3] = spin_matrices(s);
    let id = DenseOperator::identity(m, m);
    let sx = kron(&s3, &id);
    let sy = kron(&id, &s3);
    let diff = &sx - &sy;
    let residuals = vec![
        ("Q33 = -[S3x,[Q,S3x]]", max_abs(&(&q33 + commutator(&sx, &commutator(&q, &sx))))),
        ("Q33 = -[S3y,[Q,S3x]]", max_abs(&(&q33 + commutator(&sy, &commutator(&q, &sx))))),
        ("T33 = -[S3x,[T,S3x]]", max_abs(&(&t33 + commutator(&sx, &commutator(&t, &sx))))),
        ("T33 = [S3y,[T,S3x]]", max_abs(&(&t33 - commutator(&sy, &commutator(&t, &sx))))),
        ("T33 = (S3x-S3y)^2 T", max_abs(&(&t33 - &diff * &diff * &t))),
    ];
    DoubleCommutators { t33, q33, residuals }
}

/// Both sides of `⟨[Ŝ³_{−k}, [H, Ŝ³_k]]⟩ = |Λ|(u ε(k) τ₁ + (1−u) ε(k+π) τ₀)`
/// for the family `H` on a periodic cube.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleCommutatorCheck {
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs: f64,
    pub tau0: f64,
    pub tau1: f64,
}

pub fn double_commutator_check(graph: &Graph, u: f64, s: Spin, beta: f64, k: &[f64], cap: usize) -> Result<DoubleCommutatorCheck> {
    let cube = graph.cube().ok_or_else(|| Error::InvalidGraph("a periodic cube is required".into()))?;
    let e1 = graph.unit(0).ok_or_else(|| Error::InvalidGraph("cube has no first axis".into()))?;
    let sys = SpinSystem::new(graph, s, cap)?;
    let h = sys.hamiltonian(u, Family::H)?;
    let gibbs = Gibbs::new(&h, beta)?;
    let sk = sys.fourier_s3(k)?;
    let minus: Vec<f64> = k.iter().map(|x| -x).collect();
    let smk = sys.fourier_s3(&minus)?;
    let lhs = gibbs.expectation(&commutator(&smk, &commutator(&h, &sk)));
    let dc = double_commutators(s);
    let tau1 = gibbs.expectation(&sys.pair(&dc.t33, 0, e1)).re;
    let tau0 = gibbs.expectation(&sys.pair(&dc.q33, 0, e1)).re;
    let shifted: Vec<f64> = k.iter().map(|x| x + std::f64::consts::PI).collect();
    let eps = |q: &[f64]| -> f64 { q.iter().map(|x| 2.0 * (1.0 - x.cos())).sum() };
    debug_assert_eq!(k.len(), cube.dim);
    let rhs = sys.sites() as f64 * (u * eps(k) * tau1 + (1.0 - u) * eps(&shifted) * tau0);
    Ok(DoubleCommutatorCheck { lhs_re: lhs.re, lhs_im: lhs.im, rhs, tau0, tau1 })
}

/// `e^{−iG}` for Hermitian `G`.
pub fn unitary_exp(g: &DenseOperator) -> DenseOperator {
    let eig = SymmetricEigen::new(g.clone());
    let phases = DenseOperator::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// `e^{−i(S^a_x + S^a_y)} A e^{i(S^a_x + S^a_y)}` for a two-site operator, where
/// `S^a = a₁S¹ + a₂S² + a₃S³`.
pub fn rotate_pair(op: &DenseOperator, s: Spin, a: [f64; 3]) -> DenseOperator {
    let m = s.multiplicity();
    let sm = spin_matrices(s);
    let single = sm.iter().zip(a).fold(DenseOperator::zeros(m, m), |acc, (si, ai)| acc + si * c(ai));
    let id = DenseOperator::identity(m, m);
    let gen = kron(&single, &id) + kron(&id, &single);
    let u = unitary_exp(&gen);
    &u * op * u.adjoint()
}

/// Residuals of the spin-1 polynomial forms of `T` and `P`.
pub fn spin1_residuals() -> [(&'static str, f64); 2] {
    let s = Spin::ONE;
    let PairOperators { t, p, .. } = build_tpq(s);
    let dot = pair_dot(s);
    let sq = &dot * &dot;
    let id = DenseOperator::identity(9, 9);
    [
        ("T = S.S + (S.S)^2 - 1", max_abs(&(&t - (&dot + &sq - &id)))),
        ("P = (S.S)^2 - 1", max_abs(&(&p - (&sq - &id)))),
    ]
}

/// `Σ_{xy∈E} (Σ_i c_i Sⁱ_x Sⁱ_y + c₀)` on `graph`.
pub fn bilinear_sum(sys: &SpinSystem, graph: &Graph, coeffs: [f64; 3], constant: f64) -> DenseOperator {
    let sm = spin_matrices(sys.spin());
    let m = sys.spin().multiplicity();
    let local = sm
        .iter()
        .zip(coeffs)
        .fold(DenseOperator::identity(m * m, m * m) * c(constant), |acc, (si, ci)| acc + kron(si, si) * c(ci));
    graph.edges().iter().fold(DenseOperator::zeros(sys.dim(), sys.dim()), |acc, &(x, y)| acc + sys.pair(&local, x, y))
}
