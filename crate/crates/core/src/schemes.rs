//! Approximation schemes: quotient towers, Følner exhaustions of `ℤⁿ`, and
//! the certifications run on their level reports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{GroupDescriptor, GroupElement, Homomorphism};
use crate::oracles::{torus_density, torus_logdet};
use crate::scalar::{gaussian_to_string, Coefficient};
use crate::spectral::{
    hermitian_eigenvalues_with, level_spectrum, EigenResult, HermitianMatrix, SpectralDensity,
    SpectralOptions,
};
use crate::{GaussianRational, RingMatrix};

/// Default per-coordinate moduli of the tower `ℤⁿ → (ℤ/N)ⁿ`.
pub const DEFAULT_TOWER_LEVELS: [u64; 6] = [8, 16, 32, 64, 128, 256];
/// Default tolerance for limit-versus-oracle comparisons.
pub const DEFAULT_TOL: f64 = 0.02;

/// A sequence of homomorphisms from one source onto finite groups.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientTower {
    source: GroupDescriptor,
    levels: Vec<Homomorphism>,
}

impl QuotientTower {
    pub fn new(source: GroupDescriptor, levels: Vec<Homomorphism>) -> Result<Self> {
        for phi in &levels {
            if *phi.source() != source {
                return Err(Error::WrongGroup {
                    expected: source.to_string(),
                    found: phi.source().to_string(),
                });
            }
            if !phi.target().is_finite() {
                return Err(Error::InfiniteGroup(phi.target().to_string()));
            }
        }
        Ok(QuotientTower { source, levels })
    }

    /// `ℤⁿ → (ℤ/N)ⁿ` for each `N` in `moduli`.
    pub fn cyclic(rank: usize, moduli: &[u64]) -> Result<Self> {
        let levels = moduli
            .iter()
            .map(|&n| Homomorphism::reduction(rank, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(GroupDescriptor::FreeAbelian(rank), levels)
    }

    /// The identity of a finite group repeated `count` times.
    pub fn stationary(group: GroupDescriptor, count: usize) -> Result<Self> {
        if !group.is_finite() {
            return Err(Error::InfiniteGroup(group.to_string()));
        }
        let levels = vec![Homomorphism::identity(group.clone()); count];
        Self::new(group, levels)
    }

    pub fn source(&self) -> &GroupDescriptor {
        &self.source
    }

    pub fn levels(&self) -> &[Homomorphism] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Whether level `i` is injective on `set`.
    pub fn injective_on(&self, level: usize, set: &[GroupElement]) -> Result<bool> {
        self.levels
            .get(level)
            .ok_or_else(|| Error::InvalidArgument(format!("no level {level}")))?
            .is_injective_on(set)
    }
}

/// A finite subset of `ℤⁿ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FolnerSet {
    /// The box `[−m, m]ⁿ`.
    Box(u64),
    Points(Vec<Vec<i64>>),
}

/// Nested finite subsets of `ℤⁿ` with the sup-norm metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FolnerExhaustion {
    rank: usize,
    sets: Vec<FolnerSet>,
}

/// Boxes `[−m, m]ⁿ` for `m = 1, 2, 4, …, ≤ m_max`.
pub fn build_boxes_folner(n: usize, m_max: u64) -> Result<FolnerExhaustion> {
    let mut radii = Vec::new();
    let mut m = 1;
    while m <= m_max {
        radii.push(m);
        m *= 2;
    }
    FolnerExhaustion::boxes(n, &radii)
}

impl FolnerExhaustion {
    pub fn boxes(rank: usize, radii: &[u64]) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("boxes need rank at least 1".into()));
        }
        if radii.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(
                "box radii must be nondecreasing".into(),
            ));
        }
        Ok(FolnerExhaustion {
            rank,
            sets: radii.iter().map(|&m| FolnerSet::Box(m)).collect(),
        })
    }

    /// User-supplied sets; nestedness is verified.
    pub fn from_sets(rank: usize, sets: Vec<Vec<Vec<i64>>>) -> Result<Self> {
        for (i, set) in sets.iter().enumerate() {
            if set.iter().any(|p| p.len() != rank) {
                return Err(Error::DimensionMismatch(format!(
                    "set {i} has points of the wrong rank"
                )));
            }
            if i > 0 {
                let prev: HashSet<&Vec<i64>> = sets[i - 1].iter().collect();
                let cur: HashSet<&Vec<i64>> = set.iter().collect();
                if !prev.is_subset(&cur) {
                    return Err(Error::InvalidArgument(format!(
                        "set {} is not contained in set {i}",
                        i - 1
                    )));
                }
            }
        }
        Ok(FolnerExhaustion {
            rank,
            sets: sets.into_iter().map(FolnerSet::Points).collect(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sets(&self) -> &[FolnerSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn points(&self, level: usize) -> Vec<Vec<i64>> {
        match &self.sets[level] {
            FolnerSet::Box(m) => box_points(self.rank, *m),
            FolnerSet::Points(p) => p.clone(),
        }
    }

    /// `|N_K(X)|/|X|` for the set at `level`.
    pub fn defect(&self, level: usize, k: u64) -> f64 {
        match &self.sets[level] {
            FolnerSet::Box(m) => box_defect(self.rank, *m, k),
            FolnerSet::Points(p) => defect(p, k),
        }
    }
}

fn box_points(rank: usize, m: u64) -> Vec<Vec<i64>> {
    let m = m as i64;
    let side = (2 * m + 1) as usize;
    let total = side.pow(rank as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0; rank];
            for x in p.iter_mut().rev() {
                *x = (idx % side) as i64 - m;
                idx /= side;
            }
            p
        })
        .collect()
}

/// `|N_K([−m,m]ⁿ)| / (2m+1)ⁿ` in closed form:
/// `((2m+2K+1)ⁿ − (2m−2K+1)₊ⁿ) / (2m+1)ⁿ` for `K ≥ 1`.
pub fn box_defect(rank: usize, m: u64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let n = rank as i32;
    let outer = ((2 * m + 2 * k + 1) as f64).powi(n);
    let inner = if m >= k {
        ((2 * (m - k) + 1) as f64).powi(n)
    } else {
        0.0
    };
    (outer - inner) / ((2 * m + 1) as f64).powi(n)
}

/// `|N_K(X)|/|X|` with `N_K(X) = {x : d(x, X) ≤ K and d(x, Xᶜ) ≤ K}` in the
/// sup-norm metric, by direct counting.
pub fn defect(points: &[Vec<i64>], k: u64) -> f64 {
    if points.is_empty() || k == 0 {
        return 0.0;
    }
    let rank = points[0].len();
    let set: HashSet<&[i64]> = points.iter().map(Vec::as_slice).collect();
    let ball = box_points(rank, k);
    let mut near: HashSet<Vec<i64>> = HashSet::new();
    for p in points {
        for off in &ball {
            near.insert(p.iter().zip(off).map(|(a, b)| a + b).collect());
        }
    }
    let count = near
        .iter()
        .filter(|x| {
            ball.iter().any(|off| {
                let y: Vec<i64> = x.iter().zip(off).map(|(a, b)| a + b).collect();
                !set.contains(y.as_slice())
            })
        })
        .count();
    count as f64 / points.len() as f64
}

/// Sparse exact square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseExact {
    pub size: usize,
    pub rows: Vec<BTreeMap<usize, GaussianRational>>,
}

impl SparseExact {
    fn mul(&self, other: &Self) -> Self {
        let rows = self
            .rows
            .par_iter()
            .map(|row| {
                let mut out: BTreeMap<usize, GaussianRational> = BTreeMap::new();
                for (k, a) in row {
                    for (j, b) in &other.rows[*k] {
                        let entry = out.entry(*j).or_insert_with(GaussianRational::zero);
                        *entry += a.clone() * b.clone();
                    }
                }
                out.retain(|_, v| !v.is_zero());
                out
            })
            .collect();
        SparseExact {
            size: self.size,
            rows,
        }
    }

    fn trace(&self) -> GaussianRational {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row.get(&i).cloned())
            .fold(GaussianRational::zero(), |acc, x| acc + x)
    }

    /// `tr(M^k)` for `k = 1..=max`, exactly.
    pub fn power_traces(&self, max: u32) -> Vec<GaussianRational> {
        let mut out = Vec::new();
        let mut p = self.clone();
        for k in 1..=max {
            if k > 1 {
                p = p.mul(self);
            }
            out.push(p.trace());
        }
        out
    }

    pub fn to_hermitian(&self) -> HermitianMatrix<f64> {
        let mut h = HermitianMatrix::zeros(self.size);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, c) in row {
                h.set(i, *j, c.to_complex());
            }
        }
        h
    }
}

/// `P_m Δ P_m` on `X × {1..d}` with trace normalization `1/|X|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Compressed {
    pub matrix: SparseExact,
    pub normalization: f64,
    pub points: usize,
}

/// Compression of `Δ` over `ℤⁿ` to the finite set `points`. The entry at
/// `((x,k),(y,l))` is the coefficient of `x − y` in `Δ_kl`, so left
/// multiplication by `t` becomes the shift `x ↦ x + 1`. Rows are ordered
/// block-major: `k·|X| + index(x)`.
pub fn compress(delta: &RingMatrix, points: &[Vec<i64>]) -> Result<Compressed> {
    let rank = match delta.group() {
        GroupDescriptor::FreeAbelian(n) => *n,
        other => {
            return Err(Error::WrongGroup {
                expected: "free abelian group".into(),
                found: other.to_string(),
            })
        }
    };
    if !delta.is_square() {
        return Err(Error::DimensionMismatch(
            "compression of a non-square matrix".into(),
        ));
    }
    if points.iter().any(|p| p.len() != rank) {
        return Err(Error::DimensionMismatch("points of the wrong rank".into()));
    }
    let d = delta.rows();
    let np = points.len();
    let index: HashMap<&[i64], usize> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i))
        .collect();
    let mut rows = vec![BTreeMap::new(); d * np];
    for k in 0..d {
        for l in 0..d {
            for (g, c) in delta.get(k, l).terms() {
                let GroupElement::Vector(v) = g else {
                    return Err(Error::mismatched(delta.group(), g));
                };
                for (i, x) in points.iter().enumerate() {
                    let y: Vec<i64> = x.iter().zip(v).map(|(a, b)| a - b).collect();
                    if let Some(&j) = index.get(y.as_slice()) {
                        let entry: &mut GaussianRational = rows[k * np + i]
                            .entry(l * np + j)
                            .or_insert_with(GaussianRational::zero);
                        *entry += c.clone();
                    }
                }
            }
        }
    }
    for row in &mut rows {
        row.retain(|_, v: &mut GaussianRational| !v.is_zero());
    }
    Ok(Compressed {
        matrix: SparseExact { size: d * np, rows },
        normalization: 1.0 / np as f64,
        points: np,
    })
}

/// Settings shared by the pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeOptions {
    pub spectral: SpectralOptions,
    /// Traces of `Δ^m` are compared for `m = 1..=trace_powers`.
    pub trace_powers: u32,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            spectral: SpectralOptions::default(),
            trace_powers: 3,
        }
    }
}

/// One row of a trace comparison `tr_i(Δ_i^m)` against `tr_π(Δ^m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub power: u32,
    /// `tr_π(Δ^m)`, exact.
    pub exact: String,
    /// Normalized level trace, exact.
    pub level_exact: String,
    pub level: f64,
    /// Normalized `Σ λ^m` from the computed eigenvalues.
    pub spectral: f64,
    /// `|level − tr_π(Δ^m)|`.
    pub deviation: f64,
    /// For towers: whether the level map is injective on the support that
    /// decides the trace, so that exact equality is guaranteed.
    pub certified: Option<bool>,
}

/// Per-level output of a pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub label: String,
    pub matrix_size: usize,
    pub normalization: f64,
    pub f0: f64,
    pub logdet: f64,
    pub max_eigenvalue: f64,
    pub min_eigenvalue: f64,
    pub density: SpectralDensity,
    pub traces: Vec<TraceRow>,
    #[serde(skip)]
    pub spectrum: EigenResult,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

impl LevelReport {
    fn from_spectrum(
        level: usize,
        label: String,
        spectrum: EigenResult,
        traces: Vec<TraceRow>,
        started: Instant,
    ) -> Self {
        let density = spectrum.density();
        LevelReport {
            level,
            label,
            matrix_size: spectrum.eigenvalues.len(),
            normalization: spectrum.normalization,
            f0: density.betti(),
            logdet: spectrum.log_det(),
            max_eigenvalue: spectrum.max_eigenvalue(),
            min_eigenvalue: spectrum.min_eigenvalue(),
            density,
            traces,
            spectrum,
            wall_time: started.elapsed(),
        }
    }
}

fn exact_to_f64(x: &GaussianRational) -> f64 {
    x.to_complex().re
}

/// Runs `Δ` through every level of `tower`. Levels are computed in parallel
/// and returned in order. Whenever a level map is injective on the support
/// deciding `tr(Δ^m)`, the exact level trace must equal `tr_π(Δ^m)`;
/// a mismatch is an error.
pub fn run_tower(
    delta: &RingMatrix,
    tower: &QuotientTower,
    opts: &SchemeOptions,
) -> Result<Vec<LevelReport>> {
    if delta.group() != tower.source() {
        return Err(Error::WrongGroup {
            expected: tower.source().to_string(),
            found: delta.group().to_string(),
        });
    }
    let k = delta.k_bound();
    let powers = (1..=opts.trace_powers)
        .map(|m| {
            let p = delta.pow(m)?;
            Ok((m, p.trace(), p.diagonal_support()))
        })
        .collect::<Result<Vec<_>>>()?;

    tower
        .levels()
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            let started = Instant::now();
            let level = delta.push_forward(phi)?;
            let spectrum = level_spectrum(&level, k, &opts.spectral)?;
            let mut traces = Vec::with_capacity(powers.len());
            for (m, exact, support) in &powers {
                let raw = level.trace_power_exact(*m)?;
                let certified = phi.kernel_avoids(support.iter())?;
                let level_value = exact_to_f64(&raw);
                if certified && raw != *exact {
                    return Err(Error::TraceMismatch {
                        level: i,
                        power: *m as usize,
                        expected: gaussian_to_string(exact),
                        found: gaussian_to_string(&raw),
                    });
                }
                if !certified {
                    log::warn!("level {i}: injectivity not certified for power {m}");
                }
                let exact_f = exact_to_f64(exact);
                traces.push(TraceRow {
                    power: *m,
                    exact: gaussian_to_string(exact),
                    level_exact: gaussian_to_string(&raw),
                    level: level_value,
                    spectral: spectrum.moment(*m),
                    deviation: (level_value - exact_f).abs(),
                    certified: Some(certified),
                });
            }
            Ok(LevelReport::from_spectrum(
                i,
                phi.target().to_string(),
                spectrum,
                traces,
                started,
            ))
        })
        .collect()
}

/// Runs `Δ` over `ℤⁿ` through the compressions to the sets of `exh`.
pub fn run_folner(
    delta: &RingMatrix,
    exh: &FolnerExhaustion,
    opts: &SchemeOptions,
) -> Result<Vec<LevelReport>> {
    if *delta.group() != GroupDescriptor::FreeAbelian(exh.rank()) {
        return Err(Error::WrongGroup {
            expected: GroupDescriptor::FreeAbelian(exh.rank()).to_string(),
            found: delta.group().to_string(),
        });
    }
    let k = delta.k_bound();
    let exact: Vec<GaussianRational> = (1..=opts.trace_powers)
        .map(|m| delta.trace_power_exact(m))
        .collect::<Result<_>>()?;
    (0..exh.len())
        .into_par_iter()
        .map(|i| {
            let started = Instant::now();
            let points = exh.points(i);
            let c = compress(delta, &points)?;
            let h = c.matrix.to_hermitian();
            let eigs = hermitian_eigenvalues_with(&h, opts.spectral.tol, opts.spectral.method)?;
            let spectrum = EigenResult::new(
                eigs,
                c.normalization,
                opts.spectral.eps_ker * k,
                delta.rows(),
            );
            let np = GaussianRational::new(
                num_rational::BigRational::from_integer(points.len().into()),
                Zero::zero(),
            );
            let level_traces = c.matrix.power_traces(opts.trace_powers);
            let traces = level_traces
                .iter()
                .zip(&exact)
                .enumerate()
                .map(|(j, (raw, ex))| {
                    let normalized = raw.clone() / np.clone();
                    let level = exact_to_f64(&normalized);
                    let m = j as u32 + 1;
                    TraceRow {
                        power: m,
                        exact: gaussian_to_string(ex),
                        level_exact: gaussian_to_string(&normalized),
                        level,
                        spectral: spectrum.moment(m),
                        deviation: (level - exact_to_f64(ex)).abs(),
                        certified: None,
                    }
                })
                .collect();
            let label = match &exh.sets()[i] {
                FolnerSet::Box(m) => format!("box radius {m}"),
                FolnerSet::Points(p) => format!("set of {} points", p.len()),
            };
            Ok(LevelReport::from_spectrum(
                i, label, spectrum, traces, started,
            ))
        })
        .collect()
}

/// Levels whose largest eigenvalue exceeds `k_bound + 1e−9`.
pub fn norm_bound_violations(reports: &[LevelReport], k_bound: f64) -> Vec<usize> {
    reports
        .iter()
        .filter(|r| r.max_eigenvalue > k_bound + 1e-9)
        .map(|r| r.level)
        .collect()
}

/// A polynomial `p` with `χ_[0,λ] ≤ p ≤ (1/n)χ_[0,K] + χ_[0,λ+1/n]` on
/// `[0, K]`, stored by its Chebyshev coefficients on `[0, K]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichPolynomial {
    pub lambda: f64,
    pub n: u32,
    pub k: f64,
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub certified: bool,
    pub grid_used: usize,
    /// Smallest slack of the two inequalities over the certification grid.
    pub margin: f64,
}

const SANDWICH_DEGREES: [usize; 5] = [25, 50, 100, 200, 400];
const SANDWICH_GRID: usize = 10_001;

impl SandwichPolynomial {
    /// Clenshaw evaluation; `x` is mapped from `[0, K]` to `[−1, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let t = 2.0 * x / self.k - 1.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coefficients.first().copied().unwrap_or(0.0)
    }

    fn slack(&self, x: f64) -> f64 {
        let p = self.evaluate(x);
        let n = self.n as f64;
        let lower = if x <= self.lambda { 1.0 } else { 0.0 };
        let upper = 1.0 / n + if x <= self.lambda + 1.0 / n { 1.0 } else { 0.0 };
        (p - lower).min(upper - p)
    }

    /// Minimum slack over a uniform grid of `grid` points on `[0, K]` plus
    /// the two breakpoints.
    pub fn certify(&self, grid: usize) -> f64 {
        let step = self.k / (grid - 1) as f64;
        let mut pts: Vec<f64> = (0..grid).map(|i| i as f64 * step).collect();
        pts.push(self.lambda);
        let right = self.lambda + 1.0 / self.n as f64;
        if right <= self.k {
            pts.push(right);
        }
        pts.into_iter()
            .map(|x| self.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// `tr_i p(Δ_i)` with the eigenvalues clamped to `[0, K]`.
    pub fn level_trace(&self, spectrum: &EigenResult) -> f64 {
        spectrum.trace_of(|x| self.evaluate(x.clamp(0.0, self.k)))
    }
}

/// Builds a certified sandwich polynomial. The target is a smoothed step
/// from `1 + 1/(2n)` down to `1/(2n)` centred at `λ + 1/(2n)`; it is
/// interpolated at Chebyshev nodes of increasing degree until the grid
/// certificate holds.
pub fn build_sandwich(lambda: f64, n: u32, k: f64) -> Result<SandwichPolynomial> {
    if !(0.0..k).contains(&lambda) || n == 0 || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sandwich needs 0 ≤ λ < K and n ≥ 1 (λ = {lambda}, n = {n}, K = {k})"
        )));
    }
    let nf = n as f64;
    let lo = 1.0 / (2.0 * nf);
    let hi = 1.0 + lo;
    let centre = lambda + lo;
    let width = 1.0 / (4.0 * nf);
    let target = |x: f64| {
        lo + (hi - lo) * 0.5 * libm::erfc((x - centre) / (std::f64::consts::SQRT_2 * width))
    };

    for &degree in &SANDWICH_DEGREES {
        let nodes = degree + 1;
        let values: Vec<f64> = (0..nodes)
            .map(|j| {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
                target(0.5 * k * (theta.cos() + 1.0))
            })
            .collect();
        let coefficients: Vec<f64> = (0..nodes)
            .map(|i| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v * (std::f64::consts::PI * i as f64 * (j as f64 + 0.5) / nodes as f64)
                            .cos()
                    })
                    .sum();
                let c = 2.0 * s / nodes as f64;
                if i == 0 {
                    c / 2.0
                } else {
                    c
                }
            })
            .collect();
        let mut p = SandwichPolynomial {
            lambda,
            n,
            k,
            degree,
            coefficients,
            certified: false,
            grid_used: SANDWICH_GRID,
            margin: 0.0,
        };
        p.margin = p.certify(SANDWICH_GRID);
        if p.margin >= 0.0 {
            p.certified = true;
            return Ok(p);
        }
    }
    Err(Error::CertificationFailed {
        max_degree: *SANDWICH_DEGREES.last().unwrap_or(&0),
    })
}

/// `F_i(λ) ≤ tr_i p(Δ_i) ≤ F_i(λ + 1/n) + d/n` at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub level: usize,
    pub lower: f64,
    pub trace: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn sandwich_check(
    reports: &[LevelReport],
    p: &SandwichPolynomial,
    tol: f64,
) -> Vec<SandwichRow> {
    reports
        .iter()
        .map(|r| {
            let lower = r.density.evaluate(p.lambda);
            let trace = p.level_trace(&r.spectrum);
            let upper =
                r.density.evaluate(p.lambda + 1.0 / p.n as f64) + r.spectrum.d as f64 / p.n as f64;
            SandwichRow {
                level: r.level,
                lower,
                trace,
                upper,
                pass: lower <= trace + tol && trace <= upper + tol,
            }
        })
        .collect()
}

/// Number of trailing levels used as a proxy for `lim sup`/`lim inf`.
pub fn tail_len(levels: usize) -> usize {
    levels.div_ceil(3)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqueezeRow {
    pub lambda: f64,
    /// `max` over the tail of `F_i(λ)`.
    pub upper: f64,
    pub oracle: f64,
    /// `min` over the tail of `F_i(λ + ε)`.
    pub lower_plus: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SqueezeVerdict {
    pub tail: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub rows: Vec<SqueezeRow>,
    pub pass: bool,
}

/// `F̄(λ) ≤ F(λ) + tol` and `F(λ) ≤ F̲(λ + ε) + tol` on `lambda_grid`.
pub fn squeeze_check(
    reports: &[LevelReport],
    oracle: &SpectralDensity,
    lambda_grid: &[f64],
    tol: f64,
) -> Result<SqueezeVerdict> {
    if reports.len() < 3 {
        return Err(Error::InsufficientLevels {
            needed: 3,
            got: reports.len(),
        });
    }
    let tail = &reports[reports.len() - tail_len(reports.len())..];
    let mut sorted = lambda_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let epsilon = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let epsilon = if epsilon.is_finite() { epsilon } else { 0.0 };
    let rows: Vec<SqueezeRow> = lambda_grid
        .iter()
        .map(|&lambda| {
            let upper = tail
                .iter()
                .map(|r| r.density.evaluate(lambda))
                .fold(f64::NEG_INFINITY, f64::max);
            let lower_plus = tail
                .iter()
                .map(|r| r.density.evaluate(lambda + epsilon))
                .fold(f64::INFINITY, f64::min);
            let f = oracle.evaluate(lambda);
            SqueezeRow {
                lambda,
                upper,
                oracle: f,
                lower_plus,
                pass: upper <= f + tol && f <= lower_plus + tol,
            }
        })
        .collect();
    Ok(SqueezeVerdict {
        tail: tail.len(),
        epsilon,
        tol,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SintaprRow {
    pub level: usize,
    pub logdet: f64,
    pub f0: f64,
    /// `∫_{0+}^K (F_i(λ) − F_i(0))/λ dλ`.
    pub integral: f64,
    /// `ln K · (d − F_i(0))`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SintaprVerdict {
    pub rows: Vec<SintaprRow>,
    /// `lnDet` at the deepest level, the eventual supremum of the sequence.
    pub limsup_estimate: f64,
    /// Largest `lnDet` over the tail.
    pub tail_max: f64,
    pub oracle: Option<f64>,
    pub limsup_pass: Option<bool>,
    pub pass: bool,
}

/// Checks the integral bound at every level and `lim sup lnDet_i ≤ lnDet`
/// against an oracle when one is given. Every level must satisfy
/// `lnDet_i ≥ −tol`.
pub fn sintapr_check(
    reports: &[LevelReport],
    d: usize,
    k: f64,
    oracle: Option<f64>,
    tol: f64,
) -> Result<SintaprVerdict> {
    if reports.is_empty() {
        return Err(Error::InsufficientLevels { needed: 1, got: 0 });
    }
    if let Some(r) = reports.iter().find(|r| r.logdet < -tol) {
        return Err(Error::HypothesisViolated {
            level: r.level,
            logdet: r.logdet,
        });
    }
    let rows: Vec<SintaprRow> = reports
        .iter()
        .map(|r| {
            let integral = r.density.log_integral(k);
            let bound = k.ln() * (d as f64 - r.f0);
            SintaprRow {
                level: r.level,
                logdet: r.logdet,
                f0: r.f0,
                integral,
                bound,
                pass: integral <= bound + tol,
            }
        })
        .collect();
    let tail = &reports[reports.len() - tail_len(reports.len())..];
    let tail_max = tail
        .iter()
        .map(|r| r.logdet)
        .fold(f64::NEG_INFINITY, f64::max);
    let limsup_estimate = reports.last().map_or(0.0, |r| r.logdet);
    let limsup_pass = oracle.map(|o| limsup_estimate <= o + tol);
    Ok(SintaprVerdict {
        pass: rows.iter().all(|r| r.pass) && limsup_pass.unwrap_or(true),
        rows,
        limsup_estimate,
        tail_max,
        oracle,
        limsup_pass,
    })
}

/// A quotient tower or a Følner exhaustion.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Tower(QuotientTower),
    Folner(FolnerExhaustion),
}

impl Scheme {
    pub fn run(&self, delta: &RingMatrix, opts: &SchemeOptions) -> Result<Vec<LevelReport>> {
        match self {
            Scheme::Tower(t) => run_tower(delta, t, opts),
            Scheme::Folner(f) => run_folner(delta, f, opts),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WhiteheadVerdict {
    /// Both matrices have entries in `ℤπ`.
    pub integral: bool,
    pub level_logdets: Vec<f64>,
    pub oracle: Option<f64>,
    pub tol: f64,
    pub oracle_tol: f64,
    pub pass: bool,
}

/// For mutually inverse `A`, `B` checks that `lnDet(A*A)` vanishes at every
/// level and for the torus oracle when the group is free abelian.
pub fn whitehead_check(
    a: &RingMatrix,
    b: &RingMatrix,
    scheme: &Scheme,
    opts: &SchemeOptions,
    oracle_grid: Option<usize>,
    tol: f64,
    oracle_tol: f64,
) -> Result<(WhiteheadVerdict, Vec<LevelReport>)> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::NotInverse);
    }
    let id = RingMatrix::identity(a.group().clone(), a.rows());
    if a.mul(b)? != id || b.mul(a)? != id {
        return Err(Error::NotInverse);
    }
    let integral = a.is_integral() && b.is_integral();
    let delta = a.positive_square()?;
    let reports = scheme.run(&delta, opts)?;
    let oracle = match (oracle_grid, delta.group()) {
        (Some(grid), GroupDescriptor::FreeAbelian(_)) => {
            Some(torus_logdet(&delta, grid, &opts.spectral)?.value)
        }
        _ => None,
    };
    let level_logdets: Vec<f64> = reports.iter().map(|r| r.logdet).collect();
    let pass = integral
        && level_logdets.iter().all(|x| x.abs() <= tol)
        && oracle.is_none_or(|o| o.abs() <= oracle_tol);
    Ok((
        WhiteheadVerdict {
            integral,
            level_logdets,
            oracle,
            tol,
            oracle_tol,
            pass,
        },
        reports,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexRunVerdict {
    pub level_f0: Vec<f64>,
    pub limit_estimate: f64,
    pub oracle_f0: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Tower run for a matrix over `ℤⁿ` with arbitrary complex coefficients,
/// compared against the torus density at `F(0)`.
pub fn complex_tower_run(
    delta: &RingMatrix,
    tower: &QuotientTower,
    opts: &SchemeOptions,
    oracle_grid: usize,
    tol: f64,
) -> Result<(ComplexRunVerdict, Vec<LevelReport>)> {
    if !matches!(delta.group(), GroupDescriptor::FreeAbelian(_)) {
        return Err(Error::WrongGroup {
            expected: "free abelian group".into(),
            found: delta.group().to_string(),
        });
    }
    let reports = run_tower(delta, tower, opts)?;
    let oracle_f0 = torus_density(delta, oracle_grid, &opts.spectral)?.betti();
    let level_f0: Vec<f64> = reports.iter().map(|r| r.f0).collect();
    let limit_estimate = level_f0.last().copied().unwrap_or(f64::NAN);
    Ok((
        ComplexRunVerdict {
            pass: (limit_estimate - oracle_f0).abs() <= tol,
            level_f0,
            limit_estimate,
            oracle_f0,
            tol,
        },
        reports,
    ))
}

/// `1 − αt` style helper: `Σ c_k t^{e_k}` over `ℤ`.
pub fn laurent(terms: &[(i64, GaussianRational)]) -> Result<crate::RingElement> {
    crate::RingElement::from_terms(
        GroupDescriptor::FreeAbelian(1),
        terms
            .iter()
            .map(|(e, c)| (GroupElement::Vector(vec![*e]), c.clone())),
    )
}

/// The integer `k` as a Gaussian rational.
pub fn int(k: i64) -> GaussianRational {
    GaussianRational::new(
        num_rational::BigRational::from_integer(k.into()),
        Zero::zero(),
    )
}

/// `p/q + i·r/s`.
pub fn gaussian(re: (i64, i64), im: (i64, i64)) -> GaussianRational {
    use num_rational::BigRational;
    GaussianRational::new(
        BigRational::new(re.0.into(), re.1.into()),
        BigRational::new(im.0.into(), im.1.into()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RingElement;

    fn lap() -> RingMatrix {
        RingMatrix::scalar(laurent(&[(0, int(2)), (1, int(-1)), (-1, int(-1))]).unwrap())
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn box_defects() {
        assert!(close(box_defect(1, 10, 1), 4.0 / 21.0, 1e-15));
        assert_eq!(box_defect(2, 5, 0), 0.0);
        let exh = build_boxes_folner(1, 64).unwrap();
        let d: Vec<f64> = (0..exh.len()).map(|i| exh.defect(i, 1)).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        for (n, m, k) in [(1, 10, 1), (1, 3, 2), (2, 4, 1), (2, 1, 3), (3, 2, 1)] {
            let brute = defect(&box_points(n, m), k);
            assert!(close(brute, box_defect(n, m, k), 1e-12), "{n} {m} {k}");
        }
        assert_eq!(defect(&box_points(2, 3), 0), 0.0);
    }

    #[test]
    fn explicit_sets_must_nest() {
        assert!(
            FolnerExhaustion::from_sets(1, vec![vec![vec![0]], vec![vec![0], vec![1]]]).is_ok()
        );
        assert!(FolnerExhaustion::from_sets(1, vec![vec![vec![0]], vec![vec![1]]]).is_err());
    }

    #[test]
    fn compression_examples() {
        let c = compress(&lap(), &box_points(1, 1)).unwrap();
        let h = c.matrix.to_hermitian();
        let expected = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j).re, expected[i][j]);
            }
        }
        let id = RingMatrix::identity(GroupDescriptor::FreeAbelian(2), 2);
        let c = compress(&id, &box_points(2, 1)).unwrap();
        assert_eq!(c.matrix.to_hermitian(), HermitianMatrix::identity(18));
        let tr = exact_to_f64(&c.matrix.power_traces(1)[0]) * c.normalization;
        assert_eq!(tr, 2.0);

        let shift = RingMatrix::scalar(laurent(&[(1, int(1))]).unwrap());
        let h = compress(&shift, &box_points(1, 1))
            .unwrap()
            .matrix
            .to_hermitian();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j).re, if i == j + 1 { 1.0 } else { 0.0 });
            }
        }
        assert!(compress(
            &RingMatrix::identity(GroupDescriptor::Cyclic(3), 1),
            &[vec![0]]
        )
        .is_err());
    }

    #[test]
    fn tower_examples() {
        let tower = QuotientTower::cyclic(1, &[8, 16, 32]).unwrap();
        let reports = run_tower(&lap(), &tower, &SchemeOptions::default()).unwrap();
        for (r, n) in reports.iter().zip([8.0f64, 16.0, 32.0]) {
            assert!(close(r.f0, 1.0 / n, 1e-12));
            assert!(close(r.logdet, 2.0 * n.ln() / n, 1e-9));
            assert!(r
                .traces
                .iter()
                .all(|t| t.certified == Some(true) && t.deviation == 0.0));
            assert!(r.traces.iter().all(|t| close(t.spectral, t.level, 1e-9)));
        }
        let id = RingMatrix::identity(GroupDescriptor::FreeAbelian(1), 2);
        for r in run_tower(&id, &tower, &SchemeOptions::default()).unwrap() {
            assert_eq!((r.f0, r.logdet), (0.0, 0.0));
        }
    }

    #[test]
    fn uncertified_levels_are_not_errors() {
        // ℤ/2 collapses t and t⁻¹, so tr(Δ_2²) = 8 ≠ 6.
        let tower = QuotientTower::cyclic(1, &[2, 3]).unwrap();
        let reports = run_tower(&lap(), &tower, &SchemeOptions::default()).unwrap();
        let row = &reports[0].traces[1];
        assert_eq!(row.certified, Some(false));
        assert_eq!(row.level_exact, "8");
    }

    #[test]
    fn folner_examples() {
        let exh = FolnerExhaustion::boxes(1, &[1, 4, 16]).unwrap();
        let reports = run_folner(&lap(), &exh, &SchemeOptions::default()).unwrap();
        for (r, m) in reports.iter().zip([1.0, 4.0, 16.0]) {
            assert_eq!(r.traces[0].level_exact, "2");
            assert!(close(r.traces[1].deviation, 2.0 / (2.0 * m + 1.0), 1e-12));
            assert_eq!(r.f0, 0.0);
        }
        assert_eq!(reports[0].traces[1].level_exact, "16/3");
        let id = RingMatrix::identity(GroupDescriptor::FreeAbelian(1), 3);
        for r in run_folner(&id, &exh, &SchemeOptions::default()).unwrap() {
            assert_eq!(r.traces[0].level, 3.0);
        }
    }

    #[test]
    fn sandwich_examples() {
        let p = build_sandwich(0.0, 1, 1.0).unwrap();
        assert!(p.certified && p.degree == 25);
        let p = build_sandwich(1.0, 4, 4.0).unwrap();
        assert!(p.certified);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!(p.evaluate(x) >= 1.0);
            let y = 1.25 + 2.75 * x;
            assert!(p.evaluate(y) <= 0.25);
        }
        assert!(build_sandwich(4.0, 2, 4.0).is_err());
        assert!(build_sandwich(5.0, 2, 4.0).is_err());
    }

    #[test]
    fn sandwich_bounds_hold_on_levels() {
        let tower = QuotientTower::cyclic(1, &[8, 12, 30]).unwrap();
        let reports = run_tower(&lap(), &tower, &SchemeOptions::default()).unwrap();
        for lambda in [0.0, 1.0, 2.0] {
            for n in [2, 4, 8] {
                let p = build_sandwich(lambda, n, 4.0).unwrap();
                assert!(sandwich_check(&reports, &p, 1e-8).iter().all(|r| r.pass));
            }
        }
    }

    #[test]
    fn squeeze_examples() {
        let opts = SchemeOptions::default();
        let tower = QuotientTower::cyclic(1, &[8, 16, 32, 64]).unwrap();
        let reports = run_tower(&lap(), &tower, &opts).unwrap();
        let oracle = torus_density(&lap(), 4096, &opts.spectral).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let v = squeeze_check(&reports, &oracle, &grid, 0.1).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.tail, 2);
        assert!(v
            .rows
            .iter()
            .filter(|r| r.lambda >= 4.0)
            .all(|r| r.upper == 1.0));
        assert!(matches!(
            squeeze_check(&reports[..2], &oracle, &grid, 0.1),
            Err(Error::InsufficientLevels { .. })
        ));

        // Stationary tower over a finite group against its own density.
        let g = GroupDescriptor::Cyclic(6);
        let delta = lap()
            .push_forward(&Homomorphism::reduction(1, 6).unwrap())
            .unwrap();
        let reports = run_tower(&delta, &QuotientTower::stationary(g, 3).unwrap(), &opts).unwrap();
        let v = squeeze_check(&reports, &reports[0].density, &[0.0, 1.0, 3.0, 4.0], 0.0).unwrap();
        assert!(v.pass);
    }

    #[test]
    fn sintapr_examples() {
        let opts = SchemeOptions::default();
        let tower = QuotientTower::cyclic(1, &[8, 16, 32]).unwrap();
        let reports = run_tower(&lap(), &tower, &opts).unwrap();
        let v = sintapr_check(&reports, 1, 4.0, Some(0.0), 0.25).unwrap();
        assert!(v.pass);
        for (row, n) in v.rows.iter().zip([8.0f64, 16.0, 32.0]) {
            assert!(close(row.bound, 4f64.ln() * (1.0 - 1.0 / n), 1e-12));
            assert!(close(row.bound - row.integral, row.logdet, 1e-9));
        }

        let id = RingMatrix::identity(GroupDescriptor::FreeAbelian(1), 2);
        let v = sintapr_check(&run_tower(&id, &tower, &opts).unwrap(), 2, 4.0, None, 0.02).unwrap();
        assert!(v.pass);
        assert!(close(v.rows[0].integral, 2.0 * 4f64.ln(), 1e-12));

        let zero = RingMatrix::zeros(GroupDescriptor::FreeAbelian(1), 1, 1);
        let v = sintapr_check(
            &run_tower(&zero, &tower, &opts).unwrap(),
            1,
            4.0,
            None,
            0.02,
        )
        .unwrap();
        assert_eq!(v.rows[0].integral, 0.0);

        // A non-integral matrix can violate the hypothesis.
        let small = RingMatrix::scalar(RingElement::scalar(
            GroupDescriptor::FreeAbelian(1),
            gaussian((1, 4), (0, 1)),
        ));
        let r = run_tower(&small, &tower, &opts).unwrap();
        assert!(matches!(
            sintapr_check(&r, 1, 4.0, None, 0.02),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn whitehead_examples() {
        let z = GroupDescriptor::FreeAbelian(1);
        let opts = SchemeOptions::default();
        let tower = Scheme::Tower(QuotientTower::cyclic(1, &[8, 16]).unwrap());
        let a = RingMatrix::scalar(laurent(&[(1, int(1))]).unwrap());
        let b = RingMatrix::scalar(laurent(&[(-1, int(1))]).unwrap());
        let (v, _) = whitehead_check(&a, &b, &tower, &opts, Some(64), 0.02, 0.01).unwrap();
        assert!(v.pass);

        let one = RingElement::one(z.clone());
        let e = RingMatrix::from_rows(
            z.clone(),
            vec![
                vec![one.clone(), laurent(&[(0, int(1)), (1, int(-1))]).unwrap()],
                vec![RingElement::zero(z.clone()), one.clone()],
            ],
        )
        .unwrap();
        let e_inv = RingMatrix::from_rows(
            z.clone(),
            vec![
                vec![one.clone(), laurent(&[(0, int(-1)), (1, int(1))]).unwrap()],
                vec![RingElement::zero(z.clone()), one.clone()],
            ],
        )
        .unwrap();
        let (v, _) = whitehead_check(&e, &e_inv, &tower, &opts, Some(256), 0.02, 0.01).unwrap();
        assert!(v.pass, "{v:?}");

        let two = RingMatrix::scalar(RingElement::scalar(z.clone(), int(2)));
        let half = RingMatrix::scalar(RingElement::scalar(z.clone(), gaussian((1, 2), (0, 1))));
        let (v, _) = whitehead_check(&two, &half, &tower, &opts, Some(16), 0.02, 0.01).unwrap();
        assert!(!v.integral && !v.pass);
        assert!(close(v.level_logdets[0], 2.0 * 2f64.ln(), 1e-12));

        assert!(matches!(
            whitehead_check(&two, &two, &tower, &opts, None, 0.02, 0.01),
            Err(Error::NotInverse)
        ));
    }

    #[test]
    fn complex_runs() {
        let opts = SchemeOptions::default();
        let tower = QuotientTower::cyclic(1, &[8, 16, 32]).unwrap();
        let alpha = gaussian((1, 2), (1, 2));
        let a = RingMatrix::scalar(laurent(&[(0, int(1)), (1, -alpha)]).unwrap());
        let delta = a.positive_square().unwrap();
        let (v, _) = complex_tower_run(&delta, &tower, &opts, 1024, 0.02).unwrap();
        assert!(v.pass && v.level_f0.iter().all(|&f| f == 0.0) && v.oracle_f0 == 0.0);

        let (v, _) = complex_tower_run(&lap(), &tower, &opts, 1024, 0.05).unwrap();
        assert!(v.pass);
        assert!(close(v.level_f0[2], 1.0 / 32.0, 1e-12));

        let zero = RingMatrix::zeros(GroupDescriptor::FreeAbelian(1), 2, 2);
        let (v, _) = complex_tower_run(&zero, &tower, &opts, 16, 0.02).unwrap();
        assert!(v.level_f0.iter().all(|&f| f == 2.0));
    }

    #[test]
    fn norm_bounds() {
        let tower = QuotientTower::cyclic(1, &[5, 8]).unwrap();
        let reports = run_tower(&lap(), &tower, &SchemeOptions::default()).unwrap();
        assert!(norm_bound_violations(&reports, 4.0).is_empty());
        assert_eq!(norm_bound_violations(&reports, 3.0).len(), 2);
    }
}
