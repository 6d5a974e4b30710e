//! Finite-level spectra: Hermitian eigensolvers, regular representations,
//! spectral density step functions, Betti numbers and log-determinants.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::Homomorphism;
use crate::scalar::{Coefficient, Real};
use crate::RingMatrix;

const MAX_SWEEPS: usize = 100;
/// Up to this size the cyclic Jacobi method is used by [`EigenMethod::Auto`].
pub const JACOBI_LIMIT: usize = 48;

/// Dense Hermitian matrix, row-major; `im` is empty for real symmetric input.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T> {
    n: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> HermitianMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            n,
            re: vec![T::zero(); n * n],
            im: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.re[i * n + i] = T::one();
        }
        m
    }

    pub fn real(n: usize, re: Vec<T>) -> Result<Self> {
        if re.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for an {n}x{n} matrix",
                re.len()
            )));
        }
        Ok(HermitianMatrix {
            n,
            re,
            im: Vec::new(),
        })
    }

    pub fn complex(n: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != n * n || im.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} real and imaginary entries",
                n * n
            )));
        }
        let mut m = HermitianMatrix { n, re, im };
        if m.im.iter().all(|x| x.is_zero()) {
            m.im.clear();
        }
        Ok(m)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_real(&self) -> bool {
        self.im.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        let k = i * self.n + j;
        let im = if self.im.is_empty() {
            T::zero()
        } else {
            self.im[k]
        };
        Complex::new(self.re[k], im)
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        let k = i * self.n + j;
        self.re[k] = z.re;
        if !z.im.is_zero() && self.im.is_empty() {
            self.im = vec![T::zero(); self.n * self.n];
        }
        if !self.im.is_empty() {
            self.im[k] = z.im;
        }
    }

    pub fn add_to(&mut self, i: usize, j: usize, z: Complex<T>) {
        let cur = self.get(i, j);
        self.set(i, j, cur + z);
    }

    pub fn frobenius_norm(&self) -> T {
        let re: T = self.re.iter().map(|x| *x * *x).sum();
        let im: T = self.im.iter().map(|x| *x * *x).sum();
        (re + im).sqrt()
    }

    /// `max |H_ij − conj(H_ji)|`.
    pub fn hermitian_deviation(&self) -> T {
        let mut dev = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    /// Matrix product, used to build `H²` and unitary conjugates.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                self.n, other.n
            )));
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    /// The `2n × 2n` real symmetric matrix `[[A, −B], [B, A]]` for `H = A + iB`.
    /// Each eigenvalue of `H` appears twice in its spectrum.
    pub fn real_embedding(&self) -> Vec<T> {
        let n = self.n;
        let m = 2 * n;
        let mut out = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                out[i * m + j] = z.re;
                out[(i + n) * m + j + n] = z.re;
                out[i * m + j + n] = -z.im;
                out[(i + n) * m + j] = z.im;
            }
        }
        out
    }
}

/// Choice of dense eigensolver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Jacobi up to [`JACOBI_LIMIT`], tridiagonal bisection above.
    #[default]
    Auto,
    Jacobi,
    Tridiagonal,
}

/// Eigenvalues of a Hermitian matrix in ascending order, accurate to about
/// `tol · ‖H‖`.
pub fn hermitian_eigenvalues<T: Real>(h: &HermitianMatrix<T>, tol: T) -> Result<Vec<T>> {
    hermitian_eigenvalues_with(h, tol, EigenMethod::Auto)
}

pub fn hermitian_eigenvalues_with<T: Real>(
    h: &HermitianMatrix<T>,
    tol: T,
    method: EigenMethod,
) -> Result<Vec<T>> {
    let norm = h.frobenius_norm();
    let dev = h.hermitian_deviation();
    if dev > tol * norm.max(T::one()) {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
        });
    }
    if h.is_real() {
        return symmetric_eigenvalues(h.re.clone(), h.n, tol, method);
    }
    let doubled = symmetric_eigenvalues(h.real_embedding(), 2 * h.n, tol, method)?;
    let two = T::one() + T::one();
    Ok(doubled.chunks(2).map(|p| (p[0] + p[1]) / two).collect())
}

/// Eigenvalues of a real symmetric `n × n` matrix (row-major), ascending.
pub fn symmetric_eigenvalues<T: Real>(
    mut a: Vec<T>,
    n: usize,
    tol: T,
    method: EigenMethod,
) -> Result<Vec<T>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for {n}x{n}",
            a.len()
        )));
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![a[0]]),
        _ => {}
    }
    let use_jacobi = match method {
        EigenMethod::Jacobi => true,
        EigenMethod::Tridiagonal => false,
        EigenMethod::Auto => n <= JACOBI_LIMIT && !is_tridiagonal(&a, n),
    };
    if use_jacobi {
        jacobi(&mut a, n, tol)
    } else {
        let (d, e) = if is_tridiagonal(&a, n) {
            let d = (0..n).map(|i| a[i * n + i]).collect();
            let e = (0..n - 1).map(|i| a[(i + 1) * n + i]).collect();
            (d, e)
        } else {
            householder_tridiagonal(&mut a, n)
        };
        Ok(tridiagonal_eigenvalues(&d, &e))
    }
}

fn is_tridiagonal<T: Real>(a: &[T], n: usize) -> bool {
    (0..n).all(|i| (0..n).all(|j| i.abs_diff(j) <= 1 || a[i * n + j].is_zero()))
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `tol · ‖A‖_F`.
fn jacobi<T: Real>(a: &mut [T], n: usize, tol: T) -> Result<Vec<T>> {
    let scale = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let tol = tol.max(T::epsilon() * T::from_f64_lossy(8.0));
    let one = T::one();
    let two = one + one;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off.sqrt() <= tol * scale {
            let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
            return Ok(eig);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.is_zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (two * apq);
                let t = if theta.abs() > T::from_f64_lossy(1e150) {
                    one / (two * theta)
                } else {
                    let sign = if theta >= T::zero() { one } else { -one };
                    sign / (theta.abs() + (theta * theta + one).sqrt())
                };
                let c = one / (t * t + one).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
            }
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
/// Returns the diagonal and the subdiagonal.
fn householder_tridiagonal<T: Real>(a: &mut [T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut e = vec![T::zero(); n - 1];
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let two = T::one() + T::one();
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let alpha_sq: T = (lo..n).map(|i| a[i * n + k] * a[i * n + k]).sum();
        let mut alpha = alpha_sq.sqrt();
        if alpha.is_zero() {
            e[k] = T::zero();
            continue;
        }
        if a[lo * n + k] > T::zero() {
            alpha = -alpha;
        }
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        let vtv: T = (lo..n).map(|i| v[i] * v[i]).sum();
        e[k] = alpha;
        if vtv.is_zero() {
            continue;
        }
        let beta = two / vtv;
        for i in lo..n {
            let row = &a[i * n + lo..i * n + n];
            let s: T = row.iter().zip(&v[lo..n]).map(|(x, y)| *x * *y).sum();
            p[i] = beta * s;
        }
        let vtp: T = (lo..n).map(|i| v[i] * p[i]).sum();
        let kk = beta * vtp / two;
        for i in lo..n {
            p[i] -= kk * v[i];
        }
        for i in lo..n {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[i * n + lo..i * n + n];
            for (j, x) in row.iter_mut().enumerate() {
                *x -= vi * p[lo + j] + wi * v[lo + j];
            }
        }
        for i in lo..n {
            a[i * n + k] = T::zero();
            a[k * n + i] = T::zero();
        }
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    let d = (0..n).map(|i| a[i * n + i]).collect();
    (d, e)
}

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e`, by Sturm-sequence bisection.
pub fn tridiagonal_eigenvalues<T: Real>(d: &[T], e: &[T]) -> Vec<T> {
    let n = d.len();
    if e.iter().all(|x| x.is_zero()) {
        let mut out = d.to_vec();
        out.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        return out;
    }
    let e2: Vec<T> = e.iter().map(|x| *x * *x).collect();
    let (mut gl, mut gu) = (d[0], d[0]);
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { T::zero() }
            + if i + 1 < n { e[i].abs() } else { T::zero() };
        gl = gl.min(d[i] - r);
        gu = gu.max(d[i] + r);
    }
    let span = gu.abs().max(gl.abs()).max(T::min_positive_value());
    let eps = T::epsilon();
    let pivmin =
        T::min_positive_value().max(e2.iter().fold(T::zero(), |m, x| m.max(*x)) * eps * eps);
    let abstol = eps * span * T::from_f64_lossy(2.0);
    gl -= abstol;
    gu += abstol;

    let count_below = |x: T| -> usize {
        let mut q = d[0] - x;
        if q.abs() <= pivmin {
            q = -pivmin;
        }
        let mut cnt = usize::from(q < T::zero());
        for i in 1..n {
            q = d[i] - x - e2[i - 1] / q;
            if q.abs() <= pivmin {
                q = -pivmin;
            }
            if q < T::zero() {
                cnt += 1;
            }
        }
        cnt
    };

    let two = T::one() + T::one();
    let mut out = Vec::with_capacity(n);
    let mut floor = gl;
    for k in 0..n {
        let (mut lo, mut hi) = (floor, gu);
        for _ in 0..200 {
            if hi - lo <= abstol.max(eps * (lo.abs().max(hi.abs()))) {
                break;
            }
            let mid = (lo + hi) / two;
            if count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = (lo + hi) / two;
        out.push(x);
        floor = lo;
    }
    out
}

/// The left regular representation of a matrix over a finite group:
/// block `(k, l)` is left multiplication by `Δ_kl` on `ℂG` in the basis
/// given by [`GroupDescriptor::enumerate`].
pub fn regular_representation<T: Real>(delta: &RingMatrix) -> Result<HermitianMatrix<T>> {
    if !delta.is_square() {
        return Err(Error::DimensionMismatch(
            "regular representation of a non-square matrix".into(),
        ));
    }
    let group = delta.group();
    let elems = group.enumerate()?;
    let index = group.element_index()?;
    let (d, order) = (delta.rows(), elems.len());
    let mut h = HermitianMatrix::zeros(d * order);
    for k in 0..d {
        for l in 0..d {
            for (g, c) in delta.get(k, l).terms() {
                let z = c.to_complex();
                let z = Complex::new(T::from_f64_lossy(z.re), T::from_f64_lossy(z.im));
                for (col, x) in elems.iter().enumerate() {
                    let row = index[&group.multiply(g, x)?];
                    h.add_to(k * order + row, l * order + col, z);
                }
            }
        }
    }
    Ok(h)
}

/// How a finite level is diagonalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumBackend {
    /// Characters for finite abelian groups given as cyclic products, dense otherwise.
    #[default]
    Auto,
    Dense,
    Characters,
}

/// Numerical settings for a finite-level spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralOptions {
    /// Kernel threshold relative to the norm bound `K(Δ)`.
    pub eps_ker: f64,
    pub tol: f64,
    pub method: EigenMethod,
    pub backend: SpectrumBackend,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            eps_ker: 1e-9,
            tol: 1e-12,
            method: EigenMethod::Auto,
            backend: SpectrumBackend::Auto,
        }
    }
}

/// The spectrum of one finite level together with its trace normalization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub normalization: f64,
    pub kernel_threshold: f64,
    /// Matrix size `d` over the group ring.
    pub d: usize,
}

impl EigenResult {
    pub fn new(
        mut eigenvalues: Vec<f64>,
        normalization: f64,
        kernel_threshold: f64,
        d: usize,
    ) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        EigenResult {
            eigenvalues,
            normalization,
            kernel_threshold,
            d,
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn density(&self) -> SpectralDensity {
        density_from_eigs(self)
    }

    pub fn betti(&self) -> f64 {
        let kernel = self
            .eigenvalues
            .iter()
            .filter(|&&x| x <= self.kernel_threshold)
            .count();
        kernel as f64 * self.normalization
    }

    pub fn log_det(&self) -> f64 {
        log_det(self)
    }

    /// `normalization · Σ λ^m`, the level trace of `Δ_i^m`.
    pub fn moment(&self, m: u32) -> f64 {
        let exp = i32::try_from(m).unwrap_or(i32::MAX);
        self.normalization * self.eigenvalues.iter().map(|x| x.powi(exp)).sum::<f64>()
    }

    /// `normalization · Σ f(λ)`.
    pub fn trace_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.normalization * self.eigenvalues.iter().map(|&x| f(x)).sum::<f64>()
    }
}

/// Spectrum of the regular representation of `delta` (a matrix over a finite
/// group), normalized by `1/|G|`. The kernel threshold is
/// `eps_ker · k_bound`.
pub fn level_spectrum(
    delta: &RingMatrix,
    k_bound: f64,
    opts: &SpectralOptions,
) -> Result<EigenResult> {
    let group = delta.group();
    let order = group
        .order()
        .ok_or_else(|| Error::InfiniteGroup(group.to_string()))?;
    let threshold = opts.eps_ker * k_bound;
    let characters = match opts.backend {
        SpectrumBackend::Dense => false,
        SpectrumBackend::Characters => {
            if group.cyclic_factors().is_none() {
                return Err(Error::InvalidArgument(format!(
                    "{group} is not a product of cyclic groups"
                )));
            }
            true
        }
        SpectrumBackend::Auto => group.cyclic_factors().is_some(),
    };
    let eigs = if characters {
        character_eigenvalues(delta, opts)?
    } else {
        let h = regular_representation::<f64>(delta)?;
        hermitian_eigenvalues_with(&h, opts.tol, opts.method)?
    };
    Ok(EigenResult::new(
        eigs,
        1.0 / order as f64,
        threshold,
        delta.rows(),
    ))
}

/// Block-diagonalizes the regular representation of a matrix over
/// `ℤ/n₁ × … × ℤ/n_r` by characters: for each character `χ` the `d × d`
/// symbol `Σ_g Δ_kl(g) conj(χ(g))` is diagonalized.
fn character_eigenvalues(delta: &RingMatrix, opts: &SpectralOptions) -> Result<Vec<f64>> {
    let group = delta.group();
    let factors = group.cyclic_factors().ok_or_else(|| {
        Error::InvalidArgument(format!("{group} is not a product of cyclic groups"))
    })?;
    let d = delta.rows();
    let order: u64 = factors.iter().product();

    // Per entry: list of (coordinates, coefficient).
    let mut entries = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            let mut terms = Vec::new();
            for (g, c) in delta.get(k, l).terms() {
                let coords = group
                    .cyclic_coordinates(g)
                    .ok_or_else(|| Error::mismatched(group, g))?;
                terms.push((coords, c.to_complex()));
            }
            entries.push(terms);
        }
    }

    let chi_at = |idx: u64| -> Vec<u64> {
        let mut rem = idx;
        let mut out = vec![0; factors.len()];
        for (j, &n) in factors.iter().enumerate().rev() {
            out[j] = rem % n;
            rem /= n;
        }
        out
    };

    let per_char = (0..order)
        .into_par_iter()
        .map(|idx| {
            let chi = chi_at(idx);
            let symbol = HermitianMatrix::from_fn(d, |k, l| {
                let mut acc = Complex::new(0.0, 0.0);
                for (coords, c) in &entries[k * d + l] {
                    let mut phase = 0.0;
                    for ((&x, &kj), &n) in coords.iter().zip(&chi).zip(&factors) {
                        let r = ((x as u128 * kj as u128) % n as u128) as f64;
                        phase += r / n as f64;
                    }
                    let phase = phase.fract();
                    let angle = -2.0 * std::f64::consts::PI * phase;
                    acc += c * Complex::new(angle.cos(), angle.sin());
                }
                acc
            });
            if d == 1 {
                Ok(vec![symbol.get(0, 0).re])
            } else {
                hermitian_eigenvalues_with(&symbol, opts.tol, opts.method)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_char.into_iter().flatten().collect())
}

/// One jump of a spectral density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub lambda: f64,
    pub mass: f64,
}

/// Right-continuous nondecreasing step function `λ ↦ F(λ)` of total mass `d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralDensity {
    pub jumps: Vec<Jump>,
    pub total_mass: f64,
}

impl SpectralDensity {
    /// Builds a density from weighted atoms. Atoms within `threshold` of zero
    /// are placed at `0`; the rest are merged into clusters of width at most
    /// `threshold` and placed at the cluster mean.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>, threshold: f64, total_mass: f64) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jumps: Vec<Jump> = Vec::new();
        let mut cluster: Option<(f64, f64, f64, usize)> = None; // start, sum, mass, count
        let flush = |jumps: &mut Vec<Jump>, c: (f64, f64, f64, usize)| {
            let lambda = if c.0 <= threshold {
                0.0
            } else {
                c.1 / c.3 as f64
            };
            jumps.push(Jump { lambda, mass: c.2 });
        };
        for (x, w) in atoms {
            if w <= 0.0 {
                continue;
            }
            let x = if x <= threshold { 0.0 } else { x };
            match cluster {
                Some((start, sum, mass, count))
                    if (start == 0.0 && x == 0.0) || (start > 0.0 && x - start <= threshold) =>
                {
                    cluster = Some((start, sum + x, mass + w, count + 1));
                }
                Some(c) => {
                    flush(&mut jumps, c);
                    cluster = Some((x, x, w, 1));
                }
                None => cluster = Some((x, x, w, 1)),
            }
        }
        if let Some(c) = cluster {
            flush(&mut jumps, c);
        }
        SpectralDensity { jumps, total_mass }
    }

    /// `F(λ) = Σ_{jump ≤ λ} mass`.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        match self.jumps.last() {
            Some(last) if lambda >= last.lambda => self.total_mass,
            None => self.total_mass,
            _ => self
                .jumps
                .iter()
                .take_while(|j| j.lambda <= lambda)
                .map(|j| j.mass)
                .sum(),
        }
    }

    /// The L²-Betti number `F(0)`.
    pub fn betti(&self) -> f64 {
        self.evaluate(0.0)
    }

    pub fn max_lambda(&self) -> f64 {
        self.jumps.last().map_or(0.0, |j| j.lambda)
    }

    /// `∫_{0+}^{K} (F(λ) − F(0))/λ dλ = Σ_{λ_j > 0} mass_j · ln(K/λ_j)` for a
    /// step function whose jumps lie in `[0, K]`.
    pub fn log_integral(&self, k: f64) -> f64 {
        self.jumps
            .iter()
            .filter(|j| j.lambda > 0.0 && j.lambda <= k)
            .map(|j| j.mass * (k / j.lambda).ln())
            .sum()
    }

    /// `Σ_{λ_j > 0} mass_j · ln λ_j`.
    pub fn log_det(&self) -> f64 {
        self.jumps
            .iter()
            .filter(|j| j.lambda > 0.0)
            .map(|j| j.mass * j.lambda.ln())
            .sum()
    }

    /// CSV rows `lambda,F` at the jump points.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,F\n");
        let mut acc = 0.0;
        for (i, j) in self.jumps.iter().enumerate() {
            acc += j.mass;
            let f = if i + 1 == self.jumps.len() {
                self.total_mass
            } else {
                acc
            };
            out.push_str(&format!("{},{}\n", fmt12(j.lambda), fmt12(f)));
        }
        out
    }
}

pub(crate) fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Jump of `multiplicity · normalization` at each distinct eigenvalue.
pub fn density_from_eigs(e: &EigenResult) -> SpectralDensity {
    // Cluster with unit weights so the multiplicities stay exact integers.
    let atoms = e.eigenvalues.iter().map(|&x| (x, 1.0)).collect();
    let mut density = SpectralDensity::from_atoms(atoms, e.kernel_threshold, e.d as f64);
    for jump in &mut density.jumps {
        jump.mass *= e.normalization;
    }
    density
}

pub fn betti(f: &SpectralDensity) -> f64 {
    f.betti()
}

/// `normalization · Σ_{λ > threshold} ln λ`.
pub fn log_det(e: &EigenResult) -> f64 {
    e.normalization
        * e.eigenvalues
            .iter()
            .filter(|&&x| x > e.kernel_threshold)
            .map(|x| x.ln())
            .sum::<f64>()
}

/// Result of comparing the densities of `Δ_U` and its induction to `π`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub agree: bool,
    pub max_deviation: f64,
    pub subgroup_density: SpectralDensity,
    pub induced_density: SpectralDensity,
}

/// Densities of `Δ` over a finite `U` and of its image under an injective
/// `φ : U → π` (`π` finite) agree at every jump.
pub fn subgroup_invariance_check(
    delta: &RingMatrix,
    phi: &Homomorphism,
    opts: &SpectralOptions,
) -> Result<InvarianceCheck> {
    if !phi.is_injective()? {
        return Err(Error::InvalidArgument(
            "the embedding is not injective".into(),
        ));
    }
    let induced = delta.push_forward(phi)?;
    let k = delta.k_bound();
    let fu = level_spectrum(delta, k, opts)?.density();
    let fp = level_spectrum(&induced, k, opts)?.density();
    // Probe just right of each jump so that atoms merged within the kernel
    // threshold on either side are compared consistently.
    let offset = opts.eps_ker * k.max(1.0);
    let max_deviation = fu
        .jumps
        .iter()
        .chain(&fp.jumps)
        .map(|j| {
            let x = j.lambda + offset;
            (fu.evaluate(x) - fp.evaluate(x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(InvarianceCheck {
        agree: max_deviation <= 1e-9,
        max_deviation,
        subgroup_density: fu,
        induced_density: fp,
    })
}
