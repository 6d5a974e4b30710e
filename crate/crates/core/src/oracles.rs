//! Independent reference values: exact determinants over the trivial group,
//! symbol quadrature on the torus for `ℤⁿ`, and Mahler measures.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::{GroupDescriptor, GroupElement};
use crate::scalar::{ln_bigint, Coefficient};
use crate::spectral::{hermitian_eigenvalues_with, EigenResult, HermitianMatrix, SpectralOptions};
use crate::{RingElement, RingMatrix};

/// Exact determinant data of a positive semidefinite integer matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactLogDet {
    /// Characteristic polynomial `det(xI − Δ)`, constant term first.
    #[serde(serialize_with = "ser_bigints")]
    pub char_poly: Vec<BigInt>,
    /// Dimension of the kernel, the index of the lowest nonzero coefficient.
    pub nullity: usize,
    /// `|c_nullity|`, the product of the nonzero eigenvalues.
    #[serde(serialize_with = "ser_bigint")]
    pub coefficient: BigInt,
    pub log_det: f64,
}

fn ser_bigint<S: serde::Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_bigints<S: serde::Serializer>(xs: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.to_string()))
}

/// Characteristic polynomial `det(xI − A)` by the Faddeev–LeVerrier
/// recurrence in exact rational arithmetic, constant term first.
pub fn char_poly(a: &[Vec<BigRational>]) -> Result<Vec<BigRational>> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(
            "characteristic polynomial of a non-square matrix".into(),
        ));
    }
    let mut c = vec![BigRational::zero(); n + 1];
    c[n] = BigRational::from_integer(1.into());
    let mut m = vec![vec![BigRational::zero(); n]; n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{n−k+1}·I
        let mut next = mat_mul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &c[n - k + 1];
        }
        m = next;
        let am = mat_mul(a, &m);
        let trace: BigRational = (0..n).map(|i| am[i][i].clone()).sum();
        c[n - k] = -trace / BigRational::from_integer(BigInt::from(k));
    }
    Ok(c)
}

fn mat_mul(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let mut out = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    out[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    out
}

/// `ln` of the product of the nonzero eigenvalues of a symmetric positive
/// semidefinite integer matrix, i.e. of the lowest nonzero coefficient of its
/// characteristic polynomial. The value is an integer `≥ 1`, so the log is
/// `≥ 0`.
pub fn trivial_group_logdet_exact(a: &[Vec<BigInt>]) -> Result<ExactLogDet> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
        for j in 0..i {
            if a[i][j] != a[j][i] {
                return Err(Error::NotPsd(format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    let rational: Vec<Vec<BigRational>> = a
        .iter()
        .map(|row| row.iter().cloned().map(BigRational::from_integer).collect())
        .collect();
    let poly = char_poly(&rational)?;
    let poly: Vec<BigInt> = poly
        .into_iter()
        .map(|c| {
            debug_assert!(c.is_integer());
            c.to_integer()
        })
        .collect();
    // A real-rooted polynomial has only nonnegative roots iff its
    // coefficients alternate in sign: (−1)^{n−j} c_j ≥ 0.
    for (j, c) in poly.iter().enumerate() {
        let flipped = if (n - j) % 2 == 1 {
            -c.clone()
        } else {
            c.clone()
        };
        if flipped.is_negative() {
            return Err(Error::NotPsd(format!(
                "coefficient of x^{j} has the wrong sign"
            )));
        }
    }
    let nullity = poly.iter().position(|c| !c.is_zero()).unwrap_or(n);
    let coefficient = poly[nullity].abs();
    let log_det = ln_bigint(&coefficient);
    Ok(ExactLogDet {
        char_poly: poly,
        nullity,
        coefficient,
        log_det,
    })
}

/// [`trivial_group_logdet_exact`] for a matrix over the trivial group.
pub fn trivial_group_logdet(delta: &RingMatrix) -> Result<ExactLogDet> {
    if *delta.group() != GroupDescriptor::Trivial {
        return Err(Error::WrongGroup {
            expected: GroupDescriptor::Trivial.to_string(),
            found: delta.group().to_string(),
        });
    }
    if !delta.is_integral() {
        return Err(Error::InvalidArgument(
            "matrix entries are not integers".into(),
        ));
    }
    let rows = (0..delta.rows())
        .map(|i| {
            (0..delta.cols())
                .map(|j| delta.get(i, j).trace_coeff().re.to_integer())
                .collect()
        })
        .collect::<Vec<Vec<BigInt>>>();
    trivial_group_logdet_exact(&rows)
}

/// A reference value as embedded in run reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleValue {
    pub method: String,
    pub grid: usize,
    pub value: f64,
    pub error_estimate: f64,
}

fn rank_of(delta: &RingMatrix) -> Result<usize> {
    match delta.group() {
        GroupDescriptor::FreeAbelian(n) => Ok(*n),
        other => Err(Error::WrongGroup {
            expected: "free abelian group".into(),
            found: other.to_string(),
        }),
    }
}

/// Eigenvalues of the symbol `Δ(z)` at the midpoint grid
/// `z_k = exp(2πi(j_k + ½)/m)` of the `n`-torus, normalized by `1/mⁿ`.
pub fn torus_spectrum(
    delta: &RingMatrix,
    grid: usize,
    opts: &SpectralOptions,
) -> Result<EigenResult> {
    let n = rank_of(delta)?;
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be positive".into()));
    }
    if !delta.is_square() {
        return Err(Error::DimensionMismatch(
            "symbol of a non-square matrix".into(),
        ));
    }
    let d = delta.rows();
    let points = u32::try_from(n)
        .ok()
        .and_then(|e| grid.checked_pow(e))
        .ok_or_else(|| Error::InvalidArgument(format!("grid {grid}^{n} is too large")))?;

    let mut entries = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            let terms: Vec<(Vec<i64>, Complex<f64>)> = delta
                .get(k, l)
                .terms()
                .map(|(g, c)| match g {
                    GroupElement::Vector(v) => Ok((v.clone(), c.to_complex())),
                    other => Err(Error::mismatched(delta.group(), other)),
                })
                .collect::<Result<_>>()?;
            entries.push(terms);
        }
    }

    let m = grid as f64;
    let per_point = (0..points)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut theta = vec![0.0; n];
            for t in theta.iter_mut().rev() {
                *t = ((rem % grid) as f64 + 0.5) / m;
                rem /= grid;
            }
            let symbol = HermitianMatrix::from_fn(d, |k, l| {
                let mut acc = Complex::new(0.0, 0.0);
                for (v, c) in &entries[k * d + l] {
                    let phase: f64 = v.iter().zip(&theta).map(|(&x, &t)| x as f64 * t).sum();
                    let angle = 2.0 * std::f64::consts::PI * phase.rem_euclid(1.0);
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
    let eigs = per_point.into_iter().flatten().collect();
    Ok(EigenResult::new(
        eigs,
        1.0 / points as f64,
        opts.eps_ker * delta.k_bound(),
        d,
    ))
}

/// Approximate spectral density of `Δ` over `ℤⁿ` from the torus grid.
pub fn torus_density(
    delta: &RingMatrix,
    grid: usize,
    opts: &SpectralOptions,
) -> Result<crate::SpectralDensity> {
    Ok(torus_spectrum(delta, grid, opts)?.density())
}

/// Log-determinant of `Δ` over `ℤⁿ` by midpoint quadrature of
/// `ln det' Δ(z)`, with the half-grid value as an error estimate.
pub fn torus_logdet(
    delta: &RingMatrix,
    grid: usize,
    opts: &SpectralOptions,
) -> Result<TorusLogDet> {
    let fine = torus_spectrum(delta, grid, opts)?.log_det();
    let half = (grid / 2).max(1);
    let coarse = torus_spectrum(delta, half, opts)?.log_det();
    Ok(TorusLogDet {
        value: fine,
        grid,
        coarse_value: coarse,
        coarse_grid: half,
        error_estimate: (fine - coarse).abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusLogDet {
    pub value: f64,
    pub grid: usize,
    pub coarse_value: f64,
    pub coarse_grid: usize,
    pub error_estimate: f64,
}

impl TorusLogDet {
    pub fn oracle_value(&self) -> OracleValue {
        OracleValue {
            method: "torus_quadrature".into(),
            grid: self.grid,
            value: self.value,
            error_estimate: self.error_estimate,
        }
    }
}

/// Logarithmic Mahler measure of a one-variable Laurent polynomial:
/// `ln|lead| + Σ max(0, ln|root|)`.
pub fn mahler_1x1(p: &RingElement) -> Result<f64> {
    if *p.group() != GroupDescriptor::FreeAbelian(1) {
        return Err(Error::WrongGroup {
            expected: GroupDescriptor::FreeAbelian(1).to_string(),
            found: p.group().to_string(),
        });
    }
    if p.is_zero() {
        return Err(Error::InvalidArgument(
            "Mahler measure of the zero polynomial".into(),
        ));
    }
    let exps: Vec<(i64, Complex<f64>)> = p
        .terms()
        .map(|(g, c)| match g {
            GroupElement::Vector(v) => (v[0], c.to_complex()),
            _ => unreachable!("elements of ℤ are vectors"),
        })
        .collect();
    let lo = exps.iter().map(|e| e.0).min().unwrap_or(0);
    let hi = exps.iter().map(|e| e.0).max().unwrap_or(0);
    let mut coeffs = vec![Complex::new(0.0, 0.0); (hi - lo) as usize + 1];
    for (e, c) in exps {
        coeffs[(e - lo) as usize] = c;
    }
    mahler_measure(&coeffs)
}

/// Logarithmic Mahler measure of `Σ a_k x^k` (constant term first).
pub fn mahler_measure(coeffs: &[Complex<f64>]) -> Result<f64> {
    let coeffs = trim(coeffs);
    let lead = *coeffs
        .last()
        .ok_or_else(|| Error::InvalidArgument("zero polynomial".into()))?;
    let roots = polynomial_roots(coeffs)?;
    Ok(lead.norm().ln() + roots.iter().map(|z| z.norm().ln().max(0.0)).sum::<f64>())
}

fn trim(coeffs: &[Complex<f64>]) -> &[Complex<f64>] {
    let end = coeffs
        .iter()
        .rposition(|c| *c != Complex::zero())
        .map_or(0, |i| i + 1);
    &coeffs[..end]
}

fn horner(coeffs: &[Complex<f64>], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots by the Aberth–Ehrlich iteration followed by Newton
/// polishing.
pub fn polynomial_roots(coeffs: &[Complex<f64>]) -> Result<Vec<Complex<f64>>> {
    let coeffs = trim(coeffs);
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    // Roots at zero are split off exactly.
    let zeros = coeffs
        .iter()
        .position(|c| *c != Complex::zero())
        .unwrap_or(0);
    let reduced = &coeffs[zeros..];
    let n = reduced.len() - 1;
    let mut roots = vec![Complex::new(0.0, 0.0); zeros];
    if n == 0 {
        return Ok(roots);
    }
    let lead = reduced[n].norm();
    let radius = (reduced[0].norm() / lead).powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            Complex::from_polar(
                radius,
                2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4,
            )
        })
        .collect();
    let scale = |x: Complex<f64>| -> f64 {
        reduced
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x.norm() + c.norm())
    };
    let mut converged = false;
    for _ in 0..2000 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = horner(reduced, z[k]);
            if p.norm() <= f64::EPSILON * scale(z[k]) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex<f64> = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let w = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            if w.is_finite() {
                z[k] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    for root in &mut z {
        for _ in 0..3 {
            let (p, dp) = horner(reduced, *root);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let candidate = *root - step;
            if horner(reduced, candidate).0.norm() < p.norm() {
                *root = candidate;
            } else {
                break;
            }
        }
    }
    let residual = z
        .iter()
        .map(|&x| horner(reduced, x).0.norm() / scale(x).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if !converged && residual > 1e-8 {
        return Err(Error::RootFindFailure(format!(
            "residual {residual:e} after 2000 iterations"
        )));
    }
    roots.extend(z);
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GaussianRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64) -> GaussianRational {
        Complex::new(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
        )
    }

    fn laurent(terms: &[(i64, i64)]) -> RingElement {
        RingElement::from_terms(
            GroupDescriptor::FreeAbelian(1),
            terms
                .iter()
                .map(|&(k, c)| (GroupElement::Vector(vec![k]), q(c))),
        )
        .unwrap()
    }

    fn ints(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect()
    }

    /// Sum of the `r × r` principal minors, each by fraction-free elimination.
    fn principal_minor_sum(a: &[Vec<BigInt>], r: usize) -> BigInt {
        let n = a.len();
        let mut total = BigInt::zero();
        let mut subset: Vec<usize> = (0..r).collect();
        loop {
            let m: Vec<Vec<BigInt>> = subset
                .iter()
                .map(|&i| subset.iter().map(|&j| a[i][j].clone()).collect())
                .collect();
            total += bareiss(m);
            // Next combination.
            let mut i = r;
            loop {
                if i == 0 {
                    return total;
                }
                i -= 1;
                if subset[i] < n - r + i {
                    subset[i] += 1;
                    for j in i + 1..r {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn bareiss(mut m: Vec<Vec<BigInt>>) -> BigInt {
        let n = m.len();
        if n == 0 {
            return BigInt::from(1);
        }
        let mut sign = BigInt::from(1);
        let mut prev = BigInt::from(1);
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                    Some(i) => {
                        m.swap(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    m[i][j] = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                }
            }
            prev = m[k][k].clone();
        }
        sign * m[n - 1][n - 1].clone()
    }

    #[test]
    fn exact_examples() {
        let r = trivial_group_logdet_exact(&ints(&[&[2]])).unwrap();
        assert!((r.log_det - 2f64.ln()).abs() < 1e-15);
        let r = trivial_group_logdet_exact(&ints(&[&[1, 1], &[1, 1]])).unwrap();
        assert_eq!(
            r.char_poly,
            vec![BigInt::from(0), BigInt::from(-2), BigInt::from(1)]
        );
        assert_eq!(r.nullity, 1);
        assert!((r.log_det - 2f64.ln()).abs() < 1e-15);
        let r = trivial_group_logdet_exact(&ints(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])).unwrap();
        assert_eq!(r.log_det, 0.0);
        let zero = trivial_group_logdet_exact(&ints(&[&[0, 0], &[0, 0]])).unwrap();
        assert_eq!((zero.nullity, zero.log_det), (2, 0.0));
    }

    #[test]
    fn rejects_indefinite() {
        assert!(matches!(
            trivial_group_logdet_exact(&ints(&[&[1, 2], &[2, 1]])),
            Err(Error::NotPsd(_))
        ));
        assert!(matches!(
            trivial_group_logdet_exact(&ints(&[&[1, 2], &[0, 1]])),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn char_poly_matches_minor_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(1..=6);
            let b: Vec<Vec<i64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let a: Vec<Vec<BigInt>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| BigInt::from((0..n).map(|k| b[k][i] * b[k][j]).sum::<i64>()))
                        .collect()
                })
                .collect();
            let r = trivial_group_logdet_exact(&a).unwrap();
            for j in 0..=n {
                let sign = if (n - j) % 2 == 0 {
                    BigInt::from(1)
                } else {
                    BigInt::from(-1)
                };
                assert_eq!(r.char_poly[j], sign * principal_minor_sum(&a, n - j));
            }
            assert!(r.log_det >= 0.0);
        }
    }

    #[test]
    fn ring_matrix_over_the_trivial_group() {
        let t = GroupDescriptor::Trivial;
        let m = RingMatrix::from_rows(
            t.clone(),
            vec![
                vec![
                    RingElement::scalar(t.clone(), q(1)),
                    RingElement::scalar(t.clone(), q(1)),
                ],
                vec![
                    RingElement::scalar(t.clone(), q(1)),
                    RingElement::scalar(t.clone(), q(1)),
                ],
            ],
        )
        .unwrap();
        assert!((trivial_group_logdet(&m).unwrap().log_det - 2f64.ln()).abs() < 1e-15);
        let m = RingMatrix::scalar(laurent(&[(0, 2)]));
        assert!(matches!(
            trivial_group_logdet(&m),
            Err(Error::WrongGroup { .. })
        ));
    }

    #[test]
    fn torus_examples() {
        let opts = SpectralOptions::default();
        let lap = RingMatrix::scalar(laurent(&[(0, 2), (1, -1), (-1, -1)]));
        for grid in [8, 64, 512] {
            assert_eq!(torus_density(&lap, grid, &opts).unwrap().betti(), 0.0);
        }
        let ld = torus_logdet(&lap, 4096, &opts).unwrap();
        assert!(ld.value.abs() < 0.01, "{ld:?}");
        let ld = torus_logdet(
            &RingMatrix::scalar(laurent(&[(0, 3), (1, -1), (-1, -1)])),
            4096,
            &opts,
        )
        .unwrap();
        let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((ld.value - exact).abs() < 1e-3);
        assert!((ld.value - exact).abs() < 1e-12);
        let ld = torus_logdet(&RingMatrix::scalar(laurent(&[(0, 5)])), 16, &opts).unwrap();
        assert!((ld.value - 5f64.ln()).abs() < 1e-14);

        let zero = RingMatrix::scalar(RingElement::zero(GroupDescriptor::FreeAbelian(1)));
        assert_eq!(torus_density(&zero, 16, &opts).unwrap().betti(), 1.0);
        let id = RingMatrix::identity(GroupDescriptor::FreeAbelian(2), 3);
        let f = torus_density(&id, 8, &opts).unwrap();
        assert_eq!(f.jumps.len(), 1);
        assert!((f.jumps[0].lambda - 1.0).abs() < 1e-12 && (f.jumps[0].mass - 3.0).abs() < 1e-9);
        assert!(matches!(
            torus_density(
                &RingMatrix::identity(GroupDescriptor::Cyclic(3), 1),
                8,
                &opts
            ),
            Err(Error::WrongGroup { .. })
        ));
    }

    #[test]
    fn mahler_examples() {
        assert!(mahler_1x1(&laurent(&[(0, 1), (1, -1)])).unwrap().abs() < 1e-12);
        let m = mahler_1x1(&laurent(&[(0, 3), (1, -1), (-1, -1)])).unwrap();
        assert!((m - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!((mahler_1x1(&laurent(&[(0, 5)])).unwrap() - 5f64.ln()).abs() < 1e-15);
        assert!(
            mahler_1x1(&laurent(&[(0, 1), (1, -2), (2, 1)]))
                .unwrap()
                .abs()
                < 1e-6
        );
        assert!(mahler_1x1(&RingElement::zero(GroupDescriptor::FreeAbelian(1))).is_err());
    }

    #[test]
    fn mahler_matches_quadrature() {
        let opts = SpectralOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let deg = rng.gen_range(1..=6);
            let terms: Vec<(i64, i64)> = (0..=deg).map(|k| (k, rng.gen_range(-4..=4))).collect();
            let p = laurent(&terms);
            if p.is_zero() {
                continue;
            }
            let m = mahler_1x1(&p).unwrap();
            let delta = RingMatrix::scalar(p).positive_square().unwrap();
            // Each root on the unit circle biases the midpoint rule by at most ln4/m.
            let ld = torus_logdet(&delta, 16384, &opts).unwrap().value;
            assert!(
                (ld - 2.0 * m).abs() < 1e-3,
                "{terms:?}: {ld} vs {}",
                2.0 * m
            );
        }
    }
}
