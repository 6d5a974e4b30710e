//! Cellular chain complexes over `ℤπ` and their L²-invariants.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::groups::GroupDescriptor;
use crate::matrices::laplacian;
use crate::oracles::torus_spectrum;
use crate::schemes::{run_tower, QuotientTower, SchemeOptions};
use crate::spectral::{level_spectrum, EigenResult};
use crate::RingMatrix;

/// `b_p` at or below this value counts as zero when deciding acyclicity.
pub const ACYCLICITY_TOL: f64 = 0.01;

/// A based chain complex `C_top → … → C_1 → C_0` of free `ℤπ`-modules.
/// `boundaries[p − 1]` is `∂_p : C_p → C_{p−1}`, a `dims[p−1] × dims[p]`
/// matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainComplexSpec {
    pub group: GroupDescriptor,
    pub dims: Vec<usize>,
    pub boundaries: Vec<RingMatrix>,
}

impl ChainComplexSpec {
    pub fn new(
        group: GroupDescriptor,
        dims: Vec<usize>,
        boundaries: Vec<RingMatrix>,
    ) -> Result<Self> {
        let spec = ChainComplexSpec {
            group,
            dims,
            boundaries,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks shapes and `∂_{p−1}∂_p = 0` exactly.
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::InvalidArgument(
                "a complex needs at least one degree".into(),
            ));
        }
        if self.boundaries.len() + 1 != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} degrees need {} boundary maps, got {}",
                self.dims.len(),
                self.dims.len() - 1,
                self.boundaries.len()
            )));
        }
        for (i, c) in self.boundaries.iter().enumerate() {
            let p = i + 1;
            if *c.group() != self.group {
                return Err(Error::WrongGroup {
                    expected: self.group.to_string(),
                    found: c.group().to_string(),
                });
            }
            if c.rows() != self.dims[p - 1] || c.cols() != self.dims[p] {
                return Err(Error::DimensionMismatch(format!(
                    "boundary in degree {p} is {}×{}, expected {}×{}",
                    c.rows(),
                    c.cols(),
                    self.dims[p - 1],
                    self.dims[p]
                )));
            }
        }
        for (i, pair) in self.boundaries.windows(2).enumerate() {
            if !pair[0].mul(&pair[1])?.entries_all_zero() {
                return Err(Error::NotAComplex { degree: i + 2 });
            }
        }
        Ok(())
    }

    pub fn top_degree(&self) -> usize {
        self.dims.len() - 1
    }

    /// `Σ (−1)^p dims_p`.
    pub fn euler_characteristic(&self) -> i64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(p, &n)| if p % 2 == 0 { n as i64 } else { -(n as i64) })
            .sum()
    }

    /// `Δ_p = ∂_p*∂_p + ∂_{p+1}∂_{p+1}*` for every degree.
    pub fn laplacians(&self) -> Result<Vec<RingMatrix>> {
        (0..self.dims.len())
            .map(|p| {
                let outgoing = p.checked_sub(1).map(|i| &self.boundaries[i]);
                let incoming = self.boundaries.get(p);
                laplacian(&self.group, self.dims[p], outgoing, incoming)
            })
            .collect()
    }
}

/// How the invariants of each Laplacian are obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum L2Method {
    /// Exact spectrum for finite groups, torus quadrature on a grid of
    /// `grid` points per coordinate for `ℤⁿ`.
    Oracle { grid: usize },
    /// Deepest level of a quotient tower.
    Tower(QuotientTower),
}

impl L2Method {
    fn describe(&self, group: &GroupDescriptor) -> String {
        match self {
            L2Method::Oracle { .. } if group.is_finite() => "exact spectrum".into(),
            L2Method::Oracle { grid } => format!("torus quadrature (grid {grid})"),
            L2Method::Tower(t) => match t.levels().last() {
                Some(phi) => format!("tower ({} levels, deepest {})", t.len(), phi.target()),
                None => "tower (empty)".into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeReport {
    pub degree: usize,
    pub cells: usize,
    pub betti: f64,
    pub logdet: f64,
    /// Smallest `lnDet` seen: the oracle value, or the minimum over levels.
    pub logdet_lower_bound: f64,
    /// Consistent with determinant class: finite lower bound and
    /// `∫_{0+}^K (F(λ) − F(0))/λ dλ ≤ ln K·(d − F(0))`.
    pub det_class: bool,
    pub k_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L2Report {
    pub group: String,
    pub method: String,
    pub degrees: Vec<DegreeReport>,
    pub euler_characteristic: i64,
    pub l2_euler_characteristic: f64,
    pub acyclic: bool,
    /// `Σ (−1)^p · p · lnDet Δ_p`, present only when the complex is acyclic.
    pub torsion: Option<f64>,
}

impl L2Report {
    /// The torsion, or the first degree that prevents it.
    pub fn torsion(&self) -> Result<f64> {
        match self.torsion {
            Some(t) => Ok(t),
            None => {
                let worst = self
                    .degrees
                    .iter()
                    .find(|d| d.betti > ACYCLICITY_TOL)
                    .map_or((0, f64::NAN), |d| (d.degree, d.betti));
                Err(Error::TorsionUndefined {
                    degree: worst.0,
                    betti: worst.1,
                })
            }
        }
    }
}

fn degree_report(
    p: usize,
    cells: usize,
    delta: &RingMatrix,
    spectra: &[EigenResult],
    tol: f64,
) -> DegreeReport {
    let k = delta.k_bound();
    let last = spectra.last().expect("at least one spectrum");
    let density = last.density();
    let betti = density.betti();
    let logdet = last.log_det();
    let lower = spectra
        .iter()
        .map(EigenResult::log_det)
        .fold(f64::INFINITY, f64::min);
    let k_eff = k.max(1.0);
    let bound_ok = spectra.iter().all(|s| {
        let f = s.density();
        f.log_integral(k_eff) <= k_eff.ln() * (s.d as f64 - f.betti()) + tol
    });
    DegreeReport {
        degree: p,
        cells,
        betti,
        logdet,
        logdet_lower_bound: lower,
        det_class: lower.is_finite() && bound_ok,
        k_bound: k,
    }
}

/// L²-Betti numbers, log-determinants and torsion of `spec`. Degrees are
/// computed in parallel.
pub fn l2_invariants(
    spec: &ChainComplexSpec,
    method: &L2Method,
    opts: &SchemeOptions,
) -> Result<L2Report> {
    spec.validate()?;
    let laplacians = spec.laplacians()?;
    let degrees = laplacians
        .par_iter()
        .enumerate()
        .map(|(p, delta)| {
            let spectra = match method {
                L2Method::Oracle { grid } => vec![match &spec.group {
                    GroupDescriptor::FreeAbelian(_) => {
                        torus_spectrum(delta, *grid, &opts.spectral)?
                    }
                    g if g.is_finite() => level_spectrum(delta, delta.k_bound(), &opts.spectral)?,
                    g => return Err(Error::OracleUnavailable(format!("no oracle for {g}"))),
                }],
                L2Method::Tower(tower) => {
                    if tower.is_empty() {
                        return Err(Error::InsufficientLevels { needed: 1, got: 0 });
                    }
                    run_tower(delta, tower, opts)?
                        .into_iter()
                        .map(|r| r.spectrum)
                        .collect()
                }
            };
            Ok(degree_report(
                p,
                spec.dims[p],
                delta,
                &spectra,
                crate::schemes::DEFAULT_TOL,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let acyclic = degrees.iter().all(|d| d.betti <= ACYCLICITY_TOL);
    let torsion = acyclic.then(|| {
        degrees
            .iter()
            .map(|d| {
                let sign = if d.degree % 2 == 0 { 1.0 } else { -1.0 };
                sign * d.degree as f64 * d.logdet
            })
            .sum()
    });
    let l2_euler_characteristic = degrees
        .iter()
        .map(|d| if d.degree % 2 == 0 { d.betti } else { -d.betti })
        .sum();
    Ok(L2Report {
        group: spec.group.to_string(),
        method: method.describe(&spec.group),
        euler_characteristic: spec.euler_characteristic(),
        l2_euler_characteristic,
        acyclic,
        torsion,
        degrees,
    })
}

/// The circle `S¹` with one 0-cell and one 1-cell over `ℤ`: `∂_1 = t − 1`.
pub fn circle() -> ChainComplexSpec {
    let z = GroupDescriptor::FreeAbelian(1);
    let c1 = RingMatrix::scalar(monomial_sum(&z, &[(vec![1], 1), (vec![0], -1)]));
    ChainComplexSpec::new(z, vec![1, 1], vec![c1]).expect("circle is a complex")
}

/// The standard CW torus `T²` over `ℤ²` with cells `1, 2, 1`:
/// `∂_1 = (a − 1, b − 1)`, `∂_2 = (1 − b, a − 1)ᵀ`.
pub fn torus() -> ChainComplexSpec {
    let z2 = GroupDescriptor::FreeAbelian(2);
    let a_minus_1 = monomial_sum(&z2, &[(vec![1, 0], 1), (vec![0, 0], -1)]);
    let b_minus_1 = monomial_sum(&z2, &[(vec![0, 1], 1), (vec![0, 0], -1)]);
    let c1 = RingMatrix::from_rows(z2.clone(), vec![vec![a_minus_1.clone(), b_minus_1.clone()]])
        .expect("row matrix");
    let c2 = RingMatrix::from_rows(z2.clone(), vec![vec![b_minus_1.neg()], vec![a_minus_1]])
        .expect("column matrix");
    ChainComplexSpec::new(z2, vec![1, 2, 1], vec![c1, c2]).expect("torus is a complex")
}

/// A single 0-cell over the trivial group.
pub fn point() -> ChainComplexSpec {
    ChainComplexSpec::new(GroupDescriptor::Trivial, vec![1], vec![]).expect("point is a complex")
}

fn monomial_sum(group: &GroupDescriptor, terms: &[(Vec<i64>, i64)]) -> crate::RingElement {
    crate::RingElement::from_terms(
        group.clone(),
        terms.iter().map(|(v, c)| {
            (
                crate::GroupElement::Vector(v.clone()),
                crate::schemes::int(*c),
            )
        }),
    )
    .expect("valid terms")
}
