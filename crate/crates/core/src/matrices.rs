//! Dense matrices over a group ring.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::groups::{GroupDescriptor, GroupElement, Homomorphism};
use crate::ring::GroupRingElement;
use crate::scalar::Coefficient;

/// A `rows × cols` matrix over `Cπ`, stored row-major.
#[derive(Clone, Debug)]
pub struct GroupRingMatrix<C> {
    group: GroupDescriptor,
    rows: usize,
    cols: usize,
    entries: Vec<GroupRingElement<C>>,
    self_adjoint: bool,
}

impl<C: Coefficient> PartialEq for GroupRingMatrix<C> {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group
            && self.rows == other.rows
            && self.cols == other.cols
            && self.entries == other.entries
    }
}

impl<C: Coefficient> GroupRingMatrix<C> {
    pub fn new(
        group: GroupDescriptor,
        rows: usize,
        cols: usize,
        entries: Vec<GroupRingElement<C>>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|e| *e.group() != group) {
            return Err(Error::WrongGroup {
                expected: group.to_string(),
                found: bad.group().to_string(),
            });
        }
        Ok(GroupRingMatrix {
            group,
            rows,
            cols,
            entries,
            self_adjoint: false,
        })
    }

    pub fn from_rows(group: GroupDescriptor, rows: Vec<Vec<GroupRingElement<C>>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(group, r, c, rows.into_iter().flatten().collect())
    }

    pub fn zeros(group: GroupDescriptor, rows: usize, cols: usize) -> Self {
        let entries = vec![GroupRingElement::zero(group.clone()); rows * cols];
        GroupRingMatrix {
            group,
            rows,
            cols,
            entries,
            self_adjoint: rows == cols,
        }
    }

    pub fn identity(group: GroupDescriptor, d: usize) -> Self {
        let mut m = Self::zeros(group.clone(), d, d);
        for i in 0..d {
            m.entries[i * d + i] = GroupRingElement::one(group.clone());
        }
        m.self_adjoint = true;
        m
    }

    /// A `1 × 1` matrix.
    pub fn scalar(entry: GroupRingElement<C>) -> Self {
        let group = entry.group().clone();
        Self::new(group, 1, 1, vec![entry]).expect("single entry")
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &GroupRingElement<C> {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[GroupRingElement<C>] {
        &self.entries
    }

    /// Whether the matrix was built as a self-adjoint operator (by
    /// [`Self::positive_square`], [`laplacian`], or a successful
    /// [`Self::mark_self_adjoint`]).
    pub fn is_flagged_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    /// Exact entrywise check of `M* = M`.
    pub fn is_self_adjoint(&self) -> bool {
        self.is_square() && self.adjoint() == *self
    }

    /// Sets the self-adjoint flag after verifying it exactly.
    pub fn mark_self_adjoint(mut self) -> Result<Self> {
        if !self.is_self_adjoint() {
            return Err(Error::InvalidArgument("matrix is not self-adjoint".into()));
        }
        self.self_adjoint = true;
        Ok(self)
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().all(GroupRingElement::is_integral)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(GroupRingElement::is_zero)
    }

    /// `(M*)_{kl} = (M_{lk})*`.
    pub fn adjoint(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for k in 0..self.cols {
            for l in 0..self.rows {
                entries.push(self.get(l, k).star());
            }
        }
        GroupRingMatrix {
            group: self.group.clone(),
            rows: self.cols,
            cols: self.rows,
            entries,
            self_adjoint: self.self_adjoint,
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.group != other.group {
            return Err(Error::WrongGroup {
                expected: self.group.to_string(),
                found: other.group.to_string(),
            });
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = GroupRingElement::zero(self.group.clone());
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b)?)?;
                }
                entries.push(acc);
            }
        }
        Self::new(self.group.clone(), self.rows, other.cols, entries)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.group.clone(), self.rows, self.cols, entries)?;
        out.self_adjoint = self.self_adjoint && other.self_adjoint;
        Ok(out)
    }

    pub fn scale(&self, s: &C) -> Self {
        let entries = self.entries.iter().map(|e| e.scale(s)).collect();
        GroupRingMatrix {
            group: self.group.clone(),
            rows: self.rows,
            cols: self.cols,
            entries,
            self_adjoint: false,
        }
    }

    /// `Δ = A*A`, flagged self-adjoint.
    pub fn positive_square(&self) -> Result<Self> {
        let mut delta = self.adjoint().mul(self)?;
        delta.self_adjoint = true;
        Ok(delta)
    }

    /// `K(Δ) = d² · max_{ij} |Δ_ij|₁`, an upper bound for the operator norm of
    /// `Δ` and of every finite-level image of it.
    pub fn k_bound(&self) -> f64 {
        let d = self.rows.max(self.cols) as f64;
        let max = self
            .entries
            .iter()
            .map(GroupRingElement::l1_norm)
            .fold(0.0, f64::max);
        d * d * max
    }

    /// `tr_π(M) = Σ_k (M_kk)_e`.
    pub fn trace(&self) -> C {
        (0..self.rows.min(self.cols))
            .map(|k| self.get(k, k).trace_coeff())
            .fold(C::zero(), |acc, c| acc + c)
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "power of a non-square matrix".into(),
            ));
        }
        let mut acc = Self::identity(self.group.clone(), self.rows);
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        acc.self_adjoint = self.self_adjoint;
        Ok(acc)
    }

    /// `p(M)` by Horner's scheme; `poly[k]` is the coefficient of `x^k`.
    pub fn poly(&self, poly: &[C]) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(
                "polynomial of a non-square matrix".into(),
            ));
        }
        let d = self.rows;
        let identity = Self::identity(self.group.clone(), d);
        let mut acc = Self::zeros(self.group.clone(), d, d);
        for c in poly.iter().rev() {
            acc = acc.mul(self)?.add(&identity.scale(c))?;
        }
        Ok(acc)
    }

    /// `tr_π p(M)` in exact arithmetic.
    pub fn trace_poly_exact(&self, poly: &[C]) -> Result<C> {
        Ok(self.poly(poly)?.trace())
    }

    /// `tr_π(M^m)`.
    pub fn trace_power_exact(&self, m: u32) -> Result<C> {
        Ok(self.pow(m)?.trace())
    }

    /// Entrywise push-forward along `φ`.
    pub fn push_forward(&self, phi: &Homomorphism) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.push_forward(phi))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(phi.target().clone(), self.rows, self.cols, entries)?;
        out.self_adjoint = self.self_adjoint;
        Ok(out)
    }

    /// Union of the supports of all entries.
    pub fn support(&self) -> BTreeSet<GroupElement> {
        self.entries
            .iter()
            .flat_map(|e| e.support().cloned())
            .collect()
    }

    /// Union of the supports of the diagonal entries.
    pub fn diagonal_support(&self) -> BTreeSet<GroupElement> {
        (0..self.rows.min(self.cols))
            .flat_map(|k| self.get(k, k).support().cloned().collect::<Vec<_>>())
            .collect()
    }

    pub fn map_into<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> GroupRingMatrix<D> {
        GroupRingMatrix {
            group: self.group.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.map_into(&f)).collect(),
            self_adjoint: self.self_adjoint,
        }
    }
}

/// Combinatorial Laplacian in degree `p`:
/// `Δ_p = ∂_p*·∂_p + ∂_{p+1}·∂_{p+1}*`.
///
/// `outgoing` is `∂_p : C_p → C_{p-1}` (a `dims[p-1] × dims[p]` matrix) and
/// `incoming` is `∂_{p+1} : C_{p+1} → C_p` (`dims[p] × dims[p+1]`). Either may
/// be absent at the ends of the complex; `dim` is the rank of `C_p`.
pub fn laplacian<C: Coefficient>(
    group: &GroupDescriptor,
    dim: usize,
    outgoing: Option<&GroupRingMatrix<C>>,
    incoming: Option<&GroupRingMatrix<C>>,
) -> Result<GroupRingMatrix<C>> {
    let mut delta = GroupRingMatrix::zeros(group.clone(), dim, dim);
    if let Some(c) = outgoing {
        if c.cols != dim {
            return Err(Error::DimensionMismatch(format!(
                "outgoing boundary has {} columns, degree has rank {dim}",
                c.cols
            )));
        }
        delta = delta.add(&c.adjoint().mul(c)?)?;
    }
    if let Some(c) = incoming {
        if c.rows != dim {
            return Err(Error::DimensionMismatch(format!(
                "incoming boundary has {} rows, degree has rank {dim}",
                c.rows
            )));
        }
        delta = delta.add(&c.mul(&c.adjoint())?)?;
    }
    delta.self_adjoint = true;
    Ok(delta)
}

impl<C: Coefficient> GroupRingMatrix<C> {
    /// Whether every entry vanishes identically.
    pub fn entries_all_zero(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.is_zero() || e.terms().all(|(_, c)| c.is_zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{GaussianRational, RingElement, RingMatrix};
    use num_bigint::BigInt;
    use num_complex::Complex;
    use num_rational::BigRational;
    use num_traits::Zero;

    fn q(n: i64) -> GaussianRational {
        Complex::new(
            BigRational::from_integer(BigInt::from(n)),
            BigRational::zero(),
        )
    }

    fn z() -> GroupDescriptor {
        GroupDescriptor::FreeAbelian(1)
    }

    fn laurent(terms: &[(i64, i64)]) -> RingElement {
        RingElement::from_terms(
            z(),
            terms
                .iter()
                .map(|&(k, c)| (GroupElement::Vector(vec![k]), q(c))),
        )
        .unwrap()
    }

    fn circle_laplacian() -> RingMatrix {
        RingMatrix::scalar(laurent(&[(0, 2), (1, -1), (-1, -1)]))
    }

    #[test]
    fn adjoint_examples() {
        let m = RingMatrix::scalar(laurent(&[(0, 1), (1, -1)]));
        assert_eq!(
            m.adjoint(),
            RingMatrix::scalar(laurent(&[(0, 1), (-1, -1)]))
        );
        let id = RingMatrix::identity(z(), 3);
        assert_eq!(id.adjoint(), id);

        let f1 = GroupDescriptor::Free(1);
        let a = RingElement::monomial(f1.clone(), GroupElement::Word(vec![1]), q(1)).unwrap();
        let a_inv = RingElement::monomial(f1.clone(), GroupElement::Word(vec![-1]), q(1)).unwrap();
        let zero = RingElement::zero(f1.clone());
        let m = RingMatrix::from_rows(
            f1.clone(),
            vec![vec![zero.clone(), a], vec![zero.clone(), zero.clone()]],
        )
        .unwrap();
        let expected = RingMatrix::from_rows(
            f1,
            vec![vec![zero.clone(), zero.clone()], vec![a_inv, zero]],
        )
        .unwrap();
        assert_eq!(m.adjoint(), expected);
        assert_eq!(m.adjoint().adjoint(), m);
    }

    #[test]
    fn products() {
        let m = RingMatrix::scalar(laurent(&[(0, 1), (1, -1)]));
        assert_eq!(m.mul(&RingMatrix::identity(z(), 1)).unwrap(), m);
        let n = RingMatrix::scalar(laurent(&[(0, 1), (-1, -1)]));
        assert_eq!(m.mul(&n).unwrap(), circle_laplacian());

        let one = laurent(&[(0, 1)]);
        let zero = RingElement::zero(z());
        let e = RingMatrix::from_rows(
            z(),
            vec![
                vec![one.clone(), laurent(&[(0, 1), (1, -1)])],
                vec![zero.clone(), one.clone()],
            ],
        )
        .unwrap();
        let e_inv = RingMatrix::from_rows(
            z(),
            vec![
                vec![one.clone(), laurent(&[(1, 1), (0, -1)])],
                vec![zero, one],
            ],
        )
        .unwrap();
        assert_eq!(e.mul(&e_inv).unwrap(), RingMatrix::identity(z(), 2));
        assert_eq!(e_inv.mul(&e).unwrap(), RingMatrix::identity(z(), 2));
    }

    #[test]
    fn product_errors() {
        let a = RingMatrix::identity(z(), 2);
        let b = RingMatrix::identity(z(), 3);
        assert!(matches!(a.mul(&b), Err(Error::DimensionMismatch(_))));
        let c = RingMatrix::identity(GroupDescriptor::Cyclic(2), 2);
        assert!(matches!(a.mul(&c), Err(Error::WrongGroup { .. })));
    }

    #[test]
    fn positive_squares() {
        let a = RingMatrix::scalar(laurent(&[(0, 1), (1, -1)]));
        let delta = a.positive_square().unwrap();
        assert_eq!(delta, circle_laplacian());
        assert!(delta.is_flagged_self_adjoint());
        assert!(delta.is_self_adjoint());
        assert_eq!(
            RingMatrix::identity(z(), 2).positive_square().unwrap(),
            RingMatrix::identity(z(), 2)
        );

        let f2 = GroupDescriptor::Free(2);
        let w = |x: &[i32]| GroupElement::Word(x.to_vec());
        let a_plus_b =
            RingElement::from_terms(f2.clone(), [(w(&[1]), q(1)), (w(&[2]), q(1))]).unwrap();
        let delta = RingMatrix::scalar(a_plus_b).positive_square().unwrap();
        let expected = RingElement::from_terms(
            f2,
            [(w(&[]), q(2)), (w(&[-1, 2]), q(1)), (w(&[-2, 1]), q(1))],
        )
        .unwrap();
        assert_eq!(*delta.get(0, 0), expected);
    }

    #[test]
    fn k_bounds() {
        assert_eq!(circle_laplacian().k_bound(), 4.0);
        assert_eq!(RingMatrix::identity(z(), 3).k_bound(), 9.0);
        let three = laurent(&[(0, 1), (1, 2)]);
        let m = RingMatrix::from_rows(
            z(),
            vec![
                vec![three, laurent(&[(0, 1)])],
                vec![RingElement::zero(z()), laurent(&[(2, -2)])],
            ],
        )
        .unwrap();
        assert_eq!(m.k_bound(), 12.0);
    }

    #[test]
    fn laplacian_of_the_circle() {
        // ∂₁ = [[t - 1]] on the circle with one 0-cell and one 1-cell.
        let boundary = RingMatrix::scalar(laurent(&[(1, 1), (0, -1)]));
        let delta1 = laplacian(&z(), 1, Some(&boundary), None).unwrap();
        assert_eq!(delta1, circle_laplacian());
        let delta0 = laplacian(&z(), 1, None, Some(&boundary)).unwrap();
        assert_eq!(delta0, circle_laplacian());
        let empty = laplacian::<GaussianRational>(&z(), 2, None, None).unwrap();
        assert!(empty.is_zero());
        assert!(matches!(
            laplacian(&z(), 2, Some(&boundary), None),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn exact_polynomial_traces() {
        let delta = circle_laplacian();
        assert_eq!(delta.trace_poly_exact(&[q(0), q(1)]).unwrap(), q(2));
        assert_eq!(delta.trace_poly_exact(&[q(0), q(0), q(1)]).unwrap(), q(6));
        assert_eq!(delta.trace_power_exact(3).unwrap(), q(20));
        // p(x) = 1 + 2x - x^2: 1 + 4 - 6.
        assert_eq!(delta.trace_poly_exact(&[q(1), q(2), q(-1)]).unwrap(), q(-1));
        let id = RingMatrix::identity(z(), 4);
        for m in 0..5 {
            assert_eq!(id.trace_power_exact(m).unwrap(), q(4));
        }
    }

    #[test]
    fn push_forward_matrices() {
        let to4 = Homomorphism::reduction(1, 4).unwrap();
        let img = circle_laplacian().push_forward(&to4).unwrap();
        let expected = RingElement::from_terms(
            GroupDescriptor::Cyclic(4),
            [
                (GroupElement::Residue(0), q(2)),
                (GroupElement::Residue(1), q(-1)),
                (GroupElement::Residue(3), q(-1)),
            ],
        )
        .unwrap();
        assert_eq!(*img.get(0, 0), expected);
        assert_eq!(
            RingMatrix::identity(z(), 2).push_forward(&to4).unwrap(),
            RingMatrix::identity(GroupDescriptor::Cyclic(4), 2)
        );
        let a = RingMatrix::scalar(laurent(&[(0, 1), (1, -1), (3, 2)]));
        let lhs = a.positive_square().unwrap().push_forward(&to4).unwrap();
        let rhs = a.push_forward(&to4).unwrap().positive_square().unwrap();
        assert_eq!(lhs, rhs);
    }
}
