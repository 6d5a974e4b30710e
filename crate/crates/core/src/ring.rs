//! Finitely supported elements of a group ring `Cπ` and their arithmetic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::groups::{GroupDescriptor, GroupElement, Homomorphism};
use crate::scalar::Coefficient;

/// `Σ λ_g g` with finitely many nonzero coefficients. Zero coefficients are
/// never stored, and terms iterate in canonical element order.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRingElement<C> {
    group: GroupDescriptor,
    terms: BTreeMap<GroupElement, C>,
}

impl<C: Coefficient> GroupRingElement<C> {
    pub fn zero(group: GroupDescriptor) -> Self {
        GroupRingElement {
            group,
            terms: BTreeMap::new(),
        }
    }

    /// `δ_e`, the unit of the ring.
    pub fn one(group: GroupDescriptor) -> Self {
        let e = group.identity();
        Self::monomial(group, e, C::one()).expect("identity is a valid element")
    }

    pub fn scalar(group: GroupDescriptor, c: C) -> Self {
        let e = group.identity();
        Self::monomial(group, e, c).expect("identity is a valid element")
    }

    /// `c·g`; the element is canonicalized first.
    pub fn monomial(group: GroupDescriptor, g: GroupElement, c: C) -> Result<Self> {
        Self::from_terms(group, [(g, c)])
    }

    /// Sums the given terms; repeated elements are combined.
    pub fn from_terms(
        group: GroupDescriptor,
        terms: impl IntoIterator<Item = (GroupElement, C)>,
    ) -> Result<Self> {
        let mut out = Self::zero(group);
        for (g, c) in terms {
            let g = out.group.canonicalize(&g)?;
            out.add_term(g, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, g: GroupElement, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&g) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&g);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(g, c);
            }
        }
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElement, &C)> {
        self.terms.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, g: &GroupElement) -> C {
        self.terms.get(g).cloned().unwrap_or_else(C::zero)
    }

    /// Whether every coefficient lies in `ℤ`, i.e. the element is in `ℤπ`.
    pub fn is_integral(&self) -> bool {
        self.terms.values().all(Coefficient::is_integer)
    }

    fn same_group(&self, other: &Self) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::WrongGroup {
                expected: self.group.to_string(),
                found: other.group.to_string(),
            })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(g.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coefficients(|c| -c.clone())
    }

    pub fn scale(&self, s: &C) -> Self {
        if s.is_zero() {
            return Self::zero(self.group.clone());
        }
        self.map_coefficients(|c| c.clone() * s.clone())
    }

    fn map_coefficients(&self, f: impl Fn(&C) -> C) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (g, c) in &self.terms {
            out.add_term(g.clone(), f(c));
        }
        out
    }

    /// Convolution product `Σ_{gh=k} λ_g μ_h k`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let mut out = Self::zero(self.group.clone());
        for (g, a) in &self.terms {
            for (h, b) in &other.terms {
                let k = self.group.multiply(g, h)?;
                out.add_term(k, a.clone() * b.clone());
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut acc = Self::one(self.group.clone());
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// The involution `(Σ λ_g g)* = Σ conj(λ_g) g⁻¹`.
    pub fn star(&self) -> Self {
        let mut out = Self::zero(self.group.clone());
        for (g, c) in &self.terms {
            let inv = self
                .group
                .inverse(g)
                .expect("stored elements are canonical");
            out.add_term(inv, c.conj());
        }
        out
    }

    /// `Σ |λ_g|`, evaluated in double precision.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(Coefficient::modulus).sum()
    }

    /// The von Neumann trace: the coefficient of the identity.
    pub fn trace_coeff(&self) -> C {
        self.coefficient(&self.group.identity())
    }

    /// `Σ λ_g φ(g)`, summing coefficients whose images collide.
    pub fn push_forward(&self, phi: &Homomorphism) -> Result<Self> {
        if *phi.source() != self.group {
            return Err(Error::WrongGroup {
                expected: phi.source().to_string(),
                found: self.group.to_string(),
            });
        }
        let mut out = Self::zero(phi.target().clone());
        for (g, c) in &self.terms {
            out.add_term(phi.apply(g)?, c.clone());
        }
        Ok(out)
    }

    /// Maps coefficients into another coefficient ring.
    pub fn map_into<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> GroupRingElement<D> {
        let mut out = GroupRingElement::<D>::zero(self.group.clone());
        for (g, c) in &self.terms {
            out.add_term(g.clone(), f(c));
        }
        out
    }
}

impl<C: Coefficient> GroupRingElement<C> {
    /// `true` iff this is `c·δ_e` with `c = 1`.
    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.trace_coeff().is_one()
    }
}
