//! Concrete groups with canonical element forms and homomorphisms between them.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A concrete discrete group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupDescriptor {
    Trivial,
    /// `ℤ/N`, `N ≥ 1`.
    Cyclic(u64),
    /// `ℤⁿ`.
    FreeAbelian(usize),
    /// Free group on `k ≥ 1` generators.
    Free(usize),
    FiniteTable(Arc<FiniteTable>),
    /// Direct product of the listed factors, in order.
    Product(Vec<GroupDescriptor>),
}

/// Canonical form of a group element; the variant mirrors the group variant.
///
/// Free-group words hold signed generator numbers: `j+1` is `a_j`, `-(j+1)`
/// its inverse. Words are always freely reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Unit,
    Residue(u64),
    Vector(Vec<i64>),
    Word(Vec<i32>),
    Index(usize),
    Tuple(Vec<GroupElement>),
}

/// A finite group given by its multiplication table, verified on construction.
#[derive(Debug, PartialEq, Eq, Hash)]
pub struct FiniteTable {
    names: Vec<String>,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverses: Vec<usize>,
    abelian: bool,
}

impl FiniteTable {
    /// Checks the Latin-square property, identity, inverses and (for tables up
    /// to 256 elements) associativity.
    pub fn new(names: Vec<String>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty multiplication table".into()));
        }
        if names.len() != n {
            return Err(Error::InvalidGroup(format!(
                "{} names for a table with {n} rows",
                names.len()
            )));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroup(format!(
                    "row {i} has length {}",
                    row.len()
                )));
            }
            if !is_permutation(row.iter().copied(), n) {
                return Err(Error::InvalidGroup(format!("row {i} is not a permutation")));
            }
        }
        for j in 0..n {
            if !is_permutation(table.iter().map(|row| row[j]), n) {
                return Err(Error::InvalidGroup(format!(
                    "column {j} is not a permutation"
                )));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::InvalidGroup("no identity element".into()))?;
        let mut inverses = Vec::with_capacity(n);
        for x in 0..n {
            let y = (0..n)
                .find(|&y| table[x][y] == identity)
                .ok_or_else(|| Error::InvalidGroup(format!("element {x} has no inverse")))?;
            if table[y][x] != identity {
                return Err(Error::InvalidGroup(format!(
                    "element {x} has no two-sided inverse"
                )));
            }
            inverses.push(y);
        }
        if n <= 256 {
            for a in 0..n {
                for b in 0..n {
                    let ab = table[a][b];
                    for c in 0..n {
                        if table[ab][c] != table[a][table[b][c]] {
                            return Err(Error::InvalidGroup(format!(
                                "associativity fails for ({a}, {b}, {c})"
                            )));
                        }
                    }
                }
            }
        }
        let abelian = (0..n).all(|a| (0..n).all(|b| table[a][b] == table[b][a]));
        Ok(FiniteTable {
            names,
            table,
            identity,
            inverses,
            abelian,
        })
    }

    /// The symmetric group `S₃` with elements listed as permutations of `{1,2,3}`
    /// in one-line notation; multiplication is composition `(στ)(x) = σ(τ(x))`.
    pub fn symmetric_group_3() -> Self {
        let perms: Vec<[usize; 3]> = vec![
            [0, 1, 2],
            [1, 0, 2],
            [0, 2, 1],
            [2, 1, 0],
            [1, 2, 0],
            [2, 0, 1],
        ];
        let names = vec!["e", "(12)", "(23)", "(13)", "(123)", "(132)"]
            .into_iter()
            .map(String::from)
            .collect();
        let index = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let table = perms
            .iter()
            .map(|s| {
                perms
                    .iter()
                    .map(|t| index([s[t[0]], s[t[1]], s[t[2]]]))
                    .collect()
            })
            .collect();
        FiniteTable::new(names, table).expect("S3 table is a group")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn product(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverses[a]
    }

    pub fn is_abelian(&self) -> bool {
        self.abelian
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn is_permutation(values: impl Iterator<Item = usize>, n: usize) -> bool {
    let mut seen = vec![false; n];
    for v in values {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDescriptor::Trivial => write!(f, "1"),
            GroupDescriptor::Cyclic(n) => write!(f, "Z/{n}"),
            GroupDescriptor::FreeAbelian(n) => write!(f, "Z^{n}"),
            GroupDescriptor::Free(k) => write!(f, "F{k}"),
            GroupDescriptor::FiniteTable(t) => write!(f, "Table({})", t.order()),
            GroupDescriptor::Product(fs) => {
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl GroupDescriptor {
    pub fn cyclic(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroup("cyclic group of order 0".into()));
        }
        Ok(GroupDescriptor::Cyclic(n))
    }

    pub fn free(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGroup("free group needs rank >= 1".into()));
        }
        Ok(GroupDescriptor::Free(k))
    }

    pub fn product(factors: Vec<GroupDescriptor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidGroup(
                "product needs at least one factor".into(),
            ));
        }
        Ok(GroupDescriptor::Product(factors))
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupDescriptor::Trivial => GroupElement::Unit,
            GroupDescriptor::Cyclic(_) => GroupElement::Residue(0),
            GroupDescriptor::FreeAbelian(n) => GroupElement::Vector(vec![0; *n]),
            GroupDescriptor::Free(_) => GroupElement::Word(Vec::new()),
            GroupDescriptor::FiniteTable(t) => GroupElement::Index(t.identity),
            GroupDescriptor::Product(fs) => {
                GroupElement::Tuple(fs.iter().map(GroupDescriptor::identity).collect())
            }
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        *g == self.identity()
    }

    /// `Some(|G|)` for finite groups.
    pub fn order(&self) -> Option<usize> {
        match self {
            GroupDescriptor::Trivial => Some(1),
            GroupDescriptor::Cyclic(n) => usize::try_from(*n).ok(),
            GroupDescriptor::FreeAbelian(0) => Some(1),
            GroupDescriptor::FreeAbelian(_) | GroupDescriptor::Free(_) => None,
            GroupDescriptor::FiniteTable(t) => Some(t.order()),
            GroupDescriptor::Product(fs) => fs
                .iter()
                .try_fold(1usize, |acc, f| f.order().and_then(|o| acc.checked_mul(o))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.order().is_some()
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            GroupDescriptor::Trivial
            | GroupDescriptor::Cyclic(_)
            | GroupDescriptor::FreeAbelian(_) => true,
            GroupDescriptor::Free(k) => *k <= 1,
            GroupDescriptor::FiniteTable(t) => t.is_abelian(),
            GroupDescriptor::Product(fs) => fs.iter().all(GroupDescriptor::is_abelian),
        }
    }

    /// Orders of the cyclic factors when the group is a finite product of
    /// cyclic groups (the trivial group gives an empty list).
    pub fn cyclic_factors(&self) -> Option<Vec<u64>> {
        match self {
            GroupDescriptor::Trivial | GroupDescriptor::FreeAbelian(0) => Some(Vec::new()),
            GroupDescriptor::Cyclic(n) => Some(vec![*n]),
            GroupDescriptor::Product(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.cyclic_factors()?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Integer coordinates of `g` with respect to [`Self::cyclic_factors`].
    pub fn cyclic_coordinates(&self, g: &GroupElement) -> Option<Vec<u64>> {
        match (self, g) {
            (GroupDescriptor::Trivial, GroupElement::Unit) => Some(Vec::new()),
            (GroupDescriptor::FreeAbelian(0), GroupElement::Vector(v)) if v.is_empty() => {
                Some(Vec::new())
            }
            (GroupDescriptor::Cyclic(_), GroupElement::Residue(r)) => Some(vec![*r]),
            (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) if fs.len() == xs.len() => {
                let mut out = Vec::new();
                for (f, x) in fs.iter().zip(xs) {
                    out.extend(f.cyclic_coordinates(x)?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// Whether `g` is a canonical element of this group.
    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupDescriptor::Trivial, GroupElement::Unit) => true,
            (GroupDescriptor::Cyclic(n), GroupElement::Residue(r)) => r < n,
            (GroupDescriptor::FreeAbelian(n), GroupElement::Vector(v)) => v.len() == *n,
            (GroupDescriptor::Free(k), GroupElement::Word(w)) => {
                let k = *k as i32;
                w.iter().all(|&x| x != 0 && x.abs() <= k) && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupDescriptor::FiniteTable(t), GroupElement::Index(i)) => *i < t.order(),
            (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) => {
                fs.len() == xs.len() && fs.iter().zip(xs).all(|(f, x)| f.contains(x))
            }
            _ => false,
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(Error::mismatched(self, g))
        }
    }

    /// Brings a payload of the right shape into canonical form: residues are
    /// reduced and free words freely reduced.
    pub fn canonicalize(&self, g: &GroupElement) -> Result<GroupElement> {
        match (self, g) {
            (GroupDescriptor::Trivial, GroupElement::Unit) => Ok(GroupElement::Unit),
            (GroupDescriptor::Cyclic(n), GroupElement::Residue(r)) => {
                Ok(GroupElement::Residue(r % n))
            }
            (GroupDescriptor::FreeAbelian(n), GroupElement::Vector(v)) if v.len() == *n => {
                Ok(g.clone())
            }
            (GroupDescriptor::Free(k), GroupElement::Word(w)) => {
                let k = *k as i32;
                if w.iter().any(|&x| x == 0 || x.abs() > k) {
                    return Err(Error::mismatched(self, g));
                }
                Ok(GroupElement::Word(reduce_word(w.iter().copied())))
            }
            (GroupDescriptor::FiniteTable(t), GroupElement::Index(i)) if *i < t.order() => {
                Ok(g.clone())
            }
            (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) if fs.len() == xs.len() => fs
                .iter()
                .zip(xs)
                .map(|(f, x)| f.canonicalize(x))
                .collect::<Result<Vec<_>>>()
                .map(GroupElement::Tuple),
            _ => Err(Error::mismatched(self, g)),
        }
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.multiply_unchecked(g, h))
    }

    fn multiply_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        match (self, g, h) {
            (GroupDescriptor::Cyclic(n), GroupElement::Residue(a), GroupElement::Residue(b)) => {
                GroupElement::Residue(((*a as u128 + *b as u128) % *n as u128) as u64)
            }
            (GroupDescriptor::FreeAbelian(_), GroupElement::Vector(a), GroupElement::Vector(b)) => {
                GroupElement::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupDescriptor::Free(_), GroupElement::Word(a), GroupElement::Word(b)) => {
                GroupElement::Word(reduce_word(a.iter().chain(b).copied()))
            }
            (GroupDescriptor::FiniteTable(t), GroupElement::Index(a), GroupElement::Index(b)) => {
                GroupElement::Index(t.product(*a, *b))
            }
            (GroupDescriptor::Product(fs), GroupElement::Tuple(a), GroupElement::Tuple(b)) => {
                GroupElement::Tuple(
                    fs.iter()
                        .zip(a.iter().zip(b))
                        .map(|(f, (x, y))| f.multiply_unchecked(x, y))
                        .collect(),
                )
            }
            _ => GroupElement::Unit,
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        Ok(self.inverse_unchecked(g))
    }

    fn inverse_unchecked(&self, g: &GroupElement) -> GroupElement {
        match (self, g) {
            (GroupDescriptor::Cyclic(n), GroupElement::Residue(a)) => {
                GroupElement::Residue((n - a) % n)
            }
            (GroupDescriptor::FreeAbelian(_), GroupElement::Vector(a)) => {
                GroupElement::Vector(a.iter().map(|x| -x).collect())
            }
            (GroupDescriptor::Free(_), GroupElement::Word(w)) => {
                GroupElement::Word(w.iter().rev().map(|x| -x).collect())
            }
            (GroupDescriptor::FiniteTable(t), GroupElement::Index(a)) => {
                GroupElement::Index(t.inverse(*a))
            }
            (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) => GroupElement::Tuple(
                fs.iter()
                    .zip(xs)
                    .map(|(f, x)| f.inverse_unchecked(x))
                    .collect(),
            ),
            _ => GroupElement::Unit,
        }
    }

    /// `g^e` by repeated squaring; negative exponents use the inverse.
    pub fn pow(&self, g: &GroupElement, e: i64) -> Result<GroupElement> {
        self.check(g)?;
        let base = if e < 0 {
            self.inverse_unchecked(g)
        } else {
            g.clone()
        };
        let mut exp = e.unsigned_abs();
        let mut acc = self.identity();
        let mut sq = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.multiply_unchecked(&acc, &sq);
            }
            exp >>= 1;
            if exp > 0 {
                sq = self.multiply_unchecked(&sq, &sq);
            }
        }
        Ok(acc)
    }

    /// All elements of a finite group, identity first, then table order
    /// (lexicographic over factors for products).
    pub fn enumerate(&self) -> Result<Vec<GroupElement>> {
        match self {
            GroupDescriptor::Trivial => Ok(vec![GroupElement::Unit]),
            GroupDescriptor::Cyclic(n) => Ok((0..*n).map(GroupElement::Residue).collect()),
            GroupDescriptor::FreeAbelian(0) => Ok(vec![GroupElement::Vector(Vec::new())]),
            GroupDescriptor::FreeAbelian(_) | GroupDescriptor::Free(_) => {
                Err(Error::InfiniteGroup(self.to_string()))
            }
            GroupDescriptor::FiniteTable(t) => {
                let e = t.identity();
                Ok(std::iter::once(e)
                    .chain((0..t.order()).filter(|&i| i != e))
                    .map(GroupElement::Index)
                    .collect())
            }
            GroupDescriptor::Product(fs) => {
                let mut acc: Vec<Vec<GroupElement>> = vec![Vec::new()];
                for f in fs {
                    let elems = f.enumerate()?;
                    acc = acc
                        .into_iter()
                        .flat_map(|prefix| {
                            elems.iter().map(move |x| {
                                let mut p = prefix.clone();
                                p.push(x.clone());
                                p
                            })
                        })
                        .collect();
                }
                Ok(acc.into_iter().map(GroupElement::Tuple).collect())
            }
        }
    }

    /// Lookup table from element to its position in [`Self::enumerate`].
    pub fn element_index(&self) -> Result<HashMap<GroupElement, usize>> {
        Ok(self
            .enumerate()?
            .into_iter()
            .enumerate()
            .map(|(i, g)| (g, i))
            .collect())
    }

    /// Number of image slots a homomorphism out of this group needs: one per
    /// generator, or one per element for table groups.
    pub fn generator_count(&self) -> usize {
        match self {
            GroupDescriptor::Trivial => 0,
            GroupDescriptor::Cyclic(_) => 1,
            GroupDescriptor::FreeAbelian(n) => *n,
            GroupDescriptor::Free(k) => *k,
            GroupDescriptor::FiniteTable(t) => t.order(),
            GroupDescriptor::Product(fs) => fs.iter().map(GroupDescriptor::generator_count).sum(),
        }
    }

    /// Generators in the order matching [`Self::generator_count`].
    pub fn generators(&self) -> Vec<GroupElement> {
        match self {
            GroupDescriptor::Trivial => Vec::new(),
            GroupDescriptor::Cyclic(n) => vec![GroupElement::Residue(1 % n)],
            GroupDescriptor::FreeAbelian(n) => (0..*n)
                .map(|k| {
                    let mut v = vec![0; *n];
                    v[k] = 1;
                    GroupElement::Vector(v)
                })
                .collect(),
            GroupDescriptor::Free(k) => (1..=*k as i32)
                .map(|j| GroupElement::Word(vec![j]))
                .collect(),
            GroupDescriptor::FiniteTable(t) => (0..t.order()).map(GroupElement::Index).collect(),
            GroupDescriptor::Product(fs) => {
                let mut out = Vec::new();
                for (j, f) in fs.iter().enumerate() {
                    for g in f.generators() {
                        out.push(self.embed_factor(j, g));
                    }
                }
                out
            }
        }
    }

    fn embed_factor(&self, j: usize, g: GroupElement) -> GroupElement {
        match self {
            GroupDescriptor::Product(fs) => {
                let mut xs: Vec<GroupElement> = fs.iter().map(GroupDescriptor::identity).collect();
                xs[j] = g;
                GroupElement::Tuple(xs)
            }
            _ => g,
        }
    }

    /// Sup-norm length of an element of `ℤⁿ` (word length in the cube metric).
    pub fn sup_norm(g: &GroupElement) -> Option<u64> {
        match g {
            GroupElement::Vector(v) => Some(v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)),
            _ => None,
        }
    }
}

fn reduce_word(letters: impl Iterator<Item = i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::new();
    for x in letters {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// A group homomorphism determined by generator images (or, for table groups,
/// by the full element map). Relations are verified on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Homomorphism {
    source: GroupDescriptor,
    target: GroupDescriptor,
    images: Vec<GroupElement>,
}

impl Homomorphism {
    pub fn new(
        source: GroupDescriptor,
        target: GroupDescriptor,
        images: Vec<GroupElement>,
    ) -> Result<Self> {
        let needed = source.generator_count();
        if images.len() < needed {
            return Err(Error::UndefinedGenerator {
                group: source.to_string(),
                index: images.len(),
            });
        }
        if images.len() > needed {
            return Err(Error::NotAHomomorphism(format!(
                "{} images given for {needed} generators of {source}",
                images.len()
            )));
        }
        let images = images
            .iter()
            .map(|g| target.canonicalize(g))
            .collect::<Result<Vec<_>>>()?;
        check_relations(&source, &target, &images)?;
        Ok(Homomorphism {
            source,
            target,
            images,
        })
    }

    pub fn identity(group: GroupDescriptor) -> Self {
        let images = group.generators();
        Homomorphism {
            source: group.clone(),
            target: group,
            images,
        }
    }

    /// Coordinatewise reduction `ℤⁿ → (ℤ/N)ⁿ` (the target is `ℤ/N` when `n = 1`).
    pub fn reduction(rank: usize, modulus: u64) -> Result<Self> {
        let target = reduction_target(rank, modulus)?;
        let images = (0..rank)
            .map(|k| {
                if rank == 1 {
                    GroupElement::Residue(1 % modulus)
                } else {
                    let mut xs = vec![GroupElement::Residue(0); rank];
                    xs[k] = GroupElement::Residue(1 % modulus);
                    GroupElement::Tuple(xs)
                }
            })
            .collect();
        Homomorphism::new(GroupDescriptor::FreeAbelian(rank), target, images)
    }

    pub fn source(&self) -> &GroupDescriptor {
        &self.source
    }

    pub fn target(&self) -> &GroupDescriptor {
        &self.target
    }

    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    pub fn apply(&self, g: &GroupElement) -> Result<GroupElement> {
        self.source.check(g)?;
        evaluate(&self.source, &self.target, &self.images, g)
    }

    /// `true` iff no element of `set` other than the identity lies in the kernel.
    pub fn kernel_avoids<'a>(
        &self,
        set: impl IntoIterator<Item = &'a GroupElement>,
    ) -> Result<bool> {
        for g in set {
            if !self.source.is_identity(g) && self.target.is_identity(&self.apply(g)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Injectivity on `S`, i.e. the kernel avoids `S·S⁻¹`.
    pub fn is_injective_on(&self, set: &[GroupElement]) -> Result<bool> {
        let mut seen = HashMap::with_capacity(set.len());
        for g in set {
            let image = self.apply(g)?;
            if let Some(prev) = seen.insert(image, g) {
                if prev != g {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Injectivity on the whole (finite) source.
    pub fn is_injective(&self) -> Result<bool> {
        let elems = self.source.enumerate()?;
        self.is_injective_on(&elems)
    }
}

pub(crate) fn reduction_target(rank: usize, modulus: u64) -> Result<GroupDescriptor> {
    let cyclic = GroupDescriptor::cyclic(modulus)?;
    Ok(match rank {
        0 => GroupDescriptor::Trivial,
        1 => cyclic,
        _ => GroupDescriptor::Product(vec![cyclic; rank]),
    })
}

fn evaluate(
    source: &GroupDescriptor,
    target: &GroupDescriptor,
    images: &[GroupElement],
    g: &GroupElement,
) -> Result<GroupElement> {
    match (source, g) {
        (GroupDescriptor::Trivial, _) => Ok(target.identity()),
        (GroupDescriptor::Cyclic(_), GroupElement::Residue(r)) => target.pow(&images[0], *r as i64),
        (GroupDescriptor::FreeAbelian(_), GroupElement::Vector(v)) => {
            let mut acc = target.identity();
            for (img, &e) in images.iter().zip(v) {
                acc = target.multiply(&acc, &target.pow(img, e)?)?;
            }
            Ok(acc)
        }
        (GroupDescriptor::Free(_), GroupElement::Word(w)) => {
            let mut acc = target.identity();
            for &x in w {
                let img = &images[(x.unsigned_abs() - 1) as usize];
                let letter = if x > 0 {
                    img.clone()
                } else {
                    target.inverse(img)?
                };
                acc = target.multiply(&acc, &letter)?;
            }
            Ok(acc)
        }
        (GroupDescriptor::FiniteTable(_), GroupElement::Index(i)) => Ok(images[*i].clone()),
        (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) => {
            let mut acc = target.identity();
            let mut offset = 0;
            for (f, x) in fs.iter().zip(xs) {
                let count = f.generator_count();
                let part = evaluate(f, target, &images[offset..offset + count], x)?;
                acc = target.multiply(&acc, &part)?;
                offset += count;
            }
            Ok(acc)
        }
        _ => Err(Error::mismatched(source, g)),
    }
}

fn check_relations(
    source: &GroupDescriptor,
    target: &GroupDescriptor,
    images: &[GroupElement],
) -> Result<()> {
    let commute = |a: &GroupElement, b: &GroupElement| -> Result<bool> {
        Ok(target.multiply(a, b)? == target.multiply(b, a)?)
    };
    match source {
        GroupDescriptor::Trivial | GroupDescriptor::Free(_) => Ok(()),
        GroupDescriptor::Cyclic(n) => {
            if target.is_identity(&target.pow(&images[0], *n as i64)?) {
                Ok(())
            } else {
                Err(Error::NotAHomomorphism(format!(
                    "image of the generator of Z/{n} does not have order dividing {n}"
                )))
            }
        }
        GroupDescriptor::FreeAbelian(_) => {
            for (i, a) in images.iter().enumerate() {
                for b in &images[i + 1..] {
                    if !commute(a, b)? {
                        return Err(Error::NotAHomomorphism(
                            "images of free abelian generators do not commute".into(),
                        ));
                    }
                }
            }
            Ok(())
        }
        GroupDescriptor::FiniteTable(t) => {
            for a in 0..t.order() {
                for b in 0..t.order() {
                    let lhs = &images[t.product(a, b)];
                    let rhs = target.multiply(&images[a], &images[b])?;
                    if *lhs != rhs {
                        return Err(Error::NotAHomomorphism(format!(
                            "phi({a}*{b}) != phi({a})*phi({b})"
                        )));
                    }
                }
            }
            Ok(())
        }
        GroupDescriptor::Product(fs) => {
            let mut offset = 0;
            let mut slices = Vec::with_capacity(fs.len());
            for f in fs {
                let count = f.generator_count();
                let part = &images[offset..offset + count];
                check_relations(f, target, part)?;
                slices.push(part);
                offset += count;
            }
            for (i, a) in slices.iter().enumerate() {
                for b in &slices[i + 1..] {
                    for x in a.iter() {
                        for y in b.iter() {
                            if !commute(x, y)? {
                                return Err(Error::NotAHomomorphism(
                                    "images of different product factors do not commute".into(),
                                ));
                            }
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3() -> GroupDescriptor {
        GroupDescriptor::FiniteTable(Arc::new(FiniteTable::symmetric_group_3()))
    }

    fn word(w: &[i32]) -> GroupElement {
        GroupElement::Word(w.to_vec())
    }

    #[test]
    fn free_group_cancellation() {
        let g = GroupDescriptor::Free(2);
        assert_eq!(g.multiply(&word(&[1]), &word(&[-1])).unwrap(), g.identity());
        assert_eq!(
            g.multiply(&word(&[1, 2]), &word(&[-2, 1])).unwrap(),
            word(&[1, 1])
        );
    }

    #[test]
    fn free_abelian_and_cyclic_products() {
        let z2 = GroupDescriptor::FreeAbelian(2);
        let p = z2
            .multiply(
                &GroupElement::Vector(vec![1, 0]),
                &GroupElement::Vector(vec![0, 3]),
            )
            .unwrap();
        assert_eq!(p, GroupElement::Vector(vec![1, 3]));
        let c4 = GroupDescriptor::Cyclic(4);
        assert_eq!(
            c4.multiply(&GroupElement::Residue(3), &GroupElement::Residue(2))
                .unwrap(),
            GroupElement::Residue(1)
        );
    }

    #[test]
    fn inverses() {
        assert_eq!(
            GroupDescriptor::Free(1).inverse(&word(&[1, 1])).unwrap(),
            word(&[-1, -1])
        );
        assert_eq!(
            GroupDescriptor::Cyclic(5)
                .inverse(&GroupElement::Residue(2))
                .unwrap(),
            GroupElement::Residue(3)
        );
        let g = s3();
        let transposition = GroupElement::Index(1);
        assert_eq!(g.inverse(&transposition).unwrap(), transposition);
        let three_cycle = GroupElement::Index(4);
        assert_eq!(g.inverse(&three_cycle).unwrap(), GroupElement::Index(5));
    }

    #[test]
    fn mismatched_payloads_are_rejected() {
        let c4 = GroupDescriptor::Cyclic(4);
        assert!(matches!(
            c4.multiply(&GroupElement::Residue(1), &word(&[1])),
            Err(Error::MismatchedGroup { .. })
        ));
        assert!(c4.inverse(&GroupElement::Residue(4)).is_err());
        let f2 = GroupDescriptor::Free(2);
        assert!(f2.multiply(&word(&[3]), &word(&[1])).is_err());
        assert!(f2.multiply(&word(&[1, -1]), &word(&[1])).is_err());
        assert!(GroupDescriptor::FreeAbelian(2)
            .inverse(&GroupElement::Vector(vec![1]))
            .is_err());
    }

    #[test]
    fn enumeration_order() {
        assert_eq!(
            GroupDescriptor::Cyclic(3).enumerate().unwrap(),
            vec![
                GroupElement::Residue(0),
                GroupElement::Residue(1),
                GroupElement::Residue(2)
            ]
        );
        let klein =
            GroupDescriptor::Product(vec![GroupDescriptor::Cyclic(2), GroupDescriptor::Cyclic(2)]);
        let elems = klein.enumerate().unwrap();
        assert_eq!(elems.len(), 4);
        assert_eq!(elems[0], klein.identity());
        let s = s3().enumerate().unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], s3().identity());
        assert!(matches!(
            GroupDescriptor::FreeAbelian(1).enumerate(),
            Err(Error::InfiniteGroup(_))
        ));
        assert!(GroupDescriptor::Free(2).enumerate().is_err());
    }

    #[test]
    fn table_with_identity_not_first_is_enumerated_identity_first() {
        // Z/2 with the identity stored at index 1.
        let t =
            FiniteTable::new(vec!["a".into(), "e".into()], vec![vec![1, 0], vec![0, 1]]).unwrap();
        let g = GroupDescriptor::FiniteTable(Arc::new(t));
        assert_eq!(
            g.enumerate().unwrap(),
            vec![GroupElement::Index(1), GroupElement::Index(0)]
        );
    }

    #[test]
    fn malformed_tables_fail_fast() {
        let not_latin =
            FiniteTable::new(vec!["e".into(), "a".into()], vec![vec![0, 1], vec![1, 1]]);
        assert!(matches!(not_latin, Err(Error::InvalidGroup(_))));
        let ragged = FiniteTable::new(vec!["e".into(), "a".into()], vec![vec![0, 1], vec![1]]);
        assert!(ragged.is_err());
        // x*y = -x-y mod 3: a Latin square without identity.
        let no_id = FiniteTable::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec![0, 2, 1], vec![2, 1, 0], vec![1, 0, 2]],
        );
        assert!(matches!(no_id, Err(Error::InvalidGroup(_))));
        // Latin square with identity but not associative (order 5 loop).
        let loop5 = FiniteTable::new(
            (0..5).map(|i| i.to_string()).collect(),
            vec![
                vec![0, 1, 2, 3, 4],
                vec![1, 0, 3, 4, 2],
                vec![2, 4, 0, 1, 3],
                vec![3, 2, 4, 0, 1],
                vec![4, 3, 1, 2, 0],
            ],
        );
        assert!(loop5.is_err());
        assert!(GroupDescriptor::cyclic(0).is_err());
    }

    #[test]
    fn reduction_mod_four() {
        let phi = Homomorphism::new(
            GroupDescriptor::FreeAbelian(1),
            GroupDescriptor::Cyclic(4),
            vec![GroupElement::Residue(1)],
        )
        .unwrap();
        assert_eq!(
            phi.apply(&GroupElement::Vector(vec![6])).unwrap(),
            GroupElement::Residue(2)
        );
        assert_eq!(
            phi.apply(&GroupElement::Vector(vec![-1])).unwrap(),
            GroupElement::Residue(3)
        );
        assert_eq!(
            phi.apply(&GroupElement::Vector(vec![0])).unwrap(),
            GroupElement::Residue(0)
        );
        assert_eq!(Homomorphism::reduction(1, 4).unwrap(), phi);
    }

    #[test]
    fn free_group_onto_s3() {
        // a ↦ (12), b ↦ (123); (12)(123) as composition x ↦ (12)((123)(x)):
        // 1 → 2 → 1, 2 → 3 → 3, 3 → 1 → 2, i.e. the transposition (23).
        let g = s3();
        let phi = Homomorphism::new(
            GroupDescriptor::Free(2),
            g.clone(),
            vec![GroupElement::Index(1), GroupElement::Index(4)],
        )
        .unwrap();
        assert_eq!(phi.apply(&word(&[1, 2])).unwrap(), GroupElement::Index(2));
        assert_eq!(phi.apply(&word(&[])).unwrap(), g.identity());
        assert_eq!(phi.apply(&word(&[2, 2, 2])).unwrap(), g.identity());
    }

    #[test]
    fn homomorphism_construction_errors() {
        let missing = Homomorphism::new(
            GroupDescriptor::Free(2),
            GroupDescriptor::Cyclic(3),
            vec![GroupElement::Residue(1)],
        );
        assert!(matches!(
            missing,
            Err(Error::UndefinedGenerator { index: 1, .. })
        ));
        // 1 ∈ Z/4 does not have order dividing 2.
        let bad_order = Homomorphism::new(
            GroupDescriptor::Cyclic(2),
            GroupDescriptor::Cyclic(4),
            vec![GroupElement::Residue(1)],
        );
        assert!(matches!(bad_order, Err(Error::NotAHomomorphism(_))));
        let non_commuting = Homomorphism::new(
            GroupDescriptor::FreeAbelian(2),
            s3(),
            vec![GroupElement::Index(1), GroupElement::Index(4)],
        );
        assert!(non_commuting.is_err());
        let wrong_target = Homomorphism::new(
            GroupDescriptor::Cyclic(2),
            GroupDescriptor::Cyclic(4),
            vec![word(&[1])],
        );
        assert!(wrong_target.is_err());
    }

    #[test]
    fn embedding_and_injectivity() {
        let phi = Homomorphism::new(
            GroupDescriptor::Cyclic(2),
            GroupDescriptor::Cyclic(4),
            vec![GroupElement::Residue(2)],
        )
        .unwrap();
        assert!(phi.is_injective().unwrap());
        let red = Homomorphism::reduction(1, 4).unwrap();
        let set: Vec<_> = (-1..=1).map(|x| GroupElement::Vector(vec![x])).collect();
        assert!(red.is_injective_on(&set).unwrap());
        let wide: Vec<_> = (-2..=2).map(|x| GroupElement::Vector(vec![x])).collect();
        assert!(!red.is_injective_on(&wide).unwrap());
        assert!(red.kernel_avoids(&set).unwrap());
        assert!(!red.kernel_avoids(&[GroupElement::Vector(vec![4])]).unwrap());
    }

    #[test]
    fn product_generators_and_reduction() {
        let phi = Homomorphism::reduction(2, 3).unwrap();
        let img = phi.apply(&GroupElement::Vector(vec![4, -1])).unwrap();
        assert_eq!(
            img,
            GroupElement::Tuple(vec![GroupElement::Residue(1), GroupElement::Residue(2)])
        );
        let target = phi.target().clone();
        assert_eq!(target.order(), Some(9));
        assert_eq!(target.cyclic_factors(), Some(vec![3, 3]));
        assert_eq!(target.cyclic_coordinates(&img), Some(vec![1, 2]));
    }

    #[test]
    fn canonicalization_is_idempotent() {
        let g = GroupDescriptor::Free(2);
        let c = g.canonicalize(&word(&[1, 2, -2, -1, 2])).unwrap();
        assert_eq!(c, word(&[2]));
        assert_eq!(g.canonicalize(&c).unwrap(), c);
        let z = GroupDescriptor::Cyclic(5);
        assert_eq!(
            z.canonicalize(&GroupElement::Residue(12)).unwrap(),
            GroupElement::Residue(2)
        );
    }
}
