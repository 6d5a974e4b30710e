//! JSON input formats: groups, elements, ring elements, matrices, schemes,
//! problems and chain complexes.
//!
//! Group elements are written in a payload that depends on the group:
//! `null` for the trivial group, an integer residue for `ℤ/N`, an integer
//! array for `ℤⁿ`, a word such as `"a b^-1"` for free groups, an index or
//! element name for table groups, and an array of payloads for products.

use std::sync::Arc;

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::cw::ChainComplexSpec;
use crate::error::{Error, Result};
use crate::groups::{FiniteTable, GroupDescriptor, GroupElement, Homomorphism};
use crate::scalar::{parse_rational, rational_to_string};
use crate::schemes::{FolnerExhaustion, QuotientTower, Scheme};
use crate::{GaussianRational, RingElement, RingMatrix};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn parse_group(v: &Value) -> Result<GroupDescriptor> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("group needs a string \"type\""))?;
    let uint = |key: &str| {
        v.get(key).and_then(Value::as_u64).ok_or_else(|| {
            parse_err(format!(
                "{kind} group needs a nonnegative integer \"{key}\""
            ))
        })
    };
    match kind {
        "trivial" => Ok(GroupDescriptor::Trivial),
        "cyclic" => GroupDescriptor::cyclic(uint("n")?),
        "free_abelian" => Ok(GroupDescriptor::FreeAbelian(uint("rank")? as usize)),
        "free" => GroupDescriptor::free(uint("rank")? as usize),
        "finite_table" => {
            #[derive(Deserialize)]
            struct Table {
                names: Option<Vec<String>>,
                table: Vec<Vec<usize>>,
            }
            let t: Table =
                serde_json::from_value(v.clone()).map_err(|e| parse_err(e.to_string()))?;
            let names = t
                .names
                .unwrap_or_else(|| (0..t.table.len()).map(|i| format!("g{i}")).collect());
            Ok(GroupDescriptor::FiniteTable(Arc::new(FiniteTable::new(
                names, t.table,
            )?)))
        }
        "product" => {
            let factors = v
                .get("factors")
                .and_then(Value::as_array)
                .ok_or_else(|| parse_err("product group needs \"factors\""))?;
            GroupDescriptor::product(factors.iter().map(parse_group).collect::<Result<_>>()?)
        }
        other => Err(parse_err(format!("unknown group type \"{other}\""))),
    }
}

pub fn group_to_json(g: &GroupDescriptor) -> Value {
    match g {
        GroupDescriptor::Trivial => json!({"type": "trivial"}),
        GroupDescriptor::Cyclic(n) => json!({"type": "cyclic", "n": n}),
        GroupDescriptor::FreeAbelian(n) => json!({"type": "free_abelian", "rank": n}),
        GroupDescriptor::Free(k) => json!({"type": "free", "rank": k}),
        GroupDescriptor::FiniteTable(t) => {
            json!({"type": "finite_table", "names": t.names(), "table": t.table()})
        }
        GroupDescriptor::Product(fs) => {
            json!({"type": "product", "factors": fs.iter().map(group_to_json).collect::<Vec<_>>()})
        }
    }
}

fn generator_letter(k: usize, rank: usize) -> String {
    if rank <= 26 {
        char::from(b'a' + (k - 1) as u8).to_string()
    } else {
        format!("a{k}")
    }
}

fn parse_letter(token: &str, rank: usize) -> Result<(usize, i64)> {
    let (name, exp) = if let Some(base) = token.strip_suffix("⁻¹") {
        (base, -1)
    } else if let Some((base, e)) = token.split_once('^') {
        let e: i64 = e
            .parse()
            .map_err(|_| parse_err(format!("bad exponent in \"{token}\"")))?;
        (base, e)
    } else {
        (token, 1)
    };
    let index = if rank <= 26 && name.len() == 1 && name.as_bytes()[0].is_ascii_lowercase() {
        (name.as_bytes()[0] - b'a') as usize + 1
    } else {
        name.strip_prefix('a')
            .and_then(|k| k.parse::<usize>().ok())
            .ok_or_else(|| parse_err(format!("unknown generator \"{name}\"")))?
    };
    if index == 0 || index > rank {
        return Err(Error::UndefinedGenerator {
            group: GroupDescriptor::Free(rank).to_string(),
            index,
        });
    }
    Ok((index, exp))
}

fn parse_word(s: &str, rank: usize) -> Result<Vec<i32>> {
    let mut letters = Vec::new();
    for token in s.split_whitespace().filter(|t| *t != "1" && *t != "e") {
        let (index, exp) = parse_letter(token, rank)?;
        let letter = if exp < 0 {
            -(index as i32)
        } else {
            index as i32
        };
        letters.extend(std::iter::repeat_n(letter, exp.unsigned_abs() as usize));
    }
    Ok(letters)
}

pub fn parse_element(group: &GroupDescriptor, v: &Value) -> Result<GroupElement> {
    let bad = || parse_err(format!("element {v} does not belong to {group}"));
    let g = match group {
        GroupDescriptor::Trivial => GroupElement::Unit,
        GroupDescriptor::Cyclic(n) => {
            let r = v.as_i64().ok_or_else(bad)?;
            GroupElement::Residue(r.rem_euclid(*n as i64) as u64)
        }
        GroupDescriptor::FreeAbelian(_) => {
            let xs = v.as_array().ok_or_else(bad)?;
            GroupElement::Vector(
                xs.iter()
                    .map(|x| x.as_i64().ok_or_else(bad))
                    .collect::<Result<_>>()?,
            )
        }
        GroupDescriptor::Free(k) => match v {
            Value::String(s) => GroupElement::Word(parse_word(s, *k)?),
            Value::Array(xs) => GroupElement::Word(
                xs.iter()
                    .map(|x| x.as_i64().map(|x| x as i32).ok_or_else(bad))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad()),
        },
        GroupDescriptor::FiniteTable(t) => match v {
            Value::String(s) => GroupElement::Index(t.position(s).ok_or_else(bad)?),
            _ => GroupElement::Index(v.as_u64().ok_or_else(bad)? as usize),
        },
        GroupDescriptor::Product(fs) => {
            let xs = v
                .as_array()
                .filter(|xs| xs.len() == fs.len())
                .ok_or_else(bad)?;
            GroupElement::Tuple(
                fs.iter()
                    .zip(xs)
                    .map(|(f, x)| parse_element(f, x))
                    .collect::<Result<_>>()?,
            )
        }
    };
    group.canonicalize(&g)
}

pub fn element_to_json(group: &GroupDescriptor, g: &GroupElement) -> Value {
    match (group, g) {
        (_, GroupElement::Unit) => Value::Null,
        (_, GroupElement::Residue(r)) => json!(r),
        (_, GroupElement::Vector(v)) => json!(v),
        (GroupDescriptor::Free(k), GroupElement::Word(w)) => {
            let tokens: Vec<String> = w
                .iter()
                .map(|&x| {
                    let name = generator_letter(x.unsigned_abs() as usize, *k);
                    if x < 0 {
                        format!("{name}^-1")
                    } else {
                        name
                    }
                })
                .collect();
            json!(tokens.join(" "))
        }
        (_, GroupElement::Word(w)) => json!(w),
        (_, GroupElement::Index(i)) => json!(i),
        (GroupDescriptor::Product(fs), GroupElement::Tuple(xs)) => Value::Array(
            fs.iter()
                .zip(xs)
                .map(|(f, x)| element_to_json(f, x))
                .collect(),
        ),
        (_, GroupElement::Tuple(xs)) => Value::Array(
            xs.iter()
                .map(|x| element_to_json(&GroupDescriptor::Trivial, x))
                .collect(),
        ),
    }
}

fn parse_rational_value(v: Option<&Value>, what: &str) -> Result<BigRational> {
    match v {
        None | Some(Value::Null) => Ok(BigRational::zero()),
        Some(Value::String(s)) => {
            parse_rational(s).ok_or_else(|| parse_err(format!("bad {what} \"{s}\"")))
        }
        Some(Value::Number(n)) => {
            parse_rational(&n.to_string()).ok_or_else(|| parse_err(format!("bad {what} {n}")))
        }
        Some(other) => Err(parse_err(format!("bad {what} {other}"))),
    }
}

/// A list of `{"word": <payload>, "re": "p/q", "im": "p/q"}` terms; `im`
/// defaults to zero.
pub fn parse_ring_element(group: &GroupDescriptor, v: &Value) -> Result<RingElement> {
    let terms = v
        .as_array()
        .ok_or_else(|| parse_err("ring element must be a list of terms"))?;
    let parsed = terms
        .iter()
        .map(|t| {
            let word = t
                .get("word")
                .ok_or_else(|| parse_err("term needs \"word\""))?;
            let g = parse_element(group, word)?;
            let re = parse_rational_value(t.get("re"), "real part")?;
            let im = parse_rational_value(t.get("im"), "imaginary part")?;
            Ok((g, Complex::new(re, im)))
        })
        .collect::<Result<Vec<(GroupElement, GaussianRational)>>>()?;
    RingElement::from_terms(group.clone(), parsed)
}

pub fn ring_element_to_json(x: &RingElement) -> Value {
    let mut terms: Vec<(String, Value)> = x
        .terms()
        .map(|(g, c)| {
            let word = element_to_json(x.group(), g);
            let mut t = json!({"word": word, "re": rational_to_string(&c.re)});
            if !c.im.is_zero() {
                t["im"] = json!(rational_to_string(&c.im));
            }
            (word.to_string(), t)
        })
        .collect();
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    Value::Array(terms.into_iter().map(|(_, t)| t).collect())
}

/// `{"rows": d, "cols": d2, "entries": [[<ring element>, …], …]}`.
pub fn parse_matrix(group: &GroupDescriptor, v: &Value) -> Result<RingMatrix> {
    let rows = v
        .get("rows")
        .and_then(Value::as_u64)
        .ok_or_else(|| parse_err("matrix needs \"rows\""))? as usize;
    let cols = v
        .get("cols")
        .and_then(Value::as_u64)
        .ok_or_else(|| parse_err("matrix needs \"cols\""))? as usize;
    let entries = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("matrix needs \"entries\""))?;
    if entries.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "{} entry rows for {rows} rows",
            entries.len()
        )));
    }
    let parsed = entries
        .iter()
        .map(|row| {
            let row = row
                .as_array()
                .ok_or_else(|| parse_err("matrix row must be a list"))?;
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row of length {} for {cols} columns",
                    row.len()
                )));
            }
            row.iter().map(|e| parse_ring_element(group, e)).collect()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    if rows == 0 || cols == 0 {
        return Ok(RingMatrix::zeros(group.clone(), rows, cols));
    }
    RingMatrix::from_rows(group.clone(), parsed)
}

pub fn matrix_to_json(m: &RingMatrix) -> Value {
    let entries: Vec<Value> = (0..m.rows())
        .map(|i| {
            Value::Array(
                (0..m.cols())
                    .map(|j| ring_element_to_json(m.get(i, j)))
                    .collect(),
            )
        })
        .collect();
    json!({"rows": m.rows(), "cols": m.cols(), "entries": entries})
}

/// `{"target": <group>, "images": [<payload>, …]}`.
pub fn parse_homomorphism(source: &GroupDescriptor, v: &Value) -> Result<Homomorphism> {
    let target = parse_group(
        v.get("target")
            .ok_or_else(|| parse_err("map needs \"target\""))?,
    )?;
    let images = v
        .get("images")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("map needs \"images\""))?
        .iter()
        .map(|x| parse_element(&target, x))
        .collect::<Result<_>>()?;
    Homomorphism::new(source.clone(), target, images)
}

/// `{"type": "tower", "levels": [8, 16, …]}` for `ℤⁿ`,
/// `{"type": "tower", "maps": [<map>, …]}` for any group,
/// `{"type": "folner", "boxes": [1, 2, 4, …]}` or `{"type": "folner", "sets": […]}`.
pub fn parse_scheme(group: &GroupDescriptor, v: &Value) -> Result<Scheme> {
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("scheme needs a string \"type\""))?;
    match kind {
        "tower" => {
            if let Some(maps) = v.get("maps").and_then(Value::as_array) {
                let levels = maps
                    .iter()
                    .map(|m| parse_homomorphism(group, m))
                    .collect::<Result<_>>()?;
                return Ok(Scheme::Tower(QuotientTower::new(group.clone(), levels)?));
            }
            let levels = u64_list(v, "levels")?;
            match group {
                GroupDescriptor::FreeAbelian(n) => {
                    Ok(Scheme::Tower(QuotientTower::cyclic(*n, &levels)?))
                }
                g if g.is_finite() => Ok(Scheme::Tower(QuotientTower::stationary(
                    g.clone(),
                    levels.len(),
                )?)),
                g => Err(parse_err(format!("tower over {g} needs explicit \"maps\""))),
            }
        }
        "folner" => {
            let rank = match group {
                GroupDescriptor::FreeAbelian(n) => *n,
                g => {
                    return Err(Error::WrongGroup {
                        expected: "free abelian group".into(),
                        found: g.to_string(),
                    })
                }
            };
            if let Some(sets) = v.get("sets") {
                let sets: Vec<Vec<Vec<i64>>> =
                    serde_json::from_value(sets.clone()).map_err(|e| parse_err(e.to_string()))?;
                return Ok(Scheme::Folner(FolnerExhaustion::from_sets(rank, sets)?));
            }
            Ok(Scheme::Folner(FolnerExhaustion::boxes(
                rank,
                &u64_list(v, "boxes")?,
            )?))
        }
        other => Err(parse_err(format!("unknown scheme type \"{other}\""))),
    }
}

fn u64_list(v: &Value, key: &str) -> Result<Vec<u64>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err(format!("scheme needs \"{key}\"")))?
        .iter()
        .map(|x| {
            x.as_u64()
                .ok_or_else(|| parse_err(format!("\"{key}\" must hold nonnegative integers")))
        })
        .collect()
}

/// Oracle choice in a problem file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OracleSpec {
    /// Torus-symbol quadrature over `ℤⁿ`.
    Torus { grid: Option<usize> },
    /// Exact characteristic polynomial over the trivial group.
    TrivialExact,
    /// Mahler measure of a 1×1 matrix over `ℤ`.
    Mahler,
}

/// A parsed problem file.
#[derive(Clone, Debug)]
pub struct Problem {
    pub group: GroupDescriptor,
    /// The operator `Δ` (already squared when `square` was set).
    pub matrix: RingMatrix,
    /// The matrix as given, before squaring.
    pub factor: Option<RingMatrix>,
    /// Exact inverse of `factor`, for determinant-triviality checks.
    pub inverse: Option<RingMatrix>,
    pub scheme: Option<Scheme>,
    pub oracle: Option<OracleSpec>,
    pub lambda_grid: Option<Vec<f64>>,
    pub tol: Option<f64>,
    /// An injective map into a larger group, for the subgroup check.
    pub embedding: Option<Homomorphism>,
}

/// `{"group", "matrix", "square"?, "inverse"?, "scheme"?, "oracle"?,
/// "lambda_grid"?, "tol"?, "embedding"?}`. With `"square": true` the operator
/// is `A*A` for the given `A`.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let group = parse_group(
        v.get("group")
            .ok_or_else(|| parse_err("problem needs \"group\""))?,
    )?;
    let given = parse_matrix(
        &group,
        v.get("matrix")
            .ok_or_else(|| parse_err("problem needs \"matrix\""))?,
    )?;
    let square = v.get("square").and_then(Value::as_bool).unwrap_or(false);
    let inverse = v
        .get("inverse")
        .map(|m| parse_matrix(&group, m))
        .transpose()?;
    let (matrix, factor) = if square || inverse.is_some() {
        (given.positive_square()?, Some(given))
    } else {
        (given, None)
    };
    if !matrix.is_square() {
        return Err(Error::DimensionMismatch(
            "the operator must be square".into(),
        ));
    }
    let scheme = v
        .get("scheme")
        .map(|s| parse_scheme(&group, s))
        .transpose()?;
    let oracle = v
        .get("oracle")
        .map(|o| serde_json::from_value(o.clone()).map_err(|e| parse_err(e.to_string())))
        .transpose()?;
    let lambda_grid = v
        .get("lambda_grid")
        .map(|g| serde_json::from_value(g.clone()).map_err(|e| parse_err(e.to_string())))
        .transpose()?;
    let tol = v.get("tol").and_then(Value::as_f64);
    let embedding = v
        .get("embedding")
        .map(|e| parse_homomorphism(&group, e))
        .transpose()?;
    Ok(Problem {
        group,
        matrix,
        factor,
        inverse,
        scheme,
        oracle,
        lambda_grid,
        tol,
        embedding,
    })
}

/// `{"group": …, "cells": [1, 1], "boundaries": [<matrix>, …]}`.
pub fn parse_complex(text: &str) -> Result<ChainComplexSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let group = parse_group(
        v.get("group")
            .ok_or_else(|| parse_err("complex needs \"group\""))?,
    )?;
    let dims: Vec<usize> = serde_json::from_value(
        v.get("cells")
            .cloned()
            .ok_or_else(|| parse_err("complex needs \"cells\""))?,
    )
    .map_err(|e| parse_err(e.to_string()))?;
    let boundaries = v
        .get("boundaries")
        .and_then(Value::as_array)
        .map(|bs| {
            bs.iter()
                .map(|b| parse_matrix(&group, b))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?
        .unwrap_or_default();
    ChainComplexSpec::new(group, dims, boundaries)
}

pub fn complex_to_json(spec: &ChainComplexSpec) -> Value {
    json!({
        "group": group_to_json(&spec.group),
        "cells": spec.dims,
        "boundaries": spec.boundaries.iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cw;

    #[test]
    fn groups_round_trip() {
        for text in [
            r#"{"type":"free_abelian","rank":2}"#,
            r#"{"type":"cyclic","n":64}"#,
            r#"{"type":"free","rank":2}"#,
            r#"{"type":"trivial"}"#,
            r#"{"type":"product","factors":[{"type":"cyclic","n":2},{"type":"free_abelian","rank":1}]}"#,
        ] {
            let v: Value = serde_json::from_str(text).unwrap();
            let g = parse_group(&v).unwrap();
            assert_eq!(parse_group(&group_to_json(&g)).unwrap(), g);
        }
        let s3 = GroupDescriptor::FiniteTable(Arc::new(FiniteTable::symmetric_group_3()));
        assert_eq!(parse_group(&group_to_json(&s3)).unwrap(), s3);
        assert!(parse_group(&json!({"type": "cyclic", "n": 0})).is_err());
        assert!(parse_group(&json!({"type": "lie"})).is_err());
    }

    #[test]
    fn words() {
        let f2 = GroupDescriptor::Free(2);
        let g = parse_element(&f2, &json!("a b b^-1 a^2")).unwrap();
        assert_eq!(g, GroupElement::Word(vec![1, 1, 1]));
        assert_eq!(
            element_to_json(&f2, &parse_element(&f2, &json!("a⁻¹ b")).unwrap()),
            json!("a^-1 b")
        );
        assert!(parse_element(&f2, &json!("c")).is_err());
        assert_eq!(
            parse_element(&GroupDescriptor::Cyclic(4), &json!(-1)).unwrap(),
            GroupElement::Residue(3)
        );
    }

    #[test]
    fn ring_elements_and_matrices() {
        let z = GroupDescriptor::FreeAbelian(1);
        let v = json!([
            {"word": [0], "re": "2"},
            {"word": [1], "re": "-1"},
            {"word": [-1], "re": -1},
            {"word": [5], "re": "1/2", "im": "1/3"},
            {"word": [5], "re": "-1/2", "im": "-1/3"}
        ]);
        let x = parse_ring_element(&z, &v).unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(
            parse_ring_element(&z, &ring_element_to_json(&x)).unwrap(),
            x
        );

        let m = json!({"rows": 1, "cols": 2, "entries": [[v.clone(), [{"word": [0], "re": "0.25", "im": "1"}]]]});
        let m = parse_matrix(&z, &m).unwrap();
        assert_eq!(parse_matrix(&z, &matrix_to_json(&m)).unwrap(), m);
        assert!(parse_matrix(&z, &json!({"rows": 2, "cols": 1, "entries": [[[]]]})).is_err());
    }

    #[test]
    fn complexes_round_trip() {
        for spec in [cw::circle(), cw::torus(), cw::point()] {
            let text = complex_to_json(&spec).to_string();
            assert_eq!(parse_complex(&text).unwrap(), spec);
        }
        let bad = r#"{"group":{"type":"free_abelian","rank":1},"cells":[1,1,1],
            "boundaries":[{"rows":1,"cols":1,"entries":[[[{"word":[0],"re":"1"}]]]},
                          {"rows":1,"cols":1,"entries":[[[{"word":[0],"re":"1"}]]]}]}"#;
        assert!(matches!(
            parse_complex(bad),
            Err(Error::NotAComplex { degree: 2 })
        ));
    }

    #[test]
    fn problems() {
        let text = r#"{
            "group": {"type": "free_abelian", "rank": 1},
            "matrix": {"rows": 1, "cols": 1, "entries": [[[{"word": [0], "re": "1"}, {"word": [1], "re": "-1"}]]]},
            "square": true,
            "scheme": {"type": "tower", "levels": [8, 16, 32]},
            "oracle": {"type": "torus", "grid": 512}
        }"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.matrix.k_bound(), 4.0);
        assert!(matches!(p.scheme, Some(Scheme::Tower(ref t)) if t.len() == 3));
        assert_eq!(p.oracle, Some(OracleSpec::Torus { grid: Some(512) }));
        assert!(matches!(parse_problem("{"), Err(Error::Parse(_))));

        let sub = r#"{
            "group": {"type": "cyclic", "n": 2},
            "matrix": {"rows": 1, "cols": 1, "entries": [[[{"word": 0, "re": "2"}, {"word": 1, "re": "-2"}]]]},
            "embedding": {"target": {"type": "cyclic", "n": 4}, "images": [2]}
        }"#;
        let p = parse_problem(sub).unwrap();
        assert!(p.embedding.unwrap().is_injective().unwrap());
    }
}
