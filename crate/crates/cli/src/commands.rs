use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use l2approx_core::cw::{l2_invariants, L2Method};
use l2approx_core::io::{parse_complex, parse_problem, OracleSpec, Problem};
use l2approx_core::oracles::{
    mahler_1x1, torus_density, torus_logdet, trivial_group_logdet, OracleValue,
};
use l2approx_core::report::{to_json_string, Defaults, RunReport, Verdict};
use l2approx_core::schemes::{
    build_sandwich, norm_bound_violations, sandwich_check, sintapr_check, squeeze_check,
    whitehead_check, FolnerExhaustion, QuotientTower, Scheme, SchemeOptions, DEFAULT_TOL,
    DEFAULT_TOWER_LEVELS,
};
use l2approx_core::spectral::{level_spectrum, subgroup_invariance_check, SpectralOptions};
use l2approx_core::{Error, GroupDescriptor, SpectralDensity};
use serde_json::json;

use crate::{CliError, Global};

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_problem(path: &Path) -> Result<Problem, CliError> {
    parse_problem(&read(path)?).map_err(|e| CliError::Input(e.to_string()))
}

pub fn emit(global: &Global, text: &str) -> Result<(), CliError> {
    match &global.output {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn options(global: &Global) -> SchemeOptions {
    let mut opts = SchemeOptions::default();
    if let Some(eps) = global.eps_ker {
        opts.spectral.eps_ker = eps;
    }
    opts
}

/// Quadrature points per coordinate when nothing else is given.
pub fn default_grid(rank: usize) -> usize {
    match rank {
        0 | 1 => 4096,
        2 => 256,
        _ => 32,
    }
}

/// The scheme of `problem` after command-line overrides, or a default one.
pub fn resolve_scheme(
    problem: &Problem,
    levels: Option<Vec<u64>>,
    boxes: Option<Vec<u64>>,
) -> Result<Scheme, CliError> {
    let group = &problem.group;
    if let Some(radii) = boxes {
        let GroupDescriptor::FreeAbelian(n) = group else {
            return Err(CliError::Input(format!(
                "Følner boxes need a free abelian group, not {group}"
            )));
        };
        return Ok(Scheme::Folner(FolnerExhaustion::boxes(*n, &radii)?));
    }
    if let Some(moduli) = levels {
        return Ok(Scheme::Tower(match group {
            GroupDescriptor::FreeAbelian(n) => QuotientTower::cyclic(*n, &moduli)?,
            g if g.is_finite() => QuotientTower::stationary(g.clone(), moduli.len())?,
            g => {
                return Err(CliError::Input(format!(
                    "--levels needs ℤⁿ or a finite group, not {g}"
                )))
            }
        }));
    }
    if let Some(s) = &problem.scheme {
        return Ok(s.clone());
    }
    match group {
        GroupDescriptor::FreeAbelian(1) => Ok(Scheme::Tower(QuotientTower::cyclic(
            1,
            &DEFAULT_TOWER_LEVELS,
        )?)),
        GroupDescriptor::FreeAbelian(n) => {
            Ok(Scheme::Tower(QuotientTower::cyclic(*n, &[8, 16, 32, 64])?))
        }
        g if g.is_finite() => Ok(Scheme::Tower(QuotientTower::stationary(g.clone(), 3)?)),
        g => Err(CliError::Input(format!(
            "no scheme given and none is built in for {g}"
        ))),
    }
}

fn describe(scheme: &Scheme) -> String {
    match scheme {
        Scheme::Tower(t) => format!(
            "tower [{}]",
            t.levels()
                .iter()
                .map(|phi| phi.target().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Scheme::Folner(f) => format!("folner ({} sets over Z^{})", f.len(), f.rank()),
    }
}

/// Reference density and log-determinant for `problem`, when available.
pub struct Oracle {
    pub density: Option<SpectralDensity>,
    pub value: Option<OracleValue>,
    pub grid: usize,
}

pub fn oracle(
    problem: &Problem,
    global: &Global,
    spectral: &SpectralOptions,
) -> Result<Oracle, CliError> {
    let delta = &problem.matrix;
    let spec_grid = match &problem.oracle {
        Some(OracleSpec::Torus { grid }) => *grid,
        _ => None,
    };
    let rank = match &problem.group {
        GroupDescriptor::FreeAbelian(n) => Some(*n),
        _ => None,
    };
    let grid = global
        .grid
        .or(spec_grid)
        .unwrap_or_else(|| default_grid(rank.unwrap_or(1)));
    let finite_density = || -> Result<Option<SpectralDensity>, CliError> {
        Ok(Some(
            level_spectrum(delta, delta.k_bound(), spectral)?.density(),
        ))
    };
    let torus = || -> Result<Oracle, CliError> {
        Ok(Oracle {
            density: Some(torus_density(delta, grid, spectral)?),
            value: Some(torus_logdet(delta, grid, spectral)?.oracle_value()),
            grid,
        })
    };
    match (&problem.oracle, rank) {
        (Some(OracleSpec::TrivialExact), _) => {
            let exact = trivial_group_logdet(delta)?;
            Ok(Oracle {
                density: finite_density()?,
                value: Some(OracleValue {
                    method: "exact_char_poly".into(),
                    grid: 0,
                    value: exact.log_det,
                    error_estimate: 0.0,
                }),
                grid: 0,
            })
        }
        (Some(OracleSpec::Mahler), Some(1)) if delta.rows() == 1 => Ok(Oracle {
            density: Some(torus_density(delta, grid, spectral)?),
            value: Some(OracleValue {
                method: "mahler_measure".into(),
                grid: 0,
                value: mahler_1x1(delta.get(0, 0))?,
                error_estimate: 0.0,
            }),
            grid,
        }),
        (Some(OracleSpec::Mahler), _) => Err(CliError::Input(
            "the Mahler oracle needs a 1×1 matrix over ℤ".into(),
        )),
        (_, Some(_)) => torus(),
        (_, None) if problem.group.is_finite() => {
            let spectrum = level_spectrum(delta, delta.k_bound(), spectral)?;
            Ok(Oracle {
                value: Some(OracleValue {
                    method: "exact_spectrum".into(),
                    grid: 0,
                    value: spectrum.log_det(),
                    error_estimate: 0.0,
                }),
                density: Some(spectrum.density()),
                grid: 0,
            })
        }
        _ => Ok(Oracle {
            density: None,
            value: None,
            grid: 0,
        }),
    }
}

pub fn density(
    global: &Global,
    path: &Path,
    levels: Option<Vec<u64>>,
    boxes: Option<Vec<u64>>,
) -> Result<(), CliError> {
    let problem = load_problem(path)?;
    let opts = options(global);
    let scheme = resolve_scheme(&problem, levels, boxes)?;
    let reports = scheme.run(&problem.matrix, &opts)?;
    let last = reports
        .last()
        .ok_or(Error::InsufficientLevels { needed: 1, got: 0 })?;
    let json = global
        .output
        .as_ref()
        .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let text = if json {
        to_json_string(&json!({"level": last.label, "density": last.density}))?
    } else {
        last.density.to_csv()
    };
    emit(global, text.trim_end())
}

/// Runs the scheme of `problem` with every applicable check.
pub fn run_report(
    problem: &Problem,
    global: &Global,
    levels: Option<Vec<u64>>,
    boxes: Option<Vec<u64>>,
    lambda_grid: Option<Vec<f64>>,
) -> Result<RunReport, CliError> {
    let opts = options(global);
    let tol = global.tol.or(problem.tol).unwrap_or(DEFAULT_TOL);
    let scheme = resolve_scheme(problem, levels, boxes)?;
    let delta = &problem.matrix;
    let k = delta.k_bound();
    let d = delta.rows();
    let lambda_grid = lambda_grid
        .or_else(|| problem.lambda_grid.clone())
        .unwrap_or_else(|| (0..=8).map(|i| i as f64 * k.max(1.0) / 8.0).collect());

    let reports = scheme.run(delta, &opts)?;
    let oracle = oracle(problem, global, &opts.spectral)?;
    let mut verdicts = BTreeMap::new();

    let violations = norm_bound_violations(&reports, k);
    verdicts.insert(
        "norm_bound".to_string(),
        Verdict::new(
            violations.is_empty(),
            &json!({"k_bound": k, "violations": violations}),
        ),
    );

    let trace_ok = reports.iter().all(|r| {
        r.traces.iter().all(|t| match t.certified {
            Some(true) => t.deviation == 0.0,
            Some(false) => true,
            None => t.power != 1 || t.deviation <= 1e-12,
        })
    });
    let traces: Vec<_> = reports
        .iter()
        .map(|r| json!({"level": r.label, "rows": r.traces}))
        .collect();
    verdicts.insert("traces".to_string(), Verdict::new(trace_ok, &traces));

    if let Some(f) = &oracle.density {
        let v = squeeze_check(&reports, f, &lambda_grid, tol)?;
        verdicts.insert("squeeze".to_string(), Verdict::new(v.pass, &v));
        if matches!(scheme, Scheme::Tower(_)) {
            let last = reports.last().map_or(f64::NAN, |r| r.f0);
            let dev = (last - f.betti()).abs();
            verdicts.insert(
                "betti_limit".to_string(),
                Verdict::new(
                    dev <= tol,
                    &json!({"level_f0": last, "oracle_f0": f.betti(), "deviation": dev}),
                ),
            );
        }
    }

    match sintapr_check(&reports, d, k, oracle.value.as_ref().map(|o| o.value), tol) {
        Ok(v) => {
            verdicts.insert("determinant".to_string(), Verdict::new(v.pass, &v));
        }
        Err(e @ Error::HypothesisViolated { .. }) => {
            verdicts.insert("determinant".to_string(), Verdict::failed(e.to_string()));
        }
        Err(e) => return Err(e.into()),
    }

    if k > 0.0 {
        let mut rows = Vec::new();
        let mut pass = true;
        for lambda in [0.0, 1.0, 2.0].into_iter().filter(|&l| l < k) {
            for n in [2, 4, 8] {
                let p = build_sandwich(lambda, n, k)?;
                let checks = sandwich_check(&reports, &p, 1e-8);
                pass &= checks.iter().all(|c| c.pass);
                rows.push(json!({"lambda": lambda, "n": n, "degree": p.degree, "margin": p.margin, "levels": checks}));
            }
        }
        verdicts.insert("sandwich".to_string(), Verdict::new(pass, &rows));
    }

    if let (Some(a), Some(b)) = (&problem.factor, &problem.inverse) {
        let grid = matches!(problem.group, GroupDescriptor::FreeAbelian(_)).then_some(oracle.grid);
        let (v, _) = whitehead_check(a, b, &scheme, &opts, grid, tol, tol / 2.0)?;
        verdicts.insert("whitehead".to_string(), Verdict::new(v.pass, &v));
    }

    if let Some(phi) = &problem.embedding {
        let v = subgroup_invariance_check(delta, phi, &opts.spectral)?;
        verdicts.insert(
            "subgroup".to_string(),
            Verdict::new(v.agree, &json!({"max_deviation": v.max_deviation})),
        );
    }

    Ok(RunReport {
        group: problem.group.to_string(),
        scheme: describe(&scheme),
        k_bound: k,
        defaults: Defaults {
            options: opts,
            tol,
            oracle_grid: oracle.grid,
            lambda_grid,
        },
        levels: reports,
        oracle: oracle.value,
        verdicts,
    })
}

pub fn approx(
    global: &Global,
    path: &Path,
    levels: Option<Vec<u64>>,
    boxes: Option<Vec<u64>>,
    lambda_grid: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let problem = load_problem(path)?;
    let report = run_report(&problem, global, levels, boxes, lambda_grid)?;
    emit(global, &to_json_string(&report)?)?;
    if report.pass() {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}

pub fn cw(global: &Global, path: &Path, levels: Option<Vec<u64>>) -> Result<(), CliError> {
    let spec = match parse_complex(&read(path)?) {
        Ok(s) => s,
        Err(e @ Error::NotAComplex { .. }) => return Err(e.into()),
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let method = match (levels, &spec.group) {
        (Some(moduli), GroupDescriptor::FreeAbelian(n)) => {
            L2Method::Tower(QuotientTower::cyclic(*n, &moduli)?)
        }
        (Some(_), g) => {
            return Err(CliError::Input(format!(
                "--levels needs a free abelian group, not {g}"
            )))
        }
        (None, g) => {
            let rank = match g {
                GroupDescriptor::FreeAbelian(n) => *n,
                _ => 1,
            };
            L2Method::Oracle {
                grid: global.grid.unwrap_or_else(|| default_grid(rank)),
            }
        }
    };
    let report = l2_invariants(&spec, &method, &options(global))?;
    emit(global, &to_json_string(&report)?)
}
