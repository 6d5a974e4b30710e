//! Property suites over the bundled fixtures.

use l2approx_core::io::{parse_problem, Problem};
use l2approx_core::oracles::trivial_group_logdet_exact;
use l2approx_core::report::RunReport;
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::run_report;
use crate::{CliError, Global, Suite};

const ZD_LAPLACIAN: &str = include_str!("../fixtures/zd_laplacian.json");
const ZD_FOLNER: &str = include_str!("../fixtures/zd_folner.json");
const WHITEHEAD: &str = include_str!("../fixtures/whitehead.json");
const SUBGROUP: &str = include_str!("../fixtures/subgroup.json");
const COMPLEX_ALPHA: &str = include_str!("../fixtures/complex_alpha.json");

fn fixture(text: &str) -> Result<Problem, CliError> {
    parse_problem(text).map_err(|e| CliError::Input(format!("bundled fixture: {e}")))
}

fn run(text: &str, global: &Global) -> Result<RunReport, CliError> {
    run_report(&fixture(text)?, global, None, None, None)
}

fn line(name: &str, pass: bool) -> bool {
    println!("{} {name}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn verdict(report: &RunReport, key: &str) -> bool {
    report.verdicts.get(key).is_some_and(|v| v.pass)
}

/// Seed for randomized suites, from `L2APPROX_SEED` (default 0).
pub fn seed() -> u64 {
    std::env::var("L2APPROX_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// `AᵀA` for a random integer matrix `A` with at most 8 columns.
fn random_gram(rng: &mut impl Rng) -> Vec<Vec<BigInt>> {
    let d = rng.gen_range(1..=8);
    let rows = rng.gen_range(1..=8);
    let a: Vec<Vec<i64>> = (0..rows)
        .map(|_| (0..d).map(|_| rng.gen_range(-4..=4)).collect())
        .collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| BigInt::from(a.iter().map(|r| r[i] * r[j]).sum::<i64>()))
                .collect()
        })
        .collect()
}

pub fn verify(global: &Global, suite: Suite) -> Result<(), CliError> {
    let mut ok = true;
    match suite {
        Suite::Traces => {
            let tower = run(ZD_LAPLACIAN, global)?;
            ok &= line("tower traces match exactly", verdict(&tower, "traces"));
            let folner = run(ZD_FOLNER, global)?;
            ok &= line("folner traces", verdict(&folner, "traces"));
            let closed_form = folner.levels.iter().all(|r| {
                let m = r.matrix_size as f64;
                (r.traces[1].deviation - 2.0 / m).abs() <= 1e-9
            });
            ok &= line("folner second moment defect is 2/(2m+1)", closed_form);
            ok &= line(
                "norm bounds",
                verdict(&tower, "norm_bound") && verdict(&folner, "norm_bound"),
            );
        }
        Suite::Squeeze => {
            for (name, text) in [
                ("tower", ZD_LAPLACIAN),
                ("folner", ZD_FOLNER),
                ("complex", COMPLEX_ALPHA),
            ] {
                let report = run(text, global)?;
                ok &= line(&format!("{name} squeeze"), verdict(&report, "squeeze"));
                ok &= line(&format!("{name} sandwich"), verdict(&report, "sandwich"));
            }
            let complex = run(COMPLEX_ALPHA, global)?;
            ok &= line("complex betti limit", verdict(&complex, "betti_limit"));
        }
        Suite::Determinant => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed());
            let mut all = true;
            for _ in 0..100 {
                let gram = random_gram(&mut rng);
                let exact = trivial_group_logdet_exact(&gram)?;
                all &= exact.log_det >= 0.0;
            }
            ok &= line("trivial group log-determinants are nonnegative", all);
            let tower = run(ZD_LAPLACIAN, global)?;
            let lower = tower.levels.iter().all(|r| r.logdet >= 0.0);
            ok &= line("tower log-determinants are nonnegative", lower);
            ok &= line("lim sup below the oracle", verdict(&tower, "determinant"));
        }
        Suite::Whitehead => {
            let report = run(WHITEHEAD, global)?;
            ok &= line(
                "elementary matrix has trivial determinant",
                verdict(&report, "whitehead"),
            );
        }
        Suite::Subgroup => {
            let report = run(SUBGROUP, global)?;
            ok &= line("induced density agrees", verdict(&report, "subgroup"));
        }
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed)
    }
}
