//! The `cuts` command: exact re-validation of cut files and seeded
//! generation of new cuts against a solved coefficient profile.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use witbound_core::archive;
use witbound_core::bqpcuts::{
    generate_cuts, read_cuts_file, write_cuts_file, BqpInequality, CutError, CutSearchParams,
};
use witbound_core::hp::Prec;
use witbound_core::model::build_dual;

use crate::{CliError, GenerateArgs};

fn classify(e: CutError) -> CliError {
    match e {
        CutError::Parse { .. } | CutError::Io(_) => CliError::Input(e.to_string()),
        other => CliError::InvalidCut(other.to_string()),
    }
}

/// Reads and merges cut files for a run in dimension `n`; every file must
/// declare the same dimension and every cut must revalidate.
pub(crate) fn load_cut_files(
    paths: &[PathBuf],
    n: u32,
    prec: Prec,
) -> Result<Vec<BqpInequality>, CliError> {
    let mut all = Vec::new();
    for path in paths {
        let (dim, cuts) = read_cuts_file(path, prec)
            .map_err(|e| match classify(e) {
                CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
                CliError::InvalidCut(m) => {
                    CliError::InvalidCut(format!("{}: {m}", path.display()))
                }
                other => other,
            })?;
        if dim != n {
            return Err(CliError::Input(format!(
                "{}: cut file is for dimension {dim}, run is for dimension {n}",
                path.display()
            )));
        }
        all.extend(cuts);
    }
    Ok(all)
}

pub fn cmd_cuts_validate(file: &Path, precision: u32) -> Result<(), CliError> {
    let (n, cuts) = read_cuts_file(file, precision).map_err(classify)?;
    for (i, cut) in cuts.iter().enumerate() {
        println!(
            "cut {i}: ok ({} points, rhs {})",
            cut.num_points(),
            cut.rhs
        );
    }
    println!("validated {} cuts (dimension {n})", cuts.len());
    Ok(())
}

pub fn cmd_cuts_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let (model, point) = if let Some(path) = &a.archive {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let loaded = archive::read_solution(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let get = |key: &str| -> Result<u64, CliError> {
            loaded
                .meta
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| {
                    CliError::Input(format!(
                        "{}: archive metadata lacks a numeric `{key}`",
                        path.display()
                    ))
                })
        };
        let (n, d, kmax) = (get("n")? as u32, get("d")? as usize, get("kmax")?);
        if get("cuts")? != 0 {
            return Err(CliError::Input(format!(
                "{}: archive was solved with cuts; generate from a cut-free run",
                path.display()
            )));
        }
        if let Some(want) = a.n {
            if want != n {
                return Err(CliError::Input(format!(
                    "--n {want} conflicts with archive dimension {n}"
                )));
            }
        }
        let model = build_dual(n, d, &[], kmax, loaded.prec)
            .map_err(|e| CliError::Model(e.to_string()))?;
        if loaded.blocks.len() != model.problem.blocks.len() {
            return Err(CliError::Input(format!(
                "{}: archive block layout does not match the rebuilt model",
                path.display()
            )));
        }
        let point = model.extract(&loaded.solution);
        (model, point)
    } else {
        let n = a
            .n
            .ok_or_else(|| CliError::Input("--n is required without --archive".into()))?;
        let d = a
            .d
            .ok_or_else(|| CliError::Input("--d is required without --archive".into()))?;
        let t0 = Instant::now();
        let model = build_dual(n, d, &[], a.kmax, a.precision)
            .map_err(|e| CliError::Model(e.to_string()))?;
        let (point, _) = model
            .solve(&model.default_config())
            .map_err(|e| CliError::Solve(e.to_string()))?;
        eprintln!("solve: {:.1?}", t0.elapsed());
        (model, point)
    };

    let ahat = model.ahat_f64(&point);
    let params = CutSearchParams {
        max_cuts: a.max_cuts,
        min_violation: a.min_violation,
        ..CutSearchParams::default()
    };
    let t1 = Instant::now();
    let cuts = generate_cuts(model.n, &ahat, a.seed, &params, model.prec);
    eprintln!("search: {:.1?}", t1.elapsed());
    for (i, cut) in cuts.iter().enumerate() {
        cut.validate(model.prec)
            .map_err(|e| CliError::InvalidCut(format!("generated cut {i}: {e}")))?;
        println!("cut {i}: {} points, rhs {}", cut.num_points(), cut.rhs);
    }
    write_cuts_file(&a.out, model.n, &cuts)
        .map_err(|e| CliError::Output(format!("{}: {e}", a.out.display())))?;
    println!("generated {} cuts -> {}", cuts.len(), a.out.display());
    Ok(())
}
