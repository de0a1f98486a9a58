//! The `bound` command: assemble the dual problem on `S^{n-1}`, solve it,
//! repair and certify the solution, audit it independently, and write the
//! report artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use rug::float::Round;

use witbound_core::archive;
use witbound_core::certify::{
    audit_random_lhs, repair_and_certify, CertStatus, CertifyConfig, CertifyError,
};
use witbound_core::hp;
use witbound_core::model::build_dual;

use crate::cuts::load_cut_files;
use crate::export::write_sdpa_file;
use crate::outfmt::{fixed_down, fixed_even, fixed_up, CSV_DECIMALS, TABLE_DECIMALS};
use crate::{BoundArgs, CliError};

/// Degrees re-evaluated by the independent random audit.
pub const RANDOM_AUDIT_COUNT: usize = 10_000;
/// Upper end of the random audit's degree range.
pub const RANDOM_AUDIT_KMAX: u64 = 1_000_000;
/// Precision of the random audit re-evaluation.
pub const RANDOM_AUDIT_PREC: u32 = 1024;

pub fn cmd_bound(a: &BoundArgs) -> Result<(), CliError> {
    if !(3..=8).contains(&a.n) {
        eprintln!("warning: n = {} is outside the tested range 3..=8", a.n);
    }
    if !(2..=8).contains(&a.d) {
        eprintln!("warning: d = {} is outside the tested range 2..=8", a.d);
    }
    let prec = a.precision;
    let cuts = load_cut_files(&a.cuts, a.n, prec)?;

    let t0 = Instant::now();
    let model = build_dual(a.n, a.d, &cuts, a.kmax, prec)
        .map_err(|e| CliError::Model(e.to_string()))?;
    eprintln!(
        "model: {} rows, {} blocks ({:.1?})",
        model.problem.rows.len(),
        model.problem.blocks.len(),
        t0.elapsed()
    );

    let mut config = model.default_config();
    config.tol_gap = a.tol;
    let t1 = Instant::now();
    let (point, sol) = model
        .solve(&config)
        .map_err(|e| CliError::Solve(e.to_string()))?;
    eprintln!(
        "solve: {} iterations ({:.1?}), objective {}",
        sol.iterations,
        t1.elapsed(),
        fixed_even(&point.bound, CSV_DECIMALS)
    );

    // Certification with an adaptive tail slack: a cutoff-search overrun
    // is the one retryable failure (doubling ε at least halves the tail
    // cutoff), everything else is final.
    let mut eps = a.epsilon;
    let report = loop {
        let t = Instant::now();
        match repair_and_certify(&model, &point, &CertifyConfig::with_epsilon(eps)) {
            Ok(r) => {
                if let CertStatus::Failed(reason) = &r.status {
                    return Err(CliError::Certify(format!(
                        "certification failed at epsilon {eps:e}: {reason}"
                    )));
                }
                eprintln!("certify: epsilon {eps:e}, k0 {} ({:.1?})", r.k0, t.elapsed());
                break r;
            }
            Err(CertifyError::K0CapExceeded { cap, .. }) if 2.0 * eps <= a.epsilon_max => {
                eprintln!(
                    "certify: epsilon {eps:e} needs a tail cutoff beyond {cap} ({:.1?}); doubling",
                    t.elapsed()
                );
                eps *= 2.0;
            }
            Err(e) => {
                return Err(CliError::Certify(format!(
                    "certification failed at epsilon {eps:e}: {e}"
                )))
            }
        }
    };

    let t2 = Instant::now();
    let (audit_k, audit_min) = audit_random_lhs(
        &model,
        &point,
        &report,
        RANDOM_AUDIT_COUNT,
        RANDOM_AUDIT_KMAX,
        a.seed,
        RANDOM_AUDIT_PREC,
    )
    .map_err(|e| CliError::Certify(format!("independent audit failed: {e}")))?;
    eprintln!("audit: {RANDOM_AUDIT_COUNT} degrees ({:.1?})", t2.elapsed());
    if audit_min < 1u32 {
        return Err(CliError::Certify(format!(
            "independent audit found lhs({audit_k}) = {} < 1",
            fixed_down(&audit_min, CSV_DECIMALS)
        )));
    }

    // Artifacts.  Nothing run-dependent goes into the files, so repeated
    // runs with the same flags produce identical bytes.
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Output(format!("{}: {e}", a.out.display())))?;
    let stem = if cuts.is_empty() {
        format!("bound_n{}_d{}", a.n, a.d)
    } else {
        format!("bound_n{}_d{}_c{}", a.n, a.d, cuts.len())
    };
    let write = |name: &str, text: &str| -> Result<std::path::PathBuf, CliError> {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    };

    let mut cert_text = report.to_text();
    cert_text.push_str(&format!("random-audit-count {RANDOM_AUDIT_COUNT}\n"));
    cert_text.push_str(&format!("random-audit-kmax {RANDOM_AUDIT_KMAX}\n"));
    cert_text.push_str(&format!("random-audit-seed {}\n", a.seed));
    cert_text.push_str(&format!(
        "random-audit-min {} argmin {audit_k}\n",
        hp::fmt_sci(&audit_min, 12, Round::Down)
    ));
    let cert_path = write(&format!("{stem}.cert.txt"), &cert_text)?;

    let mut meta = BTreeMap::new();
    meta.insert("n".into(), a.n.to_string());
    meta.insert("d".into(), a.d.to_string());
    meta.insert("kmax".into(), a.kmax.to_string());
    meta.insert("cuts".into(), cuts.len().to_string());
    meta.insert("tol_gap".into(), format!("{:e}", a.tol));
    let sol_path = write(
        &format!("{stem}.sol.txt"),
        &archive::write_solution(prec, &meta, &model.problem.blocks, &sol),
    )?;

    let header = "n,d,num_cuts,kmax,precision,tol_gap,epsilon,margin,k0,eta,lhs_infinity,\
                  sweep_min_slack,extra_shift,audit_points,audit_max_dev,random_audit_count,\
                  random_audit_kmax,random_audit_seed,random_audit_min,random_audit_argmin,\
                  solver_objective,certified_bound,status";
    let row = format!(
        "{},{},{},{},{},{:e},{:e},{:e},{},{},{},{},{},{},{},{},{},{},{},{},{},{},certified",
        a.n,
        a.d,
        cuts.len(),
        a.kmax,
        prec,
        a.tol,
        report.epsilon,
        report.margin,
        report.k0,
        hp::fmt_sci(&report.eta, 6, Round::Up),
        fixed_down(&report.lhs_infinity, CSV_DECIMALS),
        hp::fmt_sci(&report.sweep_min_slack, 6, Round::Down),
        hp::fmt_sci(&report.extra_shift, 6, Round::Up),
        report.audit_points,
        hp::fmt_sci(&report.audit_max_dev, 6, Round::Up),
        RANDOM_AUDIT_COUNT,
        RANDOM_AUDIT_KMAX,
        a.seed,
        fixed_down(&audit_min, CSV_DECIMALS),
        audit_k,
        fixed_even(&point.bound, CSV_DECIMALS),
        fixed_up(&report.certified_bound, CSV_DECIMALS),
    );
    let csv_path = write(&format!("{stem}.csv"), &format!("{header}\n{row}\n"))?;

    if let Some(sdpa_path) = &a.export_sdpa {
        write_sdpa_file(&model.problem, sdpa_path)?;
    }

    println!("bound  n={}  d={}  cuts={}", a.n, a.d, cuts.len());
    println!(
        "  solver objective       {}",
        fixed_even(&point.bound, CSV_DECIMALS)
    );
    println!(
        "  certified upper bound  {}",
        fixed_up(&report.certified_bound, TABLE_DECIMALS)
    );
    println!(
        "  identity residual      {}",
        hp::fmt_sci(&report.eta, 3, Round::Up)
    );
    println!("  tail cutoff k0         {}", report.k0);
    println!("  tail slack epsilon     {:e}", report.epsilon);
    println!(
        "  limit-row value        {}",
        fixed_down(&report.lhs_infinity, TABLE_DECIMALS)
    );
    println!(
        "  sweep min slack        {}",
        hp::fmt_sci(&report.sweep_min_slack, 3, Round::Down)
    );
    println!(
        "  random audit min lhs   {} (k = {audit_k})",
        fixed_down(&audit_min, TABLE_DECIMALS)
    );
    println!("  report   {}", cert_path.display());
    println!("  archive  {}", sol_path.display());
    println!("  csv      {}", csv_path.display());
    if let Some(p) = &a.export_sdpa {
        println!("  sdpa     {}", p.display());
    }
    Ok(())
}
