//! The `export` command: write an assembled problem as a sparse SDPA file
//! and verify the write by parsing it back.

use std::fs;
use std::path::Path;

use witbound_core::finitegraphs::lovasz_theta_problem;
use witbound_core::ipm::SdpProblem;
use witbound_core::model::build_dual;
use witbound_core::sdpa::{from_problem, parse_dat_s, to_dat_s, SdpaData};

use crate::cuts::load_cut_files;
use crate::{CliError, ExportArgs};

/// Converts, writes, and round-trip-checks one problem; returns the
/// written table for inventory reporting.  The canonical writer makes the
/// parse-rewrite cycle a byte identity, so any difference means the file
/// on disk does not faithfully encode the problem.
pub(crate) fn write_sdpa_file(problem: &SdpProblem, path: &Path) -> Result<SdpaData, CliError> {
    let data = from_problem(problem).map_err(|e| CliError::Model(e.to_string()))?;
    let text = to_dat_s(&data);
    fs::write(path, &text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    let reparsed = parse_dat_s(&text, problem.prec.max(192))
        .map_err(|e| CliError::CrossCheck(format!("round-trip parse failed: {e}")))?;
    if to_dat_s(&reparsed) != text {
        return Err(CliError::CrossCheck(
            "round-trip rewrite differs from the exported file".into(),
        ));
    }
    Ok(data)
}

pub fn cmd_export(a: &ExportArgs) -> Result<(), CliError> {
    let (problem, desc) = if let Some(graph_path) = &a.graph {
        let text = fs::read_to_string(graph_path)
            .map_err(|e| CliError::Input(format!("{}: {e}", graph_path.display())))?;
        let g = witbound_core::finitegraphs::FiniteGraph::parse_text(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", graph_path.display())))?;
        let problem = lovasz_theta_problem(&g, a.precision)
            .map_err(|e| CliError::Model(e.to_string()))?;
        let name = graph_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        (problem, format!("theta({name})"))
    } else {
        let n = a.n.ok_or_else(|| {
            CliError::Input("--n and --d are required unless --graph is given".into())
        })?;
        let d = a.d.ok_or_else(|| {
            CliError::Input("--n and --d are required unless --graph is given".into())
        })?;
        let cuts = load_cut_files(&a.cuts, n, a.precision)?;
        let model = build_dual(n, d, &cuts, a.kmax, a.precision)
            .map_err(|e| CliError::Model(e.to_string()))?;
        (
            model.problem,
            format!("sphere dual n={n} d={d} cuts={}", cuts.len()),
        )
    };

    let data = write_sdpa_file(&problem, &a.out)?;
    println!(
        "exported {desc}: {} constraints, {} blocks, {} entries -> {}",
        data.num_constraints(),
        data.block_sizes.len(),
        data.entries.len(),
        a.out.display()
    );
    println!("round-trip check: ok");
    Ok(())
}
