//! The `finite` command: independence-number bounds on small graphs read
//! from plain-text edge lists, one CSV row per invocation.

use std::fs;
use std::path::Path;

use rug::Rational;

use witbound_core::finitegraphs::{
    alpha_brute, gamma_r, kpoint_delta, lasserre, lovasz_theta, polya_exponent, FiniteError,
    FiniteGraph, SymTensor,
};
use witbound_core::ipm::SolverConfig;

use crate::outfmt::{fixed_even, TABLE_DECIMALS};
use crate::{CliError, FiniteCmd, FiniteCommon};

fn classify(e: FiniteError) -> CliError {
    match e {
        FiniteError::Parse { .. } | FiniteError::Loop(_) | FiniteError::VertexRange(..) => {
            CliError::Input(e.to_string())
        }
        FiniteError::Solver(_) => CliError::Solve(e.to_string()),
        FiniteError::NotPositive(_) => CliError::Certify(e.to_string()),
        _ => CliError::Model(e.to_string()),
    }
}

fn read_graph(path: &Path) -> Result<FiniteGraph, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    FiniteGraph::parse_text(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn config(common: &FiniteCommon) -> SolverConfig {
    let mut cfg = witbound_core::finitegraphs::default_finite_config();
    cfg.prec = common.precision;
    cfg.tol_gap = common.tol;
    cfg.tol_feas = common.tol;
    cfg
}

/// Independence kernel `(α + s)(A + I) - J`; strictly copositive for any
/// rational shift `s > 0`, so it has a finite certified Pólya exponent.
fn shifted_kernel(g: &FiniteGraph, shift: &Rational) -> Result<Vec<Vec<Rational>>, CliError> {
    let alpha = alpha_brute(g).map_err(classify)?;
    let scale = Rational::from(alpha) + shift;
    let mut q = vec![vec![Rational::from(-1); g.n]; g.n];
    for i in 0..g.n {
        for j in 0..g.n {
            if i == j || g.is_edge(i, j) {
                q[i][j] += &scale;
            }
        }
    }
    Ok(q)
}

pub fn cmd_finite(cmd: &FiniteCmd) -> Result<(), CliError> {
    let (common, quantity, param, value) = match cmd {
        FiniteCmd::Alpha { common } => {
            let g = read_graph(&common.graph)?;
            let v = alpha_brute(&g).map_err(classify)?;
            (common, "alpha", String::new(), (g, v.to_string()))
        }
        FiniteCmd::Theta { common } => {
            let g = read_graph(&common.graph)?;
            let v = lovasz_theta(&g, &config(common)).map_err(classify)?;
            let s = fixed_even(&v, TABLE_DECIMALS);
            (common, "theta", String::new(), (g, s))
        }
        FiniteCmd::Lasserre { common, level } => {
            let g = read_graph(&common.graph)?;
            let v = lasserre(&g, *level, &config(common)).map_err(classify)?;
            let s = fixed_even(&v, TABLE_DECIMALS);
            (common, "lasserre", level.to_string(), (g, s))
        }
        FiniteCmd::Delta { common, level } => {
            let g = read_graph(&common.graph)?;
            let v = kpoint_delta(&g, *level, &config(common)).map_err(classify)?;
            let s = fixed_even(&v, TABLE_DECIMALS);
            (common, "delta", level.to_string(), (g, s))
        }
        FiniteCmd::Gamma { common, exponent } => {
            let g = read_graph(&common.graph)?;
            let v = gamma_r(&g, *exponent as usize, &config(common)).map_err(classify)?;
            let s = fixed_even(&v, TABLE_DECIMALS);
            (common, "gamma", exponent.to_string(), (g, s))
        }
        FiniteCmd::Polya { common, shift } => {
            let s: Rational = shift
                .parse()
                .map_err(|_| CliError::Input(format!("bad rational shift: {shift}")))?;
            if s <= 0 {
                return Err(CliError::Input(format!(
                    "shift must be positive, got {shift}"
                )));
            }
            let g = read_graph(&common.graph)?;
            let q = shifted_kernel(&g, &s)?;
            let t = SymTensor::from_matrix(&q).map_err(classify)?;
            let r = polya_exponent(&t).map_err(classify)?;
            (common, "polya", shift.clone(), (g, r.to_string()))
        }
    };
    let (g, value) = value;
    let name = common
        .graph
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| common.graph.display().to_string());
    println!("{quantity} {name}: {value}");

    if let Some(out) = &common.out {
        let header = "graph,quantity,param,vertices,edges,value";
        let row = format!(
            "{name},{quantity},{param},{},{},{value}",
            g.n,
            g.edges.len()
        );
        fs::write(out, format!("{header}\n{row}\n"))
            .map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}
