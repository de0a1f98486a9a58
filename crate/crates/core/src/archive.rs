//! Versioned text archive for solved problems.
//!
//! Stores a [`SdpSolution`] together with the block layout it belongs to
//! and free-form metadata, as a line-oriented UTF-8 file.  Every float is
//! written in radix-16 scientific notation (`rug`'s exact representation),
//! which round-trips bit-for-bit at the recorded precision — the
//! certification pass can therefore re-verify an archived solution without
//! any rounding slack from the storage layer.

use std::collections::BTreeMap;

use rug::Float;
use thiserror::Error;

use crate::hp::Prec;
use crate::ipm::{BlockSol, ConeBlock, SdpSolution};

const MAGIC: &str = "witbound-solution";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported archive version {0}")]
    Version(String),
}

/// A solution loaded back from its archive text.
#[derive(Clone, Debug)]
pub struct LoadedSolution {
    pub prec: Prec,
    pub meta: BTreeMap<String, String>,
    pub blocks: Vec<ConeBlock>,
    pub solution: SdpSolution,
}

fn hex(f: &Float) -> String {
    f.to_string_radix(16, None)
}

fn push_block(out: &mut String, tag: &str, idx: usize, b: &BlockSol) {
    match b {
        BlockSol::Psd(m) => {
            out.push_str(&format!("begin {tag} {idx} psd {}\n", m.rows));
            for i in 0..m.rows {
                for j in i..m.cols {
                    out.push_str(&hex(&m[(i, j)]));
                    out.push('\n');
                }
            }
        }
        BlockSol::Diag(d) => {
            out.push_str(&format!("begin {tag} {idx} diag {}\n", d.len()));
            for v in d {
                out.push_str(&hex(v));
                out.push('\n');
            }
        }
    }
}

/// Renders the archive text.  Metadata keys and values must not contain
/// newlines; keys must not contain spaces.
pub fn write_solution(
    prec: Prec,
    meta: &BTreeMap<String, String>,
    blocks: &[ConeBlock],
    sol: &SdpSolution,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("prec {prec}\n"));
    for (k, v) in meta {
        debug_assert!(!k.contains(' ') && !k.contains('\n') && !v.contains('\n'));
        out.push_str(&format!("meta {k} {v}\n"));
    }
    out.push_str(&format!("blocks {}\n", blocks.len()));
    for b in blocks {
        match b {
            ConeBlock::Psd(s) => out.push_str(&format!("block psd {s}\n")),
            ConeBlock::Nonneg(s) => out.push_str(&format!("block diag {s}\n")),
        }
    }
    out.push_str(&format!("iterations {}\n", sol.iterations));
    out.push_str(&format!("objective {} {}\n", hex(&sol.primal_obj), hex(&sol.dual_obj)));
    for (i, b) in sol.x_blocks.iter().enumerate() {
        push_block(&mut out, "x", i, b);
    }
    for (i, b) in sol.z_blocks.iter().enumerate() {
        push_block(&mut out, "z", i, b);
    }
    out.push_str(&format!("xfree {}\n", sol.x_free.len()));
    for v in &sol.x_free {
        out.push_str(&hex(v));
        out.push('\n');
    }
    out.push_str(&format!("y {}\n", sol.y.len()));
    for v in &sol.y {
        out.push_str(&hex(v));
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

/// Parses archive text written by [`write_solution`].
pub fn read_solution(text: &str) -> Result<LoadedSolution, ArchiveError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0usize;
    let err = |pos: usize, msg: &str| ArchiveError::Parse {
        line: pos + 1,
        msg: msg.to_string(),
    };
    let mut next = |what: &str| -> Result<(usize, &str), ArchiveError> {
        while pos < lines.len() && lines[pos].trim().is_empty() {
            pos += 1;
        }
        if pos >= lines.len() {
            return Err(ArchiveError::Parse {
                line: lines.len(),
                msg: format!("unexpected end of file while reading {what}"),
            });
        }
        pos += 1;
        Ok((pos - 1, lines[pos - 1].trim()))
    };

    let (ln, header) = next("header")?;
    let mut it = header.split_whitespace();
    if it.next() != Some(MAGIC) {
        return Err(err(ln, "missing magic header"));
    }
    let ver = it.next().ok_or_else(|| err(ln, "missing version"))?;
    if ver != VERSION.to_string() {
        return Err(ArchiveError::Version(ver.to_string()));
    }

    let (ln, line) = next("precision")?;
    let prec: Prec = line
        .strip_prefix("prec ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad precision line"))?;
    if !(2..=1 << 24).contains(&prec) {
        return Err(err(ln, "precision out of range"));
    }

    let mut meta = BTreeMap::new();
    let blocks_line;
    loop {
        let (ln, line) = next("metadata or block count")?;
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest
                .split_once(' ')
                .ok_or_else(|| err(ln, "metadata needs a key and a value"))?;
            meta.insert(k.to_string(), v.to_string());
        } else {
            blocks_line = (ln, line.to_string());
            break;
        }
    }
    let (ln, line) = (blocks_line.0, blocks_line.1);
    let nb: usize = line
        .strip_prefix("blocks ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad block count"))?;
    let mut blocks = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, line) = next("block descriptor")?;
        let rest = line
            .strip_prefix("block ")
            .ok_or_else(|| err(ln, "expected block descriptor"))?;
        let (kind, size) = rest
            .split_once(' ')
            .ok_or_else(|| err(ln, "bad block descriptor"))?;
        let size: usize = size.parse().map_err(|_| err(ln, "bad block size"))?;
        blocks.push(match kind {
            "psd" => ConeBlock::Psd(size),
            "diag" => ConeBlock::Nonneg(size),
            _ => return Err(err(ln, "unknown block kind")),
        });
    }

    let (ln, line) = next("iteration count")?;
    let iterations: usize = line
        .strip_prefix("iterations ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad iteration count"))?;

    let parse_hex = |ln: usize, tok: &str| -> Result<Float, ArchiveError> {
        Float::parse_radix(tok, 16)
            .map(|p| Float::with_val(prec, p))
            .map_err(|_| err(ln, "bad radix-16 float"))
    };

    let (ln, line) = next("objective")?;
    let rest = line
        .strip_prefix("objective ")
        .ok_or_else(|| err(ln, "expected objective line"))?;
    let (p_str, d_str) = rest
        .split_once(' ')
        .ok_or_else(|| err(ln, "objective needs two values"))?;
    let primal_obj = parse_hex(ln, p_str)?;
    let dual_obj = parse_hex(ln, d_str)?;

    let mut read_block_section = |tag: &str,
                                  idx: usize|
     -> Result<BlockSol, ArchiveError> {
        let (ln, line) = next("block section")?;
        let rest = line
            .strip_prefix("begin ")
            .ok_or_else(|| err(ln, "expected block section"))?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != tag || parts[1] != idx.to_string() {
            return Err(err(ln, "block section out of order"));
        }
        let size: usize = parts[3].parse().map_err(|_| err(ln, "bad size"))?;
        match parts[2] {
            "psd" => {
                let mut m = crate::linalg::Mat::zeros(prec, size, size);
                for i in 0..size {
                    for j in i..size {
                        let (ln, tok) = next("matrix entry")?;
                        let v = parse_hex(ln, tok)?;
                        m[(i, j)] = v.clone();
                        m[(j, i)] = v;
                    }
                }
                Ok(BlockSol::Psd(m))
            }
            "diag" => {
                let mut d = Vec::with_capacity(size);
                for _ in 0..size {
                    let (ln, tok) = next("diagonal entry")?;
                    d.push(parse_hex(ln, tok)?);
                }
                Ok(BlockSol::Diag(d))
            }
            _ => Err(err(ln, "unknown block kind")),
        }
    };

    let mut x_blocks = Vec::with_capacity(nb);
    for i in 0..nb {
        x_blocks.push(read_block_section("x", i)?);
    }
    let mut z_blocks = Vec::with_capacity(nb);
    for i in 0..nb {
        z_blocks.push(read_block_section("z", i)?);
    }

    let mut read_vector = |label: &str| -> Result<Vec<Float>, ArchiveError> {
        let (ln, line) = next("vector header")?;
        let count: usize = line
            .strip_prefix(label)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(ln, "bad vector header"))?;
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, tok) = next("vector entry")?;
            v.push(parse_hex(ln, tok)?);
        }
        Ok(v)
    };
    let x_free = read_vector("xfree ")?;
    let y = read_vector("y ")?;
    let (ln, line) = next("terminator")?;
    if line != "end" {
        return Err(err(ln, "expected end marker"));
    }

    // Shape agreement between the declared layout and the stored sections.
    for (b, x) in blocks.iter().zip(x_blocks.iter()) {
        let ok = matches!(
            (b, x),
            (ConeBlock::Psd(s), BlockSol::Psd(m)) if m.rows == *s
        ) || matches!(
            (b, x),
            (ConeBlock::Nonneg(s), BlockSol::Diag(d)) if d.len() == *s
        );
        if !ok {
            return Err(ArchiveError::Parse {
                line: 0,
                msg: "block layout does not match stored sections".into(),
            });
        }
    }

    Ok(LoadedSolution {
        prec,
        meta,
        blocks,
        solution: SdpSolution {
            x_blocks,
            x_free,
            y,
            z_blocks,
            primal_obj,
            dual_obj,
            iterations,
            log: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;
    use crate::ipm::{self, RowKind, SdpProblem, SdpRow, SdpTerm, SolverConfig};

    const P: Prec = 192;

    #[test]
    fn round_trip_is_exact() {
        // Solve a small problem so the stored floats are "random" reals.
        let p = SdpProblem {
            prec: P,
            blocks: vec![ConeBlock::Psd(2), ConeBlock::Nonneg(1)],
            num_free: 1,
            obj: vec![
                SdpTerm {
                    block: 0,
                    i: 0,
                    j: 0,
                    value: float(P, 1),
                },
                SdpTerm {
                    block: 0,
                    i: 1,
                    j: 1,
                    value: float(P, 2),
                },
                SdpTerm {
                    block: 1,
                    i: 0,
                    j: 0,
                    value: float(P, 0.5),
                },
            ],
            obj_free: vec![],
            rows: vec![
                SdpRow {
                    kind: RowKind::Eq,
                    terms: vec![
                        SdpTerm {
                            block: 0,
                            i: 0,
                            j: 1,
                            value: float(P, 1),
                        },
                        SdpTerm {
                            block: 1,
                            i: 0,
                            j: 0,
                            value: float(P, 1),
                        },
                    ],
                    free: vec![(0, float(P, 1))],
                    rhs: float(P, 1),
                },
                SdpRow {
                    kind: RowKind::Ge,
                    terms: vec![],
                    free: vec![(0, float(P, 1))],
                    rhs: float(P, 0.25),
                },
            ],
        };
        let sol = ipm::solve(
            &p,
            &SolverConfig {
                prec: P,
                tol_gap: 1e-20,
                tol_feas: 1e-20,
                ..SolverConfig::default()
            },
        )
        .unwrap();

        let mut meta = BTreeMap::new();
        meta.insert("kind".to_string(), "unit-test".to_string());
        meta.insert("n".to_string(), "3".to_string());
        let text = write_solution(P, &meta, &p.blocks, &sol);
        let loaded = read_solution(&text).unwrap();

        assert_eq!(loaded.prec, P);
        assert_eq!(loaded.meta, meta);
        assert_eq!(loaded.blocks, p.blocks);
        assert_eq!(loaded.solution.iterations, sol.iterations);
        assert!(loaded.solution.primal_obj == sol.primal_obj);
        assert!(loaded.solution.dual_obj == sol.dual_obj);
        for (a, b) in loaded.solution.y.iter().zip(sol.y.iter()) {
            assert!(a == b, "y differs after reload");
        }
        for (a, b) in loaded.solution.x_free.iter().zip(sol.x_free.iter()) {
            assert!(a == b);
        }
        for (xb, yb) in loaded.solution.x_blocks.iter().zip(sol.x_blocks.iter()) {
            match (xb, yb) {
                (BlockSol::Psd(a), BlockSol::Psd(b)) => {
                    for i in 0..a.rows {
                        for j in 0..a.cols {
                            assert!(a[(i, j)] == b[(i, j)], "X entry differs");
                        }
                    }
                }
                (BlockSol::Diag(a), BlockSol::Diag(b)) => {
                    for (x, y) in a.iter().zip(b.iter()) {
                        assert!(x == y);
                    }
                }
                _ => panic!("block kind changed"),
            }
        }
        // Writing the loaded solution again reproduces the text.
        let text2 = write_solution(loaded.prec, &loaded.meta, &loaded.blocks, &loaded.solution);
        assert_eq!(text, text2);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(read_solution("").is_err());
        assert!(read_solution("witbound-solution 999\nprec 64\n").is_err());
        let garbage = "witbound-solution 1\nprec 128\nblocks 1\nblock psd 1\n";
        assert!(read_solution(garbage).is_err());
    }
}
