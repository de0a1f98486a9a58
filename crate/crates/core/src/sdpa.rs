//! Interchange with the sparse SDPA file format (`.dat-s`).
//!
//! The exported file encodes the pair
//!
//! ```text
//! (P)  min  cᵀx   s.t.  Σ_k x_k F_k - F_0 ⪰ 0
//! (D)  max  ⟨F_0, Y⟩   s.t.  ⟨F_k, Y⟩ = c_k (k = 1..m),  Y ⪰ 0
//! ```
//!
//! A problem `min ⟨C, X⟩ s.t. ⟨A_j, X⟩ = b_j, X ⪰ 0` therefore sits on the
//! file's *dual* side under the mapping `F_0 = -C`, `c = b`, `F_j = A_j`,
//! and an external solver's optimal value is the *negative* of ours.
//! Inequality rows are materialized as explicit slacks in an appended
//! diagonal block and free variables are split `v = v⁺ - v⁻` into another
//! diagonal block, so the file only ever contains the two block kinds the
//! format knows.
//!
//! Writing is canonical: entries sorted by (matrix, block, row, column),
//! values printed as 40-significant-digit scientific decimals.  Reading a
//! canonical file and re-writing it reproduces the bytes exactly (40
//! decimal digits need ~133 bits; parsing at ≥ 192 bits is lossless in the
//! round-trip direction).

use rug::float::Round;
use rug::Float;
use thiserror::Error;

use crate::hp::{self, Prec};
use crate::ipm::{BlockSol, ConeBlock, RowKind, SdpProblem, SdpSolution};

/// Significant decimal digits written for every numeric value.
pub const EXPORT_DIGITS: usize = 40;

#[derive(Debug, Error)]
pub enum SdpaError {
    #[error("unsupported problem: {0}")]
    Unsupported(String),
    #[error("malformed data: {0}")]
    Shape(String),
    #[error("parse error at token {index}: {msg}")]
    Parse { index: usize, msg: String },
}

/// One nonzero coefficient: entry `(i, j)` (0-based, `i ≤ j`) of the
/// symmetric matrix `F_matrix` restricted to `block`.
#[derive(Clone, Debug)]
pub struct SdpaEntry {
    /// 0 for the objective matrix `F_0`, `k` for constraint `k` (1-based).
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: Float,
}

/// Parsed or assembled contents of a `.dat-s` file.
#[derive(Clone, Debug)]
pub struct SdpaData {
    pub prec: Prec,
    /// Positive size: dense PSD block; negative: diagonal block.
    pub block_sizes: Vec<i64>,
    /// Right-hand sides `c_1 .. c_m`.
    pub rhs: Vec<Float>,
    /// Sorted by (matrix, block, i, j), no duplicates, no zeros.
    pub entries: Vec<SdpaEntry>,
}

impl SdpaData {
    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }
}

/// Maps a problem onto the file's dual side (see the module docs).
pub fn from_problem(p: &SdpProblem) -> Result<SdpaData, SdpaError> {
    p.validate().map_err(SdpaError::Unsupported)?;
    let prec = p.prec;
    let num_ge = p.rows.iter().filter(|r| r.kind == RowKind::Ge).count();
    let mut block_sizes: Vec<i64> = p
        .blocks
        .iter()
        .map(|b| match b {
            ConeBlock::Psd(s) => *s as i64,
            ConeBlock::Nonneg(s) => -(*s as i64),
        })
        .collect();
    let slack_block = if num_ge > 0 {
        block_sizes.push(-(num_ge as i64));
        Some(block_sizes.len() - 1)
    } else {
        None
    };
    let free_block = if p.num_free > 0 {
        block_sizes.push(-(2 * p.num_free as i64));
        Some(block_sizes.len() - 1)
    } else {
        None
    };

    let mut entries: Vec<SdpaEntry> = Vec::new();
    let mut push = |matrix: usize, block: usize, i: usize, j: usize, value: Float| {
        if !value.is_zero() {
            entries.push(SdpaEntry {
                matrix,
                block,
                i,
                j,
                value,
            });
        }
    };

    // F_0 = -C.
    for t in &p.obj {
        push(0, t.block, t.i, t.j, -t.value.clone());
    }
    for (fi, a) in &p.obj_free {
        let fb = free_block.expect("free objective without free variables");
        push(0, fb, *fi, *fi, -a.clone());
        push(0, fb, p.num_free + fi, p.num_free + fi, a.clone());
    }

    // F_k = A_k plus slack / split-variable columns.
    let mut ge_seen = 0usize;
    for (k, row) in p.rows.iter().enumerate() {
        let matrix = k + 1;
        for t in &row.terms {
            push(matrix, t.block, t.i, t.j, t.value.clone());
        }
        for (fi, a) in &row.free {
            let fb = free_block.expect("free coefficient without free variables");
            push(matrix, fb, *fi, *fi, a.clone());
            push(matrix, fb, p.num_free + fi, p.num_free + fi, -a.clone());
        }
        if row.kind == RowKind::Ge {
            push(
                matrix,
                slack_block.unwrap(),
                ge_seen,
                ge_seen,
                Float::with_val(prec, -1),
            );
            ge_seen += 1;
        }
    }

    entries.sort_by_key(|e| (e.matrix, e.block, e.i, e.j));
    for w in entries.windows(2) {
        if (w[0].matrix, w[0].block, w[0].i, w[0].j) == (w[1].matrix, w[1].block, w[1].i, w[1].j) {
            return Err(SdpaError::Shape(format!(
                "duplicate coefficient in matrix {} block {}",
                w[0].matrix, w[0].block
            )));
        }
    }

    Ok(SdpaData {
        prec,
        block_sizes,
        rhs: p.rows.iter().map(|r| r.rhs.clone()).collect(),
        entries,
    })
}

/// Renders the canonical `.dat-s` text.
pub fn to_dat_s(data: &SdpaData) -> String {
    let mut out = String::new();
    out.push_str("\"witbound sdpa export\n");
    out.push_str(&format!("{}\n", data.num_constraints()));
    out.push_str(&format!("{}\n", data.block_sizes.len()));
    let sizes: Vec<String> = data.block_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let rhs: Vec<String> = data
        .rhs
        .iter()
        .map(|v| hp::fmt_sci(v, EXPORT_DIGITS, Round::Nearest))
        .collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');
    for e in &data.entries {
        out.push_str(&format!(
            "{} {} {} {} {}\n",
            e.matrix,
            e.block + 1,
            e.i + 1,
            e.j + 1,
            hp::fmt_sci(&e.value, EXPORT_DIGITS, Round::Nearest)
        ));
    }
    out
}

/// Parses `.dat-s` text.  Accepts comment lines starting with `"` or `*`,
/// and treats commas, parentheses and braces as whitespace, matching what
/// common writers emit.
pub fn parse_dat_s(text: &str, prec: Prec) -> Result<SdpaData, SdpaError> {
    struct Toks<'a> {
        toks: Vec<&'a str>,
        pos: usize,
    }
    impl<'a> Toks<'a> {
        /// Returns the token and its index.
        fn next(&mut self, what: &str) -> Result<(&'a str, usize), SdpaError> {
            let t = self
                .toks
                .get(self.pos)
                .copied()
                .ok_or_else(|| SdpaError::Parse {
                    index: self.pos,
                    msg: format!("unexpected end of file while reading {what}"),
                })?;
            self.pos += 1;
            Ok((t, self.pos - 1))
        }
        fn usize(&mut self, what: &str) -> Result<(usize, usize), SdpaError> {
            let (t, at) = self.next(what)?;
            let v = t.parse::<usize>().map_err(|_| SdpaError::Parse {
                index: at,
                msg: format!("bad {what}: {t:?}"),
            })?;
            Ok((v, at))
        }
        fn float(&mut self, prec: Prec, what: &str) -> Result<Float, SdpaError> {
            let (t, at) = self.next(what)?;
            hp::parse_decimal(prec, t).ok_or_else(|| SdpaError::Parse {
                index: at,
                msg: format!("bad number: {t:?}"),
            })
        }
        fn done(&self) -> bool {
            self.pos >= self.toks.len()
        }
    }

    let mut cleaned = String::with_capacity(text.len());
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('"') || trimmed.starts_with('*') {
            continue;
        }
        cleaned.push_str(line);
        cleaned.push('\n');
    }
    let cleaned: String = cleaned
        .chars()
        .map(|c| match c {
            ',' | '{' | '}' | '(' | ')' => ' ',
            other => other,
        })
        .collect();
    let mut cur = Toks {
        toks: cleaned.split_whitespace().collect(),
        pos: 0,
    };

    let (m, _) = cur.usize("constraint count")?;
    let (nb, _) = cur.usize("block count")?;
    let mut block_sizes = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (t, at) = cur.next("block size")?;
        let s: i64 = t.parse().map_err(|_| SdpaError::Parse {
            index: at,
            msg: format!("bad block size: {t:?}"),
        })?;
        if s == 0 {
            return Err(SdpaError::Parse {
                index: at,
                msg: "zero block size".into(),
            });
        }
        block_sizes.push(s);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(cur.float(prec, "right-hand side")?);
    }
    let mut entries = Vec::new();
    while !cur.done() {
        let (matrix, at0) = cur.usize("matrix index")?;
        let (block, at1) = cur.usize("block index")?;
        let (i, at2) = cur.usize("row index")?;
        let (j, _) = cur.usize("column index")?;
        let value = cur.float(prec, "value")?;
        if matrix > m {
            return Err(SdpaError::Parse {
                index: at0,
                msg: format!("matrix index {matrix} exceeds {m}"),
            });
        }
        if block == 0 || block > block_sizes.len() || i == 0 || j == 0 {
            return Err(SdpaError::Parse {
                index: at1,
                msg: "indices are 1-based".into(),
            });
        }
        let size = block_sizes[block - 1].unsigned_abs() as usize;
        if i > size || j > size {
            return Err(SdpaError::Parse {
                index: at2,
                msg: format!("entry ({i},{j}) exceeds block size {size}"),
            });
        }
        if i > j {
            return Err(SdpaError::Parse {
                index: at2,
                msg: "lower-triangle entry".into(),
            });
        }
        if block_sizes[block - 1] < 0 && i != j {
            return Err(SdpaError::Parse {
                index: at2,
                msg: "off-diagonal entry in a diagonal block".into(),
            });
        }
        if value.is_zero() {
            continue;
        }
        entries.push(SdpaEntry {
            matrix,
            block: block - 1,
            i: i - 1,
            j: j - 1,
            value,
        });
    }
    entries.sort_by_key(|e| (e.matrix, e.block, e.i, e.j));
    for w in entries.windows(2) {
        if (w[0].matrix, w[0].block, w[0].i, w[0].j) == (w[1].matrix, w[1].block, w[1].i, w[1].j) {
            return Err(SdpaError::Shape("duplicate coefficient".into()));
        }
    }
    Ok(SdpaData {
        prec,
        block_sizes,
        rhs,
        entries,
    })
}

/// Evaluates `⟨F_k, Y⟩` for the block-diagonal `Y` assembled from a solved
/// problem (conic part, slack activities, split free variables), so the
/// export mapping can be verified without an external solver.
pub fn check_against_solution(
    p: &SdpProblem,
    data: &SdpaData,
    sol: &SdpSolution,
) -> Result<Float, SdpaError> {
    let prec = p.prec;
    // Assemble the diagonal extension blocks.
    let num_ge = p.rows.iter().filter(|r| r.kind == RowKind::Ge).count();
    let activities = p.row_activity(sol);
    let mut slacks = Vec::with_capacity(num_ge);
    for (row, act) in p.rows.iter().zip(activities.iter()) {
        if row.kind == RowKind::Ge {
            slacks.push(Float::with_val(prec, act - &row.rhs));
        }
    }
    let mut split = Vec::with_capacity(2 * p.num_free);
    for v in &sol.x_free {
        if *v >= 0 {
            split.push(v.clone());
        } else {
            split.push(Float::new(prec));
        }
    }
    for v in &sol.x_free {
        if *v < 0 {
            split.push(-v.clone());
        } else {
            split.push(Float::new(prec));
        }
    }

    let lookup = |block: usize, i: usize, j: usize| -> Float {
        if block < p.blocks.len() {
            match &sol.x_blocks[block] {
                BlockSol::Psd(m) => m[(i, j)].clone(),
                BlockSol::Diag(d) => d[i].clone(),
            }
        } else if block == p.blocks.len() && num_ge > 0 {
            slacks[i].clone()
        } else {
            split[i].clone()
        }
    };

    let mut inner = vec![Float::new(prec); data.num_constraints() + 1];
    for e in &data.entries {
        let y = lookup(e.block, e.i, e.j);
        let mut c = Float::with_val(prec, &e.value * &y);
        if e.i != e.j {
            c *= 2;
        }
        inner[e.matrix] += c;
    }
    for (k, rhs) in data.rhs.iter().enumerate() {
        let dev = Float::with_val(prec, &inner[k + 1] - rhs).abs();
        let tol = Float::with_val(prec, 1e-12);
        if dev > tol {
            return Err(SdpaError::Shape(format!(
                "constraint {} deviates by {:e}",
                k + 1,
                dev.to_f64()
            )));
        }
    }
    // ⟨F_0, Y⟩ should be the negated primal objective.
    Ok(inner[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::float;
    use crate::ipm::{self, SdpRow, SdpTerm, SolverConfig};

    const P: Prec = 256;

    fn mixed_problem() -> SdpProblem {
        // min x11 + x22 + 0.5 q  s.t.  x11 - v = 0,  v + q ≥ 1.5,  q ≥ 0
        // diag.  (The x22 term keeps the dual strictly feasible.)
        SdpProblem {
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
                    value: float(P, 1),
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
                    terms: vec![SdpTerm {
                        block: 0,
                        i: 0,
                        j: 0,
                        value: float(P, 1),
                    }],
                    free: vec![(0, float(P, -1))],
                    rhs: float(P, 0),
                },
                SdpRow {
                    kind: RowKind::Ge,
                    terms: vec![SdpTerm {
                        block: 1,
                        i: 0,
                        j: 0,
                        value: float(P, 1),
                    }],
                    free: vec![(0, float(P, 1))],
                    rhs: float(P, 1.5),
                },
            ],
        }
    }

    #[test]
    fn export_layout_is_canonical() {
        let data = from_problem(&mixed_problem()).unwrap();
        // Blocks: psd 2, diag -1, slack diag -1, free split diag -2.
        assert_eq!(data.block_sizes, vec![2, -1, -1, -2]);
        assert_eq!(data.num_constraints(), 2);
        // F_0 = -C: two entries; row 1: x11 and v-split; row 2: q, slack,
        // v-split.
        let coords: Vec<(usize, usize, usize, usize)> = data
            .entries
            .iter()
            .map(|e| (e.matrix, e.block, e.i, e.j))
            .collect();
        assert_eq!(
            coords,
            vec![
                (0, 0, 0, 0),
                (0, 0, 1, 1),
                (0, 1, 0, 0),
                (1, 0, 0, 0),
                (1, 3, 0, 0),
                (1, 3, 1, 1),
                (2, 1, 0, 0),
                (2, 2, 0, 0),
                (2, 3, 0, 0),
                (2, 3, 1, 1),
            ]
        );
        // Spot values: F_0 psd entries are -1; the slack is -1; the split
        // pair of the row-1 free coefficient -1 is (-1, +1).
        assert_eq!(data.entries[0].value, float(P, -1));
        assert_eq!(data.entries[7].value, float(P, -1));
        assert_eq!(data.entries[4].value, float(P, -1));
        assert_eq!(data.entries[5].value, float(P, 1));
    }

    #[test]
    fn render_parse_round_trip_is_byte_identical() {
        let mut p = mixed_problem();
        // Exercise non-terminating decimals too.
        p.rows[1].rhs = crate::hp::pi(P);
        let data = from_problem(&p).unwrap();
        let text1 = to_dat_s(&data);
        let parsed = parse_dat_s(&text1, P).unwrap();
        let text2 = to_dat_s(&parsed);
        assert_eq!(text1, text2);
        // And a second round for good measure.
        let parsed2 = parse_dat_s(&text2, P).unwrap();
        assert_eq!(to_dat_s(&parsed2), text2);
    }

    #[test]
    fn exported_constraints_hold_at_the_solved_point() {
        let p = mixed_problem();
        let sol = ipm::solve(
            &p,
            &SolverConfig {
                prec: P,
                tol_gap: 1e-22,
                tol_feas: 1e-22,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let data = from_problem(&p).unwrap();
        let f0 = check_against_solution(&p, &data, &sol).unwrap();
        let dev = Float::with_val(P, &f0 + &sol.primal_obj).abs();
        assert!(dev < float(P, 1e-15), "objective mapping off by {dev}");
    }

    #[test]
    fn parser_rejects_malformed_files() {
        assert!(parse_dat_s("", P).is_err());
        // Lower-triangle entry.
        let bad = "1\n1\n2\n1.0\n1 1 2 1 1.0\n";
        assert!(parse_dat_s(bad, P).is_err());
        // Off-diagonal entry in a diagonal block.
        let bad = "1\n1\n-2\n1.0\n1 1 1 2 1.0\n";
        assert!(parse_dat_s(bad, P).is_err());
        // Out-of-range block.
        let bad = "1\n1\n2\n1.0\n1 2 1 1 1.0\n";
        assert!(parse_dat_s(bad, P).is_err());
    }
}
