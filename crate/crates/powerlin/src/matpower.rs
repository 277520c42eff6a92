//! MATPOWER case-file (`.m` function body) parsing, lowering to [`Network`],
//! and serialization back to case text.
//!
//! Only `baseMVA` and the four matrices `bus`, `gen`, `branch`, `gencost`
//! are consumed; any other `mpc.*` assignment is preserved verbatim in the
//! AST and otherwise ignored.

use crate::model::{
    to_per_unit, Branch, Bus, BusKind, CostCurve, Generator, Network,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("missing matrix: mpc.{0}")]
    MissingMatrix(&'static str),
    #[error("unsupported cost model {model} in gencost row {row} (only polynomial model 2)")]
    UnsupportedCostModel { row: usize, model: i64 },
    #[error("invalid bus type {kind} at bus {bus}")]
    InvalidBusType { bus: usize, kind: i64 },
    #[error("matrix mpc.{name} row {row} has {got} columns, expected at least {want}")]
    ShortRow { name: &'static str, row: usize, got: usize, want: usize },
    #[error("gencost has {gencost} rows but gen has {gen}")]
    GencostMismatch { gencost: usize, gen: usize },
    #[error("{0}")]
    Model(#[from] crate::model::ModelError),
}

/// A numeric matrix block with per-row source line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixBlock {
    pub rows: Vec<Vec<f64>>,
    pub lines: Vec<usize>,
}

/// Parsed case file: exact numeric content plus opaque extras.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseFileAst {
    pub name: String,
    pub version: Option<String>,
    pub base_mva: f64,
    pub bus: MatrixBlock,
    pub gen: MatrixBlock,
    pub branch: MatrixBlock,
    pub gencost: MatrixBlock,
    /// Unrecognized `mpc.*` statements, kept verbatim for round-trips.
    pub extras: Vec<String>,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, col, msg: msg.into() }
}

/// Strip a `%` comment, respecting nothing fancier (MATPOWER files do not
/// put `%` inside strings except in comments).
fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_case(text: &str) -> Result<CaseFileAst, ParseError> {
    let mut name = String::from("case");
    let mut version = None;
    let mut base_mva: Option<f64> = None;
    let mut matrices: std::collections::HashMap<String, MatrixBlock> = Default::default();
    let mut extras = Vec::new();

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    let mut saw_any = false;
    while i < lines.len() {
        let raw = lines[i];
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            i += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some(eq) = rest.find('=') {
                name = rest[eq + 1..].trim().trim_end_matches(';').to_string();
            }
            saw_any = true;
            i += 1;
            continue;
        }
        if let Some(rest) = line.strip_prefix("mpc.") {
            saw_any = true;
            let eq = rest.find('=').ok_or_else(|| {
                syntax(i + 1, raw.find('=').unwrap_or(0) + 1, "expected '=' in assignment")
            })?;
            let field = rest[..eq].trim().to_string();
            let value = rest[eq + 1..].trim();
            if value.starts_with('[') {
                // matrix assignment, possibly spanning lines
                let (block, next) = parse_matrix(&lines, i, value, &field)?;
                if matches!(field.as_str(), "bus" | "gen" | "branch" | "gencost") {
                    matrices.insert(field, block);
                } else {
                    extras.push(collect_raw(&lines, i, next));
                }
                i = next;
                continue;
            }
            let scalar_text = value.trim_end_matches(';').trim();
            match field.as_str() {
                "baseMVA" => {
                    let v: f64 = scalar_text.parse().map_err(|_| {
                        syntax(i + 1, eq + 6, format!("invalid number `{scalar_text}`"))
                    })?;
                    base_mva = Some(v);
                }
                "version" => {
                    version = Some(scalar_text.trim_matches(|c| c == '\'' || c == '"').to_string());
                }
                _ => extras.push(raw.to_string()),
            }
            i += 1;
            continue;
        }
        return Err(syntax(i + 1, 1, format!("unexpected statement `{line}`")));
    }
    if !saw_any {
        return Err(syntax(1, 1, "empty case file"));
    }

    let take = |m: &mut std::collections::HashMap<String, MatrixBlock>,
                key: &'static str|
     -> Result<MatrixBlock, ParseError> {
        m.remove(key).ok_or(ParseError::MissingMatrix(key))
    };
    let bus = take(&mut matrices, "bus")?;
    let gen = take(&mut matrices, "gen")?;
    let branch = take(&mut matrices, "branch")?;
    let gencost = take(&mut matrices, "gencost")?;
    check_width(&bus, "bus", 13)?;
    check_width(&gen, "gen", 10)?;
    check_width(&branch, "branch", 13)?;
    check_width(&gencost, "gencost", 4)?;
    if gencost.rows.len() != gen.rows.len() {
        return Err(ParseError::GencostMismatch {
            gencost: gencost.rows.len(),
            gen: gen.rows.len(),
        });
    }
    Ok(CaseFileAst {
        name,
        version,
        base_mva: base_mva
            .ok_or_else(|| syntax(1, 1, "mpc.baseMVA not found"))?,
        bus,
        gen,
        branch,
        gencost,
        extras,
    })
}

fn check_width(m: &MatrixBlock, name: &'static str, want: usize) -> Result<(), ParseError> {
    for (i, row) in m.rows.iter().enumerate() {
        if row.len() < want {
            return Err(ParseError::ShortRow { name, row: i + 1, got: row.len(), want });
        }
    }
    Ok(())
}

fn collect_raw(lines: &[&str], start: usize, end: usize) -> String {
    lines[start..end].join("\n")
}

/// Parse a `[ ... ];` block starting at `lines[start]` whose text after `=`
/// is `first`. A `;` terminates a row, `]` terminates the matrix (flushing
/// any unterminated row). Returns the block and the index of the line after
/// it.
fn parse_matrix(
    lines: &[&str],
    start: usize,
    first: &str,
    field: &str,
) -> Result<(MatrixBlock, usize), ParseError> {
    let mut block = MatrixBlock::default();
    let mut row: Vec<f64> = Vec::new();
    let mut row_line = start + 1;
    let mut i = start;
    let mut text = first.strip_prefix('[').unwrap_or(first).to_string();
    loop {
        let line_no = i + 1;
        let (body, done) = match text.find(']') {
            Some(p) => (text[..p].to_string(), true),
            None => (text.clone(), false),
        };
        for (col0, tok) in tokenize(&body) {
            if tok == ";" {
                if !row.is_empty() {
                    block.rows.push(std::mem::take(&mut row));
                    block.lines.push(row_line);
                }
                row_line = line_no;
                continue;
            }
            if row.is_empty() {
                row_line = line_no;
            }
            let v: f64 = tok.parse().map_err(|_| {
                syntax(line_no, col0 + 1, format!("invalid number `{tok}` in mpc.{field}"))
            })?;
            row.push(v);
        }
        if done {
            if !row.is_empty() {
                block.rows.push(row);
                block.lines.push(row_line);
            }
            return Ok((block, i + 1));
        }
        i += 1;
        if i >= lines.len() {
            return Err(syntax(lines.len(), 1, format!("unterminated matrix mpc.{field}")));
        }
        text = strip_comment(lines[i]).trim().to_string();
    }
}

/// Split a matrix-body line into numeric tokens and `;` separators,
/// keeping byte offsets for diagnostics.
fn tokenize(body: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0usize;
    for (idx, ch) in body.char_indices() {
        if ch == ';' {
            if !cur.is_empty() {
                out.push((cur_start, std::mem::take(&mut cur)));
            }
            out.push((idx, ";".to_string()));
        } else if ch.is_whitespace() || ch == ',' {
            if !cur.is_empty() {
                out.push((cur_start, std::mem::take(&mut cur)));
            }
        } else {
            if cur.is_empty() {
                cur_start = idx;
            }
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push((cur_start, cur));
    }
    out
}

/// Map AST columns to a per-unit [`Network`] (MATPOWER column convention).
pub fn lower_case(ast: &CaseFileAst) -> Result<Network, ParseError> {
    let mut buses = Vec::with_capacity(ast.bus.rows.len());
    for row in &ast.bus.rows {
        let id = row[0] as usize;
        let kind = match row[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Slack,
            other => return Err(ParseError::InvalidBusType { bus: id, kind: other }),
        };
        buses.push(Bus {
            id,
            kind,
            p_load: row[2],
            q_load: row[3],
            shunt_g: row[4],
            shunt_b: row[5],
            v_mag: row[7],
            v_ang: row[8].to_radians(),
            base_kv: row[9],
            v_max: row[11],
            v_min: row[12],
        });
    }
    let mut branches = Vec::new();
    for row in &ast.branch.rows {
        if row[10] == 0.0 {
            continue; // out of service: dropped at lowering
        }
        branches.push(Branch {
            from_bus: row[0] as usize,
            to_bus: row[1] as usize,
            r: row[2],
            x: row[3],
            b_charge: row[4],
            tap: if row[8] == 0.0 { 1.0 } else { row[8] },
            shift: row[9].to_radians(),
            in_service: true,
        });
    }
    let mut generators = Vec::new();
    for (gi, (grow, crow)) in ast.gen.rows.iter().zip(&ast.gencost.rows).enumerate() {
        if grow[7] == 0.0 {
            continue;
        }
        let model = crow[0] as i64;
        if model != 2 {
            return Err(ParseError::UnsupportedCostModel { row: gi + 1, model });
        }
        let n = crow[3] as usize;
        if crow.len() < 4 + n {
            return Err(ParseError::ShortRow { name: "gencost", row: gi + 1, got: crow.len(), want: 4 + n });
        }
        // MATPOWER stores highest degree first; CostCurve wants c0 first
        let mut coeffs: Vec<f64> = crow[4..4 + n].to_vec();
        coeffs.reverse();
        generators.push(Generator {
            bus: grow[0] as usize,
            p_gen: grow[1],
            q_min: grow[4],
            q_max: grow[3],
            v_set: grow[5],
            in_service: true,
            p_max: grow[8],
            p_min: grow[9],
            cost: CostCurve::new(coeffs),
        });
    }
    let net = Network {
        name: ast.name.clone(),
        base_mva: ast.base_mva,
        buses,
        branches,
        generators,
        per_unit: false,
    };
    Ok(to_per_unit(net)?)
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation keeps serialize→parse exact
    format!("{v}")
}

/// Serialize a network back to MATPOWER case text.
/// `parse_case(serialize_case(net))` lowers to a network equal to `net`.
pub fn serialize_case(net: &Network) -> String {
    let s = if net.per_unit { net.base_mva } else { 1.0 };
    let mut out = String::new();
    out.push_str(&format!("function mpc = {}\n", net.name));
    out.push_str("mpc.version = '2';\n");
    out.push_str(&format!("mpc.baseMVA = {};\n", fmt_f64(net.base_mva)));

    out.push_str("\n%% bus data\nmpc.bus = [\n");
    for b in &net.buses {
        let kind = match b.kind {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Slack => 3,
        };
        let cols = [
            b.id as f64,
            kind as f64,
            b.p_load * s,
            b.q_load * s,
            b.shunt_g * s,
            b.shunt_b * s,
            1.0,
            b.v_mag,
            b.v_ang.to_degrees(),
            b.base_kv,
            1.0,
            b.v_max,
            b.v_min,
        ];
        push_row(&mut out, &cols);
    }
    out.push_str("];\n");

    out.push_str("\n%% generator data\nmpc.gen = [\n");
    for g in &net.generators {
        let mut cols = vec![
            g.bus as f64,
            g.p_gen * s,
            0.0,
            g.q_max * s,
            g.q_min * s,
            g.v_set,
            net.base_mva,
            if g.in_service { 1.0 } else { 0.0 },
            g.p_max * s,
            g.p_min * s,
        ];
        cols.extend(std::iter::repeat_n(0.0, 11));
        push_row(&mut out, &cols);
    }
    out.push_str("];\n");

    out.push_str("\n%% branch data\nmpc.branch = [\n");
    for br in &net.branches {
        let cols = [
            br.from_bus as f64,
            br.to_bus as f64,
            br.r,
            br.x,
            br.b_charge,
            0.0,
            0.0,
            0.0,
            if br.tap == 1.0 { 0.0 } else { br.tap },
            br.shift.to_degrees(),
            if br.in_service { 1.0 } else { 0.0 },
            -360.0,
            360.0,
        ];
        push_row(&mut out, &cols);
    }
    out.push_str("];\n");

    out.push_str("\n%% generator cost data\nmpc.gencost = [\n");
    for g in &net.generators {
        let n = g.cost.coefficients.len();
        let mut cols = vec![2.0, 0.0, 0.0, n as f64];
        cols.extend(g.cost.coefficients.iter().rev().copied());
        push_row(&mut out, &cols);
    }
    out.push_str("];\n");
    out
}

fn push_row(out: &mut String, cols: &[f64]) {
    out.push('\t');
    let body: Vec<String> = cols.iter().map(|&v| fmt_f64(v)).collect();
    out.push_str(&body.join("\t"));
    out.push_str(";\n");
}

/// Parse + lower in one step.
pub fn load_case(text: &str) -> Result<Network, ParseError> {
    lower_case(&parse_case(text)?)
}
