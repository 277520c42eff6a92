//! Benchmark report data model and the three emitters (text tables, CSV,
//! structured JSON). The CSV and JSON forms carry identical numeric
//! content; text is for humans.

use powerlin::evaluation::MetricsReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const AXES: [&str; 4] = ["accuracy", "optimality", "feasibility", "speed"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureInfo {
    pub path: String,
    /// FNV-1a 64 of the file bytes, hex.
    pub checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub methods: Vec<u8>,
    pub iters: usize,
    pub repeat: usize,
    pub pf_vset: String,
    pub loss_split: String,
    pub eps_f_source: String,
    pub parallel_cells: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub case: String,
    pub method: u8,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: u8,
    /// accuracy, optimality, feasibility, speed.
    pub scores: [f64; 4],
    pub area: f64,
    /// Polygon vertices on axes at 90° spacing.
    pub vertices: [[f64; 2]; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub axes: [String; 4],
    pub per_method: Vec<MethodScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub version: String,
    pub generated_unix: u64,
    pub config: ConfigEcho,
    pub fixtures: Vec<FixtureInfo>,
    pub cells: Vec<Cell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores_skipped: Option<String>,
}

impl BenchmarkReport {
    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| !c.ok)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// CSV with one row per cell plus score rows; numeric content matches
    /// the JSON form exactly (shortest round-trip float formatting).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "kind,case,method,approx_error,eps_f,eps_pg,eps_v,n_out,n_above,n_below,\
             out_ratio,eps_v_out,wall_time_s,pf_iterations,qp_iterations,error\n",
        );
        for c in &self.cells {
            match (&c.metrics, &c.error) {
                (Some(m), _) => {
                    let approx = m
                        .approx_error
                        .map(|v| format!("{v}"))
                        .unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "cell,{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                        c.case,
                        c.method,
                        approx,
                        m.eps_f,
                        m.eps_pg,
                        m.eps_v,
                        m.n_out,
                        m.n_above,
                        m.n_below,
                        m.out_ratio,
                        m.eps_v_out,
                        m.wall_time_s,
                        m.pf_iterations,
                        m.qp_iterations
                    );
                }
                (None, err) => {
                    let _ = writeln!(
                        out,
                        "cell,{},{},,,,,,,,,,,,,{}",
                        c.case,
                        c.method,
                        err.as_deref().unwrap_or("failed").replace(',', ";")
                    );
                }
            }
        }
        if let Some(s) = &self.scores {
            out.push_str("kind,method,accuracy,optimality,feasibility,speed,area\n");
            for m in &s.per_method {
                let _ = writeln!(
                    out,
                    "score,{},{},{},{},{},{}",
                    m.method, m.scores[0], m.scores[1], m.scores[2], m.scores[3], m.area
                );
            }
        }
        out
    }

    /// Aligned tables, one block per metric family.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let cases: Vec<&str> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.case.as_str()) {
                    seen.push(&c.case);
                }
            }
            seen
        };
        let methods: Vec<u8> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&c.method) {
                    seen.push(c.method);
                }
            }
            seen.sort_unstable();
            seen
        };
        let cell = |case: &str, m: u8| {
            self.cells
                .iter()
                .find(|c| c.case == case && c.method == m)
                .and_then(|c| c.metrics.as_ref())
        };
        let fail = |case: &str, m: u8| {
            self.cells.iter().any(|c| c.case == case && c.method == m && !c.ok)
        };
        let block = |out: &mut String, title: &str, f: &dyn Fn(&MetricsReport) -> String| {
            let _ = writeln!(out, "== {title}");
            let _ = write!(out, "{:<12}", "case");
            for m in &methods {
                let _ = write!(out, "{:>14}", format!("M{m}"));
            }
            out.push('\n');
            for case in &cases {
                let _ = write!(out, "{case:<12}");
                for &m in &methods {
                    let text = if fail(case, m) {
                        "FAILED".to_string()
                    } else {
                        cell(case, m).map(f).unwrap_or_default()
                    };
                    let _ = write!(out, "{text:>14}");
                }
                out.push('\n');
            }
            out.push('\n');
        };
        block(&mut out, "approximation error", &|m| {
            m.approx_error.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
        });
        block(&mut out, "optimality eps_f", &|m| format!("{:.4}", m.eps_f));
        block(&mut out, "optimality eps_pg", &|m| format!("{:.4}", m.eps_pg));
        block(&mut out, "optimality eps_v", &|m| format!("{:.4}", m.eps_v));
        block(&mut out, "feasibility n_out/n_b (above, below)", &|m| {
            format!("{:.4} ({},{})", m.out_ratio, m.n_above, m.n_below)
        });
        block(&mut out, "feasibility eps_v_out", &|m| format!("{:.4}", m.eps_v_out));
        block(&mut out, "execution time, s", &|m| format!("{:.3}", m.wall_time_s));
        if let Some(s) = &self.scores {
            let _ = writeln!(out, "== scores (1-100, higher is better)");
            let _ = writeln!(
                out,
                "{:<8}{:>12}{:>12}{:>12}{:>12}{:>12}",
                "method", "accuracy", "optimality", "feasibility", "speed", "area"
            );
            for m in &s.per_method {
                let _ = writeln!(
                    out,
                    "M{:<7}{:>12.2}{:>12.2}{:>12.2}{:>12.2}{:>12.1}",
                    m.method, m.scores[0], m.scores[1], m.scores[2], m.scores[3], m.area
                );
            }
        } else if let Some(reason) = &self.scores_skipped {
            let _ = writeln!(out, "scores skipped: {reason}");
        }
        out
    }

    /// Flatten every numeric field into (key, value) pairs; used to verify
    /// the CSV and JSON emissions agree.
    pub fn numeric_index(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        for c in &self.cells {
            if let Some(m) = &c.metrics {
                let k = |field: &str| format!("{}/{}/{}", c.case, c.method, field);
                if let Some(a) = m.approx_error {
                    map.insert(k("approx_error"), a);
                }
                map.insert(k("eps_f"), m.eps_f);
                map.insert(k("eps_pg"), m.eps_pg);
                map.insert(k("eps_v"), m.eps_v);
                map.insert(k("n_out"), m.n_out as f64);
                map.insert(k("n_above"), m.n_above as f64);
                map.insert(k("n_below"), m.n_below as f64);
                map.insert(k("out_ratio"), m.out_ratio);
                map.insert(k("eps_v_out"), m.eps_v_out);
                map.insert(k("wall_time_s"), m.wall_time_s);
                map.insert(k("pf_iterations"), m.pf_iterations as f64);
                map.insert(k("qp_iterations"), m.qp_iterations as f64);
            }
        }
        if let Some(s) = &self.scores {
            for m in &s.per_method {
                for (axis, &v) in AXES.iter().zip(&m.scores) {
                    map.insert(format!("score/{}/{}", m.method, axis), v);
                }
                map.insert(format!("score/{}/area", m.method), m.area);
            }
        }
        map
    }

    /// Parse the numeric content back out of a CSV emission.
    pub fn numeric_index_from_csv(csv: &str) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        let cell_fields = [
            "approx_error",
            "eps_f",
            "eps_pg",
            "eps_v",
            "n_out",
            "n_above",
            "n_below",
            "out_ratio",
            "eps_v_out",
            "wall_time_s",
            "pf_iterations",
            "qp_iterations",
        ];
        for line in csv.lines() {
            let cols: Vec<&str> = line.split(',').collect();
            match cols.first() {
                Some(&"cell") if cols.len() >= 15 => {
                    let (case, method) = (cols[1], cols[2]);
                    for (i, field) in cell_fields.iter().enumerate() {
                        if let Ok(v) = cols[3 + i].parse::<f64>() {
                            map.insert(format!("{case}/{method}/{field}"), v);
                        }
                    }
                }
                Some(&"score") if cols.len() >= 7 => {
                    let method = cols[1];
                    for (i, axis) in AXES.iter().enumerate() {
                        if let Ok(v) = cols[2 + i].parse::<f64>() {
                            map.insert(format!("score/{method}/{axis}"), v);
                        }
                    }
                    if let Ok(v) = cols[6].parse::<f64>() {
                        map.insert(format!("score/{method}/area"), v);
                    }
                }
                _ => {}
            }
        }
        map
    }
}

/// FNV-1a 64-bit over raw bytes, reported as hex.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vector() {
        // FNV-1a("a") = 0xaf63dc4c8601ec8c
        assert_eq!(fnv1a_hex(b"a"), "af63dc4c8601ec8c");
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
    }

    #[test]
    fn csv_and_json_numeric_content_agree() {
        let m = MetricsReport {
            method: 1,
            case: "case14".into(),
            approx_error: Some(0.2582441),
            eps_f: 0.0118,
            eps_pg: 0.7802,
            eps_v: 0.0116,
            n_out: 3,
            n_above: 3,
            n_below: 0,
            out_ratio: 3.0 / 14.0,
            eps_v_out: 0.0192,
            wall_time_s: 1.25,
            pf_iterations: 4,
            qp_iterations: 11,
        };
        let report = BenchmarkReport {
            version: "0.1.0".into(),
            generated_unix: 0,
            config: ConfigEcho {
                methods: vec![1],
                iters: 4,
                repeat: 100,
                pf_vset: "case".into(),
                loss_split: "half".into(),
                eps_f_source: "post".into(),
                parallel_cells: true,
            },
            fixtures: vec![],
            cells: vec![Cell {
                case: "case14".into(),
                method: 1,
                ok: true,
                error: None,
                metrics: Some(m),
            }],
            scores: Some(ScoreBlock {
                axes: AXES.map(String::from),
                per_method: vec![MethodScore {
                    method: 1,
                    scores: [100.0, 99.6, 90.62, 100.0],
                    area: 13349.0,
                    vertices: [[100.0, 0.0], [0.0, 99.6], [-90.62, 0.0], [0.0, -100.0]],
                }],
            }),
            scores_skipped: None,
        };
        let from_json = BenchmarkReport::from_json(&report.to_json()).unwrap().numeric_index();
        let from_csv = BenchmarkReport::numeric_index_from_csv(&report.to_csv());
        assert_eq!(from_json, from_csv);
    }
}
