//! Radar-chart scoring output: per-method spokes, polygon areas, and an
//! optional SVG rendering.

use crate::harness::compute_scores;
use crate::report::{BenchmarkReport, ScoreBlock};
use powerlin::linear::Method;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RadarError {
    #[error("incomplete matrix: {0}")]
    IncompleteMatrix(String),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreDocument {
    pub axes: [String; 4],
    pub per_method: Vec<crate::report::MethodScore>,
    /// Method id with the largest polygon area.
    pub largest_area: u8,
}

/// Recompute scores from a report's cells and identify the dominant method.
pub fn score_report(report: &BenchmarkReport) -> Result<ScoreDocument, RadarError> {
    let methods: Vec<Method> = report
        .config
        .methods
        .iter()
        .filter_map(|&id| Method::from_id(id))
        .collect();
    let block = compute_scores(&report.cells, &methods).map_err(RadarError::IncompleteMatrix)?;
    Ok(document_from_block(block))
}

pub fn document_from_block(block: ScoreBlock) -> ScoreDocument {
    let largest_area = block
        .per_method
        .iter()
        .max_by(|a, b| a.area.partial_cmp(&b.area).expect("areas are finite"))
        .map(|m| m.method)
        .unwrap_or(0);
    ScoreDocument { axes: block.axes, per_method: block.per_method, largest_area }
}

/// Minimal standalone SVG of the radar polygons.
pub fn render_svg(doc: &ScoreDocument) -> String {
    let size = 420.0;
    let center = size / 2.0;
    let scale = (size / 2.0 - 30.0) / 100.0;
    let colors = ["#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d"];
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" \
         viewBox=\"0 0 {size} {size}\">\n"
    ));
    // axes and rings
    for r in [25.0, 50.0, 75.0, 100.0] {
        out.push_str(&format!(
            "<circle cx=\"{center}\" cy=\"{center}\" r=\"{}\" fill=\"none\" \
             stroke=\"#ddd\"/>\n",
            r * scale
        ));
    }
    let axis_ends = [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0)];
    for (k, (dx, dy)) in axis_ends.iter().enumerate() {
        let x = center + 100.0 * scale * dx;
        let y = center + 100.0 * scale * dy;
        out.push_str(&format!(
            "<line x1=\"{center}\" y1=\"{center}\" x2=\"{x}\" y2=\"{y}\" stroke=\"#bbb\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" fill=\"#555\">{}</text>\n",
            doc.axes[k]
        ));
    }
    for (i, m) in doc.per_method.iter().enumerate() {
        let pts: Vec<String> = m
            .vertices
            .iter()
            .map(|[x, y]| {
                // svg y grows downward
                format!("{},{}", center + x * scale, center - y * scale)
            })
            .collect();
        out.push_str(&format!(
            "<polygon points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
            pts.join(" "),
            colors[i % colors.len()]
        ));
        out.push_str(&format!(
            "<text x=\"8\" y=\"{}\" font-size=\"12\" fill=\"{}\">M{} area {:.0}</text>\n",
            16 + 14 * i,
            colors[i % colors.len()],
            m.method,
            m.area
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{MethodScore, AXES};

    fn block(areas: &[(u8, [f64; 4])]) -> ScoreBlock {
        ScoreBlock {
            axes: AXES.map(String::from),
            per_method: areas
                .iter()
                .map(|&(m, s)| MethodScore {
                    method: m,
                    scores: s,
                    area: powerlin::evaluation::radar_area(&s),
                    vertices: crate::harness::polygon_vertices(&s),
                })
                .collect(),
        }
    }

    #[test]
    fn largest_area_identified() {
        let doc = document_from_block(block(&[
            (1, [90.0, 95.0, 91.0, 100.0]),
            (2, [66.0, 1.0, 42.0, 1.0]),
        ]));
        assert_eq!(doc.largest_area, 1);
    }

    #[test]
    fn identical_aggregates_give_identical_polygons() {
        let doc = document_from_block(block(&[
            (6, [43.0, 99.9, 100.0, 61.7]),
            (7, [43.0, 99.9, 100.0, 61.7]),
        ]));
        assert_eq!(doc.per_method[0].vertices, doc.per_method[1].vertices);
        assert_eq!(doc.per_method[0].area, doc.per_method[1].area);
    }

    #[test]
    fn svg_contains_one_polygon_per_method() {
        let doc = document_from_block(block(&[
            (1, [90.0, 95.0, 91.0, 100.0]),
            (2, [66.0, 1.0, 42.0, 1.0]),
        ]));
        let svg = render_svg(&doc);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.starts_with("<svg"));
    }
}
