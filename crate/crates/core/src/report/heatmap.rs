use std::fmt::Write;

use super::svg::{escape, open, text_width};
use crate::analysis::DeviationMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 24;

const NEGATIVE: (f64, f64, f64) = (33.0, 102.0, 172.0);
const POSITIVE: (f64, f64, f64) = (178.0, 24.0, 43.0);

/// Which labels (rows) a heatmap shows.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSpec {
    pub top_k: usize,
    /// Explicit rows; overrides `top_k` selection.
    pub labels: Option<Vec<String>>,
    /// Label frequencies used to pick the `top_k` most frequent labels.
    /// Without them the first `top_k` labels of the matrix are shown.
    pub frequencies: Option<Vec<(String, usize)>>,
    pub title: Option<String>,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        HeatmapSpec {
            top_k: DEFAULT_TOP_K,
            labels: None,
            frequencies: None,
            title: None,
        }
    }
}

impl HeatmapSpec {
    /// Row indices into `d.labels`, in display order.
    pub fn select(&self, d: &DeviationMatrix) -> Result<Vec<usize>> {
        let index = |l: &str| {
            d.labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::validation(format!("unknown label {l:?}")))
        };
        if let Some(labels) = &self.labels {
            return labels.iter().map(|l| index(l)).collect();
        }
        match &self.frequencies {
            Some(freq) => {
                let mut ranked: Vec<&(String, usize)> =
                    freq.iter().filter(|(l, _)| d.labels.contains(l)).collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                ranked.iter().take(self.top_k).map(|(l, _)| index(l)).collect()
            }
            None => Ok((0..d.labels.len().min(self.top_k)).collect()),
        }
    }
}

/// Diverging color for `c` with the scale saturating at `max_abs`: blue for
/// negative, white at zero, red for positive.
pub fn cell_color(c: f64, max_abs: f64) -> String {
    if c == 0.0 || max_abs == 0.0 || !c.is_finite() {
        return "#ffffff".into();
    }
    let t = (c.abs() / max_abs).min(1.0);
    let end = if c > 0.0 { POSITIVE } else { NEGATIVE };
    let mix = |e: f64| (255.0 + (e - 255.0) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(end.0), mix(end.1), mix(end.2))
}

const CELL_H: f64 = 22.0;
const FONT: f64 = 12.0;

/// Renders labels as rows and groups as columns. Every cell carries a
/// tooltip with its exact value.
pub fn emit_heatmap_svg(d: &DeviationMatrix, spec: &HeatmapSpec) -> Result<String> {
    let rows = spec.select(d)?;
    if rows.is_empty() || d.groups.is_empty() {
        return Err(Error::validation("heatmap has no cells to draw"));
    }
    let max_abs = rows
        .iter()
        .flat_map(|&l| d.cells.iter().map(move |row| row[l].abs()))
        .fold(0.0_f64, f64::max);

    let left = rows
        .iter()
        .map(|&l| text_width(&d.labels[l], FONT))
        .fold(0.0, f64::max)
        + 16.0;
    let cell_w = d
        .groups
        .iter()
        .map(|g| text_width(g, FONT) + 12.0)
        .fold(60.0, f64::max);
    let top = 56.0;
    let width = left + cell_w * d.groups.len() as f64 + 16.0;
    let height = top + CELL_H * rows.len() as f64 + 36.0;

    let mut s = open(width, height);
    let title = spec
        .title
        .clone()
        .unwrap_or_else(|| format!("Deviation by {}", d.characteristic));
    let _ = writeln!(s, "<text x=\"{left:.1}\" y=\"20\" font-size=\"14\">{}</text>", escape(&title));
    for (g, name) in d.groups.iter().enumerate() {
        let x = left + cell_w * (g as f64 + 0.5);
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            top - 8.0,
            escape(name)
        );
    }
    for (r, &l) in rows.iter().enumerate() {
        let y = top + CELL_H * r as f64;
        let label = escape(&d.labels[l]);
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
            left - 8.0,
            y + CELL_H * 0.7
        );
        for (g, name) in d.groups.iter().enumerate() {
            let c = d.cells[g][l];
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{cell_w:.1}\" height=\"{CELL_H:.1}\" \
                 fill=\"{}\" stroke=\"#dddddd\"><title>{label} / {}: {c}</title></rect>",
                left + cell_w * g as f64,
                cell_color(c, max_abs),
                escape(name)
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{left:.1}\" y=\"{:.1}\">color scale: ±{max_abs}</text>",
        height - 12.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}
