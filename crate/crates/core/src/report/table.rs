use crate::analysis::GroupMeans;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// Largest value per label in bold, smallest in italics (both when a
    /// group is the only one).
    Markdown,
    /// Plain values, followed by `max` and `min` rows naming the groups.
    Csv,
}

fn extremes(values: &[f64]) -> (Vec<bool>, Vec<bool>) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (
        values.iter().map(|&v| v == max).collect(),
        values.iter().map(|&v| v == min).collect(),
    )
}

/// Mean probabilities for the chosen labels, one row per group, rounded to
/// five decimals. Ties for the extreme values are all marked.
pub fn emit_group_table(d: &GroupMeans, labels: &[&str], format: TableFormat) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::validation("group table needs at least one label"));
    }
    let cols: Vec<usize> = labels
        .iter()
        .map(|l| {
            d.labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::validation(format!("unknown label {l:?}")))
        })
        .collect::<Result<_>>()?;
    let marks: Vec<(Vec<bool>, Vec<bool>)> = cols
        .iter()
        .map(|&l| extremes(&d.means.iter().map(|row| row[l]).collect::<Vec<_>>()))
        .collect();

    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str(&format!("| {} | {} |\n", d.characteristic, labels.join(" | ")));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(labels.len())));
            for (g, group) in d.groups.iter().enumerate() {
                let cells: Vec<String> = cols
                    .iter()
                    .zip(&marks)
                    .map(|(&l, (hi, lo))| {
                        let v = format!("{:.5}", d.means[g][l]);
                        match (hi[g], lo[g]) {
                            (true, true) => format!("**_{v}_**"),
                            (true, false) => format!("**{v}**"),
                            (false, true) => format!("_{v}_"),
                            _ => v,
                        }
                    })
                    .collect();
                out.push_str(&format!("| {group} | {} |\n", cells.join(" | ")));
            }
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut rows: Vec<Vec<String>> = Vec::new();
            rows.push(
                std::iter::once("group".to_string())
                    .chain(labels.iter().map(|l| l.to_string()))
                    .collect(),
            );
            for (g, group) in d.groups.iter().enumerate() {
                rows.push(
                    std::iter::once(group.clone())
                        .chain(cols.iter().map(|&l| format!("{:.5}", d.means[g][l])))
                        .collect(),
                );
            }
            for (name, pick) in [("max", 0), ("min", 1)] {
                rows.push(
                    std::iter::once(name.to_string())
                        .chain(marks.iter().map(|m| {
                            let flags = if pick == 0 { &m.0 } else { &m.1 };
                            d.groups
                                .iter()
                                .zip(flags)
                                .filter(|(_, &f)| f)
                                .map(|(g, _)| g.as_str())
                                .collect::<Vec<_>>()
                                .join(";")
                        }))
                        .collect(),
                );
            }
            for row in rows {
                w.write_record(&row)
                    .map_err(|e| Error::validation(format!("csv: {e}")))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::validation(format!("csv: {e}")))?;
            out = String::from_utf8(bytes).expect("csv output is utf-8");
        }
    }
    Ok(out)
}
