use std::path::Path;

use crate::analysis::{BaselineDistribution, DeviationMatrix, GroupMeans};
use crate::error::{Error, Result};

fn matrix_csv<T: ToString>(groups: &[String], labels: &[String], cell: impl Fn(usize, usize) -> T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::validation(format!("csv: {e}"));
    let header: Vec<&str> = std::iter::once("label")
        .chain(groups.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(fail)?;
    for (l, label) in labels.iter().enumerate() {
        let row: Vec<String> = std::iter::once(label.clone())
            .chain((0..groups.len()).map(|g| cell(g, l).to_string()))
            .collect();
        w.write_record(&row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per label, one column per group. Floats use the shortest
/// representation that reads back to the same value.
pub fn deviation_csv(d: &DeviationMatrix) -> Result<String> {
    matrix_csv(&d.groups, &d.labels, |g, l| d.cells[g][l])
}

pub fn means_csv(m: &GroupMeans) -> Result<String> {
    matrix_csv(&m.groups, &m.labels, |g, l| m.means[g][l])
}

/// Label counts per observed group, with a leading `notes` row holding the
/// group sizes.
pub fn baseline_counts_csv(b: &BaselineDistribution) -> Result<String> {
    let mut labels = vec!["notes".to_string()];
    labels.extend(b.labels.iter().cloned());
    matrix_csv(&b.groups, &labels, |g, l| {
        if l == 0 {
            b.group_sizes[g]
        } else {
            b.counts[g][l - 1]
        }
    })
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
