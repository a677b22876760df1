/// Aligned text table: first column left-aligned, the rest right-aligned,
/// two spaces between columns.
pub(crate) fn align_columns(rows: &[Vec<String>]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|i| {
            rows.iter()
                .filter_map(|r| r.get(i))
                .map(|c| c.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                if i == 0 {
                    format!("{cell:<w$}", w = widths[i])
                } else {
                    format!("{cell:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub(crate) fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> crate::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: String| crate::Error::domain(format!("csv: {e}"));
    for row in rows {
        w.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| err(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
