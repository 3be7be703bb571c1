use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Something with one primary table (the CSV body) and optional extra
/// tables shown in text mode.
pub trait Tabular {
    fn title(&self) -> String;
    fn table(&self) -> Table;
    fn extra(&self) -> Vec<(String, Table)> {
        Vec::new()
    }
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e6)`; `inf` is
/// written as `+inf`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == f64::INFINITY {
        "+inf".into()
    } else if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn text_table(t: &Table, out: &mut String) {
    let mut widths: Vec<usize> = t.header.iter().map(|h| h.len()).collect();
    for r in &t.rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(t.header.clone(), out);
    for r in &t.rows {
        line(r.iter().map(String::as_str).collect(), out);
    }
}

pub fn render<T: Serialize + Tabular>(v: &T, f: Format) -> Result<String, CliError> {
    match f {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Failure(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let t = v.table();
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Failure(e.to_string());
            w.write_record(&t.header).map_err(io)?;
            for r in &t.rows {
                w.write_record(r).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Failure(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Failure(e.to_string()))
        }
        Format::Text => {
            let mut out = format!("{}\n", v.title());
            text_table(&v.table(), &mut out);
            for (title, t) in v.extra() {
                out.push_str(&format!("\n{title}\n"));
                text_table(&t, &mut out);
            }
            Ok(out)
        }
    }
}
