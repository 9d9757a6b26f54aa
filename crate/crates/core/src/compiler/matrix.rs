//! Tag co-occurrence. `conditional[i][j]` is P(tag j | tag i): of the
//! entries carrying the row tag, the share that also carry the column tag.
//! Rows condition, so the matrix is generally not symmetric.

use std::fmt::Write as _;

use serde::Serialize;

use crate::journal::JournalEntry;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagMatrix {
    pub tags: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub conditional: Vec<Vec<f64>>,
}

impl TagMatrix {
    /// Builds the matrix over every tag used at least once. Tags follow
    /// `order` (typically the registry); tags missing from it come after,
    /// sorted by name.
    pub fn from_entries(entries: &[JournalEntry], order: &[String]) -> TagMatrix {
        let used = |t: &String| entries.iter().any(|e| e.tags.contains(t));
        let mut tags: Vec<String> = order.iter().filter(|t| used(t)).cloned().collect();
        let mut extra: Vec<String> = entries
            .iter()
            .flat_map(|e| e.tags.iter())
            .filter(|t| !order.contains(t))
            .cloned()
            .collect();
        extra.sort();
        extra.dedup();
        tags.extend(extra);

        let n = tags.len();
        let mut counts = vec![vec![0u64; n]; n];
        for entry in entries {
            let present: Vec<usize> = (0..n).filter(|&i| entry.tags.contains(&tags[i])).collect();
            for &i in &present {
                for &j in &present {
                    counts[i][j] += 1;
                }
            }
        }
        let conditional = counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&c| if row[i] == 0 { 0.0 } else { c as f64 / row[i] as f64 })
                    .collect()
            })
            .collect();
        TagMatrix { tags, counts, conditional }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    /// P(`col` | `row`), looked up by tag name.
    pub fn p(&self, col: &str, row: &str) -> Option<f64> {
        Some(self.conditional[self.index(row)?][self.index(col)?])
    }

    /// Header row and column of tag names, values to 4 decimals.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.tags.iter().cloned());
        writer.write_record(&header).expect("csv to memory");
        for (tag, row) in self.tags.iter().zip(&self.conditional) {
            let mut record = vec![tag.clone()];
            record.extend(row.iter().map(|v| format!("{v:.4}")));
            writer.write_record(&record).expect("csv to memory");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf-8 csv")
    }

    pub fn to_svg(&self) -> String {
        const CELL: usize = 44;
        const LABEL: usize = 150;
        let n = self.len();
        let width = LABEL + n * CELL + 20;
        let height = LABEL + n * CELL + 40;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        );
        let _ = writeln!(
            svg,
            "<text x=\"4\" y=\"16\" font-size=\"13\">P(column | row): share of row-tag entries that also carry the column tag</text>"
        );
        for (i, tag) in self.tags.iter().enumerate() {
            let x = LABEL + i * CELL + CELL / 2;
            let _ = writeln!(
                svg,
                "<text x=\"{x}\" y=\"{}\" transform=\"rotate(-60 {x} {})\">{}</text>",
                LABEL - 6,
                LABEL - 6,
                xml_escape(tag)
            );
            let y = LABEL + i * CELL + CELL / 2 + 4;
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>",
                LABEL - 6,
                xml_escape(tag)
            );
        }
        for (i, row) in self.conditional.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let (x, y) = (LABEL + j * CELL, LABEL + i * CELL);
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"#ffffff\"><title>P({} | {}) = {v:.4}</title></rect>",
                    shade(v),
                    xml_escape(&self.tags[j]),
                    xml_escape(&self.tags[i])
                );
                let ink = if v > 0.55 { "#ffffff" } else { "#000000" };
                let _ = writeln!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\">{v:.2}</text>",
                    x + CELL / 2,
                    y + CELL / 2 + 4
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// White at 0 to dark blue at 1.
fn shade(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let mix = |from: f64, to: f64| (from + (to - from) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(255.0, 8.0), mix(255.0, 48.0), mix(255.0, 107.0))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
