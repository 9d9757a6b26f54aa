use std::fmt::Write as _;
use std::str::FromStr;

use super::pdf::{Face, PdfBuilder};
use crate::journal::JournalEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Pdf,
    Markdown,
    Text,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Pdf => "pdf",
            ReportFormat::Markdown => "md",
            ReportFormat::Text => "txt",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pdf" => Ok(ReportFormat::Pdf),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "txt" | "text" => Ok(ReportFormat::Text),
            other => Err(format!("unknown report format `{other}` (expected pdf, md or txt)")),
        }
    }
}

/// The labelled fields of one entry, in display order.
fn facts(entry: &JournalEntry) -> Vec<(&'static str, String)> {
    let tags = if entry.tags.is_empty() { "(none)".to_string() } else { entry.tags.join(", ") };
    vec![
        ("Status", entry.status.as_str().to_string()),
        ("Tags", tags),
        ("Pre-test", entry.timestamp_pre.to_rfc3339()),
        (
            "Post-test",
            entry.timestamp_post.map(|t| t.to_rfc3339()).unwrap_or_else(|| "(not recorded)".into()),
        ),
        ("Video", entry.video_file.clone().unwrap_or_else(|| "(none)".into())),
    ]
}

fn comment(text: &str) -> &str {
    if text.is_empty() {
        "(empty)"
    } else {
        text
    }
}

/// Renders `entries` as one document with a section per entry, in the
/// given order.
pub fn render(title: &str, entries: &[&JournalEntry], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Pdf => render_pdf(title, entries),
        ReportFormat::Markdown => render_markdown(title, entries).into_bytes(),
        ReportFormat::Text => render_text(title, entries).into_bytes(),
    }
}

fn render_pdf(title: &str, entries: &[&JournalEntry]) -> Vec<u8> {
    let mut pdf = PdfBuilder::new(title);
    for entry in entries {
        pdf.section(&entry.label());
        for (label, value) in facts(entry) {
            pdf.text(&format!("{label}: {value}"), Face::Regular, 10.0);
        }
        pdf.heading("Pre-test reflection");
        pdf.paragraph(comment(&entry.pre_comment));
        pdf.heading("Post-test reflection");
        pdf.paragraph(comment(&entry.post_comment));
    }
    pdf.finish()
}

fn render_markdown(title: &str, entries: &[&JournalEntry]) -> String {
    let mut out = format!("# {title}\n");
    for entry in entries {
        let _ = write!(out, "\n## {}\n\n", entry.label());
        for (label, value) in facts(entry) {
            let _ = writeln!(out, "- **{label}:** {value}");
        }
        let _ = write!(
            out,
            "\n### Pre-test reflection\n\n{}\n\n### Post-test reflection\n\n{}\n",
            comment(&entry.pre_comment),
            comment(&entry.post_comment)
        );
    }
    out
}

fn render_text(title: &str, entries: &[&JournalEntry]) -> String {
    let mut out = format!("{title}\n{}\n", "=".repeat(title.chars().count()));
    for entry in entries {
        let label = entry.label();
        let _ = write!(out, "\n{label}\n{}\n", "-".repeat(label.chars().count()));
        for (name, value) in facts(entry) {
            let _ = writeln!(out, "{name}: {value}");
        }
        let _ = write!(
            out,
            "\nPre-test reflection:\n{}\n\nPost-test reflection:\n{}\n",
            comment(&entry.pre_comment),
            comment(&entry.post_comment)
        );
    }
    out
}
