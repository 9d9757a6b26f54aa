//! Small PDF writer for text reports. Uses the standard Helvetica faces with
//! WinAnsi encoding, keeps content streams uncompressed and adds one outline
//! item per section. Output is a pure function of the input.

use std::fmt::Write as _;

const PAGE_WIDTH: f32 = 595.0;
const PAGE_HEIGHT: f32 = 842.0;
const MARGIN: f32 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Regular,
    Bold,
}

impl Face {
    fn resource(self) -> &'static str {
        match self {
            Face::Regular => "F1",
            Face::Bold => "F2",
        }
    }
}

// Advance widths (1/1000 em) for codes 32..=126.
#[rustfmt::skip]
const HELVETICA: [u16; 95] = [
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278,
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278, 584, 584, 584, 556,
    1015, 667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778,
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 278, 278, 278, 469, 556,
    333, 556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556,
    556, 556, 333, 500, 278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
];

#[rustfmt::skip]
const HELVETICA_BOLD: [u16; 95] = [
    278, 333, 474, 556, 556, 889, 722, 238, 333, 333, 389, 584, 278, 333, 278, 278,
    556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 333, 333, 584, 584, 584, 611,
    975, 722, 722, 722, 722, 667, 611, 778, 722, 278, 556, 722, 611, 833, 722, 778,
    667, 778, 722, 667, 611, 722, 667, 944, 667, 667, 611, 333, 278, 333, 584, 556,
    333, 556, 611, 556, 611, 556, 333, 611, 611, 278, 278, 556, 278, 889, 611, 611,
    611, 611, 389, 556, 333, 611, 556, 778, 556, 556, 500, 389, 280, 389, 584,
];

/// Maps a char onto its WinAnsi code; unmappable chars become `?`.
pub fn win_ansi(c: char) -> u8 {
    match c {
        ' '..='~' => c as u8,
        '\u{a0}'..='\u{ff}' => c as u32 as u8,
        '€' => 0x80,
        '‚' => 0x82,
        '„' => 0x84,
        '…' => 0x85,
        '‘' => 0x91,
        '’' => 0x92,
        '“' => 0x93,
        '”' => 0x94,
        '•' => 0x95,
        '–' => 0x96,
        '\u{2014}' => 0x97,
        '™' => 0x99,
        '\t' => b' ',
        _ => b'?',
    }
}

fn char_width(face: Face, code: u8) -> f32 {
    let table = match face {
        Face::Regular => &HELVETICA,
        Face::Bold => &HELVETICA_BOLD,
    };
    let w = match code {
        32..=126 => table[(code - 32) as usize],
        _ => 556,
    };
    w as f32 / 1000.0
}

pub fn text_width(text: &str, face: Face, size: f32) -> f32 {
    text.chars().map(|c| char_width(face, win_ansi(c))).sum::<f32>() * size
}

/// Encodes `text` as a PDF literal string, parentheses included.
fn literal(text: &str) -> Vec<u8> {
    let mut out = vec![b'('];
    for c in text.chars() {
        match win_ansi(c) {
            b @ (b'(' | b')' | b'\\') => out.extend_from_slice(&[b'\\', b]),
            b => out.push(b),
        }
    }
    out.push(b')');
    out
}

/// Greedy word wrap. Words longer than a line are split by character.
pub fn wrap(text: &str, face: Face, size: f32, width: f32) -> Vec<String> {
    let mut lines = Vec::new();
    for raw in text.split('\n') {
        let mut line = String::new();
        for word in raw.split(' ') {
            let candidate = if line.is_empty() { word.to_string() } else { format!("{line} {word}") };
            if text_width(&candidate, face, size) <= width {
                line = candidate;
                continue;
            }
            if !line.is_empty() {
                lines.push(std::mem::take(&mut line));
            }
            for c in word.chars() {
                line.push(c);
                if text_width(&line, face, size) > width && line.chars().count() > 1 {
                    let last = line.pop().unwrap();
                    lines.push(std::mem::replace(&mut line, last.to_string()));
                }
            }
        }
        lines.push(line);
    }
    lines
}

struct Page {
    content: Vec<u8>,
}

struct OutlineItem {
    title: String,
    page: usize,
}

/// Lays out text top to bottom, breaking pages as needed.
pub struct PdfBuilder {
    title: String,
    pages: Vec<Page>,
    outline: Vec<OutlineItem>,
    cursor: f32,
}

impl PdfBuilder {
    pub fn new(title: impl Into<String>) -> Self {
        PdfBuilder {
            title: title.into(),
            pages: Vec::new(),
            outline: Vec::new(),
            cursor: 0.0,
        }
    }

    fn new_page(&mut self) {
        self.pages.push(Page { content: Vec::new() });
        self.cursor = PAGE_HEIGHT - MARGIN;
    }

    fn ensure_room(&mut self, height: f32) {
        if self.pages.is_empty() || self.cursor - height < MARGIN {
            self.new_page();
        }
    }

    /// Starts a section on a fresh page with a bookmark.
    pub fn section(&mut self, title: &str) {
        self.new_page();
        self.outline.push(OutlineItem {
            title: title.to_string(),
            page: self.pages.len() - 1,
        });
        self.text(title, Face::Bold, 16.0);
        self.space(6.0);
    }

    pub fn heading(&mut self, text: &str) {
        self.space(6.0);
        self.text(text, Face::Bold, 12.0);
    }

    pub fn space(&mut self, points: f32) {
        self.cursor -= points;
    }

    /// Wrapped text in the given face.
    pub fn text(&mut self, text: &str, face: Face, size: f32) {
        let leading = size * 1.35;
        for line in wrap(text, face, size, PAGE_WIDTH - 2.0 * MARGIN) {
            self.ensure_room(leading);
            self.cursor -= leading;
            let page = self.pages.last_mut().unwrap();
            let mut op = format!("BT /{} {} Tf {} {} Td ", face.resource(), num(size), num(MARGIN), num(self.cursor))
                .into_bytes();
            op.extend(literal(&line));
            op.extend_from_slice(b" Tj ET\n");
            page.content.extend(op);
        }
    }

    pub fn paragraph(&mut self, text: &str) {
        self.text(text, Face::Regular, 11.0);
    }

    pub fn section_count(&self) -> usize {
        self.outline.len()
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.pages.is_empty() {
            self.new_page();
        }
        let mut w = ObjWriter::default();
        let n_pages = self.pages.len();
        // Object numbers: 1 catalog, 2 page tree, 3-4 fonts, 5 info,
        // 6 outline root, then page/content pairs, then outline items.
        let page_obj = |i: usize| 7 + 2 * i;
        let item_obj = |i: usize| 7 + 2 * n_pages + i;
        let n_items = self.outline.len();

        w.object(
            1,
            b"<< /Type /Catalog /Pages 2 0 R /Outlines 6 0 R /PageMode /UseOutlines >>".to_vec(),
        );
        let kids: Vec<String> = (0..n_pages).map(|i| format!("{} 0 R", page_obj(i))).collect();
        w.object(
            2,
            format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids.join(" "), n_pages).into_bytes(),
        );
        w.object(
            3,
            b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>".to_vec(),
        );
        w.object(
            4,
            b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica-Bold /Encoding /WinAnsiEncoding >>".to_vec(),
        );
        let mut info = b"<< /Producer (rda) /Title ".to_vec();
        info.extend(literal(&self.title));
        info.extend_from_slice(b" >>");
        w.object(5, info);
        let outline_root = if n_items == 0 {
            "<< /Type /Outlines /Count 0 >>".to_string()
        } else {
            format!(
                "<< /Type /Outlines /First {} 0 R /Last {} 0 R /Count {} >>",
                item_obj(0),
                item_obj(n_items - 1),
                n_items
            )
        };
        w.object(6, outline_root.into_bytes());

        for (i, page) in self.pages.iter().enumerate() {
            w.object(
                page_obj(i),
                format!(
                    "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {} {}] /Resources << /Font << /F1 3 0 R /F2 4 0 R >> >> /Contents {} 0 R >>",
                    num(PAGE_WIDTH),
                    num(PAGE_HEIGHT),
                    page_obj(i) + 1
                )
                .into_bytes(),
            );
            let mut stream = format!("<< /Length {} >>\nstream\n", page.content.len()).into_bytes();
            stream.extend_from_slice(&page.content);
            stream.extend_from_slice(b"endstream");
            w.object(page_obj(i) + 1, stream);
        }

        for (i, item) in self.outline.iter().enumerate() {
            let mut body = b"<< /Title ".to_vec();
            body.extend(literal(&item.title));
            let mut rest = format!(" /Parent 6 0 R /Dest [{} 0 R /Fit]", page_obj(item.page));
            if i > 0 {
                let _ = write!(rest, " /Prev {} 0 R", item_obj(i - 1));
            }
            if i + 1 < n_items {
                let _ = write!(rest, " /Next {} 0 R", item_obj(i + 1));
            }
            rest.push_str(" >>");
            body.extend(rest.into_bytes());
            w.object(item_obj(i), body);
        }
        w.finish()
    }
}

fn num(v: f32) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Default)]
struct ObjWriter {
    out: Vec<u8>,
    offsets: Vec<(usize, usize)>,
}

impl ObjWriter {
    fn object(&mut self, id: usize, body: Vec<u8>) {
        if self.out.is_empty() {
            self.out.extend_from_slice(b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n");
        }
        self.offsets.push((id, self.out.len()));
        self.out.extend(format!("{id} 0 obj\n").into_bytes());
        self.out.extend(body);
        self.out.extend_from_slice(b"\nendobj\n");
    }

    fn finish(mut self) -> Vec<u8> {
        self.offsets.sort();
        let size = self.offsets.len() + 1;
        let xref = self.out.len();
        let mut table = format!("xref\n0 {size}\n0000000000 65535 f \n");
        for (_, offset) in &self.offsets {
            let _ = writeln!(table, "{offset:010} 00000 n ");
        }
        let _ = write!(table, "trailer\n<< /Size {size} /Root 1 0 R /Info 5 0 R >>\nstartxref\n{xref}\n%%EOF\n");
        self.out.extend(table.into_bytes());
        self.out
    }
}
