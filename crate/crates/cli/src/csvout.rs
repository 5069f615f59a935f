//! Minimal CSV assembly. Floats are written with Rust's default Display,
//! which produces the shortest decimal that round-trips the binary64 value,
//! so re-parsing a CSV recovers the bits that were computed.

use std::fmt::Write as _;

pub struct Csv {
    buf: String,
    cols: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        assert!(!header.is_empty());
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv {
            buf,
            cols: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.cols, "csv row width mismatch");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match cell {
                Cell::Num(v) => {
                    let _ = write!(self.buf, "{v}");
                }
                Cell::Int(v) => {
                    let _ = write!(self.buf, "{v}");
                }
                Cell::Text(s) => {
                    debug_assert!(!s.contains(',') && !s.contains('"'));
                    self.buf.push_str(s);
                }
                Cell::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

pub enum Cell<'a> {
    Num(f64),
    Int(u64),
    Text(&'a str),
    Empty,
}
