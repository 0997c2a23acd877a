//! Deterministic JSON output: every float is written with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

fn write_float<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    write!(w, "{v:.16e}")
}

/// Compact output with fixed-precision floats.
#[derive(Default)]
pub struct Compact17(CompactFormatter);

impl Formatter for Compact17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }
}

/// Indented output with fixed-precision floats.
pub struct Pretty17<'a>(PrettyFormatter<'a>);

impl Default for Pretty17<'_> {
    fn default() -> Self {
        Pretty17(PrettyFormatter::with_indent(b"  "))
    }
}

impl Formatter for Pretty17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn with<F: Formatter>(v: &impl Serialize, fmt: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    v.serialize(&mut ser).expect("report types serialize infallibly");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn to_json(v: &impl Serialize) -> String {
    with(v, Compact17::default())
}

pub fn to_json_pretty(v: &impl Serialize) -> String {
    with(v, Pretty17::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct R {
        b: f64,
        a: Vec<f64>,
        n: usize,
        inf: f64,
    }

    #[test]
    fn floats_carry_17_digits() {
        let r = R { b: 0.1, a: vec![1.0, -2.5e-300], n: 3, inf: f64::INFINITY };
        let s = to_json(&r);
        assert_eq!(s, r#"{"b":1.0000000000000001e-1,"a":[1.0000000000000000e0,-2.5000000000000000e-300],"n":3,"inf":null}"#);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["b"].as_f64(), Some(0.1));
        let p = to_json_pretty(&r);
        assert!(p.contains("\n  \"a\": [\n    1.0000000000000000e0,"));
    }
}
