//! Report serialization: JSON with 17 significant digits, written atomically,
//! and streamed CSV traces.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Pretty JSON whose floats are always printed as `d.dddddddddddddddde±x`.
struct FixedDigits<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(value: f64) -> String {
    if value == 0.0 {
        // Normalize negative zero.
        return format!("{:.16e}", 0.0f64);
    }
    format!("{value:.16e}")
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let bytes = to_json_bytes(value).map_err(io::Error::other)?;
    write_atomic(path, &bytes)
}

/// Row-at-a-time CSV writer. The first I/O error is kept and reported by
/// [`CsvTrace::finish`], so rows can be pushed from integration callbacks.
pub struct CsvTrace {
    path: PathBuf,
    out: Option<BufWriter<File>>,
    error: Option<io::Error>,
}

impl CsvTrace {
    pub fn create(path: &Path, header: &[String]) -> io::Result<Self> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: Some(out),
            error: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn row(&mut self, values: &[f64]) {
        if self.error.is_some() {
            return;
        }
        if let Some(out) = self.out.as_mut() {
            let line: Vec<String> = values.iter().map(|&v| format_float(v)).collect();
            if let Err(e) = writeln!(out, "{}", line.join(",")) {
                self.error = Some(e);
            }
        }
    }

    pub fn finish(mut self) -> io::Result<PathBuf> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Some(mut out) = self.out.take() {
            out.flush()?;
        }
        Ok(self.path)
    }
}

/// Optional trace: rows go nowhere when no file was requested.
pub struct MaybeTrace(pub Option<CsvTrace>);

impl MaybeTrace {
    pub fn row(&mut self, values: &[f64]) {
        if let Some(t) = self.0.as_mut() {
            t.row(values);
        }
    }

    pub fn finish(self) -> io::Result<Option<PathBuf>> {
        self.0.map(CsvTrace::finish).transpose()
    }
}

/// `t, re(z_1), im(z_1), …, gamma, alpha`.
pub fn ray_header(n1: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for r in 1..=n1 {
        h.push(format!("re(z_{r})"));
        h.push(format!("im(z_{r})"));
    }
    h.push("gamma".into());
    h.push("alpha".into());
    h
}

/// `t, re(Z_1_1), im(Z_1_1), …` in row-major order.
pub fn matrix_header(n1: usize, n2: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for r in 1..=n1 {
        for s in 1..=n2 {
            h.push(format!("re(Z_{r}_{s})"));
            h.push(format!("im(Z_{r}_{s})"));
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_is_valid_and_uses_fixed_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            c: Option<f64>,
            d: u32,
        }
        let bytes = to_json_bytes(&S {
            a: 2.5,
            b: vec![1e-300, -3.0],
            c: None,
            d: 7,
        })
        .unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("2.5000000000000000e0"));
        assert!(text.contains("\"d\": 7"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"][1].as_f64(), Some(-3.0));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/report.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn headers() {
        assert_eq!(ray_header(2).join(","), "t,re(z_1),im(z_1),re(z_2),im(z_2),gamma,alpha");
        assert_eq!(matrix_header(1, 2).join(","), "t,re(Z_1_1),im(Z_1_1),re(Z_1_2),im(Z_1_2)");
    }
}
