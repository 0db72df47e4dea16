//! File emission: CSV tables, JSON summaries and SVG plots, written
//! atomically and recorded with their SHA-256 digests.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::ExperimentError;

/// Shortest text that parses back to the same double.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub format: Format,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| ExperimentError::Io(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// Collects the files of one experiment under its output directory.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    formats: BTreeSet<Format>,
    provenance: String,
    pub files: Vec<FileRecord>,
}

impl Emitter {
    pub fn new(dir: PathBuf, formats: BTreeSet<Format>, provenance: String) -> Self {
        Self {
            dir,
            formats,
            provenance,
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    fn write(&mut self, format: Format, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        if !self.wants(format) {
            return Ok(());
        }
        fs::create_dir_all(&self.dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", self.dir.display())))?;
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            format,
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// CSV with a `# {provenance}` first line; `extra` is merged into the
    /// provenance object.
    pub fn csv(
        &mut self,
        name: &str,
        extra: Option<&serde_json::Value>,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), ExperimentError> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut out = format!("# {}\n", self.provenance_with(extra)).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let fail = |e: csv::Error| ExperimentError::Io(format!("{name}: {e}"));
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(&row).map_err(fail)?;
            }
            w.flush().map_err(|e| ExperimentError::Io(format!("{name}: {e}")))?;
        }
        self.write(Format::Csv, name, &out)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ExperimentError> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.write(Format::Json, name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, extra: Option<&serde_json::Value>, body: Svg) -> Result<(), ExperimentError> {
        if !self.wants(Format::Svg) {
            return Ok(());
        }
        let text = body.finish(&self.provenance_with(extra));
        self.write(Format::Svg, name, text.as_bytes())
    }

    /// The manifest is written regardless of the emit set.
    pub fn manifest<T: Serialize>(&self, value: &T) -> Result<(), ExperimentError> {
        fs::create_dir_all(&self.dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", self.dir.display())))?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())
    }

    fn provenance_with(&self, extra: Option<&serde_json::Value>) -> String {
        match extra {
            None => self.provenance.clone(),
            Some(extra) => {
                let mut base: serde_json::Value = serde_json::from_str(&self.provenance).expect("provenance is JSON");
                if let (Some(map), Some(more)) = (base.as_object_mut(), extra.as_object()) {
                    map.extend(more.clone());
                }
                base.to_string()
            }
        }
    }
}

const VIRIDIS: [[f64; 3]; 7] = [
    [
        0.277_727_327_223_417_7,
        0.005_407_344_544_966_578,
        0.334_099_805_335_306_1,
    ],
    [0.105_093_043_108_577_4, 1.404_613_529_898_575, 1.384_590_162_594_685],
    [
        -0.330_861_828_725_556_3,
        0.214_847_559_468_213,
        0.095_095_163_028_236_59,
    ],
    [-4.634_230_498_983_486, -5.799_100_973_351_585, -19.332_440_956_279_87],
    [6.228_269_936_347_081, 14.179_933_366_805_09, 56.690_552_600_681_05],
    [4.776_384_997_670_288, -13.745_145_377_746_01, -65.353_032_633_372_34],
    [-5.435_455_855_934_631, 4.645_852_612_178_535, 26.312_435_249_583_2],
];

/// Polynomial fit of the viridis colormap, `t` in [0, 1].
pub fn viridis(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let channel = |c: usize| {
        let v = VIRIDIS.iter().rev().fold(0.0, |acc, coeffs| acc * t + coeffs[c]);
        (v.clamp(0.0, 1.0) * 255.0).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", channel(0), channel(1), channel(2))
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 110.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PLOT_W: f64 = WIDTH - MARGIN_L - MARGIN_R;
const PLOT_H: f64 = HEIGHT - MARGIN_T - MARGIN_B;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Up to about `n` round tick values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![lo];
    }
    let raw = (hi - lo) / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(x: f64) -> String {
    let s = format!("{:.4}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self {
            lo,
            hi,
            scale: Scale::Linear,
        }
    }

    /// Linear axis around the data with 5% padding.
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            return Self::linear(0.0, 1.0);
        }
        let pad = 0.05 * (hi - lo).max(1e-12);
        Self::linear(lo - pad, hi + pad)
    }

    /// Linear axis drawn from `hi` down to `lo`.
    pub fn reversed(lo: f64, hi: f64) -> Self {
        let a = Self::linear(lo, hi);
        Self {
            lo: a.hi,
            hi: a.lo,
            scale: Scale::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            scale: Scale::Log,
        }
    }

    fn frac(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear => (x - self.lo) / (self.hi - self.lo),
            Scale::Log => (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln()),
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Linear => nice_ticks(self.lo.min(self.hi), self.lo.max(self.hi), 6),
            Scale::Log => {
                let (a, b) = (self.lo.log10().ceil() as i32, self.hi.log10().floor() as i32);
                (a..=b).map(|p| 10f64.powi(p)).collect()
            }
        }
    }
}

/// SVG document under construction: one plot area with axes.
#[derive(Debug)]
pub struct Svg {
    body: String,
    x: Axis,
    y: Axis,
}

impl Svg {
    pub fn new(title: &str, x_label: &str, y_label: &str, x: Axis, y: Axis) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
             <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n\
             <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
            MARGIN_L + PLOT_W / 2.0,
            escape(title),
            MARGIN_L + PLOT_W / 2.0,
            HEIGHT - 12.0,
            escape(x_label),
            MARGIN_T + PLOT_H / 2.0,
            MARGIN_T + PLOT_H / 2.0,
            escape(y_label),
        );
        Self { body, x, y }
    }

    pub fn px(&self, x: f64) -> f64 {
        MARGIN_L + self.x.frac(x) * PLOT_W
    }

    pub fn py(&self, y: f64) -> f64 {
        MARGIN_T + (1.0 - self.y.frac(y)) * PLOT_H
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str) {
        let mut d = String::new();
        for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(d, "{:.2},{:.2} ", self.px(x), self.py(y));
        }
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            d.trim_end()
        );
    }

    pub fn points(&mut self, points: &[(f64, f64)], color: &str, radius: f64) {
        for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(
                self.body,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{color}\"/>",
                self.px(x),
                self.py(y)
            );
        }
    }

    pub fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = MARGIN_T + 14.0 + 20.0 * i as f64;
            let x = WIDTH - MARGIN_R + 12.0;
            let _ = write!(
                self.body,
                "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" stroke-width=\"3\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
                x + 22.0,
                x + 28.0,
                y + 4.0,
                escape(label)
            );
        }
    }

    /// Cells of `values[row][col]` spanning the plot area, row 0 at the
    /// top, colored by `value / max`. Equal neighbouring colors in a row
    /// share one rectangle.
    pub fn heatmap(&mut self, values: &[Vec<f64>]) {
        let rows = values.len();
        let cols = values.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return;
        }
        let max = values.iter().flatten().copied().fold(0.0, f64::max);
        let (cw, ch) = (PLOT_W / cols as f64, PLOT_H / rows as f64);
        let level = |v: f64| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 };
        let _ = writeln!(self.body, "<g shape-rendering=\"crispEdges\">");
        for (r, row) in values.iter().enumerate() {
            let mut c = 0;
            while c < cols {
                let q = level(row[c]);
                let mut end = c + 1;
                while end < cols && level(row[end]) == q {
                    end += 1;
                }
                let _ = writeln!(
                    self.body,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                    MARGIN_L + c as f64 * cw,
                    MARGIN_T + r as f64 * ch,
                    (end - c) as f64 * cw + 0.05,
                    ch + 0.05,
                    viridis(q as f64 / 255.0)
                );
                c = end;
            }
        }
        let _ = writeln!(self.body, "</g>");
        // color bar
        let x = WIDTH - MARGIN_R + 20.0;
        for k in 0..64 {
            let y = MARGIN_T + PLOT_H * (1.0 - (k + 1) as f64 / 64.0);
            let _ = writeln!(
                self.body,
                "<rect x=\"{x:.1}\" y=\"{y:.2}\" width=\"16\" height=\"{:.2}\" fill=\"{}\"/>",
                PLOT_H / 64.0 + 0.05,
                viridis(k as f64 / 63.0)
            );
        }
        let _ = write!(
            self.body,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\">0</text>\n",
            x + 20.0,
            MARGIN_T + 10.0,
            tick_label(max),
            x + 20.0,
            MARGIN_T + PLOT_H,
        );
    }

    fn axes(&self) -> String {
        let mut s = String::new();
        let (x0, y0, x1, y1) = (MARGIN_L, MARGIN_T, MARGIN_L + PLOT_W, MARGIN_T + PLOT_H);
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"none\" stroke=\"black\"/>"
        );
        for t in self.x.ticks() {
            let px = self.px(t);
            if !(x0 - 0.5..=x1 + 0.5).contains(&px) {
                continue;
            }
            let _ = write!(
                s,
                "<line x1=\"{px:.2}\" y1=\"{y1}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
                 <text x=\"{px:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
                y1 + 5.0,
                y1 + 18.0,
                tick_label(t)
            );
        }
        for t in self.y.ticks() {
            let py = self.py(t);
            if !(y0 - 0.5..=y1 + 0.5).contains(&py) {
                continue;
            }
            let _ = write!(
                s,
                "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(t)
            );
        }
        s
    }

    pub fn finish(self, provenance: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
             <!-- {} -->\n{}{}</svg>\n",
            provenance.replace("--", "- -"),
            self.body,
            self.axes()
        )
    }
}
