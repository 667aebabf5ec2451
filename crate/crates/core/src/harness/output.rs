//! CSV tables and self-contained SVG line charts.

use super::scenario::Strategy;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const RESULT_COLUMNS: [&str; 11] = [
    "scenario", "axis", "strategy", "rate_mean", "rate_se", "i1_mean", "i2_mean", "dr_ub", "r_lb", "d_chosen", "trials",
];

pub const LEAKAGE_COLUMNS: [&str; 8] = [
    "time_index",
    "mc_prediction",
    "bound_prediction",
    "mc_quantization",
    "bound_quantization",
    "mc_unreduced",
    "bound_unreduced",
    "q_energy",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub axis: f64,
    pub strategy: Strategy,
    pub rate_mean: f64,
    pub rate_se: f64,
    pub i1_mean: f64,
    pub i2_mean: f64,
    pub dr_ub: Option<f64>,
    pub r_lb: Option<f64>,
    pub d_chosen: Option<usize>,
    pub trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
    raw.parse().map_err(|_| Error::Parse(format!("bad value `{raw}` in column `{name}`")))
}

fn opt_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<Option<T>> {
    match rec.get(i) {
        Some("") => Ok(None),
        _ => field(rec, i, name).map(Some),
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(())
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(RESULT_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            wtr.write_record([
                r.scenario.clone(),
                r.axis.to_string(),
                r.strategy.to_string(),
                r.rate_mean.to_string(),
                r.rate_se.to_string(),
                r.i1_mean.to_string(),
                r.i2_mean.to_string(),
                opt(&r.dr_ub),
                opt(&r.r_lb),
                opt(&r.d_chosen),
                r.trials.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        check_header(&mut rdr, &RESULT_COLUMNS)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let strategy: String = field(&rec, 2, "strategy")?;
            rows.push(ResultRow {
                scenario: field(&rec, 0, "scenario")?,
                axis: field(&rec, 1, "axis")?,
                strategy: strategy.parse().map_err(|_| Error::Parse(format!("bad strategy `{strategy}`")))?,
                rate_mean: field(&rec, 3, "rate_mean")?,
                rate_se: field(&rec, 4, "rate_se")?,
                i1_mean: field(&rec, 5, "i1_mean")?,
                i2_mean: field(&rec, 6, "i2_mean")?,
                dr_ub: opt_field(&rec, 7, "dr_ub")?,
                r_lb: opt_field(&rec, 8, "r_lb")?,
                d_chosen: opt_field(&rec, 9, "d_chosen")?,
                trials: field(&rec, 10, "trials")?,
            });
        }
        Ok(ResultTable { rows })
    }

    /// Scenario names in order of first appearance.
    pub fn scenarios(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scenario) {
                out.push(r.scenario.clone());
            }
        }
        out
    }

    /// Rate curves (and rate lower bounds where available) of one scenario.
    pub fn chart(&self, scenario: &str, x_label: &str) -> String {
        let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        let mut order = Vec::new();
        for r in self.rows.iter().filter(|r| r.scenario == scenario) {
            let name = r.strategy.to_string();
            if !series.contains_key(&name) {
                order.push(name.clone());
            }
            series.entry(name.clone()).or_default().push((r.axis, r.rate_mean));
            if let Some(lb) = r.r_lb {
                let lb_name = format!("{name} lower bound");
                if !series.contains_key(&lb_name) {
                    order.push(lb_name.clone());
                }
                series.entry(lb_name).or_default().push((r.axis, lb));
            }
        }
        let lines: Vec<Line> = order
            .into_iter()
            .map(|name| {
                let dashed = name.ends_with("lower bound");
                Line { points: series.remove(&name).unwrap_or_default(), name, dashed }
            })
            .collect();
        line_chart(scenario, x_label, "sum rate [bit/s/Hz]", &lines)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub time_index: usize,
    pub mc_prediction: f64,
    pub bound_prediction: f64,
    pub mc_quantization: f64,
    pub bound_quantization: f64,
    pub mc_unreduced: f64,
    pub bound_unreduced: f64,
    pub q_energy: f64,
}

impl LeakageRow {
    fn values(&self) -> [f64; 7] {
        [
            self.mc_prediction,
            self.bound_prediction,
            self.mc_quantization,
            self.bound_quantization,
            self.mc_unreduced,
            self.bound_unreduced,
            self.q_energy,
        ]
    }
}

/// Mean leakage per interfering stream pair at every payload symbol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeakageTable {
    pub scenario: String,
    pub rows: Vec<LeakageRow>,
}

impl LeakageTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(LEAKAGE_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.time_index.to_string()];
            rec.extend(r.values().iter().map(f64::to_string));
            wtr.write_record(rec).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(scenario: &str, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        check_header(&mut rdr, &LEAKAGE_COLUMNS)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let v = |i: usize| field::<f64>(&rec, i, LEAKAGE_COLUMNS[i]);
            rows.push(LeakageRow {
                time_index: field(&rec, 0, "time_index")?,
                mc_prediction: v(1)?,
                bound_prediction: v(2)?,
                mc_quantization: v(3)?,
                bound_quantization: v(4)?,
                mc_unreduced: v(5)?,
                bound_unreduced: v(6)?,
                q_energy: v(7)?,
            });
        }
        Ok(LeakageTable { scenario: scenario.to_string(), rows })
    }

    /// Leakage power in dB over the payload.
    pub fn chart(&self) -> String {
        let names = [
            ("prediction (MC)", false),
            ("prediction (bound)", true),
            ("quantization (MC)", false),
            ("quantization (bound)", true),
            ("no noise reduction (MC)", false),
            ("no noise reduction (bound)", true),
        ];
        let lines: Vec<Line> = names
            .iter()
            .enumerate()
            .map(|(i, &(name, dashed))| Line {
                name: name.to_string(),
                dashed,
                points: self
                    .rows
                    .iter()
                    .map(|r| (r.time_index as f64, crate::math::linear_to_db(r.values()[i])))
                    .collect(),
            })
            .collect();
        line_chart(&format!("{} leakage", self.scenario), "time index m", "leakage power [dB]", &lines)
    }
}

/// One chart series.
#[derive(Debug, Clone)]
pub struct Line {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() * step;
    (0..).map(|i| start + i as f64 * step).take_while(|t| *t <= hi + 1e-9 * span).collect()
}

/// Self-contained SVG line chart; non-finite points are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, lines: &[Line]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 200.0, 40.0, 55.0);
    let finite = lines.iter().flat_map(|l| l.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(title));
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0"/>"##, top + ph);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, top + ph + 16.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, line) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8"{dash} points="{}"/>"#, pts.join(" "));
        }
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.8"{dash}/>"#, lx + 24.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&line.name));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    if t.abs() < 1e-12 {
        "0".into()
    } else if t.abs() >= 1e4 || t.abs() < 1e-3 {
        format!("{t:.0e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::fs::File) -> Result<()>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    f(&mut file)
}

/// Writes `<scenario>.csv` (and `<scenario>.svg` with `svg`) for every
/// scenario in the table, plus `<scenario>_leakage.csv/.svg` if given.
pub fn emit(
    table: &ResultTable,
    leakage: Option<&LeakageTable>,
    x_label: &str,
    dir: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(Error::Config("nothing to emit: the result table is empty".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for name in table.scenarios() {
        let part = ResultTable { rows: table.rows.iter().filter(|r| r.scenario == name).cloned().collect() };
        let csv_path = dir.join(format!("{name}.csv"));
        write_file(&csv_path, |f| part.write_csv(f))?;
        written.push(csv_path);
        if svg {
            let svg_path = dir.join(format!("{name}.svg"));
            std::fs::write(&svg_path, part.chart(&name, x_label))?;
            written.push(svg_path);
        }
    }
    if let Some(l) = leakage {
        let csv_path = dir.join(format!("{}_leakage.csv", l.scenario));
        write_file(&csv_path, |f| l.write_csv(f))?;
        written.push(csv_path);
        if svg {
            let svg_path = dir.join(format!("{}_leakage.svg", l.scenario));
            std::fs::write(&svg_path, l.chart())?;
            written.push(svg_path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        ResultTable {
            rows: vec![
                ResultRow {
                    scenario: "s".into(),
                    axis: 0.1 + 0.2,
                    strategy: Strategy::Adaptive,
                    rate_mean: 1.0 / 3.0,
                    rate_se: 1e-17,
                    i1_mean: 0.0,
                    i2_mean: 123456.789,
                    dr_ub: Some(2.5),
                    r_lb: Some(-0.75),
                    d_chosen: Some(2),
                    trials: 500,
                },
                ResultRow {
                    scenario: "s".into(),
                    axis: 5.0,
                    strategy: Strategy::Baseline,
                    rate_mean: 0.5,
                    rate_se: 0.01,
                    i1_mean: 1.0,
                    i2_mean: 2.0,
                    dr_ub: None,
                    r_lb: None,
                    d_chosen: None,
                    trials: 1,
                },
            ],
        }
    }

    #[test]
    fn result_csv_round_trips() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scenario,axis,strategy,rate_mean,rate_se,i1_mean,i2_mean,dr_ub,r_lb,d_chosen,trials\n"));
        assert_eq!(ResultTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn leakage_csv_round_trips() {
        let t = LeakageTable {
            scenario: "fig2".into(),
            rows: vec![LeakageRow {
                time_index: 16,
                mc_prediction: 0.1,
                bound_prediction: 0.2,
                mc_quantization: 1e-3,
                bound_quantization: 2e-3,
                mc_unreduced: 0.3,
                bound_unreduced: 0.4,
                q_energy: 0.6,
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(LeakageTable::read_csv("fig2", buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(ResultTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("adaptive", "fastest");
        assert!(ResultTable::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn emit_writes_files_and_refuses_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit(&ResultTable::default(), None, "x", dir.path(), true).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        let files = emit(&sample(), None, "SNR [dB]", dir.path(), true).unwrap();
        assert_eq!(files.len(), 2);
        let svg = std::fs::read_to_string(&files[1]).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("adaptive lower bound"));
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 40.0);
        assert_eq!(t, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert!(nice_ticks(-3.2, 7.9).len() >= 3);
    }
}
