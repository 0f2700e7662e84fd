//! Text tables, JSON bundle and SVG scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{Character, Corpus};
use crate::error::{domain, Error, Result};
use crate::traditions::{
    AggregateChange, AnalysisOptions, AssociationResult, Label, MovementReport,
};
use crate::validity::ValidityPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub restarts: usize,
    pub k_target: usize,
    pub split_year: i32,
    pub policy: ValidityPolicy,
    pub version: String,
}

impl ReportMeta {
    pub fn new(opts: &AnalysisOptions, split_year: i32) -> Self {
        ReportMeta {
            seed: opts.seed,
            restarts: opts.restarts,
            k_target: opts.k_target,
            split_year,
            policy: opts.policy,
            version: crate::VERSION.to_string(),
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            k_target: self.k_target,
            restarts: self.restarts,
            seed: self.seed,
            policy: self.policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub meta: ReportMeta,
    pub movements: Vec<MovementReport>,
    pub changes: Vec<AggregateChange>,
    pub correlation: Option<f64>,
    pub associations: Vec<AssociationResult>,
}

// ---------------------------------------------------------------------------
// Text tables

fn render_table(header: &[&str], rows: &[Vec<String>], footer: Option<&str>) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            rows.iter()
                .map(|r| r[j].chars().count())
                .chain([header[j].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-"),
    );
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    if let Some(f) = footer {
        out.push('\n');
        out.push_str(f);
        out.push('\n');
    }
    out
}

const DASH: &str = "---";

/// Cluster summary for every movement of one character, ordered by movement
/// id then slow/mid/fast. Empty traditions appear with N = 0 and dashes.
pub fn emit_cluster_table(reports: &[MovementReport], character: Character) -> Result<String> {
    let mut selected: Vec<&MovementReport> = reports
        .iter()
        .filter(|r| r.character == character)
        .collect();
    if selected.is_empty() {
        return domain(format!(
            "no {}-character movements to tabulate",
            character.as_str()
        ));
    }
    selected.sort_by(|a, b| a.movement_id.cmp(&b.movement_id));
    let mut rows = Vec::new();
    for report in selected {
        for label in Label::ALL {
            let row = match report.cluster(label) {
                Some(c) => vec![
                    report.movement_name.clone(),
                    label.title().to_string(),
                    c.n.to_string(),
                    format!("{:.1}", c.mean_bpm),
                    format!("{:.1}-{:.1}", c.bpm_range.0, c.bpm_range.1),
                    c.fit
                        .as_ref()
                        .map_or(DASH.to_string(), |f| format!("{:.3}", f.r_squared)),
                ],
                None => vec![
                    report.movement_name.clone(),
                    label.title().to_string(),
                    "0".into(),
                    DASH.into(),
                    DASH.into(),
                    DASH.into(),
                ],
            };
            rows.push(row);
        }
    }
    Ok(render_table(
        &["Movement", "Cluster", "N", "Mean BPM", "Range", "R2"],
        &rows,
        None,
    ))
}

fn signed_pct(v: f64) -> String {
    let rounded = (v * 10.0).round() / 10.0;
    if rounded == 0.0 {
        "+0.0%".into()
    } else {
        format!("{rounded:+.1}%")
    }
}

/// Aggregate tempo/duration change table with an |r| footer.
pub fn emit_change_table(changes: &[AggregateChange], correlation: Option<f64>) -> Result<String> {
    if changes.is_empty() {
        return domain("no aggregate changes to tabulate");
    }
    let rows: Vec<Vec<String>> = changes
        .iter()
        .map(|c| {
            vec![
                c.movement_name.clone(),
                signed_pct(c.tempo_pct),
                signed_pct(c.duration_pct),
            ]
        })
        .collect();
    let footer = match correlation {
        Some(r) => format!("|r| = {:.2}", r.abs()),
        None => format!("|r| = {DASH}"),
    };
    Ok(render_table(
        &["Movement", "Tempo %", "Duration %"],
        &rows,
        Some(&footer),
    ))
}

/// Parse a table produced by [`emit_cluster_table`] or [`emit_change_table`]
/// back into trimmed cells (header and rule excluded).
pub fn parse_text_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.split('|').map(|c| c.trim().to_string()).collect())
        .collect()
}

/// Per-recording assignment listing.
pub fn emit_assignments_csv(reports: &[MovementReport], corpus: &Corpus) -> String {
    let mut out = String::from("movement_id,recording_id,performer,year,mean_bpm,label\n");
    for report in reports {
        let mut rows: Vec<(&str, Label)> = report
            .clusters
            .iter()
            .flat_map(|c| c.member_ids.iter().map(move |m| (m.as_str(), c.label)))
            .collect();
        rows.sort();
        for (id, label) in rows {
            let Some(r) = corpus.recording(id) else {
                continue;
            };
            let mean = r.bar_bpm.iter().sum::<f64>() / r.bar_bpm.len() as f64;
            let performer = if r.performer.contains([',', '"']) {
                format!("\"{}\"", r.performer.replace('"', "\"\""))
            } else {
                r.performer.clone()
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{}",
                report.movement_id,
                id,
                performer,
                r.year,
                mean,
                label.as_str()
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON

fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("is_f64");
            *v = serde_json::Number::from_f64(round_sig(x, 6)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and floats rounded to 6 significant digits.
pub fn emit_json(bundle: &ReportBundle) -> String {
    to_rounded_json(bundle)
}

/// The JSON conventions of [`emit_json`] applied to any serialisable value.
pub fn to_rounded_json<T: Serialize>(value: &T) -> String {
    let mut value = serde_json::to_value(value).expect("report types serialise");
    round_floats(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("value serialises");
    out.push('\n');
    out
}

pub fn parse_json(text: &str) -> Result<ReportBundle> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        file: "report.json".into(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// SVG

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub slow: String,
    pub mid: String,
    pub fast: String,
}

impl Default for Palette {
    /// Green, blue, red.
    fn default() -> Self {
        Palette {
            slow: "#2ca02c".into(),
            mid: "#1f77b4".into(),
            fast: "#d62728".into(),
        }
    }
}

impl Palette {
    /// Okabe-Ito colours, distinguishable under common colour-vision deficiencies.
    pub fn colorblind() -> Self {
        Palette {
            slow: "#009e73".into(),
            mid: "#0072b2".into(),
            fast: "#d55e00".into(),
        }
    }

    pub fn color(&self, label: Label) -> &str {
        match label {
            Label::Slow => &self.slow,
            Label::Mid => &self.mid,
            Label::Fast => &self.fast,
        }
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = (span / target_ticks).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

/// Scatter of mean BPM against recording year, coloured by tradition, with
/// the mid cluster's regression drawn dashed when it was fitted.
pub fn emit_scatter_svg(
    report: &MovementReport,
    corpus: &Corpus,
    palette: &Palette,
) -> Result<String> {
    if report.clusters.is_empty() {
        return domain(format!(
            "movement `{}` has no clusters to plot",
            report.movement_id
        ));
    }
    let mut series: BTreeMap<Label, Vec<(String, f64, f64)>> = BTreeMap::new();
    for c in &report.clusters {
        let mut pts = Vec::with_capacity(c.member_ids.len());
        for id in &c.member_ids {
            let Some(r) = corpus.recording(id) else {
                return domain(format!("recording `{id}` is not in the corpus"));
            };
            let mean = r.bar_bpm.iter().sum::<f64>() / r.bar_bpm.len() as f64;
            pts.push((id.clone(), f64::from(r.year), mean));
        }
        series.insert(c.label, pts);
    }
    let all = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (_, x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let (x0, x1) = (
        (x0 / 10.0).floor() * 10.0 - 2.0,
        (x1 / 10.0).ceil() * 10.0 + 2.0,
    );
    let pad = ((y1 - y0) * 0.08).max(1.0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{:.1}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        xml_escape(&format!(
            "{}: mean tempo by recording year",
            report.movement_name
        ))
    );

    // axes and ticks
    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{:.1}"/>"#,
        TOP + plot_h
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="ticks" font-size="11">"#);
    let xstep = nice_step(x1 - x0, 8.0);
    let mut t = (x0 / xstep).ceil() * xstep;
    while t <= x1 {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{t:.0}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 19.0
        );
        t += xstep;
    }
    let ystep = nice_step(y1 - y0, 6.0);
    let decimals = if ystep < 1.0 { 1 } else { 0 };
    let mut t = (y0 / ystep).ceil() * ystep;
    while t <= y1 {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{t:.decimals$}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
        t += ystep;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">Recording year</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="18" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.1})">Mean tempo (BPM)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (label, pts) in &series {
        let _ = writeln!(
            s,
            r#"<g class="points" data-label="{}" fill="{}" stroke="black" stroke-width="0.5">"#,
            label.as_str(),
            xml_escape(palette.color(*label))
        );
        for (id, x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4.5"><title>{} ({x:.0}, {y:.1} BPM)</title></circle>"#,
                sx(*x),
                sy(*y),
                xml_escape(id)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    let mid_fit = report
        .cluster(Label::Mid)
        .and_then(|c| c.fit.as_ref().map(|f| (c, f)));
    if let (Some((_, fit)), Some(pts)) = (mid_fit, series.get(&Label::Mid)) {
        let xa = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let xb = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let ya = fit.intercept + fit.slope * xa;
        let yb = fit.intercept + fit.slope * xb;
        let _ = writeln!(
            s,
            r#"<polyline class="fit" points="{:.1},{:.1} {:.1},{:.1}" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            sx(xa),
            sy(ya),
            sx(xb),
            sy(yb),
            xml_escape(&palette.mid)
        );
    }

    // legend
    let lx = LEFT + plot_w + 20.0;
    let _ = writeln!(s, r#"<g class="legend" font-size="12">"#);
    let mut ly = TOP + 10.0;
    for label in Label::ALL {
        let (n, mean) = report
            .cluster(label)
            .map_or((0, None), |c| (c.n, Some(c.mean_bpm)));
        let text = match mean {
            Some(m) => format!("{} (n = {n}, {m:.1} BPM)", label.title()),
            None => format!("{} (empty)", label.title()),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly - 9.0,
            xml_escape(palette.color(label)),
            lx + 16.0,
            ly,
            xml_escape(&text)
        );
        ly += 20.0;
    }
    if let Some((_, fit)) = mid_fit {
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{:.1}">{}</text>"#,
            ly + 6.0,
            xml_escape(&format!("dashed: mid fit, R\u{b2} = {:.3}", fit.r_squared))
        );
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{:.1}">{}</text>"#,
            ly + 22.0,
            xml_escape(&format!("slope = {:.3} BPM/yr", fit.slope))
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}
