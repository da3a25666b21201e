//! Sweep tables and quick-look plots.
//!
//! Floats are written with `{:e}`, the shortest representation that parses
//! back to the same bits. Absent values are empty fields in CSV and `null`
//! in JSON.

use std::fmt::Write as _;
use std::io::Write;

use omtrans_core::transport::{Backend, Study, SweepRecord};
use serde::Serialize;

pub const COLUMNS: [&str; 24] = [
    "delta", "backend", "study", "q_l_fwd", "q_c_fwd", "q_r_fwd", "q_l_bwd", "q_c_bwd", "q_r_bwd", "g2_l",
    "g2_c", "g2_r", "n_l", "n_c", "n_r", "r", "t_l", "t_r", "s", "m_s", "m_r", "dims", "converged", "status",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn dims_string(dims: &[usize]) -> String {
    dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

fn row(rec: &SweepRecord) -> Vec<String> {
    let mut v = vec![fmt_f64(rec.delta), rec.backend.name().into(), rec.study.name().into()];
    v.extend(rec.q_fwd.iter().chain(&rec.q_bwd).map(|&x| fmt_f64(x)));
    v.extend(rec.g2.iter().map(|&x| fmt_opt(x)));
    v.extend(rec.n.iter().map(|&x| fmt_f64(x)));
    v.extend([rec.r, rec.t_l, rec.t_r, rec.s, rec.m_s, rec.m_r].map(fmt_opt));
    v.push(dims_string(&rec.dims));
    v.push(rec.converged.map(|c| c.to_string()).unwrap_or_default());
    v.push(match &rec.error {
        None => "ok".into(),
        Some(e) => format!("error: {e}"),
    });
    v
}

pub fn write_csv<W: Write>(w: W, records: &[SweepRecord]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(COLUMNS)?;
    for rec in records {
        out.write_record(row(rec))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| format!("{s:?}: {e}"))
}

fn parse_f(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRecord>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header != COLUMNS {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let f = rec.map_err(|e| e.to_string())?;
        let c = |i: usize| f.get(i).unwrap_or("");
        let three = |i: usize| -> Result<[f64; 3], String> { Ok([parse_f(c(i))?, parse_f(c(i + 1))?, parse_f(c(i + 2))?]) };
        let three_opt =
            |i: usize| -> Result<[Option<f64>; 3], String> { Ok([parse_opt(c(i))?, parse_opt(c(i + 1))?, parse_opt(c(i + 2))?]) };
        let status = c(23);
        out.push(SweepRecord {
            delta: parse_f(c(0))?,
            backend: Backend::from_name(c(1)).ok_or_else(|| format!("bad backend {:?}", c(1)))?,
            study: Study::from_name(c(2)).ok_or_else(|| format!("bad study {:?}", c(2)))?,
            q_fwd: three(3)?,
            q_bwd: three(6)?,
            g2: three_opt(9)?,
            n: three(12)?,
            r: parse_opt(c(15))?,
            t_l: parse_opt(c(16))?,
            t_r: parse_opt(c(17))?,
            s: parse_opt(c(18))?,
            m_s: parse_opt(c(19))?,
            m_r: parse_opt(c(20))?,
            dims: if c(21).is_empty() {
                Vec::new()
            } else {
                c(21).split('x').map(|d| d.parse().map_err(|_| format!("bad dims {:?}", c(21)))).collect::<Result<_, _>>()?
            },
            converged: match c(22) {
                "" => None,
                s => Some(s == "true"),
            },
            error: status.strip_prefix("error: ").map(String::from),
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    delta: f64,
    backend: &'a str,
    study: &'a str,
    q_fwd: [f64; 3],
    q_bwd: [f64; 3],
    g2: [Option<f64>; 3],
    n: [f64; 3],
    r: Option<f64>,
    t_l: Option<f64>,
    t_r: Option<f64>,
    s: Option<f64>,
    m_s: Option<f64>,
    m_r: Option<f64>,
    dims: &'a [usize],
    converged: Option<bool>,
    error: Option<&'a str>,
}

pub fn write_json<W: Write>(w: W, records: &[SweepRecord]) -> serde_json::Result<()> {
    let rows: Vec<JsonRecord> = records
        .iter()
        .map(|r| JsonRecord {
            delta: r.delta,
            backend: r.backend.name(),
            study: r.study.name(),
            q_fwd: r.q_fwd,
            q_bwd: r.q_bwd,
            g2: r.g2,
            n: r.n,
            r: r.r,
            t_l: r.t_l,
            t_r: r.t_r,
            s: r.s,
            m_s: r.m_s,
            m_r: r.m_r,
            dims: &r.dims,
            converged: r.converged,
            error: r.error.as_deref(),
        })
        .collect();
    serde_json::to_writer_pretty(w, &rows)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Panel<'a> {
    title: &'a str,
    log_y: bool,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

fn panel_svg(out: &mut String, p: &Panel, top: f64, width: f64, height: f64) {
    let (left, right, pad) = (70.0, 150.0, 30.0);
    let pw = width - left - right;
    let ph = height - 2.0 * pad;
    let ty = |y: f64| if p.log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = p
        .series
        .iter()
        .flat_map(|(_, s)| s.iter().copied())
        .filter(|(_, y)| y.is_finite() && (!p.log_y || *y > 0.0))
        .collect();
    let _ = writeln!(out, r#"<text x="{left}" y="{:.1}" font-size="13">{}</text>"#, top + 18.0, p.title);
    if pts.is_empty() {
        return;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + pad + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph;
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#,
        top + pad
    );
    let ylab = |v: f64| if p.log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ = writeln!(out, r#"<text x="5" y="{:.1}" font-size="10">{}</text>"#, top + pad + 10.0, ylab(y1));
    let _ = writeln!(out, r#"<text x="5" y="{:.1}" font-size="10">{}</text>"#, top + pad + ph, ylab(y0));
    let _ = writeln!(out, r#"<text x="{left}" y="{:.1}" font-size="10">{x0:.4}</text>"#, top + pad + ph + 14.0);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{x1:.4}</text>"#,
        left + pw,
        top + pad + ph + 14.0
    );
    for (k, (name, s)) in p.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        let mut pen_up = true;
        for &(x, y) in s {
            if !y.is_finite() || (p.log_y && y <= 0.0) {
                pen_up = true;
                continue;
            }
            let _ = write!(path, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, sx(x), sy(y));
            pen_up = false;
        }
        let _ = writeln!(out, r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let ly = top + pad + 14.0 * k as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="11" fill="{color}">{name}</text>"#,
            left + pw + 10.0
        );
    }
}

/// Two stacked panels: the study's metrics (linear) and g²(0) (log scale).
pub fn sweep_svg(records: &[SweepRecord]) -> String {
    let mut backends: Vec<Backend> = Vec::new();
    for r in records {
        if !backends.contains(&r.backend) {
            backends.push(r.backend);
        }
    }
    let study = records.first().map(|r| r.study).unwrap_or(Study::Diode);
    let mut metrics = Panel {
        title: "metrics vs detuning",
        log_y: false,
        series: Vec::new(),
    };
    let mut g2 = Panel {
        title: "g2(0) vs detuning (log scale)",
        log_y: true,
        series: Vec::new(),
    };
    type Getter = fn(&SweepRecord) -> Option<f64>;
    let names: Vec<(&str, Getter)> = match study {
        Study::Capacitor => vec![("S", |r| r.s), ("M_S", |r| r.m_s), ("M_R", |r| r.m_r)],
        _ => vec![("R", |r| r.r), ("T_L", |r| r.t_l), ("T_R", |r| r.t_r)],
    };
    for b in &backends {
        let rows: Vec<&SweepRecord> = records.iter().filter(|r| r.backend == *b).collect();
        for (name, get) in &names {
            let s = rows.iter().map(|r| (r.delta, get(r).unwrap_or(f64::NAN))).collect();
            metrics.series.push((format!("{name} {}", b.name()), s));
        }
        for (i, cav) in ["L", "C", "R"].iter().enumerate() {
            let s = rows.iter().map(|r| (r.delta, r.g2[i].unwrap_or(f64::NAN))).collect();
            g2.series.push((format!("g2_{cav} {}", b.name()), s));
        }
    }
    let (w, h) = (720.0, 300.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif">"#,
        2.0 * h
    );
    panel_svg(&mut out, &metrics, 0.0, w, h);
    panel_svg(&mut out, &g2, h, w, h);
    out.push_str("</svg>\n");
    out
}
