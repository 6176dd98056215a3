//! CSV, SVG and manifest writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::schemes::Scheme;

use super::{BlerRecord, ScenarioConfig};

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "scheme",
    "snr_db",
    "overload_pct",
    "user",
    "bler",
    "trials",
    "stderr",
];

pub const SNR_DEFINITION: &str =
    "SNR = per-user Es/N0 per resource element per receive antenna (frame energy 1024 over 1024 REs, noise variance 10^(-SNR/10) per RE)";

fn write_records<W: std::io::Write>(records: &[BlerRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        for (u, b) in r.per_user_bler.iter().enumerate() {
            wr.write_record([
                r.scenario.clone(),
                r.scheme.name().to_string(),
                r.snr_db.to_string(),
                r.overload_pct.to_string(),
                u.to_string(),
                b.to_string(),
                r.trials.to_string(),
                r.stderr(u).to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// CSV text for `records`; one row per user.
pub fn csv_string(records: &[BlerRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn emit_csv(records: &[BlerRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    write_records(records, std::fs::File::create(path)?)
}

/// Inverse of [`emit_csv`]. Consecutive rows of the same point form one
/// record; wall time is not stored and comes back as zero.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<BlerRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            source_name: "csv".into(),
            line: 1,
            msg: format!("unexpected header {}", header.join(",")),
        });
    }
    let mut out: Vec<BlerRecord> = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse {
            source_name: "csv".into(),
            line,
            msg,
        };
        let field = |j: usize| {
            row.get(j)
                .ok_or_else(|| bad(format!("missing column {}", CSV_HEADER[j])))
        };
        let num = |j: usize| -> Result<f64> {
            field(j)?
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", CSV_HEADER[j])))
        };
        let int = |j: usize| -> Result<u64> {
            field(j)?
                .parse::<u64>()
                .map_err(|e| bad(format!("{}: {e}", CSV_HEADER[j])))
        };
        let scenario = field(0)?.to_string();
        let scheme: Scheme = field(1)?.parse().map_err(|e: Error| bad(e.to_string()))?;
        let snr_db = num(2)?;
        let overload_pct = int(3)? as u32;
        let user = int(4)? as usize;
        let bler = num(5)?;
        let trials = int(6)?;
        let same = out.last().is_some_and(|r| {
            r.scenario == scenario
                && r.scheme == scheme
                && r.snr_db.to_bits() == snr_db.to_bits()
                && r.overload_pct == overload_pct
                && r.trials == trials
                && r.num_users() == user
        });
        if same {
            out.last_mut().expect("checked").per_user_bler.push(bler);
        } else if user == 0 {
            out.push(BlerRecord {
                scenario,
                scheme,
                snr_db,
                overload_pct,
                per_user_bler: vec![bler],
                trials,
                wall_time: 0.0,
            });
        } else {
            return Err(bad(format!("user {user} without preceding rows")));
        }
    }
    Ok(out)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// BLER used for plotting: zero is drawn at `1/(10·trials)`.
pub fn plot_value(r: &BlerRecord) -> f64 {
    r.avg_bler().max(1.0 / (10.0 * r.trials as f64))
}

/// SVG rendering: average BLER on a log axis against SNR, or against overload
/// when every record shares one SNR. One series per scheme (and per value of
/// the other axis when it varies).
pub fn render_svg(records: &[BlerRecord], title: &str) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to plot".into()));
    }
    let first_snr = records[0].snr_db;
    let by_overload = records.iter().all(|r| r.snr_db == first_snr)
        && records
            .iter()
            .any(|r| r.overload_pct != records[0].overload_pct);
    let multi_other = if by_overload {
        false
    } else {
        records
            .iter()
            .any(|r| r.overload_pct != records[0].overload_pct)
    };
    let x_of = |r: &BlerRecord| {
        if by_overload {
            r.overload_pct as f64
        } else {
            r.snr_db
        }
    };
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for r in records {
        let key = if multi_other {
            format!("{} {}%", r.scheme, r.overload_pct)
        } else {
            r.scheme.to_string()
        };
        if !series.contains_key(&key) {
            order.push(key.clone());
        }
        series
            .entry(key)
            .or_default()
            .push((x_of(r), plot_value(r)));
    }
    let xs: Vec<f64> = records.iter().map(x_of).collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let ymin = records.iter().map(plot_value).fold(1.0, f64::min);
    let d0 = ymin.log10().floor().min(-1.0);
    let (w, h, ml, mr, mt, mb) = (720.0, 480.0, 70.0, 170.0, 40.0, 55.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| mt + (y.log10() / d0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        ml + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let decades = (-d0) as i32;
    for k in 0..=decades {
        let y = mt + (k as f64 / decades as f64) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e-{k}</text>"##,
            ml + pw,
            ml - 6.0,
            y + 4.0
        );
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for &x in &ticks {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"#,
            px(x),
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 18.0,
            x
        );
    }
    let xlabel = if by_overload {
        "overload (%)"
    } else {
        "SNR (dB)"
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        ml + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">average BLER</text>"#,
        mt + ph / 2.0
    );
    for (i, key) in order.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = series[key].clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = mt + 10.0 + 18.0 * i as f64;
        let lx = ml + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(key)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_plot(records: &[BlerRecord], path: &Path, title: &str) -> Result<()> {
    std::fs::write(path, render_svg(records, title)?)?;
    Ok(())
}

/// Run manifest: the resolved configuration, the SNR convention and a
/// summary line per point.
pub fn emit_manifest(cfg: &ScenarioConfig, records: &[BlerRecord], path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# {} {}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(s, "# {SNR_DEFINITION}");
    let _ = writeln!(
        s,
        "# info block K = {} bits including a 16-bit CRC",
        cfg.se.k()
    );
    s.push_str(&cfg.to_toml());
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "# point scheme={} snr_db={} overload_pct={} users={} trials={} avg_bler={} wall_time_s={:.2}",
            r.scheme,
            r.snr_db,
            r.overload_pct,
            r.num_users(),
            r.trials,
            r.avg_bler(),
            r.wall_time
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}
