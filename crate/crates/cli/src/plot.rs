//! Gnuplot scripts for the CSV reports. The data are inlined as a datablock,
//! so a script renders without the report next to it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Trajectory,
    Sharpness,
    Decay,
    Spectrum,
}

pub struct Report {
    pub kind: ReportKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_report(text: &str) -> Result<Report, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or("report is empty")?.split(',').map(str::to_string).collect();
    let kind = match header.first().map(String::as_str) {
        Some("t") if header.get(1).map(String::as_str) == Some("E_1") => ReportKind::Trajectory,
        Some("amplitude") => ReportKind::Sharpness,
        Some("n") if header.get(3).map(String::as_str) == Some("fitted_rate") => ReportKind::Decay,
        Some("index") if header.get(1).map(String::as_str) == Some("eigenvalue") => ReportKind::Spectrum,
        _ => return Err(format!("unrecognized report header '{}'", header.join(","))),
    };
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    if rows.is_empty() {
        return Err("report has a header but no rows".into());
    }
    if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(format!("row has {} fields, header has {}", r.len(), header.len()));
    }
    Ok(Report { kind, header, rows })
}

impl Report {
    fn column(&self, name: &str) -> Result<usize, String> {
        self.header.iter().position(|h| h == name).ok_or_else(|| format!("column '{name}' missing"))
    }

    fn number(&self, row: usize, name: &str) -> Result<f64, String> {
        let c = self.column(name)?;
        self.rows[row][c].parse().map_err(|_| format!("column '{name}' holds a non-number '{}'", self.rows[row][c]))
    }

    fn datablock(&self, out: &mut String) {
        out.push_str("$data << EOD\n");
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out.push_str("EOD\n");
    }
}

fn preamble(out: &mut String, image: &str) {
    out.push_str("set terminal pngcairo size 900,600\n");
    let _ = writeln!(out, "set output '{image}'");
    out.push_str("set datafile separator ','\nset key top right\nset grid\n");
}

/// Script text for `report`; `n` is needed for the trajectory envelope.
pub fn script(report: &Report, image: &str, n: Option<usize>) -> Result<String, String> {
    let mut s = String::new();
    preamble(&mut s, image);
    report.datablock(&mut s);
    match report.kind {
        ReportKind::Trajectory => {
            let n = n.ok_or("trajectory plots need --n (or a summary.json next to the report)")?;
            let e0 = report.number(0, "E_1")?;
            let h1 = report.number(0, "H_1")?;
            let _ = writeln!(s, "E0 = {e0:.16e}\nH1 = {h1:.16e}\nn = {n}");
            s.push_str("set logscale y\nset xlabel 't'\nset ylabel 'entropy'\n");
            s.push_str("plot $data using 1:2 with linespoints title 'E_1(t)', \\\n");
            s.push_str("     E0*exp(-n*x/H1) with lines dashtype 2 title 'E_1(0) exp(-n t / H_1[w_0])'");
            let c = report.column("production")?;
            for (i, h) in report.header.iter().enumerate().take(c).skip(2) {
                let _ = write!(s, ", \\\n     $data using 1:{} with lines title '{h}'", i + 1);
            }
            s.push('\n');
        }
        ReportKind::Sharpness => {
            let a = report.column("amplitude")? + 1;
            let t = report.column("tightness")? + 1;
            s.push_str("set logscale x\nset xlabel 'amplitude'\nset ylabel 'tightness'\nset yrange [0:1.05]\n");
            let _ = writeln!(
                s,
                "plot $data using {a}:{t} with linespoints title 'tightness', \\\n     1 with lines dashtype 2 title 'asymptote 1'"
            );
        }
        ReportKind::Decay => {
            let f = report.column("fitted_rate")? + 1;
            s.push_str("set xlabel 'row'\nset ylabel 'rate'\n");
            let _ = write!(s, "plot $data using 0:{f} with points title 'fitted'");
            for name in ["rate_2lambda", "rate_4_over_pK", "rate_np_over_Hp"] {
                let c = report.column(name)? + 1;
                let _ = write!(s, ", \\\n     $data using 0:{c} with linespoints title '{name}'");
            }
            s.push('\n');
        }
        ReportKind::Spectrum => {
            s.push_str("set xlabel 'index'\nset ylabel 'eigenvalue'\n");
            s.push_str("plot $data using 1:2 with points pointtype 7 title 'eigenvalues'\n");
        }
    }
    Ok(s)
}

/// Reads `report`, writes `<stem>.gp` into `out` (default: the report's
/// directory) and returns the script path.
pub fn plot_file(report: &Path, out: Option<&Path>, n: Option<usize>) -> Result<PathBuf, String> {
    let text = std::fs::read_to_string(report).map_err(|e| format!("cannot read {}: {e}", report.display()))?;
    let parsed = parse_report(&text)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| report.parent().unwrap_or(Path::new(".")).to_path_buf());
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let n = n.or_else(|| {
        if parsed.kind != ReportKind::Trajectory {
            return None;
        }
        let summary = std::fs::read_to_string(report.with_file_name("summary.json")).ok()?;
        let v: serde_json::Value = serde_json::from_str(&summary).ok()?;
        v.get("n")?.as_u64().map(|n| n as usize)
    });
    let body = script(&parsed, &format!("{stem}.png"), n)?;
    let path = dir.join(format!("{stem}.gp"));
    entroflow::io::write_atomic(&path, body.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}
