use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::RunResult;

/// Exact schema of metrics.csv.
pub const METRICS_HEADER: &str =
    "config_id,seed,algo,refine,probe,gamma_l,gamma_u,bacc,gm,ber,acc_many,acc_medium,acc_few";

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// One metrics.csv row, also the unit `report` works from.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub config_id: String,
    pub seed: u64,
    pub algo: String,
    pub refine: String,
    pub probe: String,
    pub gamma_l: f64,
    pub gamma_u: f64,
    pub bacc: f64,
    pub gm: f64,
    pub ber: f64,
    pub acc_many: f64,
    pub acc_medium: f64,
    pub acc_few: f64,
}

impl CsvRow {
    pub fn from_result(r: &RunResult) -> Self {
        let m = &r.final_metrics;
        CsvRow {
            config_id: r.config_id.clone(),
            seed: r.seed,
            algo: m.algo.clone(),
            refine: m.refine.clone(),
            probe: if m.refine == "cdmad" { m.probe.clone() } else { String::new() },
            gamma_l: r.config.data.gamma_l,
            gamma_u: r.config.data.gamma_u,
            bacc: m.bacc,
            gm: m.gm,
            ber: m.ber,
            acc_many: m.acc_many,
            acc_medium: m.acc_medium,
            acc_few: m.acc_few,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_id,
            self.seed,
            self.algo,
            self.refine,
            self.probe,
            self.gamma_l,
            self.gamma_u,
            fmt(self.bacc),
            fmt(self.gm),
            fmt(self.ber),
            fmt(self.acc_many),
            fmt(self.acc_medium),
            fmt(self.acc_few),
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::BadContainer(format!(
                "metrics.csv row has {} fields, expected 13",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::BadContainer(format!("bad number {s:?}: {e}")))
        };
        Ok(CsvRow {
            config_id: f[0].to_string(),
            seed: f[1]
                .parse()
                .map_err(|e| Error::BadContainer(format!("bad seed {:?}: {e}", f[1])))?,
            algo: f[2].to_string(),
            refine: f[3].to_string(),
            probe: f[4].to_string(),
            gamma_l: num(f[5])?,
            gamma_u: num(f[6])?,
            bacc: num(f[7])?,
            gm: num(f[8])?,
            ber: num(f[9])?,
            acc_many: num(f[10])?,
            acc_medium: num(f[11])?,
            acc_few: num(f[12])?,
        })
    }
}

/// Mean and standard error over seeds, per config.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregate rows per config id. Deterministic key order.
pub fn summarize(rows: &[CsvRow]) -> serde_json::Value {
    let mut by_config: BTreeMap<String, Vec<&CsvRow>> = BTreeMap::new();
    for row in rows {
        by_config.entry(row.config_id.clone()).or_default().push(row);
    }
    let mut out = serde_json::Map::new();
    for (id, group) in by_config {
        let pick = |f: fn(&CsvRow) -> f64| -> serde_json::Value {
            let vals: Vec<f64> = group.iter().map(|r| f(r)).collect();
            let (m, se) = mean_stderr(&vals);
            serde_json::json!({"mean": m, "stderr": se})
        };
        let first = group[0];
        out.insert(
            id,
            serde_json::json!({
                "n": group.len(),
                "seeds": group.iter().map(|r| r.seed).collect::<Vec<_>>(),
                "algo": first.algo,
                "refine": first.refine,
                "probe": first.probe,
                "gamma_l": first.gamma_l,
                "gamma_u": first.gamma_u,
                "bacc": pick(|r| r.bacc),
                "gm": pick(|r| r.gm),
                "ber": pick(|r| r.ber),
                "acc_many": pick(|r| r.acc_many),
                "acc_medium": pick(|r| r.acc_medium),
                "acc_few": pick(|r| r.acc_few),
            }),
        );
    }
    serde_json::Value::Object(out)
}

fn bias_panel(svg: &mut String, probs: &[f64], x0: f64, y0: f64, w: f64, h: f64, label: &str) {
    let bar_w = w / probs.len() as f64;
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"8\">{}</text>\n",
        x0,
        y0 + 8.0,
        label
    ));
    let plot_top = y0 + 10.0;
    let plot_h = h - 12.0;
    for (i, &p) in probs.iter().enumerate() {
        let bh = (p.clamp(0.0, 1.0)) * plot_h;
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4878a8\"/>\n",
            x0 + i as f64 * bar_w,
            plot_top + plot_h - bh,
            bar_w * 0.8,
            bh
        ));
    }
}

/// Bar charts of the per-epoch probe-bias distribution, as small multiples.
pub fn bias_chart_svg(trace: &[Vec<f64>]) -> String {
    let cols = 10usize;
    let rows = trace.len().div_ceil(cols).max(1);
    let (pw, ph) = (80.0, 60.0);
    let width = cols as f64 * pw;
    let height = rows as f64 * ph;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    );
    for (e, probs) in trace.iter().enumerate() {
        let x0 = (e % cols) as f64 * pw + 4.0;
        let y0 = (e / cols) as f64 * ph + 2.0;
        bias_panel(&mut svg, probs, x0, y0, pw - 8.0, ph - 6.0, &format!("epoch {e}"));
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_if_changed(path: &Path, contents: &str) -> Result<()> {
    // keep emit idempotent at the byte level
    if let Ok(existing) = fs::read_to_string(path) {
        if existing == contents {
            return Ok(());
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Write metrics.csv, per-run confusion/bias artifacts and summary.json.
pub fn emit(results: &[&RunResult], out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;

    let rows: Vec<CsvRow> = results.iter().map(|r| CsvRow::from_result(r)).collect();
    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_line());
        csv.push('\n');
    }
    write_if_changed(&dir.join("metrics.csv"), &csv)?;

    for r in results {
        let run_id = format!("{}_{}", r.config_id, r.seed);
        write_if_changed(
            &dir.join(format!("confusion_{run_id}.txt")),
            &r.final_confusion.to_text(),
        )?;

        let classes = r.bias_trace.first().map(|b| b.len()).unwrap_or(0);
        let mut trace = String::from("epoch");
        for c in 0..classes {
            trace.push_str(&format!(",p{c}"));
        }
        trace.push('\n');
        for (e, probs) in r.bias_trace.iter().enumerate() {
            trace.push_str(&e.to_string());
            for p in probs {
                trace.push(',');
                trace.push_str(&fmt(*p));
            }
            trace.push('\n');
        }
        write_if_changed(&dir.join(format!("bias_trace_{run_id}.csv")), &trace)?;
        write_if_changed(
            &dir.join(format!("bias_chart_{run_id}.svg")),
            &bias_chart_svg(&r.bias_trace),
        )?;
    }

    let summary = serde_json::to_string_pretty(&summarize(&rows))?;
    write_if_changed(&dir.join("summary.json"), &summary)?;
    Ok(())
}

/// Re-derive summary.json from an existing metrics.csv.
pub fn report(in_dir: impl AsRef<Path>) -> Result<serde_json::Value> {
    let dir = in_dir.as_ref();
    let csv = fs::read_to_string(dir.join("metrics.csv"))?;
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(Error::BadContainer(format!(
                "unexpected metrics.csv header: {other:?}"
            )))
        }
    }
    let rows: Vec<CsvRow> = lines
        .filter(|l| !l.is_empty())
        .map(CsvRow::parse_line)
        .collect::<Result<_>>()?;
    let summary = summarize(&rows);
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::RunConfig;
    use crate::harness::run::run_experiment;

    fn tiny_result(seed: u64) -> RunResult {
        let mut cfg = RunConfig::default();
        cfg.epochs = 1;
        cfg.iters_per_epoch = 2;
        cfg.warm_epochs = Some(0);
        cfg.b = Some(4);
        cfg.data.n1 = 20;
        cfg.data.m1 = 20;
        cfg.data.test_per_class = 3;
        cfg.seed = seed;
        run_experiment(&cfg).unwrap()
    }

    #[test]
    fn csv_roundtrip_and_header() {
        let r = tiny_result(1);
        let row = CsvRow::from_result(&r);
        let parsed = CsvRow::parse_line(&row.to_line()).unwrap();
        assert_eq!(parsed.config_id, row.config_id);
        assert_eq!(parsed.seed, row.seed);
        assert!((parsed.bacc - row.bacc).abs() < 1e-6);
        assert_eq!(
            METRICS_HEADER,
            "config_id,seed,algo,refine,probe,gamma_l,gamma_u,bacc,gm,ber,acc_many,acc_medium,acc_few"
        );
    }

    #[test]
    fn emit_is_idempotent_and_summary_matches_hand_means() {
        let a = tiny_result(1);
        let b = tiny_result(2);
        let dir = tempfile::tempdir().unwrap();
        emit(&[&a, &b], dir.path()).unwrap();
        let first = fs::read(dir.path().join("metrics.csv")).unwrap();
        let sum_first = fs::read(dir.path().join("summary.json")).unwrap();
        emit(&[&a, &b], dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join("metrics.csv")).unwrap());
        assert_eq!(sum_first, fs::read(dir.path().join("summary.json")).unwrap());

        let summary = report(dir.path()).unwrap();
        let entry = &summary[&a.config_id];
        assert_eq!(entry["n"], 2);
        let rows = [CsvRow::from_result(&a), CsvRow::from_result(&b)];
        let hand = (rows[0].bacc.to_string().parse::<f64>().unwrap()
            + rows[1].bacc)
            / 2.0;
        let got = entry["bacc"]["mean"].as_f64().unwrap();
        assert!((got - hand).abs() < 1e-5);
        // run artifacts exist
        assert!(dir.path().join(format!("confusion_{}_1.txt", a.config_id)).exists());
        assert!(dir.path().join(format!("bias_trace_{}_1.csv", a.config_id)).exists());
        assert!(dir.path().join(format!("bias_chart_{}_1.svg", a.config_id)).exists());
    }

    #[test]
    fn svg_panel_count_matches_epochs() {
        let trace = vec![vec![0.2, 0.3, 0.5]; 7];
        let svg = bias_chart_svg(&trace);
        assert_eq!(svg.matches("epoch ").count(), 7);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
