//! CSV and gnuplot emitters for harness results.
//!
//! Every CSV starts with `#` comment lines: the first names the file kind and
//! format version, the rest echo the caller's provenance text.

use std::io::Write;

use super::{ExperimentReport, Method, SweepResult, TimingTable};
use crate::error::Result;

/// Bumped whenever a column is added, removed or reinterpreted.
pub const REPORT_FORMAT_VERSION: u32 = 1;

const REPORT_COLUMNS: [&str; 15] = [
    "m",
    "n",
    "samples",
    "dataset_seed",
    "eval_seed",
    "method",
    "reference",
    "mean_gain",
    "std_gain",
    "mean_rate",
    "ratio_pct",
    "rate_ratio_pct",
    "mean_ms",
    "median_ms",
    "warnings",
];

fn header<W: Write>(w: &mut W, kind: &str, provenance: &str) -> Result<()> {
    writeln!(w, "# risbf {kind} v{REPORT_FORMAT_VERSION}")?;
    for line in provenance.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn report_rows(r: &ExperimentReport, timing: bool) -> Vec<Vec<String>> {
    r.methods
        .iter()
        .map(|s| {
            let (mean_ms, median_ms) =
                if timing { (format!("{:.6}", s.mean_ms), format!("{:.6}", s.median_ms)) } else { (String::new(), String::new()) };
            vec![
                r.m.to_string(),
                r.n.to_string(),
                r.samples.to_string(),
                r.dataset_seed.to_string(),
                r.eval_seed.to_string(),
                s.method.to_string(),
                r.reference.to_string(),
                format!("{:e}", s.mean_gain),
                format!("{:e}", s.std_gain),
                format!("{:.6}", s.mean_rate),
                format!("{:.2}", s.ratio_pct),
                format!("{:.2}", s.rate_ratio_pct),
                mean_ms,
                median_ms,
                s.warnings.to_string(),
            ]
        })
        .collect()
}

/// One row per method per report. With `timing = false` the two timing
/// columns are left empty so the file is a pure function of data and seeds.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[ExperimentReport], provenance: &str, timing: bool) -> Result<()> {
    header(&mut w, "report", provenance)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS)?;
    for r in reports {
        for row in report_rows(r, timing) {
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Report columns prefixed with `axis,value`, plus per-method monotonicity
/// flags for the whole sweep.
pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult, provenance: &str, timing: bool) -> Result<()> {
    header(&mut w, "sweep", provenance)?;
    let mut out = csv::Writer::from_writer(w);
    let mut cols = vec!["axis", "value"];
    cols.extend(REPORT_COLUMNS);
    cols.extend(["gain_increasing", "rate_increasing"]);
    out.write_record(&cols)?;
    for (r, &value) in sweep.reports.iter().zip(sweep.axis.values()) {
        for (s, row) in r.methods.iter().zip(report_rows(r, timing)) {
            let diag = sweep.diagnostics.iter().find(|d| d.method == s.method).expect("diagnosed");
            let mut rec = vec![sweep.axis.name().to_string(), value.to_string()];
            rec.extend(row);
            rec.push(diag.gain_increasing.to_string());
            rec.push(diag.rate_increasing.to_string());
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Timing rows; `speedup` is the baseline's average per-instance cost divided
/// by the row's (`batched_ms`), empty when the configuration has no baseline row.
pub fn write_timing_csv<W: Write>(mut w: W, table: &TimingTable, baseline: Option<Method>, provenance: &str) -> Result<()> {
    header(&mut w, "timing", provenance)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["m", "n", "method", "repetitions", "mean_ms", "median_ms", "min_ms", "batched_ms", "speedup"])?;
    for r in &table.rows {
        let speedup = baseline
            .and_then(|b| table.speedup(r.m, r.n, r.method, b))
            .map(|s| format!("{s:.2}"))
            .unwrap_or_default();
        out.write_record([
            r.m.to_string(),
            r.n.to_string(),
            r.method.to_string(),
            r.repetitions.to_string(),
            format!("{:.6}", r.mean_ms),
            format!("{:.6}", r.median_ms),
            format!("{:.6}", r.min_ms),
            format!("{:.6}", r.batched_ms),
            speedup,
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Gnuplot script plotting mean gain and mean rate against the sweep axis,
/// one line per method, reading `csv_path` as written by [`write_sweep_csv`].
pub fn write_sweep_plot<W: Write>(mut w: W, sweep: &SweepResult, csv_path: &str, output_png: &str) -> Result<()> {
    let axis = sweep.axis.name();
    let methods: Vec<Method> = sweep.diagnostics.iter().map(|d| d.method).collect();
    writeln!(w, "# risbf sweep plot v{REPORT_FORMAT_VERSION}")?;
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set terminal pngcairo size 1200,480")?;
    writeln!(w, "set output '{output_png}'")?;
    writeln!(w, "set multiplot layout 1,2")?;
    writeln!(w, "set xlabel '{axis}'")?;
    writeln!(w, "set key left top")?;
    writeln!(w, "set grid")?;
    // Columns: 2 = axis value, 8 = method, 10 = mean_gain, 12 = mean_rate.
    for (col, label) in [(10, "mean channel gain"), (12, "mean rate (bit/s/Hz)")] {
        writeln!(w, "set ylabel '{label}'")?;
        let series: Vec<String> = methods
            .iter()
            .map(|m| format!("'{csv_path}' using 2:(strcol(8) eq '{m}' ? ${col} : 1/0) with linespoints title '{m}'"))
            .collect();
        writeln!(w, "plot {}", series.join(", \\\n     "))?;
    }
    writeln!(w, "unset multiplot")?;
    Ok(())
}

/// Gnuplot script for the training and validation loss curves in a history CSV.
pub fn write_history_plot<W: Write>(mut w: W, csv_path: &str, output_png: &str) -> Result<()> {
    writeln!(w, "# risbf history plot v{REPORT_FORMAT_VERSION}")?;
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set terminal pngcairo size 800,480")?;
    writeln!(w, "set output '{output_png}'")?;
    writeln!(w, "set xlabel 'epoch'")?;
    writeln!(w, "set ylabel 'loss'")?;
    writeln!(w, "set grid")?;
    writeln!(
        w,
        "plot '{csv_path}' every ::1 using 1:2 with lines title 'train', \\\n     '{csv_path}' every ::1 using 1:3 with lines title 'validation'"
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{MethodStats, Monotonicity, SweepAxis, TimingRow};
    use super::*;

    fn report() -> ExperimentReport {
        let stats = |method, gain: f64| MethodStats {
            method,
            mean_gain: gain,
            std_gain: 0.1,
            mean_rate: 1.5,
            ratio_pct: 100.0 * gain / 0.25,
            rate_ratio_pct: 100.0,
            mean_ms: 2.5,
            median_ms: 2.0,
            warnings: 0,
        };
        ExperimentReport {
            m: 2,
            n: 8,
            samples: 10,
            dataset_seed: 1,
            eval_seed: 2,
            reference: Method::Sdr,
            methods: vec![stats(Method::Sdr, 0.25), stats(Method::Random, 0.125)],
        }
    }

    fn lines(bytes: Vec<u8>) -> Vec<String> {
        String::from_utf8(bytes).unwrap().lines().map(str::to_string).collect()
    }

    #[test]
    fn report_csv_is_versioned_and_parseable() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[report()], "seed = 1\nthreads = 1", true).unwrap();
        let l = lines(buf);
        assert_eq!(l[0], format!("# risbf report v{REPORT_FORMAT_VERSION}"));
        assert_eq!(l[1], "# seed = 1");
        assert_eq!(l[3], REPORT_COLUMNS.join(","));
        assert_eq!(l.len(), 6);
        let fields: Vec<&str> = l[5].split(',').collect();
        assert_eq!(fields[5], "random");
        assert_eq!(fields[10], "50.00");
        assert_eq!(fields[12], "2.500000");
    }

    #[test]
    fn timing_columns_can_be_blanked() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[report()], "", false).unwrap();
        let l = lines(buf);
        let fields: Vec<&str> = l[2].split(',').collect();
        assert_eq!((fields[12], fields[13]), ("", ""));
    }

    #[test]
    fn sweep_csv_and_plot_reference_same_columns() {
        let sweep = SweepResult {
            axis: SweepAxis::N(vec![8]),
            reports: vec![report()],
            diagnostics: [Method::Sdr, Method::Random]
                .into_iter()
                .map(|method| Monotonicity { method, gain_increasing: true, rate_increasing: true, gain_violations: vec![] })
                .collect(),
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &sweep, "", true).unwrap();
        let l = lines(buf);
        let cols: Vec<&str> = l[1].split(',').collect();
        assert_eq!((cols[1], cols[7], cols[9], cols[11]), ("value", "method", "mean_gain", "mean_rate"));
        assert!(l[2].starts_with("N,8,2,8,"));
        let mut plot = Vec::new();
        write_sweep_plot(&mut plot, &sweep, "sweep.csv", "sweep.png").unwrap();
        let plot = String::from_utf8(plot).unwrap();
        assert!(plot.contains("strcol(8) eq 'random' ? $10"));
        assert!(plot.contains("set xlabel 'N'"));
    }

    #[test]
    fn timing_csv_has_speedup_against_baseline() {
        let row = |method, ms| TimingRow {
            m: 4,
            n: 32,
            method,
            repetitions: 10,
            mean_ms: ms,
            median_ms: ms,
            min_ms: ms,
            batched_ms: ms,
        };
        let table = TimingTable { rows: vec![row(Method::Sdr, 20.0), row(Method::Nn, 0.1)] };
        let mut buf = Vec::new();
        write_timing_csv(&mut buf, &table, Some(Method::Sdr), "").unwrap();
        let l = lines(buf);
        assert!(l[1].ends_with(",speedup"));
        assert!(l[2].ends_with(",1.00"));
        assert!(l[3].ends_with(",200.00"));
    }
}
