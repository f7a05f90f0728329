//! Table-style reports: theoretical rows, simulated sweeps and the
//! disruptor comparison, plus their CSV / JSON-lines encodings.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, SweepPoint, SweepSpec};
use crate::sim::{run_scenario, Coding, ScenarioConfig, SimError, SimulationTrace};
use crate::timing::mixed_message_theoretical_time;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scenario has no [disruptor] section")]
    MissingDisruptor,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// CSV columns, in order.
pub const CSV_COLUMNS: [&str; 9] = [
    "cache_size_mb",
    "read_time_s",
    "wait_period_s",
    "theor_1bits_s",
    "theor_0bits_s",
    "theor_total_s",
    "sim_total_s",
    "performance_bit_s",
    "ber",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub cache_size_mb: f64,
    pub read_time: f64,
    pub wait_period: f64,
    pub theor_1bits: f64,
    pub theor_0bits: f64,
    pub theor_total: f64,
    /// Simulated total, absent for purely theoretical rows.
    pub sim_total: Option<f64>,
    /// Simulated throughput when simulated, else message bits over the
    /// theoretical total.
    pub performance: f64,
    pub ber: Option<f64>,
}

impl ReportRow {
    fn csv_record(&self) -> Vec<String> {
        let opt =
            |v: Option<f64>, prec: usize| v.map_or_else(String::new, |x| format!("{x:.prec$}"));
        vec![
            format!("{}", self.cache_size_mb),
            format!("{:.3}", self.read_time),
            format!("{:.3}", self.wait_period),
            format!("{:.3}", self.theor_1bits),
            format!("{:.3}", self.theor_0bits),
            format!("{:.3}", self.theor_total),
            opt(self.sim_total, 3),
            format!("{:.3}", self.performance),
            opt(self.ber, 4),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

fn theory_row(spec: &SweepSpec, point: &SweepPoint) -> Result<ReportRow, ReportError> {
    let (ones, zeros) = spec.message.bit_counts()?;
    let read_time = match point.read_time {
        Some(t) => t,
        None => spec.physical_for(point)?.evict_time(),
    };
    let wait_period = spec.wait_for(point);
    let b = mixed_message_theoretical_time(ones, zeros, read_time, wait_period);
    let n = ones + zeros;
    Ok(ReportRow {
        cache_size_mb: point.cache_mb,
        read_time,
        wait_period,
        theor_1bits: b.ones_time,
        theor_0bits: b.zeros_time,
        theor_total: b.total,
        sim_total: None,
        performance: if b.total > 0.0 {
            n as f64 / b.total
        } else {
            0.0
        },
        ber: None,
    })
}

fn sorted_points(spec: &SweepSpec) -> Vec<SweepPoint> {
    let mut points = spec.points();
    points.sort_by(|a, b| a.cache_mb.total_cmp(&b.cache_mb));
    points
}

/// One purely theoretical row per cache size, ascending.
pub fn theory_rows(spec: &SweepSpec) -> Result<Vec<ReportRow>, ReportError> {
    sorted_points(spec)
        .iter()
        .map(|p| theory_row(spec, p))
        .collect()
}

/// Theoretical columns plus a simulation per cache size. Runs are
/// independent and execute in parallel; rows come back ordered by cache size.
pub fn sweep_rows(spec: &SweepSpec, seed: Option<u64>) -> Result<Vec<ReportRow>, ReportError> {
    sorted_points(spec)
        .par_iter()
        .map(|p| {
            let mut row = theory_row(spec, p)?;
            let trace = run_scenario(&spec.scenario_for(p, seed)?)?;
            row.sim_total = Some(trace.metrics.total_time);
            row.performance = trace.metrics.throughput;
            row.ber = Some(trace.metrics.ber);
            Ok(row)
        })
        .collect()
}

pub fn write_rows<W: Write>(
    rows: &[ReportRow],
    format: OutputFormat,
    out: W,
) -> Result<(), ReportError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for r in rows {
                w.write_record(r.csv_record())?;
            }
            w.flush()?;
        }
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// The same disrupted scenario sent raw and repetition-coded.
#[derive(Debug, Clone, Serialize)]
pub struct DisruptComparison {
    pub uncoded: SimulationTrace,
    pub coded: SimulationTrace,
}

impl DisruptComparison {
    pub fn summary(&self) -> String {
        format!(
            "coding=none ber={:.4} total_time={:.3}s | coding=repetition3 ber={:.4} total_time={:.3}s",
            self.uncoded.metrics.ber,
            self.uncoded.metrics.total_time,
            self.coded.metrics.ber,
            self.coded.metrics.total_time,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}

/// Runs `cfg` once without coding and once with the repetition code, same
/// seed and disruptor.
pub fn disrupt_compare(cfg: &ScenarioConfig) -> Result<DisruptComparison, ReportError> {
    if cfg.disruptor.is_none() {
        return Err(ReportError::MissingDisruptor);
    }
    let uncoded = run_scenario(&cfg.clone().with_coding(Coding::None))?;
    let coded = run_scenario(&cfg.clone().with_coding(Coding::Repetition3))?;
    Ok(DisruptComparison { uncoded, coded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{REFERENCE_ONES, REFERENCE_ROWS, REFERENCE_ZEROS};

    fn reference_spec() -> SweepSpec {
        let sizes: Vec<String> = REFERENCE_ROWS
            .iter()
            .map(|r| r.cache_mb.to_string())
            .collect();
        let reads: Vec<String> = REFERENCE_ROWS
            .iter()
            .map(|r| r.read_time.to_string())
            .collect();
        let waits: Vec<String> = REFERENCE_ROWS
            .iter()
            .map(|r| r.wait_period.to_string())
            .collect();
        SweepSpec::parse(&format!(
            "cache_sizes_mb = [{}]\nread_times = [{}]\nwait_periods = [{}]\n[message]\nones = {REFERENCE_ONES}\nzeros = {REFERENCE_ZEROS}\narrangement_seed = 1\n",
            sizes.join(", "),
            reads.join(", "),
            waits.join(", ")
        ))
        .unwrap()
    }

    #[test]
    fn reference_theory_within_two_percent() {
        let rows = theory_rows(&reference_spec()).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, r) in rows.iter().zip(REFERENCE_ROWS) {
            assert!((row.theor_total - r.theor_total).abs() / r.theor_total <= 0.02);
            assert_eq!(row.theor_total, row.theor_1bits + row.theor_0bits);
        }
    }

    #[test]
    fn no_ones_means_no_one_bit_time() {
        let spec = SweepSpec::parse(
            "cache_sizes_mb = [4.0]\n[message]\nones = 0\nzeros = 10\n[base.physical]\ndisk_rate = 7.0\n",
        )
        .unwrap();
        let rows = theory_rows(&spec).unwrap();
        assert_eq!(rows[0].theor_1bits, 0.0);
        assert_eq!(rows[0].theor_0bits, 2.5);
    }

    #[test]
    fn doubling_cache_doubles_one_bit_time() {
        let spec = SweepSpec::parse(
            "cache_sizes_mb = [2.0, 4.0, 8.0]\n[message]\nones = 27\nzeros = 37\n[base.physical]\ndisk_rate = 7.1\n",
        )
        .unwrap();
        let rows = theory_rows(&spec).unwrap();
        for w in rows.windows(2) {
            assert!((w[1].theor_1bits / w[0].theor_1bits - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_layout_is_fixed() {
        let rows = theory_rows(&reference_spec()).unwrap();
        let mut buf = Vec::new();
        write_rows(&rows, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "2,0.292,0.125,7.884,4.625,12.509,,5.116,"
        );
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn json_lines_one_object_per_row() {
        let rows = theory_rows(&reference_spec()).unwrap();
        let mut buf = Vec::new();
        write_rows(&rows, OutputFormat::JsonLines, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["cache_size_mb"], 2.0);
        assert!(v["sim_total"].is_null());
    }

    #[test]
    fn overhead_only_adds_time() {
        let text = "cache_sizes_mb = [2.0, 4.0]\n[message]\nones = 5\nzeros = 5\n[base]\nper_bit_overhead = 0.05\n[base.physical]\ndisk_rate = 7.0\n";
        let spec = SweepSpec::parse(text).unwrap();
        for row in sweep_rows(&spec, None).unwrap() {
            assert!(row.sim_total.unwrap() >= row.theor_total);
        }
    }

    #[test]
    fn disrupt_requires_disruptor() {
        let cfg = ScenarioConfig::new(
            crate::timing::PhysicalParams::new(2.0, 7.0).unwrap(),
            crate::timing::SchemeVariant::Basic,
            "101".parse().unwrap(),
        )
        .unwrap();
        assert!(matches!(
            disrupt_compare(&cfg),
            Err(ReportError::MissingDisruptor)
        ));
    }
}
