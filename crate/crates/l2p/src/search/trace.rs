//! Run traces: one record per iteration plus one per epoch.

use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: u64,
    pub heuristic: u16,
    pub delta_f: f64,
    pub time_s: f64,
    pub accepted: bool,
    pub current_f: f64,
    pub best_f: f64,
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub iter: u64,
    pub beta: f64,
    pub reward: f64,
    pub new_best: bool,
    pub sf: Vec<f64>,
    pub s1: Vec<f64>,
    pub pi1: Vec<f64>,
    pub pi2: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub iterations: Vec<IterationRecord>,
    pub epochs: Vec<EpochRecord>,
}

pub const TRACE_CSV_HEADER: &str = "iter,heuristic,delta_f,time_s,accepted,current_f,best_f,temp";

impl SearchTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.iterations {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.iter, r.heuristic, r.delta_f, r.time_s, r.accepted, r.current_f, r.best_f, r.temp
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace rows are ASCII")
    }

    /// One JSON object per epoch, newline separated.
    pub fn write_epochs_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Best objective value seen up to and including each iteration row.
    pub fn best_curve(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.iterations.iter().map(|r| (r.iter, r.best_f))
    }
}
