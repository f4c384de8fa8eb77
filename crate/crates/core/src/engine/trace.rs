//! Recorded simulation output and its CSV rendering.
//!
//! Agent labels in every row are 1-based, matching scenario files.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Trigger,
    Detection,
    Isolation,
    MeiClamp,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Trigger => "trigger",
            EventKind::Detection => "detection",
            EventKind::Isolation => "isolation",
            EventKind::MeiClamp => "mei-clamp",
        }
    }
}

/// One row of the event log.
///
/// For triggers `value` is the jump the receiver measured against its
/// previous sample (`c |C e_delta|^2`) and `threshold` the delta threshold
/// at that time. For detections they are the failing quantity and its
/// bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: u64,
    pub t: f64,
    pub kind: EventKind,
    pub sender: usize,
    pub receiver: usize,
    pub clause: String,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub t: f64,
    pub agent: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub delta: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRow {
    pub t: f64,
    pub sender: usize,
    pub receiver: usize,
    pub c_hat: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub t: f64,
    pub consensus_norm: f64,
    pub kkt_norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SimulationTrace {
    pub dt: f64,
    pub states: Vec<StateRow>,
    pub edges: Vec<EdgeRow>,
    pub events: Vec<Event>,
    pub metrics: Vec<MetricRow>,
}

fn join(out: &mut String, values: &[f64], width: usize) {
    for k in 0..width {
        out.push(',');
        if let Some(v) = values.get(k) {
            let _ = write!(out, "{v}");
        }
    }
}

impl SimulationTrace {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn write_states_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let width = |f: fn(&StateRow) -> usize| self.states.iter().map(f).max().unwrap_or(0);
        let (nx, ny) = (width(|r| r.x.len()), width(|r| r.y.len()));
        let mut header = String::from("t,agent");
        for (prefix, count) in [("x", nx), ("y", ny), ("delta", nx), ("w", nx)] {
            for k in 1..=count {
                let _ = write!(header, ",{prefix}{k}");
            }
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for r in &self.states {
            line.clear();
            let _ = write!(line, "{},{}", r.t, r.agent);
            join(&mut line, &r.x, nx);
            join(&mut line, &r.y, ny);
            join(&mut line, &r.delta, nx);
            join(&mut line, &r.w, nx);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,i,j,c_hat,m")?;
        for r in &self.edges {
            writeln!(w, "{},{},{},{},{}", r.t, r.sender, r.receiver, r.c_hat, r.m)?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,kind,sender,receiver,clause,value,threshold")?;
        for e in &self.events {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                e.t,
                e.kind.as_str(),
                e.sender,
                e.receiver,
                e.clause,
                e.value,
                e.threshold
            )?;
        }
        Ok(())
    }

    pub fn states_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_states_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn edges_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_edges_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn events_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_events_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
