use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub tick: u64,
    pub active_robots: usize,
    /// Distinct cells present in the union of all visit records.
    pub explored_cells: usize,
    /// Mean over active robots of bytes sent this tick.
    pub bytes_per_robot: f64,
    /// Mean over active robots of stigmergy reads plus writes this tick.
    pub stig_ops_per_robot: f64,
}

pub const TRACE_CSV_HEADER: &str =
    "tick,active_robots,explored_cells,bytes_per_robot,stig_ops_per_robot";

pub fn trace_to_csv(trace: &[MetricsRecord]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.tick, r.active_robots, r.explored_cells, r.bytes_per_robot, r.stig_ops_per_robot
        );
    }
    out
}
