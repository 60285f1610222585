//! Metric rows shared by every training loop. The CLI streams them into
//! `metrics.csv`; tests collect them in memory.

/// One evaluation point of a run. Fields that don't apply to an algorithm
/// (e.g. `t_actions` outside ANFSP) stay at their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// Episode (or iteration) count at this point.
    pub episode: u64,
    /// Global action counter, used by the parallel learner.
    pub t_actions: u64,
    pub exploitability: f64,
    pub rl_loss: Option<f64>,
    pub sl_loss: Option<f64>,
    pub wall_clock_s: f64,
    pub seed: u64,
    pub workers: u32,
}

impl MetricRow {
    pub fn new(episode: u64, exploitability: f64, wall_clock_s: f64, seed: u64) -> Self {
        MetricRow {
            episode,
            t_actions: 0,
            exploitability,
            rl_loss: None,
            sl_loss: None,
            wall_clock_s,
            seed,
            workers: 1,
        }
    }
}

/// Receives metric rows as a run produces them.
pub trait MetricSink {
    fn record(&mut self, row: &MetricRow);
}

impl MetricSink for Vec<MetricRow> {
    fn record(&mut self, row: &MetricRow) {
        self.push(row.clone());
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl MetricSink for NullSink {
    fn record(&mut self, _row: &MetricRow) {}
}

impl<A: MetricSink, B: MetricSink> MetricSink for (A, B) {
    fn record(&mut self, row: &MetricRow) {
        self.0.record(row);
        self.1.record(row);
    }
}

impl<T: MetricSink + ?Sized> MetricSink for &mut T {
    fn record(&mut self, row: &MetricRow) {
        (**self).record(row);
    }
}
