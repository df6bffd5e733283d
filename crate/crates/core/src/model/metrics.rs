//! q-error and its summary statistics.

use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("q-error needs positive values, got {0} and {1}")]
    NonPositive(f64, f64),
    #[error("no errors to summarize")]
    Empty,
}

/// `max(a, b) / min(a, b)`.
pub fn qerror(truth: f64, estimate: f64) -> Result<f64, MetricsError> {
    if !(truth > 0.0 && estimate > 0.0) {
        return Err(MetricsError::NonPositive(truth, estimate));
    }
    Ok(truth.max(estimate) / truth.min(estimate))
}

/// Summary of a list of q-errors. `p90`, `p95` and `p99` are the means of
/// the largest 10%, 5% and 1% of errors: with errors sorted ascending, the
/// mean over positions `ceil(K * n / 100)..n` (at least the maximum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub median: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
}

fn tail_mean(sorted: &[f64], k: f64) -> f64 {
    let n = sorted.len();
    let start = ((k * n as f64 / 100.0).ceil() as usize).min(n - 1);
    let tail = &sorted[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

impl Metrics {
    pub fn compute(errors: &[f64]) -> Result<Metrics, MetricsError> {
        if errors.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut v = errors.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Ok(Metrics {
            median,
            p90: tail_mean(&v, 90.0),
            p95: tail_mean(&v, 95.0),
            p99: tail_mean(&v, 99.0),
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
        })
    }

    pub const HEADER: &'static str = "median\t90th\t95th\t99th\tmax\tmean";

    pub fn values(&self) -> [f64; 6] {
        [self.median, self.p90, self.p95, self.p99, self.max, self.mean]
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.values().iter().map(|v| format!("{v:.4}")).collect();
        f.write_str(&cells.join("\t"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qerror_basics() {
        assert_eq!(qerror(7.0, 7.0).unwrap(), 1.0);
        assert_eq!(qerror(10.0, 5.0).unwrap(), 2.0);
        assert_eq!(qerror(5.0, 10.0).unwrap(), 2.0);
        assert!((qerror(3477.0 * 0.25, 0.25).unwrap() - 3477.0).abs() < 1e-9);
        assert!(qerror(0.0, 1.0).is_err());
        assert!(qerror(1.0, -2.0).is_err());
    }

    #[test]
    fn summaries() {
        let m = Metrics::compute(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.values(), [1.0; 6]);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let m = Metrics::compute(&v).unwrap();
        assert_eq!(m.max, 100.0);
        assert_eq!(m.mean, 50.5);
        assert_eq!(m.median, 50.5);
        assert_eq!(m.p90, 95.5);
        assert_eq!(m.p95, 98.0);
        assert_eq!(m.p99, 100.0);
        assert!(Metrics::compute(&[]).is_err());
    }

    #[test]
    fn postgres_row_fixture() {
        // Three errors with median 7.93 and mean 174.
        let m = Metrics::compute(&[1.0, 7.93, 513.07]).unwrap();
        assert!((m.median - 7.93).abs() < 1e-12);
        assert!((m.mean - 174.0).abs() < 1e-9);
    }
}
