use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{RunOutcome, TrajectoryRecord};

/// Outcome of one finite-time run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunClass {
    Stable,
    Transitioned,
    Undecided,
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

/// Classifies a DNS record from its `unz.h2` column:
/// - diverged or non-finite: transitioned;
/// - `e^{nu^{1/3} t} ||u_≠||_{H^2}` decaying over the final third: stable;
/// - `||u_≠||_{H^2}` itself growing over the final third: transitioned;
/// - otherwise undecided.
///
/// Completed records must span at least `10 nu^{-1/3}`.
pub fn classify_run(rec: &TrajectoryRecord, nu: f64) -> Result<RunClass> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("nu = {nu} must be positive")));
    }
    let h2 = rec.series("unz.h2")?;
    if rec.outcome == RunOutcome::Diverged || h2.iter().any(|v| !v.is_finite()) {
        return Ok(RunClass::Transitioned);
    }
    let span = match (rec.times.first(), rec.times.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let need = 10.0 * nu.powf(-1.0 / 3.0);
    if span < need * (1.0 - 1e-12) {
        return Err(Error::RecordTooShort { span, required: need });
    }
    let t_end = *rec.times.last().unwrap();
    let t0 = t_end - span / 3.0;
    let tail: Vec<(f64, f64)> = rec.times.iter().zip(&h2).filter(|(t, _)| **t >= t0).map(|(t, v)| (*t, *v)).collect();
    if tail.iter().all(|(_, v)| *v == 0.0) {
        return Ok(RunClass::Stable);
    }
    if tail.len() < 3 {
        return Err(Error::InvalidInput("fewer than 3 snapshots in the final third".into()));
    }
    let ts: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let log_norm: Vec<f64> = tail.iter().map(|p| 0.5 * p.1.max(1e-300).ln()).collect();
    let raw = slope(&ts, &log_norm);
    let weighted = raw + nu.powf(1.0 / 3.0);
    Ok(if weighted < 0.0 {
        RunClass::Stable
    } else if raw > 0.0 {
        RunClass::Transitioned
    } else {
        RunClass::Undecided
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::ColumnInfo;

    fn record(nu: f64, span: f64, f: impl Fn(f64) -> f64) -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(nu, vec![ColumnInfo { name: "unz.h2".into(), description: String::new() }]);
        let n = 200;
        for i in 0..=n {
            let t = 1.0 + span * i as f64 / n as f64;
            r.push(t, vec![f(t)]).unwrap();
        }
        r
    }

    #[test]
    fn classes_from_synthetic_rates() {
        let nu: f64 = 1e-3;
        let span = 10.0 * nu.powf(-1.0 / 3.0);
        let c = nu.powf(1.0 / 3.0);
        // squared norms: rate 2r in the column means rate r in the norm
        let cases = [
            (0.0, RunClass::Undecided),
            (-3.0 * c, RunClass::Stable),
            (-0.5 * c, RunClass::Undecided),
            (0.2, RunClass::Transitioned),
        ];
        for (r, want) in cases {
            let rec = record(nu, span, |t| (2.0 * r * t).exp());
            assert_eq!(classify_run(&rec, nu).unwrap(), want, "rate {r}");
        }
        assert_eq!(classify_run(&record(nu, span, |_| 0.0), nu).unwrap(), RunClass::Stable);
    }

    #[test]
    fn short_and_diverged_records() {
        let nu = 1e-2;
        let short = record(nu, 1.0, |_| 1.0);
        assert!(classify_run(&short, nu).is_err());
        let mut d = short.clone();
        d.outcome = RunOutcome::Diverged;
        assert_eq!(classify_run(&d, nu).unwrap(), RunClass::Transitioned);
        let nan = record(nu, 100.0, |t| if t > 50.0 { f64::NAN } else { 1.0 });
        assert_eq!(classify_run(&nan, nu).unwrap(), RunClass::Transitioned);
    }
}
