//! Cross-product parameter sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use serde_json::Value;

use super::run::{run, RunReport};
use super::scenario::Scenario;
use super::HarnessError;

/// Dotted scenario paths mapped to the values to try, e.g.
/// `{"link.cloud_edge.latency_ms": [0, 100, 200]}`. Keys are swept in sorted
/// order, the last key varying fastest.
pub type Grid = BTreeMap<String, Vec<Value>>;

/// Parameter assignments of one grid cell, in key order.
pub type Cell = Vec<(String, Value)>;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<(String, Value)>,
    pub report: RunReport,
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), HarnessError> {
    let mut node = root;
    for key in path.split('.') {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let Value::Object(map) = node else {
            return Err(HarnessError::Config { path: path.into(), message: format!("`{key}` is inside a non-object") });
        };
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}

/// Every cell of the grid applied to `base`, in row order.
pub fn expand(base: &Scenario, grid: &Grid) -> Result<Vec<(Cell, Scenario)>, HarnessError> {
    let base_value = serde_json::to_value(base).map_err(std::io::Error::from)?;
    let mut cells: Vec<Cell> = vec![Vec::new()];
    for (key, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
        .into_iter()
        .map(|params| {
            let mut v = base_value.clone();
            for (k, val) in &params {
                set_path(&mut v, k, val.clone())?;
            }
            Ok((params, Scenario::from_value(v)?))
        })
        .collect()
}

pub fn sweep(base: &Scenario, grid: &Grid) -> Result<Vec<SweepRow>, HarnessError> {
    expand(base, grid)?
        .into_iter()
        .map(|(params, scenario)| {
            tracing::info!(?params, "sweep cell");
            Ok(SweepRow { params, report: run(&scenario, None)? })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, grid: &Grid, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = grid.keys().cloned().collect();
    header.extend(
        [
            "reps",
            "successes",
            "success_rate",
            "mean_duration_s",
            "min_e_norm",
            "falls",
            "stop_latency_ms_max",
            "stop_latency_ms_mean",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for row in rows {
        let reps = &row.report.reps;
        let n = reps.len().max(1) as f64;
        let latencies: Vec<f64> = reps.iter().filter_map(|m| m.stop_latency_ms).collect();
        let mut rec: Vec<String> = row.params.iter().map(|(_, v)| v.to_string()).collect();
        rec.push(row.report.repetitions.to_string());
        rec.push(row.report.successes.to_string());
        rec.push(format!("{:.3}", row.report.success_rate));
        rec.push(format!("{:.3}", reps.iter().map(|m| m.duration_s).sum::<f64>() / n));
        rec.push(fmt_opt(reps.iter().filter_map(|m| m.min_e_norm).reduce(f64::min)));
        rec.push(reps.iter().filter(|m| m.fell).count().to_string());
        rec.push(fmt_opt(latencies.iter().copied().reduce(f64::max)));
        rec.push(fmt_opt((!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One candidate standoff for [`crate::ibvs::calibrate_target_size`]: servo
/// to the tag size seen from `standoff` metres and report the success rate.
pub fn calibration_trial(base: &Scenario, standoff: f64) -> Result<(f64, f64), HarnessError> {
    let mut s = base.clone();
    let side_px = s.camera.focal_px * s.ibvs.tag_side / standoff;
    s.ibvs.target_size_px = side_px;
    s.validate()?;
    let report = run(&s, None)?;
    Ok((side_px, report.success_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expansion_order_and_paths() {
        let base = Scenario { duration_s: 0.0, ..Scenario::default() };
        let grid: Grid = serde_json::from_str(r#"{"link.cloud_edge.latency_ms": [0, 100], "seed": [1, 2, 3]}"#).unwrap();
        let cells = expand(&base, &grid).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].1.seed, 2);
        assert_eq!(cells[3].1.link.cloud_edge.base_latency_ms, 100.0);
        let bad: Grid = serde_json::from_str(r#"{"link.cloud_edge.latency": [1]}"#).unwrap();
        match expand(&base, &bad) {
            Err(HarnessError::Config { path, .. }) => assert!(path.contains("cloud_edge"), "{path}"),
            other => panic!("{other:?}"),
        }
    }
}
