//! CSV reports: comma separated, one header row, `#` comment lines.

use crate::metrics::MetricReport;
use crate::pipeline::ComparisonRow;

/// Metric conventions, quoted at the top of every report.
pub const CONVENTIONS: &[&str] = &[
    "cd: mean squared nearest-neighbour distance pred->gt plus the same gt->pred (squared distances)",
    "hd: larger of the two directed maxima of nearest-neighbour distances (unsquared)",
    "p2f: mean unsquared distance from each predicted point to the reference mesh (directed pred->mesh)",
    "values are raw; multiply by 1e3 for the x1e-3 units used in published tables",
];

/// Published full-scale numbers, for orientation only; desk-scale runs are
/// not expected to reach them.
pub const REFERENCE_NOTES: &[&str] = &[
    "reference (full-scale training, x1e-3): PU-GCN with its NodeShuffle unit CD 0.657; with ProEdgeShuffle CD 0.597",
];

fn header_block() -> String {
    CONVENTIONS.iter().map(|c| format!("# {c}\n")).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricReport]) -> String {
    let mut out = header_block();
    out.push_str("label,cd,hd,p2f,n_pred,n_gt\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            r.cd,
            r.hd,
            opt(r.p2f),
            r.n_pred,
            r.n_gt
        ));
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = header_block();
    out.push_str("# each row averages the test-set mean over `seeds` training runs\n");
    out.push_str("backbone,unit,index_mode,regression_mode,cd,hd,p2f,seeds,steps,backbone_params,unit_params\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.backbone,
            r.unit,
            r.index_mode,
            r.regression_mode,
            r.cd,
            r.hd,
            r.p2f,
            r.seeds,
            r.steps,
            r.backbone_params,
            r.unit_params
        ));
    }
    for n in REFERENCE_NOTES {
        out.push_str(&format!("# {n}\n"));
    }
    out
}

/// One row per training step: the loss before that step's update.
pub fn loss_csv(losses: &[f64]) -> String {
    let mut out = String::from("# chamfer loss before each update\nstep,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

/// Data lines of a CSV produced here: comments and the header row removed.
pub fn data_rows(csv: &str) -> Vec<Vec<&str>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_rows_and_conventions() {
        let csv = loss_csv(&[1.0, 0.5, 0.25]);
        assert_eq!(data_rows(&csv).len(), 3);
        let m = metrics_csv(&[MetricReport {
            label: "a".into(),
            cd: 0.5,
            hd: 1.0,
            p2f: None,
            n_pred: 2,
            n_gt: 2,
        }]);
        assert!(m.contains("(squared distances)") && m.contains("(unsquared)") && m.contains("directed"));
        assert_eq!(data_rows(&m), vec![vec!["a", "0.5", "1", "", "2", "2"]]);
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let v = 0.1f64 + 0.2;
        let csv = loss_csv(&[v]);
        assert_eq!(data_rows(&csv)[0][1].parse::<f64>().unwrap(), v);
    }
}
