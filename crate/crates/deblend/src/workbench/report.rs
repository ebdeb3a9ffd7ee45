//! Precision-strategy comparison reports: the three-row uniform-vs-layer-based
//! table and the accuracy-vs-total-bits sweep behind the plot exports.

use super::{accuracy, AccuracyReport, WorkbenchError, CLOSENESS_THRESHOLD};
use crate::nn::{infer_float, infer_quantized, Frame, Model};
use crate::perf::{estimate_model, ReuseMap, Schedule};
use crate::quant::{plan_precision, profile, quantize_model, uniform_plan, PrecisionPlan};

#[derive(Debug, Clone)]
pub struct Table2Row {
    pub strategy: String,
    pub report: AccuracyReport,
    /// Total weight storage, parameter count x layer width.
    pub memory_bits: u64,
    /// Weight/bias codes that saturated while quantizing the model.
    pub saturated_weights: u64,
}

#[derive(Debug, Clone)]
pub struct Table2Report {
    pub rows: Vec<Table2Row>,
    pub eval_frames: usize,
}

impl Table2Report {
    pub fn row(&self, strategy: &str) -> &Table2Row {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy)
            .expect("known strategy")
    }
}

impl Table2Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,accuracy_mi,accuracy_rr,mean_abs_diff_mi,mean_abs_diff_rr,memory_bits,saturated_weights\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.strategy,
                r.report.mi_accuracy,
                r.report.rr_accuracy,
                r.report.mi_mean_abs_diff,
                r.report.rr_mean_abs_diff,
                r.memory_bits,
                r.saturated_weights
            ));
        }
        out
    }
}

impl std::fmt::Display for Table2Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<28} {:>12} {:>12} {:>14} {:>14} {:>12}",
            "Strategy", "Accuracy MI", "Accuracy RR", "Mean |d| MI", "Mean |d| RR", "Memory bits"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<28} {:>11.1}% {:>11.1}% {:>14.6} {:>14.6} {:>12}",
                r.strategy,
                r.report.mi_accuracy * 100.0,
                r.report.rr_accuracy * 100.0,
                r.report.mi_mean_abs_diff,
                r.report.rr_mean_abs_diff,
                r.memory_bits,
            )?;
        }
        writeln!(
            f,
            "({} eval frames; closeness threshold {}; synthetic weights, so rows \
             demonstrate the strategy ordering and mechanism, not absolute figures)",
            self.eval_frames, self.rows[0].report.threshold
        )
    }
}

fn run_plan(
    model: &Model,
    plan: &PrecisionPlan,
    reference: &[f64],
    eval_frames: &[Frame],
    strategy: &str,
) -> Result<Table2Row, WorkbenchError> {
    let qm = quantize_model(model, plan).expect("plan covers the model");
    let mut test = Vec::with_capacity(reference.len());
    for frame in eval_frames {
        test.extend(infer_quantized(&qm, frame).values);
    }
    let report = accuracy(reference, &test, CLOSENESS_THRESHOLD)?;
    let reuse = ReuseMap::new(32);
    let est = estimate_model(&model.descriptor, &reuse, plan, 100e6, Schedule::Sequential);
    Ok(Table2Row {
        strategy: strategy.to_string(),
        report,
        memory_bits: est.total.memory_bits,
        saturated_weights: qm.total_saturated_weights(),
    })
}

/// Runs uniform fx<18,10>, uniform fx<16,7>, and layer-based fx<16,x> plans
/// over the eval set and reports per-target accuracy against the float path
/// plus weight-storage totals.
pub fn table2_report(
    model: &Model,
    calibration_frames: &[Frame],
    eval_frames: &[Frame],
) -> Result<Table2Report, WorkbenchError> {
    let mut reference = Vec::with_capacity(eval_frames.len() * crate::OUTPUT_LEN);
    for frame in eval_frames {
        reference.extend(infer_float(model, frame).values);
    }
    let prof = profile(model, calibration_frames).expect("non-empty calibration set");
    let layer_based = plan_precision(&prof, 16, 0).expect("valid widths");
    let rows = vec![
        run_plan(
            model,
            &uniform_plan(&model.descriptor, 18, 10).expect("valid spec"),
            &reference,
            eval_frames,
            "uniform fx<18,10>",
        )?,
        run_plan(
            model,
            &uniform_plan(&model.descriptor, 16, 7).expect("valid spec"),
            &reference,
            eval_frames,
            "uniform fx<16,7>",
        )?,
        run_plan(
            model,
            &layer_based,
            &reference,
            eval_frames,
            "layer-based fx<16,x>",
        )?,
    ];
    Ok(Table2Report {
        rows,
        eval_frames: eval_frames.len(),
    })
}

#[derive(Debug, Clone)]
pub struct AccuracySweepPoint {
    pub total_bits: u32,
    pub report: AccuracyReport,
    pub outliers: usize,
}

/// Layer-based accuracy and outlier counts as the total width grows; the
/// data behind the accuracy-vs-bits and outlier plots.
pub fn accuracy_vs_bits(
    model: &Model,
    calibration_frames: &[Frame],
    eval_frames: &[Frame],
    bits: impl IntoIterator<Item = u32>,
    guard_bits: u32,
) -> Result<Vec<AccuracySweepPoint>, WorkbenchError> {
    let mut reference = Vec::with_capacity(eval_frames.len() * crate::OUTPUT_LEN);
    for frame in eval_frames {
        reference.extend(infer_float(model, frame).values);
    }
    let prof = profile(model, calibration_frames).expect("non-empty calibration set");
    let mut points = Vec::new();
    for w in bits {
        let plan = plan_precision(&prof, w, guard_bits).expect("valid widths");
        let qm = quantize_model(model, &plan).expect("plan covers the model");
        let mut test = Vec::with_capacity(reference.len());
        for frame in eval_frames {
            test.extend(infer_quantized(&qm, frame).values);
        }
        let report = accuracy(&reference, &test, CLOSENESS_THRESHOLD)?;
        let outliers = super::count_outliers(&reference, &test, CLOSENESS_THRESHOLD);
        points.push(AccuracySweepPoint {
            total_bits: w,
            report,
            outliers,
        });
    }
    Ok(points)
}
