use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::svg::{Curve, Plot, Points};
use super::{screen_seeds, OutputFormat, ScreenModel, SweepConfig, SweepPoint, SweepResult};
use crate::channel::{MatrixMeta, Model};
use crate::entanglement::{negativity_closed_form, ClosedFormParams};
use crate::error::{Error, Result};

/// Samples per analytic curve in the plots.
const CURVE_SAMPLES: usize = 151;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub ell: u32,
    pub w_index: usize,
    #[serde(rename = "W")]
    pub w: f64,
    pub w0_over_r0: f64,
    pub wp_over_r0: f64,
    pub xi: f64,
    /// `null` at zero strength.
    pub r0: Option<f64>,
    pub negativity_mc: f64,
    pub err: f64,
    pub negativity_analytic: f64,
    pub negativity_closed_form: f64,
    pub central_element: f64,
    pub central_element_analytic: f64,
    pub matrix_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub version: String,
    pub mc_model: String,
    pub analytic_model: String,
    pub config: SweepConfig,
    pub w_grid: Vec<f64>,
    /// Kolmogorov synthesis seeds per strength index.
    pub screen_seeds: Vec<Vec<u64>>,
    pub points: Vec<PointSummary>,
}

#[derive(Serialize)]
struct CsvRow {
    ell: u32,
    #[serde(rename = "W")]
    w: f64,
    negativity_mc: f64,
    err: f64,
    negativity_analytic: f64,
    negativity_closed_form: f64,
    w0_over_r0: f64,
    wp_over_r0: f64,
    central_element: f64,
    central_element_analytic: f64,
}

pub fn matrix_file_name(p: &SweepPoint) -> String {
    format!("rho_ell{}_w{:02}.json", p.ell, p.w_index)
}

fn mc_model(config: &SweepConfig) -> Model {
    match (config.noise, config.screen_model) {
        (true, _) => Model::Tomography,
        (false, ScreenModel::Kolmogorov) => Model::KolmogorovMonteCarlo,
        (false, ScreenModel::Tilt) => Model::TiltMonteCarlo,
    }
}

pub fn point_meta(config: &SweepConfig, p: &SweepPoint) -> MatrixMeta {
    MatrixMeta {
        alpha: config.alpha,
        xi: Some(p.xi),
        w: Some(p.w),
        w_convention: Some(config.w_convention),
        model: if p.w == 0.0 { Model::NoTurbulence } else { mc_model(config) },
    }
}

impl SweepSummary {
    pub fn from_result(result: &SweepResult) -> Self {
        let c = &result.config;
        let points = result
            .points
            .iter()
            .map(|p| PointSummary {
                ell: p.ell,
                w_index: p.w_index,
                w: p.w,
                w0_over_r0: p.w0_over_r0,
                wp_over_r0: p.wp_over_r0,
                xi: p.xi,
                r0: p.r0.is_finite().then_some(p.r0),
                negativity_mc: p.negativity_mc,
                err: p.err,
                negativity_analytic: p.negativity_analytic,
                negativity_closed_form: p.negativity_closed_form,
                central_element: p.central_element,
                central_element_analytic: p.central_element_analytic,
                matrix_file: matrix_file_name(p),
            })
            .collect();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            mc_model: mc_model(c).label().to_string(),
            analytic_model: Model::QuadraticModel.label().to_string(),
            config: c.clone(),
            w_grid: result.w_grid.clone(),
            screen_seeds: match c.screen_model {
                ScreenModel::Kolmogorov => (0..result.w_grid.len()).map(|i| screen_seeds(c, i)).collect(),
                ScreenModel::Tilt => Vec::new(),
            },
            points,
        }
    }
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

pub fn csv_table(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &result.points {
        w.serialize(CsvRow {
            ell: p.ell,
            w: p.w,
            negativity_mc: p.negativity_mc,
            err: p.err,
            negativity_analytic: p.negativity_analytic,
            negativity_closed_form: p.negativity_closed_form,
            w0_over_r0: p.w0_over_r0,
            wp_over_r0: p.wp_over_r0,
            central_element: p.central_element,
            central_element_analytic: p.central_element_analytic,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn analytic_curve(config: &SweepConfig, ell: u32, w_max: f64) -> Result<Vec<(f64, f64)>> {
    (0..CURVE_SAMPLES)
        .map(|k| {
            let w = w_max * k as f64 / (CURVE_SAMPLES - 1) as f64;
            let p = ClosedFormParams::from_strength(ell, config.alpha, w, config.w_convention)?;
            Ok((w, negativity_closed_form(&p).value))
        })
        .collect()
}

fn axis_label(config: &SweepConfig) -> String {
    match config.w_convention {
        crate::channel::StrengthConvention::W0OverR0 => "W = w0/r0".into(),
        crate::channel::StrengthConvention::WpOverR0 => "W = wp/r0".into(),
    }
}

pub fn svg_plots(result: &SweepResult) -> Result<Vec<(String, String)>> {
    let c = &result.config;
    let w_max = result.w_grid.last().copied().unwrap_or(0.0).max(1e-9);
    let mc_label = mc_model(c).label();
    let mut out = Vec::new();
    let mut overlay = Plot {
        title: format!("Negativity vs turbulence strength (α = {})", c.alpha),
        x_label: axis_label(c),
        y_label: "negativity".into(),
        x_max: w_max,
        curves: Vec::new(),
        points: Vec::new(),
    };
    for &ell in &c.ell_values {
        let curve = analytic_curve(c, ell, w_max)?;
        let pts: Vec<(f64, f64, f64)> = result.points_for(ell).map(|p| (p.w, p.negativity_mc, p.err)).collect();
        let single = Plot {
            title: format!("ℓ = {ell}, α = {}", c.alpha),
            x_label: axis_label(c),
            y_label: "negativity".into(),
            x_max: w_max,
            curves: vec![Curve { label: "quadratic model".into(), xy: curve.clone() }],
            points: vec![Points { label: mc_label.into(), xye: pts.clone() }],
        };
        out.push((format!("negativity_ell{ell}.svg"), single.render()));
        overlay.curves.push(Curve { label: format!("ℓ = {ell}"), xy: curve });
        overlay.points.push(Points { label: format!("ℓ = {ell} MC"), xye: pts });
    }
    out.push(("overlay.svg".into(), overlay.render()));
    Ok(out)
}

/// Writes the requested formats into `dir` and returns the file paths.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c = &result.config;
    let mut written = Vec::new();
    for format in &c.formats {
        match format {
            OutputFormat::Csv => write(dir.join("negativity.csv"), csv_table(result)?, &mut written)?,
            OutputFormat::Json => {
                for p in &result.points {
                    write(dir.join(matrix_file_name(p)), p.rho.to_json(&point_meta(c, p)), &mut written)?;
                }
                let summary = serde_json::to_string_pretty(&SweepSummary::from_result(result))
                    .map_err(|e| Error::Format(e.to_string()))?;
                write(dir.join("summary.json"), summary, &mut written)?;
            }
            OutputFormat::Svg => {
                for (name, body) in svg_plots(result)? {
                    write(dir.join(name), body, &mut written)?;
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BipartiteDensityMatrix;
    use crate::experiment::run_sweep;

    #[test]
    fn outputs_have_expected_shape_and_round_trip() {
        let cfg = SweepConfig {
            w_steps: 3,
            w_max: 1.0,
            realizations: 3,
            bootstrap: 10,
            grid_n: 128,
            ..SweepConfig::default()
        };
        let res = run_sweep(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&res, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("negativity.csv")).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("ell,W,negativity_mc,err,negativity_analytic,negativity_closed_form"));
        assert_eq!(lines.count(), 3 * 3);
        let overlay = fs::read_to_string(dir.path().join("overlay.svg")).unwrap();
        assert_eq!(overlay.matches(r#"class="curve""#).count(), 3);
        for p in &res.points {
            let (back, meta) = BipartiteDensityMatrix::read_json(&dir.path().join(matrix_file_name(p))).unwrap();
            assert_eq!(back.matrix(), p.rho.matrix());
            assert_eq!(meta, point_meta(&cfg, p));
        }
        let summary: SweepSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary.points.len(), 9);
        assert_eq!(summary.screen_seeds.len(), 3);
        assert_eq!(files.len(), 1 + 9 + 1 + 4);
    }
}
