//! TOML configuration layer. Keys mirror the CLI flags; a parsed file and a
//! set of command-line overrides are both [`ConfigFile`]s applied in turn.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{OutputFormat, ScreenModel, SweepConfig};
use crate::channel::StrengthConvention;
use crate::error::{Error, Result};
use crate::tomography::ReconstructionMethod;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ell: Option<Vec<u32>>,
    pub alpha: Option<f64>,
    pub w0: Option<f64>,
    pub w_max: Option<f64>,
    pub w_steps: Option<usize>,
    pub w_values: Option<Vec<f64>>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub w_convention: Option<String>,
    pub screen_model: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub grid_n: Option<usize>,
    pub grid_delta: Option<f64>,
    pub subgrid_levels: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    pub flux: Option<f64>,
    pub noise: Option<bool>,
    pub integration: Option<f64>,
    pub bootstrap: Option<usize>,
    pub ml: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<PathBuf>,
    pub format: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub output: OutputSection,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Overwrites every key present in `self`.
    pub fn apply(self, mut c: SweepConfig) -> Result<SweepConfig> {
        let s = self.sweep;
        set(&mut c.ell_values, s.ell);
        set(&mut c.alpha, s.alpha);
        set(&mut c.w0, s.w0);
        if s.w_max.is_some() || s.w_steps.is_some() {
            c.w_values = None;
        }
        set(&mut c.w_max, s.w_max);
        set(&mut c.w_steps, s.w_steps);
        if s.w_values.is_some() {
            c.w_values = s.w_values;
        }
        set(&mut c.realizations, s.realizations);
        set(&mut c.master_seed, s.seed);
        if let Some(v) = s.w_convention {
            c.w_convention = StrengthConvention::parse(&v)?;
        }
        if let Some(v) = s.screen_model {
            c.screen_model = v.parse::<ScreenModel>()?;
        }

        let g = self.grid;
        set(&mut c.grid_n, g.grid_n);
        if g.grid_delta.is_some() {
            c.grid_delta = g.grid_delta;
        }
        set(&mut c.subgrid_levels, g.subgrid_levels);

        let t = self.tomography;
        set(&mut c.flux, t.flux);
        set(&mut c.noise, t.noise);
        set(&mut c.integration, t.integration);
        set(&mut c.bootstrap, t.bootstrap);
        if let Some(ml) = t.ml {
            c.reconstruction = if ml { ReconstructionMethod::MaximumLikelihood } else { ReconstructionMethod::Linear };
        }

        let o = self.output;
        set(&mut c.output_dir, o.out);
        if let Some(f) = o.format {
            c.formats = f.iter().map(|s| s.parse::<OutputFormat>()).collect::<Result<_>>()?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_defaults() {
        let text = r#"
[sweep]
ell = [1]
w_values = [0.0, 0.68, 1.5]
seed = 7
w_convention = "wp_over_r0"

[grid]
grid_n = 256

[tomography]
noise = true
ml = true

[output]
out = "results"
format = ["csv"]
"#;
        let c = ConfigFile::parse(text).unwrap().apply(SweepConfig::default()).unwrap();
        assert_eq!(c.ell_values, vec![1]);
        assert_eq!(c.w_grid(), vec![0.0, 0.68, 1.5]);
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.w_convention, StrengthConvention::WpOverR0);
        assert_eq!(c.grid_n, 256);
        assert!(c.noise);
        assert_eq!(c.reconstruction, ReconstructionMethod::MaximumLikelihood);
        assert_eq!(c.output_dir, PathBuf::from("results"));
        assert_eq!(c.formats, vec![OutputFormat::Csv]);
        assert_eq!(c.alpha, 0.59);
    }

    #[test]
    fn later_layer_wins() {
        let file = ConfigFile::parse("[sweep]\nw_values = [0.0, 1.0]\nrealizations = 3\n").unwrap();
        let cli = ConfigFile {
            sweep: SweepSection { w_steps: Some(4), ..Default::default() },
            ..Default::default()
        };
        let c = cli.apply(file.apply(SweepConfig::default()).unwrap()).unwrap();
        assert_eq!(c.w_grid().len(), 4);
        assert_eq!(c.realizations, 3);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(ConfigFile::parse("[sweep]\nbogus = 1\n").is_err());
        let bad = ConfigFile::parse("[sweep]\nscreen_model = \"fancy\"\n").unwrap();
        assert!(bad.apply(SweepConfig::default()).is_err());
    }
}
