//! Run configuration files: structured text (TOML) with model, prior and
//! sampler sections, plus the known-mask prior file.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gibbs::GibbsSettings;
use crate::params::{MaskEntry, Orientation, Restriction};
use crate::spatial_mh::EffectPrior;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub sampler: SamplerSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub restriction: Option<String>,
    pub tau: Option<f64>,
    pub mu_diag: Option<f64>,
    /// Path to a known-mask prior file, relative to the config file.
    pub mask_file: Option<String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { restriction: None, tau: None, mu_diag: None, mask_file: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub kind: Option<String>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub kappa: Option<f64>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection { kind: None, mean: None, sd: None, kappa: None, b0: None, b1: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub mh_step: Option<f64>,
    pub max_redraws: Option<usize>,
    pub credible_level: Option<f64>,
    pub greedy_accept: Option<bool>,
    pub init_eps: Option<f64>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            iterations: None,
            burn_in: None,
            mh_step: None,
            max_redraws: None,
            credible_level: None,
            greedy_accept: None,
            init_eps: None,
        }
    }
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<RunConfigFile> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))
    }

    /// Resolve the restriction, consuming the mask entries when the config
    /// names the known-mask restriction.
    pub fn restriction(&self, mask: Option<Vec<MaskEntry>>) -> Result<Restriction> {
        let name = self.model.restriction.as_deref().unwrap_or("symmetric");
        match name {
            "symmetric" => Ok(Restriction::Symmetric),
            "triangular-upper" | "triangular" => Ok(Restriction::Triangular(Orientation::Upper)),
            "triangular-lower" => Ok(Restriction::Triangular(Orientation::Lower)),
            "known-mask" => {
                let entries = mask.ok_or_else(|| {
                    Error::Config("known-mask restriction requires model.mask_file".into())
                })?;
                Ok(Restriction::KnownMask(entries))
            }
            other => Err(Error::Config(format!("unknown restriction `{other}`"))),
        }
    }

    pub fn prior(&self) -> Result<EffectPrior> {
        let kind = self.prior.kind.as_deref().unwrap_or("normal");
        match kind {
            "normal" => Ok(EffectPrior::Normal {
                mean: self.prior.mean.unwrap_or(0.0),
                sd: self.prior.sd.unwrap_or(1.0),
            }),
            "normal-gamma" => Ok(EffectPrior::NormalGamma {
                kappa: self.prior.kappa.unwrap_or(0.1),
                b0: self.prior.b0.unwrap_or(0.01),
                b1: self.prior.b1.unwrap_or(0.01),
            }),
            other => Err(Error::Config(format!("unknown prior kind `{other}`"))),
        }
    }

    pub fn to_settings(
        &self,
        seed: u64,
        greedy_flag: bool,
        mask: Option<Vec<MaskEntry>>,
    ) -> Result<GibbsSettings> {
        let defaults = GibbsSettings::default();
        Ok(GibbsSettings {
            iterations: self.sampler.iterations.unwrap_or(defaults.iterations),
            burn_in: self.sampler.burn_in.unwrap_or(defaults.burn_in),
            seed,
            stream: 0,
            mh_step: self.sampler.mh_step.unwrap_or(defaults.mh_step),
            max_redraws: self.sampler.max_redraws.unwrap_or(defaults.max_redraws),
            greedy: self.sampler.greedy_accept.unwrap_or(false) || greedy_flag,
            prior: self.prior()?,
            restriction: self.restriction(mask)?,
            tau: self.model.tau.unwrap_or(defaults.tau),
            mu_diag: self.model.mu_diag.unwrap_or(defaults.mu_diag),
            credible_level: self.sampler.credible_level.unwrap_or(defaults.credible_level),
            init_eps: self.sampler.init_eps.unwrap_or(defaults.init_eps),
            abort_dump: None,
        })
    }
}

/// Known-mask prior file: comma-separated `k,i,j,mean,sd` records with
/// 1-based indices.
pub fn parse_mask_file(text: &str) -> Result<Vec<MaskEntry>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("mask file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["k", "i", "j", "mean", "sd"] {
        return Err(Error::Parse(format!(
            "mask header must be `k,i,j,mean,sd`, got `{header}`"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "mask line {}: expected 5 fields",
                lineno + 2
            )));
        }
        let parse_idx = |f: &str, what: &str| -> Result<usize> {
            let v: usize = f
                .parse()
                .map_err(|_| Error::Parse(format!("mask line {}: bad {what} `{f}`", lineno + 2)))?;
            if v == 0 {
                return Err(Error::Parse(format!(
                    "mask line {}: {what} indices are 1-based",
                    lineno + 2
                )));
            }
            Ok(v - 1)
        };
        let parse_f = |f: &str, what: &str| -> Result<f64> {
            f.parse()
                .map_err(|_| Error::Parse(format!("mask line {}: bad {what} `{f}`", lineno + 2)))
        };
        out.push(MaskEntry {
            k: parse_idx(fields[0], "k")?,
            i: parse_idx(fields[1], "i")?,
            j: parse_idx(fields[2], "j")?,
            mean: parse_f(fields[3], "mean")?,
            sd: parse_f(fields[4], "sd")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfigFile::parse("").unwrap();
        let s = cfg.to_settings(9, false, None).unwrap();
        assert_eq!(s.iterations, 2000);
        assert_eq!(s.burn_in, 1000);
        assert_eq!(s.tau, 0.001);
        assert_eq!(s.seed, 9);
        assert!(matches!(s.prior, EffectPrior::Normal { mean, sd } if mean == 0.0 && sd == 1.0));
        assert!(matches!(s.restriction, Restriction::Symmetric));
    }

    #[test]
    fn normal_gamma_defaults_match_protocol() {
        let cfg = RunConfigFile::parse("[prior]\nkind = \"normal-gamma\"\n").unwrap();
        match cfg.prior().unwrap() {
            EffectPrior::NormalGamma { kappa, b0, b1 } => {
                assert_eq!(kappa, 0.1);
                assert_eq!(b0, 0.01);
                assert_eq!(b1, 0.01);
            }
            _ => panic!("expected normal-gamma"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfigFile::parse("[sampler]\nitertions = 5\n").is_err());
    }

    #[test]
    fn mask_file_parses_and_validates() {
        let text = "k,i,j,mean,sd\n1,1,2,1.0,0.01\n2,3,4,-1.0,0.01\n";
        let mask = parse_mask_file(text).unwrap();
        assert_eq!(mask.len(), 2);
        assert_eq!(mask[0].k, 0);
        assert_eq!(mask[0].i, 0);
        assert_eq!(mask[0].j, 1);
        assert_eq!(mask[1].mean, -1.0);
        assert!(parse_mask_file("k,i,j,mean,sd\n0,1,1,0,0.1\n").is_err());
        assert!(parse_mask_file("wrong,header\n").is_err());
    }
}
