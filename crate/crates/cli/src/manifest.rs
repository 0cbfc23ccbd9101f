// SPDX-License-Identifier: Apache-2.0

//! `.manifest` run metadata.

use sha2::{Digest, Sha256};

use crate::config::{parse_config, ConfigError, ExperimentConfig};

const BEGIN: &str = "# begin config";
const END: &str = "# end config";

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSeeds {
    pub trial: usize,
    pub geometry: u64,
    pub ensemble: u64,
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub threads: usize,
    pub seeds: Vec<TrialSeeds>,
    pub duration_s: f64,
    /// `(file name, sha256)` for every output written alongside.
    pub outputs: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "version = {}\nexperiment = {}\nthreads = {}\nduration_s = {:.3}\n",
            self.version,
            self.config.experiment.as_str(),
            self.threads,
            self.duration_s
        );
        for n in &self.notes {
            out.push_str(&format!("note = {n}\n"));
        }
        out.push_str(BEGIN);
        out.push('\n');
        out.push_str(&self.config.to_text());
        out.push_str(END);
        out.push_str("\n\n[trial_seeds]\n");
        for s in &self.seeds {
            out.push_str(&format!(
                "{} = geometry {:#018x}, ensemble {:#018x}\n",
                s.trial, s.geometry, s.ensemble
            ));
        }
        out.push_str("\n[outputs]\n");
        for (name, sum) in &self.outputs {
            out.push_str(&format!("{name} = sha256:{sum}\n"));
        }
        out
    }
}

/// Recovers the effective config echoed into a manifest.
pub fn config_from_manifest(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let missing = || ConfigError {
        line: None,
        path: "manifest".into(),
        message: "no config echo found".into(),
    };
    let start = text.find(BEGIN).ok_or_else(missing)? + BEGIN.len();
    let end = text[start..].find(END).ok_or_else(missing)? + start;
    parse_config(text[start..end].trim_start_matches('\n'))
}
