use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RegistryError;
use crate::features_resp_cpc::{BREATH_NAMES, CPC_NAMES};
use crate::features_rr::{FREQ_NAMES, HRV_NAMES, NONLINEAR_NAMES, NOVEL_NAMES, STAT_NAMES};

pub const MANIFEST_LEN: usize = 152;

/// Which breathing channels feed the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Single,
    TwoChannel,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Single => "single",
            Profile::TwoChannel => "two-channel",
        })
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Profile::Single),
            "two-channel" => Ok(Profile::TwoChannel),
            other => Err(format!("unknown profile `{other}` (expected single or two-channel)")),
        }
    }
}

/// Extractor group a manifest entry comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    RrHrv,
    RrStat,
    RrNonlinear,
    RrNovel,
    RrFreq,
    BreathChest,
    BreathAbdomen,
    Cpc,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::RrHrv => "rr_hrv",
            Source::RrStat => "rr_stat",
            Source::RrNonlinear => "rr_nonlinear",
            Source::RrNovel => "rr_novel",
            Source::RrFreq => "rr_freq",
            Source::BreathChest => "breath_chest",
            Source::BreathAbdomen => "breath_abdomen",
            Source::Cpc => "cpc",
        }
    }

    /// Feature names of the group, in extractor output order.
    pub fn names(self) -> &'static [&'static str] {
        match self {
            Source::RrHrv => &HRV_NAMES,
            Source::RrStat => &STAT_NAMES,
            Source::RrNonlinear => &NONLINEAR_NAMES,
            Source::RrNovel => &NOVEL_NAMES,
            Source::RrFreq => &FREQ_NAMES,
            Source::BreathChest | Source::BreathAbdomen => &BREATH_NAMES,
            Source::Cpc => &CPC_NAMES,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Source::RrHrv => "hrv_",
            Source::RrStat => "rr_",
            Source::RrNonlinear => "rrnl_",
            Source::RrNovel => "",
            Source::RrFreq => "rrfreq_",
            Source::BreathChest => "chest_",
            Source::BreathAbdomen => "abd_",
            Source::Cpc => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub source: Source,
    /// Position within the group's output array.
    pub index: usize,
    pub window: usize,
    pub units: &'static str,
}

/// Window widths (in epochs) for each group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifestWindows {
    pub hrv: usize,
    pub stat: usize,
    pub nonlinear: usize,
    pub f1: usize,
    pub f2: usize,
    pub f3: usize,
    pub freq: usize,
    pub breath: usize,
    pub cpc: usize,
    /// Second width for the re-evaluated RR time-domain entries.
    pub reeval: usize,
}

impl Default for ManifestWindows {
    fn default() -> Self {
        Self {
            hrv: 1,
            stat: 1,
            nonlinear: 3,
            f1: 119,
            f2: 9,
            f3: 9,
            freq: 9,
            breath: 3,
            cpc: 9,
            reeval: 9,
        }
    }
}

fn units(source: Source, name: &str) -> &'static str {
    match source {
        Source::RrHrv => match name {
            "pnn50" | "pnn20" => "fraction",
            "nn50" => "count",
            "hr_mean" | "hr_sd" => "bpm",
            _ => "s",
        },
        Source::RrStat => match name {
            "skewness" | "kurtosis" | "cv" => "1",
            n if n.starts_with("acf") => "1",
            n if n.starts_with("count") || n.starts_with("longest") => "count",
            "trend_slope" => "s/beat",
            "energy" => "s^2",
            _ => "s",
        },
        Source::RrNonlinear => match name {
            "sample_entropy" => "1",
            "zero_crossings" => "count",
            "zero_crossing_rate" => "1/beat",
            _ => "s",
        },
        Source::RrNovel => "s",
        Source::RrFreq => match name {
            n if n.ends_with("_freq") || n == "spectral_centroid" || n == "spectral_edge_95" => "Hz",
            n if n.ends_with("_power") || n == "power_0p4_1hz" => "s^2",
            _ => "1",
        },
        Source::BreathChest | Source::BreathAbdomen => match name {
            "breath_count" => "count",
            n if n.starts_with("breath_interval") => "s",
            "zero_crossing_rate" => "1/s",
            "signal_kurtosis" | "signal_skewness" | "inhale_exhale_ratio" | "spectral_entropy" | "dominant_ratio" => {
                "1"
            }
            n if n.ends_with("_freq") || n == "spectral_centroid" || n == "dominant_bandwidth" => "Hz",
            n if n.ends_with("_power") || n.ends_with("energy") || n.ends_with("hz") => "au^2",
            _ => "au",
        },
        Source::Cpc => "1",
    }
}

/// Ordered, uniquely named list of the matrix columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureManifest {
    profile: Profile,
    entries: Vec<ManifestEntry>,
}

impl FeatureManifest {
    /// Manifest with the default windows.
    pub fn for_profile(profile: Profile) -> Self {
        Self::build(profile, &ManifestWindows::default()).expect("default manifest is valid")
    }

    pub fn build(profile: Profile, w: &ManifestWindows) -> Result<Self, RegistryError> {
        let mut entries = Vec::with_capacity(MANIFEST_LEN);
        let mut push = |source: Source, indices: &mut dyn Iterator<Item = usize>, window: usize| {
            for index in indices {
                let base = source.names()[index];
                entries.push(ManifestEntry {
                    name: format!("{}{}_w{}", source.prefix(), base, window),
                    source,
                    index,
                    window,
                    units: units(source, base),
                });
            }
        };
        push(Source::RrHrv, &mut (0..HRV_NAMES.len()), w.hrv);
        push(Source::RrStat, &mut (0..STAT_NAMES.len()), w.stat);
        push(Source::RrNonlinear, &mut (0..NONLINEAR_NAMES.len()), w.nonlinear);
        push(Source::RrNovel, &mut std::iter::once(0), w.f1);
        push(Source::RrNovel, &mut std::iter::once(1), w.f2);
        push(Source::RrNovel, &mut std::iter::once(2), w.f3);
        push(Source::RrFreq, &mut (0..FREQ_NAMES.len()), w.freq);
        push(Source::BreathChest, &mut (0..BREATH_NAMES.len()), w.breath);
        if profile == Profile::TwoChannel {
            push(Source::BreathAbdomen, &mut (0..BREATH_NAMES.len()), w.breath);
        }
        push(Source::Cpc, &mut (0..CPC_NAMES.len()), w.cpc);
        // Remaining slots: RR time-domain entries again at the second width.
        match profile {
            Profile::Single => {
                push(Source::RrHrv, &mut (0..HRV_NAMES.len()), w.reeval);
                push(Source::RrStat, &mut (0..STAT_NAMES.len()), w.reeval);
                // SD1 is RMSSD/√2 and is left out
                push(Source::RrNonlinear, &mut [0, 1, 2, 4].into_iter(), w.reeval);
            }
            Profile::TwoChannel => {
                push(Source::RrHrv, &mut (0..HRV_NAMES.len()), w.reeval);
                push(Source::RrStat, &mut (0..13), w.reeval);
            }
        }
        let manifest = Self { profile, entries };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<(), RegistryError> {
        if self.entries.len() != MANIFEST_LEN {
            return Err(RegistryError::InvalidManifest(format!(
                "{} entries, expected {MANIFEST_LEN}",
                self.entries.len()
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.window == 0 || e.window % 2 == 0 {
                return Err(RegistryError::InvalidManifest(format!(
                    "{}: window {} must be odd",
                    e.name, e.window
                )));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(RegistryError::InvalidManifest(format!("duplicate entry {}", e.name)));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Tab-separated table: `name, source, window, units`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("name\tsource\twindow\tunits\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.name,
                e.source.as_str(),
                e.window,
                e.units
            ));
        }
        out
    }

    /// SHA-256 of the TSV table, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_tsv().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Distinct `(source, window)` groups the manifest needs.
    pub fn groups(&self) -> Vec<(Source, usize)> {
        let mut g: Vec<(Source, usize)> = self.entries.iter().map(|e| (e.source, e.window)).collect();
        g.sort_unstable();
        g.dedup();
        g
    }
}
