//! Persisted file formats: model JSON, the normalizer cache, symbol files,
//! experiment configurations, and CSV series/report schemas.
//!
//! Every structured format carries a `format_version` stamp and readers
//! check it. The cache is advisory: a missing or absent file means
//! recomputation, never failure. CSV schemas are fixed:
//! `n,value,stderr` for scaling series and
//! `n,trials,freq_correct,freq_over,w_n,mean_estimate,indeterminate` for
//! trial reports.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::ScalingSeries;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, ProcessSpec, TrialReport};
use crate::estimator::EstimateMode;
use crate::model::{Alphabet, SymbolString, UnifilarModel};
use crate::nml::{CellMode, CellValue, ComplexityTable, ExactEnvelope};
use crate::processes::{OracleSource, SantaFeConfig};

/// Version stamp shared by all structured formats.
pub const FORMAT_VERSION: u32 = 1;

fn check_version(found: u32, what: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{what} has format_version {found}, this build reads {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// JSON schema for a unifilar model. `tau` holds 1-based state indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabet_size: u32,
    pub k: u32,
    pub pi: Vec<f64>,
    pub tau: Vec<Vec<u32>>,
    pub epsilon: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &UnifilarModel, name: Option<String>) -> ModelFile {
        let a = model.alphabet().size() as usize;
        ModelFile {
            format_version: FORMAT_VERSION,
            name,
            alphabet_size: model.alphabet().size(),
            k: model.state_count(),
            pi: model.pi().to_vec(),
            tau: model.tau_table().chunks(a).map(|c| c.to_vec()).collect(),
            epsilon: model.epsilon_table().chunks(a).map(|c| c.to_vec()).collect(),
        }
    }

    pub fn into_model(self) -> Result<UnifilarModel> {
        check_version(self.format_version, "model file")?;
        let alphabet = Alphabet::new(self.alphabet_size)?;
        let rows_ok = self.tau.len() == self.k as usize
            && self.epsilon.len() == self.k as usize
            && self
                .tau
                .iter()
                .chain_len_ok(self.alphabet_size as usize)
            && self
                .epsilon
                .iter()
                .map(|r| r.len())
                .all(|l| l == self.alphabet_size as usize);
        if !rows_ok {
            return Err(Error::Format(
                "tau/epsilon must be k rows of alphabet_size entries".into(),
            ));
        }
        UnifilarModel::new(
            alphabet,
            self.k,
            self.pi,
            self.tau.into_iter().flatten().collect(),
            self.epsilon.into_iter().flatten().collect(),
        )
    }
}

// Small helper so the row-shape check reads flat.
trait ChainLenOk {
    fn chain_len_ok(self, want: usize) -> bool;
}

impl<'a, I: Iterator<Item = &'a Vec<u32>>> ChainLenOk for I {
    fn chain_len_ok(self, want: usize) -> bool {
        for row in self {
            if row.len() != want {
                return false;
            }
        }
        true
    }
}

pub fn write_model(path: &Path, model: &UnifilarModel, name: Option<String>) -> Result<()> {
    let file = ModelFile::from_model(model, name);
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format(format!("model serialization: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(UnifilarModel, Option<String>)> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    let name = file.name.clone();
    Ok((file.into_model()?, name))
}

// ---------------------------------------------------------------------------
// Normalizer cache
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheEntry {
    alphabet_size: u32,
    n: u64,
    k: u32,
    mode: CellMode,
    lo_bits: f64,
    hi_bits: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheFile {
    format_version: u32,
    entries: Vec<CacheEntry>,
}

pub fn save_cache(path: &Path, table: &ComplexityTable) -> Result<()> {
    let entries: Vec<CacheEntry> = table
        .iter()
        .map(|(alphabet_size, n, k, v)| CacheEntry {
            alphabet_size,
            n,
            k,
            mode: v.mode,
            lo_bits: v.lo,
            hi_bits: v.hi,
        })
        .collect();
    let file = CacheFile {
        format_version: FORMAT_VERSION,
        entries,
    };
    let text = serde_json::to_string(&file)
        .map_err(|e| Error::Format(format!("cache serialization: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<ComplexityTable> {
    let text = fs::read_to_string(path)?;
    let file: CacheFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("cache file: {e}")))?;
    check_version(file.format_version, "cache file")?;
    let mut table = ComplexityTable::new();
    for e in file.entries {
        if e.lo_bits > e.hi_bits {
            return Err(Error::Format(format!(
                "cache entry (|X|={}, n={}, k={}) has lo > hi",
                e.alphabet_size, e.n, e.k
            )));
        }
        table.insert(
            Alphabet::new(e.alphabet_size)?,
            e.n as usize,
            e.k,
            CellValue {
                lo: e.lo_bits,
                hi: e.hi_bits,
                mode: e.mode,
            },
        );
    }
    Ok(table)
}

/// Loads the cache if the path exists, otherwise starts empty.
pub fn load_cache_or_empty(path: &Path) -> Result<ComplexityTable> {
    if path.exists() {
        load_cache(path)
    } else {
        Ok(ComplexityTable::new())
    }
}

// ---------------------------------------------------------------------------
// Symbol files
// ---------------------------------------------------------------------------

/// Writes realizations one per line, symbols as the characters '0'..'9'.
pub fn write_symbol_file(path: &Path, strings: &[SymbolString]) -> Result<()> {
    let mut out = String::new();
    for x in strings {
        if x.alphabet().size() > 10 {
            return Err(Error::InvalidInput(
                "symbol files support alphabets up to size 10".into(),
            ));
        }
        for &s in x.as_slice() {
            out.push(char::from(b'0' + s));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a symbol file: one realization per line, '#' starts a comment,
/// blank lines are ignored. When `alphabet` is absent it is inferred as the
/// smallest size (at least 2) covering the symbols seen.
pub fn read_symbol_file(path: &Path, alphabet: Option<Alphabet>) -> Result<Vec<SymbolString>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut symbols = Vec::with_capacity(body.len());
        for ch in body.chars() {
            match ch.to_digit(10) {
                Some(d) => symbols.push(d as u8),
                None => {
                    return Err(Error::Format(format!(
                        "symbol file line {}: bad character {ch:?}",
                        lineno + 1
                    )))
                }
            }
        }
        rows.push(symbols);
    }
    let alphabet = match alphabet {
        Some(a) => a,
        None => {
            let max = rows.iter().flatten().copied().max().unwrap_or(1);
            Alphabet::new((max as u32 + 1).max(2))?
        }
    };
    rows.into_iter()
        .map(|symbols| SymbolString::new(symbols, alphabet))
        .collect()
}

// ---------------------------------------------------------------------------
// CSV schemas
// ---------------------------------------------------------------------------

/// Scaling series as `n,value,stderr`.
pub fn series_to_csv(series: &ScalingSeries) -> String {
    let mut out = String::from("n,value,stderr\n");
    for p in &series.points {
        out.push_str(&format!("{},{},{}\n", p.n, p.value, p.stderr));
    }
    out
}

pub fn write_series_csv(path: &Path, series: &ScalingSeries) -> Result<()> {
    fs::write(path, series_to_csv(series))?;
    Ok(())
}

/// Reads a `n,value,stderr` series; metadata fields take the given labels.
pub fn read_series_csv(path: &Path, quantity: &str, process: &str) -> Result<ScalingSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "n,value,stderr" => {}
        other => {
            return Err(Error::Format(format!(
                "series CSV must start with 'n,value,stderr', found {other:?}"
            )))
        }
    }
    let mut series = ScalingSeries::new(quantity, process);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "series CSV line {}: expected 3 fields",
                lineno + 2
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("series CSV line {}: {e}", lineno + 2)))
        };
        let n = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::Format(format!("series CSV line {}: {e}", lineno + 2)))?;
        series.push(n, parse(fields[1])?, parse(fields[2])?)?;
    }
    Ok(series)
}

/// Trial report as
/// `n,trials,freq_correct,freq_over,w_n,mean_estimate,indeterminate`.
pub fn trial_report_to_csv(report: &TrialReport) -> String {
    let mut out = String::from("n,trials,freq_correct,freq_over,w_n,mean_estimate,indeterminate\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.trials, r.freq_correct, r.freq_over, r.w_n, r.mean_estimate, r.indeterminate
        ));
    }
    out
}

pub fn write_trial_csv(path: &Path, report: &TrialReport) -> Result<()> {
    fs::write(path, trial_report_to_csv(report))?;
    Ok(())
}

/// Writes any serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("json serialization: {e}")))?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment configuration files
// ---------------------------------------------------------------------------

/// Process description as written in configuration files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessSpecFile {
    /// Path to a model JSON file.
    Model { path: String },
    Oracle {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits_file: Option<String>,
        #[serde(default)]
        bits_seed: u64,
    },
    SantaFe {
        alpha: f64,
        k_max: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits_file: Option<String>,
        #[serde(default)]
        bits_seed: u64,
    },
}

/// JSON mirror of [`ExperimentConfig`] plus output paths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfigFile {
    pub format_version: u32,
    pub process: ProcessSpecFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_order: Option<u32>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub mode: EstimateMode,
    pub band: u32,
    /// Exact-envelope override in leaves; the default is 2^14.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_exact_leaves: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn oracle_source(bits_file: &Option<String>, bits_seed: u64) -> Result<OracleSource> {
    match bits_file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let bits: Vec<u8> = text
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Format(format!(
                        "oracle bit file: bad character {other:?}"
                    ))),
                })
                .collect::<Result<_>>()?;
            OracleSource::from_bits(bits)
        }
        None => Ok(OracleSource::seeded(bits_seed)),
    }
}

impl ExperimentConfigFile {
    pub fn into_config(self) -> Result<(ExperimentConfig, Option<String>)> {
        check_version(self.format_version, "experiment config")?;
        let process = match &self.process {
            ProcessSpecFile::Model { path } => {
                let (model, _) = read_model(Path::new(path))?;
                ProcessSpec::Model(model)
            }
            ProcessSpecFile::Oracle {
                theta,
                bits_file,
                bits_seed,
            } => ProcessSpec::Oracle {
                theta: *theta,
                source: oracle_source(bits_file, *bits_seed)?,
            },
            ProcessSpecFile::SantaFe {
                alpha,
                k_max,
                bits_file,
                bits_seed,
            } => ProcessSpec::SantaFe {
                config: SantaFeConfig::new(*alpha, *k_max, None)?,
                source: oracle_source(bits_file, *bits_seed)?,
            },
        };
        let envelope = self
            .max_exact_leaves
            .map(ExactEnvelope::with_max_leaves)
            .unwrap_or_default();
        Ok((
            ExperimentConfig {
                process,
                true_order: self.true_order,
                n_grid: self.n_grid,
                trials: self.trials,
                seed: self.seed,
                mode: self.mode,
                band: self.band,
                envelope,
            },
            self.output,
        ))
    }
}

pub fn read_experiment_config(path: &Path) -> Result<(ExperimentConfig, Option<String>)> {
    let text = fs::read_to_string(path)?;
    let file: ExperimentConfigFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("config file: {e}")))?;
    file.into_config()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nml::ensure_cells;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("unifilar-files-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn model_file_round_trip() {
        let model = UnifilarModel::new(
            Alphabet::BINARY,
            2,
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![1, 2, 1, 1],
            vec![0.5, 0.5, 1.0, 0.0],
        )
        .unwrap();
        let path = tmp("model.json");
        write_model(&path, &model, Some("golden-mean".into())).unwrap();
        let (back, name) = read_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(name.as_deref(), Some("golden-mean"));
    }

    #[test]
    fn model_file_rejects_bad_version_and_shape() {
        let path = tmp("bad_model.json");
        fs::write(
            &path,
            r#"{"format_version":99,"alphabet_size":2,"k":1,"pi":[1.0],"tau":[[1,1]],"epsilon":[[0.5,0.5]]}"#,
        )
        .unwrap();
        assert_eq!(read_model(&path).unwrap_err().category(), "format");
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let mut table = ComplexityTable::new();
        let env = ExactEnvelope::default();
        for n in 1..=8usize {
            ensure_cells(&mut table, Alphabet::BINARY, n, 4, &env).unwrap();
        }
        let path = tmp("cache.json");
        save_cache(&path, &table).unwrap();
        let back = load_cache(&path).unwrap();
        assert_eq!(back, table);
        // Missing file: empty table, not an error.
        let empty = load_cache_or_empty(&tmp("missing.json")).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn symbol_file_round_trip_with_comments() {
        let path = tmp("symbols.txt");
        fs::write(&path, "# comment line\n0101 # trailing\n\n2201\n").unwrap();
        let rows = read_symbol_file(&path, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].as_slice(), &[0, 1, 0, 1]);
        assert_eq!(rows[1].alphabet().size(), 3);
        write_symbol_file(&path, &rows).unwrap();
        let again = read_symbol_file(&path, Some(Alphabet::TERNARY)).unwrap();
        assert_eq!(again[1].as_slice(), rows[1].as_slice());
    }

    #[test]
    fn series_csv_round_trip() {
        let mut s = ScalingSeries::new("q", "p");
        s.push(2, 0.125, 0.001).unwrap();
        s.push(4, -3.5e-7, 0.0).unwrap();
        let path = tmp("series.csv");
        write_series_csv(&path, &s).unwrap();
        let back = read_series_csv(&path, "q", "p").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn config_round_trip() {
        let model_path = tmp("cfg_model.json");
        let model = UnifilarModel::iid(Alphabet::BINARY, vec![0.8, 0.2]).unwrap();
        write_model(&model_path, &model, None).unwrap();
        let cfg_file = ExperimentConfigFile {
            format_version: FORMAT_VERSION,
            process: ProcessSpecFile::Model {
                path: model_path.to_string_lossy().into_owned(),
            },
            true_order: Some(1),
            n_grid: vec![4, 8],
            trials: 10,
            seed: 5,
            mode: EstimateMode::Exact,
            band: 3,
            max_exact_leaves: None,
            output: None,
        };
        let path = tmp("config.json");
        fs::write(&path, serde_json::to_string(&cfg_file).unwrap()).unwrap();
        let (cfg, output) = read_experiment_config(&path).unwrap();
        assert!(output.is_none());
        assert_eq!(cfg.n_grid, vec![4, 8]);
        assert_eq!(cfg.band, 3);
        match cfg.process {
            ProcessSpec::Model(m) => assert_eq!(m.state_count(), 1),
            _ => panic!("expected model process"),
        }
    }
}
