//! Experiment configuration in TOML, with named presets.
//!
//! A file may name a preset (`preset = "sift100k-nsw"`); its own keys are
//! then merged over the preset table by table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_fvecs, medoid, remove_exact_duplicates, synth_clusters, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::graph::{build_complete, build_nsw, load_graph, Graph};
use crate::pruning::DEFAULT_LAMBDA;
use crate::search::derive_seed;
use crate::trainer::{FreezeRule, RewardConfig, SearchParams, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian blobs; the experiment seed drives generation.
    Synthetic {
        n_clusters: usize,
        per_cluster: usize,
        dim: usize,
        spread: f32,
        n_train: usize,
        n_val: usize,
        n_test: usize,
    },
    /// Pre-split `.fvecs` files. Ground truth is computed by brute force.
    Fvecs {
        base: PathBuf,
        train: PathBuf,
        val: PathBuf,
        test: PathBuf,
        /// Drop queries that exactly match a base vector.
        #[serde(default)]
        dedup: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Nsw,
    /// A prebuilt graph file, e.g. an NSG exported to the binary format.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartRule {
    /// Keep the builder's start (vertex 0, the first NSW insertion, or the
    /// file's start).
    Builder,
    Medoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub m: usize,
    pub ef_construction: usize,
    pub start: StartRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Recorded for externally built NSG graphs; not used by any builder.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsg_r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsg_k: Option<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            kind: GraphKind::Nsw,
            m: 12,
            ef_construction: 300,
            start: StartRule::Builder,
            path: None,
            nsg_r: None,
            nsg_k: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruningConfig {
    pub lambda: f64,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    pub search: SearchParams,
    pub reward: RewardConfig,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub pruning: PruningConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

pub const PRESET_NAMES: [&str; 9] = [
    "toy",
    "nsw-2k",
    "sift100k-nsw",
    "sift100k-nsg",
    "sift1m-nsw",
    "deep100k-nsw",
    "deep100k-nsg",
    "deep1m-nsw",
    "glove1m-nsw",
];

fn fvecs(name: &str) -> DatasetConfig {
    let dir = PathBuf::from("data").join(name);
    DatasetConfig::Fvecs {
        base: dir.join("base.fvecs"),
        train: dir.join("train.fvecs"),
        val: dir.join("val.fvecs"),
        test: dir.join("test.fvecs"),
        dedup: true,
    }
}

fn nsw_preset(name: &str, data: &str, m: usize, ef_c: usize, ef: usize, dcs_max: usize) -> ExperimentConfig {
    ExperimentConfig {
        preset: Some(name.to_string()),
        seed: 0,
        output_dir: PathBuf::from("out").join(name),
        dataset: fvecs(data),
        graph: GraphConfig {
            kind: GraphKind::Nsw,
            m,
            ef_construction: ef_c,
            ..Default::default()
        },
        search: SearchParams { k: 1, ef },
        reward: RewardConfig { dcs_max },
        trainer: TrainConfig {
            entropy_coef: 0.01,
            ..Default::default()
        },
        pruning: PruningConfig::default(),
    }
}

fn nsg_preset(name: &str, data: &str, ef: usize, dcs_max: usize) -> ExperimentConfig {
    let mut c = nsw_preset(name, data, 0, 0, ef, dcs_max);
    c.graph = GraphConfig {
        kind: GraphKind::File,
        path: Some(PathBuf::from("data").join(data).join("nsg.bin")),
        nsg_r: Some(24),
        nsg_k: Some(200),
        ..Default::default()
    };
    c.trainer.entropy_coef = 0.001;
    c
}

/// Built-in configuration by name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let c = match name {
        "toy" => ExperimentConfig {
            preset: Some(name.into()),
            seed: 0,
            output_dir: PathBuf::from("out/toy"),
            dataset: DatasetConfig::Synthetic {
                n_clusters: 10,
                per_cluster: 10,
                dim: 64,
                spread: 0.6,
                n_train: 2000,
                n_val: 500,
                n_test: 1000,
            },
            graph: GraphConfig {
                kind: GraphKind::Complete,
                start: StartRule::Medoid,
                ..Default::default()
            },
            search: SearchParams { k: 1, ef: 1 },
            reward: RewardConfig { dcs_max: 150 },
            trainer: TrainConfig {
                epochs: 300,
                batch_size: 250,
                lr: 1e-3,
                hidden: 64,
                entropy_coef: 0.3,
                entropy_coef_final: Some(0.0),
                freeze: FreezeRule {
                    patience: 300,
                    ..Default::default()
                },
                ..Default::default()
            },
            pruning: PruningConfig::default(),
        },
        "nsw-2k" => ExperimentConfig {
            preset: Some(name.into()),
            seed: 0,
            output_dir: PathBuf::from("out/nsw-2k"),
            dataset: DatasetConfig::Synthetic {
                n_clusters: 20,
                per_cluster: 100,
                dim: 8,
                spread: 0.5,
                n_train: 5000,
                n_val: 1000,
                n_test: 1000,
            },
            graph: GraphConfig {
                kind: GraphKind::Nsw,
                m: 8,
                ef_construction: 100,
                ..Default::default()
            },
            search: SearchParams { k: 1, ef: 8 },
            reward: RewardConfig { dcs_max: 300 },
            trainer: TrainConfig {
                epochs: 150,
                batch_size: 500,
                lr: 1e-3,
                hidden: 64,
                ..Default::default()
            },
            pruning: PruningConfig::default(),
        },
        "sift100k-nsw" => nsw_preset(name, "sift100k", 12, 300, 10, 1200),
        "sift100k-nsg" => nsg_preset(name, "sift100k", 10, 1500),
        "sift1m-nsw" => nsw_preset(name, "sift1m", 14, 500, 12, 1500),
        "deep100k-nsw" => nsw_preset(name, "deep100k", 12, 300, 10, 1000),
        "deep100k-nsg" => nsg_preset(name, "deep100k", 10, 1500),
        "deep1m-nsw" => nsw_preset(name, "deep1m", 14, 500, 12, 1500),
        "glove1m-nsw" => nsw_preset(name, "glove1m", 20, 2000, 5, 1000),
        _ => return None,
    };
    Some(c)
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = s.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let table = match table.get("preset") {
            Some(toml::Value::String(name)) => {
                let p = preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
                let mut base = toml::Table::try_from(&p).map_err(|e| Error::Config(e.to_string()))?;
                // the dataset kind decides which keys are valid, so a file
                // that switches kind replaces the whole table
                if let (Some(toml::Value::Table(b)), Some(toml::Value::Table(o))) = (base.get("dataset"), table.get("dataset")) {
                    if o.get("kind").is_some_and(|k| Some(k) != b.get("kind")) {
                        base.remove("dataset");
                    }
                }
                merge(&mut base, table);
                base
            }
            Some(_) => return Err(Error::Config("preset must be a string".into())),
            None => table,
        };
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match &self.dataset {
            DatasetConfig::Synthetic {
                n_clusters,
                per_cluster,
                dim,
                spread,
                ..
            } => {
                if *n_clusters == 0 || *per_cluster == 0 || *dim == 0 {
                    return bad("synthetic dataset needs positive n_clusters, per_cluster and dim".into());
                }
                if !(spread.is_finite() && *spread >= 0.0) {
                    return bad("spread must be finite and non-negative".into());
                }
            }
            DatasetConfig::Fvecs { .. } => {}
        }
        let g = &self.graph;
        match g.kind {
            GraphKind::Nsw => {
                if g.m == 0 {
                    return bad("graph.m must be at least 1".into());
                }
                if g.ef_construction < g.m {
                    return bad(format!("graph.ef_construction ({}) must be >= graph.m ({})", g.ef_construction, g.m));
                }
            }
            GraphKind::File if g.path.is_none() => return bad("graph.kind = \"file\" needs graph.path".into()),
            _ => {}
        }
        if self.search.k == 0 {
            return bad("search.k must be at least 1".into());
        }
        if self.search.ef < self.search.k {
            return bad(format!("search.ef ({}) must be >= search.k ({})", self.search.ef, self.search.k));
        }
        if self.reward.dcs_max == 0 {
            return bad("reward.dcs_max must be at least 1".into());
        }
        if !(self.pruning.lambda > 0.0 && self.pruning.lambda.is_finite()) {
            return bad("pruning.lambda must be positive".into());
        }
        self.trainer.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Trainer settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.trainer.clone()
        }
    }

    /// Generates or loads the dataset and fills in ground truth.
    pub fn make_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetConfig::Synthetic {
                n_clusters,
                per_cluster,
                dim,
                spread,
                n_train,
                n_val,
                n_test,
            } => synth_clusters(
                &SynthSpec::new(*n_clusters, *per_cluster, *dim, *spread, self.seed).with_queries(*n_train, *n_val, *n_test),
            ),
            DatasetConfig::Fvecs {
                base,
                train,
                val,
                test,
                dedup,
            } => {
                let base = load_fvecs(base)?;
                let mut splits = [load_fvecs(train)?, load_fvecs(val)?, load_fvecs(test)?];
                if *dedup {
                    for s in &mut splits {
                        *s = remove_exact_duplicates(s, &base);
                    }
                }
                let [train, val, test] = splits;
                let mut ds = Dataset::new(base, train, val, test)?;
                ds.compute_gt()?;
                Ok(ds)
            }
        }
    }

    /// Builds (or loads) the initial graph over `base`.
    pub fn make_graph(&self, ds: &Dataset) -> Result<Graph> {
        let g = &self.graph;
        let mut graph = match g.kind {
            GraphKind::Complete => build_complete(ds.base.rows(), 0)?,
            GraphKind::Nsw => build_nsw(&ds.base, g.m, g.ef_construction, derive_seed(self.seed, 0x6e73_77))?,
            GraphKind::File => {
                let path = g.path.as_ref().ok_or_else(|| Error::Config("graph.path missing".into()))?;
                let loaded = load_graph(path)?;
                if loaded.n_vertices() != ds.base.rows() {
                    return Err(Error::InvalidGraph(format!(
                        "graph file has {} vertices but the base set has {} rows",
                        loaded.n_vertices(),
                        ds.base.rows()
                    )));
                }
                loaded
            }
        };
        if g.start == StartRule::Medoid {
            graph.set_start(medoid(&ds.base)?)?;
        }
        Ok(graph)
    }
}
