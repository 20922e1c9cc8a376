use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LabeledOracle, OracleKey, QueryAccess};
use crate::error::{Error, Result};
use crate::expander::RegularGraph;
use crate::graph_model::{GraphParams, MainGraph, StandaloneTree, TreeSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyDescriptor {
    /// Main graph; the expander is read from an edge-list file, relative paths
    /// resolved against the descriptor's directory.
    Main {
        params: GraphParams,
        expander_file: PathBuf,
    },
    Tree {
        degrees: Vec<u64>,
        depths: Vec<u64>,
        level: usize,
    },
}

/// Everything needed to rebuild an oracle bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDescriptor {
    pub topology: TopologyDescriptor,
    pub label_bits: u32,
    pub key: OracleKey,
    pub padding_ratio: f64,
}

impl OracleDescriptor {
    pub fn for_main(oracle: &LabeledOracle<MainGraph>, expander_file: PathBuf) -> Self {
        Self {
            topology: TopologyDescriptor::Main {
                params: oracle.topology().params().clone(),
                expander_file,
            },
            label_bits: oracle.label_bits(),
            key: oracle.key(),
            padding_ratio: oracle.padding_ratio(),
        }
    }

    pub fn for_tree(oracle: &LabeledOracle<StandaloneTree>) -> Self {
        let tree = oracle.topology();
        Self {
            topology: TopologyDescriptor::Tree {
                degrees: tree.schedule().degrees().to_vec(),
                depths: tree.schedule().depths().to_vec(),
                level: tree.level(),
            },
            label_bits: oracle.label_bits(),
            key: oracle.key(),
            padding_ratio: oracle.padding_ratio(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build_tree(&self) -> Result<LabeledOracle<StandaloneTree>> {
        let TopologyDescriptor::Tree { degrees, depths, level } = &self.topology else {
            return Err(Error::InvalidParams("descriptor is not a standalone tree".into()));
        };
        let tree = StandaloneTree::new(TreeSchedule::new(degrees.clone(), depths.clone())?, *level)?;
        LabeledOracle::new(Arc::new(tree), self.key, self.padding_ratio, Some(self.label_bits))
    }

    /// Rebuilds a main-graph oracle; `base` anchors a relative expander path.
    pub fn build_main(&self, base: &Path) -> Result<LabeledOracle<MainGraph>> {
        let TopologyDescriptor::Main { params, expander_file } = &self.topology else {
            return Err(Error::InvalidParams("descriptor is not a main graph".into()));
        };
        let path = if expander_file.is_absolute() {
            expander_file.clone()
        } else {
            base.join(expander_file)
        };
        let expander = RegularGraph::load(&path)?;
        let graph = MainGraph::new(params.clone(), Arc::new(expander))?;
        LabeledOracle::new(Arc::new(graph), self.key, self.padding_ratio, Some(self.label_bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_descriptor_round_trips() {
        let tree = StandaloneTree::new(TreeSchedule::new(vec![3, 2], vec![1, 3]).unwrap(), 2).unwrap();
        let o = LabeledOracle::new(Arc::new(tree), OracleKey(42), 0.5, None).unwrap();
        let d = OracleDescriptor::for_tree(&o);
        let back = OracleDescriptor::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        let o2 = back.build_tree().unwrap();
        for x in 0..(1u64 << o.label_bits()) {
            assert_eq!(o.query(x).unwrap(), o2.query(x).unwrap());
        }
    }

    #[test]
    fn main_descriptor_reloads_expander_file() {
        let dir = std::env::temp_dir().join(format!("ggsp-desc-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = RegularGraph::petersen();
        g.save(&dir.join("petersen.txt")).unwrap();
        let params = GraphParams::scaled(vec![4, 3], vec![1, 2], 10, 5, 0.5).unwrap();
        let main = MainGraph::new(params, Arc::new(g)).unwrap();
        let o = LabeledOracle::new(Arc::new(main), OracleKey(1), 0.5, None).unwrap();
        let d = OracleDescriptor::for_main(&o, PathBuf::from("petersen.txt"));
        let o2 = d.build_main(&dir).unwrap();
        for x in 0..64 {
            assert_eq!(o.query(x).unwrap(), o2.query(x).unwrap());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
