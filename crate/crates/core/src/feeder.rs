//! Distribution-feeder topology with sectionalizing switches.
//!
//! Opening switches islands the feeder; each connected piece of the graph
//! of lines and closed switches is a candidate microgrid.
//!
//! On disk a feeder is a directory of CSV files:
//!
//! * `nodes.csv`: `id`
//! * `edges.csv`: `from,to,kind,label` with `kind` either `line` or `switch`
//! * `switchstates.csv` (the `default` configuration) and
//!   `switchstates_<name>.csv`: `label,state` with `state` `open` or `closed`
//! * `houses.csv` (optional): `house_id,node_id`

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::unionfind::UnionFind;

/// Upper bound on switches for exhaustive enumeration.
pub const MAX_ENUMERATED_SWITCHES: usize = 24;

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("node {0} is listed twice")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("self-loop at node {0}")]
    SelfLoop(String),
    #[error("edge {0}-{1} is listed twice")]
    DuplicateEdge(String, String),
    #[error("switch label {0} is used twice")]
    DuplicateSwitch(String),
    #[error("unknown switch {0}")]
    UnknownSwitch(String),
    #[error("no state given for switch {0}")]
    MissingSwitch(String),
    #[error("house {0} is mapped twice")]
    DuplicateHouse(String),
    #[error("{0} switches exceed the enumeration bound of {MAX_ENUMERATED_SWITCHES}")]
    TooManySwitches(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    Open,
    Closed,
}

impl SwitchState {
    pub fn as_str(self) -> &'static str {
        match self {
            SwitchState::Open => "open",
            SwitchState::Closed => "closed",
        }
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SwitchState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(SwitchState::Open),
            "closed" => Ok(SwitchState::Closed),
            other => Err(format!("switch state must be open or closed, got {other:?}")),
        }
    }
}

/// Orders purely numeric ids numerically and before any other id; other
/// ids compare as strings.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Switch {
    pub label: String,
    pub a: usize,
    pub b: usize,
}

/// Feeder graph. Nodes are kept in natural id order and edges refer to
/// node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeederTopology {
    nodes: Vec<String>,
    lines: Vec<(usize, usize)>,
    switches: Vec<Switch>,
}

pub type SwitchStates = BTreeMap<String, SwitchState>;

impl FeederTopology {
    pub fn new<N, L, S>(nodes: N, lines: L, switches: S) -> Result<Self, FeederError>
    where
        N: IntoIterator<Item = String>,
        L: IntoIterator<Item = (String, String)>,
        S: IntoIterator<Item = (String, String, String)>,
    {
        let mut nodes: Vec<String> = nodes.into_iter().collect();
        nodes.sort_by(|a, b| natural_cmp(a, b));
        if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(FeederError::DuplicateNode(w[0].clone()));
        }
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut pairs = HashSet::new();
        let mut resolve = |a: &str, b: &str| -> Result<(usize, usize), FeederError> {
            let ia = *index.get(a).ok_or_else(|| FeederError::UnknownNode(a.to_string()))?;
            let ib = *index.get(b).ok_or_else(|| FeederError::UnknownNode(b.to_string()))?;
            if ia == ib {
                return Err(FeederError::SelfLoop(a.to_string()));
            }
            if !pairs.insert((ia.min(ib), ia.max(ib))) {
                return Err(FeederError::DuplicateEdge(a.to_string(), b.to_string()));
            }
            Ok((ia, ib))
        };
        let mut out_lines = Vec::new();
        for (a, b) in lines {
            out_lines.push(resolve(&a, &b)?);
        }
        let mut out_switches = Vec::new();
        let mut labels = BTreeSet::new();
        for (label, a, b) in switches {
            let (ia, ib) = resolve(&a, &b)?;
            if !labels.insert(label.clone()) {
                return Err(FeederError::DuplicateSwitch(label));
            }
            out_switches.push(Switch { label, a: ia, b: ib });
        }
        Ok(Self {
            nodes,
            lines: out_lines,
            switches: out_switches,
        })
    }

    /// Reads `nodes.csv` and `edges.csv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, FeederError> {
        let nodes_path = dir.join("nodes.csv");
        let nodes: Vec<String> = read_rows(&nodes_path, &["id"])?.into_iter().map(|mut r| r.remove(0)).collect();
        let edges_path = dir.join("edges.csv");
        let mut lines = Vec::new();
        let mut switches = Vec::new();
        for (i, r) in read_rows(&edges_path, &["from", "to", "kind", "label"])?.into_iter().enumerate() {
            let [from, to, kind, label]: [String; 4] = r.try_into().expect("row width checked");
            match kind.as_str() {
                "line" => lines.push((from, to)),
                "switch" => {
                    if label.is_empty() {
                        return Err(malformed(&edges_path, format!("row {}: switch without label", i + 2)));
                    }
                    switches.push((label, from, to));
                }
                other => {
                    return Err(malformed(&edges_path, format!("row {}: unknown edge kind {other:?}", i + 2)));
                }
            }
        }
        Self::new(nodes, lines, switches)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    /// Every switch set to `state`.
    pub fn uniform_states(&self, state: SwitchState) -> SwitchStates {
        self.switches.iter().map(|s| (s.label.clone(), state)).collect()
    }

    fn components(&self, closed: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(self.nodes.len());
        for &(a, b) in &self.lines {
            uf.union(a, b);
        }
        for (i, s) in self.switches.iter().enumerate() {
            if closed(i) {
                uf.union(s.a, s.b);
            }
        }
        uf.groups()
    }
}

fn malformed(path: &Path, message: String) -> FeederError {
    FeederError::Malformed {
        path: path.to_path_buf(),
        message,
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, FeederError> {
    let file = File::open(path).map_err(|source| FeederError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(malformed(path, format!("expected header {}, found {}", header.join(","), found.join(","))));
    }
    rdr.records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| malformed(path, e.to_string()))
        })
        .collect()
}

/// File holding the named switch configuration inside a feeder directory.
pub fn switch_config_path(dir: &Path, name: &str) -> PathBuf {
    if name == "default" {
        dir.join("switchstates.csv")
    } else {
        dir.join(format!("switchstates_{name}.csv"))
    }
}

pub fn read_switch_states(path: &Path) -> Result<SwitchStates, FeederError> {
    let mut out = SwitchStates::new();
    for (i, r) in read_rows(path, &["label", "state"])?.into_iter().enumerate() {
        let state = r[1].parse().map_err(|m| malformed(path, format!("row {}: {m}", i + 2)))?;
        if out.insert(r[0].clone(), state).is_some() {
            return Err(malformed(path, format!("row {}: switch {} listed twice", i + 2, r[0])));
        }
    }
    Ok(out)
}

pub fn load_switch_config(dir: &Path, name: &str) -> Result<SwitchStates, FeederError> {
    read_switch_states(&switch_config_path(dir, name))
}

/// Reads `houses.csv` into house id -> node id, checking that every node
/// exists in `topology`.
pub fn read_house_map(path: &Path, topology: &FeederTopology) -> Result<BTreeMap<String, String>, FeederError> {
    let mut out = BTreeMap::new();
    for r in read_rows(path, &["house_id", "node_id"])? {
        if topology.node_index(&r[1]).is_none() {
            return Err(FeederError::UnknownNode(r[1].clone()));
        }
        if out.insert(r[0].clone(), r[1].clone()).is_some() {
            return Err(FeederError::DuplicateHouse(r[0].clone()));
        }
    }
    Ok(out)
}

/// Connected pieces of the feeder for one switch-state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Node ids per block; blocks ordered by their smallest node, members in
    /// natural order.
    pub blocks: Vec<Vec<String>>,
    /// State of every switch, in topology order.
    pub provenance: Vec<(String, SwitchState)>,
}

impl Partition {
    /// Block labels `MG-1`, `MG-2`, ... in block order.
    pub fn label(index: usize) -> String {
        format!("MG-{}", index + 1)
    }

    pub fn block_of(&self, node: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.iter().any(|n| n == node))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Writes `block,node_id` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["block", "node_id"])?;
        for (i, b) in self.blocks.iter().enumerate() {
            for n in b {
                w.write_record([Self::label(i).as_str(), n])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn build_partition(topology: &FeederTopology, closed: &[bool]) -> Partition {
    let blocks = topology
        .components(|i| closed[i])
        .into_iter()
        .map(|g| g.into_iter().map(|i| topology.nodes[i].clone()).collect())
        .collect();
    let provenance = topology
        .switches
        .iter()
        .zip(closed)
        .map(|(s, &c)| (s.label.clone(), if c { SwitchState::Closed } else { SwitchState::Open }))
        .collect();
    Partition { blocks, provenance }
}

/// Connected components of lines plus closed switches.
pub fn partition(topology: &FeederTopology, states: &SwitchStates) -> Result<Partition, FeederError> {
    if let Some(label) = states.keys().find(|l| !topology.switches.iter().any(|s| &s.label == *l)) {
        return Err(FeederError::UnknownSwitch(label.clone()));
    }
    let closed = topology
        .switches
        .iter()
        .map(|s| match states.get(&s.label) {
            Some(st) => Ok(*st == SwitchState::Closed),
            None => Err(FeederError::MissingSwitch(s.label.clone())),
        })
        .collect::<Result<Vec<bool>, _>>()?;
    Ok(build_partition(topology, &closed))
}

/// Enumerates all 2^k switch-state vectors in lexicographic order (open
/// before closed, first switch most significant) and keeps the first
/// vector producing each distinct block structure, up to `max_results`.
pub fn enumerate_partitions(topology: &FeederTopology, max_results: usize) -> Result<Vec<Partition>, FeederError> {
    let k = topology.switches.len();
    if k > MAX_ENUMERATED_SWITCHES {
        return Err(FeederError::TooManySwitches(k));
    }
    let mut seen: HashSet<Vec<Vec<String>>> = HashSet::new();
    let mut out = Vec::new();
    let mut closed = vec![false; k];
    for v in 0u32..(1u32 << k) {
        if out.len() >= max_results {
            break;
        }
        for (i, c) in closed.iter_mut().enumerate() {
            *c = v >> (k - 1 - i) & 1 == 1;
        }
        let p = build_partition(topology, &closed);
        if seen.insert(p.blocks.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Yearly energy of one house, kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBalance {
    pub generation: f64,
    pub consumption: f64,
}

/// True when every block's attached houses generate at least `fraction`
/// of what they consume. Blocks without houses pass.
pub fn is_self_sufficient(
    partition: &Partition,
    house_nodes: &BTreeMap<String, String>,
    energy: &BTreeMap<String, EnergyBalance>,
    fraction: f64,
) -> bool {
    let mut per_block = vec![EnergyBalance::default(); partition.len()];
    for (house, node) in house_nodes {
        if let (Some(b), Some(e)) = (partition.block_of(node), energy.get(house)) {
            per_block[b].generation += e.generation;
            per_block[b].consumption += e.consumption;
        }
    }
    per_block.iter().all(|b| b.generation >= fraction * b.consumption)
}
