use std::io::{Read, Write};
use std::path::Path;

use bandit_cpe_core::allocation::round_allocation;
use bandit_cpe_core::dks::{DksOracle, ExactDks, GreedyPeeling, WeightedGraph};
use bandit_cpe_core::model::{DecisionClass, SuperArm};

use crate::config::AllocationStrategy;
use crate::error::{HarnessError, Result};

/// A graph read from an `i,j,weight` edge list.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Parse an edge list. A first line that does not parse as an edge is
/// treated as a header; `n` is one more than the largest vertex index.
pub fn read_edge_list(reader: impl Read, name: &str) -> Result<EdgeList> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut edges = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(name, e))?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.len() != 3 {
            return Err(HarnessError::Data(format!(
                "{name}:{line}: expected 3 fields i,j,weight, found {}",
                rec.len()
            )));
        }
        let parsed = (
            rec[0].parse::<usize>(),
            rec[1].parse::<usize>(),
            rec[2].parse::<f64>(),
        );
        match parsed {
            (Ok(i), Ok(j), Ok(w)) => edges.push((i, j, w)),
            _ if idx == 0 => continue,
            _ => {
                return Err(HarnessError::Data(format!(
                    "{name}:{line}: cannot parse '{}'",
                    rec.iter().collect::<Vec<_>>().join(",")
                )))
            }
        }
    }
    let n = edges
        .iter()
        .map(|&(i, j, _)| i.max(j) + 1)
        .max()
        .unwrap_or(0);
    Ok(EdgeList { n, edges })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DksAnswer {
    pub subset: SuperArm,
    /// Total weight of edges inside `subset`.
    pub value: f64,
}

pub fn densest_subgraph(list: &EdgeList, k: usize, exact: bool) -> Result<DksAnswer> {
    if k == 0 || k > list.n {
        return Err(HarnessError::Config(format!(
            "k must lie in 1..={}, got {k}",
            list.n
        )));
    }
    let graph = WeightedGraph::from_edges(list.n, &list.edges)?;
    let subset = if exact {
        ExactDks::default().densest(&graph, k)?
    } else {
        GreedyPeeling.densest(&graph, k)?
    };
    let value = graph.subset_weight(subset.indices());
    Ok(DksAnswer { subset, value })
}

pub fn run_dks(path: &Path, k: usize, exact: bool, out: &mut impl Write) -> Result<DksAnswer> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let list = read_edge_list(file, &path.display().to_string())?;
    let ans = densest_subgraph(&list, k, exact)?;
    let emit = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "subset,value")?;
        writeln!(out, "{},{}", ans.subset.label(), ans.value)
    };
    emit(out).map_err(|e| HarnessError::io("<stdout>", e))?;
    Ok(ans)
}

/// Print an allocation as `super_arm,probability,count` rows, where counts
/// are the rounding of `p` to `t` pulls.
pub fn run_galloc(
    n: usize,
    k: usize,
    strategy: AllocationStrategy,
    t: u64,
    out: &mut impl Write,
) -> Result<()> {
    if k < 2 || k >= n {
        return Err(HarnessError::Config(format!(
            "need 2 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let dc = DecisionClass::top_k(n, k)?;
    let p = strategy.build(&dc, 0)?;
    if t < p.len() as u64 {
        return Err(HarnessError::Config(format!(
            "t = {t} is smaller than the support size {}",
            p.len()
        )));
    }
    let counts = round_allocation(&p, t)?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| HarnessError::csv("<stdout>", e);
    w.write_record(["super_arm", "probability", "count"])
        .map_err(io)?;
    for ((arm, prob), count) in p.support().iter().zip(p.probs()).zip(&counts) {
        w.write_record([arm.label(), prob.to_string(), count.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io("<stdout>", e))
}
