//! On-disk formats: model files, dataset CSVs, frontier grids, and training
//! logs. Exact layouts are documented in FORMATS.md at the repository root.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! parses back to bit-identical values.

use crate::error::{CliError, Result};
use rdt_core::data::{Dataset, FrontierGrid, GridBounds, LabeledExample, Split};
use rdt_core::model::{NodeParams, RdtModel, ThetaBlock};
use rdt_core::train::TrainLog;
use rdt_core::tree::TreeTopology;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MODEL_MAGIC: &str = "rdt-model v1";
pub const REPORT_MAGIC: &str = "rdt-report v1";

fn malformed(path: &Path, line: usize, what: &str) -> CliError {
    CliError::Runtime(format!("malformed file {}:{line}: {what}", path.display()))
}

/// Writes `content` to `path` via a temporary file and rename, so readers
/// never observe a half-written file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, content).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Model file

pub fn model_to_string(model: &RdtModel) -> String {
    let topo = model.topology();
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "width {}", topo.width());
    let _ = writeln!(out, "depth {}", topo.depth());
    let _ = writeln!(out, "input_dim {}", model.input_dim());
    let _ = writeln!(out, "num_classes {}", model.num_classes());
    let _ = writeln!(out, "alpha_frozen {}", model.alpha_frozen());
    for node in 0..topo.node_count() {
        match model.node_params(node).expect("node id in range") {
            NodeParams::Internal(block) => {
                let _ = writeln!(out, "theta {node}");
                for child in 0..block.num_children() {
                    let _ = write!(out, "{child}");
                    for w in block.weight_row(child) {
                        let _ = write!(out, " {w}");
                    }
                    let _ = writeln!(out, " {}", block.bias(child));
                }
            }
            NodeParams::Leaf(alpha) => {
                let _ = write!(out, "alpha {node}");
                for a in alpha {
                    let _ = write!(out, " {a}");
                }
                let _ = writeln!(out);
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn save_model(model: &RdtModel, path: &Path) -> Result<()> {
    write_atomic(path, &model_to_string(model))
}

pub fn load_model(path: &Path) -> Result<RdtModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    model_from_str(&text, path)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line_no: usize,
    line: &str,
    key: &str,
) -> Result<T> {
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| malformed(path, line_no, &format!("expected field `{key}`")))?;
    rest.trim()
        .parse()
        .map_err(|_| malformed(path, line_no, &format!("invalid value for field `{key}`")))
}

pub fn model_from_str(text: &str, path: &Path) -> Result<RdtModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = || {
        lines
            .next()
            .ok_or_else(|| malformed(path, 0, "file truncated (missing `end`)"))
    };

    let (n, magic) = next_line()?;
    if magic.trim() != MODEL_MAGIC {
        return Err(malformed(path, n, &format!("expected header `{MODEL_MAGIC}`")));
    }
    let (n, l) = next_line()?;
    let width: usize = parse_field(path, n, l, "width")?;
    let (n, l) = next_line()?;
    let depth: usize = parse_field(path, n, l, "depth")?;
    let (n, l) = next_line()?;
    let input_dim: usize = parse_field(path, n, l, "input_dim")?;
    let (n, l) = next_line()?;
    let num_classes: usize = parse_field(path, n, l, "num_classes")?;
    let (n, l) = next_line()?;
    let alpha_frozen: bool = parse_field(path, n, l, "alpha_frozen")?;

    let topology = TreeTopology::complete(width, depth)
        .map_err(|e| malformed(path, n, &format!("topology: {e}")))?;
    let node_count = topology.node_count();
    let mut params: Vec<Option<NodeParams>> = vec![None; node_count];

    loop {
        let (n, line) = next_line()?;
        let line = line.trim();
        if line == "end" {
            break;
        }
        if let Some(rest) = line.strip_prefix("theta ") {
            let node: usize = rest
                .trim()
                .parse()
                .map_err(|_| malformed(path, n, "invalid node id after `theta`"))?;
            if node >= node_count || topology.is_leaf(node) {
                return Err(malformed(path, n, &format!("node {node} is not an internal node")));
            }
            let children = topology.children(node).expect("internal node").len();
            let mut block = ThetaBlock::zeros(children, input_dim);
            for expect_child in 0..children {
                let (cn, cl) = next_line()?;
                let mut fields = cl.split_whitespace();
                let child: usize = fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| malformed(path, cn, "expected child index"))?;
                if child != expect_child {
                    return Err(malformed(
                        path,
                        cn,
                        &format!("expected child {expect_child} of theta block {node}"),
                    ));
                }
                let values: Vec<f64> = fields
                    .map(|f| f.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| malformed(path, cn, "invalid theta value"))?;
                if values.len() != input_dim + 1 {
                    return Err(malformed(
                        path,
                        cn,
                        &format!("theta row needs {} values, got {}", input_dim + 1, values.len()),
                    ));
                }
                block.weight_row_mut(child).copy_from_slice(&values[..input_dim]);
                *block.bias_mut(child) = values[input_dim];
            }
            params[node] = Some(NodeParams::Internal(block));
        } else if let Some(rest) = line.strip_prefix("alpha ") {
            let mut fields = rest.split_whitespace();
            let node: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| malformed(path, n, "expected leaf id after `alpha`"))?;
            if node >= node_count || !topology.is_leaf(node) {
                return Err(malformed(path, n, &format!("node {node} is not a leaf")));
            }
            let values: Vec<f64> = fields
                .map(|f| f.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| malformed(path, n, "invalid alpha value"))?;
            if values.len() != num_classes {
                return Err(malformed(
                    path,
                    n,
                    &format!("alpha needs {num_classes} values, got {}", values.len()),
                ));
            }
            params[node] = Some(NodeParams::Leaf(values));
        } else {
            return Err(malformed(path, n, &format!("unexpected line {line:?}")));
        }
    }

    let mut full = Vec::with_capacity(node_count);
    for (node, p) in params.into_iter().enumerate() {
        match p {
            Some(p) => full.push(p),
            None => {
                let kind = if topology.is_leaf(node) { "alpha" } else { "theta" };
                return Err(malformed(
                    path,
                    0,
                    &format!("missing `{kind}` entry for node {node}"),
                ));
            }
        }
    }
    RdtModel::from_parts(topology, input_dim, num_classes, full, alpha_frozen)
        .map_err(|e| CliError::Runtime(format!("model file {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Dataset CSV

pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{},{},{}",
        dataset.num_classes,
        dataset.input_dim,
        dataset.split.as_str()
    );
    for ex in &dataset.examples {
        for v in &ex.x {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ex.class);
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, &dataset_to_string(dataset))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    dataset_from_str(&text, path)
}

pub fn dataset_from_str(text: &str, path: &Path) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, header) = lines
        .next()
        .ok_or_else(|| malformed(path, 1, "empty file, expected `C,n,split` header"))?;
    let fields: Vec<&str> = header.split(',').collect();
    let header_err =
        || malformed(path, n, "missing or malformed header (expected `C,n,split`)");
    if fields.len() != 3 {
        return Err(header_err());
    }
    let num_classes: usize = fields[0].trim().parse().map_err(|_| header_err())?;
    let input_dim: usize = fields[1].trim().parse().map_err(|_| header_err())?;
    let split: Split = fields[2].trim().parse().map_err(|_| header_err())?;

    let mut examples = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != input_dim + 1 {
            return Err(malformed(
                path,
                n,
                &format!("expected {} comma-separated fields", input_dim + 1),
            ));
        }
        let x: Vec<f64> = fields[..input_dim]
            .iter()
            .map(|f| f.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed(path, n, "invalid coordinate"))?;
        let class: usize = fields[input_dim]
            .trim()
            .parse()
            .map_err(|_| malformed(path, n, "invalid class index"))?;
        if class >= num_classes {
            return Err(malformed(
                path,
                n,
                &format!("class index {class} out of range for {num_classes} classes"),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(malformed(path, n, "non-finite coordinate"));
        }
        examples.push(LabeledExample { x, class });
    }
    Dataset::new(examples, num_classes, input_dim, split)
        .map_err(|e| CliError::Runtime(format!("dataset file {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Frontier grid CSV

pub fn frontier_to_string(grid: &FrontierGrid) -> String {
    let b = grid.bounds;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        b.x0_min, b.x0_max, b.x1_min, b.x1_max, grid.resolution
    );
    for (x0, x1, class) in grid.rows() {
        let _ = writeln!(out, "{x0},{x1},{class}");
    }
    out
}

pub fn save_frontier(grid: &FrontierGrid, path: &Path) -> Result<()> {
    write_atomic(path, &frontier_to_string(grid))
}

pub fn load_frontier(path: &Path) -> Result<FrontierGrid> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, header) = lines.next().ok_or_else(|| malformed(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 5 {
        return Err(malformed(path, n, "expected bounds/resolution header with 5 fields"));
    }
    let nums: Vec<f64> = fields[..4]
        .iter()
        .map(|f| f.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| malformed(path, n, "invalid bound"))?;
    let resolution: usize = fields[4]
        .trim()
        .parse()
        .map_err(|_| malformed(path, n, "invalid resolution"))?;
    let bounds = GridBounds::new(nums[0], nums[1], nums[2], nums[3])
        .map_err(|e| malformed(path, n, &e.to_string()))?;
    let mut classes = Vec::with_capacity(resolution * resolution);
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let class = line
            .rsplit(',')
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| malformed(path, n, "invalid grid row"))?;
        classes.push(class);
    }
    if classes.len() != resolution * resolution {
        return Err(malformed(
            path,
            0,
            &format!("expected {} grid rows, got {}", resolution * resolution, classes.len()),
        ));
    }
    Ok(FrontierGrid { bounds, resolution, classes })
}

// ---------------------------------------------------------------------------
// Training log CSV

pub fn trainlog_to_string(log: &TrainLog) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
    for (i, loss) in log.train_loss.iter().enumerate() {
        let train_acc = log
            .train_acc
            .get(i)
            .map(|a| a.to_string())
            .unwrap_or_default();
        let test_acc = log
            .test_acc
            .get(i)
            .map(|a| a.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{},{loss},{train_acc},{test_acc}", i + 1);
    }
    out
}

pub fn save_trainlog(log: &TrainLog, path: &Path) -> Result<()> {
    write_atomic(path, &trainlog_to_string(log))
}
