//! CSV and JSON file formats: edge lists (`src,dst`), long panels
//! (`node,t,y`), covariates (`node,u1..up`), baseline estimates (`node,fhat`)
//! and the simulation truth record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RgamError};
use crate::graphon::{BlockGrid, Network};
use crate::sim::{Covariates, PanelSeries};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<Vec<String>> {
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), header.join(",")),
        ));
    }
    Ok(header)
}

fn parse_err(line: usize, msg: impl Into<String>) -> RgamError {
    RgamError::Parse { line, msg: msg.into() }
}

fn records<'a, 'b>(rdr: &'a mut csv::Reader<&'b [u8]>) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + use<'a, 'b> {
    rdr.records().map(|rec| {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        Ok((line, rec))
    })
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: usize, name: &str) -> Result<T> {
    let raw = rec
        .get(k)
        .ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|_| parse_err(line, format!("cannot parse `{raw}` as {name}")))
}

fn real(rec: &csv::StringRecord, k: usize, line: usize, name: &str) -> Result<f64> {
    let v: f64 = field(rec, k, line, name)?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Undirected edges in file order. Self-loops and repeated pairs (either
/// orientation) are rejected with the offending line.
pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &["src", "dst"])?;
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let a: usize = field(&rec, 0, line, "src")?;
        let b: usize = field(&rec, 1, line, "dst")?;
        if a == b {
            return Err(parse_err(line, format!("self-loop at node {a}")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(parse_err(line, format!("duplicate edge ({a}, {b})")));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

/// Network on `n` nodes, or on `max id + 1` nodes when `n` is absent.
pub fn network_from_edges(edges: &[(usize, usize)], n: Option<usize>) -> Result<Network> {
    let needed = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = match n {
        Some(n) if n < needed => {
            return Err(RgamError::NodeMismatch(format!(
                "edge list references node {} but only {n} nodes are known",
                needed - 1
            )))
        }
        Some(n) => n,
        None => needed,
    };
    Network::from_edges(n, edges)
}

pub fn format_edges(net: &Network) -> String {
    let mut out = String::from("src,dst\n");
    for (a, b) in net.edges() {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

/// Long panel. Node ids must be `0..N` and times `0..=T`, each pair exactly once.
pub fn parse_panel(text: &str) -> Result<PanelSeries> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &["node", "t", "y"])?;
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let (mut max_node, mut max_t) = (0usize, 0usize);
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        let node: usize = field(&rec, 0, line, "node")?;
        let t: usize = field(&rec, 1, line, "t")?;
        let y = real(&rec, 2, line, "y")?;
        if cells.insert((node, t), y).is_some() {
            return Err(parse_err(line, format!("duplicate entry for node {node} at t = {t}")));
        }
        max_node = max_node.max(node);
        max_t = max_t.max(t);
    }
    if cells.is_empty() {
        return Err(parse_err(1, "panel has no rows"));
    }
    let n = max_node + 1;
    let mut data = Vec::with_capacity(n * (max_t + 1));
    for t in 0..=max_t {
        for i in 0..n {
            match cells.get(&(i, t)) {
                Some(v) => data.push(*v),
                None => {
                    return Err(RgamError::NodeMismatch(format!(
                        "panel has no value for node {i} at t = {t}"
                    )))
                }
            }
        }
    }
    PanelSeries::new(n, max_t, data)
}

pub fn format_panel(y: &PanelSeries) -> String {
    let mut out = String::from("node,t,y\n");
    for i in 0..y.n() {
        for t in 0..=y.t_len() {
            let _ = writeln!(out, "{i},{t},{}", y.get(i, t));
        }
    }
    out
}

/// Covariate table `node,u1,..,up`; every node `0..n` must appear once.
pub fn parse_covariates(text: &str, n: usize) -> Result<Covariates> {
    let mut rdr = reader(text);
    let header = check_header(&mut rdr, &["node"])?;
    let p = header.len() - 1;
    for (k, h) in header.iter().enumerate().skip(1) {
        if *h != format!("u{k}") {
            return Err(parse_err(1, format!("covariate column {k} should be named `u{k}`, found `{h}`")));
        }
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        let node: usize = field(&rec, 0, line, "node")?;
        if node >= n {
            return Err(RgamError::NodeMismatch(format!(
                "covariates list node {node} but the panel has {n} nodes"
            )));
        }
        if rec.len() != p + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", p + 1, rec.len())));
        }
        let vals = (1..=p)
            .map(|k| real(&rec, k, line, &format!("u{k}")))
            .collect::<Result<Vec<_>>>()?;
        if rows[node].replace(vals).is_some() {
            return Err(parse_err(line, format!("duplicate covariates for node {node}")));
        }
    }
    let mut data = Vec::with_capacity(n * p);
    for (i, r) in rows.into_iter().enumerate() {
        data.extend(r.ok_or_else(|| RgamError::NodeMismatch(format!("covariates missing node {i}")))?);
    }
    Covariates::new(n, p, data)
}

pub fn format_covariates(u: &Covariates) -> String {
    let mut out = String::from("node");
    for k in 1..=u.p() {
        let _ = write!(out, ",u{k}");
    }
    out.push('\n');
    for i in 0..u.n() {
        let _ = write!(out, "{i}");
        for v in u.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn format_fhat(labels: &[usize], fhat: &[f64]) -> String {
    let mut out = String::from("node,fhat\n");
    for (l, f) in labels.iter().zip(fhat) {
        let _ = writeln!(out, "{l},{f}");
    }
    out
}

/// Ground truth for one simulated draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub setting: String,
    pub seed: u64,
    pub n: usize,
    pub t_len: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub sigma: f64,
    /// Latent part `f(C_i)`.
    pub f: Vec<f64>,
    /// Full baseline `f(C_i) + gamma' U_i`.
    pub fvals: Vec<f64>,
    pub c_raw: Vec<f64>,
    /// Nodes dropped as isolated before simulating (original ids).
    pub trimmed: Vec<usize>,
}

/// JSON block-graphon file `{"breakpoints": [...], "values": [[...]]}`.
pub fn parse_grid(text: &str) -> Result<BlockGrid> {
    let grid: BlockGrid = serde_json::from_str(text)?;
    grid.validate()?;
    Ok(grid)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        RgamError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        RgamError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}
