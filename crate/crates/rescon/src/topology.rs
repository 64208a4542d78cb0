//! Communication graphs with a legitimate/malicious agent partition.
//!
//! Agents `0..legit` are legitimate, `legit..n` malicious. The generator draws
//! a random geometric graph on the unit square and resamples until the
//! subgraph induced by the legitimate agents is connected, which the
//! consensus analysis requires.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Attempts before giving up on drawing a connected legitimate subgraph.
pub const RGG_RETRY_BUDGET: u32 = 100;

/// Undirected communication graph, immutable after construction.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    n: usize,
    legit: usize,
    /// Sorted neighbor list per agent; symmetric, no self-loops.
    neighbors: Vec<Vec<usize>>,
    /// Generator coordinates, kept for reproducibility; absent on imports.
    positions: Option<Vec<(f64, f64)>>,
    seed: u64,
    radius: f64,
    resamples: u32,
}

impl NetworkTopology {
    /// Builds a topology from an explicit undirected edge set. Fails if an
    /// edge is out of range or a self-loop, or if the legitimate subgraph is
    /// disconnected.
    pub fn from_edges(n: usize, legit: usize, edges: &[(usize, usize)]) -> Result<Self> {
        validate_counts(n, legit)?;
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Config(format!("edge ({i}, {j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::Config(format!("self-loop on agent {i}")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let topo = Self { n, legit, neighbors, positions: None, seed: 0, radius: 0.0, resamples: 0 };
        if !topo.legit_subgraph_connected() {
            return Err(Error::Config("legitimate subgraph is disconnected".into()));
        }
        Ok(topo)
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn legit_count(&self) -> usize {
        self.legit
    }

    pub fn malicious_count(&self) -> usize {
        self.n - self.legit
    }

    pub fn is_legit(&self, agent: usize) -> bool {
        agent < self.legit
    }

    /// All neighbors of `agent`, ascending.
    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    /// Legitimate neighbors of `agent`, ascending.
    pub fn legit_neighbors(&self, agent: usize) -> &[usize] {
        let cut = self.neighbors[agent].partition_point(|&j| j < self.legit);
        &self.neighbors[agent][..cut]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// How many position draws were rejected before connectivity held.
    pub fn resamples(&self) -> u32 {
        self.resamples
    }

    /// Maximal neighborhood size over legitimate agents (`d_M` in the bound
    /// analysis); counts malicious neighbors too.
    pub fn max_legit_degree(&self) -> usize {
        (0..self.legit).map(|i| self.neighbors[i].len()).max().unwrap_or(0)
    }

    /// Breadth-first check that legitimate agents form one component under
    /// legitimate-to-legitimate edges.
    pub fn legit_subgraph_connected(&self) -> bool {
        if self.legit == 0 {
            return false;
        }
        let mut seen = vec![false; self.legit];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in self.legit_neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.legit
    }

    /// Writes the line-based edge-list format: one header line with the
    /// counts and generator parameters, then one `i j` pair per line (i < j).
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# topology n={} legit={} malicious={} seed={} radius={}",
            self.n,
            self.legit,
            self.malicious_count(),
            self.seed,
            self.radius
        )?;
        for i in 0..self.n {
            for &j in &self.neighbors[i] {
                if i < j {
                    writeln!(out, "{i} {j}")?;
                }
            }
        }
        Ok(())
    }

    /// Parses the format written by [`write_edge_list`](Self::write_edge_list).
    /// Positions are not part of the format and come back empty.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
                None => return Err(Error::Parse("empty topology file".into())),
            }
        };
        let header = header
            .strip_prefix("# topology")
            .ok_or_else(|| Error::Parse("missing '# topology' header".into()))?;
        let mut n = None;
        let mut legit = None;
        let mut seed = 0u64;
        let mut radius = 0.0f64;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field '{field}'")))?;
            match key {
                "n" => n = Some(parse_field(key, value)?),
                "legit" => legit = Some(parse_field(key, value)?),
                "malicious" => {} // redundant with n and legit
                "seed" => seed = parse_field(key, value)?,
                "radius" => radius = parse_field(key, value)?,
                other => return Err(Error::Parse(format!("unknown header field '{other}'"))),
            }
        }
        let n: usize = n.ok_or_else(|| Error::Parse("header missing n".into()))?;
        let legit: usize = legit.ok_or_else(|| Error::Parse("header missing legit".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("bad edge line '{line}'")));
            };
            edges.push((parse_field("edge", a)?, parse_field("edge", b)?));
        }
        let mut topo = Self::from_edges(n, legit, &edges)?;
        topo.seed = seed;
        topo.radius = radius;
        Ok(topo)
    }

    pub fn save_edge_list<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_edge_list(&mut out)?;
        Ok(out.flush()?)
    }

    pub fn load_edge_list<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_edge_list(BufReader::new(File::open(path)?))
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse(format!("bad value '{value}' for {key}")))
}

fn validate_counts(n: usize, legit: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 agents, got {n}")));
    }
    if legit == 0 || legit > n {
        return Err(Error::Config(format!("legit count {legit} out of range for n={n}")));
    }
    Ok(())
}

/// Draws a random geometric graph: `n` points uniform on the unit square,
/// an edge wherever the Euclidean distance is at most `radius`. Positions are
/// redrawn (up to [`RGG_RETRY_BUDGET`] times, from the same seeded stream)
/// until the legitimate subgraph is connected.
pub fn generate_rgg(n: usize, legit: usize, radius: f64, seed: u64) -> Result<NetworkTopology> {
    validate_counts(n, legit)?;
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::Config(format!("radius must be finite and nonnegative, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r2 = radius * radius;
    for attempt in 0..RGG_RETRY_BUDGET {
        let positions: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if dx * dx + dy * dy <= r2 {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
        let topo = NetworkTopology {
            n,
            legit,
            neighbors,
            positions: Some(positions),
            seed,
            radius,
            resamples: attempt,
        };
        if topo.legit_subgraph_connected() {
            return Ok(topo);
        }
    }
    Err(Error::Generation { seed, radius, retries: RGG_RETRY_BUDGET })
}
