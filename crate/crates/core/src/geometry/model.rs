use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Edge-ID colour coding supports indices 0..=32766.
pub const MAX_EDGES: usize = 32_767;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

/// Triangulated object with the contour edges the tracker follows.
///
/// Edge `i` of [`WireframeModel::edges`] is the edge with Edge-ID index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WireframeModel {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
}

impl WireframeModel {
    /// Validates and builds a model. When `edges` is `None` they are derived
    /// from the faces as sorted unique undirected pairs.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        edges: Option<Vec<[usize; 2]>>,
    ) -> Result<Self, ModelError> {
        if vertices.is_empty() {
            return Err(ModelError::Invalid("model has no vertices".into()));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(ModelError::Invalid(format!(
                "face {f:?} references a missing vertex"
            )));
        }
        let edges = match edges {
            Some(e) => e,
            None => derive_edges(&faces),
        };
        let mut seen = HashSet::new();
        for e in &edges {
            if e[0] >= n || e[1] >= n {
                return Err(ModelError::Invalid(format!(
                    "edge {e:?} references a missing vertex"
                )));
            }
            if e[0] == e[1] || vertices[e[0]] == vertices[e[1]] {
                return Err(ModelError::Invalid(format!("edge {e:?} has zero length")));
            }
            if !seen.insert((e[0].min(e[1]), e[0].max(e[1]))) {
                return Err(ModelError::Invalid(format!("duplicate edge {e:?}")));
            }
        }
        if edges.len() > MAX_EDGES {
            return Err(ModelError::Invalid(format!(
                "{} edges exceed the Edge-ID capacity of {MAX_EDGES}",
                edges.len()
            )));
        }
        Ok(Self {
            vertices,
            faces,
            edges,
        })
    }

    /// Axis-aligned cube centred at the origin with its 12 contour edges.
    pub fn cube(side: f64) -> Self {
        let h = side / 2.0;
        let vertices = vec![
            [-h, -h, -h],
            [h, -h, -h],
            [h, h, -h],
            [-h, h, -h],
            [-h, -h, h],
            [h, -h, h],
            [h, h, h],
            [-h, h, h],
        ];
        // Outward-facing (counter-clockwise seen from outside).
        let faces = vec![
            [0, 3, 2],
            [0, 2, 1],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [3, 7, 6],
            [3, 6, 2],
            [0, 4, 7],
            [0, 7, 3],
            [1, 2, 6],
            [1, 6, 5],
        ];
        let edges = vec![
            [0, 1],
            [1, 2],
            [2, 3],
            [3, 0],
            [4, 5],
            [5, 6],
            [6, 7],
            [7, 4],
            [0, 4],
            [1, 5],
            [2, 6],
            [3, 7],
        ];
        Self::new(vertices, faces, Some(edges)).expect("cube is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut last_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let tag = tokens.next().unwrap_or_default();
            let args: Vec<&str> = tokens.collect();
            let index = |s: &str, count: usize| -> Result<usize, ModelError> {
                let i: usize = s
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad index `{s}`")))?;
                if i == 0 || i > count {
                    return Err(parse_err(
                        line_no,
                        format!("index {i} out of range 1..={count}"),
                    ));
                }
                Ok(i - 1)
            };
            let arity = |want: usize| {
                if args.len() == want {
                    Ok(())
                } else {
                    Err(parse_err(
                        line_no,
                        format!("`{tag}` expects {want} values, got {}", args.len()),
                    ))
                }
            };
            match tag {
                "v" => {
                    arity(3)?;
                    let mut p = [0.0; 3];
                    for (slot, s) in p.iter_mut().zip(&args) {
                        *slot = s
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| parse_err(line_no, format!("bad coordinate `{s}`")))?;
                    }
                    vertices.push(p);
                }
                "f" => {
                    arity(3)?;
                    let n = vertices.len();
                    faces.push([index(args[0], n)?, index(args[1], n)?, index(args[2], n)?]);
                }
                "e" => {
                    arity(2)?;
                    let n = vertices.len();
                    let (a, b) = (index(args[0], n)?, index(args[1], n)?);
                    if a == b {
                        return Err(parse_err(line_no, "edge has zero length"));
                    }
                    if edges
                        .iter()
                        .any(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
                    {
                        return Err(parse_err(line_no, "duplicate edge"));
                    }
                    if edges.len() == MAX_EDGES {
                        return Err(parse_err(line_no, format!("more than {MAX_EDGES} edges")));
                    }
                    edges.push([a, b]);
                }
                other => return Err(parse_err(line_no, format!("unknown record `{other}`"))),
            }
        }

        if vertices.is_empty() {
            return Err(parse_err(last_line.max(1), "model has no vertices"));
        }
        let explicit = if edges.is_empty() { None } else { Some(edges) };
        Self::new(vertices, faces, explicit).map_err(|e| match e {
            ModelError::Invalid(msg) => parse_err(last_line, msg),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes with explicit `e` lines so edge indices survive a round trip.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        for e in &self.edges {
            let _ = writeln!(out, "e {} {}", e[0] + 1, e[1] + 1);
        }
        out
    }

    /// Faces that contain both endpoints of edge `edge`.
    pub fn faces_of_edge(&self, edge: usize) -> impl Iterator<Item = usize> + '_ {
        let [a, b] = self.edges[edge];
        self.faces
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.contains(&a) && f.contains(&b))
            .map(|(i, _)| i)
    }
}

fn derive_edges(faces: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut pairs: Vec<[usize; 2]> = faces
        .iter()
        .flat_map(|f| [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]])
        .map(|[a, b]| [a.min(b), a.max(b)])
        .filter(|[a, b]| a != b)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}
