//! Input documents: groups, triangles of groups, algebras, triangles of
//! algebras, and Fock moment requests, all as JSON with file references
//! resolved relative to the referencing document.

use crate::algebra::{SparseVec, StarAlgebra, StarMorphism};
use crate::expect::{conjugated_units, Side};
use crate::group::FiniteGroup;
use crate::rewrite::{AlgebraCore, AlgebraEdge, AlgebraTriangle};
use crate::scalar::{parse_rational, Scalar};
use crate::triangle::{GroupTriangle, TriangleCore, TriangleEdge};
use serde_json::Value;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Group(#[from] crate::group::GroupError),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
    #[error(transparent)]
    Triangle(#[from] crate::triangle::TriangleError),
    #[error(transparent)]
    Rewrite(#[from] crate::rewrite::RewriteError),
}

fn schema(msg: impl Into<String>) -> DocError {
    DocError::Schema(msg.into())
}

/// Reads a JSON document from disk.
pub fn read_json(path: &Path) -> Result<Value, DocError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DocError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|source| DocError::Json { path: path.display().to_string(), source })
}

/// Resolves a value that is either inline or a path string relative to `dir`.
fn resolve<'v>(v: &'v Value, dir: &Path) -> Result<(Value, PathBuf), DocError> {
    match v {
        Value::String(s) => {
            let path = dir.join(s);
            let doc = read_json(&path)?;
            let parent = path.parent().unwrap_or(dir).to_path_buf();
            Ok((doc, parent))
        }
        other => Ok((other.clone(), dir.to_path_buf())),
    }
}

fn as_usize(v: &Value, what: &str) -> Result<usize, DocError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(format!("{what} must be an integer")))
}

fn as_index_row(v: &Value, what: &str) -> Result<Vec<usize>, DocError> {
    v.as_array()
        .ok_or_else(|| schema(format!("{what} must be an array")))?
        .iter()
        .map(|x| as_usize(x, what))
        .collect()
}

/// Parses a scalar: integer, `"p/q"` string, or `[re, im]` pair.
pub fn parse_scalar(v: &Value) -> Result<Scalar, DocError> {
    match v {
        Value::Number(n) => {
            let i = n.as_i64().ok_or_else(|| schema("scalar must be an exact integer"))?;
            Ok(Scalar::from_int(i))
        }
        Value::String(s) => {
            Ok(Scalar::from_rational(parse_rational(s).map_err(schema)?))
        }
        Value::Array(pair) if pair.len() == 2 => {
            let re = parse_scalar(&pair[0])?;
            let im = parse_scalar(&pair[1])?;
            Ok(Scalar { re: re.re, im: im.re })
        }
        _ => Err(schema("scalar must be an integer, \"p/q\", or [re, im]")),
    }
}

fn parse_scalar_vec(v: &Value, what: &str) -> Result<Vec<Scalar>, DocError> {
    v.as_array()
        .ok_or_else(|| schema(format!("{what} must be an array")))?
        .iter()
        .map(parse_scalar)
        .collect()
}

/// Group document: `{order, mul, labels?}` or `{permutation_generators}`.
pub fn group_from_value(v: &Value, dir: &Path) -> Result<FiniteGroup, DocError> {
    let (doc, _) = resolve(v, dir)?;
    let obj = doc.as_object().ok_or_else(|| schema("group document must be an object"))?;
    if let Some(gens) = obj.get("permutation_generators") {
        let rows: Result<Vec<Vec<usize>>, _> = gens
            .as_array()
            .ok_or_else(|| schema("permutation_generators must be an array"))?
            .iter()
            .map(|r| as_index_row(r, "permutation"))
            .collect();
        return Ok(FiniteGroup::from_permutation_generators(&rows?)?);
    }
    let mul = obj.get("mul").ok_or_else(|| schema("group document needs mul or permutation_generators"))?;
    let rows: Result<Vec<Vec<usize>>, _> = mul
        .as_array()
        .ok_or_else(|| schema("mul must be an array of rows"))?
        .iter()
        .map(|r| as_index_row(r, "mul row"))
        .collect();
    let mut g = FiniteGroup::from_table(rows?)?;
    if let Some(order) = obj.get("order") {
        if as_usize(order, "order")? != g.order() {
            return Err(schema("declared order does not match the table"));
        }
    }
    if let Some(labels) = obj.get("labels") {
        let ls: Result<Vec<String>, _> = labels
            .as_array()
            .ok_or_else(|| schema("labels must be an array"))?
            .iter()
            .map(|l| {
                l.as_str().map(String::from).ok_or_else(|| schema("labels must be strings"))
            })
            .collect();
        let ls = ls?;
        if ls.len() != g.order() {
            return Err(schema("label count does not match the order"));
        }
        g = g.with_labels(ls);
    }
    Ok(g)
}

/// Triangle document: vertex references, edge blocks, core block.
pub fn triangle_from_path(path: &Path) -> Result<GroupTriangle, DocError> {
    let doc = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    triangle_from_value(&doc, &dir)
}

pub fn triangle_from_value(doc: &Value, dir: &Path) -> Result<GroupTriangle, DocError> {
    let obj = doc.as_object().ok_or_else(|| schema("triangle document must be an object"))?;
    let vs = obj
        .get("vertices")
        .and_then(|v| v.as_array())
        .ok_or_else(|| schema("triangle needs a vertices array"))?;
    if vs.len() != 3 {
        return Err(schema("triangle needs exactly 3 vertices"));
    }
    let vertices: Result<Vec<FiniteGroup>, _> = vs.iter().map(|v| group_from_value(v, dir)).collect();
    let vertices = vertices?;
    let edges_obj = obj
        .get("edges")
        .and_then(|v| v.as_object())
        .ok_or_else(|| schema("triangle needs an edges object"))?;
    let mut edges = Vec::new();
    for key in ["12", "13", "23"] {
        let e = edges_obj
            .get(key)
            .and_then(|v| v.as_object())
            .ok_or_else(|| schema(format!("triangle needs edge {key}")))?;
        let group = group_from_value(
            e.get("group").ok_or_else(|| schema(format!("edge {key} needs a group")))?,
            dir,
        )?;
        edges.push(TriangleEdge {
            group,
            into_a: as_index_row(
                e.get("into_a").ok_or_else(|| schema(format!("edge {key} needs into_a")))?,
                "into_a",
            )?,
            into_b: as_index_row(
                e.get("into_b").ok_or_else(|| schema(format!("edge {key} needs into_b")))?,
                "into_b",
            )?,
        });
    }
    let core_obj = obj
        .get("core")
        .and_then(|v| v.as_object())
        .ok_or_else(|| schema("triangle needs a core block"))?;
    let core_group = group_from_value(
        core_obj.get("group").ok_or_else(|| schema("core needs a group"))?,
        dir,
    )?;
    let mut into_edges = Vec::new();
    for key in ["into_12", "into_13", "into_23"] {
        into_edges.push(as_index_row(
            core_obj.get(key).ok_or_else(|| schema(format!("core needs {key}")))?,
            key,
        )?);
    }
    Ok(GroupTriangle::new(
        [vertices[0].clone(), vertices[1].clone(), vertices[2].clone()],
        [edges[0].clone(), edges[1].clone(), edges[2].clone()],
        TriangleCore {
            group: core_group,
            into_edges: [into_edges[0].clone(), into_edges[1].clone(), into_edges[2].clone()],
        },
    )?)
}

/// Angle request: a group with two subgroup generator sets and a core set.
pub struct AngleRequest {
    pub group: FiniteGroup,
    pub h1: Vec<usize>,
    pub h2: Vec<usize>,
    pub core: Vec<usize>,
}

pub fn angle_request_from_path(path: &Path) -> Result<AngleRequest, DocError> {
    let doc = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let obj = doc.as_object().ok_or_else(|| schema("angle request must be an object"))?;
    let group = group_from_value(
        obj.get("group").ok_or_else(|| schema("angle request needs a group"))?,
        &dir,
    )?;
    let grab = |key: &str| -> Result<Vec<usize>, DocError> {
        as_index_row(
            obj.get(key).ok_or_else(|| schema(format!("angle request needs {key}")))?,
            key,
        )
    };
    Ok(AngleRequest { group, h1: grab("h1")?, h2: grab("h2")?, core: grab("core")? })
}

/// Algebra document: `{matrix: n}`, `{tensor: [..]}`, `{group_algebra: ref}`,
/// or explicit structure constants.
pub fn algebra_from_value(v: &Value, dir: &Path) -> Result<StarAlgebra, DocError> {
    let (doc, dir) = resolve(v, dir)?;
    let obj = doc.as_object().ok_or_else(|| schema("algebra document must be an object"))?;
    if let Some(n) = obj.get("matrix") {
        return Ok(StarAlgebra::matrix_algebra(as_usize(n, "matrix")?));
    }
    if let Some(parts) = obj.get("tensor") {
        let arr = parts.as_array().ok_or_else(|| schema("tensor must be an array"))?;
        if arr.is_empty() {
            return Err(schema("tensor needs at least one factor"));
        }
        let mut alg = algebra_from_value(&arr[0], &dir)?;
        for p in &arr[1..] {
            alg = StarAlgebra::tensor(&alg, &algebra_from_value(p, &dir)?);
        }
        return Ok(alg);
    }
    if let Some(g) = obj.get("group_algebra") {
        return Ok(StarAlgebra::group_algebra(&group_from_value(g, &dir)?));
    }
    let dim = as_usize(obj.get("dim").ok_or_else(|| schema("algebra needs dim"))?, "dim")?;
    let labels: Vec<String> = match obj.get("labels") {
        Some(ls) => ls
            .as_array()
            .ok_or_else(|| schema("labels must be an array"))?
            .iter()
            .map(|l| l.as_str().map(String::from).ok_or_else(|| schema("labels must be strings")))
            .collect::<Result<_, _>>()?,
        None => (0..dim).map(|i| format!("b{i}")).collect(),
    };
    if labels.len() != dim {
        return Err(schema("label count must equal dim"));
    }
    let mut structure = vec![SparseVec::new(); dim * dim];
    for entry in obj
        .get("structure")
        .and_then(|v| v.as_array())
        .ok_or_else(|| schema("algebra needs a structure array"))?
    {
        let row = entry.as_array().ok_or_else(|| schema("structure entries are [i,j,k,re,im]"))?;
        if row.len() != 5 {
            return Err(schema("structure entries are [i,j,k,re,im]"));
        }
        let (i, j, k) =
            (as_usize(&row[0], "i")?, as_usize(&row[1], "j")?, as_usize(&row[2], "k")?);
        if i >= dim || j >= dim || k >= dim {
            return Err(schema("structure index out of range"));
        }
        let re = parse_rational(row[3].as_str().unwrap_or(&row[3].to_string())).map_err(schema)?;
        let im = parse_rational(row[4].as_str().unwrap_or(&row[4].to_string())).map_err(schema)?;
        crate::algebra::sparse_insert(&mut structure[i * dim + j], k, &Scalar { re, im });
    }
    let mut star = vec![SparseVec::new(); dim];
    for entry in obj
        .get("star")
        .and_then(|v| v.as_array())
        .ok_or_else(|| schema("algebra needs a star array"))?
    {
        let row = entry.as_array().ok_or_else(|| schema("star entries are [i,j,re,im]"))?;
        if row.len() != 4 {
            return Err(schema("star entries are [i,j,re,im]"));
        }
        let (i, j) = (as_usize(&row[0], "i")?, as_usize(&row[1], "j")?);
        let re = parse_rational(row[2].as_str().unwrap_or(&row[2].to_string())).map_err(schema)?;
        let im = parse_rational(row[3].as_str().unwrap_or(&row[3].to_string())).map_err(schema)?;
        crate::algebra::sparse_insert(&mut star[i], j, &Scalar { re, im });
    }
    let unit = parse_scalar_vec(
        obj.get("unit").ok_or_else(|| schema("algebra needs a unit vector"))?,
        "unit",
    )?;
    Ok(StarAlgebra::new(labels, structure, unit, star, None)?)
}

/// A unitary: `{permutation: [...]}` or `{matrix: [[..]]}` (dense entries).
pub fn unitary_from_value(alg: &StarAlgebra, v: &Value) -> Result<Vec<Scalar>, DocError> {
    let obj = v.as_object().ok_or_else(|| schema("unitary must be an object"))?;
    if let Some(p) = obj.get("permutation") {
        let perm = as_index_row(p, "permutation")?;
        return Ok(alg.permutation_matrix(&perm)?);
    }
    if let Some(m) = obj.get("matrix") {
        let rows: Result<Vec<Vec<Scalar>>, _> = m
            .as_array()
            .ok_or_else(|| schema("matrix must be an array of rows"))?
            .iter()
            .map(|r| parse_scalar_vec(r, "matrix row"))
            .collect();
        return Ok(alg.from_dense_matrix(&rows?)?);
    }
    Err(schema("unitary needs a permutation or matrix"))
}

/// An embedding of an edge algebra into a vertex: explicit images or a
/// shorthand for conjugated matrix units / tensor slots / the unit map.
pub fn embedding_from_value(
    source: &StarAlgebra,
    target: &StarAlgebra,
    v: &Value,
) -> Result<StarMorphism, DocError> {
    let obj = v.as_object().ok_or_else(|| schema("embedding must be an object"))?;
    if let Some(images) = obj.get("images") {
        let rows: Result<Vec<Vec<Scalar>>, _> = images
            .as_array()
            .ok_or_else(|| schema("images must be an array"))?
            .iter()
            .map(|r| parse_scalar_vec(r, "image"))
            .collect();
        return Ok(StarMorphism::new(source, target, rows?)?);
    }
    if let Some(spec) = obj.get("matrix_units_conjugated") {
        let sobj = spec.as_object().ok_or_else(|| schema("matrix_units_conjugated must be an object"))?;
        let w = unitary_from_value(
            target,
            sobj.get("unitary").ok_or_else(|| schema("conjugation needs a unitary"))?,
        )?;
        let side = match sobj.get("side").and_then(|s| s.as_str()) {
            Some("left") | None => Side::Left,
            Some("right") => Side::Right,
            _ => return Err(schema("side must be \"left\" or \"right\"")),
        };
        let images = conjugated_units(target, &w, side)?;
        return Ok(StarMorphism::new(source, target, images)?);
    }
    if let Some(slot) = obj.get("tensor_slot") {
        let slot = as_usize(slot, "tensor_slot")?;
        let (n, k) = target.tensor_info().ok_or_else(|| schema("tensor_slot needs a tensor target"))?;
        let side_dim = if slot == 0 { n } else { k };
        if source.dim() != side_dim * side_dim {
            return Err(schema("tensor_slot source dimension mismatch"));
        }
        let mut images = Vec::new();
        for i in 0..side_dim {
            for j in 0..side_dim {
                let mut img = vec![Scalar::zero(); target.dim()];
                let other = if slot == 0 { k } else { n };
                for p in 0..other {
                    let idx = if slot == 0 {
                        ((i * n + j) * k + p) * k + p
                    } else {
                        ((p * n + p) * k + i) * k + j
                    };
                    img[idx] = Scalar::one();
                }
                images.push(img);
            }
        }
        return Ok(StarMorphism::new(source, target, images)?);
    }
    if obj.get("unit").is_some() {
        if source.dim() != 1 {
            return Err(schema("unit embedding needs a one-dimensional source"));
        }
        return Ok(StarMorphism::new(source, target, vec![target.unit().to_vec()])?);
    }
    if let Some(map) = obj.get("group_map") {
        let map = as_index_row(map, "group_map")?;
        let images: Vec<Vec<Scalar>> = map
            .iter()
            .map(|&g| {
                let mut x = vec![Scalar::zero(); target.dim()];
                x[g] = Scalar::one();
                x
            })
            .collect();
        return Ok(StarMorphism::new(source, target, images)?);
    }
    Err(schema("embedding needs images or a recognized shorthand"))
}

/// Algebra triangle document with an optional family order.
pub fn algebra_triangle_from_path(
    path: &Path,
) -> Result<(AlgebraTriangle, [usize; 3]), DocError> {
    let doc = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let obj = doc.as_object().ok_or_else(|| schema("algebra triangle must be an object"))?;
    let vs = obj
        .get("vertices")
        .and_then(|v| v.as_array())
        .ok_or_else(|| schema("triangle needs a vertices array"))?;
    if vs.len() != 3 {
        return Err(schema("triangle needs exactly 3 vertices"));
    }
    let vertices: Result<Vec<StarAlgebra>, _> =
        vs.iter().map(|v| algebra_from_value(v, &dir)).collect();
    let vertices = vertices?;
    let edges_obj = obj
        .get("edges")
        .and_then(|v| v.as_object())
        .ok_or_else(|| schema("triangle needs an edges object"))?;
    let ends = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut edges = Vec::new();
    for (idx, key) in ["12", "13", "23"].iter().enumerate() {
        let e = edges_obj
            .get(*key)
            .and_then(|v| v.as_object())
            .ok_or_else(|| schema(format!("triangle needs edge {key}")))?;
        let algebra = algebra_from_value(
            e.get("algebra").ok_or_else(|| schema(format!("edge {key} needs an algebra")))?,
            &dir,
        )?;
        let (a, b) = ends[idx];
        let into_a = embedding_from_value(
            &algebra,
            &vertices[a],
            e.get("into_a").ok_or_else(|| schema(format!("edge {key} needs into_a")))?,
        )?;
        let into_b = embedding_from_value(
            &algebra,
            &vertices[b],
            e.get("into_b").ok_or_else(|| schema(format!("edge {key} needs into_b")))?,
        )?;
        edges.push(AlgebraEdge { algebra, into_a, into_b });
    }
    let core_obj = obj
        .get("core")
        .and_then(|v| v.as_object())
        .ok_or_else(|| schema("triangle needs a core block"))?;
    let core_alg = algebra_from_value(
        core_obj.get("algebra").ok_or_else(|| schema("core needs an algebra"))?,
        &dir,
    )?;
    let mut core_maps = Vec::new();
    for (e, key) in ["into_12", "into_13", "into_23"].iter().enumerate() {
        core_maps.push(embedding_from_value(
            &core_alg,
            &edges[e].algebra,
            core_obj.get(*key).ok_or_else(|| schema(format!("core needs {key}")))?,
        )?);
    }
    let order = match obj.get("family_order") {
        None => [0usize, 2, 1],
        Some(v) => {
            let names: Vec<String> = v
                .as_array()
                .ok_or_else(|| schema("family_order must be an array"))?
                .iter()
                .map(|x| x.as_str().map(String::from).ok_or_else(|| schema("family_order entries are edge names")))
                .collect::<Result<_, _>>()?;
            if names.len() != 3 {
                return Err(schema("family_order needs 3 edges"));
            }
            let mut order = [0usize; 3];
            for (i, n) in names.iter().enumerate() {
                order[i] = match n.as_str() {
                    "12" => 0,
                    "13" => 1,
                    "23" => 2,
                    _ => return Err(schema("family_order entries must be 12, 13, or 23")),
                };
            }
            order
        }
    };
    let triangle = AlgebraTriangle::new(
        [vertices[0].clone(), vertices[1].clone(), vertices[2].clone()],
        [edges[0].clone(), edges[1].clone(), edges[2].clone()],
        AlgebraCore {
            algebra: core_alg,
            into_edges: [core_maps[0].clone(), core_maps[1].clone(), core_maps[2].clone()],
        },
    )?;
    Ok((triangle, order))
}

/// Fock request: a base algebra with a faithful trace, factor algebras with
/// expectations onto the base copy, and a depth.
pub struct FockRequest {
    pub base: StarAlgebra,
    pub trace: Vec<Scalar>,
    pub depth: usize,
    pub factors: Vec<FockRequestFactor>,
    pub word: Option<Vec<(usize, Vec<Scalar>)>>,
}

pub struct FockRequestFactor {
    pub algebra: StarAlgebra,
    pub embedding: StarMorphism,
    pub expectation_matrix: Vec<Vec<Scalar>>,
}

pub fn fock_request_from_path(path: &Path) -> Result<FockRequest, DocError> {
    let doc = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let obj = doc.as_object().ok_or_else(|| schema("fock request must be an object"))?;
    let base = algebra_from_value(
        obj.get("base").ok_or_else(|| schema("fock request needs a base"))?,
        &dir,
    )?;
    let trace = parse_scalar_vec(
        obj.get("trace").ok_or_else(|| schema("fock request needs a trace"))?,
        "trace",
    )?;
    let depth = as_usize(
        obj.get("depth").ok_or_else(|| schema("fock request needs a depth"))?,
        "depth",
    )?;
    let mut factors = Vec::new();
    for f in obj
        .get("factors")
        .and_then(|v| v.as_array())
        .ok_or_else(|| schema("fock request needs factors"))?
    {
        let fo = f.as_object().ok_or_else(|| schema("factor must be an object"))?;
        let algebra = algebra_from_value(
            fo.get("algebra").ok_or_else(|| schema("factor needs an algebra"))?,
            &dir,
        )?;
        let embedding = embedding_from_value(
            &base,
            &algebra,
            fo.get("base_embedding").ok_or_else(|| schema("factor needs base_embedding"))?,
        )?;
        let rows: Result<Vec<Vec<Scalar>>, _> = fo
            .get("expectation")
            .and_then(|v| v.as_array())
            .ok_or_else(|| schema("factor needs an expectation matrix"))?
            .iter()
            .map(|r| parse_scalar_vec(r, "expectation row"))
            .collect();
        factors.push(FockRequestFactor { algebra, embedding, expectation_matrix: rows? });
    }
    let word = match obj.get("word") {
        None => None,
        Some(w) => {
            let arr = w.as_array().ok_or_else(|| schema("word must be an array"))?;
            let mut letters = Vec::new();
            for l in arr {
                let pair = l.as_array().ok_or_else(|| schema("word letters are [factor, element]"))?;
                if pair.len() != 2 {
                    return Err(schema("word letters are [factor, element]"));
                }
                let f = as_usize(&pair[0], "factor index")?;
                if f >= factors.len() {
                    return Err(schema("word letter factor out of range"));
                }
                let elem = match &pair[1] {
                    Value::Number(n) => {
                        let i = n.as_u64().ok_or_else(|| schema("basis index"))? as usize;
                        let dim = factors[f].algebra.dim();
                        if i >= dim {
                            return Err(schema("word letter basis index out of range"));
                        }
                        factors[f].algebra.basis_vec(i)
                    }
                    Value::Array(_) => parse_scalar_vec(&pair[1], "word letter")?,
                    _ => return Err(schema("word letter element must be an index or vector")),
                };
                letters.push((f, elem));
            }
            Some(letters)
        }
    };
    Ok(FockRequest { base, trace, depth, factors, word })
}
