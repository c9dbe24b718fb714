//! Batch command-line front end: parse input documents, run analyses, emit
//! deterministic structured reports.
//!
//! Exit code 0 means the input parsed and the pipeline ran; scientific
//! verdicts (UNKNOWN, COLLAPSED, NOT_CONFLUENT, span obstructions) are report
//! data, not process failures. Exit code 1 is reserved for unreadable or
//! invalid input documents.

mod report;

use amalgam_core::algebra::{SubalgebraSpan};
use amalgam_core::doc;
use amalgam_core::expect::{
    biunitary_check, commuting_square_check_maps, conjugate_expectation, trace_expectation,
    twisted_slice, ConditionalExpectation, ExpectationLike, Side,
};
use amalgam_core::fock;
use amalgam_core::linalg::Mat;
use amalgam_core::rewrite;
use amalgam_core::scalar::Scalar;
use amalgam_core::triangle::{self, AngleReport, AngleStatus, Verdict};
use clap::{Parser, Subcommand};
use report::Val;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "amalgam", about = "Exact analyses of amalgamated free products", version)]
struct Cli {
    /// Emit the report as JSON instead of structured text.
    #[arg(long, global = true)]
    json: bool,
    /// Include wall-clock timings (off by default so reports are
    /// byte-identical across runs).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite group operations.
    Group {
        #[command(subcommand)]
        cmd: GroupCmd,
    },
    /// Triangle-of-groups analyses.
    Triangle {
        #[command(subcommand)]
        cmd: TriangleCmd,
    },
    /// Angle between two subgroups over a common core.
    Angle {
        file: PathBuf,
        /// Syllable-length bound for the kernel search.
        #[arg(long, default_value_t = 12)]
        bound: usize,
    },
    /// Algebra-triangle operations.
    Algebra {
        #[command(subcommand)]
        cmd: AlgebraCmd,
    },
    /// Truncated free-product module operations.
    Fock {
        #[command(subcommand)]
        cmd: FockCmd,
    },
}

#[derive(Subcommand)]
enum GroupCmd {
    /// Validate a group document and report basic structure.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum TriangleCmd {
    /// Run the full realizability pipeline on a triangle document.
    Analyze {
        file: PathBuf,
        /// Auxiliary word-length bound echoed into the report.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long = "max-cosets", default_value_t = 10_000)]
        max_cosets: usize,
        #[arg(long = "angle-bound", default_value_t = 12)]
        angle_bound: usize,
    },
}

#[derive(Subcommand)]
enum AlgebraCmd {
    /// Build the minimal amalgam of an algebra triangle by relation
    /// rewriting.
    Amalgam { file: PathBuf },
    /// Commuting-square and biunitarity checks.
    SquareCheck { file: PathBuf },
}

#[derive(Subcommand)]
enum FockCmd {
    /// Exact moments of a truncated free-product module.
    Moments {
        file: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        /// Word as comma-separated `factor:basis` letters (0-based).
        #[arg(long)]
        word: Option<String>,
    },
}

fn digest(path: &Path) -> String {
    match std::fs::read(path) {
        Ok(bytes) => {
            let mut h = Sha256::new();
            h.update(&bytes);
            format!("sha256:{}", hex_string(&h.finalize()))
        }
        Err(_) => "unreadable".to_string(),
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn scalar_val(s: &Scalar) -> Val {
    Val::Str(s.to_string())
}

fn vector_val(v: &[Scalar]) -> Val {
    Val::List(v.iter().map(scalar_val).collect())
}

fn angle_val(a: &AngleReport) -> Val {
    let mut m = BTreeMap::new();
    m.insert("theta".to_string(), Val::Str(a.render()));
    m.insert(
        "n".to_string(),
        match a.n {
            triangle::AngleN::Finite(n) => Val::UInt(n),
            triangle::AngleN::Infinite => Val::str("infinity"),
        },
    );
    m.insert(
        "status".to_string(),
        Val::str(match a.status {
            AngleStatus::Exact => "EXACT".to_string(),
            AngleStatus::LowerBoundOnly { searched } => {
                format!("LOWER_BOUND_ONLY({searched})")
            }
        }),
    );
    Val::Map(m)
}

fn emit(cli: &Cli, mut report: BTreeMap<String, Val>, started: Instant) {
    if cli.timings {
        report.insert(
            "timings_ms".to_string(),
            Val::UInt(started.elapsed().as_millis() as u64),
        );
    }
    let val = Val::Map(report);
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&val.to_json()).unwrap());
    } else {
        print!("{}", val.render_text());
    }
}

fn fail(msg: impl std::fmt::Display) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(1);
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    match &cli.command {
        Command::Group { cmd: GroupCmd::Validate { file } } => {
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("group validate"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            let dir = file.parent().unwrap_or(Path::new(".")).to_path_buf();
            let doc = match doc::read_json(file) {
                Ok(d) => d,
                Err(e) => fail(e),
            };
            match doc::group_from_value(&doc, &dir) {
                Ok(g) => {
                    report.insert("ok".into(), Val::Bool(true));
                    report.insert("order".into(), Val::UInt(g.order() as u64));
                    report.insert("abelian".into(), Val::Bool(g.is_abelian()));
                    report.insert("identity".into(), Val::UInt(g.identity() as u64));
                    emit(&cli, report, started);
                }
                Err(e) => {
                    report.insert("ok".into(), Val::Bool(false));
                    report.insert("violation".into(), Val::str(e.to_string()));
                    emit(&cli, report, started);
                    std::process::exit(1);
                }
            }
        }
        Command::Triangle { cmd: TriangleCmd::Analyze { file, depth, max_cosets, angle_bound } } => {
            let t = match doc::triangle_from_path(file) {
                Ok(t) => t,
                Err(e) => fail(e),
            };
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("triangle analyze"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            report.insert(
                "bounds".into(),
                Val::map(vec![
                    ("depth", Val::UInt(*depth as u64)),
                    ("max_cosets", Val::UInt(*max_cosets as u64)),
                    ("angle_bound", Val::UInt(*angle_bound as u64)),
                ]),
            );
            match triangle::realize_triangle(&t, *angle_bound, *max_cosets) {
                Err(triangle::TriangleError::NotFillable(w)) => {
                    report.insert("fillable".into(), Val::Bool(false));
                    report.insert("witness".into(), Val::str(format!("{w:?}")));
                    report.insert("verdict".into(), Val::str("NOT_FILLABLE"));
                    emit(&cli, report, started);
                }
                Err(e) => fail(e),
                Ok(out) => {
                    report.insert("fillable".into(), Val::Bool(true));
                    report.insert("minimal".into(), Val::Bool(out.minimal));
                    report.insert(
                        "reduced_orders".into(),
                        Val::List(out.reduced_orders.iter().map(|&o| Val::UInt(o as u64)).collect()),
                    );
                    report.insert(
                        "angles".into(),
                        Val::map(vec![
                            ("vertex1", angle_val(&out.angles[0])),
                            ("vertex2", angle_val(&out.angles[1])),
                            ("vertex3", angle_val(&out.angles[2])),
                        ]),
                    );
                    report.insert(
                        "angle_sum".into(),
                        Val::str(match out.angle_sum {
                            triangle::AngleSumVerdict::Sufficient => "SUFFICIENT",
                            triangle::AngleSumVerdict::Inconclusive => "INCONCLUSIVE",
                        }),
                    );
                    report.insert("free_product_vertex".into(), Val::Bool(out.retri_free_vertex));
                    report.insert("commuting_edges".into(), Val::Bool(out.retri_commuting));
                    match &out.verdict {
                        Verdict::Realizable { reason, group, .. } => {
                            report.insert("verdict".into(), Val::str("REALIZABLE"));
                            let reason_text = match reason {
                                triangle::Reason::Enumeration => "enumeration",
                                triangle::Reason::ReductionEnumeration => {
                                    "enumeration of the reduced family"
                                }
                                triangle::Reason::FreeProductVertex => {
                                    "one vertex is the degenerate amalgam of its edges"
                                }
                                triangle::Reason::Commutation => {
                                    "edge images commute at two vertices \
                                     (amalgam is a quotient of the two-vertex product)"
                                }
                                triangle::Reason::AngleSum => "angle sum at most pi",
                            };
                            report.insert("reason".into(), Val::str(reason_text));
                            if let Some(g) = group {
                                report.insert("order".into(), Val::UInt(g.order() as u64));
                            }
                        }
                        Verdict::Collapsed { vertex, g1, g2, .. } => {
                            report.insert("verdict".into(), Val::str("COLLAPSED"));
                            report.insert(
                                "witness".into(),
                                Val::map(vec![
                                    ("vertex", Val::UInt(*vertex as u64 + 1)),
                                    ("g1", Val::UInt(*g1 as u64)),
                                    ("g2", Val::UInt(*g2 as u64)),
                                ]),
                            );
                        }
                        Verdict::Unknown { max_len, max_cosets } => {
                            report.insert("verdict".into(), Val::str("UNKNOWN"));
                            report.insert(
                                "bounds_reached".into(),
                                Val::map(vec![
                                    ("angle_bound", Val::UInt(*max_len as u64)),
                                    ("max_cosets", Val::UInt(*max_cosets as u64)),
                                ]),
                            );
                        }
                    }
                    emit(&cli, report, started);
                }
            }
        }
        Command::Angle { file, bound } => {
            let req = match doc::angle_request_from_path(file) {
                Ok(r) => r,
                Err(e) => fail(e),
            };
            let h1 = req.group.subgroup_generated(&req.h1).unwrap_or_else(|e| fail(e));
            let h2 = req.group.subgroup_generated(&req.h2).unwrap_or_else(|e| fail(e));
            let k = req.group.subgroup_generated(&req.core).unwrap_or_else(|e| fail(e));
            let rep = triangle::stallings_angle(&req.group, &h1, &h2, &k, *bound)
                .unwrap_or_else(|e| fail(e));
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("angle"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            report.insert("bound".into(), Val::UInt(*bound as u64));
            report.insert("angle".into(), angle_val(&rep));
            emit(&cli, report, started);
        }
        Command::Algebra { cmd: AlgebraCmd::Amalgam { file } } => {
            let (t, order) = match doc::algebra_triangle_from_path(file) {
                Ok(x) => x,
                Err(e) => fail(e),
            };
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("algebra amalgam"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            let names = ["12", "13", "23"];
            report.insert(
                "family_order".into(),
                Val::List(order.iter().map(|&e| Val::str(names[e])).collect()),
            );
            if let Err(e) = t.check_fillable() {
                report.insert("fillable".into(), Val::Bool(false));
                report.insert("verdict".into(), Val::str(e.to_string()));
                emit(&cli, report, started);
                return;
            }
            report.insert("fillable".into(), Val::Bool(true));
            let rules = match rewrite::discover_rules(&t, &order) {
                Ok(r) => r,
                Err(e) => {
                    report.insert("verdict".into(), Val::str(e.to_string()));
                    emit(&cli, report, started);
                    return;
                }
            };
            let rule_count: usize = rules.table.values().map(|rows| rows.len()).sum();
            report.insert("rule_count".into(), Val::UInt(rule_count as u64));
            let ra = match rewrite::build_relation_algebra(&t, &order, &rules) {
                Ok(r) => {
                    report.insert("confluent".into(), Val::Bool(true));
                    r
                }
                Err(e) => {
                    report.insert("confluent".into(), Val::Bool(false));
                    report.insert("verdict".into(), Val::str(e.to_string()));
                    emit(&cli, report, started);
                    return;
                }
            };
            report.insert("dimension".into(), Val::UInt(ra.dim() as u64));
            match rewrite::embed_vertices(&t, &ra) {
                Ok(emb) => {
                    report.insert(
                        "embedding_ranks".into(),
                        Val::List(emb.ranks.iter().map(|&r| Val::UInt(r as u64)).collect()),
                    );
                    report.insert("diagrams".into(), Val::str("ok"));
                }
                Err(e) => {
                    report.insert("diagrams".into(), Val::str(e.to_string()));
                }
            }
            let gens: Vec<Vec<Scalar>> = (0..3)
                .flat_map(|f| (0..ra.families[f].dim()).map(move |i| (f, i)))
                .map(|(f, i)| ra.family_letter(f, i))
                .collect();
            let center = ra.algebra.central_elements(&gens);
            report.insert("center_dimension".into(), Val::UInt(center.len() as u64));
            match rewrite::matrix_units_discovery(&ra.algebra, &gens) {
                Ok(mu) => {
                    report.insert("simple".into(), Val::Bool(true));
                    report.insert("matrix_size".into(), Val::UInt(mu.n as u64));
                }
                Err(e) => {
                    report.insert("simple".into(), Val::Bool(false));
                    report.insert("matrix_structure".into(), Val::str(e.to_string()));
                }
            }
            emit(&cli, report, started);
        }
        Command::Algebra { cmd: AlgebraCmd::SquareCheck { file } } => {
            let doc_val = match doc::read_json(file) {
                Ok(d) => d,
                Err(e) => fail(e),
            };
            let dir = file.parent().unwrap_or(Path::new(".")).to_path_buf();
            let obj = doc_val.as_object().unwrap_or_else(|| fail("square-check document must be an object"));
            let alg = doc::algebra_from_value(
                obj.get("algebra").unwrap_or_else(|| fail("square-check needs an algebra")),
                &dir,
            )
            .unwrap_or_else(|e| fail(e));
            let mut unitaries: BTreeMap<String, Vec<Scalar>> = BTreeMap::new();
            if let Some(us) = obj.get("unitaries").and_then(|v| v.as_object()) {
                for (name, spec) in us {
                    let w = doc::unitary_from_value(&alg, spec).unwrap_or_else(|e| fail(e));
                    if !alg.is_unitary(&w) {
                        fail(format!("{name} is not unitary"));
                    }
                    unitaries.insert(name.clone(), w);
                }
            }
            let parse_side = |v: Option<&serde_json::Value>| match v.and_then(|s| s.as_str()) {
                Some("left") => Side::Left,
                Some("right") | None => Side::Right,
                _ => fail("side must be left or right"),
            };
            let mut maps: BTreeMap<String, ExpectationLike> = BTreeMap::new();
            if let Some(es) = obj.get("expectations").and_then(|v| v.as_object()) {
                for (name, spec) in es {
                    let so = spec.as_object().unwrap_or_else(|| fail("expectation spec must be an object"));
                    let e: ExpectationLike = if let Some(side) = so.get("trace") {
                        let side = match side.as_str() {
                            Some("left") => Side::Left,
                            Some("right") => Side::Right,
                            _ => fail("trace side must be left or right"),
                        };
                        (&trace_expectation(&alg, side).unwrap_or_else(|e| fail(e))).into()
                    } else if let Some(ts) = so.get("twisted_slice") {
                        let to = ts.as_object().unwrap_or_else(|| fail("twisted_slice must be an object"));
                        let uname = to.get("unitary").and_then(|u| u.as_str())
                            .unwrap_or_else(|| fail("twisted_slice needs a unitary name"));
                        let w = unitaries.get(uname).unwrap_or_else(|| fail(format!("unknown unitary {uname}")));
                        twisted_slice(&alg, w, parse_side(to.get("side"))).unwrap_or_else(|e| fail(e))
                    } else if let Some(cs) = so.get("conjugated") {
                        let co = cs.as_object().unwrap_or_else(|| fail("conjugated must be an object"));
                        let uname = co.get("unitary").and_then(|u| u.as_str())
                            .unwrap_or_else(|| fail("conjugated needs a unitary name"));
                        let w = unitaries.get(uname).unwrap_or_else(|| fail(format!("unknown unitary {uname}")));
                        let base = trace_expectation(&alg, parse_side(co.get("side")))
                            .unwrap_or_else(|e| fail(e));
                        (&conjugate_expectation(&alg, &base, w).unwrap_or_else(|e| fail(e))).into()
                    } else {
                        fail(format!("expectation {name} needs trace, twisted_slice, or conjugated"))
                    };
                    maps.insert(name.clone(), e);
                }
            }
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("algebra square-check"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            let mut biunitary = BTreeMap::new();
            if let Some(names) = obj.get("biunitary").and_then(|v| v.as_array()) {
                for n in names {
                    let n = n.as_str().unwrap_or_else(|| fail("biunitary entries are unitary names"));
                    let w = unitaries.get(n).unwrap_or_else(|| fail(format!("unknown unitary {n}")));
                    let ok = biunitary_check(&alg, w).unwrap_or_else(|e| fail(e));
                    biunitary.insert(n.to_string(), Val::Bool(ok));
                }
            }
            if !biunitary.is_empty() {
                report.insert("biunitary".into(), Val::Map(biunitary));
            }
            let mut squares = BTreeMap::new();
            if let Some(pairs) = obj.get("pairs").and_then(|v| v.as_array()) {
                for p in pairs {
                    let pair = p.as_array().unwrap_or_else(|| fail("pairs entries are [name, name]"));
                    let (a, b) = (
                        pair[0].as_str().unwrap_or_else(|| fail("pair names")),
                        pair[1].as_str().unwrap_or_else(|| fail("pair names")),
                    );
                    let ea = maps.get(a).unwrap_or_else(|| fail(format!("unknown expectation {a}")));
                    let eb = maps.get(b).unwrap_or_else(|| fail(format!("unknown expectation {b}")));
                    let rep = commuting_square_check_maps(&alg, ea, eb).unwrap_or_else(|e| fail(e));
                    let mut entry = BTreeMap::new();
                    entry.insert("commutes".to_string(), Val::Bool(rep.commutes));
                    entry.insert("corner_dimension".to_string(), Val::UInt(rep.corner_dim as u64));
                    if let Some((j, v1, v2)) = rep.witness {
                        entry.insert(
                            "witness".to_string(),
                            Val::map(vec![
                                ("basis", Val::UInt(j as u64)),
                                ("first_then_second", vector_val(&v2)),
                                ("second_then_first", vector_val(&v1)),
                            ]),
                        );
                    }
                    squares.insert(format!("({a},{b})"), Val::Map(entry));
                }
            }
            report.insert("squares".into(), Val::Map(squares));
            emit(&cli, report, started);
        }
        Command::Fock { cmd: FockCmd::Moments { file, depth, word } } => {
            let req = match doc::fock_request_from_path(file) {
                Ok(r) => r,
                Err(e) => fail(e),
            };
            let depth = depth.unwrap_or(req.depth);
            let mut modules = Vec::new();
            for f in &req.factors {
                let images: Vec<Vec<Scalar>> =
                    (0..req.base.dim()).map(|q| f.embedding.image_of_basis(q)).collect();
                let target = SubalgebraSpan::new(&f.algebra, &images).unwrap_or_else(|e| fail(e));
                let mut matrix = Mat::zero(f.algebra.dim(), f.algebra.dim());
                if f.expectation_matrix.len() != f.algebra.dim() {
                    fail("expectation matrix has the wrong shape");
                }
                for (r, row) in f.expectation_matrix.iter().enumerate() {
                    if row.len() != f.algebra.dim() {
                        fail("expectation matrix has the wrong shape");
                    }
                    for (c, s) in row.iter().enumerate() {
                        matrix.set(r, c, s.clone());
                    }
                }
                let e = ConditionalExpectation::new(&f.algebra, target, matrix)
                    .unwrap_or_else(|e| fail(e));
                let m = fock::gns(&f.algebra, &e, &req.base, &f.embedding, &req.trace)
                    .unwrap_or_else(|e| fail(e));
                modules.push(m);
            }
            let factors: Vec<fock::FockFactor> = modules.iter().map(|m| m.to_factor()).collect();
            let module = fock::fock_space(factors, &req.base, &req.trace, depth)
                .unwrap_or_else(|e| fail(e));
            let mut report = BTreeMap::new();
            report.insert("command".into(), Val::str("fock moments"));
            report.insert("input".into(), Val::str(format!("{} {}", file.display(), digest(file))));
            report.insert("depth".into(), Val::UInt(depth as u64));
            report.insert("module_dimension".into(), Val::UInt(module.dim as u64));

            let cli_word = word.as_ref().map(|spec| {
                let mut letters = Vec::new();
                for tok in spec.split(',') {
                    let (f, b) = tok
                        .split_once(':')
                        .unwrap_or_else(|| fail("word letters are factor:basis"));
                    let f: usize = f.trim().parse().unwrap_or_else(|_| fail("bad factor index"));
                    if f >= modules.len() {
                        fail("word letter factor out of range");
                    }
                    let alg = &req.factors[f].algebra;
                    let b = b.trim();
                    let idx = match alg.labels().iter().position(|l| l == b) {
                        Some(i) => i,
                        None => b.parse().unwrap_or_else(|_| fail("bad basis letter")),
                    };
                    if idx >= alg.dim() {
                        fail("word letter basis index out of range");
                    }
                    letters.push((f, alg.basis_vec(idx)));
                }
                letters
            });
            let chosen = cli_word.or(req.word);
            match chosen {
                Some(letters) => match module.free_expectation(&letters) {
                    Ok(val) => {
                        report.insert("moment".into(), vector_val(&val));
                        emit(&cli, report, started);
                    }
                    Err(e) => {
                        report.insert("error".into(), Val::str(e.to_string()));
                        emit(&cli, report, started);
                        std::process::exit(1);
                    }
                },
                None => {
                    // Freeness suite: every alternating centered basis word
                    // up to the depth must have vanishing expectation.
                    let mut centered: Vec<Vec<Vec<Scalar>>> = Vec::new();
                    for m in &modules {
                        let mut letters = Vec::new();
                        for k in 0..m.algebra.dim() {
                            let b = m.algebra.basis_vec(k);
                            let phi = m.phi_b.apply(&b);
                            let mut c = b.clone();
                            for (q, coeff) in phi.iter().enumerate() {
                                if coeff.is_zero() {
                                    continue;
                                }
                                for (x, v) in c.iter_mut().zip(m.iota[q].iter()) {
                                    *x -= &(coeff * v);
                                }
                            }
                            if !c.iter().all(|x| x.is_zero()) {
                                letters.push(c);
                            }
                        }
                        centered.push(letters);
                    }
                    let mut words: Vec<Vec<(usize, Vec<Scalar>)>> = vec![Vec::new()];
                    let mut all_zero = true;
                    let mut count = 0u64;
                    for _ in 0..depth {
                        let mut next = Vec::new();
                        for w in &words {
                            for (i, letters) in centered.iter().enumerate() {
                                if w.last().map(|(j, _)| *j) == Some(i) {
                                    continue;
                                }
                                for l in letters {
                                    let mut nw = w.clone();
                                    nw.push((i, l.clone()));
                                    next.push(nw);
                                }
                            }
                        }
                        for w in &next {
                            let val = module.free_expectation(w).unwrap_or_else(|e| fail(e));
                            count += 1;
                            if !val.iter().all(|c| c.is_zero()) {
                                all_zero = false;
                            }
                        }
                        words = next;
                    }
                    report.insert(
                        "freeness_suite".into(),
                        Val::map(vec![
                            ("words_checked", Val::UInt(count)),
                            ("all_vanish", Val::Bool(all_zero)),
                        ]),
                    );
                    emit(&cli, report, started);
                }
            }
        }
    }
}
