use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use outfn::fixtures;
use outfn::free_factor::{ffs_from_subgraph, meet, FreeFactorSystem};
use outfn::growth::{classify_growth, pg_basis};
use outfn::lamination::{
    build_z, classify_trichotomy, frequency_vector, free_rank2_certificate, generic_leaf_window, tile, tile_matrix_check,
    AttractBudget, AttractionVerdict, LamHandle, PingPong, PingPongBudget,
};
use outfn::nielsen::{compute_pr, is_exceptional, split_path, upg_split, PrBudget};
use outfn::train_track::{find_rtt, improve_rtt, RttBudget, RttOutcome};
use outfn::word::{Alphabet, DirEdge, Word};
use outfn::{Automorphism, TopRep};

#[derive(Parser)]
#[command(name = "outfn", version, about = "Train tracks, Nielsen paths and laminations for outer automorphisms of free groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone)]
struct Opts {
    /// Global iterate cap for attraction, Nielsen and ping-pong searches.
    #[arg(long, global = true, value_name = "N")]
    budget: Option<usize>,
    /// Longest word or edge image a search may build.
    #[arg(long = "max-length", global = true, value_name = "L")]
    max_length: Option<usize>,
    /// Print the JSON document instead of a text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Write a Graphviz rendering of the representative.
    #[arg(long, global = true, value_name = "FILE")]
    dot: Option<PathBuf>,
    /// Seed for the `random` input.
    #[arg(long, global = true, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Rank of the `random` input.
    #[arg(long, global = true, default_value_t = 3)]
    rank: usize,
    /// Largest iterate exponent the improvement driver may choose.
    #[arg(long = "max-iterate", global = true, value_name = "s")]
    max_iterate: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: train track, improvement, strata, Nielsen paths, growth, laminations.
    Analyze { input: String },
    /// Relative train track representative.
    Rtt {
        input: String,
        /// Also run the improvement driver and print its checklist.
        #[arg(long)]
        improve: bool,
    },
    /// Indivisible Nielsen paths of each EG stratum.
    Nielsen {
        input: String,
        /// Split this path (in the representative's edges) and test it for exceptionality.
        #[arg(long)]
        path: Option<String>,
    },
    /// Tiles, tile counts and generic leaf windows of an EG stratum.
    Tiles {
        input: String,
        #[arg(long)]
        stratum: Option<usize>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Length of the generic leaf window.
        #[arg(long, default_value_t = 200)]
        window: usize,
    },
    /// Weak attraction of a circuit to the topmost attracting lamination.
    Attract {
        input: String,
        /// Conjugacy class, as a word in the generators.
        #[arg(long)]
        circuit: String,
    },
    /// Ping-pong certificate that `O^N` and `psi O^N psi^-1` generate a free group of rank two.
    Pingpong {
        input: String,
        /// The conjugating automorphism `psi`.
        #[arg(long)]
        other: String,
    },
    /// Growth classification.
    Growth { input: String },
    /// Invariant free factor systems and meets.
    Factor {
        input: String,
        /// Components separated by `|`, generators by `,`.
        #[arg(long)]
        system: Option<String>,
        /// Second system to meet with `--system`.
        #[arg(long)]
        meet: Option<String>,
    },
}

/// What a subcommand produced.
struct Report {
    result: Value,
    certificates: Value,
    partial: bool,
    text: String,
    dot: Option<String>,
}

fn load(input: &str, opts: &Opts) -> Result<Automorphism> {
    if input == "random" {
        return Ok(fixtures::seeded_automorphism(opts.seed, opts.rank, 6, 12));
    }
    if let Some(phi) = fixtures::named(input) {
        return Ok(phi);
    }
    let text = if input.contains("->") {
        input.replace(';', "\n")
    } else if input == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(input).with_context(|| format!("reading `{input}` (not a fixture name either)"))?
    };
    Ok(Automorphism::parse(&text)?)
}

fn rtt_budget(opts: &Opts) -> RttBudget {
    let mut b = RttBudget::default();
    if let Some(l) = opts.max_length {
        b.max_len = l;
    }
    if let Some(s) = opts.max_iterate {
        b.max_iterate = s;
    }
    if let Some(n) = opts.budget {
        b.pr.max_iterates = n;
        b.basic_iterations = n;
    }
    b
}

fn pr_budget(opts: &Opts) -> PrBudget {
    rtt_budget(opts).pr
}

fn attract_budget(opts: &Opts) -> AttractBudget {
    let mut b = AttractBudget::default();
    if let Some(n) = opts.budget {
        b.iterations = n;
    }
    if let Some(l) = opts.max_length {
        b.max_len = l;
    }
    b
}

/// Names for the edges of a representative: the generators on the rose,
/// `e1, e2, …` otherwise.
fn edge_alphabet(f: &TopRep, phi: &Automorphism) -> Alphabet {
    let g = &f.graph.graph;
    if g.vertex_count == 1 && g.edge_count() == phi.rank() {
        phi.alphabet.clone()
    } else {
        Alphabet::new((1..=g.edge_count()).map(|i| format!("e{i}")).collect()).expect("edge names are valid")
    }
}

fn unknown() -> Value {
    json!("unknown")
}

fn describe_rep(f: &TopRep, al: &Alphabet) -> Value {
    let g = &f.graph.graph;
    json!({
        "vertices": g.vertex_count,
        "edges": (0..g.edge_count()).map(|i| json!({
            "name": al.letter(DirEdge::fwd(i)),
            "ends": g.ends[i],
            "image": al.format(&f.edge_image[i]),
        })).collect::<Vec<_>>(),
        "strata": f.strata.iter().map(|s| json!({
            "index": s.index,
            "class": s.class,
            "edges": s.edges.iter().map(|&e| al.letter(DirEdge::fwd(e))).collect::<Vec<_>>(),
            "lambda": s.lambda,
            "aperiodic": s.aperiodic,
            "period": s.period,
        })).collect::<Vec<_>>(),
    })
}

fn strata_text(f: &TopRep, al: &Alphabet, out: &mut String) {
    for i in 0..f.edge_count() {
        let _ = writeln!(out, "  {} -> {}", al.letter(DirEdge::fwd(i)), al.format(&f.edge_image[i]));
    }
    for s in &f.strata {
        let names: Vec<String> = s.edges.iter().map(|&e| al.letter(DirEdge::fwd(e))).collect();
        let lam = s.lambda.map(|l| format!(" lambda {l:.9}")).unwrap_or_default();
        let _ = writeln!(out, "  H{} {:?} [{}]{lam}", s.index, s.class, names.join(" "));
    }
}

fn to_dot(f: &TopRep, al: &Alphabet, label: impl Fn(usize) -> String) -> String {
    let g = &f.graph.graph;
    let mut s = String::from("digraph rep {\n");
    for v in 0..g.vertex_count {
        let star = if v == f.graph.base { "*" } else { "" };
        let _ = writeln!(s, "  v{v} [label=\"{v}{star}\"];");
    }
    for (i, &(a, b)) in g.ends.iter().enumerate() {
        let _ = writeln!(s, "  v{a} -> v{b} [label=\"{}: {}\"];", al.letter(DirEdge::fwd(i)), label(i));
    }
    s.push_str("}\n");
    s
}

fn rtt_section(out: &RttOutcome, al: &Alphabet) -> Value {
    json!({
        "train_track": if out.complete { json!(true) } else { unknown() },
        "representative": describe_rep(&out.rep, al),
        "diagnostics": out.diagnostics,
    })
}

fn cmd_rtt(phi: &Automorphism, improve: bool, opts: &Opts) -> Result<Report> {
    let budget = rtt_budget(opts);
    let out = find_rtt(phi, None, &budget)?;
    let al = edge_alphabet(&out.rep, phi);
    let mut result = rtt_section(&out, &al);
    let mut certificates = json!({ "moves": out.log, "witnesses": out.witnesses });
    let partial = !out.complete;
    let mut text = format!("relative train track: {}\n", if out.complete { "yes" } else { "unknown (budget)" });
    strata_text(&out.rep, &al, &mut text);
    if improve {
        if out.complete {
            let imp = improve_rtt(&out.rep, &budget)?;
            let ial = edge_alphabet(&imp.rep, phi);
            result["improved"] = json!({
                "iterate": imp.iterate,
                "representative": describe_rep(&imp.rep, &ial),
                "checklist": imp.report.clauses,
                "eigenvalues_preserved": imp.eigenvalues_preserved,
                "diagnostics": imp.diagnostics,
            });
            certificates["improvement_moves"] = json!(imp.log);
            certificates["improvement_witnesses"] = json!(imp.witnesses);
            let _ = writeln!(text, "improved representative of iterate {}:", imp.iterate);
            strata_text(&imp.rep, &ial, &mut text);
            for c in &imp.report.clauses {
                let st = match &c.status {
                    outfn::train_track::Status::Pass => "pass".to_string(),
                    outfn::train_track::Status::Fail(w) => format!("fail ({w})"),
                    outfn::train_track::Status::Unknown(w) => format!("unknown ({w})"),
                };
                let at = c.stratum.map(|r| format!(" H{r}")).unwrap_or_default();
                let _ = writeln!(text, "  [{}{at}] {st}", c.name);
            }
        } else {
            result["improved"] = unknown();
        }
    }
    let dot = to_dot(&out.rep, &al, |i| al.format(&out.rep.edge_image[i]));
    Ok(Report { result, certificates, partial, text, dot: Some(dot) })
}

fn pr_section(f: &TopRep, al: &Alphabet, opts: &Opts) -> Result<(Value, bool, String)> {
    let mut sections = Vec::new();
    let mut partial = false;
    let mut text = String::new();
    for r in f.eg_strata() {
        let pr = compute_pr(f, r, &pr_budget(opts))?;
        partial |= !pr.complete;
        let elements: Vec<Value> = pr
            .elements
            .iter()
            .map(|c| {
                json!({
                    "path": c.rho.path().map(|p| json!(al.format(&p))).unwrap_or_else(|| json!(c.text)),
                    "periodic": c.is_periodic(),
                    "period": c.period,
                    "unoriented_period": c.unoriented_period,
                    "preperiod": c.preperiod,
                    "hr_edges": c.hr_edges,
                    "crosses_each_twice": c.crosses_each_twice,
                    "conjugacy_class": c.conjugacy_class.as_ref().map(|w| al.format(w)),
                })
            })
            .collect();
        let _ = writeln!(text, "P_r for H{r}: {} element(s){}", elements.len(), if pr.complete { "" } else { ", search incomplete" });
        for c in &pr.elements {
            let p = c.rho.path().map(|p| al.format(&p)).unwrap_or_else(|| c.text.clone());
            let _ = writeln!(text, "  {p}  period {} preperiod {}", c.period, c.preperiod);
        }
        sections.push(json!({
            "stratum": r,
            "complete": pr.complete,
            "elements": if pr.complete { json!(elements) } else { json!({ "found": elements, "rest": "unknown" }) },
            "notes": pr.notes,
        }));
    }
    Ok((json!(sections), partial, text))
}

fn parse_path(al: &Alphabet, s: &str) -> Result<Word> {
    Ok(al.parse(s)?)
}

fn cmd_nielsen(phi: &Automorphism, path: Option<&str>, opts: &Opts) -> Result<Report> {
    let out = find_rtt(phi, None, &rtt_budget(opts))?;
    let f = &out.rep;
    let al = edge_alphabet(f, phi);
    let (pr, mut partial, mut text) = pr_section(f, &al, opts)?;
    partial |= !out.complete;
    let mut result = json!({ "train_track": out.complete, "representative": describe_rep(f, &al), "nielsen": pr });
    if let Some(p) = path {
        let sigma = parse_path(&al, p)?;
        let s = split_path(f, &sigma, false, 10)?;
        let exc = is_exceptional(f, &sigma);
        let pieces: Vec<String> = s.pieces.iter().map(|p| al.format(p)).collect();
        let _ = writeln!(text, "splitting of {}: {}", al.format(&sigma), pieces.join(" . "));
        let _ = writeln!(text, "exceptional: {}", exc.is_some());
        let growth = classify_growth(f).ok();
        let upg = if growth.as_ref().is_some_and(|g| g.upg) {
            let u = upg_split(f, &sigma, 10 * sigma.len().max(1), 3)?;
            partial |= u.m.is_none();
            let shown: Vec<String> = u.pieces.iter().map(|p| al.format(p)).collect();
            match u.m {
                Some(m) => {
                    let _ = writeln!(text, "after {m} iterate(s): {}", shown.join(" . "));
                }
                None => {
                    let _ = writeln!(text, "no splitting into edges and exceptional paths within budget");
                }
            }
            json!({
                "m": u.m.map(|m| json!(m)).unwrap_or_else(unknown),
                "pieces": u.pieces.iter().map(|p| al.format(p)).collect::<Vec<_>>(),
                "exceptional": u.exceptional,
            })
        } else {
            Value::Null
        };
        result["path"] = json!({
            "splitting": pieces,
            "certificates": s.certificates,
            "depth_verified": s.depth_verified,
            "structural_certificate": s.structural_certificate,
            "exceptional": exc,
            "upg_split": upg,
        });
    }
    Ok(Report { result, certificates: json!({ "moves": out.log }), partial, text, dot: None })
}

fn cmd_tiles(phi: &Automorphism, stratum: Option<usize>, depth: usize, window: usize, opts: &Opts) -> Result<Report> {
    let out = find_rtt(phi, None, &rtt_budget(opts))?;
    let f = &out.rep;
    let al = edge_alphabet(f, phi);
    let r = match stratum {
        Some(r) => r,
        None => *f.eg_strata().last().ok_or_else(|| anyhow!("no EG stratum"))?,
    };
    if !f.strata.get(r).is_some_and(|s| s.is_eg()) {
        bail!("H{r} is not an EG stratum");
    }
    let max_len = rtt_budget(opts).max_len.max(1 << 16);
    let mut tiles = Vec::new();
    let mut text = format!("tiles of H{r} at depth {depth}:\n");
    for &e in &f.strata[r].edges {
        let t = tile(f, DirEdge::fwd(e), depth, max_len)?;
        let _ = writeln!(text, "  {}: {}", al.letter(DirEdge::fwd(e)), al.format(&t.path));
        tiles.push(json!({ "edge": al.letter(DirEdge::fwd(e)), "path": al.format(&t.path), "length": t.path.len() }));
    }
    let counts_match = tile_matrix_check(f, r, depth)?;
    let freq = frequency_vector(f, r)?;
    let win = generic_leaf_window(f, r, window)?;
    let mut counts = vec![0usize; f.edge_count()];
    for x in &win.path {
        counts[x.index()] += 1;
    }
    let _ = writeln!(text, "tile counts match M^{depth}: {counts_match}");
    let _ = writeln!(text, "frequencies: {freq:?}");
    let _ = writeln!(text, "window: {} edges, tiles of depth {} all occur", win.path.len(), win.tile_depth);
    let result = json!({
        "stratum": r,
        "depth": depth,
        "tiles": tiles,
        "counts_match_matrix": counts_match,
        "frequencies": freq,
        "window": {
            "edge": al.letter(win.edge),
            "m": win.m,
            "levels": win.levels,
            "length": win.path.len(),
            "tile_depth": win.tile_depth,
            "path": if win.path.len() <= 400 { json!(al.format(&win.path)) } else { Value::Null },
        },
    });
    let dot = to_dot(f, &al, |i| format!("{} crossings", counts[i]));
    Ok(Report { result, certificates: json!({ "moves": out.log }), partial: !out.complete, text, dot: Some(dot) })
}

fn cmd_attract(phi: &Automorphism, circuit: &str, opts: &Opts) -> Result<Report> {
    let out = find_rtt(phi, None, &rtt_budget(opts))?;
    let gamma_word = phi.alphabet.parse(circuit)?;
    let f = out.rep.clone();
    let al = edge_alphabet(&f, phi);
    let lam = LamHandle::topmost(f)?;
    let z = build_z(&lam, &pr_budget(opts), &attract_budget(opts))?;
    let realized = lam.rep.graph.realize(&gamma_word);
    let gamma = lam.rep.graph.graph.cyclic_reduce(&realized)?;
    let verdict = classify_trichotomy(&lam, &z, gamma.edges(), &attract_budget(opts))?;
    let partial = matches!(verdict, AttractionVerdict::Unknown { .. }) || z.provisional || !out.complete;
    let summary = match &verdict {
        AttractionVerdict::Attracted { k, method } => format!("attracted at k = {k} ({method})"),
        AttractionVerdict::InGroupoid { .. } => "carried by the nonattracting subgroup".to_string(),
        AttractionVerdict::GenericNegative => "generic leaf of the repelling lamination".to_string(),
        AttractionVerdict::Unknown { reason } => format!("unknown ({reason})"),
    };
    let result = json!({
        "circuit": al.format(gamma.edges()),
        "lambda": lam.lambda(),
        "stratum": lam.stratum,
        "attracted": match &verdict {
            AttractionVerdict::Attracted { .. } => json!(true),
            AttractionVerdict::Unknown { .. } => unknown(),
            _ => json!(false),
        },
        "verdict": verdict,
        "z": {
            "edges": z.edges.iter().map(|&e| al.letter(DirEdge::fwd(e))).collect::<Vec<_>>(),
            "rho": z.rho.as_ref().map(|p| al.format(p)),
            "provisional": z.provisional,
        },
    });
    let text = format!("circuit {}: {summary}\n", al.format(gamma.edges()));
    Ok(Report { result, certificates: json!({ "verdict": verdict, "moves": out.log }), partial, text, dot: None })
}

fn cmd_pingpong(phi: &Automorphism, other: &str, opts: &Opts) -> Result<Report> {
    let psi = load(other, opts)?;
    let mut pp = PingPongBudget::default();
    if let Some(n) = opts.budget {
        pp.iterations = n;
    }
    let cert = free_rank2_certificate(phi, &psi, &rtt_budget(opts), &pp)?;
    let (partial, text) = match &cert {
        PingPong::Certificate { width, legs } => (false, format!("<O^N, psi O^N psi^-1> is free of rank two: {} legs at width {width}\n", legs.len())),
        PingPong::Unknown { reason } => (true, format!("unknown: {reason}\n")),
    };
    let result = json!({
        "free_rank_two": if partial { unknown() } else { json!(true) },
        "certificate": cert,
    });
    Ok(Report { result, certificates: json!({ "pingpong": cert }), partial, text, dot: None })
}

fn growth_section(out: &RttOutcome, al: &Alphabet) -> Result<(Value, String)> {
    if !out.complete {
        let v = json!({ "pg": unknown(), "upg": unknown(), "lambda_max": unknown(), "abelian_matrix": unknown(), "mod3_trivial": unknown() });
        return Ok((v, "growth: unknown (no train track)\n".into()));
    }
    let g = classify_growth(&out.rep)?;
    let mut v = json!({
        "pg": g.pg,
        "upg": g.upg,
        "lambda_max": g.lambda_max,
        "abelian_matrix": g.abelian_matrix,
        "mod3_trivial": g.mod3_trivial,
        "unipotent": g.unipotent,
    });
    if g.pg {
        if let Ok((_, basis)) = pg_basis(&out.rep) {
            v["pg_basis"] = json!({
                "circuits": basis.circuits.iter().map(|c| al.format(c)).collect::<Vec<_>>(),
                "diagonal": basis.diagonal,
            });
        }
    }
    let class = if g.upg {
        "unipotent polynomially growing"
    } else if g.pg {
        "polynomially growing"
    } else {
        "exponentially growing"
    };
    let lam = g.lambda_max.map(|l| format!(", lambda {l:.9}")).unwrap_or_default();
    Ok((v, format!("growth: {class}{lam}\n")))
}

fn cmd_growth(phi: &Automorphism, opts: &Opts) -> Result<Report> {
    let out = find_rtt(phi, None, &rtt_budget(opts))?;
    let al = edge_alphabet(&out.rep, phi);
    let (result, text) = growth_section(&out, &al)?;
    Ok(Report { result, certificates: json!({ "moves": out.log }), partial: !out.complete, text, dot: None })
}

fn parse_system(al: &Alphabet, s: &str) -> Result<FreeFactorSystem> {
    let lists = s
        .split('|')
        .map(|c| c.split(',').map(|w| al.parse(w.trim()).map_err(anyhow::Error::from)).collect::<Result<Vec<Word>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(FreeFactorSystem::from_generators(&lists))
}

fn system_json(f: &FreeFactorSystem, al: &Alphabet) -> Value {
    json!({
        "complexity": f.complexity().to_string(),
        "components": f.components.iter().map(|c| json!({
            "rank": c.rank(),
            "generators": c.generators().iter().map(|g| al.format(g)).collect::<Vec<_>>(),
            "graph": c,
        })).collect::<Vec<_>>(),
    })
}

fn cmd_factor(phi: &Automorphism, system: Option<&str>, other: Option<&str>, opts: &Opts) -> Result<Report> {
    let out = find_rtt(phi, None, &rtt_budget(opts))?;
    let f = &out.rep;
    let al = &phi.alphabet;
    let mut text = String::new();
    let mut chain = Vec::new();
    for r in 0..f.strata.len() {
        let sys = ffs_from_subgraph(&f.graph, &f.filtration_edges(r));
        if sys.is_trivial() {
            continue;
        }
        let _ = writeln!(text, "G_{r}: complexity {}", sys.complexity());
        chain.push(json!({ "filtration_element": r, "system": system_json(&sys, al) }));
    }
    let mut result = json!({ "invariant_chain": chain });
    if let Some(s) = system {
        let a = parse_system(al, s)?;
        let invariant = a.image(&phi.images).same_as(&a);
        let _ = writeln!(text, "system {s}: complexity {}, invariant {invariant}", a.complexity());
        result["system"] = system_json(&a, al);
        result["system"]["invariant"] = json!(invariant);
        if let Some(t) = other {
            let b = parse_system(al, t)?;
            let m = meet(&a, &b);
            let _ = writeln!(text, "meet with {t}: complexity {}", m.complexity());
            result["meet"] = system_json(&m, al);
        }
    } else if other.is_some() {
        bail!("--meet needs --system");
    }
    Ok(Report { result, certificates: json!({ "moves": out.log }), partial: !out.complete, text, dot: None })
}

fn cmd_analyze(phi: &Automorphism, opts: &Opts) -> Result<Report> {
    let budget = rtt_budget(opts);
    let out = find_rtt(phi, None, &budget)?;
    let al = edge_alphabet(&out.rep, phi);
    let mut partial = !out.complete;
    let mut text = format!("relative train track: {}\n", if out.complete { "yes" } else { "unknown (budget)" });
    strata_text(&out.rep, &al, &mut text);
    let mut result = rtt_section(&out, &al);
    let mut certificates = json!({ "moves": out.log, "witnesses": out.witnesses });
    if !out.complete {
        for k in ["improved", "nielsen", "growth", "lamination"] {
            result[k] = unknown();
        }
        let dot = to_dot(&out.rep, &al, |i| al.format(&out.rep.edge_image[i]));
        return Ok(Report { result, certificates, partial, text, dot: Some(dot) });
    }
    let imp = improve_rtt(&out.rep, &budget)?;
    result["improved"] = json!({
        "iterate": imp.iterate,
        "checklist": imp.report.clauses,
        "eigenvalues_preserved": imp.eigenvalues_preserved,
    });
    certificates["improvement_moves"] = json!(imp.log);
    let (pr, pr_partial, pr_text) = pr_section(&out.rep, &al, opts)?;
    partial |= pr_partial;
    result["nielsen"] = pr;
    text.push_str(&pr_text);
    let (growth, growth_text) = growth_section(&out, &al)?;
    result["growth"] = growth;
    text.push_str(&growth_text);
    if out.rep.eg_strata().is_empty() {
        result["lamination"] = Value::Null;
    } else {
        let lam = LamHandle::topmost(out.rep.clone())?;
        let z = build_z(&lam, &pr_budget(opts), &attract_budget(opts))?;
        partial |= z.provisional;
        result["lamination"] = json!({
            "stratum": lam.stratum,
            "lambda": lam.lambda(),
            "frequencies": frequency_vector(&out.rep, lam.stratum)?,
            "z": {
                "edges": z.edges.iter().map(|&e| al.letter(DirEdge::fwd(e))).collect::<Vec<_>>(),
                "rho": z.rho.as_ref().map(|p| al.format(p)),
                "closure_ok": z.closure_ok,
                "provisional": if z.provisional { unknown() } else { json!(false) },
            },
        });
        let _ = writeln!(text, "lamination of H{}: lambda {:.9}", lam.stratum, lam.lambda());
    }
    let dot = to_dot(&out.rep, &al, |i| al.format(&out.rep.edge_image[i]));
    Ok(Report { result, certificates, partial, text, dot: Some(dot) })
}

fn run(cli: &Cli) -> Result<bool> {
    let opts = &cli.opts;
    let (name, input) = match &cli.command {
        Command::Analyze { input } => ("analyze", input),
        Command::Rtt { input, .. } => ("rtt", input),
        Command::Nielsen { input, .. } => ("nielsen", input),
        Command::Tiles { input, .. } => ("tiles", input),
        Command::Attract { input, .. } => ("attract", input),
        Command::Pingpong { input, .. } => ("pingpong", input),
        Command::Growth { input } => ("growth", input),
        Command::Factor { input, .. } => ("factor", input),
    };
    let phi = load(input, opts)?;
    let report = match &cli.command {
        Command::Analyze { .. } => cmd_analyze(&phi, opts)?,
        Command::Rtt { improve, .. } => cmd_rtt(&phi, *improve, opts)?,
        Command::Nielsen { path, .. } => cmd_nielsen(&phi, path.as_deref(), opts)?,
        Command::Tiles { stratum, depth, window, .. } => cmd_tiles(&phi, *stratum, *depth, *window, opts)?,
        Command::Attract { circuit, .. } => cmd_attract(&phi, circuit, opts)?,
        Command::Pingpong { other, .. } => cmd_pingpong(&phi, other, opts)?,
        Command::Growth { .. } => cmd_growth(&phi, opts)?,
        Command::Factor { system, meet, .. } => cmd_factor(&phi, system.as_deref(), meet.as_deref(), opts)?,
    };
    if let Some(path) = &opts.dot {
        let dot = report.dot.as_deref().ok_or_else(|| anyhow!("`{name}` has no graph to draw"))?;
        std::fs::write(path, dot).with_context(|| format!("writing {}", path.display()))?;
    }
    if opts.json {
        let doc = json!({
            "command": name,
            "input": { "text": phi.to_text(), "automorphism": phi },
            "status": if report.partial { "partial" } else { "complete" },
            "result": report.result,
            "certificates": report.certificates,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        print!("{}", report.text);
        if report.partial {
            println!("(budget exhausted: some answers are unknown)");
        }
    }
    Ok(report.partial)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
