//! `amalgam`: command-line front end for predimension computations, strong
//! embeddings, amalgamation, generic-model builds and the property audits.
//!
//! Exit status: 0 on success, 1 when a property violation is found, 2 on
//! usage, parse or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use amalgam_core::amalgam::free_amalgam_with;
use amalgam_core::audit::{audit_all, AuditConfig};
use amalgam_core::builder::{audit_richness, build_generic, GenericApprox, RichnessReport};
use amalgam_core::canon::code_hex;
use amalgam_core::collapse::{build_collapsed, count_independent_copies, in_class_mu, MuContext};
use amalgam_core::extension::{classify, class_key};
use amalgam_core::geometry::{check_exchange, enumerate_minimal_extensions, Geometry};
use amalgam_core::report::{ids, Report};
use amalgam_core::scalar::parse_ratio;
use amalgam_core::strong::{class_report, Ambient};
use amalgam_core::text::{
    parse_map, parse_mu, parse_spec, parse_structure, serialize_map, serialize_structure,
};
use amalgam_core::{ElemSet, Error, FinStructure, Rational, Signature, Spec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "amalgam", version, about = "Predimensions, strong embeddings and amalgamation of finite structures")]
struct Cli {
    /// Predimension spec file; the ab initio predimension when omitted.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "AMALGAM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Args, Debug)]
struct SigArgs {
    /// Weight of the single binary symbol `E` when building from scratch.
    #[arg(long, default_value = "1/1")]
    alpha: String,
    /// Take the signature from this structure file instead.
    #[arg(long)]
    sig_from: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Maximum universe size.
    #[arg(long, default_value_t = 40)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Structure output file; without it the structure goes to stdout and the report to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sig: SigArgs,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// δ of a subset, or δ(X/B) with --base.
    Delta {
        structure: PathBuf,
        /// Elements of X (default: the whole universe).
        #[arg(long, value_delimiter = ',')]
        set: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        base: Option<Vec<usize>>,
    },
    /// Decide A ≤ B (B defaults to the universe).
    Strong {
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        a: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        b: Option<Vec<usize>>,
    },
    /// Self-sufficient closure of A.
    Closure {
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        a: Vec<usize>,
    },
    /// Membership in the amalgamation class; exit 1 with a witness if not.
    CheckClass { structure: PathBuf },
    /// Free amalgam of B1 and B2 over A along two map files.
    Amalgamate {
        base: PathBuf,
        left: PathBuf,
        right: PathBuf,
        left_map: PathBuf,
        right_map: PathBuf,
        /// Writes the amalgam here and the two embeddings to `<out>.left` and `<out>.right`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a finite approximation of the generic model.
    Build(BuildArgs),
    /// Richness audit of a structure.
    Audit {
        structure: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// d(A/C) relative to the structure.
    Dim {
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        a: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        c: Vec<usize>,
    },
    /// Whether a lies in gcl(B).
    Gcl {
        structure: PathBuf,
        #[arg(long)]
        a: usize,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        b: Vec<usize>,
    },
    /// Sampled check of the exchange rule.
    ExchangeAudit {
        structure: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Minimal extensions of a base structure up to size n.
    EnumerateMin {
        base: PathBuf,
        #[arg(long)]
        n: usize,
        /// Writes `class-<i>.txt` extension files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Membership in C_μ.
    CheckMu {
        structure: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        /// Largest |B| of the constrained classes.
        #[arg(long, default_value_t = 3)]
        bound: usize,
    },
    /// Largest independent family of strong copies of an extension over A0.
    CountCopies {
        structure: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        a0: Vec<usize>,
        /// Extension file whose first |A0| elements form the base.
        #[arg(long)]
        ext: PathBuf,
    },
    /// Collapsed build through thrifty amalgamation.
    CollapseBuild {
        #[arg(long)]
        mu: PathBuf,
        #[command(flatten)]
        build: BuildArgs,
    },
    /// All property audits with fixed seeds.
    AuditAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplies every default sample budget; 0 makes every audit vacuous.
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[command(flatten)]
        sig: SigArgs,
    },
}

/// Failure modes mapped onto exit codes.
enum Failure {
    Usage(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ThriftyFailure(_) => Failure::Violation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<Output, Failure>;

/// What a verb produced: a report, a verdict, and files to write.
struct Output {
    report: Report,
    ok: bool,
    /// Text of the primary structure when no --out was given.
    structure: Option<String>,
}

impl Output {
    fn ok(report: Report) -> Self {
        Output { report, ok: true, structure: None }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(out) => {
            let text = match cli.format {
                Format::Human => human(&cli.verb, &out.report),
                Format::Machine => out.report.machine(),
            };
            match &out.structure {
                Some(s) => {
                    print!("{s}");
                    eprint!("{text}");
                }
                None => print!("{text}"),
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Single-value verbs print the bare value in human mode.
fn human(verb: &Verb, r: &Report) -> String {
    let key = match verb {
        Verb::Delta { .. } => Some("delta"),
        Verb::Dim { .. } => Some("dim"),
        _ => None,
    };
    match key.and_then(|k| r.get(k)) {
        Some(v) => format!("{v}\n"),
        None => r.human(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn structure(path: &Path) -> Result<FinStructure, Failure> {
    parse_structure(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn spec(cli: &Cli) -> Result<Spec, Failure> {
    match &cli.spec {
        None => Ok(Spec::ab_initio()),
        Some(p) => parse_spec(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

fn signature(args: &SigArgs) -> Result<Arc<Signature>, Failure> {
    if let Some(p) = &args.sig_from {
        return Ok(structure(p)?.signature().clone());
    }
    let w = parse_ratio(&args.alpha).ok_or_else(|| Failure::Usage(format!("bad weight {:?}", args.alpha)))?;
    Ok(Arc::new(Signature::graph(w)))
}

fn set_in(s: &FinStructure, elems: &[usize]) -> Result<ElemSet, Failure> {
    let x: ElemSet = elems.iter().copied().collect();
    if let Some(&e) = elems.iter().find(|&&e| e >= s.size()) {
        return Err(Failure::Usage(format!("element {e} outside universe of size {}", s.size())));
    }
    Ok(x)
}

fn dispatch(cli: &Cli) -> Outcome {
    let spec = spec(cli)?;
    let mut r = Report::new();
    match &cli.verb {
        Verb::Delta { structure: p, set, base } => {
            let s = structure(p)?;
            let x = match set {
                Some(v) => set_in(&s, v)?,
                None => s.universe(),
            };
            let b = set_in(&s, base.as_deref().unwrap_or(&[]))?;
            let v = amalgam_core::delta_rel(&spec, &s, x, b)?;
            r.rational("delta", &v);
            Ok(Output::ok(r))
        }
        Verb::Strong { structure: p, a, b } => {
            let s = structure(p)?;
            let a = set_in(&s, a)?;
            let b = match b {
                Some(v) => set_in(&s, v)?,
                None => s.universe(),
            };
            let rep = amalgam_core::strong::is_strong(&spec, &s, a, b)?;
            r.set("strong", rep.verdict).rational("deficiency", &rep.deficiency);
            if let Some(w) = rep.witness {
                r.set_of("witness", w);
            }
            Ok(Output::ok(r))
        }
        Verb::Closure { structure: p, a } => {
            let s = structure(p)?;
            let a = set_in(&s, a)?;
            r.set_of("closure", Ambient::new(&spec, &s)?.closure(a));
            Ok(Output::ok(r))
        }
        Verb::CheckClass { structure: p } => {
            let s = structure(p)?;
            let rep = class_report(&spec, &s)?;
            r.set("in_class", rep.verdict).rational("min_delta", &rep.deficiency);
            if !rep.verdict {
                r.set_of("witness", rep.witness.expect("negative minimum has a witness"));
            }
            Ok(Output { report: r, ok: rep.verdict, structure: None })
        }
        Verb::Amalgamate { base, left, right, left_map, right_map, out } => {
            let (a, b1, b2) = (structure(base)?, structure(left)?, structure(right)?);
            let s1 = parse_map(&read(left_map)?, a.size())?;
            let s2 = parse_map(&read(right_map)?, a.size())?;
            let res = free_amalgam_with(&spec, &a, &b1, &b2, &s1, &s2)?;
            r.set("size", res.amalgam.size())
                .set("instances", res.amalgam.instance_count())
                .set_of("base", res.base)
                .set("left", ids(res.left.map.iter().copied()))
                .set("right", ids(res.right.map.iter().copied()));
            let text = serialize_structure(&res.amalgam);
            match out {
                Some(path) => {
                    write(path, &text)?;
                    write(&suffixed(path, "left"), &serialize_map(&res.left))?;
                    write(&suffixed(path, "right"), &serialize_map(&res.right))?;
                    Ok(Output::ok(r))
                }
                None => Ok(Output { report: r, ok: true, structure: Some(text) }),
            }
        }
        Verb::Build(args) => {
            let ga = build_generic(&spec, signature(&args.sig)?, args.k, args.budget, args.seed)?;
            finish_build(&spec, &ga, args, r)
        }
        Verb::Audit { structure: p, k } => {
            let s = structure(p)?;
            let audit = audit_richness(&spec, &s, *k)?;
            richness(&mut r, &audit, None);
            Ok(Output { report: r, ok: audit.complete(), structure: None })
        }
        Verb::Dim { structure: p, a, c } => {
            let s = structure(p)?;
            let g = Geometry::new(&spec, &s)?;
            let v = g.dim(set_in(&s, a)?, set_in(&s, c)?)?;
            r.rational("dim", &v).set("relative_to", "ambient");
            Ok(Output::ok(r))
        }
        Verb::Gcl { structure: p, a, b } => {
            let s = structure(p)?;
            let g = Geometry::new(&spec, &s)?;
            r.set("gcl", g.gcl_member(*a, set_in(&s, b)?)?);
            Ok(Output::ok(r))
        }
        Verb::ExchangeAudit { structure: p, samples, seed } => {
            let s = structure(p)?;
            let rep = check_exchange(&spec, &s, *samples, *seed)?;
            r.set("samples", rep.samples).set("antecedent_held", rep.antecedent_held).set("violations", rep.violations.len());
            if let Some(v) = rep.violations.first() {
                r.set("witness", format!("a={} c={} B={}", v.a, v.c, v.b));
            }
            Ok(Output { report: r, ok: rep.passed(), structure: None })
        }
        Verb::EnumerateMin { base, n, out_dir } => {
            let a = structure(base)?;
            let classes = enumerate_minimal_extensions(&spec, &a, *n)?;
            r.set("classes", classes.len());
            for (i, c) in classes.iter().enumerate() {
                r.set(format!("class.{i:03}.code"), code_hex(&c.code))
                    .set(format!("class.{i:03}.size"), c.size())
                    .rational(format!("class.{i:03}.delta"), &c.delta)
                    .set(format!("class.{i:03}.pre_algebraic"), c.pre_algebraic)
                    .set(format!("class.{i:03}.mu_key"), code_hex(&class_key(&spec, &c.extension, c.base_len())?));
                if let Some(dir) = out_dir {
                    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
                    write(&dir.join(format!("class-{i:03}.txt")), &serialize_structure(&c.extension))?;
                }
            }
            Ok(Output::ok(r))
        }
        Verb::CheckMu { structure: p, mu, bound } => {
            let s = structure(p)?;
            let ctx = MuContext::new(parse_mu(&read(mu)?)?, *bound);
            let rep = in_class_mu(&spec, &ctx, &s)?;
            r.set("bases", rep.bases).set("violations", rep.violations.len());
            for (i, v) in rep.violations.iter().enumerate() {
                r.set(
                    format!("violation.{i:03}"),
                    format!("A0={} class={} count={} bound={}", ids(v.a0.iter().copied()), code_hex(&v.key), v.count, v.bound),
                );
            }
            Ok(Output { report: r, ok: rep.passed(), structure: None })
        }
        Verb::CountCopies { structure: p, a0, ext } => {
            let m = structure(p)?;
            set_in(&m, a0)?;
            let b = structure(ext)?;
            if b.size() < a0.len() {
                return Err(Failure::Usage("extension is smaller than the base".into()));
            }
            let base = b.induced_on(&(0..a0.len()).collect::<Vec<_>>())?;
            let class = classify(&spec, &base, b)?;
            r.set("copies", count_independent_copies(&spec, &m, a0, &class, None)?);
            Ok(Output::ok(r))
        }
        Verb::CollapseBuild { mu, build } => {
            let ctx = MuContext::new(parse_mu(&read(mu)?)?, build.k);
            let ga = build_collapsed(&spec, signature(&build.sig)?, ctx, build.k, build.budget, build.seed)?;
            let ctx = ga.mu_context().expect("collapsed build");
            let rep = in_class_mu(&spec, ctx, ga.current())?;
            r.set("mu.violations", rep.violations.len());
            let mut out = finish_build(&spec, &ga, build, r)?;
            out.ok &= rep.passed();
            Ok(out)
        }
        Verb::AuditAll { seed, scale, sig } => {
            let mut cfg = AuditConfig::new(signature(sig)?, *seed);
            for b in [&mut cfg.submodularity, &mut cfg.strong_law, &mut cfg.oracle, &mut cfg.closure, &mut cfg.ap, &mut cfg.exchange] {
                *b *= scale;
            }
            if *scale == 0 {
                cfg.build_budget = 0;
            }
            let sum = audit_all(&spec, &cfg)?;
            for w in &sum.warnings {
                eprintln!("warning: {w}");
            }
            Ok(Output { report: sum.report(), ok: sum.passed(), structure: None })
        }
    }
}

fn finish_build(spec: &Spec, ga: &GenericApprox<Rational>, args: &BuildArgs, mut r: Report) -> Outcome {
    let s = ga.current();
    r.set("size", s.size())
        .set("instances", s.instance_count())
        .set("stop", format!("{:?}", ga.stop_reason()).to_lowercase())
        .set("rounds", ga.rounds())
        .set("chain", ids(ga.history().iter().copied()))
        .set("queue", ga.queue().len())
        .set("seed", ga.seed())
        .set("code", code_hex(&amalgam_core::canonical_form(s)));
    let audit = audit_richness(spec, s, ga.k())?;
    richness(&mut r, &audit, Some(BUILD_UNMET_SHOWN));
    let text = serialize_structure(s);
    match &args.out {
        Some(p) => {
            write(p, &text)?;
            Ok(Output::ok(r))
        }
        None => Ok(Output { report: r, ok: true, structure: Some(text) }),
    }
}

/// Build reports list only this many unmet obligations; `audit` lists all.
const BUILD_UNMET_SHOWN: usize = 10;

fn richness(r: &mut Report, audit: &RichnessReport, shown: Option<usize>) {
    r.set("richness.k", audit.k)
        .set("richness.satisfied", audit.satisfied)
        .set("richness.total", audit.total);
    let shown = shown.unwrap_or(usize::MAX);
    if audit.unmet.len() > shown {
        r.set("richness.unmet.omitted", audit.unmet.len() - shown);
    }
    for (i, u) in audit.unmet.iter().take(shown).enumerate() {
        r.set(format!("richness.unmet.{i:05}"), format!("A={} class={}", ids(u.a.iter().copied()), code_hex(&u.code)));
    }
}

fn suffixed(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

