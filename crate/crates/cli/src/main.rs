use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use modtower::adelic::{
    check_compatibility, conj_by_unit, conjugated_generators, embed_rational, solve_lambda,
    TruncatedAdelic, TruncatedUnit,
};
use modtower::arith::Rational;
use modtower::axioms::{run_sigma, EllipticRule, ModelHandle, Mutation, Status, DEFAULT_SAMPLE_BUDGET, DEFAULT_SEED};
use modtower::cm::{class_polynomial_from, cm_from_elliptic, reduced_forms, tp_pair, PRECISION_LADDER};
use modtower::congruence::{orbit_id_bounded, pr_map, reduce_mod, reduce_to_fundamental_domain, LevelOrbit, ModMatrix, DEFAULT_ENUM_BOUND};
use modtower::exec::Exec;
use modtower::group::{
    decompose_gl2plus, format_rational, verify_presentation, word_decompose_sl2, Classification,
    GroupElement, Word,
};
use modtower::halfplane::{act, fixed_point, in_stabilizer, point_field, HalfPlanePoint};
use modtower::hecke::{component_count, correspondence_degree, describe, same_hecke_orbit, CorrespondenceDescriptor};
use modtower::numeric::j_numeric;

const MATRIX_HELP: &str = "matrix \"a,b,c,d\" (row-major, entries integers or p/q)";
const POINT_HELP: &str = "point \"x+y√-D\" (also \"x+ysqrt-D\", \"i\", \"1+2i\")";

#[derive(Parser)]
#[command(name = "modtower", version, about = "Exact arithmetic on GL2+(Q), congruence quotients, truncated adeles, Hecke correspondences and CM points")]
struct Cli {
    /// Emit one JSON document on stdout instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Largest level enumerated for finite quotients
    #[arg(long, global = true, env = "MODTOWER_ENUM_BOUND", default_value_t = DEFAULT_ENUM_BOUND)]
    enum_bound: u32,
    /// Disable data parallelism
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// GL2+(Q) arithmetic, words and the presentation check
    #[command(subcommand)]
    Group(GroupCmd),
    /// Möbius action on the upper half-plane
    #[command(subcommand)]
    Hp(HpCmd),
    /// Principal congruence levels and orbit labels
    #[command(subcommand)]
    Level(LevelCmd),
    /// Truncated adelic elements and the rigidity solver
    #[command(subcommand)]
    Adelic(AdelicCmd),
    /// Hecke correspondences and orbits
    #[command(subcommand)]
    Hecke(HeckeCmd),
    /// CM points, class polynomials and the j-function
    #[command(subcommand)]
    Cm(CmCmd),
    /// Axiom instance checkers
    #[command(subcommand)]
    Axioms(AxiomsCmd),
}

#[derive(Args)]
struct MatrixArg {
    #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
    matrix: GroupElement,
}

#[derive(Subcommand)]
enum GroupCmd {
    /// Product of the given matrices, left to right
    Mul {
        #[arg(long = "matrix", required = true, num_args = 1, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrices: Vec<GroupElement>,
    },
    Inv(MatrixArg),
    /// Central, elliptic or non-elliptic, with the fixed point when elliptic
    Classify(MatrixArg),
    /// Evaluate a word such as "NEG S T^3 D(2/5)"
    Word {
        #[arg(long, allow_hyphen_values = true)]
        word: Word,
    },
    /// Word in S, T for SL2(Z); otherwise the GL2+ normal form
    Decompose(MatrixArg),
    /// Check every defining relation on the default parameter sample
    Verify,
}

#[derive(Subcommand)]
enum HpCmd {
    Act {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrix: GroupElement,
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        point: HalfPlanePoint,
    },
    /// Fixed point of an elliptic element
    Fix(MatrixArg),
    /// Whether g commutes with the elliptic e (so fixes its fixed point)
    Stab {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrix: GroupElement,
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        elliptic: GroupElement,
    },
}

#[derive(Subcommand)]
enum LevelCmd {
    /// Reduce an SL2(Z) element modulo N
    Reduce {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrix: GroupElement,
        #[arg(long)]
        level: u32,
    },
    /// Orbit label of a point at level N
    Orbit {
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        point: HalfPlanePoint,
        #[arg(long)]
        level: u32,
    },
    /// Image of the level-N label at level M, M | N
    Pr {
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        point: HalfPlanePoint,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        to: u32,
    },
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum AdelicCmd {
    /// Embed g at precision M
    Embed {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrix: GroupElement,
        #[arg(long)]
        precision: u32,
    },
    /// Recover lambda from images of s and t (given, or built from --lambda)
    SolveLambda {
        #[arg(long)]
        precision: u32,
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["s", "t"])]
        lambda: Option<i64>,
        /// Use -d_lambda s d_lambda^-1 for the image of s
        #[arg(long, requires = "lambda")]
        negate_s: bool,
        /// Image of s as integer entries mod M
        #[arg(long, allow_hyphen_values = true, requires = "t")]
        s: Option<GroupElement>,
        /// Image of t as integer entries mod M
        #[arg(long, allow_hyphen_values = true, requires = "s")]
        t: Option<GroupElement>,
    },
    /// Conjugate the embedding of g by d_lambda
    Twist {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        matrix: GroupElement,
        #[arg(long, allow_hyphen_values = true)]
        lambda: i64,
        #[arg(long)]
        precision: u32,
    },
}

#[derive(Subcommand)]
enum HeckeCmd {
    /// Left and right degrees of the correspondence of g at level N
    Degree {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        g: GroupElement,
        #[arg(long)]
        level: u32,
    },
    /// Number of distinct twisted curves C^mu_{g,N}
    Components {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        g: GroupElement,
        #[arg(long)]
        level: u32,
    },
    /// Whether two points are related by GL2+(Q)
    Orbit {
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        tau1: HalfPlanePoint,
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        tau2: HalfPlanePoint,
    },
}

#[derive(Subcommand)]
enum CmCmd {
    /// CM point and reduced form of an elliptic element
    Classify {
        #[arg(long, allow_hyphen_values = true, help = MATRIX_HELP)]
        e: GroupElement,
    },
    /// Class polynomial of a discriminant, |disc| <= 200
    Classpoly {
        #[arg(long, allow_hyphen_values = true)]
        disc: i64,
        /// Starting precision in bits (escalates on failure)
        #[arg(long, default_value_t = PRECISION_LADDER[0])]
        precision: u32,
    },
    /// Reduced primitive forms of a discriminant
    Forms {
        #[arg(long, allow_hyphen_values = true)]
        disc: i64,
    },
    /// The pairs related to (s1, s2) by tp
    Tp {
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        s1: HalfPlanePoint,
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        s2: HalfPlanePoint,
    },
    /// j(tau) to the given number of bits
    J {
        #[arg(long, allow_hyphen_values = true, help = POINT_HELP)]
        point: HalfPlanePoint,
        #[arg(long, default_value_t = 80)]
        precision: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Strict,
    NonStrict,
}

#[derive(Subcommand)]
enum AxiomsCmd {
    /// Run every checker and report per axiom; exit 1 if any fails
    Run {
        #[arg(long, default_value_t = 4)]
        level_bound: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
        samples: usize,
        /// none, break-center, break-fibre or break-functional
        #[arg(long, default_value = "none")]
        mutate: Mutation,
        #[arg(long, value_enum, default_value = "strict")]
        elliptic_rule: RuleArg,
    },
}

struct Out {
    json: Value,
    text: String,
    ok: bool,
}

impl Out {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Out {
            json,
            text: text.into(),
            ok: true,
        }
    }
}

type Res = Result<Out, Box<dyn std::error::Error>>;

fn matrix_json(g: &GroupElement) -> Value {
    json!(g)
}

fn point_json(p: &HalfPlanePoint) -> Value {
    let mut v = json!(p);
    v["literal"] = json!(p.to_short());
    v
}

fn orbit_text(o: &LevelOrbit) -> String {
    format!("N = {}, rep {}, coset {}", o.n, o.rep.to_short(), o.coset)
}

fn run_group(cmd: GroupCmd) -> Res {
    Ok(match cmd {
        GroupCmd::Mul { matrices } => {
            let g = matrices
                .iter()
                .fold(GroupElement::identity(), |acc, m| acc.mul(m));
            Out::new(json!({ "result": matrix_json(&g) }), g.to_string())
        }
        GroupCmd::Inv(MatrixArg { matrix }) => {
            let g = matrix.inv();
            Out::new(json!({ "result": matrix_json(&g) }), g.to_string())
        }
        GroupCmd::Classify(MatrixArg { matrix }) => {
            let class = matrix.classify();
            let (fp, text) = match class {
                Classification::Elliptic => {
                    let u = fixed_point(&matrix)?;
                    let t = format!("elliptic; fixed point {}", u.to_short());
                    (point_json(&u), t)
                }
                Classification::Central => (Value::Null, "central; acts trivially".to_string()),
                Classification::NonElliptic => (Value::Null, "non-elliptic; no fixed point in the upper half-plane".to_string()),
            };
            Out::new(
                json!({
                    "matrix": matrix_json(&matrix),
                    "classification": class,
                    "trace": format_rational(&matrix.trace()),
                    "det": format_rational(&matrix.det()),
                    "fixed_point": fp,
                }),
                text,
            )
        }
        GroupCmd::Word { word } => {
            let g = word.eval();
            Out::new(json!({ "word": word, "result": matrix_json(&g) }), g.to_string())
        }
        GroupCmd::Decompose(MatrixArg { matrix }) => {
            if matrix.is_sl2z() {
                let w = word_decompose_sl2(&matrix)?;
                Out::new(json!({ "in_sl2z": true, "word": w }), w.to_string())
            } else {
                let d = decompose_gl2plus(&matrix);
                let text = format!(
                    "{} · ({}) · D({}) · ({})",
                    format_rational(&d.scale),
                    d.left,
                    format_rational(&d.q),
                    d.right
                );
                Out::new(json!({ "in_sl2z": false, "decomposition": d }), text)
            }
        }
        GroupCmd::Verify => {
            let r = verify_presentation();
            let mut lines: Vec<String> = r
                .relations
                .iter()
                .map(|x| {
                    format!(
                        "{} {:<18} {} ({} instances)",
                        if x.passed { "PASS" } else { "FAIL" },
                        x.id,
                        x.statement,
                        x.instances
                    )
                })
                .collect();
            lines.extend(r.warnings.iter().map(|w| format!("warning: {w}")));
            Out {
                ok: r.all_pass(),
                json: json!(r),
                text: lines.join("\n"),
            }
        }
    })
}

fn run_hp(cmd: HpCmd) -> Res {
    Ok(match cmd {
        HpCmd::Act { matrix, point } => {
            let u = act(&matrix, &point);
            Out::new(json!({ "result": point_json(&u) }), u.to_short())
        }
        HpCmd::Fix(MatrixArg { matrix }) => {
            let u = fixed_point(&matrix)?;
            let (d, [a, b, c]) = point_field(&u);
            Out::new(
                json!({
                    "fixed_point": point_json(&u),
                    "field": d,
                    "minimal_polynomial": [a.to_string(), b.to_string(), c.to_string()],
                }),
                u.to_short(),
            )
        }
        HpCmd::Stab { matrix, elliptic } => {
            let inside = in_stabilizer(&matrix, &elliptic)?;
            let u = fixed_point(&elliptic)?;
            Out::new(
                json!({ "in_stabilizer": inside, "fixed_point": point_json(&u) }),
                format!("{inside}"),
            )
        }
    })
}

fn run_level(cmd: LevelCmd, bound: u32) -> Res {
    Ok(match cmd {
        LevelCmd::Reduce { matrix, level } => {
            let r = reduce_mod(&matrix, level)?;
            Out::new(json!({ "N": level, "result": r }), r.to_string())
        }
        LevelCmd::Orbit { point, level } => {
            let o = orbit_id_bounded(&point, level, bound)?;
            let (g, _) = reduce_to_fundamental_domain(&point);
            Out::new(
                json!({ "orbit": o, "reduction": matrix_json(&g) }),
                orbit_text(&o),
            )
        }
        LevelCmd::Pr { point, level, to } => {
            let o = orbit_id_bounded(&point, level, bound)?;
            let p = pr_map(&o, to)?;
            Out::new(json!({ "from": o, "to": p }), orbit_text(&p))
        }
    })
}

fn adelic_text(x: &TruncatedAdelic) -> String {
    let mut lines = vec![format!("M = {}, q = {}", x.precision(), format_rational(x.q()))];
    lines.extend(x.layers().iter().map(|(m, l)| format!("  {m}: {l}")));
    lines.join("\n")
}

fn small_matrix(g: &GroupElement, m: u32) -> Result<ModMatrix, Box<dyn std::error::Error>> {
    let e = g
        .integer_entries()
        .and_then(|e| {
            let v: Option<Vec<i64>> = e.iter().map(|x| i64::try_from(x).ok()).collect();
            v
        })
        .ok_or("image matrices must have integer entries")?;
    Ok(ModMatrix::new(m, [e[0], e[1], e[2], e[3]])?)
}

fn run_adelic(cmd: AdelicCmd) -> Res {
    Ok(match cmd {
        AdelicCmd::Embed { matrix, precision } => {
            let x = embed_rational(&matrix, precision)?;
            let compatible = check_compatibility(&x);
            Out::new(
                json!({ "embedding": x.to_json(), "compatible": compatible }),
                adelic_text(&x),
            )
        }
        AdelicCmd::SolveLambda { precision, lambda, negate_s, s, t } => {
            let (s_img, t_img) = match (lambda, s, t) {
                (Some(l), _, _) => {
                    let (s, t) = conjugated_generators(&TruncatedUnit::new(l, precision)?);
                    let s = if negate_s {
                        let neg = embed_rational(&GroupElement::neg_identity(), precision)?;
                        neg.mul(&s)?
                    } else {
                        s
                    };
                    (s, t)
                }
                (None, Some(s), Some(t)) => (
                    TruncatedAdelic::from_top(Rational::from_integer(1.into()), small_matrix(&s, precision)?),
                    TruncatedAdelic::from_top(Rational::from_integer(1.into()), small_matrix(&t, precision)?),
                ),
                _ => return Err("give --lambda, or both --s and --t".into()),
            };
            let sol = solve_lambda(&s_img, &t_img)?;
            let text = format!(
                "lambda = {} mod {}; s' sign {:+}; (s't')^3 = {}I{}",
                sol.lambda.value(),
                sol.lambda.modulus(),
                sol.s_sign,
                if sol.cube_sign > 0 { "+" } else { "-" },
                if sol.sign_discrepancy { " (sign differs from (st)^3 = -I)" } else { "" }
            );
            Out::new(json!(sol), text)
        }
        AdelicCmd::Twist { matrix, lambda, precision } => {
            let x = embed_rational(&matrix, precision)?;
            let y = conj_by_unit(&x, &TruncatedUnit::new(lambda, precision)?)?;
            Out::new(json!({ "result": y.to_json() }), adelic_text(&y))
        }
    })
}

fn run_hecke(cmd: HeckeCmd, bound: u32, exec: Exec) -> Res {
    Ok(match cmd {
        HeckeCmd::Degree { g, level } => {
            let desc = CorrespondenceDescriptor::with_bound(&g, level, bound)?;
            let r = correspondence_degree(&desc, exec);
            let text = format!(
                "{}\ndegree (left, right) = ({}, {}){}",
                describe(&desc),
                r.left,
                r.right,
                if r.stable { "" } else { " (not stable across the trace)" }
            );
            Out::new(json!({ "descriptor": desc, "degree": r }), text)
        }
        HeckeCmd::Components { g, level } => {
            let desc = CorrespondenceDescriptor::with_bound(&g, level, bound)?;
            let r = component_count(&desc, exec)?;
            let text = format!(
                "{}\ncomponents = {} of phi(N) = {}{}",
                describe(&desc),
                r.count,
                r.phi,
                if r.exact { "" } else { " (upper bound)" }
            );
            Out::new(json!({ "descriptor": desc, "components": r }), text)
        }
        HeckeCmd::Orbit { tau1, tau2 } => {
            let r = same_hecke_orbit(&tau1, &tau2);
            let text = match &r.witness {
                Some(g) => format!("same Hecke orbit; witness {g}"),
                None => format!("different Hecke orbits (fields Q(√-{}) and Q(√-{}))", r.field1, r.field2),
            };
            Out::new(json!(r), text)
        }
    })
}

fn run_cm(cmd: CmCmd) -> Res {
    Ok(match cmd {
        CmCmd::Classify { e } => {
            let (tau, cm) = cm_from_elliptic(&e)?;
            let (a, b, c) = cm.form;
            Out::new(
                json!({ "point": point_json(&tau), "cm": cm }),
                format!("{}; disc {}; reduced form ({a},{b},{c})", tau.to_short(), cm.disc),
            )
        }
        CmCmd::Classpoly { disc, precision } => {
            let h = class_polynomial_from(disc, precision)?;
            Out::new(json!(h), h.to_literal())
        }
        CmCmd::Forms { disc } => {
            let forms = reduced_forms(disc)?;
            let text = forms
                .iter()
                .map(|f| format!("({},{},{})", f.form.0, f.form.1, f.form.2))
                .collect::<Vec<_>>()
                .join(" ");
            Out::new(
                json!({ "disc": disc, "class_number": forms.len(), "forms": forms }),
                format!("h = {}: {text}", forms.len()),
            )
        }
        CmCmd::Tp { s1, s2 } => {
            let pairs = tp_pair(&s1, &s2)?;
            let text = pairs
                .iter()
                .map(|(a, b)| format!("({}, {})", a.to_short(), b.to_short()))
                .collect::<Vec<_>>()
                .join("\n");
            let js: Vec<Value> = pairs.iter().map(|(a, b)| json!([point_json(a), point_json(b)])).collect();
            Out::new(json!({ "pairs": js }), text)
        }
        CmCmd::J { point, precision } => {
            let j = j_numeric(&point, precision)?;
            Out::new(
                json!(j),
                format!("{:.12e} + {:.12e}i  (±2^-{})", j.re, j.im, j.bits),
            )
        }
    })
}

fn run_axioms(cmd: AxiomsCmd, exec: Exec) -> Res {
    let AxiomsCmd::Run { level_bound, seed, samples, mutate, elliptic_rule } = cmd;
    let model = ModelHandle {
        level_bound,
        sample_budget: samples,
        seed,
        mutation: mutate,
        elliptic_rule: match elliptic_rule {
            RuleArg::Strict => EllipticRule::Strict,
            RuleArg::NonStrict => EllipticRule::NonStrict,
        },
        exec,
    };
    let report = run_sigma(&model)?;
    let mut lines = Vec::new();
    for a in &report.axioms {
        let status = match a.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let mut line = format!("{status} {:<16} samples {}", a.id, a.samples);
        if let Some(w) = &a.witness {
            line.push_str(&format!("\n     witness {}", serde_json::to_string(w)?));
        }
        if a.status == Status::Skipped {
            if let Some(n) = &a.note {
                line.push_str(&format!("  ({n})"));
            }
        }
        lines.push(line);
    }
    lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    let failed = report.failures().count();
    lines.push(if failed == 0 {
        "all checked axioms pass".to_string()
    } else {
        format!("{failed} axiom(s) failed")
    });
    Ok(Out {
        ok: report.passed(),
        json: json!(report),
        text: lines.join("\n"),
    })
}

fn main() -> ExitCode {
    let json_mode = std::env::args().any(|a| a == "--json");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if json_mode && code != 0 {
                println!("{}", json!({ "error": e.kind().to_string(), "kind": "usage", "message": e.to_string() }));
            }
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let bound = cli.enum_bound;
    let result = match cli.cmd {
        Cmd::Group(c) => run_group(c),
        Cmd::Hp(c) => run_hp(c),
        Cmd::Level(c) => run_level(c, bound),
        Cmd::Adelic(c) => run_adelic(c),
        Cmd::Hecke(c) => run_hecke(c, bound, exec),
        Cmd::Cm(c) => run_cm(c),
        Cmd::Axioms(c) => run_axioms(c, exec),
    };
    match result {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            } else {
                println!("{}", out.text);
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "error": e.to_string(), "kind": "domain" }));
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
