mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cxr_core::concept::{load_external_mentions, load_lexicon, validate_mentions, Lexicon};
use cxr_core::eval::{localization_sweep, prf1, roc_auc, roc_points, write_loc_csv};
use cxr_core::labeler::{label_corpus, load_label_tsv, write_label_csv, write_label_tsv, LabelConfig};
use cxr_core::localize::{boxes_from_heatmap, load_boxes, load_heatmaps, parse_boxes, parse_detections, write_detections, BBox};
use cxr_core::negation::{load_rules, RuleSet};
use cxr_core::report::{load_corpus, load_dependency_file};
use cxr_core::selftest::run_selftest;
use cxr_core::stats::{cooccurrence_matrix, label_counts, patient_split, write_cooccurrence_csv};
use cxr_core::{Error, Finding, LabelSet};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "cxr", version, about = "Chest X-ray report labeling and localization scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, env = "CXR_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Override one config key; may be repeated, later ones win.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Label set: x8 or x14.
    #[arg(long, global = true)]
    label_set: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Mine per-report labels from a corpus and its dependency graphs.
    Label {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Dependency graph file; may be repeated.
        #[arg(long)]
        deps: Vec<PathBuf>,
        /// Extra concept mentions from an external recognizer.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Propagate conjunct dependencies before applying rules.
        #[arg(long)]
        propagate: bool,
        /// Output label table (TSV).
        #[arg(long)]
        tsv: PathBuf,
        /// Output wide 0/1 table (CSV).
        #[arg(long)]
        csv: PathBuf,
    },
    /// Per-class precision, recall and F1 of predicted labels against gold.
    EvalNlp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-class ROC AUC of image scores against 0/1 labels.
    Auc {
        #[command(flatten)]
        common: Common,
        /// CSV: `image_id,<Class>,...` with one score column per class.
        #[arg(long)]
        scores: PathBuf,
        /// CSV in the same layout with 0/1 entries.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write ROC operating points as `class,fpr,tpr`.
        #[arg(long)]
        roc_out: Option<PathBuf>,
    },
    /// Generate boxes from heatmaps by thresholding.
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        heatmaps: PathBuf,
        /// Comma-separated thresholds in [0, 255].
        #[arg(long)]
        thresholds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localization accuracy and false positives over a threshold grid.
    EvalLoc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// iou, iobb or both.
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated overlap thresholds in (0, 1).
        #[arg(long)]
        grid: Option<String>,
        /// Number of images for the false-positive average.
        #[arg(long)]
        images: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label counts and the co-occurrence matrix.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Label table (TSV) as written by `label`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        counts_out: Option<PathBuf>,
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Patient-level train/val/test split.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        /// Comma-separated train,val,test fractions.
        #[arg(long)]
        fractions: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in kernel property checks.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    /// Bad or unreadable input; exit code 2.
    Input(String),
    /// A check or evaluation did not pass; exit code 1.
    Eval(String),
}

type CliResult<T> = Result<T, Failure>;

fn describe(e: &Error) -> String {
    match e {
        Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
            format!("not found: {}", path.display())
        }
        Error::Io { path, source } => format!("{}: {source}", path.display()),
        other => other.to_string(),
    }
}

fn input(ctx: &'static str) -> impl Fn(Error) -> Failure {
    move |e| Failure::Input(format!("{ctx}: {}", describe(&e)))
}

fn resolve(common: &Common, flags: &[(&str, Option<String>)]) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| {
            let msg = if e.kind() == std::io::ErrorKind::NotFound {
                format!("not found: {}", path.display())
            } else {
                format!("{}: {e}", path.display())
            };
            Failure::Input(format!("config: {msg}"))
        })?;
        cfg.apply_file(&text).map_err(|e| Failure::Input(format!("config: {e}")))?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("config: expected KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v).map_err(|e| Failure::Input(format!("config: {e}")))?;
    }
    let label_set = ("label_set", common.label_set.clone());
    for (k, v) in flags.iter().chain([&label_set]) {
        if let Some(v) = v {
            cfg.set(k, v).map_err(|e| Failure::Input(format!("config: {e}")))?;
        }
    }
    cfg.validate().map_err(|e| Failure::Input(format!("config: {e}")))?;
    let mut err = std::io::stderr().lock();
    for line in cfg.render().lines() {
        let _ = writeln!(err, "# {line}");
    }
    Ok(cfg)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("output: {}: {e}", path.display())))
}

fn read_text(path: &Path, ctx: &'static str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input(ctx)(Error::Io { path: path.to_path_buf(), source: e }))
}

fn cmd_label(
    common: &Common,
    corpus: &Path,
    deps: &[PathBuf],
    external: &Option<PathBuf>,
    lexicon: &Option<PathBuf>,
    rules: &Option<PathBuf>,
    propagate: bool,
    tsv: &Path,
    csv: &Path,
) -> CliResult<()> {
    let cfg = resolve(
        common,
        &[
            ("lexicon", path_flag(lexicon)),
            ("rules", path_flag(rules)),
            ("propagate", propagate.then(|| "true".to_string())),
        ],
    )?;
    let lex = match &cfg.lexicon {
        Some(p) => load_lexicon(p).map_err(input("lexicon"))?,
        None => Lexicon::builtin(),
    };
    let ruleset = match &cfg.rules {
        Some(p) => load_rules(p).map_err(input("rules"))?,
        None => RuleSet::builtin(),
    };
    if cfg.label_set == LabelSet::X14 {
        let covered = lex.covered_findings();
        let missing: Vec<&str> = LabelSet::X14
            .classes()
            .iter()
            .filter(|f| !covered.contains(f))
            .map(|f| f.name())
            .collect();
        if !missing.is_empty() {
            eprintln!("warning: no lexicon coverage for x14 classes: {}", missing.join(", "));
        }
    }
    let mut corpus = load_corpus(corpus).map_err(input("corpus"))?;
    for d in deps {
        let graphs = load_dependency_file(d).map_err(input("deps"))?;
        corpus.attach_graphs(graphs).map_err(input("deps"))?;
    }
    let ext = match external {
        Some(p) => {
            let m = load_external_mentions(p).map_err(input("external"))?;
            validate_mentions(&corpus, &m).map_err(input("external"))?;
            m
        }
        None => Vec::new(),
    };
    let config = LabelConfig {
        label_set: cfg.label_set,
        propagate_conjuncts: cfg.propagate,
    };
    let mut labels = label_corpus(&corpus, &ext, &lex, &ruleset, &config).map_err(input("label"))?;
    labels.sort_by(|a, b| a.report_id.cmp(&b.report_id));
    write_file(tsv, &write_label_tsv(&labels, cfg.label_set))?;
    write_file(csv, &write_label_csv(&labels, cfg.label_set))
}

fn cmd_eval_nlp(common: &Common, predicted: &Path, gold: &Path, out: &Option<PathBuf>) -> CliResult<()> {
    let cfg = resolve(common, &[])?;
    let p = load_label_tsv(predicted, cfg.label_set).map_err(input("predicted"))?;
    let g = load_label_tsv(gold, cfg.label_set).map_err(input("gold"))?;
    let res = prf1(&p, &g, cfg.label_set).map_err(input("eval-nlp"))?;
    emit(out, &res.to_csv())
}

/// Wide CSV `id,<Class>,...` as class name -> id -> value.
fn read_wide_csv(path: &Path, ctx: &'static str) -> CliResult<BTreeMap<Finding, BTreeMap<String, f64>>> {
    let text = read_text(path, ctx)?;
    let bad = |line: usize, msg: String| Failure::Input(format!("{ctx}: line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let classes: Vec<Finding> = header
        .split(',')
        .skip(1)
        .map(|c| c.parse::<Finding>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(1, e))?;
    let mut out: BTreeMap<Finding, BTreeMap<String, f64>> = classes.iter().map(|c| (*c, BTreeMap::new())).collect();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != classes.len() + 1 {
            return Err(bad(i + 1, format!("expected {} fields, found {}", classes.len() + 1, f.len())));
        }
        for (c, v) in classes.iter().zip(&f[1..]) {
            let v: f64 = v
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(i + 1, format!("bad value `{v}`")))?;
            if out.get_mut(c).unwrap().insert(f[0].trim().to_string(), v).is_some() {
                return Err(bad(i + 1, format!("duplicate id `{}`", f[0].trim())));
            }
        }
    }
    Ok(out)
}

fn cmd_auc(
    common: &Common,
    scores: &Path,
    labels: &Path,
    out: &Option<PathBuf>,
    roc_out: &Option<PathBuf>,
) -> CliResult<()> {
    let cfg = resolve(common, &[])?;
    let s = read_wide_csv(scores, "scores")?;
    let l = read_wide_csv(labels, "labels")?;
    let mut table = String::from("class,auc\n");
    let mut roc = String::from("class,fpr,tpr\n");
    for class in cfg.label_set.classes() {
        let (Some(sc), Some(lb)) = (s.get(class), l.get(class)) else {
            return Err(Failure::Input(format!("auc: column {} missing from scores or labels", class.name())));
        };
        if sc.len() != lb.len() || sc.keys().any(|k| !lb.contains_key(k)) {
            return Err(Failure::Input("auc: scores and labels cover different ids".into()));
        }
        let mut ys = Vec::with_capacity(sc.len());
        for v in lb.values() {
            if *v != 0.0 && *v != 1.0 {
                return Err(Failure::Input(format!("labels: {} holds a value other than 0/1", class.name())));
            }
            ys.push(*v as u8);
        }
        let xs: Vec<f64> = sc.values().copied().collect();
        match roc_auc(&xs, &ys) {
            Ok(a) => {
                table.push_str(&format!("{},{a:.4}\n", class.name()));
                for (fpr, tpr) in roc_points(&xs, &ys).map_err(input("auc"))? {
                    roc.push_str(&format!("{},{fpr},{tpr}\n", class.name()));
                }
            }
            Err(Error::DegenerateLabels) => table.push_str(&format!("{},NA\n", class.name())),
            Err(e) => return Err(input("auc")(e)),
        }
    }
    if let Some(p) = roc_out {
        write_file(p, &roc)?;
    }
    emit(out, &table)
}

fn cmd_localize(common: &Common, heatmaps: &Path, thresholds: &Option<String>, out: &Option<PathBuf>) -> CliResult<()> {
    let cfg = resolve(common, &[("thresholds", thresholds.clone())])?;
    let mut maps = load_heatmaps::<f64>(heatmaps).map_err(input("heatmaps"))?;
    maps.sort_by(|a, b| (a.image_id.as_str(), a.class).cmp(&(b.image_id.as_str(), b.class)));
    let dets: Vec<_> = maps.iter().flat_map(|h| boxes_from_heatmap(h, &cfg.thresholds)).collect();
    emit(out, &write_detections(&dets))
}

/// Detection rows may carry a trailing threshold column; plain box rows are
/// accepted too.
fn load_detection_boxes(path: &Path) -> CliResult<Vec<BBox<f64>>> {
    let text = read_text(path, "detections")?;
    let seven = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.split('\t').count() == 7);
    if seven {
        Ok(parse_detections::<f64>(&text)
            .map_err(input("detections"))?
            .into_iter()
            .map(|d| d.bbox)
            .collect())
    } else {
        parse_boxes(&text).map_err(input("detections"))
    }
}

fn cmd_eval_loc(
    common: &Common,
    detections: &Path,
    gt: &Path,
    flags: [(&str, Option<String>); 3],
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let cfg = resolve(common, &flags)?;
    let dets = load_detection_boxes(detections)?;
    let gts = load_boxes::<f64>(gt).map_err(input("gt"))?;
    let mut results = Vec::new();
    for mode in cfg.mode.modes() {
        let grid = cfg.grid.clone().unwrap_or_else(|| mode.default_grid().to_vec());
        results.extend(localization_sweep(&dets, &gts, mode, &grid, cfg.images).map_err(input("eval-loc"))?);
    }
    emit(out, &write_loc_csv(&results, cfg.label_set))
}

fn cmd_stats(
    common: &Common,
    labels: &Path,
    counts_out: &Option<PathBuf>,
    matrix_out: &Option<PathBuf>,
) -> CliResult<()> {
    let cfg = resolve(common, &[])?;
    let l = load_label_tsv(labels, cfg.label_set).map_err(input("labels"))?;
    let counts = label_counts(&l, cfg.label_set).map_err(input("stats"))?.to_csv();
    let matrix = write_cooccurrence_csv(&cooccurrence_matrix(&l, cfg.label_set).map_err(input("stats"))?, cfg.label_set);
    match (counts_out, matrix_out) {
        (None, None) => {
            print!("{counts}\n{matrix}");
            Ok(())
        }
        _ => {
            emit(counts_out, &counts)?;
            emit(matrix_out, &matrix)
        }
    }
}

fn cmd_split(
    common: &Common,
    corpus: &Path,
    seed: &Option<String>,
    fractions: &Option<String>,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    let cfg = resolve(common, &[("seed", seed.clone()), ("fractions", fractions.clone())])?;
    let corpus = load_corpus(corpus).map_err(input("corpus"))?;
    let mut by_patient: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in corpus.reports() {
        by_patient
            .entry(r.patient_id().to_string())
            .or_default()
            .push(r.report_id().to_string());
    }
    let patients: Vec<(String, Vec<String>)> = by_patient.into_iter().collect();
    let split = patient_split(&patients, cfg.fractions, cfg.seed).map_err(input("split"))?;
    emit(out, &split.to_tsv())
}

fn cmd_selftest(common: &Common) -> CliResult<()> {
    resolve(common, &[])?;
    let outcomes = run_selftest();
    let mut failed = 0;
    for c in &outcomes {
        println!("{}  {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Eval(format!("selftest: {failed} of {} checks failed", outcomes.len())))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Label {
            common,
            corpus,
            deps,
            external,
            lexicon,
            rules,
            propagate,
            tsv,
            csv,
        } => cmd_label(common, corpus, deps, external, lexicon, rules, *propagate, tsv, csv),
        Command::EvalNlp {
            common,
            predicted,
            gold,
            out,
        } => cmd_eval_nlp(common, predicted, gold, out),
        Command::Auc {
            common,
            scores,
            labels,
            out,
            roc_out,
        } => cmd_auc(common, scores, labels, out, roc_out),
        Command::Localize {
            common,
            heatmaps,
            thresholds,
            out,
        } => cmd_localize(common, heatmaps, thresholds, out),
        Command::EvalLoc {
            common,
            detections,
            gt,
            mode,
            grid,
            images,
            out,
        } => cmd_eval_loc(
            common,
            detections,
            gt,
            [("mode", mode.clone()), ("grid", grid.clone()), ("images", images.clone())],
            out,
        ),
        Command::Stats {
            common,
            labels,
            counts_out,
            matrix_out,
        } => cmd_stats(common, labels, counts_out, matrix_out),
        Command::Split {
            common,
            corpus,
            seed,
            fractions,
            out,
        } => cmd_split(common, corpus, seed, fractions, out),
        Command::Selftest { common } => cmd_selftest(common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Eval(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
