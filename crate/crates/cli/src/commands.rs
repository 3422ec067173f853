//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use loopgrade_classify::study::TopkStudy;
use loopgrade_classify::{
    evaluate, feature_importance, random_search, topk_study, train as fit, EvalReport, FeatureSet,
    Hyper, Kind, Model, SearchResult, Samples,
};
use loopgrade_core::datagen::{
    generate_dataset, samples_from_csv, sha256_hex, DatasetSidecar, Label, LabeledSample,
};
use loopgrade_core::features::{FEATURE_COUNT, FEATURE_NAMES};
use loopgrade_core::identify::validation_processes;
use loopgrade_core::process::{PidTuning, RejectionResponse};
use loopgrade_core::seeding::derive_seed;
use loopgrade_core::tuning::{build_mesh, MeshSpec, ReferenceMesh, TuningSettings};

use crate::assess::assess_record;
use crate::suites::{higher_order_suite, sopdt_suite, SuiteReport};
use crate::svg::{grouped_bars, line_chart, Line, BLACK, GREEN, RED};
use crate::{
    AssessArgs, Failure, GendataArgs, MeshArgs, OrFail, TrainArgs, ValidateArgs, EXIT_NUMERIC,
};

/// Desk-scale dataset sizes.
pub const DESK_SIZES: (usize, usize) = (6000, 1000);
/// Paper-scale dataset sizes.
pub const FULL_SIZES: (usize, usize) = (60000, 10000);
/// Fixed processes of the validation suites.
pub const SUITE_PROCESSES: [(f64, f64); 2] = [(0.4, 0.5), (0.3, 0.9)];

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .config()?;
    }
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .config()
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .config()
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

/// Embeds the provenance triple as an SVG comment.
fn stamp(svg: String, seed: u64, mesh_id: Option<&str>, dataset: Option<&str>) -> String {
    let comment = format!(
        "<!-- seed={seed} mesh_id={} dataset_sha256={} -->\n",
        mesh_id.unwrap_or("none"),
        dataset.unwrap_or("none")
    );
    match svg.find('\n') {
        Some(i) => format!("{}{}{}", &svg[..=i], comment, &svg[i + 1..]),
        None => svg,
    }
}

pub fn load_mesh(path: &Path) -> Result<ReferenceMesh, Failure> {
    ReferenceMesh::load(path)
        .with_context(|| format!("loading mesh {}", path.display()))
        .config()
}

pub fn load_model(path: &Path) -> Result<Model, Failure> {
    Model::from_json(&read(path)?)
        .with_context(|| format!("loading model {}", path.display()))
        .config()
}

/// Parses `a:b,c:d` into L1 and L2 ranges.
pub fn parse_range(s: &str) -> anyhow::Result<((f64, f64), (f64, f64))> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("--range expects L1lo:L1hi,L2lo:L2hi, got {s:?}");
    }
    let pair = |p: &str| -> anyhow::Result<(f64, f64)> {
        let (a, b) = p
            .split_once(':')
            .ok_or_else(|| anyhow!("range {p:?} needs lo:hi"))?;
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        if !(a <= b) {
            bail!("range {p:?} is empty");
        }
        Ok((a, b))
    };
    Ok((pair(parts[0])?, pair(parts[1])?))
}

pub fn mesh(args: &MeshArgs) -> Result<(), Failure> {
    let spec = match &args.range {
        Some(r) => {
            let (l1, l2) = parse_range(r).config()?;
            if !(args.step > 0.0) {
                return Err(anyhow!("--step must be positive")).config();
            }
            MeshSpec::from_ranges(l1, l2, args.step)
        }
        None => MeshSpec::default(),
    };
    if spec.is_empty() {
        return Err(anyhow!("mesh range is empty")).config();
    }
    eprintln!("optimizing {} reference tunings (seed {})", spec.len(), args.seed);
    let mesh = build_mesh(&spec, args.seed, &TuningSettings::default()).numeric()?;
    let path = mesh
        .save(&args.out)
        .with_context(|| format!("saving mesh to {}", args.out.display()))
        .config()?;
    println!("{:>5} {:>5} {:>9} {:>9} {:>9} {:>7} {:>7} {:>8}", "L1", "L2", "kr", "Ti", "Td", "Am", "phim", "IAE");
    for e in &mesh.entries {
        println!(
            "{:>5.2} {:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>7.3} {:>7.2} {:>8.4}",
            e.process.l1,
            e.process.l2,
            e.tuning.kr,
            e.tuning.ti,
            e.tuning.td,
            e.margins.gain_margin,
            e.margins.phase_margin,
            e.iae_ref
        );
    }
    println!("mesh_id {}", mesh.mesh_id());
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct SplitSidecar<'a> {
    split: &'a str,
    master_seed: u64,
    #[serde(flatten)]
    dataset: DatasetSidecar,
}

pub fn gendata(args: &GendataArgs) -> Result<(), Failure> {
    let mesh = load_mesh(&args.mesh)?;
    let (dt, dv) = if args.full_scale { FULL_SIZES } else { DESK_SIZES };
    let sizes = [("train", args.train.unwrap_or(dt), 1), ("val", args.val.unwrap_or(dv), 2)];
    for (split, n, stream) in sizes {
        if n == 0 || n % 2 != 0 {
            return Err(anyhow!("{split} size must be even and positive, got {n}")).config();
        }
        let seed = derive_seed(args.seed, stream);
        eprintln!("generating {n} {split} samples");
        let ds = generate_dataset(&mesh, n, seed)
            .with_context(|| format!("generating {split} set"))
            .numeric()?;
        let csv = ds.to_csv();
        write(&args.out.join(format!("{split}.csv")), &csv)?;
        let side = SplitSidecar {
            split,
            master_seed: args.seed,
            dataset: ds.sidecar(),
        };
        write(&args.out.join(format!("{split}.json")), json(&side))?;
        let st = ds.stats;
        println!(
            "{split}: {} samples ({} OK / {} NOK) from {} attempts, {} unusable; raw OK fraction {:.3}; P(margins in band | e_dist < 0.1) = {:.3} over {} close samples; sha256 {}",
            n,
            ds.count(Label::Ok),
            ds.count(Label::Nok),
            st.attempts,
            st.unusable,
            st.ok_fraction(),
            st.band_given_close(),
            st.close,
            side.dataset.dataset_sha256
        );
    }
    Ok(())
}

/// A feature-set request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSpec {
    All30,
    Popular12,
    TopK(usize),
}

impl FeatureSpec {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all30" | "all" => Ok(Self::All30),
            "popular12" | "popular" => Ok(Self::Popular12),
            other => {
                let k = other
                    .strip_prefix("topk:")
                    .ok_or_else(|| anyhow!("unknown feature set {s:?}"))?
                    .parse::<usize>()?;
                if !(1..=FEATURE_COUNT).contains(&k) {
                    bail!("topk:K needs 1 <= K <= {FEATURE_COUNT}");
                }
                Ok(Self::TopK(k))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::All30 => "all30".into(),
            Self::Popular12 => "popular12".into(),
            Self::TopK(k) => format!("top{k}"),
        }
    }
}

pub fn parse_kinds(list: &[String]) -> anyhow::Result<Vec<Kind>> {
    if list.iter().any(|k| k.eq_ignore_ascii_case("all")) {
        return Ok(Kind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for k in list {
        let kind: Kind = k.parse()?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

/// Dataset loaded from disk with its provenance.
pub struct LoadedData {
    pub samples: Vec<LabeledSample>,
    pub sha256: String,
    pub mesh_id: Option<String>,
}

pub fn load_dataset(dir: &Path, split: &str) -> Result<LoadedData, Failure> {
    let path = dir.join(format!("{split}.csv"));
    let text = read(&path)?;
    let samples = samples_from_csv(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .config()?;
    let mesh_id = fs::read_to_string(dir.join(format!("{split}.json")))
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v.get("mesh_id").and_then(|m| m.as_str()).map(str::to_string));
    Ok(LoadedData {
        samples,
        sha256: sha256_hex(text.as_bytes()),
        mesh_id,
    })
}

#[derive(Serialize)]
struct TrainReport<'a> {
    seed: u64,
    mesh_id: Option<&'a str>,
    dataset_sha256: &'a str,
    validation_sha256: &'a str,
    kind: Kind,
    features: String,
    feature_indices: &'a [usize],
    hyper: Hyper,
    search: Option<&'a SearchResult>,
    validation: &'a EvalReport,
    notes: &'a [String],
}

#[derive(Serialize)]
struct SummaryRow {
    kind: Kind,
    features: String,
    accuracy: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    mesh_id: Option<&'a str>,
    dataset_sha256: &'a str,
    validation_sha256: &'a str,
    results: Vec<SummaryRow>,
}

/// Ranking used for `topk:K`: the kind's own importance when tree-based,
/// AdaBoost's otherwise.
fn ranking_for(kind: Kind, train: &[LabeledSample], seed: u64) -> anyhow::Result<Vec<usize>> {
    let ranker = if kind.is_tree_based() { kind } else { Kind::AdaBoost };
    let all: Vec<usize> = (0..FEATURE_COUNT).collect();
    let model = fit(Hyper::default_for(ranker), &Samples::from_labeled(train, &all)?, seed)?;
    Ok(feature_importance(&model)?.iter().map(|i| i.feature).collect())
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let kinds = parse_kinds(&args.kind).config()?;
    let specs = args
        .features
        .iter()
        .map(|s| FeatureSpec::parse(s))
        .collect::<anyhow::Result<Vec<_>>>()
        .config()?;
    if args.folds < 2 && args.search > 0 {
        return Err(anyhow!("--folds must be at least 2")).config();
    }
    let tr = load_dataset(&args.data, "train")?;
    let va = load_dataset(&args.data, "val")?;
    let mesh_id = tr.mesh_id.as_deref();
    let mut rows = Vec::new();
    let mut failed = 0;
    for &kind in &kinds {
        for spec in &specs {
            let name = spec.name();
            let result = train_one(args, kind, *spec, &tr, &va);
            match result {
                Ok((model, report, search)) => {
                    let stem = format!("{}_{}", kind.name(), name);
                    let rep = TrainReport {
                        seed: args.seed,
                        mesh_id,
                        dataset_sha256: &tr.sha256,
                        validation_sha256: &va.sha256,
                        kind,
                        features: name.clone(),
                        feature_indices: &model.features,
                        hyper: model.hyper,
                        search: search.as_ref(),
                        validation: &report,
                        notes: &model.notes,
                    };
                    write(&args.out.join(format!("model_{stem}.json")), model.to_json() + "\n")?;
                    write(&args.out.join(format!("report_{stem}.json")), json(&rep))?;
                    let text = format!(
                        "{kind} on {name}\nseed {} mesh_id {} dataset {}\n\n{}",
                        args.seed,
                        mesh_id.unwrap_or("none"),
                        tr.sha256,
                        report.to_text()
                    );
                    write(&args.out.join(format!("report_{stem}.txt")), &text)?;
                    println!("{:<13} {:<10} accuracy {:.4}", kind.name(), name, report.accuracy);
                    rows.push(SummaryRow {
                        kind,
                        features: name,
                        accuracy: Some(report.accuracy),
                        error: None,
                    });
                }
                Err(e) => {
                    failed += 1;
                    eprintln!("{kind} on {name} failed: {e:#}");
                    rows.push(SummaryRow {
                        kind,
                        features: name,
                        accuracy: None,
                        error: Some(format!("{e:#}")),
                    });
                }
            }
        }
    }
    if !args.no_plots {
        let cats: Vec<String> = kinds.iter().map(|k| k.name().to_string()).collect();
        let series: Vec<(String, Vec<Option<f64>>)> = specs
            .iter()
            .map(|s| {
                let n = s.name();
                let vals = kinds
                    .iter()
                    .map(|k| {
                        rows.iter()
                            .find(|r| r.kind == *k && r.features == n)
                            .and_then(|r| r.accuracy)
                    })
                    .collect();
                (n, vals)
            })
            .collect();
        let svg = grouped_bars("Validation accuracy", &cats, &series, (0.5, 1.0), "accuracy");
        write(&args.out.join("accuracy.svg"), stamp(svg, args.seed, mesh_id, Some(&tr.sha256)))?;
    }
    let summary = Summary {
        seed: args.seed,
        mesh_id,
        dataset_sha256: &tr.sha256,
        validation_sha256: &va.sha256,
        results: rows,
    };
    write(&args.out.join("summary.json"), json(&summary))?;
    if args.study {
        run_study(args, &kinds, &tr, &va)?;
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            error: anyhow!("{failed} training run(s) failed"),
        });
    }
    Ok(())
}

fn train_one(
    args: &TrainArgs,
    kind: Kind,
    spec: FeatureSpec,
    tr: &LoadedData,
    va: &LoadedData,
) -> anyhow::Result<(Model, EvalReport, Option<SearchResult>)> {
    let features = match spec {
        FeatureSpec::All30 => FeatureSet::All30.indices(),
        FeatureSpec::Popular12 => FeatureSet::Popular12.indices(),
        FeatureSpec::TopK(k) => {
            let mut f: Vec<usize> = ranking_for(kind, &tr.samples, args.seed)?[..k].to_vec();
            f.sort_unstable();
            f
        }
    };
    let train_set = Samples::from_labeled(&tr.samples, &features)?;
    let val_set = Samples::from_labeled(&va.samples, &features)?;
    let search = if args.search > 0 {
        Some(random_search(kind, &train_set, args.search, args.folds, args.seed)?)
    } else {
        None
    };
    let hyper = search.as_ref().map_or(Hyper::default_for(kind), |s| s.best);
    let mut model = fit(hyper, &train_set, args.seed)?;
    model.mesh_id = tr.mesh_id.clone();
    model.dataset_sha256 = Some(tr.sha256.clone());
    let report = evaluate(&model, &val_set)?;
    Ok((model, report, search))
}

#[derive(Serialize)]
struct StudyArtifact<'a> {
    seed: u64,
    mesh_id: Option<&'a str>,
    dataset_sha256: &'a str,
    studies: Vec<TopkStudy>,
}

fn run_study(args: &TrainArgs, kinds: &[Kind], tr: &LoadedData, va: &LoadedData) -> Result<(), Failure> {
    let ks: Vec<usize> = (1..=FEATURE_COUNT).collect();
    let mut studies = Vec::new();
    for &kind in kinds.iter().filter(|k| k.is_tree_based()) {
        let s = topk_study(Hyper::default_for(kind), &tr.samples, &va.samples, &ks, args.seed)
            .with_context(|| format!("top-k study for {kind}"))
            .numeric()?;
        let top: Vec<&str> = s.ranking[..10].iter().map(|r| FEATURE_NAMES[r.feature]).collect();
        println!("{kind} top-10 features: {}", top.join(" "));
        studies.push(s);
    }
    if studies.is_empty() {
        return Ok(());
    }
    if !args.no_plots {
        let colors = ["#1f77b4", "#ff7f0e", "#2ca02c"];
        let lines: Vec<Line> = studies
            .iter()
            .zip(colors.iter().cycle())
            .map(|(s, c)| Line {
                points: s.points.iter().map(|p| (p.k as f64, p.accuracy)).collect(),
                color: c.to_string(),
                width: 2.0,
                dashed: false,
            })
            .collect();
        let title = studies
            .iter()
            .zip(["blue", "orange", "green"])
            .map(|(s, c)| format!("{} ({c})", s.hyper.kind()))
            .collect::<Vec<_>>()
            .join(", ");
        let svg = line_chart(&format!("Top-k accuracy: {title}"), "k", "accuracy", &lines);
        write(
            &args.out.join("topk.svg"),
            stamp(svg, args.seed, tr.mesh_id.as_deref(), Some(&tr.sha256)),
        )?;
    }
    let art = StudyArtifact {
        seed: args.seed,
        mesh_id: tr.mesh_id.as_deref(),
        dataset_sha256: &tr.sha256,
        studies,
    };
    write(&args.out.join("topk.json"), json(&art))
}

pub fn assess(args: &AssessArgs) -> Result<(), Failure> {
    let mesh = load_mesh(&args.mesh)?;
    let model = load_model(&args.model)?;
    let tuning = PidTuning::with_filter(args.kr, args.ti, args.td, args.n).config()?;
    if !(args.delta_d != 0.0 && args.delta_d.is_finite()) {
        return Err(anyhow!("--delta-d must be finite and non-zero")).config();
    }
    let text = read(&args.response)?;
    let record = RejectionResponse::<f64>::from_csv(&text, 1.0, 1.0, true)
        .with_context(|| format!("parsing {}", args.response.display()))
        .config()?;
    let a = assess_record(&mesh, &model, &record.r, record.dt, &tuning, args.delta_d).numeric()?;
    let m = &a.fit.model;
    println!("verdict        {} (score {:.4}, {} model)", a.verdict.label, a.verdict.score, model.kind);
    println!("criteria       {}", a.criteria);
    println!(
        "fitted SOPDT   k={:.4} tau1={:.4} tau2={:.4} tau0={:.4}  (L1={:.3}, L2={:.3}, rms {:.3e})",
        m.k, m.tau1, m.tau2, m.tau0, a.fit.normalized.l1, a.fit.normalized.l2, a.fit.residual
    );
    println!(
        "tuning / ref   kr x{:.3}  Ti x{:.3}  Td x{:.3}",
        a.multipliers[0], a.multipliers[1], a.multipliers[2]
    );
    println!(
        "margins        Am={:.3} (ref {:.3})  phim={:.2} (ref {:.2})",
        a.margins.gain_margin, a.reference_margins.gain_margin, a.margins.phase_margin, a.reference_margins.phase_margin
    );
    println!("e_dist         {:.4}", a.e_dist);
    if let Some(path) = &args.plot {
        let verdict_color = if a.verdict.label == Label::Ok { GREEN } else { RED };
        let lines = [
            response_line(&a.reference, BLACK, true),
            response_line(&a.response, verdict_color, false),
        ];
        let svg = line_chart(
            &format!("Assessed response: {}", a.verdict.label),
            "t / tau1",
            "normalized control error",
            &lines,
        );
        write(path, stamp(svg, mesh.seed, Some(&mesh.mesh_id()), model.dataset_sha256.as_deref()))?;
    }
    if let Some(path) = &args.json {
        #[derive(Serialize)]
        struct Out<'a> {
            seed: u64,
            mesh_id: String,
            dataset_sha256: Option<&'a str>,
            assessment: &'a crate::assess::Assessment,
        }
        let out = Out {
            seed: mesh.seed,
            mesh_id: mesh.mesh_id(),
            dataset_sha256: model.dataset_sha256.as_deref(),
            assessment: &a,
        };
        write(path, json(&out))?;
    }
    Ok(())
}

fn response_line(r: &RejectionResponse<f64>, color: &str, dashed: bool) -> Line {
    Line {
        points: r.r.iter().enumerate().map(|(i, v)| (r.time(i), *v)).collect(),
        color: color.to_string(),
        width: if dashed { 2.0 } else { 1.0 },
        dashed,
    }
}

#[derive(Serialize)]
struct ValidationArtifact<'a> {
    seed: u64,
    mesh_id: String,
    dataset_sha256: Option<&'a str>,
    classifier: Kind,
    note: &'static str,
    suites: &'a [SuiteReport],
    skipped: &'a [(String, String)],
}

/// Suites that ran, and the suites that could not run with the reason.
pub struct Validation {
    pub suites: Vec<SuiteReport>,
    pub skipped: Vec<(String, String)>,
}

/// Runs both fixed-process suites and the P1..P7 suite.
pub fn run_validation(mesh: &ReferenceMesh, model: &Model) -> Validation {
    let mut v = Validation {
        suites: Vec::new(),
        skipped: Vec::new(),
    };
    let mut record = |name: String, r: anyhow::Result<SuiteReport>| match r {
        Ok(s) => v.suites.push(s),
        Err(e) => v.skipped.push((name, format!("{e:#}"))),
    };
    for (l1, l2) in SUITE_PROCESSES {
        record(format!("SOPDT L1={l1} L2={l2}"), sopdt_suite(mesh, model, l1, l2));
    }
    for (name, p, tab) in validation_processes() {
        record(name.to_string(), higher_order_suite(mesh, model, name, &p, tab));
    }
    v
}

fn validation_text(suites: &[SuiteReport], mesh: &ReferenceMesh, model: &Model) -> String {
    use std::fmt::Write as _;
    let mut t = String::new();
    let _ = writeln!(
        t,
        "seed {} mesh_id {} dataset {} classifier {}\n",
        mesh.seed,
        mesh.mesh_id(),
        model.dataset_sha256.as_deref().unwrap_or("none"),
        model.kind
    );
    let _ = writeln!(
        t,
        "{:<22} {:>6} {:>6} {:>9}   confusion [[OK>OK, OK>NOK], [NOK>OK, NOK>NOK]]",
        "suite", "cases", "failed", "agreement"
    );
    for s in suites {
        let _ = writeln!(
            t,
            "{:<22} {:>6} {:>6} {:>9.4}   {:?}",
            s.name,
            s.cases.len(),
            s.failures.len(),
            s.agreement.accuracy,
            s.agreement.confusion
        );
    }
    let _ = writeln!(t, "\n{:<4} {:>8} {:>8} {:>8} {:>8}", "", "L1 fit", "L1 tab", "L2 fit", "L2 tab");
    for s in suites {
        if let Some((t1, t2)) = s.tabulated {
            let _ = writeln!(t, "{:<4} {:>8.3} {:>8.2} {:>8.3} {:>8.2}", s.name, s.l1, t1, s.l2, t2);
        }
    }
    t
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let mesh = load_mesh(&args.mesh)?;
    let model = load_model(&args.model)?;
    let Validation { suites, skipped } = run_validation(&mesh, &model);
    for (name, why) in &skipped {
        eprintln!("suite {name} skipped: {why}");
    }
    let text = validation_text(&suites, &mesh, &model);
    print!("{text}");
    let mesh_id = mesh.mesh_id();
    let art = ValidationArtifact {
        seed: mesh.seed,
        mesh_id: mesh_id.clone(),
        dataset_sha256: model.dataset_sha256.as_deref(),
        classifier: model.kind,
        note: "tuning bank is a fixed deterministic recipe of multipliers around the interpolated reference",
        suites: &suites,
        skipped: &skipped,
    };
    write(&args.out.join("validation.json"), json(&art))?;
    write(&args.out.join("validation.txt"), &text)?;
    if !args.no_plots {
        for s in &suites {
            let mut lines: Vec<Line> = s
                .cases
                .iter()
                .filter(|c| c.stable)
                .map(|c| response_line(&c.response, if c.predicted == Label::Ok { GREEN } else { RED }, false))
                .collect();
            lines.push(response_line(&s.reference, BLACK, true));
            let svg = line_chart(
                &format!("{} (green OK, red NOK, dashed reference)", s.name),
                "t / tau1",
                "normalized control error",
                &lines,
            );
            let file: PathBuf = args.out.join(format!("suite_{}.svg", slug(&s.name)));
            write(&file, stamp(svg, mesh.seed, Some(&mesh_id), model.dataset_sha256.as_deref()))?;
        }
    }
    if suites.is_empty() {
        return Err(anyhow!("no validation suite could run")).numeric();
    }
    Ok(())
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect::<String>()
        .replace("__", "_")
}
