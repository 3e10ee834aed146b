//! Command-line interface: `synth`, `train`, `explain` and `audit`.
//!
//! Every command writes a config echo next to its outputs. Echoes name input
//! files by base name and SHA-256 digest, never by directory, and leave out
//! `--out` and `--jobs`, so repeated runs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::audit::report::{format_stamp, report_stem, write_file, write_json, ReportPaths};
use crate::audit::{
    counterfactual_relocation, geo_bias_report, proxy_swap_experiment, regional_curves,
    write_equivalence_curves, write_equivalence_roc, write_geo_table, write_moves,
    write_regional_curves, TargetSampler,
};
use crate::data::{
    generate_synthetic, load_census, load_dataset_inferred, load_regions, temporal_split,
    write_census, write_dataset, write_regions, CensusTable, Dataset, Region, RegionMapping, Split,
    SynthConfig, GEO_FEATURE,
};
use crate::error::{Error, Result};
use crate::gbt::{fit, load_model, save_model, Ensemble, TrainConfig};
use crate::metrics::{roc, threshold_grid, write_roc};
use crate::shap::{
    aggregate_by_group, explain_rows, summarize, write_attributions, write_group_table,
    write_scatter, write_summary, ShapEngine,
};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "geoaudit",
    version,
    about = "Train, explain and audit a credit scorer for geographic proxy bias"
)]
pub struct Cli {
    /// Seed for generation, training and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "GEOAUDIT_OUT",
        default_value = "geoaudit-out"
    )]
    pub out: PathBuf,

    /// TOML file with SynthConfig (synth) or TrainConfig (train, audit proxy-swap) keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; 0 uses every core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Number of points in the threshold grid over [0, 1].
    #[arg(long, global = true, default_value_t = 101)]
    pub thresholds: usize,

    /// Timestamp used in report file names. Defaults to SOURCE_DATE_EPOCH, then the clock.
    #[arg(long, global = true)]
    pub stamp: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset, census table and region mapping.
    Synth(SynthArgs),
    /// Split by date and fit the boosted model.
    Train(TrainArgs),
    /// Shapley attributions over the eval split.
    Explain(ExplainArgs),
    /// Run one audit experiment.
    Audit {
        #[command(subcommand)]
        experiment: Experiment,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// paper, pure-proxy or null.
    #[arg(long, default_value = "paper")]
    pub preset: String,
    #[arg(long)]
    pub n_rows: Option<usize>,
    #[arg(long)]
    pub base_default_rate: Option<f64>,
    #[arg(long)]
    pub geo_race_strength: Option<f64>,
    #[arg(long)]
    pub race_default_strength: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub census_wave: Option<f64>,
    #[arg(long)]
    pub census_jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV [default: <out>/dataset.csv].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Rows dated strictly before this go to the train split.
    #[arg(long, default_value = "2018-01-01")]
    pub cutoff: NaiveDate,
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub shrinkage: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub min_child_cover: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file [default: <out>/model.bin].
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    /// Census CSV [default: <out>/census.csv].
    #[arg(long)]
    pub census: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// tree or exact.
    #[arg(long, default_value = "tree")]
    pub engine: ShapEngine,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Mean cep3 attribution per code against the census.
    Geo {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        census: CensusArgs,
        #[arg(long, default_value = "tree")]
        engine: ShapEngine,
    },
    /// Move rows to another region and re-score them.
    Relocate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        census: CensusArgs,
        #[command(flatten)]
        regions: RegionArgs,
        /// Region whose rows are moved [default: whitest by census].
        #[arg(long, conflicts_with = "source_codes")]
        source_region: Option<Region>,
        /// Region codes are drawn from [default: least white by census].
        #[arg(long, conflicts_with = "target_codes")]
        target_region: Option<Region>,
        /// Inclusive code range `lo-hi` whose rows are moved.
        #[arg(long)]
        source_codes: Option<CodeRange>,
        /// Inclusive code range `lo-hi` to draw targets from (restricted to codes seen in training).
        #[arg(long)]
        target_codes: Option<CodeRange>,
    },
    /// Retrain with cep3 replaced by the census not-white proportion and compare.
    ProxySwap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        census: CensusArgs,
        #[command(flatten)]
        train: TrainOverrides,
    },
    /// Rate curves per macro-region.
    Regions {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        regions: RegionArgs,
    },
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Region mapping CSV [default: bundled table].
    #[arg(long)]
    pub regions: Option<PathBuf>,
}

/// Inclusive range of cep3 codes written `lo-hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CodeRange {
    pub lo: u16,
    pub hi: u16,
}

impl CodeRange {
    fn contains(&self, c: u16) -> bool {
        (self.lo..=self.hi).contains(&c)
    }
}

impl std::str::FromStr for CodeRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (lo, hi) = s.split_once('-').unwrap_or((s, s));
        let parse = |v: &str| v.trim().parse::<u16>().map_err(|e| format!("{v:?}: {e}"));
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if lo > hi || hi > crate::data::CEP3_MAX {
            return Err(format!("bad code range {s:?}"));
        }
        Ok(CodeRange { lo, hi })
    }
}

/// Input file identity recorded in config echoes.
#[derive(Debug, Serialize)]
struct InputFile {
    file: String,
    sha256: String,
}

fn fingerprint(path: &Path) -> Result<InputFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputFile {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    experiment: &'a str,
    seed: u64,
    config: C,
    inputs: BTreeMap<&'a str, InputFile>,
    report: R,
}

fn merge_config<T: Serialize + DeserializeOwned>(base: &T, path: Option<&Path>) -> Result<T> {
    let overrides: toml::Table = match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let mut table = match toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))? {
        toml::Value::Table(t) => t,
        _ => unreachable!("configs serialize to tables"),
    };
    table.extend(overrides);
    let source = path.map_or_else(|| "config".into(), |p| p.display().to_string());
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::Config(format!("{source}: {e}")))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    config: Option<PathBuf>,
    thresholds: usize,
    stamp: Option<String>,
}

impl Ctx {
    fn or_out(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(name))
    }

    fn no_config(&self, command: &str) -> Result<()> {
        match &self.config {
            Some(_) => Err(Error::Config(format!("--config is not used by {command}"))),
            None => Ok(()),
        }
    }

    fn grid(&self) -> Result<Vec<f64>> {
        threshold_grid(self.thresholds)
    }

    fn stamp(&self) -> Result<String> {
        let stamp = match &self.stamp {
            Some(s) => s.clone(),
            None => match std::env::var("SOURCE_DATE_EPOCH") {
                Ok(v) => {
                    let secs: i64 = v.trim().parse().map_err(|_| {
                        Error::Config(format!("SOURCE_DATE_EPOCH {v:?} is not an integer"))
                    })?;
                    let t = DateTime::<Utc>::from_timestamp(secs, 0).ok_or_else(|| {
                        Error::Config(format!("SOURCE_DATE_EPOCH {v:?} out of range"))
                    })?;
                    format_stamp(t)
                }
                Err(_) => format_stamp(Utc::now()),
            },
        };
        if stamp.is_empty() || !stamp.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::Config(format!(
                "stamp {stamp:?} must be non-empty ASCII letters, digits or '-'"
            )));
        }
        Ok(stamp)
    }

    fn paths(&self, experiment: &str, seed: u64) -> Result<ReportPaths> {
        Ok(ReportPaths::new(
            &self.out,
            &report_stem(experiment, &self.stamp()?, seed),
        ))
    }

    fn train_config(&self, o: &TrainOverrides) -> Result<TrainConfig> {
        let mut cfg = merge_config(&TrainConfig::default(), self.config.as_deref())?;
        if let Some(v) = o.n_trees {
            cfg.n_trees = v;
        }
        if let Some(v) = o.max_depth {
            cfg.max_depth = v;
        }
        if let Some(v) = o.shrinkage {
            cfg.shrinkage = v;
        }
        if let Some(v) = o.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = o.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = o.min_child_cover {
            cfg.min_child_cover = v;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Loaded {
    split: Split,
    input: InputFile,
}

fn load_split(ctx: &Ctx, args: &DataArgs) -> Result<Loaded> {
    let path = ctx.or_out(&args.data, "dataset.csv");
    let ds = load_dataset_inferred(&path)?;
    Ok(Loaded {
        split: temporal_split(&ds, args.cutoff),
        input: fingerprint(&path)?,
    })
}

fn nonempty<'a>(ds: &'a Dataset, which: &str) -> Result<&'a Dataset> {
    if ds.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{which} split is empty; check --cutoff"
        )));
    }
    Ok(ds)
}

fn load_model_arg(ctx: &Ctx, args: &ModelArgs) -> Result<(Ensemble, InputFile)> {
    let path = ctx.or_out(&args.model, "model.bin");
    Ok((load_model(&path)?, fingerprint(&path)?))
}

fn load_census_arg(ctx: &Ctx, args: &CensusArgs) -> Result<(CensusTable, InputFile)> {
    let path = ctx.or_out(&args.census, "census.csv");
    Ok((load_census(&path)?, fingerprint(&path)?))
}

fn load_regions_arg(args: &RegionArgs) -> Result<(RegionMapping, Option<InputFile>)> {
    match &args.regions {
        Some(p) => Ok((load_regions(p)?, Some(fingerprint(p)?))),
        None => Ok((RegionMapping::bundled(), None)),
    }
}

fn announce(path: &Path) {
    say!("wrote {}", path.display());
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut cfg = merge_config(&SynthConfig::preset(&a.preset)?, ctx.config.as_deref())?;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    if let Some(n) = a.n_rows {
        cfg.n_rows = n;
    }
    set(&mut cfg.base_default_rate, a.base_default_rate);
    set(&mut cfg.geo_race_strength, a.geo_race_strength);
    set(&mut cfg.race_default_strength, a.race_default_strength);
    set(&mut cfg.noise_scale, a.noise_scale);
    set(&mut cfg.census_wave, a.census_wave);
    set(&mut cfg.census_jitter, a.census_jitter);
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (ds, census) = generate_synthetic(&cfg)?;

    let p = ctx.out.join("dataset.csv");
    write_file(&p, |w| write_dataset(&ds, w))?;
    announce(&p);
    let p = ctx.out.join("census.csv");
    write_file(&p, |w| write_census(&census, w))?;
    announce(&p);
    let p = ctx.out.join("regions.csv");
    write_file(&p, |w| write_regions(&RegionMapping::bundled(), w))?;
    announce(&p);
    let p = ctx.out.join("synth_config.toml");
    write_text(&p, &to_toml(&cfg)?)?;
    announce(&p);
    say!(
        "rows {} default rate {:.4}",
        ds.len(),
        ds.base_rate().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainEcho {
    train: TrainConfig,
    cutoff: NaiveDate,
    data: InputFile,
}

#[derive(Serialize)]
struct TrainReport {
    config: TrainEcho,
    n_trees: usize,
    n_train: usize,
    n_eval: usize,
    base_rate_train: Option<f64>,
    base_rate_eval: Option<f64>,
    auc_train: Option<f64>,
    auc_eval: Option<f64>,
    /// Published real-data values, for comparison only.
    reference: BTreeMap<&'static str, f64>,
}

fn auc_of(m: &Ensemble, ds: &Dataset) -> Result<Option<crate::metrics::RocResult>> {
    if ds.base_rate().is_none_or(|r| r == 0.0 || r == 1.0) {
        return Ok(None);
    }
    let scores = crate::audit::score_rows(m, ds)?;
    Ok(Some(roc(&scores, &ds.labels())?))
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let cfg = ctx.train_config(&a.train)?;
    let Loaded { split, input } = load_split(ctx, &a.data)?;
    let model = fit(nonempty(&split.train, "train")?, &cfg)?;

    let p = ctx.out.join("model.bin");
    save_model(&model, &p)?;
    announce(&p);
    let roc_train = auc_of(&model, &split.train)?;
    let roc_eval = auc_of(&model, &split.eval)?;
    for (name, r) in [("roc_train.csv", &roc_train), ("roc_eval.csv", &roc_eval)] {
        if let Some(r) = r {
            let p = ctx.out.join(name);
            write_file(&p, |w| write_roc(r, w))?;
            announce(&p);
        }
    }
    let report = TrainReport {
        n_trees: model.trees().len(),
        n_train: split.train.len(),
        n_eval: split.eval.len(),
        base_rate_train: split.train.base_rate(),
        base_rate_eval: split.eval.base_rate(),
        auc_train: roc_train.as_ref().map(|r| r.auc),
        auc_eval: roc_eval.as_ref().map(|r| r.auc),
        reference: BTreeMap::from([
            ("auc_train", 0.76),
            ("auc_eval", 0.74),
            ("base_rate_train", 0.343),
            ("base_rate_eval", 0.352),
        ]),
        config: TrainEcho {
            train: cfg.clone(),
            cutoff: a.data.cutoff,
            data: input,
        },
    };
    let p = ctx.out.join("train_report.json");
    write_json(&p, &report)?;
    announce(&p);
    let p = ctx.out.join("train_config.toml");
    write_text(&p, &to_toml(&cfg)?)?;
    announce(&p);
    say!(
        "auc train {} eval {}",
        fmt_opt(report.auc_train),
        fmt_opt(report.auc_eval)
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

#[derive(Serialize)]
struct ExplainEcho {
    engine: ShapEngine,
    output_scale: &'static str,
    cutoff: NaiveDate,
    data: InputFile,
    model: InputFile,
}

fn cmd_explain(ctx: &Ctx, a: &ExplainArgs) -> Result<()> {
    ctx.no_config("explain")?;
    let Loaded { split, input } = load_split(ctx, &a.data)?;
    let (model, model_in) = load_model_arg(ctx, &a.model)?;
    let eval = nonempty(&split.eval, "eval")?;
    let attrs = explain_rows(&model, eval.rows(), a.engine)?;
    let summary = summarize(&attrs, eval)?;

    let p = ctx.out.join("attributions.csv");
    write_file(&p, |w| write_attributions(&attrs, eval, w))?;
    announce(&p);
    let p = ctx.out.join("summary.csv");
    write_file(&p, |w| write_summary(&summary, w))?;
    announce(&p);
    let p = ctx.out.join("scatter.csv");
    write_file(&p, |w| write_scatter(&summary, eval, w))?;
    announce(&p);
    if let Some(g) = eval.schema().index_of(GEO_FEATURE) {
        let table = aggregate_by_group(&attrs, eval, GEO_FEATURE, |r| r.features[g] as u16)?;
        let p = ctx.out.join("group_table.csv");
        write_file(&p, |w| write_group_table(&table, w))?;
        announce(&p);
    } else {
        log::warn!("no {GEO_FEATURE} column; group_table.csv not written");
    }
    let echo = ExplainEcho {
        engine: a.engine,
        output_scale: "margin",
        cutoff: a.data.cutoff,
        data: input,
        model: model_in,
    };
    let p = ctx.out.join("explain_config.json");
    write_json(&p, &echo)?;
    announce(&p);
    for (i, f) in summary.ranked.iter().enumerate() {
        say!("{:>2}. {:<16} {:.4}", i + 1, f.feature, f.mean_abs_phi);
    }
    Ok(())
}

/// Mean census proportion over the distinct codes of each region seen in `ds`.
fn region_whiteness(
    ds: &Dataset,
    census: &CensusTable,
    mapping: &RegionMapping,
) -> Result<Vec<(Region, f64)>> {
    let g = ds
        .schema()
        .index_of(GEO_FEATURE)
        .ok_or_else(|| Error::Schema(format!("dataset has no {GEO_FEATURE:?} column")))?;
    let mut codes: BTreeMap<Region, Vec<f64>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in ds.rows() {
        let c = r.features[g] as u16;
        if seen.insert(c) {
            if let Some(p) = census.lookup(c) {
                codes.entry(mapping.region_of(c)).or_default().push(p);
            }
        }
    }
    Ok(codes
        .into_iter()
        .map(|(r, v)| (r, v.iter().sum::<f64>() / v.len() as f64))
        .collect())
}

#[derive(Serialize)]
struct AuditEcho<T: Serialize> {
    cutoff: NaiveDate,
    thresholds: usize,
    #[serde(flatten)]
    extra: T,
}

fn cmd_audit(ctx: &Ctx, e: &Experiment) -> Result<()> {
    let seed = ctx.seed.unwrap_or(0);
    match e {
        Experiment::Geo {
            data,
            model,
            census,
            engine,
        } => {
            ctx.no_config("audit geo")?;
            let Loaded { split, input } = load_split(ctx, data)?;
            let (m, m_in) = load_model_arg(ctx, model)?;
            let (c, c_in) = load_census_arg(ctx, census)?;
            let report = geo_bias_report(&m, nonempty(&split.eval, "eval")?, &c, *engine)?;
            let paths = ctx.paths("geo", seed)?;
            let env = Envelope {
                experiment: "geo",
                seed,
                config: AuditEcho {
                    cutoff: data.cutoff,
                    thresholds: ctx.thresholds,
                    extra: BTreeMap::from([("engine", engine)]),
                },
                inputs: BTreeMap::from([("data", input), ("model", m_in), ("census", c_in)]),
                report: &report,
            };
            write_json(&paths.json, &env)?;
            announce(&paths.json);
            write_file(&paths.csv, |w| write_geo_table(&report, w))?;
            announce(&paths.csv);
            say!(
                "r_shap {:.4} r_proba {:.4} over {} codes",
                report.r_shap,
                report.r_proba,
                report.table.len()
            );
        }
        Experiment::Relocate {
            data,
            model,
            census,
            regions,
            source_region,
            target_region,
            source_codes,
            target_codes,
        } => {
            ctx.no_config("audit relocate")?;
            let Loaded { split, input } = load_split(ctx, data)?;
            let (m, m_in) = load_model_arg(ctx, model)?;
            let (mapping, r_in) = load_regions_arg(regions)?;
            let mut inputs = BTreeMap::from([("data", input), ("model", m_in)]);
            if let Some(r) = r_in {
                inputs.insert("regions", r);
            }
            let train = nonempty(&split.train, "train")?;
            let eval = nonempty(&split.eval, "eval")?;

            let need_census = (source_region.is_none() && source_codes.is_none())
                || (target_region.is_none() && target_codes.is_none());
            let ranked = if need_census {
                let (c, c_in) = load_census_arg(ctx, census)?;
                inputs.insert("census", c_in);
                let mut w = region_whiteness(train, &c, &mapping)?;
                w.sort_by(|a, b| a.1.total_cmp(&b.1));
                w
            } else {
                Vec::new()
            };
            let whitest = ranked.first().map(|r| r.0);
            let least = ranked.last().map(|r| r.0);

            #[derive(Serialize)]
            #[serde(rename_all = "snake_case")]
            enum Sel {
                Region(Region),
                Codes(CodeRange),
            }
            let source = match (source_codes, source_region) {
                (Some(c), _) => Sel::Codes(*c),
                (None, Some(r)) => Sel::Region(*r),
                (None, None) => Sel::Region(
                    whitest.ok_or_else(|| Error::InvalidInput("no census-covered codes".into()))?,
                ),
            };
            let target = match (target_codes, target_region) {
                (Some(c), _) => Sel::Codes(*c),
                (None, Some(r)) => Sel::Region(*r),
                (None, None) => Sel::Region(
                    least.ok_or_else(|| Error::InvalidInput("no census-covered codes".into()))?,
                ),
            };
            let sampler = match &target {
                Sel::Region(r) => TargetSampler::region(train, &mapping, *r)?,
                Sel::Codes(range) => {
                    let g = train.schema().index_of(GEO_FEATURE).ok_or_else(|| {
                        Error::Schema(format!("dataset has no {GEO_FEATURE:?} column"))
                    })?;
                    TargetSampler::uniform(
                        train
                            .rows()
                            .iter()
                            .map(|r| r.features[g] as u16)
                            .filter(|&c| range.contains(c)),
                    )
                    .map_err(|_| {
                        Error::InvalidInput(format!(
                            "no training rows with codes {}-{}",
                            range.lo, range.hi
                        ))
                    })?
                }
            };
            let report = match &source {
                Sel::Region(r) => counterfactual_relocation(
                    &m,
                    eval,
                    |c| mapping.region_of(c) == *r,
                    &sampler,
                    seed,
                )?,
                Sel::Codes(range) => {
                    counterfactual_relocation(&m, eval, |c| range.contains(c), &sampler, seed)?
                }
            };
            let paths = ctx.paths("relocate", seed)?;
            #[derive(Serialize)]
            struct Extra {
                source: Sel,
                target: Sel,
            }
            let env = Envelope {
                experiment: "relocate",
                seed,
                config: AuditEcho {
                    cutoff: data.cutoff,
                    thresholds: ctx.thresholds,
                    extra: Extra { source, target },
                },
                inputs,
                report: &report,
            };
            write_json(&paths.json, &env)?;
            announce(&paths.json);
            write_file(&paths.csv, |w| write_moves(&report, w))?;
            announce(&paths.csv);
            say!(
                "moved {} rows: worthiness decreased {:.4} increased {:.4} unchanged {:.4}",
                report.n_moved,
                report.increased,
                report.decreased,
                report.unchanged
            );
        }
        Experiment::ProxySwap {
            data,
            census,
            train,
        } => {
            let cfg = ctx.train_config(train)?;
            let Loaded { split, input } = load_split(ctx, data)?;
            let (c, c_in) = load_census_arg(ctx, census)?;
            let grid = ctx.grid()?;
            let report = proxy_swap_experiment(
                nonempty(&split.train, "train")?,
                nonempty(&split.eval, "eval")?,
                &c,
                &cfg,
                &grid,
            )?;
            let paths = ctx.paths("proxy-swap", seed)?;
            let env = Envelope {
                experiment: "proxy-swap",
                seed,
                config: AuditEcho {
                    cutoff: data.cutoff,
                    thresholds: ctx.thresholds,
                    extra: BTreeMap::from([("train", &cfg)]),
                },
                inputs: BTreeMap::from([("data", input), ("census", c_in)]),
                report: &report,
            };
            write_json(&paths.json, &env)?;
            announce(&paths.json);
            write_file(&paths.csv, |w| write_equivalence_curves(&report, w))?;
            announce(&paths.csv);
            let roc_path = paths.companion("roc");
            write_file(&roc_path, |w| write_equivalence_roc(&report, w))?;
            announce(&roc_path);
            say!(
                "|dAUC| {:.4} max rate gap {:.4} whiteness spearman {:.4}",
                report.delta_auc,
                report.max_gap,
                report.whiteness_spearman
            );
        }
        Experiment::Regions {
            data,
            model,
            regions,
        } => {
            ctx.no_config("audit regions")?;
            let Loaded { split, input } = load_split(ctx, data)?;
            let (m, m_in) = load_model_arg(ctx, model)?;
            let (mapping, r_in) = load_regions_arg(regions)?;
            let mut inputs = BTreeMap::from([("data", input), ("model", m_in)]);
            if let Some(r) = r_in {
                inputs.insert("regions", r);
            }
            let report =
                regional_curves(&m, nonempty(&split.eval, "eval")?, &mapping, &ctx.grid()?)?;
            let pattern = report.pattern(
                &[Region::North, Region::Northeast, Region::CentralWest],
                &[Region::Southeast, Region::South],
                0.2,
                0.8,
            );
            #[derive(Serialize)]
            struct WithPattern<'a> {
                #[serde(flatten)]
                report: &'a crate::audit::RegionalCurveReport,
                pattern: crate::audit::RegionPattern,
            }
            let paths = ctx.paths("regions", seed)?;
            let env = Envelope {
                experiment: "regions",
                seed,
                config: AuditEcho {
                    cutoff: data.cutoff,
                    thresholds: ctx.thresholds,
                    extra: BTreeMap::<&str, ()>::new(),
                },
                inputs,
                report: WithPattern {
                    report: &report,
                    pattern,
                },
            };
            write_json(&paths.json, &env)?;
            announce(&paths.json);
            write_file(&paths.csv, |w| write_regional_curves(&report, w))?;
            announce(&paths.csv);
            say!(
                "less-white regions above whiter ones on FPR and TPR at {}/{} thresholds in [0.2, 0.8]",
                pattern.both_hold, pattern.n_thresholds
            );
        }
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let ctx = Ctx {
        out: cli.out,
        seed: cli.seed,
        config: cli.config,
        thresholds: cli.thresholds,
        stamp: cli.stamp,
    };
    ctx.grid()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Explain(a) => cmd_explain(&ctx, a),
        Command::Audit { experiment } => cmd_audit(&ctx, experiment),
    })
}

/// Entry point for the `geoaudit` binary. Exit codes: 0 success, 2 config or
/// validation error, 3 data error, 4 internal error.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(move || run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(4),
    }
}
