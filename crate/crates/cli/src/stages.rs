//! Pipeline stages. Each stage reads its inputs from disk (the raw inputs or
//! upstream artifacts) and writes its own artifacts, so running the stage
//! commands in order produces the same files as `pipeline`.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _};
use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tractlens_core::explain::{
    mean_abs_shap, sample_background, shap_forest, shap_scatter_export, top_features, Direction,
};
use tractlens_core::impute::impute_knn;
use tractlens_core::ingest::{
    add_accessibility_features, build_response, filter_eligible, parse_facilities, parse_units, summarize, write_units,
    FacilitySet, RateColumn, RowError,
};
use tractlens_core::models::{
    compare_models, grid_search_cv, train_test_split, CvTable, ForestConfig, ForestGrid, ForestModel,
    LinearModel, SvrModel,
};
use tractlens_core::rng::derive_seed;
use tractlens_core::spatial_stats::{
    assign_classes, classify_hotspots, classify_hotspots_fdr, gi_star, jenks_breaks, weights_distance_band,
    weights_knn, HotspotClass, JenksBreaks, SpatialWeights,
};
use tractlens_core::{Dataset, ImputationReport, ValidationReport};

use crate::artifacts::{self as art, hash_file, scatter_name, DirLock, OutDir};
use crate::config::{ExplainOn, RunConfig, WeightsScheme};
use crate::error::{CliError, CliResult, StageContext};

/// Seed streams derived from the master seed.
const SPLIT_STREAM: u64 = 1;
const CV_STREAM: u64 = 2;
const FOREST_STREAM: u64 = 3;
const SVR_STREAM: u64 = 4;
const BACKGROUND_STREAM: u64 = 5;

pub struct Context {
    pub cfg: RunConfig,
    pub out: OutDir,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        let out = OutDir { root: cfg.output_dir.clone(), config_hash: cfg.hash(), seed: cfg.seed };
        Self { cfg, out }
    }

    pub fn lock(&self) -> CliResult<DirLock> {
        DirLock::acquire(&self.out.root).map_err(CliError::config)
    }

    fn seed(&self, stream: u64) -> u64 {
        derive_seed(self.cfg.seed, stream)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FacilityValidation {
    pub rows_accepted: usize,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidationArtifact {
    pub units: ValidationReport,
    pub facilities: FacilityValidation,
}

fn open(path: &std::path::Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Parses both input files. Row-level problems are reported and the rows
/// dropped; a missing column or unreadable file is a validation failure.
fn read_inputs(ctx: &Context) -> CliResult<(Dataset, FacilitySet, ValidationArtifact)> {
    let schema = ctx.cfg.base_schema().map_err(CliError::config)?;
    let (units, report) = parse_units(open(&ctx.cfg.units).map_err(CliError::validation)?, &schema)
        .with_context(|| format!("units file {}", ctx.cfg.units.display()))
        .map_err(CliError::validation)?;
    let (facilities, errors) = parse_facilities(open(&ctx.cfg.facilities).map_err(CliError::validation)?)
        .with_context(|| format!("facilities file {}", ctx.cfg.facilities.display()))
        .map_err(CliError::validation)?;
    let artifact = ValidationArtifact {
        units: report,
        facilities: FacilityValidation { rows_accepted: facilities.len(), errors },
    };
    Ok((units, facilities, artifact))
}

pub fn validate(ctx: &Context) -> CliResult<ValidationArtifact> {
    let artifact = match read_inputs(ctx) {
        Ok((_, _, a)) => a,
        Err(e) => {
            // Record the fatal problem before failing.
            let report = ValidationArtifact {
                units: ValidationReport::fatal(format!("{:#}", e.source)),
                facilities: FacilityValidation { rows_accepted: 0, errors: Vec::new() },
            };
            let _ = fs::create_dir_all(&ctx.out.root);
            let _ = ctx.out.write_json(art::VALIDATION, &report);
            return Err(e);
        }
    };
    ctx.out.write_json(art::VALIDATION, &artifact).stage("validate")?;
    info!(
        "validate: {} of {} unit rows accepted, {} row errors; {} facilities",
        artifact.units.rows_accepted,
        artifact.units.rows_read,
        artifact.units.errors.len(),
        artifact.facilities.rows_accepted
    );
    Ok(artifact)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImputationArtifact {
    pub units_eligible: usize,
    pub units_excluded: usize,
    pub report: ImputationReport,
}

pub fn impute(ctx: &Context) -> CliResult<()> {
    const STAGE: &str = "impute";
    let _: ValidationArtifact = ctx.out.read_json(art::VALIDATION, "validate").stage(STAGE)?;
    let (units, facilities, _) = read_inputs(ctx)?;
    let mut ds = filter_eligible(&units);
    let excluded = units.len() - ds.len();
    if ds.is_empty() {
        return Err(CliError::stage(STAGE, anyhow!("no unit has both screening rates")));
    }
    add_accessibility_features(&mut ds, &facilities).stage(STAGE)?;
    ds.sort_by_id();
    let summary = summarize(&ds);
    let index = ds.spatial_index().stage(STAGE)?;
    let (filled, report) = impute_knn(&ds, &index, ctx.cfg.impute_k).stage(STAGE)?;
    let mut csv = Vec::new();
    write_units(&filled, &mut csv).stage(STAGE)?;
    ctx.out.write_json(art::SUMMARY, &summary).stage(STAGE)?;
    ctx.out.write_raw(art::PREPARED_UNITS, &csv).stage(STAGE)?;
    info!("impute: {} units kept, {} excluded, {} cells imputed", filled.len(), excluded, report.total_imputed());
    ctx.out
        .write_json(art::IMPUTATION, ImputationArtifact { units_eligible: filled.len(), units_excluded: excluded, report })
        .stage(STAGE)?;
    Ok(())
}

/// Prepared units with the response attached, in id order.
fn load_prepared(ctx: &Context) -> anyhow::Result<Dataset> {
    let _: ImputationArtifact = ctx.out.read_json(art::IMPUTATION, "impute")?;
    let path = ctx.out.require(art::PREPARED_UNITS, "impute")?;
    let (ds, report) = parse_units(open(&path)?, &ctx.cfg.full_schema()?)?;
    if !report.is_clean() || ds.missing_cells() > 0 {
        bail!("{} is damaged: rerun stage `impute`", path.display());
    }
    Ok(build_response(ds)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: HotspotClass,
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HotspotVariable {
    pub variable: String,
    pub file: String,
    pub undefined: usize,
    pub counts: Vec<ClassCount>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HotspotArtifact {
    pub weights: WeightsScheme,
    pub k: Option<usize>,
    pub distance_miles: Option<f64>,
    pub fdr: bool,
    pub n_units: usize,
    pub variables: Vec<HotspotVariable>,
}

fn build_weights(ctx: &Context, ds: &Dataset) -> anyhow::Result<SpatialWeights> {
    let index = ds.spatial_index()?;
    let h = &ctx.cfg.hotspot;
    Ok(match h.weights {
        WeightsScheme::Knn => weights_knn(&index, h.k, true)?,
        WeightsScheme::DistanceBand => weights_distance_band(&index, h.distance_miles, true)?,
    })
}

pub fn hotspot(ctx: &Context) -> CliResult<()> {
    const STAGE: &str = "hotspot";
    let ds = load_prepared(ctx).stage(STAGE)?;
    let weights = build_weights(ctx, &ds).stage(STAGE)?;
    let variables = [
        ("response", art::HOTSPOTS, ds.response().stage(STAGE)?.to_vec()),
        (RateColumn::Y1.name(), art::HOTSPOTS_RATE_Y1, ds.rate_column(RateColumn::Y1).stage(STAGE)?),
        (RateColumn::Y2.name(), art::HOTSPOTS_RATE_Y2, ds.rate_column(RateColumn::Y2).stage(STAGE)?),
    ];
    let mut summaries = Vec::new();
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    for (name, file, values) in variables {
        let gi = gi_star(&values, &weights).with_context(|| format!("Gi* on {name}")).stage(STAGE)?;
        let classes = if ctx.cfg.hotspot.fdr { classify_hotspots_fdr(&gi) } else { classify_hotspots(&gi) };
        let mut w = csv_writer();
        w.write_record(["id", "z", "p", "class"]).stage(STAGE)?;
        for (i, u) in ds.units.iter().enumerate() {
            w.write_record([u.id.clone(), opt(gi.z[i]), opt(gi.p[i]), classes[i].label().to_owned()]).stage(STAGE)?;
        }
        files.push((file, w.into_inner().map_err(|e| anyhow!("{e}")).stage(STAGE)?));
        let order = [
            HotspotClass::Hot99,
            HotspotClass::Hot95,
            HotspotClass::Hot90,
            HotspotClass::NotSignificant,
            HotspotClass::Cold90,
            HotspotClass::Cold95,
            HotspotClass::Cold99,
        ];
        summaries.push(HotspotVariable {
            variable: name.to_owned(),
            file: file.to_owned(),
            undefined: gi.z.iter().filter(|z| z.is_none()).count(),
            counts: order.iter().map(|&c| ClassCount { class: c, count: classes.iter().filter(|&&x| x == c).count() }).collect(),
        });
    }
    for (file, bytes) in files {
        ctx.out.write_raw(file, &bytes).stage(STAGE)?;
    }
    let h = &ctx.cfg.hotspot;
    let knn = h.weights == WeightsScheme::Knn;
    ctx.out
        .write_json(
            art::HOTSPOT_SUMMARY,
            HotspotArtifact {
                weights: h.weights,
                k: knn.then_some(h.k),
                distance_miles: (!knn).then_some(h.distance_miles),
                fdr: h.fdr,
                n_units: ds.len(),
                variables: summaries,
            },
        )
        .stage(STAGE)?;
    info!("hotspot: Gi* computed for {} units", ds.len());
    Ok(())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JenksArtifact {
    pub variable: String,
    pub breaks: JenksBreaks,
}

struct HotspotRow {
    z: Option<f64>,
    p: Option<f64>,
    class: String,
}

fn read_hotspots(ctx: &Context) -> anyhow::Result<HashMap<String, HotspotRow>> {
    let _: HotspotArtifact = ctx.out.read_json(art::HOTSPOT_SUMMARY, "hotspot")?;
    let path = ctx.out.require(art::HOTSPOTS, "hotspot")?;
    let mut rdr = csv::Reader::from_reader(open(&path)?);
    let mut rows = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> anyhow::Result<Option<f64>> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse().with_context(|| format!("bad number `{s}` in {}", path.display()))?))
            }
        };
        rows.insert(
            rec.get(0).unwrap_or("").to_owned(),
            HotspotRow { z: num(1)?, p: num(2)?, class: rec.get(3).unwrap_or("").to_owned() },
        );
    }
    Ok(rows)
}

/// Unit geometries keyed by the `id` property (or the feature id).
fn read_geometry(ctx: &Context) -> anyhow::Result<HashMap<String, Geometry>> {
    let Some(path) = &ctx.cfg.geometry else {
        return Ok(HashMap::new());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let gj: GeoJson = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let fc = FeatureCollection::try_from(gj).with_context(|| format!("{} is not a FeatureCollection", path.display()))?;
    let mut out = HashMap::new();
    for f in fc.features {
        let id = match (f.property("id"), &f.id) {
            (Some(Value::String(s)), _) => s.clone(),
            (_, Some(geojson::feature::Id::String(s))) => s.clone(),
            _ => continue,
        };
        if let Some(g) = f.geometry {
            out.insert(id, g);
        }
    }
    Ok(out)
}

pub fn classify(ctx: &Context) -> CliResult<()> {
    const STAGE: &str = "classify";
    let ds = load_prepared(ctx).stage(STAGE)?;
    let hot = read_hotspots(ctx).stage(STAGE)?;
    let geometry = read_geometry(ctx).stage(STAGE)?;
    let y = ds.response().stage(STAGE)?;
    let jb = jenks_breaks(y, ctx.cfg.jenks_k).stage(STAGE)?;
    let (classes, _) = assign_classes(y, &jb.breaks).stage(STAGE)?;

    let mut w = csv_writer();
    w.write_record(["id", "response", "jenks_class"]).stage(STAGE)?;
    let mut features = Vec::with_capacity(ds.len());
    for (i, u) in ds.units.iter().enumerate() {
        let class = classes[i] + 1;
        w.write_record([u.id.clone(), y[i].to_string(), class.to_string()]).stage(STAGE)?;
        let h = hot.get(&u.id).ok_or_else(|| anyhow!("unit {} missing from {}: rerun stage `hotspot`", u.id, art::HOTSPOTS)).stage(STAGE)?;
        let mut props = JsonObject::new();
        props.insert("id".into(), json!(u.id));
        props.insert("response".into(), json!(y[i]));
        props.insert("z".into(), json!(h.z));
        props.insert("p".into(), json!(h.p));
        props.insert("class".into(), json!(h.class));
        props.insert("jenks_class".into(), json!(class));
        let geom = geometry
            .get(&u.id)
            .cloned()
            .unwrap_or_else(|| Geometry::new(geojson::Value::Point(vec![u.centroid.lon(), u.centroid.lat()])));
        features.push(Feature {
            bbox: None,
            geometry: Some(geom),
            id: Some(geojson::feature::Id::String(u.id.clone())),
            properties: Some(props),
            foreign_members: None,
        });
    }
    let mut members = JsonObject::new();
    members.insert("config_hash".into(), json!(ctx.out.config_hash));
    members.insert("seed".into(), json!(ctx.out.seed));
    let fc = FeatureCollection { bbox: None, features, foreign_members: Some(members) };
    let map = art::to_json_bytes(&fc).stage(STAGE)?;

    ctx.out.write_raw(art::CLASSES, &w.into_inner().map_err(|e| anyhow!("{e}")).stage(STAGE)?).stage(STAGE)?;
    ctx.out.write_json(art::JENKS, JenksArtifact { variable: "response".into(), breaks: jb }).stage(STAGE)?;
    ctx.out.write_raw(art::MAP, &map).stage(STAGE)?;
    info!("classify: {} natural-breaks classes", ctx.cfg.jenks_k);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub train_fraction: f64,
    pub split_seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CvArtifact {
    pub grid: ForestGrid,
    pub table: CvTable,
    pub selected: ForestConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ForestArtifact {
    pub model: ForestModel,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinearArtifact {
    pub feature_names: Vec<String>,
    pub model: LinearModel,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SvrArtifact {
    pub feature_names: Vec<String>,
    pub model: SvrModel,
}

pub fn train(ctx: &Context) -> CliResult<()> {
    const STAGE: &str = "train";
    let ds = load_prepared(ctx).stage(STAGE)?;
    if ds.is_empty() {
        return Err(CliError::stage(STAGE, anyhow!("training set is empty")));
    }
    let names: Vec<String> = ds.schema.names().into_iter().map(str::to_owned).collect();
    let x = ds.feature_matrix().stage(STAGE)?;
    let y = ds.response().stage(STAGE)?;
    let m = &ctx.cfg.model;
    let split_seed = ctx.seed(SPLIT_STREAM);
    let split = train_test_split(ds.len(), m.train_fraction, split_seed).stage(STAGE)?;
    if split.test.is_empty() || split.train.is_empty() {
        return Err(CliError::stage(STAGE, anyhow!("split leaves an empty training or test set")));
    }
    let pick = |idx: &[usize]| (x.select_rows(idx), idx.iter().map(|&i| y[i]).collect::<Vec<f64>>());
    let (xt, yt) = pick(&split.train);
    let (xv, yv) = pick(&split.test);
    let base = ForestConfig {
        n_trees: 1,
        mtry: 1,
        min_leaf: m.min_leaf,
        max_depth: m.max_depth,
        seed: ctx.seed(FOREST_STREAM),
        bootstrap: true,
    };
    let (best, table) = grid_search_cv(&xt, &yt, &m.grid, &base, m.folds, ctx.seed(CV_STREAM)).stage(STAGE)?;
    info!("train: grid search chose n_trees = {}, mtry = {}", best.n_trees, best.mtry);
    let fitted = compare_models(&xt, &yt, &xv, &yv, &best, &ctx.cfg.svr_params(ctx.seed(SVR_STREAM))).stage(STAGE)?;
    let forest = fitted.forest.with_feature_names(names.clone()).stage(STAGE)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| ds.units[i].id.clone()).collect::<Vec<_>>();

    ctx.out
        .write_json(
            art::SPLIT,
            SplitArtifact { train_fraction: m.train_fraction, split_seed, train: ids(&split.train), test: ids(&split.test) },
        )
        .stage(STAGE)?;
    ctx.out.write_json(art::CV_TABLE, CvArtifact { grid: m.grid.clone(), table, selected: best }).stage(STAGE)?;
    ctx.out.write_json(art::MODEL_RF, ForestArtifact { model: forest }).stage(STAGE)?;
    ctx.out
        .write_json(art::MODEL_OLS, LinearArtifact { feature_names: names.clone(), model: fitted.linear })
        .stage(STAGE)?;
    ctx.out.write_json(art::MODEL_SVR, SvrArtifact { feature_names: names, model: fitted.svr }).stage(STAGE)?;
    for s in &fitted.report.scores {
        info!("train: {} test R2 = {:.4}, RMSE = {:.4}", s.model, s.r2, s.rmse);
    }
    ctx.out.write_json(art::COMPARISON, &fitted.report).stage(STAGE)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TopFeature {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub direction: Direction,
    pub spearman: Option<f64>,
    pub scatter_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplanationArtifact {
    pub model_sha256: String,
    pub background_seed: u64,
    pub background_size: usize,
    pub explained_partition: ExplainOn,
    pub n_explained: usize,
    pub base_value: f64,
    pub threshold: f64,
    pub top_features: Vec<TopFeature>,
    /// Largest |base + sum(phi) - prediction| over explained rows.
    pub max_efficiency_error: f64,
}

pub fn explain(ctx: &Context) -> CliResult<()> {
    const STAGE: &str = "explain";
    let forest: ForestArtifact = ctx.out.read_json(art::MODEL_RF, "train").stage(STAGE)?;
    let forest = forest.model;
    let split: SplitArtifact = ctx.out.read_json(art::SPLIT, "train").stage(STAGE)?;
    let model_sha256 = hash_file(&ctx.out.path(art::MODEL_RF)).stage(STAGE)?;
    let ds = load_prepared(ctx).stage(STAGE)?;
    let x = ds.feature_matrix().stage(STAGE)?;
    if x.cols() != forest.n_features {
        return Err(CliError::stage(STAGE, anyhow!("model expects {} features, data has {}", forest.n_features, x.cols())));
    }
    let position: HashMap<&str, usize> = ds.units.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    let rows = |ids: &[String]| -> anyhow::Result<Vec<usize>> {
        ids.iter()
            .map(|id| position.get(id.as_str()).copied().ok_or_else(|| anyhow!("split unit {id} not in prepared data")))
            .collect()
    };
    let train_rows = rows(&split.train).stage(STAGE)?;
    let explain_rows = match ctx.cfg.shap.explain_on {
        ExplainOn::Test => rows(&split.test),
        ExplainOn::Train => Ok(train_rows.clone()),
    }
    .stage(STAGE)?;
    let background_seed = ctx.seed(BACKGROUND_STREAM);
    let bg_pos = sample_background(train_rows.len(), ctx.cfg.shap.background_size, background_seed);
    let bg_rows: Vec<usize> = bg_pos.iter().map(|&p| train_rows[p]).collect();
    let background = x.select_rows(&bg_rows);
    let xe = x.select_rows(&explain_rows);
    let shap = shap_forest(&forest, &xe, &background).stage(STAGE)?;

    let max_efficiency_error = xe
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (shap.base_value + shap.phi.row(i).iter().sum::<f64>() - forest.predict_row(r)).abs())
        .fold(0.0, f64::max);
    let names: Vec<String> = ds.schema.names().into_iter().map(str::to_owned).collect();
    let ranking = mean_abs_shap(&shap, &names).stage(STAGE)?;
    let top = top_features(&ranking, ctx.cfg.shap.threshold).stage(STAGE)?;
    let mut importance = Vec::new();
    ranking.write_csv(&mut importance).stage(STAGE)?;

    let mut scatters = Vec::new();
    let mut top_out = Vec::new();
    for f in &top {
        let j = ds.schema.index_of(f).expect("ranked feature is in the schema");
        let table = shap_scatter_export(f, &xe.column(j), &shap.phi.column(j)).stage(STAGE)?;
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).stage(STAGE)?;
        let file = scatter_name(f);
        top_out.push(TopFeature {
            feature: f.clone(),
            mean_abs_shap: ranking.entries.iter().find(|e| &e.feature == f).map(|e| e.mean_abs_shap).unwrap_or(0.0),
            direction: table.direction,
            spearman: table.spearman,
            scatter_file: file.clone(),
        });
        scatters.push((file, bytes));
    }
    ctx.out.write_raw(art::SHAP_IMPORTANCE, &importance).stage(STAGE)?;
    for (file, bytes) in scatters {
        ctx.out.write_raw(&file, &bytes).stage(STAGE)?;
    }
    info!("explain: {} rows explained, {} features above {}", xe.rows(), top.len(), ctx.cfg.shap.threshold);
    ctx.out
        .write_json(
            art::EXPLANATION,
            ExplanationArtifact {
                model_sha256,
                background_seed,
                background_size: bg_rows.len(),
                explained_partition: ctx.cfg.shap.explain_on,
                n_explained: xe.rows(),
                base_value: shap.base_value,
                threshold: ctx.cfg.shap.threshold,
                top_features: top_out,
                max_efficiency_error,
            },
        )
        .stage(STAGE)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    pub stages: Vec<StageTiming>,
}

fn file_hash(path: &std::path::Path, name: String) -> anyhow::Result<FileHash> {
    Ok(FileHash { name, sha256: hash_file(path)?, bytes: fs::metadata(path)?.len() })
}

type StageFn = fn(&Context) -> CliResult<()>;

/// All stages in order, then the manifest. Holds the directory lock throughout.
pub fn pipeline(ctx: &Context) -> CliResult<()> {
    let _lock = ctx.lock()?;
    let stages: [(&str, StageFn); 6] = [
        ("validate", |c| validate(c).map(|_| ())),
        ("impute", impute),
        ("hotspot", hotspot),
        ("classify", classify),
        ("train", train),
        ("explain", explain),
    ];
    let mut timings = Vec::new();
    for (name, run) in stages {
        let t = Instant::now();
        run(ctx)?;
        timings.push(StageTiming { stage: name.to_owned(), seconds: t.elapsed().as_secs_f64() });
    }
    write_manifest(ctx, timings).stage("manifest")
}

fn write_manifest(ctx: &Context, stages: Vec<StageTiming>) -> anyhow::Result<()> {
    let mut inputs = vec![
        file_hash(&ctx.cfg.units, ctx.cfg.units.display().to_string())?,
        file_hash(&ctx.cfg.facilities, ctx.cfg.facilities.display().to_string())?,
    ];
    if let Some(g) = &ctx.cfg.geometry {
        inputs.push(file_hash(g, g.display().to_string())?);
    }
    let mut names: Vec<String> = fs::read_dir(&ctx.out.root)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != art::MANIFEST && n != art::LOCK && !n.ends_with(".tmp"))
        .collect();
    names.sort();
    let artifacts = names.into_iter().map(|n| file_hash(&ctx.out.path(&n), n)).collect::<anyhow::Result<_>>()?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: ctx.cfg.clone(),
        inputs,
        artifacts,
        stages,
    };
    ctx.out.write_json(art::MANIFEST, &manifest)
}

/// Runs one stage under the directory lock.
pub fn run_stage(ctx: &Context, stage: StageFn) -> CliResult<()> {
    let _lock = ctx.lock()?;
    stage(ctx)
}
