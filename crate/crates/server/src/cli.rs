//! Command-line interface. Every subcommand calls the same [`Engine`]
//! operation as the matching HTTP endpoint and writes its artifacts under
//! `--data-dir`.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 not found, 4 I/O.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use atelier_core::annotation::SplitRatios;
use atelier_core::merge::{parse_recipe_file, MergeRecipe};
use atelier_core::metrics::Aggregation;
use atelier_core::raster::Canvas;
use atelier_core::transfer::{TransferMethod, DEFAULT_EPSILON};
use atelier_core::{ApparelId, ContentAddress, SegmentClass};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::engine::{ContentRef, Engine, VariationsRequest};
use crate::error::{exit, ApiError};

#[derive(Debug, Parser)]
#[command(name = "atelier", version, about = "Apparel segmentation, merging and restyling")]
pub struct Cli {
    /// Store and output directory; created when missing.
    #[arg(long, global = true, default_value = "atelier-data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register every image of a VIA project.
    Ingest {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Score predicted masks laid out as DIR/<apparel_id>/<class>.png.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// `mean_of_images` or `pooled`.
        #[arg(long, default_value = "mean_of_images", value_parser = parse_aggregation)]
        aggregation: Aggregation,
    },
    /// Execute the recipes of a TOML recipe file (or one JSON recipe).
    Merge {
        #[arg(long)]
        recipe: PathBuf,
    },
    /// Restyle an apparel or a stored merge result.
    Stylize {
        /// Apparel id or result id.
        #[arg(long)]
        content: String,
        /// Style image (PNG or JPEG).
        #[arg(long)]
        style: PathBuf,
        #[arg(long, default_value = "mean_std")]
        method: TransferMethod,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value = "silhouette", value_parser = parse_class)]
        part: SegmentClass,
        /// Optional 0/255 PNG selecting the style pixels.
        #[arg(long)]
        style_mask: Option<PathBuf>,
    },
    /// Seeded merge variations.
    Variations {
        #[arg(long, value_delimiter = ',', required = true)]
        apparels: Vec<ApparelId>,
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_class)]
        parts: Vec<SegmentClass>,
        #[arg(long)]
        limit: usize,
        #[arg(long)]
        seed: u64,
        /// WIDTHxHEIGHT; defaults to the largest input dimensions.
        #[arg(long, value_parser = parse_canvas)]
        canvas: Option<Canvas>,
    },
    /// Train/validation/test split of the registered apparels.
    Split {
        #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
        ratios: SplitRatios,
        #[arg(long)]
        seed: u64,
        /// File with one apparel id per line, instead of the registered ones.
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Ingest a sales catalog CSV and rank its attributes.
    Insights {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        season: Option<String>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn parse_class(s: &str) -> Result<SegmentClass, String> {
    SegmentClass::parse(s).map_err(|e| e.to_string())
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    serde_json::from_value(json!(s.replace('-', "_"))).map_err(|_| format!("unknown aggregation `{s}`"))
}

fn parse_canvas(s: &str) -> Result<Canvas, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok(Canvas::new(w, h))
}

fn parse_ratios(s: &str) -> Result<SplitRatios, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad ratio `{p}`")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [train, validation, test] => Ok(SplitRatios {
            train,
            validation,
            test,
        }),
        _ => Err("expected three comma-separated ratios".into()),
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
/// Failures print `error: <code>: <message>` to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let api = to_api_error(&e);
            eprintln!("error: {}: {}", api.code, api.message);
            if let Some(details) = &api.details {
                eprintln!("details: {details}");
            }
            api.exit_code()
        }
    }
}

fn to_api_error(e: &anyhow::Error) -> ApiError {
    if let Some(api) = e.downcast_ref::<ApiError>() {
        return api.clone();
    }
    match e.downcast_ref::<std::io::Error>() {
        Some(io) if io.kind() == std::io::ErrorKind::NotFound => ApiError::not_found("NotFound", format!("{e:#}")),
        _ => ApiError::io(format!("{e:#}")),
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("outputs serialize"));
}

/// Where the CLI writes a result image.
pub fn result_path(data_dir: &Path, id: &ContentAddress) -> PathBuf {
    data_dir.join("results").join(format!("{id}.png"))
}

fn load_recipes(path: &Path) -> anyhow::Result<Vec<MergeRecipe>> {
    let bytes = read(path)?;
    let text =
        String::from_utf8(bytes).map_err(|_| ApiError::bad_request("RecipeFormat", "recipe file is not UTF-8"))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ApiError::bad_request("RecipeFormat", e.to_string()))?;
        let recipes = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|r| vec![r])
        };
        return Ok(recipes.map_err(|e| ApiError::bad_request("RecipeFormat", e.to_string()))?);
    }
    Ok(parse_recipe_file(&text).map_err(ApiError::from)?)
}

fn content_ref(engine: &Engine, raw: &str) -> anyhow::Result<ContentRef> {
    if let Ok(id) = ApparelId::new(raw) {
        if engine.store().snapshot().apparels.contains_key(&id) {
            return Ok(ContentRef::ApparelId(id));
        }
    }
    match raw.parse::<ContentAddress>() {
        Ok(addr) => Ok(ContentRef::ResultId(addr)),
        Err(_) => Err(ApiError::not_found(
            "UnknownApparel",
            format!("`{raw}` is neither a registered apparel nor a result id"),
        )
        .into()),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let data_dir = cli.data_dir;
    let engine = Engine::open(&data_dir)?;
    match cli.command {
        Command::Ingest { images, annotations } => {
            let registered = engine.ingest_dir(&images, &annotations)?;
            print_json(&json!({ "registered": registered }));
        }
        Command::Evaluate {
            predictions,
            aggregation,
        } => {
            let table = engine.evaluate(&predictions, aggregation)?;
            let reports = data_dir.join("reports");
            write(&reports.join("iou.txt"), table.to_text().as_bytes())?;
            write(&reports.join("iou.csv"), table.to_csv().as_bytes())?;
            print!("{}", table.to_text());
        }
        Command::Merge { recipe } => {
            let mut outputs = Vec::new();
            for recipe in load_recipes(&recipe)? {
                let out = engine.merge(&recipe)?;
                let image = result_path(&data_dir, &out.result_id);
                let provenance = data_dir
                    .join("results")
                    .join(format!("{}.provenance.png", out.result_id));
                let legend = data_dir.join("results").join(format!("{}.legend.json", out.result_id));
                write(&image, &out.image_png)?;
                write(&provenance, &engine.result_provenance_png(&out.result_id)?)?;
                write(&legend, &engine.result_legend(&out.result_id)?)?;
                outputs.push(json!({
                    "result_id": out.result_id,
                    "image": image,
                    "provenance": provenance,
                    "legend": legend,
                }));
            }
            print_json(&json!({ "results": outputs }));
        }
        Command::Stylize {
            content,
            style,
            method,
            epsilon,
            part,
            style_mask,
        } => {
            let content = content_ref(&engine, &content)?;
            let style = read(&style)?;
            let mask = style_mask.as_deref().map(read).transpose()?;
            let out = engine.stylize(&content, &style, mask.as_deref(), method, epsilon, part)?;
            let image = result_path(&data_dir, &out.result_id);
            write(&image, &out.image_png)?;
            print_json(&json!({ "result_id": out.result_id, "style": out.style, "image": image }));
        }
        Command::Variations {
            apparels,
            parts,
            limit,
            seed,
            canvas,
        } => {
            let request = VariationsRequest {
                apparels,
                parts,
                limit,
                seed,
                canvas,
            };
            let mut listing = Vec::new();
            for v in engine.variations(&request)? {
                let image = result_path(&data_dir, &v.result_id);
                let thumbnail = data_dir.join("thumbnails").join(format!("{}.png", v.thumbnail));
                write(&image, &v.image_png)?;
                write(&thumbnail, &v.thumbnail_png)?;
                listing.push(json!({
                    "recipe": v.recipe,
                    "result_id": v.result_id,
                    "thumbnail": v.thumbnail,
                    "image": image,
                    "thumbnail_path": thumbnail,
                }));
            }
            let listing = json!({ "request": request, "variations": listing });
            write(
                &data_dir.join("variations").join(format!("seed-{seed}.json")),
                serde_json::to_string_pretty(&listing)?.as_bytes(),
            )?;
            print_json(&listing);
        }
        Command::Split { ratios, seed, ids } => {
            let ids = match ids {
                None => None,
                Some(path) => {
                    let text = String::from_utf8(read(&path)?)
                        .map_err(|_| ApiError::bad_request("ValidationFailed", "id list is not UTF-8"))?;
                    let parsed = text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(|l| {
                            ApparelId::new(l).map_err(|e| ApiError::bad_request("ValidationFailed", e.to_string()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(parsed)
                }
            };
            let split = engine.split(ids, ratios, seed)?;
            let path = data_dir.join("splits").join(format!("split-seed-{seed}.json"));
            write(&path, serde_json::to_string_pretty(&split)?.as_bytes())?;
            let (train, validation, test) = split.sizes();
            print_json(&json!({
                "train": train,
                "validation": validation,
                "test": test,
                "path": path,
            }));
        }
        Command::Insights { catalog, season } => {
            let ingest = engine.ingest_sales_catalog(&read(&catalog)?)?;
            for r in &ingest.rejected {
                eprintln!("warning: line {}: {}", r.line, r.reason);
            }
            let ranking = engine.rank(season.as_deref())?;
            let name = match &season {
                Some(s) => format!("attributes-{}.csv", s.replace(['/', '\\'], "_")),
                None => "attributes.csv".to_string(),
            };
            let csv = ranking.to_csv();
            write(&data_dir.join("reports").join(name), csv.as_bytes())?;
            print!("{csv}");
        }
        Command::Serve { addr } => {
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime.block_on(crate::http::serve(Arc::new(engine), &addr))?;
        }
    }
    Ok(())
}
