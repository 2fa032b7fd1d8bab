//! Experiment orchestration: kernels, degradations, training and
//! restoration runs, and the files they leave behind.

mod config;
mod image;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::convolution::{ConvolutionOperator, Kernel};
use crate::denoiser::{train, ScoreDenoiserModel, TrainingImage, PIXEL_FLOOR};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::noise::sample_geometry_noise;
use crate::poisson::sample_poisson;
use crate::solver::{diagnostics, run_solver, ImagePrior};

pub use self::config::{ExperimentConfig, Task, KEYS};
pub use self::image::{load_image, load_planes, save_image, save_planes, ImagePlane};

/// Standard deviation of the `gaussian25` kernel.
pub const GAUSSIAN25_SIGMA: f64 = 1.6;

/// Builds a blur kernel from `uniform9`, `gaussian25` or `file:<path>`.
pub fn make_kernel(spec: &str) -> Result<Kernel> {
    match spec {
        "uniform9" => Kernel::new(9, 9, vec![1.0 / 81.0; 81]),
        "gaussian25" => {
            let s2 = 2.0 * GAUSSIAN25_SIGMA * GAUSSIAN25_SIGMA;
            let data = (0..25 * 25)
                .map(|i| {
                    let (r, c) = ((i / 25) as f64 - 12.0, (i % 25) as f64 - 12.0);
                    (-(r * r + c * c) / s2).exp()
                })
                .collect();
            Kernel::new(25, 25, data)?.normalized()
        }
        _ => match spec.strip_prefix("file:") {
            Some(path) => {
                let path = Path::new(path);
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Kernel::parse_text(&text)
            }
            None => Err(Error::format(format!("unknown kernel `{spec}` (uniform9, gaussian25 or file:<path>)"))),
        },
    }
}

/// Files written by a run and its metric summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub task: Task,
    pub files: Vec<PathBuf>,
    pub metrics: BTreeMap<String, String>,
}

fn clamp_image(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.clamp(PIXEL_FLOOR, 1.0)).collect()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn planes(&mut self, name: &str, like: &[ImagePlane], pixels: &[Vec<f64>]) -> Result<()> {
        let planes = like.iter().zip(pixels).map(|(p, v)| p.with_pixels(v.clone())).collect::<Result<Vec<_>>>()?;
        save_planes(&planes, &self.path(name))
    }
}

fn plane_key(n: usize, c: usize, key: &str) -> String {
    if n == 1 {
        key.to_string()
    } else {
        format!("plane{c}.{key}")
    }
}

/// Runs one experiment and writes its outputs plus `manifest.txt` into the
/// configured output directory. Identical configs give identical files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let task = config.task()?;
    let resolved = config.resolved()?;
    let mut out = Outputs::new(config.out_dir())?;
    let mut metrics = BTreeMap::new();
    let seed = config.seed();
    match task {
        Task::Train => {
            let dataset = load_dataset(&config.input()?)?;
            let model = train(&dataset, &config.train_config()?, seed)?;
            if let Some(last) = model.record().loss_curve.last() {
                metrics.insert("final_loss".into(), last.to_string());
            }
            metrics.insert("training_images".into(), dataset.len().to_string());
            model.save(&out.path("model.txt"))?;
        }
        Task::SampleNoise => {
            let planes = load_planes(&config.input()?)?;
            let gamma = config.noise_gamma();
            let noisy = planes
                .iter()
                .enumerate()
                .map(|(c, p)| sample_geometry_noise(config.geometry(), &p.pixels, gamma, seed.wrapping_add(c as u64)))
                .collect::<Result<Vec<_>>>()?;
            let clean: Vec<Vec<f64>> = planes.iter().map(|p| p.pixels.clone()).collect();
            let shown: Vec<Vec<f64>> = noisy.iter().map(|v| clamp_image(v)).collect();
            metrics.insert("psnr_noisy".into(), psnr(&shown.concat(), &clean.concat())?.to_string());
            out.planes("noisy.png", &planes, &shown)?;
        }
        Task::Denoise => {
            let model = ScoreDenoiserModel::load(&config.model()?)?;
            let planes = load_planes(&config.input()?)?;
            let gamma = config.noise_gamma();
            let (mut noisy, mut denoised, mut violations) = (Vec::new(), Vec::new(), 0usize);
            for (c, p) in planes.iter().enumerate() {
                let y = sample_geometry_noise(model.geometry(), &p.pixels, gamma, seed.wrapping_add(c as u64))?;
                let d = model.denoise(&y, p.size(), gamma)?;
                violations += d.range_violation as usize;
                noisy.push(clamp_image(&y));
                denoised.push(d.image);
            }
            let clean: Vec<Vec<f64>> = planes.iter().map(|p| p.pixels.clone()).collect();
            metrics.insert("psnr_noisy".into(), psnr(&noisy.concat(), &clean.concat())?.to_string());
            metrics.insert("psnr_denoised".into(), psnr(&denoised.concat(), &clean.concat())?.to_string());
            metrics.insert("range_violations".into(), violations.to_string());
            out.planes("noisy.png", &planes, &noisy)?;
            out.planes("denoised.png", &planes, &denoised)?;
        }
        Task::Deblur => {
            let model = ScoreDenoiserModel::load(&config.model()?)?;
            let planes = load_planes(&config.input()?)?;
            let kernel = make_kernel(config.kernel())?;
            let solver = config.solver_config()?;
            let alpha = config.alpha();
            let n = planes.len();
            let (mut degraded, mut restored) = (Vec::new(), Vec::new());
            for (c, p) in planes.iter().enumerate() {
                let op = ConvolutionOperator::new(kernel.clone(), p.height, p.width)?;
                let data = sample_poisson(&p.pixels, &op, alpha, seed.wrapping_add(c as u64))?;
                let prior = ImagePrior { model: &model, size: p.size() };
                let run = run_solver(&data, &prior, &solver, None, Some(&p.pixels))?;
                let d = diagnostics(&run.trace);
                let trace_name = if n == 1 { "trace.csv".to_string() } else { format!("trace_{c}.csv") };
                run.trace.write_csv(&out.path(&trace_name))?;
                let mut put = |k: &str, v: String| {
                    metrics.insert(plane_key(n, c, k), v);
                };
                put("stop", run.stop.name().into());
                put("iterations", run.trace.rows.len().saturating_sub(1).to_string());
                put("restarts", run.restarts.to_string());
                put("final_lambda", run.lambda.to_string());
                put("range_violations", run.range_violations.to_string());
                put("monotonicity_violations", d.monotonicity_violations.len().to_string());
                if let Some(s) = d.rate_slope {
                    put("rate_slope", s.to_string());
                }
                degraded.push(clamp_image(&data.normalized_observation()));
                restored.push(run.x);
            }
            let clean: Vec<Vec<f64>> = planes.iter().map(|p| p.pixels.clone()).collect();
            metrics.insert("psnr_degraded".into(), psnr(&degraded.concat(), &clean.concat())?.to_string());
            metrics.insert("psnr_restored".into(), psnr(&restored.concat(), &clean.concat())?.to_string());
            out.planes("degraded.png", &planes, &degraded)?;
            out.planes("restored.png", &planes, &restored)?;
        }
    }
    let mut manifest = resolved;
    for (k, v) in &metrics {
        manifest.insert(format!("result.{k}"), v.clone());
    }
    let text: String = manifest.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let path = out.path("manifest.txt");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(RunReport { task, files: out.files, metrics })
}

/// Every `.png`/`.pgm` file in `dir`, in name order, one training image per plane.
pub fn load_dataset(dir: &Path) -> Result<Vec<TrainingImage>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("png" | "pgm")
            )
        })
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for p in &paths {
        for plane in load_planes(p)? {
            images.push(TrainingImage { height: plane.height, width: plane.width, pixels: plane.pixels });
        }
    }
    if images.is_empty() {
        return Err(Error::config(format!("no training images in {}", dir.display())));
    }
    Ok(images)
}
