use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nsb_core::corpus::{toy_corpus, ToyCorpusConfig};
use nsb_core::metrics::eval_report;
use nsb_core::pixel::{compare_csv, compare_information_content, evaluate_refiner, train_refiner, PixelRefiner};
use nsb_core::ppm::{encode_ppm, encode_ppm16, read_ppm};
use nsb_core::prior::{deserialize_sampler, empirical_sample, fit_sampler, sample, serialize_sampler, TruncationLevel};
use nsb_core::pyramid::{
    build_level_datasets, decode, deserialize_code, deserialize_dataset, encode, full_decompose, low_pass_decode,
    recompose, serialize_code, serialize_dataset, BandPredictor, LevelDataset, LevelGeometry, OraclePredictor,
};
use nsb_core::recon::{history_csv, train_decoder, DecoderModel, TrainError};
use nsb_core::wavelet::{idwt2d, make_filter_bank, QuadDecomposition};
use nsb_core::Image;

use crate::config::RunConfig;
use crate::corpus::{ingest, read_image_dir, split, Manifest, ManifestRow};
use crate::error::{input, read, write, CliError, CliResult};

pub struct Ctx {
    pub cfg: RunConfig,
}

impl Ctx {
    fn out(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn dataset_dir(&self) -> PathBuf {
        self.out().join("dataset")
    }

    fn models_dir(&self) -> PathBuf {
        self.out().join("models")
    }

    fn manifest(&self) -> CliResult<Manifest> {
        Manifest::load(&self.dataset_dir().join("manifest.csv"))
    }

    fn level_dataset(&self, level: usize) -> CliResult<LevelDataset> {
        let path = self.dataset_dir().join(format!("level{level}.nsbd"));
        let ds = deserialize_dataset(&read(&path)?)?;
        if ds.level != level {
            return Err(CliError::Geometry(format!(
                "{} holds level {}, expected {level}",
                path.display(),
                ds.level
            )));
        }
        Ok(ds)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_string()
}

fn save_image(path: &Path, img: &Image) -> CliResult<()> {
    write(path, encode_ppm(img)?)
}

pub fn gen_corpus(ctx: &Ctx, per_class: usize, extent: usize, dest: Option<&Path>) -> CliResult<()> {
    let dest = dest.unwrap_or(&ctx.cfg.corpus_dir);
    let corpus = toy_corpus(&ToyCorpusConfig {
        per_class,
        extent,
        seed: ctx.cfg.seed,
        ..Default::default()
    })?;
    for t in &corpus {
        save_image(&dest.join(format!("{}.ppm", t.name)), &t.image)?;
    }
    println!("wrote {} images to {}", corpus.len(), dest.display());
    Ok(())
}

fn sidecar_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.txt"))
}

/// Affinely maps `band` to `[0, 1]`; returns the view and `(offset, scale)`.
fn normalize(band: &Image) -> (Image, f64, f64) {
    let lo = band.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = band.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { hi - lo } else { 1.0 };
    (band.map(|v| (v - lo) / scale), lo, scale)
}

fn read_band(dir: &Path, name: &str) -> CliResult<Image> {
    let view = read_ppm(&dir.join(format!("{name}.ppm")))?;
    let text = String::from_utf8_lossy(&read(&sidecar_path(dir, name))?).into_owned();
    let mut offset = None;
    let mut scale = None;
    for line in text.lines() {
        match line.split_once(' ') {
            Some(("offset", v)) => offset = v.trim().parse::<f64>().ok(),
            Some(("scale", v)) => scale = v.trim().parse::<f64>().ok(),
            _ => {}
        }
    }
    let (offset, scale) = offset
        .zip(scale)
        .ok_or_else(|| input(format!("sidecar for {name} lacks offset/scale")))?;
    Ok(view.map(|v| v * scale + offset))
}

pub fn transform(
    ctx: &Ctx,
    input_path: &Path,
    inverse: bool,
    output: Option<&Path>,
) -> CliResult<()> {
    let cfg = &ctx.cfg;
    if inverse {
        let dir = input_path;
        let meta = String::from_utf8_lossy(&read(&dir.join("transform.txt"))?).into_owned();
        let get = |key: &str| {
            meta.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
                .map(str::trim)
                .ok_or_else(|| input(format!("transform.txt lacks {key}")))
        };
        let fb = make_filter_bank(get("wavelet")?)?;
        let levels: usize = get("levels")?.parse().map_err(|_| input("bad levels in transform.txt"))?;
        let mut quads = Vec::with_capacity(levels);
        for l in 1..=levels {
            let band = |b: &str| read_band(dir, &format!("l{l}_{b}"));
            let tl = if l == levels { band("tl")? } else { Image::zeros(1, 1, 1) };
            let (tr, bl, br) = (band("tr")?, band("bl")?, band("br")?);
            let tl = if l == levels { tl } else { Image::zeros(tr.height(), tr.width(), tr.channels()) };
            quads.push(QuadDecomposition::new(tl, tr, bl, br)?);
        }
        let img = recompose(&quads, &fb)?;
        let dest = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.out().join("inverse.ppm"));
        save_image(&dest, &img)?;
        println!("wrote {}", dest.display());
        return Ok(());
    }
    let fb = cfg.filter_bank()?;
    let img = read_ppm(input_path)?;
    let quads = full_decompose(&img, cfg.levels, &fb)?;
    let dir = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.out().to_path_buf());
    for (i, q) in quads.iter().enumerate() {
        let l = i + 1;
        let mut bands = vec![("tr", &q.tr), ("bl", &q.bl), ("br", &q.br)];
        if l == cfg.levels {
            bands.insert(0, ("tl", &q.tl));
        }
        for (b, band) in bands {
            let name = format!("l{l}_{b}");
            let (view, offset, scale) = normalize(band);
            write(&dir.join(format!("{name}.ppm")), encode_ppm16(&view)?)?;
            write(&sidecar_path(&dir, &name), format!("offset {offset:?}\nscale {scale:?}\n"))?;
        }
    }
    let (h, w, c) = img.dims();
    write(
        &dir.join("transform.txt"),
        format!("wavelet {}\nlevels {}\nheight {h}\nwidth {w}\nchannels {c}\n", fb.name, cfg.levels),
    )?;
    let tl = &quads.last().expect("levels >= 1").tl;
    println!(
        "{} levels of {}: tl is {}x{}x{}, written to {}",
        cfg.levels,
        fb.name,
        tl.height(),
        tl.width(),
        tl.channels(),
        dir.display()
    );
    Ok(())
}

pub fn make_dataset(ctx: &Ctx, corpus: Option<&Path>) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let fb = cfg.filter_bank()?;
    let dir = corpus.unwrap_or(&cfg.corpus_dir);
    let entries = ingest(dir, cfg.levels, cfg.center_crop)?;
    if entries.is_empty() {
        return Err(CliError::EmptyDataset(format!("no usable images under {}", dir.display())));
    }
    let is_val = split(entries.len(), cfg.seed);
    let manifest = Manifest {
        rows: entries
            .iter()
            .zip(&is_val)
            .map(|(e, v)| ManifestRow {
                file: e.path.display().to_string(),
                class: e.class.clone(),
                val: *v,
            })
            .collect(),
    };
    let images: Vec<Image> = entries.into_iter().map(|e| e.image).collect();
    let sets = build_level_datasets(&images, cfg.levels, &fb)?;
    let out = ctx.dataset_dir();
    write(&out.join("manifest.csv"), manifest.to_csv())?;
    for ds in &sets {
        write(&out.join(format!("level{}.nsbd", ds.level)), serialize_dataset(ds)?)?;
    }
    let labels = manifest.labels();
    let top = sets.last().expect("levels >= 1");
    let (tls, train_labels): (Vec<Image>, Vec<usize>) = top
        .examples
        .iter()
        .zip(&top.image_ids)
        .filter(|(_, id)| !is_val[**id])
        .map(|(q, id)| (q.tl.clone(), labels[*id]))
        .unzip();
    match fit_sampler(&tls, &train_labels) {
        Ok(model) => write(&out.join("sampler.nsbp"), serialize_sampler(&model)?)?,
        Err(e) => eprintln!("warning: prior not fitted: {e}"),
    }
    let n_val = is_val.iter().filter(|v| **v).count();
    println!(
        "{} images in {} classes ({} train, {n_val} val), {} level datasets in {}",
        images.len(),
        manifest.classes().len(),
        images.len() - n_val,
        sets.len(),
        out.display()
    );
    Ok(())
}

fn split_dataset(ds: &LevelDataset, m: &Manifest) -> CliResult<(LevelDataset, LevelDataset)> {
    if ds.image_ids.iter().any(|id| *id >= m.rows.len()) {
        return Err(input("dataset refers to images missing from the manifest"));
    }
    let train = ds.filter(|id| !m.is_val(id));
    let val = ds.filter(|id| m.is_val(id));
    if train.is_empty() {
        return Err(CliError::EmptyDataset("training split is empty".into()));
    }
    Ok((train, val))
}

fn diverged<M>(e: TrainError<M>, save: impl FnOnce(&M) -> CliResult<()>) -> CliError {
    match e {
        TrainError::Setup(e) => e.into(),
        TrainError::Diverged {
            iteration,
            cause,
            last_finite,
            ..
        } => match save(&last_finite) {
            Ok(()) => CliError::Diverged(format!(
                "iteration {iteration}: {cause}; last finite checkpoint saved"
            )),
            Err(s) => s,
        },
    }
}

pub fn train(ctx: &Ctx, level: usize) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let fb = cfg.filter_bank()?;
    let ds = ctx.level_dataset(level)?;
    if ds.wavelet_name != fb.name {
        return Err(input(format!(
            "dataset was built with {}, config selects {}",
            ds.wavelet_name, fb.name
        )));
    }
    let (train, val) = split_dataset(&ds, &ctx.manifest()?)?;
    let (h, w, c) = train.band_dims().expect("non-empty");
    if h != w {
        return Err(CliError::Geometry(format!("bands are {h}x{w}; square bands are required")));
    }
    let model = DecoderModel::build(level, LevelGeometry::new(h, cfg.base_patch, c)?, cfg.trunk(), cfg.seed)?;
    let ckpt = ctx.models_dir().join(format!("level{level}.nsbw"));
    let val_ref = (!val.is_empty()).then_some(&val);
    let trained = train_decoder(model, &train, val_ref, &cfg.train_config(), &fb)
        .map_err(|e| diverged(e, |m| write(&ckpt, m.save()?)))?;
    write(&ckpt, trained.model.save()?)?;
    write(
        &ctx.models_dir().join(format!("level{level}_loss.csv")),
        history_csv(&trained.history),
    )?;
    let train_mse = trained.model.evaluate(&train, &fb, cfg.batch_size)?;
    let mut line = format!("level {level}: train_mse {train_mse:.9e}");
    if let Some(v) = val_ref {
        let _ = write!(line, " val_mse {:.9e}", trained.model.evaluate(v, &fb, cfg.batch_size)?);
    }
    println!("{line}");
    Ok(())
}

pub fn train_pixel(ctx: &Ctx, level: usize) -> CliResult<()> {
    let cfg = &ctx.cfg;
    if level == 0 || level > cfg.levels {
        return Err(input(format!("level must lie in 1..={}", cfg.levels)));
    }
    let ds = ctx.level_dataset(1)?;
    let fb = make_filter_bank(&ds.wavelet_name)?;
    let m = ctx.manifest()?;
    let (train, val) = split_dataset(&ds, &m)?;
    let images = |d: &LevelDataset| -> CliResult<Vec<Image>> {
        d.examples.iter().map(|q| Ok(idwt2d(q, &fb)?)).collect()
    };
    let (train, val) = (images(&train)?, images(&val)?);
    let (n, _, c) = train[0].dims();
    let extent = n >> (level - 1);
    let refiner = PixelRefiner::build(level, extent, c, cfg.trunk(), cfg.seed)?;
    let ckpt = ctx.models_dir().join(format!("pixel_level{level}.nsbw"));
    let val_ref = (!val.is_empty()).then_some(val.as_slice());
    let trained = train_refiner(refiner.clone(), &train, val_ref, &cfg.train_config())
        .map_err(|e| diverged(e, |m| write(&ckpt, m.save()?)))?;
    write(&ckpt, trained.model.save()?)?;
    write(
        &ctx.models_dir().join(format!("pixel_level{level}_loss.csv")),
        history_csv(&trained.history),
    )?;
    let mut zero = refiner;
    zero.zero_heads();
    let set = val_ref.unwrap_or(&train);
    println!(
        "pixel level {level}: train_mse {:.9e} {}_mse {:.9e} zero_refiner_mse {:.9e}",
        evaluate_refiner(&trained.model, &train, cfg.batch_size)?,
        if val_ref.is_some() { "val" } else { "train" },
        evaluate_refiner(&trained.model, set, cfg.batch_size)?,
        evaluate_refiner(&zero, set, cfg.batch_size)?,
    );
    Ok(())
}

pub fn encode_cmd(ctx: &Ctx, input_path: &Path, output: Option<&Path>) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let img = read_ppm(input_path)?;
    let code = encode(&img, cfg.levels, &cfg.filter_bank()?)?;
    let dest = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out().join(format!("{}.nsbc", stem(input_path))));
    write(&dest, serialize_code(&code)?)?;
    println!(
        "{}x{}x{} -> {}x{}x{} latent (ratio {}), written to {}",
        code.original_height,
        code.original_width,
        code.channels,
        code.tl.height(),
        code.tl.width(),
        code.tl.channels(),
        code.compression_ratio(),
        dest.display()
    );
    Ok(())
}

fn load_models(dir: &Path, levels: usize) -> CliResult<Vec<DecoderModel>> {
    (1..=levels)
        .map(|l| {
            let path = dir.join(format!("level{l}.nsbw"));
            if !path.exists() {
                return Err(CliError::MissingModel { level: l, path });
            }
            Ok(DecoderModel::load(&read(&path)?, l)?)
        })
        .collect()
}

pub enum DecodeMode<'a> {
    Models(Option<&'a Path>),
    Oracle(&'a Path),
    LowPass,
}

pub fn decode_cmd(ctx: &Ctx, input_path: &Path, mode: DecodeMode, output: Option<&Path>) -> CliResult<()> {
    let code = deserialize_code(&read(input_path)?)?;
    let fb = make_filter_bank(&code.wavelet_name)?;
    let img = match mode {
        DecodeMode::LowPass => low_pass_decode(&code, &fb)?,
        DecodeMode::Oracle(truth) => {
            let truth = read_ppm(truth)?;
            let quads = full_decompose(&truth, code.levels, &fb)?;
            let oracles = quads
                .iter()
                .map(|q| OraclePredictor::new(q, ctx.cfg.base_patch.min(q.tl.height()), &fb))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&dyn BandPredictor> = oracles.iter().map(|o| o as &dyn BandPredictor).collect();
            decode(&code, &refs, &fb)?
        }
        DecodeMode::Models(dir) => {
            let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| ctx.models_dir());
            let models = load_models(&dir, code.levels)?;
            let refs: Vec<&dyn BandPredictor> = models.iter().map(|m| m as &dyn BandPredictor).collect();
            decode(&code, &refs, &fb)?
        }
    };
    let dest = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out().join(format!("{}_decoded.ppm", stem(input_path))));
    save_image(&dest, &img)?;
    println!("wrote {}", dest.display());
    Ok(())
}

pub fn sample_cmd(
    ctx: &Ctx,
    class: &str,
    truncation: f64,
    n: usize,
    empirical: bool,
    models: Option<&Path>,
) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let manifest = ctx.manifest()?;
    let class_idx = manifest.resolve_class(class)?;
    let class_name = &manifest.classes()[class_idx];
    let t = TruncationLevel::new(truncation)?;
    let dir = models.map(Path::to_path_buf).unwrap_or_else(|| ctx.models_dir());
    let tls = if empirical {
        let top = ctx.level_dataset(cfg.levels)?;
        let labels = manifest.labels();
        let (pool, pool_labels): (Vec<Image>, Vec<usize>) = top
            .examples
            .iter()
            .zip(&top.image_ids)
            .filter(|(_, id)| manifest.is_val(**id))
            .map(|(q, id)| (q.tl.clone(), labels[*id]))
            .unzip();
        empirical_sample(&pool, &pool_labels, class_idx, n, cfg.seed)?
    } else {
        let sampler = deserialize_sampler(&read(&ctx.dataset_dir().join("sampler.nsbp"))?)?;
        sample(&sampler, class_idx, t, n, cfg.seed)?
    };
    let models = load_models(&dir, cfg.levels)?;
    let refs: Vec<&dyn BandPredictor> = models.iter().map(|m| m as &dyn BandPredictor).collect();
    let fb = cfg.filter_bank()?;
    let n_full = tls[0].height() << cfg.levels;
    let dest = ctx.out().join("samples");
    for (i, tl) in tls.into_iter().enumerate() {
        let code = nsb_core::pyramid::PyramidCode {
            levels: cfg.levels,
            original_height: n_full,
            original_width: tl.width() << cfg.levels,
            channels: tl.channels(),
            tl,
            wavelet_name: fb.name.clone(),
        };
        let img = decode(&code, &refs, &fb)?;
        let tag = if empirical { "emp".to_string() } else { format!("t{truncation}") };
        save_image(&dest.join(format!("{class_name}_{tag}_{i:03}.ppm")), &img)?;
    }
    println!("wrote {n} samples of class {class_name} to {}", dest.display());
    Ok(())
}

pub fn eval_cmd(ctx: &Ctx, real: &Path, generated: &Path, recon: Option<&Path>) -> CliResult<()> {
    let real = read_image_dir(real)?;
    let generated = read_image_dir(generated)?;
    let recon = recon.map(read_image_dir).transpose()?;
    let report = eval_report(&real, &generated, recon.as_deref(), &ctx.cfg.feature_spec())?;
    let csv = report.to_csv();
    write(&ctx.out().join("eval.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn compare_cmd(ctx: &Ctx, corpus: Option<&Path>) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let dir = corpus.unwrap_or(&cfg.corpus_dir);
    let entries = ingest(dir, cfg.levels, cfg.center_crop)?;
    if entries.is_empty() {
        return Err(CliError::EmptyDataset(format!("no usable images under {}", dir.display())));
    }
    let images: Vec<Image> = entries.into_iter().map(|e| e.image).collect();
    let rows = compare_information_content(&images, cfg.levels, &cfg.filter_bank()?)?;
    let csv = compare_csv(&rows);
    write(&ctx.out().join("compare.csv"), &csv)?;
    println!("{}", csv.lines().last().unwrap_or(""));
    Ok(())
}
