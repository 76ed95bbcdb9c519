//! Command implementations. Each command resolves its configuration
//! (config file, CLI overrides, then defaults), runs, and records the
//! fully resolved configuration next to its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use wdaep::data::container::atomic_write;
use wdaep::data::patches::shuffle_truncate;
use wdaep::data::{
    export_pgm, extract_patches, load_checkpoint, load_image, load_kspace, load_mask,
    make_phantom, save_checkpoint, save_image, save_kspace, save_mask, write_pgm16,
    CheckpointMeta,
};
use wdaep::kspace::{
    add_measurement_noise, encode, mask_cartesian1d, mask_radial, mask_random2d, MaskPattern,
    SamplingMask,
};
use wdaep::metrics;
use wdaep::prior::{DaeNetwork, Layer, NetSpec, Tensor, TrainConfig};
use wdaep::recon::{reconstruct, NoiseMode, ReconConfig, ReconResult};
use wdaep::wavelet::{uwt_forward, FilterBank};
use wdaep::ComplexImage;

use crate::config::{parse_dims, CliError, CliResult, RunConfig};

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".config.json");
    out.with_file_name(name)
}

/// Paper-scale sigma (0..255) to normalized units.
fn normalize_sigma(paper_scale: f64) -> f64 {
    paper_scale / 255.0
}

pub fn cmd_maskgen(mut cfg: RunConfig) -> CliResult<()> {
    let pattern = MaskPattern::parse(cfg.require_str("mask.pattern")?)?;
    let (h, w) = parse_dims(cfg.require_str("mask.dims")?)?;
    let target_r = cfg.require_f64("mask.target_r")?;
    cfg.default_u64("mask.seed", 0);
    cfg.default_f64("mask.decay_power", 2.0);
    match pattern {
        MaskPattern::Cartesian1d => cfg.default_f64("mask.center_fraction", 0.08),
        MaskPattern::Random2d => cfg.default_f64("mask.center_fraction", 0.04),
        MaskPattern::Radial => {}
    }
    let seed = cfg.u64("mask.seed").unwrap();
    let out = PathBuf::from(cfg.require_str("maskgen.out")?);

    let mask = match pattern {
        MaskPattern::Cartesian1d => mask_cartesian1d(
            h,
            w,
            target_r,
            cfg.f64("mask.center_fraction").unwrap(),
            seed,
        )?,
        MaskPattern::Radial => mask_radial(h, w, target_r, seed)?,
        MaskPattern::Random2d => mask_random2d(
            h,
            w,
            target_r,
            cfg.f64("mask.decay_power").unwrap(),
            cfg.f64("mask.center_fraction").unwrap(),
            seed,
        )?,
    };
    save_mask(&out, &mask)?;
    cfg.write_sidecar(&sidecar_path(&out))?;
    println!(
        "wrote {} ({} pattern, target R {}, achieved R {:.4})",
        out.display(),
        mask.pattern.as_str(),
        mask.target_r,
        mask.achieved_r
    );
    Ok(())
}

pub fn cmd_phantom(mut cfg: RunConfig) -> CliResult<()> {
    let (h, w) = parse_dims(cfg.require_str("phantom.dims")?)?;
    cfg.default_usize("phantom.ellipses", 6);
    cfg.default_u64("phantom.seed", 0);
    cfg.default_f64("phantom.noise_std", 0.0);
    cfg.default_u64("phantom.noise_seed", 0);
    let out = PathBuf::from(cfg.require_str("phantom.out")?);

    let image = make_phantom(
        h,
        w,
        cfg.usize("phantom.ellipses").unwrap(),
        cfg.u64("phantom.seed").unwrap(),
    )?;
    save_image(&out, &image)?;
    if let Some(pgm) = cfg.str("phantom.pgm") {
        export_pgm(&image, Path::new(pgm))?;
    }
    if let Some(mask_path) = cfg.str("phantom.mask") {
        let kspace_out = PathBuf::from(cfg.require_str("phantom.kspace_out")?);
        let mask = load_mask(Path::new(mask_path))?;
        let mut f = encode(&image, &mask)?;
        add_measurement_noise(
            &mut f,
            &mask,
            cfg.f64("phantom.noise_std").unwrap(),
            cfg.u64("phantom.noise_seed").unwrap(),
        );
        save_kspace(&kspace_out, &f)?;
        println!("wrote {}", kspace_out.display());
    }
    cfg.write_sidecar(&sidecar_path(&out))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn net_spec_from(cfg: &RunConfig) -> NetSpec {
    NetSpec {
        input_channels: 8,
        width: cfg.usize("prior.width").unwrap(),
        residual_blocks: cfg.usize("prior.blocks").unwrap(),
        convs_per_block: cfg.usize("prior.convs_per_block").unwrap(),
        head_layers: cfg.usize("prior.head_layers").unwrap(),
    }
}

pub fn cmd_train(mut cfg: RunConfig) -> CliResult<()> {
    cfg.default_str("wavelet.name", "haar");
    cfg.default_usize("prior.width", 16);
    cfg.default_usize("prior.blocks", 1);
    cfg.default_usize("prior.convs_per_block", 2);
    cfg.default_usize("prior.head_layers", 0);
    cfg.default_f64("prior.sigma_eta", 25.0);
    cfg.default_usize("train.patch_size", 40);
    cfg.default_usize("train.batch_size", 128);
    cfg.default_usize("train.epochs", 20);
    cfg.default_f64("train.learning_rate", 1e-3);
    cfg.default_u64("train.seed", 0);
    cfg.default_usize("train.images", 8);
    cfg.default_str("train.image_dims", "64x64");
    cfg.default_u64("train.image_seed", 9000);
    cfg.default_usize("train.ellipses", 6);
    cfg.default_usize("train.stride", 8);
    cfg.default_usize("train.max_patches", 2000);
    let out = PathBuf::from(cfg.require_str("train.out")?);

    let fb_name = cfg.str("wavelet.name").unwrap().to_string();
    let fb = FilterBank::named(&fb_name)?;
    let images: Vec<ComplexImage> = if let Some(dir) = cfg.str("train.data") {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| CliError::Data(format!("{dir}: {e}")))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "bin").unwrap_or(false))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(CliError::Data(format!("{dir}: no .bin images found")));
        }
        paths
            .iter()
            .map(|p| load_image(p).map_err(CliError::from))
            .collect::<CliResult<_>>()?
    } else {
        let (ih, iw) = parse_dims(cfg.str("train.image_dims").unwrap())?;
        let base = cfg.u64("train.image_seed").unwrap();
        let ellipses = cfg.usize("train.ellipses").unwrap();
        (0..cfg.usize("train.images").unwrap())
            .map(|i| make_phantom(ih, iw, ellipses, base + i as u64).map_err(CliError::from))
            .collect::<CliResult<_>>()?
    };

    let patch = cfg.usize("train.patch_size").unwrap();
    let stride = cfg.usize("train.stride").unwrap();
    let mut patches: Vec<Tensor> = Vec::new();
    for image in &images {
        let tensor = uwt_forward(image, &fb)?;
        patches.extend(extract_patches(&tensor, patch, stride, None, 0)?);
    }
    // global seeded shuffle, then truncate to the patch budget
    let max_patches = cfg.usize("train.max_patches").unwrap();
    shuffle_truncate(
        &mut patches,
        max_patches,
        cfg.u64("train.image_seed").unwrap() ^ 0x5eed,
    );
    if patches.is_empty() {
        return Err(CliError::Data(
            "no training patches; images smaller than the patch size?".into(),
        ));
    }

    let spec = net_spec_from(&cfg);
    let sigma = normalize_sigma(cfg.f64("prior.sigma_eta").unwrap());
    let train_seed = cfg.u64("train.seed").unwrap();
    let mut net = DaeNetwork::from_spec_seeded(&spec, sigma, train_seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let tc = TrainConfig {
        patch_size: patch,
        batch_size: cfg.usize("train.batch_size").unwrap(),
        epochs: cfg.usize("train.epochs").unwrap(),
        learning_rate: cfg.f64("train.learning_rate").unwrap(),
        sigma_eta: sigma,
        seed: train_seed,
        ..TrainConfig::default()
    };
    println!(
        "training width-{} net on {} patches for {} epochs",
        spec.width,
        patches.len(),
        tc.epochs
    );
    let history = wdaep::prior::train_dae(&mut net, &patches, &tc)?;
    for (e, loss) in history.iter().enumerate() {
        println!("epoch {:>3}: loss {loss:.6e}", e + 1);
    }

    let meta = CheckpointMeta {
        train_seed,
        epochs: tc.epochs,
        filter_bank: fb_name,
        spec: Some(spec),
    };
    save_checkpoint(&out, &net, &meta)?;
    let mut loss_csv = String::from("epoch,loss\n");
    for (e, loss) in history.iter().enumerate() {
        writeln!(loss_csv, "{},{loss:?}", e + 1).unwrap();
    }
    atomic_write(&out.join("loss.csv"), loss_csv.as_bytes())?;
    cfg.write_sidecar(&out.join("config.resolved.json"))?;
    println!("wrote checkpoint {}", out.display());
    Ok(())
}

/// Resolve the reconstruction noise level: explicit key, else the paper's
/// policy of 20/255 for R <= 5 and 25/255 above.
fn resolve_recon_sigma(cfg: &mut RunConfig, mask: &SamplingMask) {
    if !cfg.contains("recon.sigma_eta") {
        let paper = if mask.achieved_r <= 5.0 { 20.0 } else { 25.0 };
        cfg.set_f64("recon.sigma_eta", paper);
    }
}

fn recon_config_from(cfg: &RunConfig) -> CliResult<ReconConfig> {
    Ok(ReconConfig {
        lambda: cfg.f64("recon.lambda").unwrap(),
        beta: cfg.f64("recon.beta").unwrap(),
        iterations: cfg.usize("recon.iterations").unwrap(),
        sigma_eta: normalize_sigma(cfg.f64("recon.sigma_eta").unwrap()),
        noise_mode: NoiseMode::parse(cfg.str("recon.noise_mode").unwrap())?,
        seed: cfg.u64("recon.seed").unwrap(),
        stop_tol: cfg.f64("recon.stop_tol").unwrap(),
        filter_bank: cfg.str("wavelet.name").unwrap().to_string(),
    })
}

fn trace_csv(result: &ReconResult, with_reference: bool) -> String {
    let mut out = String::from(if with_reference {
        "iteration,rel_change,psnr,ssim,hfen\n"
    } else {
        "iteration,rel_change\n"
    });
    for t in &result.trace {
        if with_reference {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                t.iteration,
                t.rel_change,
                t.psnr.unwrap(),
                t.ssim.unwrap(),
                t.hfen.unwrap()
            )
            .unwrap();
        } else {
            writeln!(out, "{},{:?}", t.iteration, t.rel_change).unwrap();
        }
    }
    out
}

pub fn cmd_reconstruct(mut cfg: RunConfig) -> CliResult<()> {
    let kspace_path = PathBuf::from(cfg.require_str("reconstruct.kspace")?);
    let mask_path = PathBuf::from(cfg.require_str("reconstruct.mask")?);
    let ckpt_path = PathBuf::from(cfg.require_str("reconstruct.ckpt")?);
    let out = PathBuf::from(cfg.require_str("reconstruct.out")?);

    let f = load_kspace(&kspace_path)?;
    let mask = load_mask(&mask_path)?;
    let (net, meta) = load_checkpoint(&ckpt_path)?;

    cfg.default_str("wavelet.name", &meta.filter_bank);
    resolve_recon_sigma(&mut cfg, &mask);
    cfg.default_f64("recon.lambda", 0.1);
    cfg.default_f64("recon.beta", 1.0);
    cfg.default_usize("recon.iterations", 100);
    cfg.default_str("recon.noise_mode", "fresh_noise");
    cfg.default_u64("recon.seed", 0);
    cfg.default_f64("recon.stop_tol", 1e-5);
    let rc = recon_config_from(&cfg)?;

    let reference = match cfg.str("reconstruct.ref") {
        Some(p) => Some(load_image(Path::new(p))?),
        None => None,
    };
    let result = reconstruct(&f, &mask, &net, &rc, reference.as_ref())?;

    save_image(&out, &result.image)?;
    let trace_path = cfg
        .str("reconstruct.trace")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            let mut name = out.file_name().unwrap().to_os_string();
            name.push(".trace.csv");
            out.with_file_name(name)
        });
    atomic_write(&trace_path, trace_csv(&result, reference.is_some()).as_bytes())?;
    if let Some(pgm) = cfg.str("reconstruct.pgm") {
        export_pgm(&result.image, Path::new(pgm))?;
    }
    cfg.write_sidecar(&sidecar_path(&out))?;

    println!(
        "wrote {} after {} iterations (converged: {})",
        out.display(),
        result.iterations_run,
        result.converged
    );
    if let Some(reference) = &reference {
        let report = metrics::report(&result.image, reference)?;
        println!(
            "psnr {:.4} dB, ssim {:.4}, hfen {:.4}",
            report.psnr, report.ssim, report.hfen
        );
    }
    Ok(())
}

pub fn cmd_metrics(cfg: RunConfig) -> CliResult<()> {
    let img = load_image(Path::new(cfg.require_str("metrics.img")?))?;
    let reference = load_image(Path::new(cfg.require_str("metrics.ref")?))?;
    let report = metrics::report(&img, &reference)?;
    let line = format!("{:?},{:?},{:?}", report.psnr, report.ssim, report.hfen);
    println!("{line}");
    println!(
        "PSNR {:.4} dB | SSIM {:.6} | HFEN {:.6}",
        report.psnr, report.ssim, report.hfen
    );
    if let Some(out) = cfg.str("metrics.out") {
        let out = PathBuf::from(out);
        atomic_write(&out, format!("{line}\n").as_bytes())?;
        cfg.write_sidecar(&sidecar_path(&out))?;
    }
    Ok(())
}

const SWEEP_AXES: &[&str] = &["sigma_eta", "lambda", "wavelet", "width", "blocks"];

pub fn cmd_sweep(mut cfg: RunConfig) -> CliResult<()> {
    let axis = cfg.require_str("sweep.axis")?.to_string();
    if !SWEEP_AXES.contains(&axis.as_str()) {
        return Err(CliError::Usage(format!(
            "sweep axis '{axis}' must be one of {SWEEP_AXES:?}"
        )));
    }
    let values: Vec<String> = cfg
        .require_str("sweep.values")?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Usage("sweep.values is empty".into()));
    }
    let phantom = load_image(Path::new(cfg.require_str("sweep.phantom")?))?;
    let mask = load_mask(Path::new(cfg.require_str("sweep.mask")?))?;
    let out_dir = PathBuf::from(cfg.require_str("sweep.out")?);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;

    let needs_per_value_ckpt = matches!(axis.as_str(), "width" | "blocks");
    let template = cfg.str("sweep.ckpts").map(|s| s.to_string());
    let single = cfg.str("sweep.ckpt").map(|s| s.to_string());
    if needs_per_value_ckpt && template.is_none() {
        return Err(CliError::Data(format!(
            "sweeping '{axis}' changes the architecture; pass --ckpts with a {{value}} template"
        )));
    }
    if template.is_none() && single.is_none() {
        return Err(CliError::Usage("sweep needs --ckpt or --ckpts".into()));
    }

    resolve_recon_sigma(&mut cfg, &mask);
    cfg.default_str("wavelet.name", "haar");
    cfg.default_f64("recon.lambda", 0.1);
    cfg.default_f64("recon.beta", 1.0);
    cfg.default_usize("recon.iterations", 100);
    cfg.default_str("recon.noise_mode", "fresh_noise");
    cfg.default_u64("recon.seed", 0);
    cfg.default_f64("recon.stop_tol", 1e-5);

    let f = encode(&phantom, &mask)?;
    let mut table = String::from("value,psnr,ssim,hfen\n");
    for value in &values {
        let ckpt_path = match &template {
            Some(t) => PathBuf::from(t.replace("{value}", value)),
            None => PathBuf::from(single.as_ref().unwrap()),
        };
        if !ckpt_path.join("manifest.json").exists() {
            return Err(CliError::Data(format!(
                "checkpoint for value '{value}' not found at {}",
                ckpt_path.display()
            )));
        }
        let (net, _) = load_checkpoint(&ckpt_path)?;

        let mut rc = recon_config_from(&cfg)?;
        match axis.as_str() {
            "sigma_eta" => {
                let paper: f64 = value.parse().map_err(|_| {
                    CliError::Usage(format!("sigma_eta value '{value}' is not a number"))
                })?;
                rc.sigma_eta = normalize_sigma(paper);
            }
            "lambda" => {
                rc.lambda = value.parse().map_err(|_| {
                    CliError::Usage(format!("lambda value '{value}' is not a number"))
                })?;
            }
            "wavelet" => rc.filter_bank = value.clone(),
            // width/blocks change the checkpoint, not the solver settings
            _ => {}
        }

        let result = reconstruct(&f, &mask, &net, &rc, Some(&phantom))?;
        let report = metrics::report(&result.image, &phantom)?;
        writeln!(
            table,
            "{value},{:?},{:?},{:?}",
            report.psnr, report.ssim, report.hfen
        )
        .unwrap();
        atomic_write(
            &out_dir.join(format!("trace_{axis}_{value}.csv")),
            trace_csv(&result, true).as_bytes(),
        )?;
        println!(
            "{axis}={value}: psnr {:.4} ssim {:.4} hfen {:.4} ({} iterations)",
            report.psnr, report.ssim, report.hfen, result.iterations_run
        );
    }
    atomic_write(&out_dir.join("table.csv"), table.as_bytes())?;
    cfg.write_sidecar(&out_dir.join("config.resolved.json"))?;
    println!("wrote {}", out_dir.join("table.csv").display());
    Ok(())
}

pub fn cmd_inspect(cfg: RunConfig) -> CliResult<()> {
    let ckpt = PathBuf::from(cfg.require_str("inspect.ckpt")?);
    let layer_idx = cfg.require_usize("inspect.layer")?;
    let out = PathBuf::from(cfg.require_str("inspect.out")?);

    let (net, _) = load_checkpoint(&ckpt)?;
    let convs: Vec<_> = net
        .layers()
        .iter()
        .filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
        .collect();
    if layer_idx >= convs.len() {
        return Err(CliError::Usage(format!(
            "layer index {layer_idx} out of range; checkpoint has {} convolution layers",
            convs.len()
        )));
    }
    let conv = convs[layer_idx];
    let k = conv.kernel;
    let n_kernels = conv.out_channels * conv.in_channels;
    let grid = (n_kernels as f64).sqrt().ceil() as usize;
    let side = grid * (k + 1) + 1;
    let mut pixels = vec![0u16; side * side];
    for t in 0..n_kernels {
        let taps = &conv.weight[t * k * k..(t + 1) * k * k];
        let lo = taps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = taps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = (t / grid) * (k + 1) + 1;
        let left = (t % grid) * (k + 1) + 1;
        for i in 0..k {
            for j in 0..k {
                // constant kernels render mid-gray
                let v = if hi > lo {
                    ((taps[i * k + j] - lo) / (hi - lo) * 65535.0).round() as u16
                } else {
                    32768
                };
                pixels[(top + i) * side + left + j] = v;
            }
        }
    }
    write_pgm16(&out, side, side, &pixels)?;
    cfg.write_sidecar(&sidecar_path(&out))?;
    println!(
        "wrote {} ({}x{} tiles of {}x{} kernels)",
        out.display(),
        grid,
        grid,
        k,
        k
    );
    Ok(())
}
