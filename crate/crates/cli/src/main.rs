//! `wdaep` command-line entry point.
//!
//! Grammar: `wdaep <command> [--config FILE] [--key value ...]`, where keys
//! are either per-command flags or fully qualified configuration keys
//! (`--recon.lambda 0.5`). `WDAEP_THREADS` caps intra-op parallelism.

mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use config::{CliError, CliResult, RunConfig};

const USAGE: &str = "usage: wdaep <command> [--config FILE] [--key value ...]

commands:
  maskgen      generate a k-space sampling mask
               --pattern cartesian1d|radial|random2d --dims HxW --r R
               [--seed N --center-fraction F --decay-power P] --out FILE
  phantom      generate a synthetic phantom (and optionally its k-space)
               --dims HxW [--ellipses N --seed N --pgm FILE]
               [--mask FILE --kspace-out FILE --noise-std S] --out FILE
  train        train the wavelet-domain denoising prior
               [--wavelet NAME --width N --blocks N --sigma-eta S
                --patch-size N --batch-size N --epochs N --seed N
                --images N --image-dims HxW --data DIR] --out DIR
  reconstruct  run the iterative solver on measured k-space
               --kspace FILE --mask FILE --ckpt DIR --out FILE
               [--ref FILE --lambda L --iters K --sigma-eta S
                --noise-mode fresh_noise|clean_input --seed N
                --stop-tol T --trace FILE --pgm FILE]
  metrics      compare an image against a reference
               --img FILE --ref FILE [--out FILE]
  sweep        reconstruct across one parameter axis and tabulate metrics
               --axis sigma_eta|lambda|wavelet|width|blocks --values a,b,c
               --phantom FILE --mask FILE (--ckpt DIR | --ckpts TEMPLATE)
               --out DIR
  inspect      export a convolution layer's kernels as a tiled graymap
               --ckpt DIR --layer N --out FILE
";

fn aliases(command: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match command {
        "maskgen" => &[
            ("pattern", "mask.pattern"),
            ("dims", "mask.dims"),
            ("r", "mask.target_r"),
            ("seed", "mask.seed"),
            ("center-fraction", "mask.center_fraction"),
            ("decay-power", "mask.decay_power"),
            ("out", "maskgen.out"),
        ],
        "phantom" => &[
            ("dims", "phantom.dims"),
            ("ellipses", "phantom.ellipses"),
            ("seed", "phantom.seed"),
            ("out", "phantom.out"),
            ("pgm", "phantom.pgm"),
            ("mask", "phantom.mask"),
            ("kspace-out", "phantom.kspace_out"),
            ("noise-std", "phantom.noise_std"),
            ("noise-seed", "phantom.noise_seed"),
        ],
        "train" => &[
            ("wavelet", "wavelet.name"),
            ("width", "prior.width"),
            ("blocks", "prior.blocks"),
            ("convs-per-block", "prior.convs_per_block"),
            ("head-layers", "prior.head_layers"),
            ("sigma-eta", "prior.sigma_eta"),
            ("patch-size", "train.patch_size"),
            ("batch-size", "train.batch_size"),
            ("epochs", "train.epochs"),
            ("lr", "train.learning_rate"),
            ("seed", "train.seed"),
            ("images", "train.images"),
            ("image-dims", "train.image_dims"),
            ("image-seed", "train.image_seed"),
            ("ellipses", "train.ellipses"),
            ("stride", "train.stride"),
            ("max-patches", "train.max_patches"),
            ("data", "train.data"),
            ("out", "train.out"),
        ],
        "reconstruct" => &[
            ("kspace", "reconstruct.kspace"),
            ("mask", "reconstruct.mask"),
            ("ckpt", "reconstruct.ckpt"),
            ("out", "reconstruct.out"),
            ("ref", "reconstruct.ref"),
            ("trace", "reconstruct.trace"),
            ("pgm", "reconstruct.pgm"),
            ("lambda", "recon.lambda"),
            ("beta", "recon.beta"),
            ("iters", "recon.iterations"),
            ("sigma-eta", "recon.sigma_eta"),
            ("noise-mode", "recon.noise_mode"),
            ("seed", "recon.seed"),
            ("stop-tol", "recon.stop_tol"),
            ("wavelet", "wavelet.name"),
        ],
        "metrics" => &[
            ("img", "metrics.img"),
            ("ref", "metrics.ref"),
            ("out", "metrics.out"),
        ],
        "sweep" => &[
            ("axis", "sweep.axis"),
            ("values", "sweep.values"),
            ("phantom", "sweep.phantom"),
            ("mask", "sweep.mask"),
            ("ckpt", "sweep.ckpt"),
            ("ckpts", "sweep.ckpts"),
            ("out", "sweep.out"),
            ("lambda", "recon.lambda"),
            ("beta", "recon.beta"),
            ("iters", "recon.iterations"),
            ("sigma-eta", "recon.sigma_eta"),
            ("noise-mode", "recon.noise_mode"),
            ("seed", "recon.seed"),
            ("stop-tol", "recon.stop_tol"),
            ("wavelet", "wavelet.name"),
        ],
        "inspect" => &[
            ("ckpt", "inspect.ckpt"),
            ("layer", "inspect.layer"),
            ("out", "inspect.out"),
        ],
        _ => return None,
    })
}

fn parse_invocation(command: &str, args: &[String]) -> CliResult<RunConfig> {
    let alias_table = aliases(command)
        .ok_or_else(|| CliError::Usage(format!("unknown command '{command}'\n\n{USAGE}")))?;

    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let flag = args[i]
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("unexpected argument '{}'", args[i])))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| CliError::Usage(format!("flag --{flag} needs a value")))?;
        pairs.push((flag.to_string(), value.clone()));
        i += 2;
    }

    let mut cfg = RunConfig::new();
    for (flag, value) in &pairs {
        if flag == "config" {
            cfg = RunConfig::load(Path::new(value))?;
        }
    }
    for (flag, value) in &pairs {
        if flag == "config" {
            continue;
        }
        let key = alias_table
            .iter()
            .find(|(f, _)| f == flag)
            .map(|(_, k)| *k)
            .unwrap_or(flag.as_str());
        cfg.set_from_str(key, value)?;
    }
    Ok(cfg)
}

fn configure_threads() -> CliResult<()> {
    if let Ok(raw) = std::env::var("WDAEP_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Usage(format!("WDAEP_THREADS='{raw}' is not an integer")))?;
        if n == 0 {
            return Err(CliError::Usage("WDAEP_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> CliResult<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = match args.first().map(String::as_str) {
        None | Some("--help") | Some("-h") | Some("help") => {
            return Err(CliError::Usage(USAGE.trim_end().to_string()));
        }
        Some(c) => c,
    };
    configure_threads()?;
    let cfg = parse_invocation(command, &args[1..])?;
    match command {
        "maskgen" => commands::cmd_maskgen(cfg),
        "phantom" => commands::cmd_phantom(cfg),
        "train" => commands::cmd_train(cfg),
        "reconstruct" => commands::cmd_reconstruct(cfg),
        "metrics" => commands::cmd_metrics(cfg),
        "sweep" => commands::cmd_sweep(cfg),
        "inspect" => commands::cmd_inspect(cfg),
        _ => unreachable!("validated by parse_invocation"),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
