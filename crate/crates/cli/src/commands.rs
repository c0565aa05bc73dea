//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use nv_strain::fit::{fit_dual_lorentzian_with, invert_to_strain};
use nv_strain::spectrum::metrics;
use nv_strain::{fidelity_curve, standard_orientations, synthesize};
use rayon::prelude::*;

use crate::config::{parse_config, FitConfig, SimulateConfig, SpectrumFormat};
use crate::io::{
    fidelity_to_csv, read_spectrum_csv, residuals_to_csv, spectrum_to_csv, spectrum_to_json,
    to_json_string, write_text, FitDoc, FitResultDoc, Meta, MetricsDoc, ModelDoc, OrientationsDoc,
    SimulateDoc, StrainEstimateDoc,
};
use crate::{CliError, FidelityArgs, FitArgs, MetricsArgs, OrientationsArgs, SimulateArgs};

fn load_config<T: for<'de> serde::Deserialize<'de> + Default>(
    path: Option<&Path>,
) -> Result<T, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text, &p.display().to_string())
        }
        None => Ok(T::default()),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut config: SimulateConfig = load_config(args.config.as_deref())?;
    if let Some(d) = args.d_ghz {
        config.d_ghz = d;
    }
    if let Some(phi) = args.phi_mw_rad {
        config.phi_mw_rad = phi;
    }
    if let Some(g) = args.gamma_ghz {
        config.gamma_ghz = g;
    }
    if let Some(depth) = args.depth {
        config.depth = depth;
    }
    if let Some(b) = args.baseline {
        config.baseline = b;
    }

    let model = config.model()?;
    let grid = config.grid()?;
    let samples = synthesize(&model, &grid)?;
    let m = metrics(&model);

    let spectrum_path = args.out.clone().unwrap_or_else(|| {
        PathBuf::from(match config.format {
            SpectrumFormat::Csv => "spectrum.csv",
            SpectrumFormat::Json => "spectrum.json",
        })
    });
    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| spectrum_path.with_extension("sidecar.json"));

    let body = match config.format {
        SpectrumFormat::Csv => spectrum_to_csv(&samples),
        SpectrumFormat::Json => spectrum_to_json(&samples),
    };
    write_text(&spectrum_path, &body)?;

    let doc = SimulateDoc {
        meta: Meta::new(),
        model: ModelDoc::from_model(&model),
        metrics: MetricsDoc::from_metrics(&m),
    };
    write_text(&sidecar_path, &to_json_string(&doc))?;
    println!(
        "wrote {} ({} points) and {}",
        spectrum_path.display(),
        samples.len(),
        sidecar_path.display()
    );
    Ok(())
}

fn fit_one(
    input: &Path,
    out: &Path,
    residuals: Option<&Path>,
    config: &FitConfig,
) -> Result<bool, CliError> {
    let samples = read_spectrum_csv(input)?;
    let options = config.options()?;
    let result = fit_dual_lorentzian_with(&samples, config.guess, &options)?;
    let estimate = if result.converged {
        Some(invert_to_strain(&result, config.d_ghz, config.phi_mw_rad)?)
    } else {
        None
    };
    let doc = FitResultDoc {
        meta: Meta::new(),
        fit: FitDoc::from_result(&result),
        metrics: estimate
            .as_ref()
            .map(|e| StrainEstimateDoc::from_estimate(config.d_ghz, e)),
    };
    write_text(out, &to_json_string(&doc))?;
    if let Some(res_path) = residuals {
        write_text(res_path, &residuals_to_csv(&samples, &result.params))?;
    }
    Ok(result.converged)
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let config: FitConfig = {
        let mut c: FitConfig = load_config(args.config.as_deref())?;
        if let Some(d) = args.d_ghz {
            c.d_ghz = d;
        }
        if let Some(phi) = args.phi_mw_rad {
            c.phi_mw_rad = Some(phi);
        }
        c.options()?;
        c
    };

    match (&args.input, &args.input_dir) {
        (Some(input), None) => {
            let out = args
                .out
                .clone()
                .unwrap_or_else(|| input.with_extension("fit.json"));
            let converged = fit_one(input, &out, args.residuals.as_deref(), &config)?;
            if converged {
                println!("wrote {} (converged)", out.display());
                Ok(())
            } else {
                println!("wrote {} (NOT converged)", out.display());
                Err(CliError::non_convergence(format!(
                    "{}: fit did not converge",
                    input.display()
                )))
            }
        }
        (None, Some(dir)) => cmd_fit_batch(dir, args.out_dir.as_deref(), &config),
        _ => Err(CliError::config(
            "give exactly one of --input FILE or --input-dir DIR",
        )),
    }
}

fn cmd_fit_batch(dir: &Path, out_dir: Option<&Path>, config: &FitConfig) -> Result<(), CliError> {
    let mut inputs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(CliError::config(format!(
            "no .csv files in {}",
            dir.display()
        )));
    }
    if let Some(d) = out_dir {
        fs::create_dir_all(d)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", d.display())))?;
    }
    let results: Vec<(PathBuf, Result<bool, CliError>)> = inputs
        .par_iter()
        .map(|input| {
            let stem = input.file_stem().unwrap_or_default();
            let out = out_dir
                .unwrap_or(dir)
                .join(Path::new(stem).with_extension("fit.json"));
            (input.clone(), fit_one(input, &out, None, config))
        })
        .collect();

    let mut any_config_error = None;
    let mut any_unconverged = false;
    for (input, outcome) in &results {
        match outcome {
            Ok(true) => println!("{}: converged", input.display()),
            Ok(false) => {
                println!("{}: NOT converged", input.display());
                any_unconverged = true;
            }
            Err(e) => {
                println!("{}: error: {e}", input.display());
                any_config_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if let Some(msg) = any_config_error {
        Err(CliError::config(msg))
    } else if any_unconverged {
        Err(CliError::non_convergence(
            "one or more fits did not converge",
        ))
    } else {
        Ok(())
    }
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<(), CliError> {
    let (shift, splitting, imbalance): (f64, f64, Option<f64>) =
        match (&args.fit_json, &args.config) {
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::config(format!("cannot read {}: {e}", path.display()))
                })?;
                let doc: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                let m = doc
                    .get("metrics")
                    .and_then(|m| m.as_object())
                    .ok_or_else(|| {
                        CliError::config(format!(
                            "{}: no `metrics` object (fit not converged?)",
                            path.display()
                        ))
                    })?;
                let field = |name: &str| -> Result<f64, CliError> {
                    m.get(name).and_then(|v| v.as_f64()).ok_or_else(|| {
                        CliError::config(format!("{}: missing field `{name}`", path.display()))
                    })
                };
                (
                    field("m_z_hat_ghz")?,
                    2.0 * field("m_perp_hat_ghz")?,
                    Some(field("imbalance_hat")?),
                )
            }
            (None, Some(path)) => {
                let config: SimulateConfig = load_config(Some(path.as_path()))?;
                let m = metrics(&config.model()?);
                (m.shift_ghz, m.splitting_ghz, m.imbalance)
            }
            _ => {
                return Err(CliError::config(
                    "give exactly one of --fit-json FILE or --config FILE",
                ))
            }
        };

    println!("shift     = {} GHz", crate::io::fmt_f64(shift));
    println!("splitting = {} GHz", crate::io::fmt_f64(splitting));
    match imbalance {
        Some(i) => println!("imbalance = {} (dimensionless)", crate::io::fmt_f64(i)),
        None => println!("imbalance = undefined (zero splitting)"),
    }

    if let Some(out) = &args.json {
        #[derive(serde::Serialize)]
        struct MetricsOnlyDoc {
            meta: Meta,
            metrics: MetricsDoc,
        }
        let doc = MetricsOnlyDoc {
            meta: Meta::new(),
            metrics: MetricsDoc::from_metrics(&nv_strain::StrainMetrics {
                shift_ghz: shift,
                splitting_ghz: splitting,
                imbalance,
            }),
        };
        write_text(out, &to_json_string(&doc))?;
    }
    Ok(())
}

pub fn cmd_orientations(args: &OrientationsArgs) -> Result<(), CliError> {
    let doc = OrientationsDoc {
        meta: Meta::new(),
        orientations: standard_orientations().to_vec(),
    };
    let text = to_json_string(&doc);
    match &args.out {
        Some(path) => {
            write_text(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_fidelity(args: &FidelityArgs) -> Result<(), CliError> {
    if args.points < 2 {
        return Err(CliError::config("need at least 2 grid points"));
    }
    if !(args.n_min >= 0.0 && args.n_max > args.n_min) {
        return Err(CliError::config(
            "need 0 <= n-min < n-max for the photon grid",
        ));
    }
    if args.log && args.n_min <= 0.0 {
        return Err(CliError::config("a log grid needs n-min > 0"));
    }
    let k = args.points;
    let grid: Vec<f64> = (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            if args.log {
                args.n_min * (args.n_max / args.n_min).powf(t)
            } else {
                args.n_min + t * (args.n_max - args.n_min)
            }
        })
        .collect();
    let curve = fidelity_curve(args.contrast, &grid)?;
    let body = fidelity_to_csv(&curve);
    match &args.out {
        Some(path) => {
            write_text(path, &body)?;
            println!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}
