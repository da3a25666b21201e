//! Subcommand implementations. Each returns the process exit code.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use omtrans_core::liouville::{g2_zero_delay, solve_steady, ModelKind};
use omtrans_core::model::{eigenvalue_om, om_sector_levels, Cavity};
use omtrans_core::transport::{run_sweep, scenario_point, Backend, SweepRecord, SweepSpec};
use omtrans_core::weakdrive::upb_roots;

use crate::config::{Format, RunConfig};
use crate::output::{fmt_f64, sweep_svg, write_csv, write_json};
use crate::validate::run_suites;
use crate::{exit, CliError};

fn create(dir: &Path, file: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(file);
    let f = File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    Ok((path, BufWriter::new(f)))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_lines(dir: &Path, file: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
    let (path, mut w) = create(dir, file)?;
    let mut body = String::new();
    body.push_str(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    finish(&path, w)
}

pub fn sweep_spec(cfg: &RunConfig) -> SweepSpec {
    SweepSpec {
        params: cfg.params,
        rule: cfg.rule,
        grid: cfg.sweep.grid(),
        study: cfg.study,
        convention: cfg.convention,
        solvers: cfg.solvers.clone(),
    }
}

/// Writes the sweep in every configured format and returns the records.
pub fn sweep_records(cfg: &RunConfig) -> Result<Vec<SweepRecord>, CliError> {
    let spec = sweep_spec(cfg);
    info!(
        "sweep {}: {} points x {} backends, study {}",
        cfg.name,
        spec.grid.len(),
        spec.solvers.len(),
        cfg.study.name()
    );
    let records = run_sweep(&spec);
    for fmt in &cfg.formats {
        match fmt {
            Format::Csv => {
                let (path, mut w) = create(&cfg.out, &format!("{}.csv", cfg.name))?;
                write_csv(&mut w, &records).map_err(|e| CliError::io(path.display().to_string(), e.into()))?;
                finish(&path, w)?;
            }
            Format::Json => {
                let (path, mut w) = create(&cfg.out, &format!("{}.json", cfg.name))?;
                write_json(&mut w, &records).map_err(|e| CliError::io(path.display().to_string(), e.into()))?;
                finish(&path, w)?;
            }
            Format::Svg => {
                let (path, mut w) = create(&cfg.out, &format!("{}.svg", cfg.name))?;
                w.write_all(sweep_svg(&records).as_bytes())
                    .map_err(|e| CliError::io(path.display().to_string(), e))?;
                finish(&path, w)?;
            }
        }
    }
    Ok(records)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32, CliError> {
    let records = sweep_records(cfg)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let unconverged = records.iter().filter(|r| r.converged == Some(false)).count();
    if failed + unconverged > 0 {
        log::warn!("{failed} failed points, {unconverged} points not converged in truncation");
        return Ok(exit::NON_CONVERGENCE);
    }
    Ok(exit::SUCCESS)
}

pub fn cmd_steady(cfg: &RunConfig) -> Result<i32, CliError> {
    let (plus, minus) = cfg.study.scenarios();
    let header = "backend,scenario,q_l,q_c,q_r,n_l,n_c,n_r,g2_l,g2_c,g2_r,dims";
    let mut rows = Vec::new();
    let mut code = exit::SUCCESS;
    for solver in &cfg.solvers {
        for scenario in [plus, minus] {
            match scenario_point(&cfg.params, scenario, &cfg.convention, solver) {
                Ok(sol) => {
                    let mut cols = vec![solver.backend.name().to_string(), scenario.name().to_string()];
                    cols.extend(sol.currents.iter().chain(&sol.occupations).map(|&x| fmt_f64(x)));
                    cols.extend(sol.g2.iter().map(|x| x.map(fmt_f64).unwrap_or_default()));
                    cols.push(sol.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x"));
                    rows.push(cols.join(","));
                }
                Err(e) => {
                    log::error!("{} / {}: {e}", solver.backend.name(), scenario.name());
                    code = exit::NON_CONVERGENCE;
                }
            }
        }
        if solver.backend != Backend::Analytic {
            // Density-matrix sanity at the +k point.
            let kind = match solver.backend {
                Backend::EffectiveKerr => ModelKind::Kerr,
                _ => ModelKind::Full,
            };
            let p = cfg.params.with_drives(cfg.convention.amplitudes(plus));
            if let Ok(out) = solve_steady(&p, kind, &solver.truncation, solver.method) {
                info!(
                    "{}: method {:?}, trace {:e}, hermiticity defect {:e}, g2_L {:?}",
                    solver.backend.name(),
                    out.method,
                    out.rho.trace().re,
                    out.rho.hermiticity_defect(),
                    g2_zero_delay(&out.rho, Cavity::L.index())
                );
            }
        }
    }
    println!("{header}");
    for r in &rows {
        println!("{r}");
    }
    write_lines(&cfg.out, &format!("{}-steady.csv", cfg.name), header, &rows)?;
    Ok(code)
}

pub fn spectrum_rows(cfg: &RunConfig) -> Result<Vec<(usize, usize, f64, f64)>, CliError> {
    let sp = &cfg.spectrum;
    let mut rows = Vec::new();
    for s in 0..=sp.s_max {
        let levels = om_sector_levels(&cfg.params, s, sp.phonon_dim, sp.n_max + 1)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        for (n, numeric) in levels.into_iter().enumerate() {
            rows.push((s, n, eigenvalue_om(s as u32, n as u32, &cfg.params), numeric));
        }
    }
    Ok(rows)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<i32, CliError> {
    let header = "s,n,analytic,numeric,difference";
    let rows: Vec<String> = spectrum_rows(cfg)?
        .into_iter()
        .map(|(s, n, a, x)| format!("{s},{n},{},{},{}", fmt_f64(a), fmt_f64(x), fmt_f64(x - a)))
        .collect();
    println!("{header}");
    for r in &rows {
        println!("{r}");
    }
    write_lines(&cfg.out, &format!("{}-spectrum.csv", cfg.name), header, &rows)?;
    Ok(exit::SUCCESS)
}

pub fn cmd_upb_find(cfg: &RunConfig) -> Result<i32, CliError> {
    let mut p = cfg.params;
    p = p.with_drives(cfg.convention.amplitudes(cfg.study.scenarios().0));
    let roots = upb_roots(&p, &cfg.upb);
    let header = "g,delta,g2_l,relative_depth";
    let rows: Vec<String> = roots
        .iter()
        .map(|r| format!("{},{},{},{}", fmt_f64(r.g), fmt_f64(r.delta), fmt_f64(r.g2_l), fmt_f64(r.relative_depth)))
        .collect();
    println!("{header}");
    for r in &rows {
        println!("{r}");
    }
    if roots.is_empty() {
        log::warn!("no unconventional-blockade roots in the search box");
    }
    write_lines(&cfg.out, &format!("{}-upb.csv", cfg.name), header, &rows)?;
    Ok(exit::SUCCESS)
}

pub fn cmd_validate(seed: u64) -> i32 {
    let results = run_suites(seed);
    let mut ok = true;
    for r in &results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status}  {:<40} {} draws, {} failures", r.name, r.draws, r.failures);
        if let Some(e) = &r.example {
            println!("      first failure: {e}");
        }
        ok &= r.passed();
    }
    if ok {
        exit::SUCCESS
    } else {
        exit::VALIDATION_FAILURE
    }
}
