use super::config::RunConfig;
use crate::branchflow::BranchChoice;
use crate::error::{Error, Result};
use crate::orbits::{continue_cylinder, length_spectrum, LengthSpectrum, MorseSource, OrbitCylinder};
use crate::potential::PotentialModel;
use crate::quantum::{cached_eigensolve, g_rho_quantum, QuantumTrace, SpectrumResult};
use crate::semiclassics::{g_rho_predicted, SpectralWindow, TracePrediction};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Where a command writes and how loudly.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Context { out: out.into(), verbose: false }
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.out.join("cache")
    }
}

fn itinerary_word(it: &[BranchChoice]) -> String {
    it.iter()
        .map(|c| match c {
            BranchChoice::Reflect => 'R',
            BranchChoice::Transmit => 'T',
        })
        .collect()
}

/// Closed orbits of the run, with a continued cylinder for each orbit found
/// at the reference energy.
#[derive(Clone, Debug)]
pub struct OrbitSet {
    pub model: PotentialModel,
    pub spectrum: LengthSpectrum,
    pub reference_energy: f64,
    pub slots: Vec<CylinderSlot>,
}

#[derive(Clone, Debug)]
pub struct CylinderSlot {
    /// Index into `spectrum.entries`.
    pub entry: usize,
    pub cylinder: Option<OrbitCylinder>,
    pub error: Option<String>,
}

impl OrbitSet {
    pub fn compute(cfg: &RunConfig) -> Result<OrbitSet> {
        let model = cfg.build_model()?;
        let opts = cfg.orbit_options();
        let energies = cfg.energies();
        let spectrum = length_spectrum(&model, &energies, cfg.l_max(), cfg.run.n_max, &opts)?;
        let center = cfg.window.energy_center;
        let reference_energy = energies
            .iter()
            .copied()
            .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
            .unwrap_or(center);
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min) - cfg.run.cylinder_margin;
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.run.cylinder_margin;
        let at_ref: Vec<usize> = (0..spectrum.entries.len())
            .filter(|&i| (spectrum.entries[i].energy - reference_energy).abs() <= 1e-9 * reference_energy.abs().max(1.0))
            .collect();
        let slots = at_ref
            .par_iter()
            .map(|&i| {
                let orbit = &spectrum.entries[i].orbit;
                if orbit.degenerate {
                    return CylinderSlot {
                        entry: i,
                        cylinder: None,
                        error: Some(format!("degenerate: eigenvalue 1 with multiplicity {}", orbit.unit_multiplicity)),
                    };
                }
                match continue_cylinder(&model, orbit, (lo, hi), cfg.run.cylinder_samples, &opts) {
                    Ok(c) if c.admissible() => CylinderSlot { entry: i, cylinder: Some(c), error: None },
                    Ok(_) => CylinderSlot {
                        entry: i,
                        cylinder: None,
                        error: Some("cylinder contains an inadmissible orbit".into()),
                    },
                    Err(e) => CylinderSlot { entry: i, cylinder: None, error: Some(e.to_string()) },
                }
            })
            .collect();
        Ok(OrbitSet { model, spectrum, reference_energy, slots })
    }

    pub fn degenerate_multiplicity(&self) -> Option<usize> {
        self.spectrum
            .entries
            .iter()
            .filter(|e| e.orbit.degenerate)
            .map(|e| e.orbit.unit_multiplicity)
            .max()
    }

    pub fn cylinders(&self) -> Vec<OrbitCylinder> {
        self.slots.iter().filter_map(|s| s.cylinder.clone()).collect()
    }

    /// Cylinders the window sees. An orbit in the window without a usable
    /// cylinder is an error, so predictions never drop a term silently.
    pub fn cylinders_in(&self, window: &SpectralWindow, allow_degenerate: bool) -> Result<Vec<OrbitCylinder>> {
        let mut out = Vec::new();
        for s in &self.slots {
            let orbit = &self.spectrum.entries[s.entry].orbit;
            let seen = window.rho_hat.contains(orbit.period) || window.rho_hat.contains(-orbit.period);
            match (&s.cylinder, seen) {
                (Some(c), _) => out.push(c.clone()),
                (None, false) => {}
                (None, true) if orbit.degenerate => {
                    if !allow_degenerate {
                        return Err(Error::DegenerateOrbit { multiplicity: orbit.unit_multiplicity });
                    }
                }
                (None, true) => {
                    return Err(Error::InvalidModel(format!(
                        "orbit with period {} in the time window has no cylinder: {}",
                        orbit.period,
                        s.error.clone().unwrap_or_default()
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderSummary {
    pub energies: Vec<f64>,
    pub periods: Vec<f64>,
    pub actions: Vec<f64>,
    pub hamilton_jacobi_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub energy: f64,
    pub period: f64,
    pub primitive_period: f64,
    pub repetition: usize,
    pub itinerary: String,
    pub reflections: usize,
    pub action: f64,
    pub sigma: Option<usize>,
    pub morse_source: Option<MorseSource>,
    pub poincare_routes: (f64, Option<f64>),
    pub unit_multiplicity: usize,
    pub degenerate: bool,
    pub admissible: bool,
    pub symplectic_defect: f64,
    pub closure_residual: f64,
    pub reflection_product: Complex64,
    pub base_x: Vec<f64>,
    pub base_xi: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinder: Option<CylinderSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinder_error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitsReport {
    pub model: String,
    pub reference_energy: f64,
    pub l_max: f64,
    pub n_max: usize,
    pub orbits: Vec<OrbitRecord>,
    pub degenerate_count: usize,
}

fn orbit_records(set: &OrbitSet) -> Vec<OrbitRecord> {
    set.spectrum
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let o = &e.orbit;
            let slot = set.slots.iter().find(|s| s.entry == i);
            OrbitRecord {
                energy: e.energy,
                period: e.period,
                primitive_period: o.primitive_period,
                repetition: o.repetition,
                itinerary: itinerary_word(&e.itinerary),
                reflections: e.reflections,
                action: o.action,
                sigma: o.morse_index,
                morse_source: o.morse_source,
                poincare_routes: o.poincare_routes,
                unit_multiplicity: o.unit_multiplicity,
                degenerate: o.degenerate,
                admissible: o.admissible(),
                symplectic_defect: o.symplectic_defect,
                closure_residual: o.closure_residual,
                reflection_product: o.reflection_product,
                base_x: o.base.x.clone(),
                base_xi: o.base.xi.clone(),
                cylinder: slot.and_then(|s| s.cylinder.as_ref()).map(|c| CylinderSummary {
                    energies: c.energies.clone(),
                    periods: c.orbits.iter().map(|o| o.period).collect(),
                    actions: c.orbits.iter().map(|o| o.action).collect(),
                    hamilton_jacobi_defect: c.hamilton_jacobi_defect(),
                }),
                cylinder_error: slot.and_then(|s| s.error.clone()),
            }
        })
        .collect()
}

fn write_spectrum_csv(ctx: &Context, set: &OrbitSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(ctx.file("spectrum.csv")?);
    w.write_record(["E", "T", "N", "repetition", "itinerary", "S", "sigma", "detIP", "degenerate", "admissible"])?;
    let f = |x: f64| format!("{x:.16e}");
    for e in &set.spectrum.entries {
        let o = &e.orbit;
        w.write_record([
            f(e.energy),
            f(e.period),
            e.reflections.to_string(),
            o.repetition.to_string(),
            itinerary_word(&e.itinerary),
            f(o.action),
            o.morse_index.map_or(String::new(), |s| s.to_string()),
            o.poincare.as_ref().map_or(String::new(), |p| f(p.route_poly)),
            o.degenerate.to_string(),
            o.admissible().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Length spectrum and cylinders: writes `orbits.json` and `spectrum.csv`.
/// Degenerate orbits are reported in both files and then fail the command
/// unless the configuration allows them.
pub fn cmd_orbits(cfg: &RunConfig, ctx: &Context) -> Result<OrbitsReport> {
    let set = OrbitSet::compute(cfg)?;
    ctx.log(format!("{} closed orbits, {} cylinders", set.spectrum.entries.len(), set.cylinders().len()));
    let orbits = orbit_records(&set);
    let report = OrbitsReport {
        model: set.model.name.clone(),
        reference_energy: set.reference_energy,
        l_max: cfg.l_max(),
        n_max: cfg.run.n_max,
        degenerate_count: orbits.iter().filter(|o| o.degenerate).count(),
        orbits,
    };
    serde_json::to_writer_pretty(ctx.file("orbits.json")?, &report)?;
    write_spectrum_csv(ctx, &set)?;
    if let Some(multiplicity) = set.degenerate_multiplicity() {
        if !cfg.output.allow_degenerate {
            return Err(Error::DegenerateOrbit { multiplicity });
        }
    }
    Ok(report)
}

/// Semiclassical prediction on the `(E, h)` grid: writes `predictions.csv`.
pub fn cmd_predict(cfg: &RunConfig, ctx: &Context) -> Result<TracePrediction> {
    let set = OrbitSet::compute(cfg)?;
    let win = cfg.window();
    let cylinders = set.cylinders_in(&win, cfg.output.allow_degenerate)?;
    ctx.log(format!("{} cylinders", cylinders.len()));
    let pred = g_rho_predicted(&cylinders, &win, &cfg.energies(), &cfg.run.h)?;
    pred.write_csv(ctx.file("predictions.csv")?)?;
    Ok(pred)
}

/// Levels needed for `window` at each `h`, solved in parallel over `h` and
/// cached under `cache`.
pub fn spectra_for(
    model: &PotentialModel,
    window: &SpectralWindow,
    energies: &[f64],
    hs: &[f64],
    cache: &Path,
) -> Result<Vec<SpectrumResult>> {
    if model.dimension != 1 {
        return Err(Error::InvalidModel("the quantum oracle is one-dimensional".into()));
    }
    hs.par_iter()
        .map(|&h| {
            let lw = window.level_window(energies, h, 1e-14);
            cached_eigensolve(cache, model, h, None, 0, lw).map(|(s, _)| s)
        })
        .collect()
}

fn write_quantum_csv(ctx: &Context, traces: &[QuantumTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(ctx.file("quantum_trace.csv")?);
    w.write_record(["E", "h", "direct_re", "direct_im", "fourier_re", "fourier_im", "abs", "l1", "mismatch"])?;
    let f = |x: f64| format!("{x:.16e}");
    for t in traces {
        for i in 0..t.energies.len() {
            let (d, q) = (t.g_direct[i], t.g_fourier[i]);
            w.write_record([
                f(t.energies[i]),
                f(t.h),
                f(d.re),
                f(d.im),
                f(q.re),
                f(q.im),
                f(d.norm()),
                f(t.l1[i]),
                f(t.mismatch),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Quantum smoothed density on the `(E, h)` grid: writes the spectrum
/// cache and `quantum_trace.csv`.
pub fn cmd_quantum(cfg: &RunConfig, ctx: &Context) -> Result<Vec<QuantumTrace>> {
    let model = cfg.build_model()?;
    let win = cfg.window();
    let energies = cfg.energies();
    let spectra = spectra_for(&model, &win, &energies, &cfg.run.h, &ctx.cache_dir())?;
    let traces = spectra
        .iter()
        .map(|s| {
            ctx.log(format!("h = {}: {} levels, grid {}", s.h, s.eigenvalues.len(), s.grid_n));
            g_rho_quantum(s, &win, &energies)
        })
        .collect::<Result<Vec<_>>>()?;
    write_quantum_csv(ctx, &traces)?;
    Ok(traces)
}

/// Least-squares `ln y = slope ln h + ln c`; returns `(slope, c)`.
pub fn power_fit(hs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub energy: f64,
    pub h: f64,
    pub g_pred: Complex64,
    pub g_quant: Complex64,
    pub ratio: f64,
}

/// Time window re-centred on one cylinder's period at the reference energy.
#[derive(Clone, Debug, Serialize)]
pub struct CylinderFit {
    pub cylinder: usize,
    pub period: f64,
    pub reflections: usize,
    pub itinerary: String,
    pub expected_exponent: f64,
    pub hs: Vec<f64>,
    pub g_quant: Vec<Complex64>,
    pub g_pred: Vec<Complex64>,
    /// `|g_quant / g_pred|` at each `h`.
    pub ratios: Vec<f64>,
    pub phase_offsets: Vec<f64>,
    pub slope: f64,
    pub prefactor: f64,
    pub slope_pass: bool,
    /// Ratio at the smallest `h` within the amplitude tolerance.
    pub amplitude_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonResult {
    pub energy: f64,
    pub hs: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub drops: Vec<f64>,
    /// Periods found in the time support over the energy support.
    pub periods_in_window: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub model: String,
    pub rows: Vec<CompareRow>,
    pub cylinders: Vec<CylinderFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonResult>,
    pub slope_tolerance: f64,
    pub amplitude_tolerance: f64,
    pub pass: bool,
}

fn poisson_test(cfg: &RunConfig, model: &PotentialModel, ctx: &Context) -> Result<Option<PoissonResult>> {
    let Some(p) = &cfg.poisson else { return Ok(None) };
    let win = p.spectral_window();
    let (elo, ehi) = win.chi.support();
    let (tlo, thi) = win.rho_hat.support();
    let grid: Vec<f64> = (0..=16).map(|i| elo + (ehi - elo) * i as f64 / 16.0).collect();
    let lengths = length_spectrum(model, &grid, thi + 0.1, cfg.run.n_max, &cfg.orbit_options())?;
    let periods_in_window: Vec<f64> = lengths
        .periods()
        .into_iter()
        .filter(|t| *t > tlo && *t < thi)
        .collect();
    let e = p.energy_center;
    let spectra = spectra_for(model, &win, &[e], &p.h, &ctx.cache_dir())?;
    let amplitudes = spectra
        .iter()
        .map(|s| g_rho_quantum(s, &win, &[e]).map(|q| q.g_direct[0].norm()))
        .collect::<Result<Vec<_>>>()?;
    let drops: Vec<f64> = amplitudes.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = periods_in_window.is_empty() && drops.iter().all(|&d| d >= p.drop);
    Ok(Some(PoissonResult { energy: e, hs: p.h.clone(), amplitudes, drops, periods_in_window, pass }))
}

/// Prediction against the quantum oracle: the configured window on the
/// `(E, h)` grid, a re-centred window per cylinder with an `h`-scaling fit,
/// and the off-spectrum decay test. Writes `report.json`.
pub fn cmd_compare(cfg: &RunConfig, ctx: &Context) -> Result<ComparisonReport> {
    let set = OrbitSet::compute(cfg)?;
    let model = &set.model;
    let win = cfg.window();
    let energies = cfg.energies();
    let hs = cfg.run.h.clone();
    let cylinders = set.cylinders_in(&win, cfg.output.allow_degenerate)?;
    let pred = g_rho_predicted(&cylinders, &win, &energies, &hs)?;
    let spectra = spectra_for(model, &win, &energies, &hs, &ctx.cache_dir())?;
    let mut rows = Vec::new();
    for s in &spectra {
        let q = g_rho_quantum(s, &win, &energies)?;
        for (i, &e) in energies.iter().enumerate() {
            let g_pred = pred.total(e, s.h).unwrap_or_default();
            let g_quant = q.g_direct[i];
            rows.push(CompareRow { energy: e, h: s.h, g_pred, g_quant, ratio: g_quant.norm() / g_pred.norm() });
        }
    }

    let e0 = set.reference_energy;
    let k0 = model.k0 as f64;
    let mut fits = Vec::new();
    for (id, cyl) in cylinders.iter().enumerate() {
        let Some(smp) = cyl.sample(e0) else { continue };
        if !win.rho_hat.contains(smp.period) {
            continue;
        }
        let w = cfg.window.recentered(smp.period);
        let p = g_rho_predicted(&cylinders, &w, &[e0], &hs)?;
        let mut g_quant = Vec::new();
        let mut g_pred = Vec::new();
        for s in &spectra {
            g_quant.push(g_rho_quantum(s, &w, &[e0])?.g_direct[0]);
            g_pred.push(p.total(e0, s.h).unwrap_or_default());
        }
        let ratios: Vec<f64> = g_quant.iter().zip(&g_pred).map(|(q, p)| q.norm() / p.norm()).collect();
        let phase_offsets: Vec<f64> = g_quant.iter().zip(&g_pred).map(|(q, p)| (q / p).arg()).collect();
        let abs: Vec<f64> = g_quant.iter().map(|g| g.norm()).collect();
        let (slope, prefactor) = if hs.len() >= 2 { power_fit(&hs, &abs) } else { (f64::NAN, f64::NAN) };
        let expected = k0 * smp.reflections as f64;
        let smallest = (0..hs.len()).min_by(|&a, &b| hs[a].total_cmp(&hs[b])).unwrap();
        ctx.log(format!("cylinder {id}: T = {:.6}, slope {slope:.4} (expected {expected})", smp.period));
        fits.push(CylinderFit {
            cylinder: id,
            period: smp.period,
            reflections: smp.reflections,
            itinerary: itinerary_word(&cyl.orbits[0].itinerary),
            expected_exponent: expected,
            hs: hs.clone(),
            slope_pass: (slope - expected).abs() <= cfg.tolerances.slope,
            amplitude_pass: (ratios[smallest] - 1.0).abs() <= cfg.tolerances.amplitude,
            g_quant,
            g_pred,
            ratios,
            phase_offsets,
            slope,
            prefactor,
        });
    }

    let poisson = poisson_test(cfg, model, ctx)?;
    let pass = fits.iter().all(|f| f.slope_pass && f.amplitude_pass) && poisson.as_ref().is_none_or(|p| p.pass);
    let report = ComparisonReport {
        model: model.name.clone(),
        rows,
        cylinders: fits,
        poisson,
        slope_tolerance: cfg.tolerances.slope,
        amplitude_tolerance: cfg.tolerances.amplitude,
        pass,
    };
    serde_json::to_writer_pretty(ctx.file("report.json")?, &report)?;
    Ok(report)
}
