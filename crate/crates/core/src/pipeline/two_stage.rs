use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::display::{depth_blur, form_display, DisplayResult};
use super::highres::{reconstruct_highres, HighresResult};
use super::lowres::{reconstruct_lowres, LowresResult};
use super::preprocess::preprocess_transmission;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{
    downsample_projections, resample_volume, ImageVolume, ProjectionSet, ResampleMode,
};
use crate::io::{read_volume, write_projections, write_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Lowres,
    Highres,
    #[default]
    All,
}

impl Stage {
    fn runs_lowres(self) -> bool {
        matches!(self, Stage::Lowres | Stage::All)
    }
    fn runs_highres(self) -> bool {
        matches!(self, Stage::Highres | Stage::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TwoStageOptions {
    pub stage: Stage,
    /// Start the high-resolution stage from zero and skip background removal.
    pub zeroinit: bool,
}

#[derive(Debug, Clone)]
pub struct TwoStageOutput {
    /// Log-processed data on the full-resolution detector.
    pub g: ProjectionSet,
    pub g_lowres: ProjectionSet,
    pub lowres: Option<LowresResult>,
    pub h0: Option<ImageVolume>,
    pub highres: Option<HighresResult>,
    pub display: Option<DisplayResult>,
    /// Display image; for `zeroinit` this is the depth-blurred `h`.
    pub h_disp: Option<ImageVolume>,
    /// Every file written, in order.
    pub written: Vec<PathBuf>,
}

struct Sink<'a> {
    dir: Option<&'a Path>,
    provenance: BTreeMap<String, String>,
    written: Vec<PathBuf>,
}

impl Sink<'_> {
    fn volume(&mut self, name: &str, vol: &ImageVolume) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            write_volume(&path, vol, &self.provenance)?;
            self.written.push(path);
        }
        Ok(())
    }

    fn projections(&mut self, name: &str, p: &ProjectionSet) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            write_projections(&path, p, "1", &self.provenance)?;
            self.written.push(path);
        }
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            self.written.push(path);
        }
        Ok(())
    }
}

/// Preprocess raw counts and run the requested stages.
///
/// With `out_dir`, every intermediate volume is written there with the
/// config hash in its sidecar. The `highres` stage alone (without
/// `zeroinit`) reads `f1.f32` and `f2.f32` left by an earlier `lowres` run.
pub fn run_two_stage(
    counts: &ProjectionSet,
    cfg: &RunConfig,
    opts: TwoStageOptions,
    out_dir: Option<&Path>,
) -> Result<TwoStageOutput> {
    if opts.zeroinit && opts.stage == Stage::Lowres {
        return Err(Error::Config(
            "zeroinit skips the lowres stage; nothing to run".into(),
        ));
    }
    let raw_geom = cfg.raw_geometry()?;
    let low_geom = cfg.lowres_geometry()?;
    if counts.nviews() != raw_geom.nviews() || *counts.detector() != raw_geom.detector {
        return Err(Error::Config(format!(
            "data has {} views of {}x{} pixels, config expects {} views of {}x{}",
            counts.nviews(),
            counts.detector().nu,
            counts.detector().nv,
            raw_geom.nviews(),
            raw_geom.detector.nu,
            raw_geom.detector.nv
        )));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("config_hash".to_string(), cfg.hash());
    provenance.insert(
        "tool".to_string(),
        format!("dbt-recon {}", env!("CARGO_PKG_VERSION")),
    );
    let mut sink = Sink {
        dir: out_dir,
        provenance,
        written: Vec::new(),
    };
    let problem = cfg.lowres.problem();

    let g = preprocess_transmission(counts, cfg.geometry.strip(), cfg.geometry.log_floor)?;
    let g_lowres = downsample_projections(&g, cfg.geometry.bin)?;
    sink.projections("g.f32", &g)?;
    sink.projections("g_lowres.f32", &g_lowres)?;

    let mut out = TwoStageOutput {
        g,
        g_lowres,
        lowres: None,
        h0: None,
        highres: None,
        display: None,
        h_disp: None,
        written: Vec::new(),
    };

    if opts.stage.runs_lowres() && !opts.zeroinit {
        let low = reconstruct_lowres(
            &out.g_lowres,
            low_geom,
            cfg.lowres_grid()?,
            &problem,
            &cfg.solver,
        )?;
        sink.volume("f1.f32", &low.f1)?;
        sink.volume("f2.f32", &low.f2)?;
        sink.volume("f3.f32", &low.f3)?;
        sink.text("lowres_convergence.tsv", &low.report.to_tsv())?;
        out.lowres = Some(low);
    }

    if opts.stage.runs_highres() {
        let hgrid = cfg.highres_grid()?;
        let suffix = if opts.zeroinit { "_zeroinit" } else { "" };
        let (h0, f2) = if opts.zeroinit {
            (ImageVolume::zeros(hgrid), None)
        } else {
            let (f1, f2) = match &out.lowres {
                Some(low) => (low.f1.clone(), low.f2.clone()),
                None => {
                    let dir = out_dir.ok_or_else(|| {
                        Error::Config(
                            "highres stage alone needs an output directory holding f1/f2".into(),
                        )
                    })?;
                    (
                        read_volume(&dir.join("f1.f32"))?,
                        read_volume(&dir.join("f2.f32"))?,
                    )
                }
            };
            if *f1.grid() != cfg.lowres_grid()? {
                return Err(Error::Config(
                    "stored lowres volumes do not match the configured grid".into(),
                ));
            }
            (
                resample_volume(&f1, cfg.highres.factors, ResampleMode::Up)?,
                Some(f2),
            )
        };
        if !opts.zeroinit {
            sink.volume("h0.f32", &h0)?;
        }
        let high = reconstruct_highres(&out.g, raw_geom, &h0, &cfg.highres, problem.c)?;
        sink.volume(&format!("h{suffix}.f32"), &high.h)?;
        let tsv: String = std::iter::once("step\tobjective\n".to_string())
            .chain(
                high.objective
                    .iter()
                    .enumerate()
                    .map(|(i, v)| format!("{i}\t{v:.12e}\n")),
            )
            .collect();
        sink.text(&format!("highres_objective{suffix}.tsv"), &tsv)?;

        let h_disp = match &f2 {
            Some(f2) => {
                let d = form_display(&high.h, f2, &cfg.display)?;
                sink.volume("h2.f32", &d.h2)?;
                let h_disp = d.h_disp.clone();
                out.display = Some(d);
                h_disp
            }
            None => depth_blur(&high.h, cfg.display.dz)?,
        };
        sink.volume(&format!("h_disp{suffix}.f32"), &h_disp)?;
        out.h0 = Some(h0);
        out.highres = Some(high);
        out.h_disp = Some(h_disp);
    }
    out.written = sink.written;
    Ok(out)
}
