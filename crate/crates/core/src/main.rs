use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracksel::io::{self, FrameSource, Synth, SynthSpec};
use tracksel::metrics::evaluate;
use tracksel::TrackerConfig;

#[derive(Parser)]
#[command(name = "tracksel", version, about = "Multi-object tracking with per-object tracker selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track detections through a sequence.
    Track {
        #[arg(long)]
        detections: PathBuf,
        /// Directory of PPM/PGM frames named by frame number.
        #[arg(long, conflicts_with = "tracks_file", required_unless_present = "tracks_file")]
        frames: Option<PathBuf>,
        /// Precomputed feature tracks `frame,x_prev,y_prev,x,y`, used instead of frames.
        #[arg(long)]
        tracks_file: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Nine numbers mapping image to ground plane.
        #[arg(long)]
        homography: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score hypothesis tracks against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Generate a synthetic sequence from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw boxes and ids from a track file over the frames.
    Inspect {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> tracksel::Result<()> {
    match cmd {
        Command::Track { detections, frames, tracks_file, config, homography, out } => {
            let cfg = match config {
                Some(p) => TrackerConfig::load(&p)?,
                None => TrackerConfig::default(),
            };
            let ground = homography.as_deref().map(io::read_homography).transpose()?;
            let source = match (frames, tracks_file) {
                (Some(f), _) => FrameSource::Frames(f),
                (None, Some(t)) => FrameSource::FeatureTracks(t),
                (None, None) => unreachable!("clap enforces one frame source"),
            };
            let rows = io::track_files(&detections, &source, &cfg, ground)?;
            create_parent(&out)?;
            io::write_tracks(&rows, &out)?;
            let ids: std::collections::BTreeSet<u32> = rows.iter().map(|r| r.id).collect();
            println!("{} boxes in {} tracks -> {}", rows.len(), ids.len(), out.display());
        }
        Command::Evaluate { gt, hyp, iou } => {
            let r = evaluate(&io::read_annotations(&gt)?, &io::read_annotations(&hyp)?, iou)?;
            let c = r.clear;
            let v = r.coverage;
            println!("{:<6} {:>10}", "metric", "value");
            println!("{:<6} {:>10.4}", "MOTA", c.mota);
            println!("{:<6} {:>10.4}", "MOTP", c.motp);
            println!("{:<6} {:>10.4}", "M_bar", r.m_bar);
            println!("{:<6} {:>10}", "FP", c.fp);
            println!("{:<6} {:>10}", "FN", c.fn_);
            println!("{:<6} {:>10}", "IDSW", c.idsw);
            println!("{:<6} {:>9.1}%", "MT", v.mt);
            println!("{:<6} {:>9.1}%", "PT", v.pt);
            println!("{:<6} {:>9.1}%", "ML", v.ml);
        }
        Command::Synth { spec, out } => {
            let s = Synth::new(SynthSpec::load(&spec)?)?;
            s.write(&out)?;
            println!("{} frames, {} detections -> {}", s.spec().frames, s.detections.len(), out.display());
        }
        Command::Inspect { frames, tracks, out } => {
            let n = io::write_overlays(&frames, &io::read_boxes(&tracks)?, &out)?;
            println!("{n} overlays -> {}", out.display());
        }
    }
    Ok(())
}

fn create_parent(p: &Path) -> std::io::Result<()> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
