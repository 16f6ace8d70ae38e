//! `ais` subcommands. Every stage reads and writes inside one output
//! directory so stages can be chained with a single config.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use traji_agents::{train_dati, CheckpointPolicy, SavedAgent};
use traji_ais::fixture::write_fixture;
use traji_ais::store::{read_tracks, write_tracks, StoredTrack};
use traji_ais::{
    ais_task, build_train_set, cluster_tracks, detect_anomalies, ingest_csv, kink_histogram, segment_tracks, select_by_start,
    ClusterLabel, VesselTrack,
};
use traji_nn::Checkpoint;

use crate::config::{self, write_json, AisConfig, RESOLVED_NAME};
use crate::output::{create_dir, write_losses};
use crate::svg::{Plot, Series, BLUE, GREEN, GREYS, ORANGE, RED};

pub const TRACKS: &str = "tracks.ndjson";
pub const CLUSTERS: &str = "clusters.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Fixture,
    Ingest,
    Cluster,
    Kinks,
    Train,
    Detect,
}

fn read_store(path: &Path) -> Result<Vec<StoredTrack>> {
    let f = File::open(path).with_context(|| format!("opening {} (run the previous stage first)", path.display()))?;
    Ok(read_tracks(BufReader::new(f))?)
}

fn write_store<'a>(path: &Path, tracks: impl IntoIterator<Item = (&'a VesselTrack, Option<ClusterLabel>)>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(write_tracks(BufWriter::new(f), tracks)?)
}

fn clusters_from_store(out: &Path) -> Result<BTreeMap<ClusterLabel, Vec<VesselTrack>>> {
    let mut map: BTreeMap<ClusterLabel, Vec<VesselTrack>> = ClusterLabel::ALL.iter().map(|&l| (l, Vec::new())).collect();
    for st in read_store(&out.join(CLUSTERS))? {
        let label = st.label.ok_or_else(|| anyhow!("track `{}` has no cluster label", st.track.id))?;
        map.get_mut(&label).expect("all labels").push(st.track);
    }
    Ok(map)
}

fn lonlat(t: &VesselTrack) -> Vec<(f64, f64)> {
    t.points.iter().map(|p| (p.lon, p.lat)).collect()
}

fn label_color(l: ClusterLabel) -> &'static str {
    match l {
        ClusterLabel::Up => BLUE,
        ClusterLabel::Down => GREEN,
        ClusterLabel::Other => GREYS,
    }
}

pub fn run(stage: Stage, mut cfg: AisConfig) -> Result<PathBuf> {
    cfg.resolve()?;
    let out = config::out_dir(cfg.out.as_deref(), "runs/ais");
    create_dir(&out)?;
    write_json(&out.join(RESOLVED_NAME), &cfg)?;
    match stage {
        Stage::Fixture => {
            let f = File::create(out.join("fixture.csv"))?;
            let truth = write_fixture(BufWriter::new(f), &cfg.fixture)?;
            write_json(&out.join("fixture_truth.json"), &truth)?;
            log::info!("fixture: {} rows, {} tracks", truth.rows, truth.labels.len());
        }
        Stage::Ingest => {
            let input = cfg.input.as_ref().ok_or_else(|| anyhow!("`input` is required for ingest"))?;
            let ingested = ingest_csv(input, &cfg.ingest)?;
            let (tracks, seg) = segment_tracks(&ingested.by_vessel, &cfg.segment);
            write_store(&out.join(TRACKS), tracks.iter().map(|t| (t, None)))?;
            write_json(&out.join("ingest_stats.json"), &serde_json::json!({ "ingest": ingested.stats, "segment": seg }))?;
            log::info!("ingest: {} records kept, {} tracks", ingested.stats.kept, tracks.len());
        }
        Stage::Cluster => {
            let tracks: Vec<VesselTrack> = read_store(&out.join(TRACKS))?.into_iter().map(|s| s.track).collect();
            let clusters = cluster_tracks(tracks);
            write_store(&out.join(CLUSTERS), clusters.iter().flat_map(|(l, ts)| ts.iter().map(move |t| (t, Some(*l)))))?;
            let mut w = csv::Writer::from_path(out.join("clusters.csv"))?;
            w.write_record(["track_id", "label"])?;
            let mut plot = Plot::new("vessel traffic by cluster");
            plot.equal_aspect = false;
            for (l, ts) in &clusters {
                for t in ts {
                    w.write_record([t.id.as_str(), l.name()])?;
                    plot.push(Series::new(lonlat(t), label_color(*l)).width(1.0));
                }
                log::info!("cluster {l}: {} tracks", ts.len());
            }
            w.flush()?;
            std::fs::write(out.join("traffic.svg"), plot.render())?;
        }
        Stage::Kinks => {
            let clusters = clusters_from_store(&out)?;
            let mut w = csv::Writer::from_path(out.join("kinks_per_track.csv"))?;
            w.write_record(["track_id", "label", "kinks"])?;
            for (l, ts) in &clusters {
                let h = kink_histogram(ts, cfg.kink_threshold_deg);
                for (id, k) in &h.per_track {
                    w.write_record([id.clone(), l.name().to_string(), k.to_string()])?;
                }
                h.write_csv(File::create(out.join(format!("kinks_{l}.csv")))?)?;
            }
            w.flush()?;
        }
        Stage::Train => {
            let clusters = clusters_from_store(&out)?;
            for &l in &cfg.train_clusters {
                let set = build_train_set(&clusters[&l], cfg.per_cluster, cfg.seed);
                if set.is_empty() {
                    log::warn!("cluster {l} is empty; skipping");
                    continue;
                }
                write_store(&out.join(format!("train_{l}.ndjson")), set.iter().map(|t| (t, Some(l))))?;
                let task = ais_task(l.name(), &set, &cfg.task)?;
                let policy = CheckpointPolicy { dir: Some(out.clone()), every: 0 };
                let o = train_dati(&task, cfg.dati.clone(), cfg.seed, &policy)?;
                o.agent.checkpoint(None, o.transitions as u64, cfg.seed).save(&out.join(format!("dati_{l}.json")))?;
                write_losses(&out.join(format!("losses_dati_{l}.csv")), &o.losses)?;
                log::info!("trained {l} generator on {} tracks", set.len());
            }
        }
        Stage::Detect => {
            let l = cfg.detect_cluster;
            let clusters = clusters_from_store(&out)?;
            let train: Vec<VesselTrack> =
                read_store(&out.join(format!("train_{l}.ndjson")))?.into_iter().map(|s| s.track).collect();
            let task = ais_task(l.name(), &train, &cfg.task)?;
            let ckpt = Checkpoint::load(&out.join(format!("dati_{l}.json")))?;
            let agent = SavedAgent::from_checkpoint(&task, &ckpt)?;
            let test = select_by_start(&clusters[&ClusterLabel::Other], &cfg.start_region);
            let report = detect_anomalies(&task, agent.policy().as_mut(), &test, cfg.quantile, cfg.seed)?;
            report.write_csv(File::create(out.join("anomalies.csv"))?)?;
            let mut plot = Plot::new(format!("{} test tracks, {} flagged", test.len(), report.n_flagged()));
            plot.equal_aspect = false;
            for t in &train {
                plot.push(Series::new(lonlat(t), ORANGE).width(0.5));
            }
            for (t, f) in test.iter().zip(&report.flagged) {
                plot.push(if *f { Series::new(lonlat(t), RED).width(2.0) } else { Series::new(lonlat(t), GREYS).width(1.0) });
            }
            std::fs::write(out.join("anomalies.svg"), plot.render())?;
            log::info!("flagged {} of {} (threshold {:.4})", report.n_flagged(), test.len(), report.threshold);
        }
    }
    Ok(out)
}
