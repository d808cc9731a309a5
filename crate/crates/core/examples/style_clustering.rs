//! Clusters synthetic drivers into aggressive / normal / conservative styles,
//! trains the recognizer and labels the T-Rear style of every sample.

use lanecoop::ingest::synthetic::{generate_scene, SceneConfig};
use lanecoop::ingest::{ingest_records, IngestConfig, Style};
use lanecoop::style::{cluster_styles, features_from_episodes, label_samples, train_recognizer, RecognizerConfig};

fn main() -> lanecoop::Result<()> {
    let scene = generate_scene(&SceneConfig::default(), 42);
    let mut out = ingest_records(&scene.records, &IngestConfig::default(), 42)?;
    let feats: Vec<_> = features_from_episodes(&out.episodes)?.into_iter().map(|(_, f)| f).collect();
    let mut cl = cluster_styles(&feats, 42)?;
    for s in Style::ALL {
        let members: Vec<_> = feats.iter().zip(&cl.labels).filter(|(_, l)| **l == s).map(|(f, _)| f).collect();
        let mean_v = members.iter().map(|f| f.v_mean).sum::<f64>() / members.len().max(1) as f64;
        println!("{:12} {:3} drivers, mean speed {:.2} m/s", s.name(), members.len(), mean_v);
    }
    let x = feats.iter().map(|f| cl.model.standardize(f)).collect::<lanecoop::Result<Vec<_>>>()?;
    let (net, hist) = train_recognizer(&x, &cl.labels, 42, &RecognizerConfig::default())?;
    println!("recognizer: {} epochs, train accuracy {:.3}", hist.epochs, hist.train_accuracy);
    cl.model.recognizer = Some(net);
    let labelled = label_samples(&cl.model, &mut out.samples)?;
    println!("{labelled} of {} samples received a T-Rear style", out.samples.len());
    Ok(())
}
