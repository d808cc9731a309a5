//! Lane-change and driving cooperation scores of an untrained intention
//! module on a few hand-made frames, showing how the gate mixes them.

use lanecoop::ingest::Style;
use lanecoop::intention::IntentionParams;
use lanecoop::rng;

fn main() -> lanecoop::Result<()> {
    let p = IntentionParams::new(&mut rng::seeded(5))?;
    // inner: v, a, lane offset, lateral speed; inter: v_f, v_tr, gap_f, gap_tr, dv_f, dv_tr
    let inner = [12.0, 0.3, 0.4, 0.2];
    let cases = [
        ("slow leader, wide gap", [9.0, 12.0, 15.0, 30.0, -3.0, 0.0]),
        ("free road", [12.0, 12.0, 60.0, 60.0, 0.0, 0.0]),
        ("fast follower close", [12.0, 16.0, 25.0, 6.0, 0.0, 4.0]),
    ];
    for style in [Some(Style::Aggressive), Some(Style::Conservative), None] {
        for (name, inter) in &cases {
            let s = p.fuse(&inner, inter, style)?;
            println!(
                "{:12} {name:22} LCS {:.3} DCS {:.3} alpha {:.3} C {:.3}",
                style.map_or("unknown", |s| s.name()),
                s.lcs,
                s.dcs,
                s.alpha,
                s.c_final
            );
        }
    }
    Ok(())
}
