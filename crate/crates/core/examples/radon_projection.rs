//! Projects one 10x10 window at the anchor candidates and prints the anchor
//! and its adjunct projections with their min-max codes.

use elp_descriptors::elp::encode_projection;
use elp_descriptors::radon::{anchor_score, projection_set, radon_projection, AngleSet};
use elp_descriptors::{AnchorMode, Window};

fn main() -> elp_descriptors::Result<()> {
    // a soft diagonal ramp with a bright stripe
    let data: Vec<u8> = (0..100)
        .map(|i| {
            let (r, c) = (i / 10, i % 10);
            if c == r { 250 } else { (20 * (r + c) / 2) as u8 }
        })
        .collect();
    let win = Window::new(10, data)?;
    let angles = AngleSet::default();

    for &theta in angles.anchor_candidates() {
        let p = radon_projection(&win, theta);
        println!("theta {theta:>5}: score {:>8.1}", anchor_score(&p.values, AnchorMode::MaxAmplitude));
    }
    let (anchor, projections) = projection_set(&win, &angles, AnchorMode::MaxAmplitude)?;
    println!("anchor {anchor}");
    for p in &projections {
        let values: Vec<String> = p.values.iter().map(|v| format!("{v:.0}")).collect();
        println!("{:>5}: [{}] code {:08b}", p.angle, values.join(" "), encode_projection(p)?);
    }
    Ok(())
}
