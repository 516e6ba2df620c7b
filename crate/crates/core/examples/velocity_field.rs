//! Velocity field of one hand-built scene: plain GVF versus the
//! acceleration-sensitive AS-GVF, printed as a coarse text map.
//!
//! Run with `cargo run --example velocity_field`.

use lanescope::field::{as_gvf, export_field_json, gvf, skew_factor};
use lanescope::{FieldParams, Point, RoiConfig, Scene, VehicleState};

fn vehicle(id: i64, x: f64, y: f64, vx: f64, ax: f64) -> VehicleState {
    VehicleState {
        vehicle_id: id,
        frame: 0,
        x,
        y,
        vx,
        vy: 0.0,
        ax,
        ay: 0.0,
        lane_id: if y > 2.0 { 2 } else { 1 },
    }
}

fn main() -> lanescope::Result<()> {
    let roi = RoiConfig::default();
    let params = FieldParams::default();
    let ego = vehicle(1, 0.0, 0.0, 30.0, 0.0);
    let neighbors = vec![
        vehicle(2, 20.0, 3.5, 26.0, 2.0),
        vehicle(3, -15.0, 3.5, 33.0, -1.0),
        vehicle(4, 30.0, 0.0, 28.0, 0.0),
    ];
    let scene = Scene::new(ego, neighbors, &roi)?;

    let plain = gvf(&scene, &roi, &params)?;
    let skewed = as_gvf(&scene, &roi, &params)?;

    println!("channel 0 (relative vx, m/s); rows y = +6..-6, columns x = -40..+40 step 5");
    for (name, f) in [("GVF", &plain), ("AS-GVF", &skewed)] {
        println!("\n{name}");
        for row in (0..roi.ny()).rev().step_by(2) {
            let line: Vec<String> = (0..roi.nx()).map(|c| format!("{:5.1}", f.get(row, c, 0))).collect();
            println!("y={:+3.0} {}", roi.y_at(row), line.join(""));
        }
    }
    println!(
        "\nlargest cell change from skewing: {:.3} m/s",
        plain.max_abs_diff(&skewed)
    );

    let ahead = skew_factor(Point::new(25.0, 3.5), Point::new(20.0, 3.5), [2.0, 0.0], &params);
    let behind = skew_factor(Point::new(15.0, 3.5), Point::new(20.0, 3.5), [2.0, 0.0], &params);
    println!("skew factor of vehicle 2 (a_x = 2): 5 m ahead {ahead:.5}, 5 m behind {behind:.6}");

    let mut json = Vec::new();
    export_field_json(&skewed, &roi, &mut json)?;
    println!("exported field JSON: {} bytes", json.len());
    Ok(())
}
