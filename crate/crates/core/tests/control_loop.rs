use noimu::control::*;
use noimu::estimator::{EstimatorNetwork, NetworkConfig, Variant};
use noimu::eventcam::{CameraModel, MaskMode, Projection, SensorSetup};
use noimu::simcore::Scenario;

#[test]
fn ground_truth_hover_minute_is_level_and_holds_position() {
    let opts = FlightOptions::new(Scenario::hover(4, 60.0), EstimateSource::fixed(SourceMode::GroundTruth));
    let log = closed_loop_run(&opts, None).unwrap();
    let s = FlightSummary::from_log(&log);
    assert!(!s.crashed);
    assert_eq!(log.rows.len(), 12_000);
    assert!(s.max_abs_attitude_deg < 0.5, "{}", s.max_abs_attitude_deg);
    assert!(s.position_rms_m < 0.05, "{}", s.position_rms_m);
}

#[test]
fn ten_degree_impulse_decays_within_one_and_a_half_seconds() {
    for init in [[10f64.to_radians(), 0.0], [0.0, -10f64.to_radians()]] {
        let mut opts = FlightOptions::new(Scenario::hover(1, 3.0), EstimateSource::fixed(SourceMode::GroundTruth));
        opts.initial_attitude = init;
        let log = closed_loop_run(&opts, None).unwrap();
        let late = log.rows.iter().filter(|r| r.t_us >= 1_500_000);
        for r in late {
            assert!(r.truth.roll.abs().max(r.truth.pitch.abs()).to_degrees() < 1.0, "t={} us", r.t_us);
        }
    }
}

#[test]
fn replay_reproduces_commands_bit_exactly() {
    let opts = FlightOptions::new(Scenario::hover(2, 3.0), EstimateSource::switching(SourceMode::GroundTruth, 1.0, SourceMode::Ekf));
    let log = closed_loop_run(&opts, None).unwrap();
    let restored = FlightLog::from_csv(&log.to_csv()).unwrap();
    assert_eq!(restored.rows, log.rows);
    let cmds = replay_commands(&restored, &opts);
    for (c, r) in cmds.iter().zip(&log.rows) {
        assert_eq!(c.thrust.to_bits(), r.thrust.to_bits());
        for i in 0..3 {
            assert_eq!(c.torque[i].to_bits(), r.torque[i].to_bits());
        }
    }
}

#[test]
fn switch_to_flow_filter_settles() {
    let opts = FlightOptions::new(Scenario::hover(3, 20.0), EstimateSource::switching(SourceMode::GroundTruth, 10.0, SourceMode::Ekf));
    let log = closed_loop_run(&opts, None).unwrap();
    let s = FlightSummary::from_log(&log);
    println!("{s:?}");
    assert!(!s.crashed);
    assert_eq!(log.switch_s, Some(10.0));
    assert!(s.max_abs_attitude_deg < 15.0);
}

#[test]
fn network_estimates_arrive_one_tick_late() {
    let camera = CameraModel::new(Projection::Equidistant, 32, 24, 140.0).unwrap();
    let sensor = SensorSetup { camera, mask: MaskMode::Full, ..Default::default() };
    let cfg = NetworkConfig::tiny(Variant::VisionMotor, 32, 24, 5);
    let mut net = EstimatorNetwork::<f32>::build(cfg).unwrap();
    let mut opts =
        FlightOptions::new(Scenario::hover(1, 0.5), EstimateSource::switching(SourceMode::GroundTruth, 0.25, SourceMode::Network));
    opts.sensor = sensor;
    // Initial roll makes the camera see motion.
    opts.initial_attitude = [0.05, 0.0];
    let log = closed_loop_run(&opts, Some(&mut net)).unwrap();
    assert!(log.rows[0].network.is_none() && log.rows[1].network.is_none());
    assert!(log.rows[2].network.is_some());
    assert!(log.rows.iter().skip(1).any(|r| r.event_count > 0));
    let at = log.rows.iter().position(|r| r.source == SourceMode::Network).unwrap();
    assert_eq!(log.rows[at].estimate.roll, log.rows[at].network.unwrap().roll);
}
