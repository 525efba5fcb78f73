use missbeam_core::dataset::{load_missions, write_records, Format};
use missbeam_core::sim::{
    measure_beams, measure_trajectory, run_scenario, simulate_trajectory, DopplerModel, MotionProfile, Scenario,
    TrajectorySpec,
};
use missbeam_core::{BeamGeometry, BeamSet, Velocity3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sinusoid(seed: u64) -> TrajectorySpec {
    let mut spec = TrajectorySpec::constant(Velocity3::ZERO, 100, seed);
    spec.motion = MotionProfile::Sinusoidal {
        mean: [1.0, 0.0, 0.0],
        amplitude: [0.5, 0.3, 0.1],
        period_s: [60.0, 45.0, 30.0],
    };
    spec
}

#[test]
fn noise_free_measurements_invert_to_truth() {
    let g = BeamGeometry::default();
    let traj = simulate_trajectory(&sinusoid(1)).unwrap();
    let meas = measure_trajectory(&traj, &g, &DopplerModel::ideal(), 1025.0, 0.0, 1).unwrap();
    for (v, y) in traj.velocity.iter().zip(&meas.beams) {
        assert!(g.ls_velocity(y).unwrap().sub(*v).norm() < 1e-9);
    }
}

#[test]
fn beam_noise_matches_propagated_std() {
    let g = BeamGeometry::default();
    let dm = DopplerModel::default();
    let v = Velocity3::new(1.0, 0.2, 0.1);
    let truth = g.forward_beams(v, BeamSet::ALL).raw();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let mut sq = [0.0; 4];
    for _ in 0..n {
        let y = measure_beams(&g, &dm, v, &mut rng).raw();
        for k in 0..4 {
            sq[k] += (y[k] - truth[k]).powi(2);
        }
    }
    for s in sq {
        let std = (s / n as f64).sqrt();
        assert!((std / dm.velocity_noise_std() - 1.0).abs() < 0.05, "std {std}");
    }
}

#[test]
fn measurement_error_is_linear_in_scale_factor() {
    let g = BeamGeometry::default();
    let v = Velocity3::new(1.3, -0.4, 0.2);
    let truth = g.forward_beams(v, BeamSet::ALL).raw();
    let errors: Vec<[f64; 4]> = [0.0, 0.002, 0.005]
        .iter()
        .map(|&sf| {
            let mut dm = DopplerModel::ideal();
            dm.scale_factor = sf;
            let y = measure_beams(&g, &dm, v, &mut ChaCha8Rng::seed_from_u64(0)).raw();
            std::array::from_fn(|k| y[k] - truth[k])
        })
        .collect();
    for k in 0..4 {
        assert!(errors[0][k].abs() < 1e-15);
        let slope1 = (errors[1][k] - errors[0][k]) / 0.002;
        let slope2 = (errors[2][k] - errors[0][k]) / 0.005;
        assert!((slope1 - slope2).abs() < 1e-9);
        assert!((slope1 - truth[k]).abs() < 1e-9);
    }
}

#[test]
fn seeded_runs_are_reproducible() {
    let mut spec = sinusoid(11);
    spec.disturbance = Some(missbeam_core::sim::Disturbance {
        std: 0.05,
        correlation_s: 20.0,
    });
    let mut scenario = Scenario::new(spec);
    scenario.missions = 2;
    let a = run_scenario(&scenario).unwrap();
    let b = run_scenario(&scenario).unwrap();
    assert_eq!(a, b);
    scenario.trajectory.seed = 12;
    assert_ne!(a, run_scenario(&scenario).unwrap());
}

#[test]
fn export_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let mut scenario = Scenario::new(sinusoid(5));
    scenario.doppler = DopplerModel::ideal();
    let records = run_scenario(&scenario).unwrap();
    write_records(std::fs::File::create(&path).unwrap(), &records).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id\n"));

    let missions = load_missions(&path, &Format::Canonical).unwrap();
    assert_eq!(missions.len(), 1);
    assert_eq!(missions[0].id, "synthetic-000");
    let g = BeamGeometry::default();
    for (s, r) in missions[0].samples.iter().zip(&records) {
        assert_eq!(s, &r.sample);
        let v = g.ls_velocity(&s.beam_vector()).unwrap();
        assert!(v.sub(s.velocity.unwrap()).norm() < 1e-9);
    }
}

#[test]
fn scenario_json_round_trip() {
    let scenario = Scenario::new(sinusoid(9));
    let text = serde_json::to_string(&scenario).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, scenario);
    let minimal: Scenario = serde_json::from_str(
        r#"{"trajectory":{"duration_s":50,"motion":{"kind":"constant","velocity":[1,0,0]},
            "depth":{"kind":"constant","depth_m":10},"seed":1}}"#,
    )
    .unwrap();
    assert_eq!(minimal.doppler, DopplerModel::default());
    assert_eq!(minimal.missions, 1);
}
