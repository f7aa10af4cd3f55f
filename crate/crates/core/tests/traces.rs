use peltier_core::calibration::calibrated_params;
use peltier_core::controller::{Action, Phase};
use peltier_core::device::trace::{
    read_actions, read_series, read_temps, write_actions, write_series, write_temps, ActionRecord, TempRecord,
};
use peltier_core::layout::ElementId;
use peltier_core::thermal::{simulate, DriveInput, DriveSchedule, Face};
use proptest::prelude::*;

#[test]
fn hundred_thousand_row_series_round_trips() {
    let drive = DriveSchedule::new(vec![
        (0.0, DriveInput::bench(2.0)),
        (
            400.0,
            DriveInput {
                voltage: 0.0,
                contact: true,
                contact_side: Face::Warm,
            },
        ),
        (700.0, DriveInput::bench(3.0)),
    ])
    .unwrap();
    let series = simulate(&calibrated_params(), &drive, 1000.0, 0.01).unwrap();
    assert_eq!(series.len(), 100_001);

    let mut bytes = Vec::new();
    write_series(&mut bytes, &series).unwrap();
    let back = read_series(bytes.as_slice()).unwrap();
    assert_eq!(back.len(), series.len());
    assert!((back.dt - series.dt).abs() < 1e-6);
    for (a, b) in series.samples.iter().zip(&back.samples) {
        assert!((a.state.time - b.state.time).abs() <= 5e-7);
        assert!((a.state.temp_warm_side - b.state.temp_warm_side).abs() <= 5e-7);
        assert!((a.state.temp_cold_side - b.state.temp_cold_side).abs() <= 5e-7);
        assert_eq!((a.voltage, a.contact), (b.voltage, b.contact));
    }

    // a second pass is byte-exact
    let mut again = Vec::new();
    write_series(&mut again, &back).unwrap();
    assert_eq!(again, bytes);
}

fn micro() -> impl Strategy<Value = f64> {
    (-100_000_000i64..100_000_000).prop_map(|k| k as f64 / 1e6)
}

fn element() -> impl Strategy<Value = ElementId> {
    (0u8..8).prop_map(|i| ElementId::new(i).unwrap())
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0i64..5_000_000).prop_map(|k| Action::SetVoltage(k as f64 / 1e6)),
        Just(Action::StartFlip(Face::Warm)),
        Just(Action::StartFlip(Face::Cold)),
        Just(Action::Stop),
    ]
}

fn temp_record() -> impl Strategy<Value = TempRecord> {
    (
        micro(),
        element(),
        micro(),
        micro(),
        micro(),
        micro(),
        prop::sample::select(Phase::ALL.to_vec()),
    )
        .prop_map(|(t, element, warm, cold, skin_facing, voltage, phase)| TempRecord {
            t,
            element,
            warm,
            cold,
            skin_facing,
            voltage,
            phase,
        })
}

proptest! {
    #[test]
    fn action_logs_round_trip(
        records in prop::collection::vec((micro(), element(), action()), 0..200)
            .prop_map(|v| v.into_iter().map(|(t, element, action)| ActionRecord { t, element, action }).collect::<Vec<_>>())
    ) {
        let mut bytes = Vec::new();
        write_actions(&mut bytes, &records).unwrap();
        prop_assert_eq!(read_actions(bytes.as_slice()).unwrap(), records);
    }

    #[test]
    fn temperature_logs_round_trip(records in prop::collection::vec(temp_record(), 0..200)) {
        let mut bytes = Vec::new();
        write_temps(&mut bytes, &records).unwrap();
        prop_assert_eq!(read_temps(bytes.as_slice()).unwrap(), records);
    }
}

#[test]
fn wrong_header_is_rejected() {
    let text = "t,element,action,arg\n0.0,1,stop,\n";
    assert!(read_actions(text.as_bytes()).is_err());
    assert!(read_series("t_s,temp_warm_C\n".as_bytes()).is_err());
}
