use triplet_core::analysis::{car, OutlierRule, Ratio};
use triplet_core::sim::SimConfig;

#[test]
fn ratio_is_tagged_by_kind() {
    let v = serde_json::to_value(car(33, 3.51, 41)).unwrap();
    assert_eq!(v["kind"], "value");
    assert!((v["value"].as_f64().unwrap() - 9.402).abs() < 1e-3);
    assert_eq!(serde_json::to_value(car(0, 0.0, 41)).unwrap()["kind"], "undefined");
    assert_eq!(serde_json::to_value(car(3, 0.0, 41)).unwrap()["kind"], "lower_bound");
    let back: Ratio = serde_json::from_value(serde_json::to_value(car(33, 3.51, 41)).unwrap()).unwrap();
    assert_eq!(back, car(33, 3.51, 41));
}

#[test]
fn outlier_rule_round_trips() {
    for rule in [OutlierRule::None, OutlierRule::SigmaAbove(10.0), OutlierRule::CountAbove(7)] {
        let text = serde_json::to_string(&rule).unwrap();
        assert_eq!(serde_json::from_str::<OutlierRule>(&text).unwrap(), rule);
    }
}

#[test]
fn sim_config_round_trips() {
    let cfg = SimConfig::reference();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<SimConfig>(&text).unwrap(), cfg);
}
