//! Scenario files shipped with the binary.

pub const NAMES: [&str; 3] = ["wifi-wifi", "umts-umts", "wifi-umts"];

pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "wifi-wifi" => Some(include_str!("../scenarios/wifi-wifi.toml")),
        "umts-umts" => Some(include_str!("../scenarios/umts-umts.toml")),
        "wifi-umts" => Some(include_str!("../scenarios/wifi-umts.toml")),
        _ => None,
    }
}

/// Parsed builtin scenario.
pub fn spec(name: &str) -> Option<voipsim_core::ScenarioSpec> {
    source(name).map(|text| crate::config::parse_scenario_str(text, name).expect("builtin scenarios are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use voipsim_core::net::SubnetKind;

    #[test]
    fn builtins_match_the_deployed_subnets() {
        let kinds = |n: &str| {
            let s = spec(n).unwrap();
            s.subnets.iter().map(|s| (s.name.clone(), s.kind(), s.station_count)).collect::<Vec<_>>()
        };
        let w = |n: &str, k| (n.to_string(), k, 4u16);
        assert_eq!(kinds("wifi-wifi"), [w("hawaii", SubnetKind::Wifi), w("florida", SubnetKind::Wifi)]);
        assert_eq!(kinds("umts-umts"), [w("new-york", SubnetKind::Umts), w("california", SubnetKind::Umts)]);
        assert_eq!(kinds("wifi-umts"), [w("hawaii", SubnetKind::Wifi), w("california", SubnetKind::Umts)]);
        assert!(source("lte").is_none());
    }
}
