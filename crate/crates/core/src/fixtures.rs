//! The fixture corpus shipped with the crate.

use crate::error::{Error, Result};
use crate::io::{parse_workspace, Workspace};

pub const FILES: [(&str, &str); 8] = [
    ("f1.json", include_str!("../fixtures/f1.json")),
    ("f2.json", include_str!("../fixtures/f2.json")),
    ("f3.json", include_str!("../fixtures/f3.json")),
    ("f4.json", include_str!("../fixtures/f4.json")),
    ("f5.json", include_str!("../fixtures/f5.json")),
    ("f5prime.json", include_str!("../fixtures/f5prime.json")),
    ("f6.json", include_str!("../fixtures/f6.json")),
    ("f7.json", include_str!("../fixtures/f7.json")),
];

/// Text of a fixture by file name (`f5.json`) or stem (`f5`).
pub fn text(name: &str) -> Result<&'static str> {
    let file = if name.ends_with(".json") {
        name.to_string()
    } else {
        format!("{name}.json")
    };
    FILES
        .iter()
        .find(|(n, _)| *n == file)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Format(format!("unknown fixture {name}")))
}

pub fn load(name: &str) -> Result<Workspace> {
    parse_workspace(text(name)?, &|n: &str| text(n).map(str::to_string))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_loads() {
        for (name, _) in FILES {
            load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn fixture_sizes() {
        let f4 = load("f4").unwrap();
        assert_eq!(
            (f4.diagram.shape().vertex_count(), f4.diagram.shape().edge_count()),
            (2, 2)
        );
        let f5 = load("f5").unwrap();
        assert_eq!(
            (f5.diagram.shape().vertex_count(), f5.diagram.shape().edge_count()),
            (6, 6)
        );
        assert_eq!(f5.diagram.signature().sorts(), ["E", "V"]);
        let f7 = load("f7").unwrap();
        assert!(f7.typing.unwrap().family.is_cartesian());
    }
}
