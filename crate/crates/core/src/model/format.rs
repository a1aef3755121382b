//! JSON instance documents.
//!
//! ```json
//! {
//!   "agents": ["alice", "bob"],
//!   "items": [{"id": "a", "utilities": {"alice": "1", "bob": "1"}}],
//!   "cake": {"alice": [{"start": "0", "end": "2/3", "density": "3/2"}]}
//! }
//! ```
//!
//! Every item must list a utility for every agent. Agents missing from
//! `cake` get zero density.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{DensitySegment, Instance, ModelError, Ratio};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RatioText {
    Text(String),
    Int(i64),
}

impl RatioText {
    fn parse(&self, context: impl FnOnce() -> String) -> Result<Ratio, ModelError> {
        match self {
            RatioText::Int(n) => Ok(Ratio::from_integer(*n)),
            RatioText::Text(s) => s.parse().map_err(|source| ModelError::BadRatio {
                context: context(),
                source,
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemDoc {
    id: String,
    utilities: IndexMap<String, RatioText>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    start: RatioText,
    end: RatioText,
    density: RatioText,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    agents: Vec<String>,
    items: Vec<ItemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cake: Option<IndexMap<String, Vec<SegmentDoc>>>,
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let n = doc.agents.len();
    let agent_of = |id: &str| -> Result<usize, ModelError> {
        doc.agents
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| ModelError::UnknownAgent(id.to_string()))
    };

    let mut utilities = vec![Vec::with_capacity(doc.items.len()); n];
    for item in &doc.items {
        let mut row: Vec<Option<Ratio>> = vec![None; n];
        for (agent, text) in &item.utilities {
            let i = agent_of(agent)?;
            row[i] = Some(text.parse(|| format!("item `{}`, agent `{agent}`", item.id))?);
        }
        for (i, u) in row.into_iter().enumerate() {
            let u = u.ok_or_else(|| ModelError::MissingUtility {
                item: item.id.clone(),
                agent: doc.agents[i].clone(),
            })?;
            utilities[i].push(u);
        }
    }

    let cake = match &doc.cake {
        None => None,
        Some(map) => {
            let mut per_agent = vec![Vec::new(); n];
            for (agent, segs) in map {
                let i = agent_of(agent)?;
                for s in segs {
                    let ctx = |field: &str| format!("cake of `{agent}`, {field}");
                    per_agent[i].push(DensitySegment::new(
                        s.start.parse(|| ctx("start"))?,
                        s.end.parse(|| ctx("end"))?,
                        s.density.parse(|| ctx("density"))?,
                    ));
                }
            }
            Some(per_agent)
        }
    };

    Instance::new(
        doc.agents.clone(),
        doc.items.iter().map(|t| t.id.clone()).collect(),
        utilities,
        cake,
    )
}

/// Serializes an instance in the document format, pretty-printed.
pub fn instance_to_json(inst: &Instance) -> String {
    let text = |r: &Ratio| RatioText::Text(r.to_string());
    let doc = InstanceDoc {
        agents: inst.agent_ids().to_vec(),
        items: inst
            .item_ids()
            .iter()
            .enumerate()
            .map(|(t, id)| ItemDoc {
                id: id.clone(),
                utilities: inst
                    .agent_ids()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.clone(), text(inst.utility(i, t))))
                    .collect(),
            })
            .collect(),
        cake: inst.cake().map(|cake| {
            inst.agent_ids()
                .iter()
                .zip(cake)
                .map(|(a, segs)| {
                    let docs = segs
                        .iter()
                        .map(|s| SegmentDoc {
                            start: text(&s.start),
                            end: text(&s.end),
                            density: text(&s.density),
                        })
                        .collect();
                    (a.clone(), docs)
                })
                .collect()
        }),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWIN: &str = r#"{
        "agents": ["1", "2"],
        "items": [
            {"id": "a", "utilities": {"1": "1", "2": "1"}},
            {"id": "b", "utilities": {"1": "-1", "2": "-1"}}
        ]
    }"#;

    #[test]
    fn parses_twin() {
        let inst = parse_instance(TWIN).unwrap();
        assert_eq!((inst.n(), inst.m()), (2, 2));
        assert_eq!(inst.utility(1, 1), &Ratio::from_integer(-1));
        assert!(!inst.has_cake());
    }

    #[test]
    fn parses_empty_item_list() {
        let inst = parse_instance(r#"{"agents": ["x", "y"], "items": []}"#).unwrap();
        assert_eq!((inst.n(), inst.m()), (2, 0));
    }

    #[test]
    fn parses_density_segment() {
        let inst = parse_instance(
            r#"{"agents": ["x"], "items": [],
                "cake": {"x": [{"start": "0", "end": "2/3", "density": "3/2"}]}}"#,
        )
        .unwrap();
        let seg = &inst.cake().unwrap()[0][0];
        assert_eq!(seg.start, Ratio::zero());
        assert_eq!(seg.end, Ratio::new(2, 3));
        assert_eq!(seg.density, Ratio::new(3, 2));
    }

    #[test]
    fn reports_errors() {
        let bad_ratio = r#"{"agents": ["x"], "items": [{"id": "a", "utilities": {"x": "1/0"}}]}"#;
        assert!(matches!(parse_instance(bad_ratio), Err(ModelError::BadRatio { .. })));

        let dup = r#"{"agents": ["x"], "items": [
            {"id": "a", "utilities": {"x": "1"}}, {"id": "a", "utilities": {"x": "2"}}]}"#;
        assert!(matches!(parse_instance(dup), Err(ModelError::DuplicateItem(_))));

        let missing = r#"{"agents": ["x", "y"], "items": [{"id": "a", "utilities": {"x": "1"}}]}"#;
        assert!(matches!(
            parse_instance(missing),
            Err(ModelError::MissingUtility { .. })
        ));

        let unknown = r#"{"agents": ["x"], "items": [{"id": "a", "utilities": {"z": "1"}}]}"#;
        assert!(matches!(parse_instance(unknown), Err(ModelError::UnknownAgent(_))));

        let overlap = r#"{"agents": ["x"], "items": [], "cake": {"x": [
            {"start": "0", "end": "1/2", "density": "1"},
            {"start": "1/4", "end": "1", "density": "1"}]}}"#;
        assert!(matches!(
            parse_instance(overlap),
            Err(ModelError::OverlappingSegments { .. })
        ));

        let negative = r#"{"agents": ["x"], "items": [], "cake": {"x": [
            {"start": "0", "end": "1", "density": "-1/2"}]}}"#;
        assert!(matches!(
            parse_instance(negative),
            Err(ModelError::NegativeDensity { .. })
        ));

        assert!(matches!(parse_instance("{"), Err(ModelError::Malformed(_))));
    }

    #[test]
    fn document_round_trip() {
        let inst = parse_instance(
            r#"{"agents": ["x", "y"], "items": [{"id": "a", "utilities": {"y": "-3/4", "x": 2}}],
                "cake": {"y": [{"start": "1/3", "end": "1", "density": "3/2"}]}}"#,
        )
        .unwrap();
        let again = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(again, inst);
    }
}
