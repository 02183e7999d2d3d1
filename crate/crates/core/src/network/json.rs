use super::{NetworkDocument, WaterNetwork};
use crate::error::{Error, Result};

/// Parses and validates a network JSON document.
///
/// Schema violations are reported with the JSON path of the offending value.
pub fn parse_network(text: &str) -> Result<WaterNetwork> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: NetworkDocument = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    WaterNetwork::new(doc.nodes, doc.links, doc.reactions)
}
