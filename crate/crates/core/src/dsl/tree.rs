//! Markup layer: YAML text to a plain node tree.
//!
//! Only the subset the DSL needs is accepted (scalars, maps, sequences).
//! Anchors, aliases, tags and duplicate keys are rejected here so the schema
//! walk never sees them.

use yaml_rust2::parser::{Event, MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Scalar { value: String, plain: bool },
    Seq(Vec<Node>),
    Map(Vec<(String, Node)>),
}

impl Node {
    pub(crate) fn describe(&self) -> &'static str {
        match self {
            Node::Scalar { .. } => "scalar",
            Node::Seq(_) => "sequence",
            Node::Map(_) => "mapping",
        }
    }

    /// Plain `~`, `null` or empty scalars.
    pub(crate) fn is_null(&self) -> bool {
        matches!(self, Node::Scalar { value, plain: true } if value.is_empty() || value == "~" || value == "null" || value == "Null" || value == "NULL")
    }
}

enum Frame {
    Seq(Vec<Node>),
    Map {
        entries: Vec<(String, Node)>,
        pending_key: Option<String>,
    },
}

#[derive(Default)]
struct Builder {
    stack: Vec<Frame>,
    root: Option<Node>,
    error: Option<String>,
}

impl Builder {
    fn fail(&mut self, msg: String) {
        if self.error.is_none() {
            self.error = Some(msg);
        }
    }

    fn push_value(&mut self, node: Node, mark: Marker) {
        if let Some(msg) = self.insert(node, mark) {
            self.fail(msg);
        }
    }

    fn insert(&mut self, node: Node, mark: Marker) -> Option<String> {
        match self.stack.last_mut() {
            None => self.root = Some(node),
            Some(Frame::Seq(items)) => items.push(node),
            Some(Frame::Map {
                entries,
                pending_key,
            }) => match pending_key.take() {
                Some(key) => {
                    if entries.iter().any(|(k, _)| *k == key) {
                        return Some(format!(
                            "duplicate key `{key}` at line {}, column {}",
                            mark.line(),
                            mark.col() + 1
                        ));
                    }
                    entries.push((key, node));
                }
                None => match node {
                    Node::Scalar { value, .. } => *pending_key = Some(value),
                    other => {
                        *pending_key = Some(String::new());
                        return Some(format!(
                            "mapping keys must be scalars, found a {} at line {}",
                            other.describe(),
                            mark.line()
                        ));
                    }
                },
            },
        }
        None
    }
}

impl MarkedEventReceiver for Builder {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        if self.error.is_some() {
            return;
        }
        let at = || format!("line {}, column {}", mark.line(), mark.col() + 1);
        match ev {
            Event::Alias(_) => self.fail(format!("aliases are not supported ({})", at())),
            Event::Scalar(value, style, anchor, tag) => {
                if anchor != 0 {
                    return self.fail(format!("anchors are not supported ({})", at()));
                }
                if tag.is_some() {
                    return self.fail(format!("tags are not supported ({})", at()));
                }
                let plain = style == TScalarStyle::Plain;
                self.push_value(Node::Scalar { value, plain }, mark);
            }
            Event::SequenceStart(anchor, tag) | Event::MappingStart(anchor, tag)
                if anchor != 0 || tag.is_some() =>
            {
                self.fail(format!("anchors and tags are not supported ({})", at()));
            }
            Event::SequenceStart(..) => self.stack.push(Frame::Seq(Vec::new())),
            Event::MappingStart(..) => self.stack.push(Frame::Map {
                entries: Vec::new(),
                pending_key: None,
            }),
            Event::SequenceEnd => {
                if let Some(Frame::Seq(items)) = self.stack.pop() {
                    self.push_value(Node::Seq(items), mark);
                }
            }
            Event::MappingEnd => {
                if let Some(Frame::Map { entries, .. }) = self.stack.pop() {
                    self.push_value(Node::Map(entries), mark);
                }
            }
            Event::DocumentStart
            | Event::DocumentEnd
            | Event::StreamStart
            | Event::StreamEnd
            | Event::Nothing => {}
        }
    }
}

/// Parses markup into a tree. An empty document yields an empty mapping.
pub(crate) fn parse_tree(source: &str) -> Result<Node, String> {
    let mut builder = Builder::default();
    let mut parser = Parser::new_from_str(source);
    parser
        .load(&mut builder, false)
        .map_err(|e| format!("malformed document: {e}"))?;
    if let Some(err) = builder.error {
        return Err(err);
    }
    Ok(builder.root.unwrap_or(Node::Map(Vec::new())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_nested_tree() {
        let node = parse_tree("a: 1\nb:\n  - x\n  - \"y\"\n").unwrap();
        let Node::Map(entries) = node else { panic!() };
        assert_eq!(entries[0].0, "a");
        assert_eq!(
            entries[1].1,
            Node::Seq(vec![
                Node::Scalar {
                    value: "x".into(),
                    plain: true
                },
                Node::Scalar {
                    value: "y".into(),
                    plain: false
                },
            ])
        );
    }

    #[test]
    fn rejects_anchor_alias_tag_and_duplicates() {
        assert!(parse_tree("a: &x 1\nb: *x\n").is_err());
        assert!(parse_tree("a: !!str 1\n").is_err());
        assert!(parse_tree("a: 1\na: 2\n").is_err());
        assert!(parse_tree("a: [1, 2\n").is_err());
    }

    #[test]
    fn empty_document_is_empty_map() {
        assert_eq!(parse_tree("").unwrap(), Node::Map(vec![]));
        assert_eq!(parse_tree("# only a comment\n").unwrap(), Node::Map(vec![]));
    }
}
