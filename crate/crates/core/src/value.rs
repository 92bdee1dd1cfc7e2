//! Runtime values: a basic root plus named, ordered child lists.

use std::collections::BTreeMap;
use std::fmt;

use base64::Engine;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum BasicValue {
    #[default]
    Empty,
    Int(i32),
    Long(i64),
    Double(f64),
    Str(String),
    Bool(bool),
    Bytes(Vec<u8>),
}

impl BasicValue {
    pub fn is_empty(&self) -> bool {
        matches!(self, BasicValue::Empty)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            BasicValue::Empty => "void",
            BasicValue::Int(_) => "int",
            BasicValue::Long(_) => "long",
            BasicValue::Double(_) => "double",
            BasicValue::Str(_) => "string",
            BasicValue::Bool(_) => "bool",
            BasicValue::Bytes(_) => "raw",
        }
    }
}

/// Text rendering used by string concatenation and the console.
impl fmt::Display for BasicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasicValue::Empty => Ok(()),
            BasicValue::Int(i) => write!(f, "{i}"),
            BasicValue::Long(l) => write!(f, "{l}"),
            BasicValue::Double(d) => write!(f, "{d}"),
            BasicValue::Str(s) => f.write_str(s),
            BasicValue::Bool(b) => write!(f, "{b}"),
            BasicValue::Bytes(b) => {
                f.write_str(&base64::engine::general_purpose::STANDARD.encode(b))
            }
        }
    }
}

impl From<i32> for BasicValue {
    fn from(v: i32) -> Self {
        BasicValue::Int(v)
    }
}

impl From<i64> for BasicValue {
    fn from(v: i64) -> Self {
        BasicValue::Long(v)
    }
}

impl From<f64> for BasicValue {
    fn from(v: f64) -> Self {
        BasicValue::Double(v)
    }
}

impl From<bool> for BasicValue {
    fn from(v: bool) -> Self {
        BasicValue::Bool(v)
    }
}

impl From<&str> for BasicValue {
    fn from(v: &str) -> Self {
        BasicValue::Str(v.to_owned())
    }
}

impl From<String> for BasicValue {
    fn from(v: String) -> Self {
        BasicValue::Str(v)
    }
}

impl From<Vec<u8>> for BasicValue {
    fn from(v: Vec<u8>) -> Self {
        BasicValue::Bytes(v)
    }
}

/// A message or variable value.
///
/// Child lists are never empty: removing the last element of a list removes
/// the name, so "absent" and "empty list" are the same state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueTree {
    root: BasicValue,
    children: BTreeMap<String, Vec<ValueTree>>,
}

impl ValueTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(root: impl Into<BasicValue>) -> Self {
        ValueTree {
            root: root.into(),
            children: BTreeMap::new(),
        }
    }

    /// Builder-style helper appending one child.
    pub fn with_child(mut self, name: impl Into<String>, child: ValueTree) -> Self {
        self.push_child(name, child);
        self
    }

    pub fn root(&self) -> &BasicValue {
        &self.root
    }

    pub fn set_root(&mut self, root: impl Into<BasicValue>) {
        self.root = root.into();
    }

    pub fn children(&self) -> &BTreeMap<String, Vec<ValueTree>> {
        &self.children
    }

    pub fn child_list(&self, name: &str) -> &[ValueTree] {
        self.children.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn child(&self, name: &str) -> Option<&ValueTree> {
        self.child_list(name).first()
    }

    pub fn push_child(&mut self, name: impl Into<String>, child: ValueTree) {
        self.children.entry(name.into()).or_default().push(child);
    }

    /// Replaces the list under `name`; an empty list removes the name.
    pub fn set_children(&mut self, name: impl Into<String>, list: Vec<ValueTree>) {
        let name = name.into();
        if list.is_empty() {
            self.children.remove(&name);
        } else {
            self.children.insert(name, list);
        }
    }

    pub fn has_children(&self) -> bool {
        !self.children.is_empty()
    }

    /// Non-empty root or at least one child.
    pub fn is_defined(&self) -> bool {
        !self.root.is_empty() || self.has_children()
    }

    /// Follows `path`, always taking the first element of each child list.
    pub fn get_path<S: AsRef<str>>(&self, path: &[S]) -> Option<&ValueTree> {
        path.iter()
            .try_fold(self, |node, seg| node.child(seg.as_ref()))
    }

    /// Like [`ValueTree::get_path`], creating empty intermediate nodes.
    pub fn get_path_mut<S: AsRef<str>>(&mut self, path: &[S]) -> &mut ValueTree {
        let mut node = self;
        for seg in path {
            let list = node.children.entry(seg.as_ref().to_owned()).or_default();
            if list.is_empty() {
                list.push(ValueTree::new());
            }
            node = &mut list[0];
        }
        node
    }

    /// Total node count, including this one.
    pub fn size(&self) -> usize {
        1 + self
            .children
            .values()
            .flatten()
            .map(ValueTree::size)
            .sum::<usize>()
    }
}

impl<T: Into<BasicValue>> From<T> for ValueTree {
    fn from(v: T) -> Self {
        ValueTree::leaf(v)
    }
}
