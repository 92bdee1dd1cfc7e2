//! Resolved message types and the runtime conformance check.
//!
//! Resolution replaces every link by the linked definition. A link that
//! closes a cycle becomes a [`ResolvedType::Ref`] into the [`TypeTable`],
//! so recursive types stay finite.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use crate::ast::{Cardinality, NativeType};
use crate::ast::{TypeDecl, TypeDefinitionAst};
use crate::value::{BasicValue, ValueTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TypeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedType {
    /// A root of the given native type and no children.
    Basic(NativeType),
    /// A root plus exactly the declared children (closed world).
    Tree(NativeType, BTreeMap<String, (Cardinality, ResolvedType)>),
    /// `native { ? }`: children are unconstrained.
    OpenTree(NativeType),
    Choice(Box<ResolvedType>, Box<ResolvedType>),
    /// Reference to a table entry.
    Ref(TypeId),
}

impl ResolvedType {
    pub fn choice(left: ResolvedType, right: ResolvedType) -> Self {
        ResolvedType::Choice(Box::new(left), Box::new(right))
    }

    /// What `undefined` stands for.
    pub fn undefined() -> Self {
        ResolvedType::OpenTree(NativeType::Any)
    }

    pub fn depth(&self) -> usize {
        match self {
            ResolvedType::Basic(_) | ResolvedType::OpenTree(_) | ResolvedType::Ref(_) => 1,
            ResolvedType::Tree(_, subs) => {
                1 + subs.values().map(|(_, t)| t.depth()).max().unwrap_or(0)
            }
            ResolvedType::Choice(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn contains_choice(&self) -> bool {
        match self {
            ResolvedType::Choice(..) => true,
            ResolvedType::Tree(_, subs) => subs.values().any(|(_, t)| t.contains_choice()),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type `{0}` is not defined")]
    UnresolvedLink(String),
    #[error("type `{0}` is cyclic and never reaches a concrete definition")]
    Cyclic(String),
}

/// Named types after resolution. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
    types: Vec<ResolvedType>,
}

impl TypeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<TypeId> {
        self.index.get(name).copied().map(TypeId)
    }

    pub fn get(&self, name: &str) -> Option<&ResolvedType> {
        self.index.get(name).map(|&i| &self.types[i])
    }

    pub fn by_id(&self, id: TypeId) -> &ResolvedType {
        &self.types[id.0]
    }

    pub fn name(&self, id: TypeId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Type for a name used in an operation signature or a match arm:
    /// a native keyword, `undefined`, or a declared type (as a reference).
    pub fn lookup(&self, name: &str) -> Option<ResolvedType> {
        if let Some(n) = NativeType::from_keyword(name) {
            return Some(ResolvedType::Basic(n));
        }
        if name == "undefined" {
            return Some(ResolvedType::undefined());
        }
        self.id(name).map(ResolvedType::Ref)
    }

    pub fn conforms(&self, value: &ValueTree, ty: &ResolvedType) -> Result<bool, TypeError> {
        conforms(value, ty, self)
    }
}

enum Slot {
    Pending,
    InProgress,
    Done(ResolvedType),
}

struct Resolver<'a> {
    defs: Vec<&'a TypeDefinitionAst>,
    index: HashMap<String, usize>,
    slots: Vec<Slot>,
}

impl Resolver<'_> {
    fn name(&mut self, name: &str) -> Result<ResolvedType, TypeError> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| TypeError::UnresolvedLink(name.to_owned()))?;
        match &self.slots[i] {
            Slot::Done(t) => Ok(t.clone()),
            Slot::InProgress => Ok(ResolvedType::Ref(TypeId(i))),
            Slot::Pending => {
                self.slots[i] = Slot::InProgress;
                let t = self.def(self.defs[i])?;
                self.slots[i] = Slot::Done(t.clone());
                Ok(t)
            }
        }
    }

    fn def(&mut self, def: &TypeDefinitionAst) -> Result<ResolvedType, TypeError> {
        Ok(match def {
            TypeDefinitionAst::Native(n) => ResolvedType::Basic(*n),
            TypeDefinitionAst::Inline { native, subtypes } => {
                let mut map = BTreeMap::new();
                for st in subtypes {
                    if !map.contains_key(&st.name) {
                        let t = self.def(&st.def)?;
                        map.insert(st.name.clone(), (st.cardinality, t));
                    }
                }
                ResolvedType::Tree(*native, map)
            }
            TypeDefinitionAst::UntypedSubnodes(n) => ResolvedType::OpenTree(*n),
            TypeDefinitionAst::Link { name, .. } => self.name(name)?,
            TypeDefinitionAst::Undefined => ResolvedType::undefined(),
            TypeDefinitionAst::Choice(l, r) => ResolvedType::choice(self.def(l)?, self.def(r)?),
        })
    }
}

/// Resolves named definitions. When a name repeats, the first definition
/// wins (duplicates are reported by verification).
pub fn resolve<'a, I>(decls: I) -> Result<TypeTable, TypeError>
where
    I: IntoIterator<Item = (&'a str, &'a TypeDefinitionAst)>,
{
    let mut names = Vec::new();
    let mut defs = Vec::new();
    let mut index = HashMap::new();
    for (name, def) in decls {
        if index.contains_key(name) {
            continue;
        }
        index.insert(name.to_owned(), names.len());
        names.push(name.to_owned());
        defs.push(def);
    }
    let mut r = Resolver {
        slots: defs.iter().map(|_| Slot::Pending).collect(),
        defs,
        index,
    };
    let mut types = Vec::with_capacity(names.len());
    for name in &names {
        types.push(r.name(name)?);
    }
    Ok(TypeTable {
        index: r.index,
        names,
        types,
    })
}

pub fn resolve_decls(decls: &[TypeDecl]) -> Result<TypeTable, TypeError> {
    resolve(decls.iter().map(|d| (d.name.as_str(), &d.def)))
}

pub fn check_cardinality(count: usize, card: Cardinality) -> bool {
    let count = count as u64;
    u64::from(card.min) <= count && card.max.is_none_or(|max| count <= u64::from(max))
}

pub fn root_matches(native: NativeType, root: &BasicValue) -> bool {
    match native {
        NativeType::Int => matches!(root, BasicValue::Int(_)),
        NativeType::Long => matches!(root, BasicValue::Long(_)),
        NativeType::Double => matches!(root, BasicValue::Double(_)),
        NativeType::String => matches!(root, BasicValue::Str(_)),
        NativeType::Raw => matches!(root, BasicValue::Bytes(_)),
        NativeType::Void => root.is_empty(),
        NativeType::Any => !root.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Yes,
    No,
    /// The outcome hinges on a reference cycle that never reached a
    /// concrete definition at this value node.
    Cycle(TypeId),
}

fn check(
    value: &ValueTree,
    ty: &ResolvedType,
    table: &TypeTable,
    expanding: &mut Vec<TypeId>,
) -> Verdict {
    match ty {
        ResolvedType::Basic(n) => {
            if root_matches(*n, value.root()) && !value.has_children() {
                Verdict::Yes
            } else {
                Verdict::No
            }
        }
        ResolvedType::OpenTree(n) => {
            if root_matches(*n, value.root()) {
                Verdict::Yes
            } else {
                Verdict::No
            }
        }
        ResolvedType::Tree(n, subs) => {
            if !root_matches(*n, value.root()) {
                return Verdict::No;
            }
            if value.children().keys().any(|k| !subs.contains_key(k)) {
                return Verdict::No;
            }
            if subs
                .iter()
                .any(|(name, (card, _))| !check_cardinality(value.child_list(name).len(), *card))
            {
                return Verdict::No;
            }
            let mut pending = None;
            for (name, (_, t)) in subs {
                for child in value.child_list(name) {
                    // descending to a child starts a fresh expansion chain
                    match check(child, t, table, &mut Vec::new()) {
                        Verdict::Yes => {}
                        Verdict::No => return Verdict::No,
                        cycle => pending = pending.or(Some(cycle)),
                    }
                }
            }
            pending.unwrap_or(Verdict::Yes)
        }
        ResolvedType::Choice(l, r) => {
            let left = check(value, l, table, expanding);
            if left == Verdict::Yes {
                return Verdict::Yes;
            }
            match (left, check(value, r, table, expanding)) {
                (_, Verdict::Yes) => Verdict::Yes,
                (c @ Verdict::Cycle(_), _) | (_, c @ Verdict::Cycle(_)) => c,
                _ => Verdict::No,
            }
        }
        ResolvedType::Ref(id) => {
            if expanding.contains(id) {
                return Verdict::Cycle(*id);
            }
            expanding.push(*id);
            let v = check(value, table.by_id(*id), table, expanding);
            expanding.pop();
            v
        }
    }
}

/// Structural conformance of `value` to `ty`.
pub fn conforms(value: &ValueTree, ty: &ResolvedType, table: &TypeTable) -> Result<bool, TypeError> {
    match check(value, ty, table, &mut Vec::new()) {
        Verdict::Yes => Ok(true),
        Verdict::No => Ok(false),
        Verdict::Cycle(id) => Err(TypeError::Cyclic(table.name(id).to_owned())),
    }
}

/// Index of the first arm `value` conforms to.
pub fn select_arm(
    value: &ValueTree,
    arms: &[ResolvedType],
    table: &TypeTable,
) -> Result<Option<usize>, TypeError> {
    for (i, arm) in arms.iter().enumerate() {
        if conforms(value, arm, table)? {
            return Ok(Some(i));
        }
    }
    Ok(None)
}
