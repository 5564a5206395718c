//! Merging a rule file with its imports into one rule set.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use super::ast::{Expr, Rule, RuleFile, SuccessorItem};
use super::error::RuleError;
use super::parser::{parse_expression, parse_rule_file};
use super::Pos;

/// A resolved rule set: all rules of a file and its transitive imports.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: BTreeMap<String, Rule>,
    /// Attribute declarations in evaluation order; later entries override.
    pub attributes: Vec<(String, Expr)>,
    pub start_rule: String,
    /// Every file that contributed, root first.
    pub sources: Vec<PathBuf>,
}

impl RuleSet {
    /// Loads `path` and its imports. Import paths are relative to the
    /// importing file. `start` overrides the start rule.
    pub fn load(path: &Path, start: Option<&str>) -> Result<Self, RuleError> {
        let mut loader = Loader::default();
        let root = loader.load(path)?;
        loader.finish(root, start)
    }

    /// Resolves a rule file given as text. Imports are resolved against `base`.
    pub fn from_source(source: &str, base: &Path, start: Option<&str>) -> Result<Self, RuleError> {
        let mut loader = Loader::default();
        let file = parse_rule_file(source)?;
        let root = loader.merge(file, base, None)?;
        loader.finish(root, start)
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.get(name)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn start(&self) -> &Rule {
        &self.rules[&self.start_rule]
    }

    /// Replaces (or adds) attribute values, as given by `--define name=value`.
    pub fn define(&mut self, name: &str, value: Expr) {
        self.attributes.retain(|(n, _)| n != name);
        self.attributes.push((name.to_string(), value));
    }

    /// Rule calls whose target is not defined, as `(caller, callee, pos)`.
    pub fn undefined_calls(&self) -> Vec<(String, String, Pos)> {
        fn walk(items: &[SuccessorItem], set: &RuleSet, caller: &str, out: &mut Vec<(String, String, Pos)>) {
            for item in items {
                match item {
                    SuccessorItem::RuleCall { name, span, .. } => {
                        if !set.rules.contains_key(name) {
                            out.push((caller.to_string(), name.clone(), span.0));
                        }
                    }
                    SuccessorItem::OpCall { selectors: Some(block), .. } => {
                        for e in &block.entries {
                            walk(&e.successor, set, caller, out);
                        }
                    }
                    SuccessorItem::OpCall { .. } => {}
                    SuccessorItem::Cases(branches) => {
                        for b in branches {
                            walk(&b.body, set, caller, out);
                        }
                    }
                    SuccessorItem::Group(inner) => walk(inner, set, caller, out),
                }
            }
        }
        let mut out = Vec::new();
        for rule in self.rules.values() {
            walk(&rule.successor, self, &rule.name, &mut out);
        }
        out
    }
}

/// Parses `name=value` as given on the command line.
pub fn parse_define(text: &str) -> Result<(String, Expr), RuleError> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| RuleError::Syntax { pos: Pos::default(), msg: format!("definition `{text}` must look like name=value") })?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
        return Err(RuleError::Syntax { pos: Pos::default(), msg: format!("invalid attribute name `{name}`") });
    }
    Ok((name.to_string(), parse_expression(value)?))
}

#[derive(Default)]
struct Loader {
    rules: BTreeMap<String, Rule>,
    origin: BTreeMap<String, PathBuf>,
    attributes: Vec<(String, Expr)>,
    /// Start rules declared by imported (non-root) files.
    imported_starts: Vec<String>,
    loaded: HashSet<PathBuf>,
    stack: Vec<PathBuf>,
    sources: Vec<PathBuf>,
}

impl Loader {
    fn load(&mut self, path: &Path) -> Result<Option<String>, RuleError> {
        let import_err = |msg: String| RuleError::Import { path: path.display().to_string(), msg };
        let canonical = path.canonicalize().map_err(|e| import_err(e.to_string()))?;
        if self.stack.contains(&canonical) {
            return Err(import_err("import cycle".into()));
        }
        let source = std::fs::read_to_string(&canonical).map_err(|e| import_err(e.to_string()))?;
        let file = parse_rule_file(&source).map_err(|e| import_err(e.to_string()))?;
        self.loaded.insert(canonical.clone());
        self.sources.push(canonical.clone());
        self.stack.push(canonical.clone());
        let base = canonical.parent().map(Path::to_path_buf).unwrap_or_default();
        let start = self.merge(file, &base, Some(&canonical));
        self.stack.pop();
        start
    }

    /// Merges `file` (after its imports) and returns its own start rule.
    fn merge(&mut self, file: RuleFile, base: &Path, origin: Option<&Path>) -> Result<Option<String>, RuleError> {
        for import in &file.imports {
            let path = base.join(import);
            let canonical = path.canonicalize().map_err(|e| RuleError::Import { path: path.display().to_string(), msg: e.to_string() })?;
            if self.stack.contains(&canonical) {
                return Err(RuleError::Import { path: path.display().to_string(), msg: "import cycle".into() });
            }
            if self.loaded.contains(&canonical) {
                continue;
            }
            if let Some(start) = self.load(&path)? {
                self.imported_starts.push(start);
            }
        }
        let origin = origin.map(Path::to_path_buf).unwrap_or_default();
        for rule in file.rules {
            if self.rules.contains_key(&rule.name) {
                return Err(RuleError::DuplicateRule { name: rule.name.clone(), pos: rule.span.0 });
            }
            self.origin.insert(rule.name.clone(), origin.clone());
            self.rules.insert(rule.name.clone(), rule);
        }
        for attr in file.attributes {
            self.attributes.retain(|(n, _)| *n != attr.name);
            self.attributes.push((attr.name, attr.value));
        }
        Ok(file.start_rule)
    }

    fn finish(self, root_start: Option<String>, explicit: Option<&str>) -> Result<RuleSet, RuleError> {
        let start = match (explicit, root_start) {
            (Some(s), _) => s.to_string(),
            (None, Some(s)) => s,
            (None, None) => match self.imported_starts.as_slice() {
                [] => return Err(RuleError::MissingStartRule),
                [one] => one.clone(),
                many => return Err(RuleError::MultipleStartRules { count: many.len() }),
            },
        };
        if !self.rules.contains_key(&start) {
            return Err(RuleError::UnknownStartRule(start));
        }
        Ok(RuleSet { rules: self.rules, attributes: self.attributes, start_rule: start, sources: self.sources })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn imports_merge_and_root_attributes_override() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.pcg", "x = 1\n@StartRule\nA --> NIL");
        write(dir.path(), "b.pcg", "@StartRule\nB --> NIL");
        let root = write(dir.path(), "root.pcg", "import \"a.pcg\"\nimport \"b.pcg\"\nx = 2\n@StartRule\nR --> A B");
        let set = RuleSet::load(&root, None).unwrap();
        assert_eq!(set.start_rule, "R");
        assert_eq!(set.rules().count(), 3);
        assert_eq!(set.attributes.len(), 1);
        assert!(matches!(set.attributes[0].1.kind, super::super::ast::ExprKind::Number { value, .. } if value == 2.0));
        assert_eq!(set.sources.len(), 3);
    }

    #[test]
    fn start_rule_resolution() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.pcg", "@StartRule\nA --> NIL");
        write(dir.path(), "b.pcg", "@StartRule\nB --> NIL");
        let one = write(dir.path(), "one.pcg", "import \"a.pcg\"\nR --> A");
        assert_eq!(RuleSet::load(&one, None).unwrap().start_rule, "A");
        assert_eq!(RuleSet::load(&one, Some("R")).unwrap().start_rule, "R");
        let two = write(dir.path(), "two.pcg", "import \"a.pcg\"\nimport \"b.pcg\"\nR --> A");
        assert!(matches!(RuleSet::load(&two, None), Err(RuleError::MultipleStartRules { count: 2 })));
        let none = write(dir.path(), "none.pcg", "R --> NIL");
        assert!(matches!(RuleSet::load(&none, None), Err(RuleError::MissingStartRule)));
        assert!(matches!(RuleSet::load(&none, Some("Q")), Err(RuleError::UnknownStartRule(_))));
    }

    #[test]
    fn duplicates_and_cycles_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.pcg", "A --> NIL");
        let dup = write(dir.path(), "dup.pcg", "import \"a.pcg\"\n@StartRule\nA --> NIL");
        assert!(matches!(RuleSet::load(&dup, None), Err(RuleError::DuplicateRule { .. })));
        write(dir.path(), "c1.pcg", "import \"c2.pcg\"\n@StartRule\nC --> NIL");
        let c2 = write(dir.path(), "c2.pcg", "import \"c1.pcg\"\nD --> NIL");
        assert!(matches!(RuleSet::load(&c2, None), Err(RuleError::Import { .. })));
        let diamond_base = write(dir.path(), "base.pcg", "Base --> NIL");
        let _ = diamond_base;
        write(dir.path(), "l.pcg", "import \"base.pcg\"\nL --> Base");
        write(dir.path(), "r.pcg", "import \"base.pcg\"\nRr --> Base");
        let top = write(dir.path(), "top.pcg", "import \"l.pcg\"\nimport \"r.pcg\"\n@StartRule\nT --> L Rr");
        assert_eq!(RuleSet::load(&top, None).unwrap().rules().count(), 4);
    }

    #[test]
    fn defines_and_undefined_calls() {
        let mut set = RuleSet::from_source("w = 8h\n@StartRule\nA --> B [ case w > 1: C ]\nB --> NIL", Path::new("."), None).unwrap();
        let (name, value) = parse_define("w=9h").unwrap();
        set.define(&name, value);
        assert!(matches!(set.attributes[0].1.kind, super::super::ast::ExprKind::Number { value, .. } if value == 32400.0));
        let missing = set.undefined_calls();
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].1, "C");
        assert!(parse_define("novalue").is_err());
    }
}
